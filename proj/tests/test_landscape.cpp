#include <catch2/catch_amalgamated.hpp>

#include "eoslab/canonical.hpp"
#include "eoslab/lanczos.hpp"
#include "eoslab/stats.hpp"

using namespace eoslab;

namespace {

CanonicalSpec small_spec() {
    CanonicalSpec s;
    s.h0 = 2.0;
    s.alpha0 = 1.0;
    s.rho = 0.5;
    s.lam = 0.25;
    s.k_bulk = 3;
    s.n_samples = 64;
    s.noise_cov_scale = 0.7;
    s.seed = 5;
    return s;
}

} // namespace

TEST_CASE("canonical loss values", "[landscape]") {
    auto h = make_canonical(small_spec());
    Vec origin = zeros(std::size_t(h->dim()));
    CHECK(h->loss(origin) == 0.0);

    // at (x=1, y=0, z=0) with h0=2 the only surviving term is h0 x^2 / 2 = 1
    Vec p = origin;
    p[0] = 1.0;
    CHECK(h->loss(p) == Catch::Approx(1.0));
}

TEST_CASE("non-finite loss fails with point diagnostics", "[landscape]") {
    CanonicalSpec s = small_spec();
    s.x4 = 1.0;
    auto h = make_canonical(s);
    Vec huge = zeros(std::size_t(h->dim()));
    huge[0] = 1e200;  // x^4 overflows
    try {
        h->loss(huge);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("norm") != std::string::npos);
    }
}

TEST_CASE("canonical gradient is the mean of per-sample gradients", "[landscape]") {
    auto h = make_canonical(small_spec());
    RngStream rng(1);
    Vec theta = rng.normal_vec(std::size_t(h->dim()));
    Vec g = h->grad(theta);
    Vec acc = zeros(std::size_t(h->dim()));
    for (int i = 0; i < h->n_samples(); ++i) axpy(1.0 / h->n_samples(), h->sample_grad(theta, i), acc);
    CHECK(distance(g, acc) <= 1e-10 * std::max(1.0, norm2(g)));
}

TEST_CASE("gradient matches central differences at order >= 1.9", "[landscape]") {
    auto h = make_canonical(small_spec());
    RngStream rng(2);
    Vec theta = rng.normal_vec(std::size_t(h->dim()));
    Vec d = rng.normal_vec(std::size_t(h->dim()));
    normalize(d);
    double exact = dot(h->grad(theta), d);
    auto fd = [&](double eps) {
        Vec p = theta, m = theta;
        axpy(eps, d, p);
        axpy(-eps, d, m);
        return (h->loss(p) - h->loss(m)) / (2 * eps);
    };
    double e3 = std::abs(fd(1e-3) - exact);
    double e4 = std::abs(fd(1e-4) - exact);
    if (e4 > 1e-14) {  // below that, rounding dominates and the order test is vacuous
        double order = std::log10(e3 / e4);
        CHECK(order >= 1.9);
    }
}

TEST_CASE("canonical hvp is analytic and symmetric", "[landscape]") {
    auto h = make_canonical(small_spec());
    CHECK(h->hvp_kind() == Deriv::analytic);
    RngStream rng(3);
    Vec theta = rng.normal_vec(std::size_t(h->dim()));
    for (int trial = 0; trial < 10; ++trial) {
        Vec v = rng.normal_vec(std::size_t(h->dim()));
        Vec w = rng.normal_vec(std::size_t(h->dim()));
        double a = dot(h->hvp(theta, v), w);
        double b = dot(v, h->hvp(theta, w));
        CHECK(std::abs(a - b) <= 1e-8 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("canonical hvp at the origin is diag(h0, lam, rho I)", "[landscape]") {
    auto h = make_canonical(small_spec());
    Vec origin = zeros(std::size_t(h->dim()));
    Vec ex = unit(std::size_t(h->dim()), 0);
    Vec r = h->hvp(origin, ex);
    CHECK(r[0] == Catch::Approx(2.0));
    for (int k = 1; k < h->dim(); ++k) CHECK(r[std::size_t(k)] == 0.0);
    Vec ez = unit(std::size_t(h->dim()), 2);
    Vec rz = h->hvp(origin, ez);
    CHECK(rz[2] == Catch::Approx(0.5));  // rho
}

TEST_CASE("canonical third form", "[landscape]") {
    auto h = make_canonical(small_spec());
    Vec origin = zeros(std::size_t(h->dim()));
    Vec ex = unit(std::size_t(h->dim()), 0);
    Vec t = h->third_form(origin, ex);
    CHECK(t[1] == Catch::Approx(1.0));  // e_y exactly
    CHECK(t[0] == 0.0);
    for (int k = 2; k < h->dim(); ++k) CHECK(t[std::size_t(k)] == 0.0);
}

TEST_CASE("pure quadratic landscape has zero third form", "[landscape]") {
    CanonicalSpec s = small_spec();
    s.alpha0 = 0.0;
    s.cubic = 0.0;  // x-coupling removed
    auto h = make_canonical(s);
    RngStream rng(4);
    Vec theta = rng.normal_vec(std::size_t(h->dim()));
    Vec u = rng.normal_vec(std::size_t(h->dim()));
    normalize(u);
    CHECK(norm2(h->third_form(theta, u)) == 0.0);
}

TEST_CASE("sharpness is h0 + y near the axis", "[landscape]") {
    CanonicalSpec s = small_spec();
    s.h0 = 10.0;
    s.lam = 0.0;
    auto h = make_canonical(s);
    RngStream rng(5);
    Vec theta = zeros(std::size_t(h->dim()));
    theta[1] = 0.35;  // y
    theta[0] = 1e-5;  // |x| small
    HvpFn op = [&](const Vec& v) { return h->hvp(theta, v); };
    EigenPair top = lanczos_top(op, h->dim(), rng, -1, 1e-10);
    CHECK(top.value == Catch::Approx(10.35).margin(1e-6));
}

TEST_CASE("full batch reproduces GD: xi is exactly zero", "[landscape][noise]") {
    auto h = make_canonical(small_spec());
    NoiseModel nm{h->n_samples(), Sampling::without_replacement, RngStream(9)};
    RngStream rng(6);
    Vec theta = rng.normal_vec(std::size_t(h->dim()));
    BatchGrad bg = batch_grad(*h, theta, nm);
    CHECK(norm2(bg.xi) == 0.0);
    CHECK(distance(bg.g, h->grad(theta)) == 0.0);
}

TEST_CASE("single-sample batch equals one per-sample gradient", "[landscape][noise]") {
    auto h = make_canonical(small_spec());
    NoiseModel nm{1, Sampling::with_replacement, RngStream(10)};
    RngStream rng(7);
    Vec theta = rng.normal_vec(std::size_t(h->dim()));
    BatchGrad bg = batch_grad(*h, theta, nm);
    REQUIRE(bg.batch.size() == 1);
    CHECK(distance(bg.g, h->sample_grad(theta, bg.batch[0])) <= 1e-15);
}

TEST_CASE("oversized batch without replacement fails", "[landscape][noise]") {
    auto h = make_canonical(small_spec());
    NoiseModel nm{h->n_samples() + 1, Sampling::without_replacement, RngStream(11)};
    Vec theta = zeros(std::size_t(h->dim()));
    CHECK_THROWS_AS(batch_grad(*h, theta, nm), Error);
}

TEST_CASE("gaussian surrogate covariance matches the per-sample covariance", "[landscape][noise]") {
    CanonicalSpec s = small_spec();
    s.noise_cov_scale = 2.0;
    s.n_samples = 128;
    auto h = make_canonical(s);
    Vec theta = zeros(std::size_t(h->dim()));
    Vec u = unit(std::size_t(h->dim()), 0);

    const int b = 4;
    double want = h->sample_grad_variance_along(u) / b;

    NoiseModel nm{b, Sampling::gaussian_surrogate, RngStream(12)};
    const int m = 10000;
    double acc = 0.0, acc2 = 0.0;
    for (int j = 0; j < m; ++j) {
        BatchGrad bg = batch_grad(*h, theta, nm);
        double c = dot(bg.xi, u);
        acc += c;
        acc2 += c * c;
    }
    double var = (acc2 - acc * acc / m) / (m - 1);
    CHECK(var == Catch::Approx(want).epsilon(0.05));
}

TEST_CASE("ensemble mean of xi shrinks like 1/sqrt(runs)", "[landscape][noise]") {
    CanonicalSpec s = small_spec();
    s.noise_cov_scale = 1.0;
    auto h = make_canonical(s);
    Vec theta = zeros(std::size_t(h->dim()));
    NoiseModel nm{8, Sampling::with_replacement, RngStream(13)};
    Vec mean = zeros(std::size_t(h->dim()));
    const int m = 4000;
    for (int j = 0; j < m; ++j) axpy(1.0 / m, batch_grad(*h, theta, nm).xi, mean);
    double per_draw = std::sqrt(h->sample_grad_variance_along(unit(std::size_t(h->dim()), 0)) / 8);
    CHECK(norm2(mean) < 5.0 * per_draw / std::sqrt(double(m)));
}

TEST_CASE("projected noise scales as 1/b", "[landscape][noise]") {
    CanonicalSpec s = small_spec();
    s.noise_cov_scale = 3.0;
    s.n_samples = 256;
    auto h = make_canonical(s);
    Vec theta = zeros(std::size_t(h->dim()));
    Vec u = unit(std::size_t(h->dim()), 0);
    std::vector<std::pair<double, double>> pts;
    for (int b : {8, 16, 32, 64, 128}) {
        NoiseModel nm{b, Sampling::with_replacement, RngStream(14, std::uint64_t(b))};
        const int m = 2000;
        std::vector<double> proj;
        proj.reserve(m);
        for (int j = 0; j < m; ++j) proj.push_back(dot(batch_grad(*h, theta, nm).g, u));
        pts.emplace_back(double(b), variance_of(proj));
    }
    PowerLawFit fit = power_law_fit(pts);
    CHECK(fit.slope == Catch::Approx(-1.0).margin(0.05));
}
