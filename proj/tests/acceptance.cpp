// Acceptance suite: one line per criterion, every tolerance pinned in code.
// Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eoslab/eoslab.hpp"

using namespace eoslab;

namespace {

int g_failures = 0;
int g_index = 0;

void report(const std::string& name, bool pass, const std::string& detail, double seconds) {
    ++g_index;
    if (!pass) ++g_failures;
    std::printf("[%s] criterion %2d: %s -- %s (%.2fs)\n", pass ? "PASS" : "FAIL", g_index,
                name.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string out_dir(const char* leaf) {
    auto p = std::filesystem::temp_directory_path() / "eoslab_acceptance" / leaf;
    std::filesystem::remove_all(p);
    return p.string();
}

const CheckResult* find_check(const RunManifest& man, const std::string& needle) {
    for (const auto& c : man.checks)
        if (c.name.find(needle) != std::string::npos) return &c;
    return nullptr;
}

// ---------------------------------------------------------------- 1 & 2

void criteria_reduced_dynamics() {
    Timer timer;
    ExperimentConfig cfg = default_config("fig-sde");
    cfg.out_dir = out_dir("fig-sde");
    RunManifest man = run_preset(cfg, true);
    const double secs = timer.elapsed();

    const CheckResult* stat = find_check(man, "stationarity");
    const CheckResult* gap = find_check(man, "gap formula");
    report("reduced-dynamics stationarity: E[x^2] within 5% of 0.5 for sigma^2 in {0,4,10,20,40}",
           stat && stat->pass && secs < 10.0, stat ? stat->detail : "check missing", secs);
    report("gap formula: E[y] within 20% of -eta sigma^2/(2 delta^2), monotone in sigma^2",
           gap && gap->pass && secs < 10.0, gap ? gap->detail : "check missing", secs);
}

// ---------------------------------------------------------------- 3

Eigen::MatrixXd random_symmetric(int n, RngStream& rng) {
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = rng.next_normal();
    return 0.5 * (M + M.transpose());
}

LandscapeReport synthetic_report(int dim, RngStream& rng, double eta) {
    LandscapeReport r;
    r.eta = eta;
    Eigen::MatrixXd H = random_symmetric(dim, rng);
    r.hvp = [H](const Vec& v) {
        Eigen::Map<const Eigen::VectorXd> x(v.data(), long(v.size()));
        Eigen::VectorXd y = H * x;
        return Vec(y.data(), y.data() + y.size());
    };
    r.u = rng.normal_vec(dim);
    normalize(r.u);
    r.gradS = rng.normal_vec(dim);
    r.kappa = dot(r.gradS, r.u);
    r.gradS_perp = project_out(r.gradS, r.u);
    r.beta = dot(r.gradS_perp, r.gradS_perp);
    r.alpha = 0.2 + rng.next_double();
    r.delta = std::sqrt(2.0 * r.alpha / r.beta);
    r.epsilon = eta * std::sqrt(r.alpha);
    r.at = zeros(std::size_t(dim));
    return r;
}

void criterion_identity_suite() {
    Timer timer;
    const int dim = 24;
    RngStream rng(7001);
    std::string detail;
    bool ok = true;

    // (a) scalar/vector projection identity of the full predicted step
    double worst_a = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        LandscapeReport r0 = synthetic_report(dim, rng, 0.01);
        LandscapeReport r1 = synthetic_report(dim, rng, 0.01);
        Vec v = rng.normal_vec(dim);
        Vec xi = rng.normal_vec(dim);
        PredictedVectorState s = make_predicted_state(v, r0);
        PredictedVectorState n = full_predicted_step(s, r0, r1, xi);
        const double zeta = dot(r1.u, xi);
        const double want = -(1.0 + r0.eta * s.y_hat) * s.x_hat -
                            0.5 * r0.eta * r0.kappa * s.x_hat * s.x_hat - r0.eta * zeta;
        worst_a = std::max(worst_a, std::abs(n.x_hat - want) / std::max(1.0, std::abs(want)));
    }
    char buf[64];
    if (worst_a > 1e-12) ok = false;
    std::snprintf(buf, sizeof buf, "partA=%.2e", worst_a);
    detail += buf;

    // (b) closed-form vs recursive y over 100 varying-coefficient steps
    double worst_b = 0.0;
    {
        const int T = 100;
        std::vector<LandscapeReport> refs;
        for (int k = 0; k <= T; ++k) refs.push_back(synthetic_report(dim, rng, 0.01));
        Vec v0 = scaled(rng.normal_vec(dim), 0.3);
        PredictedVectorState vs = make_predicted_state(v0, refs[0]);
        std::vector<double> xs;
        std::vector<Vec> xis;
        for (int t = 0; t < T; ++t) {
            xs.push_back(vs.x_hat);
            xis.push_back(scaled(rng.normal_vec(dim), 0.1));
            vs = full_predicted_step(vs, refs[std::size_t(t)], refs[std::size_t(t) + 1], xis.back());
            double closed = unroll_yhat(std::span<const double>(xs), std::span<const Vec>(xis),
                                        std::span<const LandscapeReport>(refs.data(), std::size_t(t) + 2), v0);
            worst_b = std::max(worst_b,
                               std::abs(closed - vs.y_hat) / std::max(1.0, std::abs(vs.y_hat)));
        }
    }
    if (worst_b > 1e-10) ok = false;
    std::snprintf(buf, sizeof buf, " partB=%.2e", worst_b);
    detail += buf;

    // (c) propagation factor vs an explicit dense matrix-product oracle
    double worst_c = 0.0;
    {
        std::vector<LandscapeReport> refs;
        for (int k = 0; k < 8; ++k) refs.push_back(synthetic_report(dim, rng, 0.01));
        auto dense_A = [&](const LandscapeReport& rep) {
            Eigen::MatrixXd P = Eigen::MatrixXd::Identity(dim, dim);
            Eigen::Map<const Eigen::VectorXd> u(rep.u.data(), dim);
            P -= u * u.transpose();
            Eigen::MatrixXd H(dim, dim);
            for (int j = 0; j < dim; ++j) {
                Vec e = unit(std::size_t(dim), std::size_t(j));
                Vec he = rep.hvp(e);
                for (int i = 0; i < dim; ++i) H(i, j) = he[std::size_t(i)];
            }
            return Eigen::MatrixXd((Eigen::MatrixXd::Identity(dim, dim) - rep.eta * H) * P);
        };
        for (int s = 0; s <= 6; ++s) {
            Eigen::VectorXd w =
                Eigen::Map<const Eigen::VectorXd>(refs[std::size_t(s)].gradS_perp.data(), dim);
            for (int k = s + 1; k <= 6; ++k) w = dense_A(refs[std::size_t(k)]) * w;
            double want = Eigen::Map<const Eigen::VectorXd>(refs[7].gradS_perp.data(), dim).dot(w);
            double got = propagation_factor(s, 6, refs);
            worst_c = std::max(worst_c, std::abs(got - want) / std::max(1.0, std::abs(want)));
        }
    }
    if (worst_c > 1e-10) ok = false;
    std::snprintf(buf, sizeof buf, " partC=%.2e", worst_c);
    detail += buf;

    const double secs = timer.elapsed();
    report("identity suite: step projection 1e-12, unrolled-vs-recursive 1e-10, propagation oracle 1e-10",
           ok && secs < 5.0, detail, secs);
}

// ---------------------------------------------------------------- 4

void criterion_noise_scaling() {
    Timer timer;
    ExperimentConfig cfg = default_config("noise-scan");
    cfg.seed = 7;
    cfg.out_dir = out_dir("noise-scan");
    RunManifest man = run_preset(cfg, true);
    const double secs = timer.elapsed();
    const CheckResult* c = find_check(man, "slope -1");
    report("projected noise scaling: slope -1 +/- 0.05 with r2 >= 0.99 over b in {8..128}, m = 200",
           c && c->pass && secs < 30.0, c ? c->detail : "check missing", secs);
}

// ---------------------------------------------------------------- 5

void criterion_gap_scaling() {
    Timer timer;
    ExperimentConfig cfg = default_config("gap-scan-batch");
    cfg.out_dir = out_dir("gap-scan");
    RunManifest man = run_preset(cfg, true);
    const double secs = timer.elapsed();
    const CheckResult* mono = find_check(man, "positive and decreasing");
    const CheckResult* fit = find_check(man, "power law slope");
    const bool pass = mono && mono->pass && fit && fit->pass && secs < 300.0;
    report("sharpness-gap scaling: gaps positive, decreasing, slope in [-1.3,-0.7], r2 >= 0.9",
           pass,
           (mono ? mono->detail : "missing") + "; " + (fit ? fit->detail : "missing"), secs);
}

// ---------------------------------------------------------------- 6

void criterion_gd_limit() {
    Timer timer;
    ExperimentConfig cfg = default_config("gd-baseline");
    cfg.out_dir = out_dir("gd-baseline");
    RunManifest man = run_preset(cfg, true);
    const double secs = timer.elapsed();
    const CheckResult* c = find_check(man, "GD equilibrium");
    report("GD limit: sigma = 0 equilibrium sharpness in [2/eta, 1.05 * 2/eta]",
           c && c->pass, c ? c->detail : "check missing", secs);
}

// ---------------------------------------------------------------- 7

void criterion_coupling_scaling() {
    Timer timer;
    ExperimentConfig cfg = default_config("coupling");
    cfg.out_dir = out_dir("coupling");
    RunManifest man = run_preset(cfg, true);
    const double secs = timer.elapsed();
    const CheckResult* zero = find_check(man, "t=0");
    const CheckResult* ratio = find_check(man, "halving eps");
    const bool pass = zero && zero->pass && ratio && ratio->pass && secs < 120.0;
    report("coupling residual scaling: t=0 deviation exactly 0; halving eps halves max deviation (x1.5)",
           pass, (zero ? zero->detail : "missing") + ";" + (ratio ? ratio->detail : "missing"),
           secs);
}

// ---------------------------------------------------------------- 8

void criterion_batch_sharpness() {
    Timer timer;
    ExperimentConfig cfg = default_config("batch-sharpness");
    cfg.out_dir = out_dir("batch-sharpness");
    RunManifest man = run_preset(cfg, true);
    const double secs = timer.elapsed();
    const CheckResult* bs = find_check(man, "within 10%");
    const CheckResult* below = find_check(man, "3 pooled SE");
    const bool pass = bs && bs->pass && below && below->pass;
    report("batch-sharpness saturation: BS within 10% of 2/eta; S_sgd below S_gd by >= 3 pooled SE",
           pass, (bs ? bs->detail : "missing") + "; " + (below ? below->detail : "missing"), secs);
}

// ---------------------------------------------------------------- 9

void criterion_decorrelation() {
    Timer timer;
    ExperimentConfig cfg = default_config("decorrelation");
    cfg.out_dir = out_dir("decorrelation");
    RunManifest man = run_preset(cfg, true);
    const double secs = timer.elapsed();
    const CheckResult* c = find_check(man, "decorrelation");
    report("decorrelation residual: |lhs - rhs| <= 10% of lhs for sigma^2 in {4, 10, 40}",
           c && c->pass, c ? c->detail : "check missing", secs);
}

// ---------------------------------------------------------------- 10

void criterion_infrastructure() {
    Timer timer;
    std::string detail;
    bool ok = true;

    // Lanczos vs dense oracle on 100 random symmetric matrices
    {
        RngStream rng(9001);
        int failures = 0;
        for (int trial = 0; trial < 100; ++trial) {
            int n = 5 + rng.next_int(96);
            Eigen::MatrixXd A = random_symmetric(n, rng);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
            double want = es.eigenvalues().maxCoeff();
            HvpFn op = [&A](const Vec& v) {
                Eigen::Map<const Eigen::VectorXd> x(v.data(), long(v.size()));
                Eigen::VectorXd y = A * x;
                return Vec(y.data(), y.data() + y.size());
            };
            EigenPair got = lanczos_top(op, n, rng, -1, 1e-10, nullptr, false);
            if (std::abs(got.value - want) > 1e-8 * A.operatorNorm()) ++failures;
        }
        if (failures > 0) ok = false;
        detail += "lanczos_failures=" + std::to_string(failures) + "/100";
    }

    // constrained trajectory: S within 1e-6 * (2/eta) once active, loss non-increasing
    {
        CanonicalSpec cs;
        cs.h0 = 196.0;
        cs.alpha0 = 3.0;
        cs.lam = 0.0;
        cs.rho = 1.0;
        cs.k_bulk = 8;
        cs.n_samples = 16;
        auto h = make_canonical(cs);
        StableSetSpec spec = make_stable_spec(0.01);
        RngStream rng(9002);
        Vec theta = zeros(std::size_t(h->dim()));
        theta[0] = 0.3;
        theta[1] = 5.0;
        for (int k = 2; k < h->dim(); ++k) theta[std::size_t(k)] = 0.7;
        RefTrajectory traj = make_ref_trajectory(theta, h, spec, rng);
        for (int t = 0; t < 200; ++t) advance_ref(traj, h, rng);
        double worst_track = 0.0;
        bool descent = true;
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < traj.points.size(); ++i) {
            worst_track = std::max(worst_track, std::abs(traj.reports[i].S - 200.0));
            double L = h->loss(traj.points[i]);
            if (L > prev + 1e-9 * std::max(1.0, std::abs(prev))) descent = false;
            prev = L;
        }
        if (worst_track > 1e-6 * 200.0 || !descent) ok = false;
        char buf[64];
        std::snprintf(buf, sizeof buf, " track=%.2e", worst_track);
        detail += buf + std::string(descent ? " descent" : " NOT-DESCENT");
    }

    // identical seeds give byte-identical CSVs
    {
        ExperimentConfig cfg = default_config("fig-sde");
        cfg.runs = 10;
        cfg.steps = 500;
        cfg.sigma_list = {10.0};
        cfg.out_dir = out_dir("det-a");
        RunManifest a = run_preset(cfg);
        cfg.out_dir = out_dir("det-b");
        RunManifest b = run_preset(cfg);
        bool identical = a.outputs.size() == b.outputs.size();
        for (std::size_t i = 0; identical && i < a.outputs.size(); ++i)
            if (a.outputs[i].first.ends_with(".csv") &&
                a.outputs[i].second != b.outputs[i].second)
                identical = false;
        if (!identical) ok = false;
        detail += identical ? " csv-identical" : " CSV-MISMATCH";
    }

    report("infrastructure: Lanczos oracle 1e-8||A||, trajectory tracking 1e-6*(2/eta), byte-identical CSVs",
           ok, detail, timer.elapsed());
}

} // namespace

int main() {
    std::printf("eoslab acceptance suite\n");
    criteria_reduced_dynamics();   // 1, 2
    criterion_identity_suite();    // 3
    criterion_noise_scaling();     // 4
    criterion_gap_scaling();       // 5
    criterion_gd_limit();          // 6
    criterion_coupling_scaling();  // 7
    criterion_batch_sharpness();   // 8
    criterion_decorrelation();     // 9
    criterion_infrastructure();    // 10
    std::printf("%d/%d criteria passed\n", g_index - g_failures, g_index);
    return g_failures == 0 ? 0 : 1;
}
