#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "eoslab/landscape.hpp"

namespace eoslab {

// Analytic cubic model landscape on coordinates (x, y, z_1..z_k):
//
//   L(x, y, z) = 1/2 (h0 + cubic*y) x^2 - alpha0*y + 1/2 lam*y^2
//              + 1/2 rho ||z||^2 + 1/4 x4 * x^4
//
// Near x = 0 the top Hessian eigenvalue is h0 + cubic*y with eigenvector e_x,
// and grad^3 L(e_x, e_x) = cubic * e_y, so the sharpness gradient is carried
// by the y coordinate. alpha0 drives progressive sharpening, lam confines y
// (damping the sharpness oscillation), rho is the bulk curvature, and x4 adds
// genuine fourth-order structure (0 = exact cubic model).
//
// Per-sample structure: sample i is L plus a linear tilt <o_i, theta> where
// the offsets o_i are frozen, exactly centered, and supported on the first
// noise_dim coordinates with per-coordinate scale noise_cov_scale. All
// samples share the Hessian, and the projected noise variance is directly
// controllable through noise_cov_scale.
struct CanonicalSpec {
    double h0 = 196.0;
    double alpha0 = 3.0;
    double rho = 1.0;
    double lam = 0.0;
    int k_bulk = 8;
    double noise_cov_scale = 0.0;
    double cubic = 1.0;
    double x4 = 0.0;
    int n_samples = 512;
    int noise_dim = 1;
    std::uint64_t seed = 1;

    int dim() const { return 2 + k_bulk; }
};

class CanonicalLandscape final : public Landscape {
public:
    explicit CanonicalLandscape(const CanonicalSpec& spec) : spec_(spec) {
        if (spec.k_bulk < 0) throw Error("CanonicalSpec: k_bulk must be >= 0");
        if (spec.n_samples < 1) throw Error("CanonicalSpec: n_samples must be >= 1");
        if (!(spec.h0 > spec.rho && spec.rho > 0.0))
            throw Error("CanonicalSpec: requires h0 > rho > 0");
        if (spec.lam < 0.0) throw Error("CanonicalSpec: lam must be >= 0");
        if (spec.noise_dim < 0 || spec.noise_dim > spec.dim())
            throw Error("CanonicalSpec: noise_dim out of range");

        // frozen per-sample tilts, centered so they sum to zero exactly up to rounding
        offsets_.assign(spec.n_samples, zeros(spec.dim()));
        if (spec.noise_cov_scale != 0.0 && spec.noise_dim > 0) {
            RngStream rng(spec.seed, 0);
            for (auto& o : offsets_)
                for (int k = 0; k < spec.noise_dim; ++k)
                    o[k] = spec.noise_cov_scale * rng.next_normal();
            for (int k = 0; k < spec.noise_dim; ++k) {
                double m = 0.0;
                for (const auto& o : offsets_) m += o[k];
                m /= double(spec.n_samples);
                for (auto& o : offsets_) o[k] -= m;
            }
        }
    }

    const CanonicalSpec& spec() const { return spec_; }

    int dim() const override { return spec_.dim(); }
    int n_samples() const override { return spec_.n_samples; }

    double loss(const Vec& theta) const override {
        check_point(theta, "canonical loss");
        const double x = theta[0], y = theta[1];
        double zz = 0.0;
        for (int k = 2; k < dim(); ++k) zz += theta[k] * theta[k];
        double v = 0.5 * (spec_.h0 + spec_.cubic * y) * x * x - spec_.alpha0 * y +
                   0.5 * spec_.lam * y * y + 0.5 * spec_.rho * zz +
                   0.25 * spec_.x4 * x * x * x * x;
        return checked_loss_value(v, theta, "canonical loss");
    }

    Vec grad(const Vec& theta) const override {
        check_point(theta, "canonical grad");
        const double x = theta[0], y = theta[1];
        Vec g(dim());
        g[0] = (spec_.h0 + spec_.cubic * y) * x + spec_.x4 * x * x * x;
        g[1] = 0.5 * spec_.cubic * x * x - spec_.alpha0 + spec_.lam * y;
        for (int k = 2; k < dim(); ++k) g[k] = spec_.rho * theta[k];
        return g;
    }

    Vec sample_grad(const Vec& theta, int i) const override {
        Vec g = grad(theta);
        const Vec& o = offsets_.at(std::size_t(i));
        for (int k = 0; k < dim(); ++k) g[k] += o[k];
        return g;
    }

    Vec hvp(const Vec& theta, const Vec& v) const override {
        check_point(theta, "canonical hvp");
        require_same_dim(theta, v, "canonical hvp");
        const double x = theta[0], y = theta[1];
        Vec r(dim());
        const double hxx = spec_.h0 + spec_.cubic * y + 3.0 * spec_.x4 * x * x;
        r[0] = hxx * v[0] + spec_.cubic * x * v[1];
        r[1] = spec_.cubic * x * v[0] + spec_.lam * v[1];
        for (int k = 2; k < dim(); ++k) r[k] = spec_.rho * v[k];
        return r;
    }

    // linear per-sample tilts share the Hessian: H_B == H for every batch
    Vec batch_hvp(const Vec& theta, const Vec& v, std::span<const int>) const override {
        return hvp(theta, v);
    }

    Vec third_form(const Vec& theta, const Vec& u) const override {
        check_point(theta, "canonical third_form");
        require_same_dim(theta, u, "canonical third_form");
        const double x = theta[0];
        Vec r = zeros(dim());
        r[0] = 2.0 * spec_.cubic * u[0] * u[1] + 6.0 * spec_.x4 * x * u[0] * u[0];
        r[1] = spec_.cubic * u[0] * u[0];
        return r;
    }

    Deriv hvp_kind() const override { return Deriv::analytic; }
    Deriv third_form_kind() const override { return Deriv::analytic; }

    // population covariance of <g_i, u> over the frozen sample tilts
    double sample_grad_variance_along(const Vec& u) const {
        double m = 0.0, m2 = 0.0;
        for (const auto& o : offsets_) {
            double c = dot(o, u);
            m += c;
            m2 += c * c;
        }
        m /= double(offsets_.size());
        return m2 / double(offsets_.size()) - m * m;
    }

private:
    CanonicalSpec spec_;
    std::vector<Vec> offsets_;
};

inline std::shared_ptr<CanonicalLandscape> make_canonical(const CanonicalSpec& spec) {
    return std::make_shared<CanonicalLandscape>(spec);
}

} // namespace eoslab
