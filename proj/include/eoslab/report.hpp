#pragma once

#include <cmath>
#include <functional>
#include <memory>

#include "eoslab/landscape.hpp"
#include "eoslab/lanczos.hpp"

namespace eoslab {

// Full landscape measurement at one point: sharpness S, top eigenvector u,
// sharpness gradient and its u-orthogonal part, and the scalar parameters
//   alpha = -<grad L, grad S>      (progressive sharpening)
//   beta  = ||grad S perp||^2      (self-stabilization strength)
//   delta = sqrt(2 alpha / beta), epsilon = eta sqrt(alpha)
//   kappa = <grad S, u>
// When alpha <= 0 (common at oscillating iterates), delta and epsilon are
// reported as 0 with alpha_nonpositive set instead of going complex.
struct LandscapeReport {
    double S = 0.0;
    Vec u;
    Vec gradS;
    Vec gradS_perp;
    double alpha = 0.0;
    double beta = 0.0;
    double delta = 0.0;
    double epsilon = 0.0;
    double kappa = 0.0;
    bool alpha_nonpositive = false;
    bool degenerate_top = false;
    double eigengap_ratio = 0.0;  // lambda_2 * eta / 2; NaN when not probed
    double eta = 0.0;
    Vec at;
    HvpFn hvp;  // Hessian-vector product pinned at `at`

    double delta_sq() const { return delta * delta; }
};

struct ProbeOptions {
    const Vec* reference = nullptr;  // eigenvector orientation / warm start
    bool with_eigengap = true;
    int lanczos_max_iters = -1;
    double lanczos_tol = 0.0;  // 0 = auto: 1e-10 analytic, 1e-8 finite-difference
};

// Finite-difference Hessian products have a noise floor; asking Lanczos for
// residuals below it would never converge.
inline double auto_lanczos_tol(const Landscape& h, double requested) {
    if (requested > 0.0) return requested;
    return h.hvp_kind() == Deriv::analytic ? 1e-10 : 1e-8;
}

inline LandscapeReport probe_point(const std::shared_ptr<const Landscape>& h, const Vec& theta,
                                   double eta, RngStream& rng, const ProbeOptions& opt = {}) {
    if (int(theta.size()) != h->dim())
        throw Error("probe_point: dimension mismatch");
    LandscapeReport r;
    r.eta = eta;
    r.at = theta;
    Vec at_copy = theta;
    r.hvp = [h, at_copy](const Vec& v) { return h->hvp(at_copy, v); };

    const double tol = auto_lanczos_tol(*h, opt.lanczos_tol);
    EigenPair top = lanczos_top(r.hvp, h->dim(), rng, opt.lanczos_max_iters, tol,
                                opt.reference, opt.with_eigengap);
    r.S = top.value;
    r.u = top.vector;
    r.degenerate_top = top.degenerate;

    r.gradS = h->third_form(theta, r.u);
    r.kappa = dot(r.gradS, r.u);
    r.gradS_perp = project_out(r.gradS, r.u);
    r.beta = dot(r.gradS_perp, r.gradS_perp);
    r.alpha = -dot(h->grad(theta), r.gradS);
    r.alpha_nonpositive = !(r.alpha > 0.0);
    if (r.alpha_nonpositive || r.beta <= 0.0) {
        r.delta = 0.0;
        r.epsilon = r.alpha_nonpositive ? 0.0 : eta * std::sqrt(r.alpha);
    } else {
        r.delta = std::sqrt(2.0 * r.alpha / r.beta);
        r.epsilon = eta * std::sqrt(r.alpha);
    }

    if (opt.with_eigengap && h->dim() >= 2) {
        double l2 = std::isfinite(top.second_value)
                        ? top.second_value
                        : lanczos_second(r.hvp, h->dim(), top, rng);
        r.eigengap_ratio = l2 * eta / 2.0;
    } else {
        r.eigengap_ratio = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

} // namespace eoslab
