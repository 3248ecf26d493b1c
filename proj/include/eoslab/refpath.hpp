#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eoslab/report.hpp"

namespace eoslab {

// Stable set M = { theta : S(theta) <= 2/eta  and  <grad L(theta), u(theta)> = 0 },
// with membership checked to (tol_sharp, tol_align).
struct StableSetSpec {
    double eta = 0.01;
    double tol_sharp = 0.0;   // |S - 2/eta| slack on the active constraint
    double tol_align = 1e-8;  // |<grad L, u>| <= tol_align * ||grad L||
    int max_proj_iters = 50;
    bool with_eigengap = false;  // full eigengap probe on stored trajectory points
    double lanczos_tol = 0.0;    // 0 = auto (see ProbeOptions)
};

inline StableSetSpec make_stable_spec(double eta) {
    StableSetSpec s;
    s.eta = eta;
    s.tol_sharp = 1e-6 * (2.0 / eta);
    return s;
}

struct ProjectionError : Error {
    ProjectionError(const std::string& msg, double sharp_residual_, double align_residual_)
        : Error(msg), sharp_residual(sharp_residual_), align_residual(align_residual_) {}
    double sharp_residual;
    double align_residual;
};

inline bool in_stable_set(double S, double align, double grad_norm, const StableSetSpec& spec) {
    const bool sharp_ok = S <= 2.0 / spec.eta + spec.tol_sharp;
    const bool align_ok = std::abs(align) <= spec.tol_align * std::max(grad_norm, 1e-300);
    return sharp_ok && align_ok;
}

struct ProjectionResult {
    Vec point;
    double displacement = 0.0;
    int iters = 0;
    LandscapeReport report;  // full probe at the returned point
};

// Orthogonal projection onto M, approximated by alternating corrections:
//  (i)  sharpness step  theta -= s (S - 2/eta) gradS / ||gradS||^2, with s = 1
//       halved whenever the sharpness residual overshoots (sign flip);
//  (ii) alignment Newton step  theta -= (<grad L, u> / S) u
//       (d/dt <grad L(theta + t u), u> ~ u^T H u = S).
// When the incoming point violates the sharpness constraint it is projected
// back onto the boundary S = 2/eta (the constraint is active there, so the
// correction runs both-sided); starting below the threshold the sharpness
// component is left alone and only the alignment correction applies.
inline ProjectionResult project_to_M(const Vec& theta0, const std::shared_ptr<const Landscape>& h,
                                     const StableSetSpec& spec, RngStream& rng,
                                     const Vec* reference_u = nullptr) {
    require_finite(theta0, "project_to_M");
    const double target = 2.0 / spec.eta;
    Vec theta = theta0;
    Vec u_prev = reference_u ? *reference_u : Vec{};
    double damping = 1.0;
    double prev_residual = 0.0;
    bool have_prev = false;
    bool active = false;  // set on the first probe

    for (int it = 0; it < spec.max_proj_iters; ++it) {
        ProbeOptions opt;
        opt.with_eigengap = false;
        opt.lanczos_tol = spec.lanczos_tol;
        if (!u_prev.empty()) opt.reference = &u_prev;
        LandscapeReport rep = probe_point(h, theta, spec.eta, rng, opt);
        u_prev = rep.u;
        Vec g = h->grad(theta);
        const double align = dot(g, rep.u);
        const double sharp_res = rep.S - target;
        if (it == 0) active = sharp_res > spec.tol_sharp;

        const bool sharp_ok = active ? std::abs(sharp_res) <= spec.tol_sharp
                                     : sharp_res <= spec.tol_sharp;
        const bool align_ok = std::abs(align) <= spec.tol_align * std::max(norm2(g), 1e-300);
        if (sharp_ok && align_ok) {
            ProjectionResult out;
            out.point = theta;
            out.displacement = distance(theta, theta0);
            out.iters = it;
            if (spec.with_eigengap) {
                ProbeOptions full;
                full.reference = &rep.u;
                full.lanczos_tol = spec.lanczos_tol;
                out.report = probe_point(h, theta, spec.eta, rng, full);
            } else {
                out.report = std::move(rep);
            }
            return out;
        }

        if (!sharp_ok) {
            if (have_prev && sharp_res * prev_residual < 0.0) damping *= 0.5;
            const double gs2 = dot(rep.gradS, rep.gradS);
            if (gs2 == 0.0)
                throw ProjectionError("project_to_M: sharpness constraint violated but gradS = 0",
                                      sharp_res, align);
            axpy(-damping * sharp_res / gs2, rep.gradS, theta);
            prev_residual = sharp_res;
            have_prev = true;
            g = h->grad(theta);  // refresh for the alignment step below
        }

        const double align2 = dot(g, rep.u);
        if (std::abs(align2) > spec.tol_align * std::max(norm2(g), 1e-300) && rep.S != 0.0)
            axpy(-align2 / rep.S, rep.u, theta);
    }

    // final residuals for the error report
    ProbeOptions opt;
    opt.with_eigengap = false;
    if (!u_prev.empty()) opt.reference = &u_prev;
    LandscapeReport rep = probe_point(h, theta, spec.eta, rng, opt);
    Vec g = h->grad(theta);
    throw ProjectionError("project_to_M: no convergence after " +
                              std::to_string(spec.max_proj_iters) + " iterations",
                          rep.S - target, dot(g, rep.u));
}

// Constrained reference trajectory: theta_{t+1} = proj_M(theta_t - eta grad L).
struct RefTrajectory {
    std::vector<Vec> points;
    std::vector<LandscapeReport> reports;
    // distance between the projected point and the projected-gradient-step
    // approximation theta - eta P_perp(u, gradS) grad L; O(eps^2 eta ||grad L||)
    std::vector<double> pgd_discrepancy;
    StableSetSpec spec;
};

inline RefTrajectory make_ref_trajectory(const Vec& theta0,
                                         const std::shared_ptr<const Landscape>& h,
                                         const StableSetSpec& spec, RngStream& rng) {
    RefTrajectory traj;
    traj.spec = spec;
    ProjectionResult pr = project_to_M(theta0, h, spec, rng);
    traj.points.push_back(std::move(pr.point));
    traj.reports.push_back(std::move(pr.report));
    traj.pgd_discrepancy.push_back(0.0);
    return traj;
}

inline void advance_ref(RefTrajectory& traj, const std::shared_ptr<const Landscape>& h,
                        RngStream& rng) {
    if (traj.points.empty()) throw Error("advance_ref: empty trajectory");
    const Vec& theta = traj.points.back();
    const LandscapeReport& rep = traj.reports.back();
    Vec g = h->grad(theta);

    Vec proposal = theta;
    axpy(-traj.spec.eta, g, proposal);
    ProjectionResult pr = project_to_M(proposal, h, traj.spec, rng, &rep.u);
    // keep the eigenvector sign-consistent along the trajectory
    if (dot(pr.report.u, rep.u) < 0.0) {
        scale_inplace(pr.report.u, -1.0);
        pr.report.kappa = dot(pr.report.gradS, pr.report.u);
        pr.report.gradS_perp = project_out(pr.report.gradS, pr.report.u);
    }

    // projected-gradient-step approximation for the discrepancy record
    Vec gp = project_out(g, rep.u);
    if (rep.beta > 0.0) {
        Vec s_dir = rep.gradS_perp;
        scale_inplace(s_dir, 1.0 / std::sqrt(rep.beta));
        project_out_inplace(gp, s_dir);
    }
    Vec approx = theta;
    axpy(-traj.spec.eta, gp, approx);

    traj.pgd_discrepancy.push_back(distance(pr.point, approx));
    traj.points.push_back(std::move(pr.point));
    traj.reports.push_back(std::move(pr.report));
}

} // namespace eoslab
