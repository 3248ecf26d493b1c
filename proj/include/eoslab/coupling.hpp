#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "eoslab/landscape.hpp"
#include "eoslab/predicted.hpp"
#include "eoslab/refpath.hpp"

namespace eoslab {

// Per-step residuals of the coupling between true SGD, the constrained
// reference trajectory, and the vector predicted dynamics.
struct CouplingRecord {
    long t = 0;
    double norm_v = 0.0;
    double norm_vhat = 0.0;
    double deviation = 0.0;       // ||v_t - v_hat_t||
    double loss_residual = 0.0;   // L(theta_t) - L(theta^+_t) - x_hat^2 / eta
    double sharp_residual = 0.0;  // S(theta_t) - 2/eta - y_hat - kappa_t x_hat
};

struct CouplingOptions {
    double v0_frac = 0.5;        // initial displacement along u, in units of delta
    double divergence_norm = 1e6;
    ProbeOptions iterate_probe;  // lanczos settings for S(theta_t)
};

struct CouplingResult {
    std::vector<CouplingRecord> records;
    RefTrajectory ref;
    bool diverged = false;
    double delta0 = 0.0;  // delta at the initial reference point
};

// Advance three coupled evolutions for T steps, all driven by the SAME noise
// draws xi_t: the SGD iterate, the PGD reference, and the predicted dynamics.
// The start point is projected onto M first, then displaced by
// v0 = v0_frac * delta * u, and v_hat_0 := v_0 (deviation at t = 0 is zero).
inline CouplingResult coupling_run(const std::shared_ptr<const Landscape>& h,
                                   const Vec& theta_start, double eta, NoiseModel noise,
                                   long T, RngStream& probe_rng,
                                   const CouplingOptions& opts = {}) {
    StableSetSpec spec = make_stable_spec(eta);
    CouplingResult out;
    out.ref = make_ref_trajectory(theta_start, h, spec, probe_rng);
    const LandscapeReport& rep0 = out.ref.reports.front();
    if (rep0.alpha_nonpositive)
        throw Error("coupling_run: alpha <= 0 at the reference start; no oscillation scale");
    out.delta0 = rep0.delta;

    Vec theta = out.ref.points.front();
    axpy(opts.v0_frac * rep0.delta, rep0.u, theta);
    Vec v0 = sub(theta, out.ref.points.front());
    PredictedVectorState vhat = make_predicted_state(v0, rep0);

    auto iterate_sharpness = [&](const Vec& point, const Vec& u_ref) {
        ProbeOptions opt = opts.iterate_probe;
        opt.reference = &u_ref;
        EigenPair top = lanczos_top([&](const Vec& v) { return h->hvp(point, v); }, h->dim(),
                                    probe_rng, opt.lanczos_max_iters,
                                    auto_lanczos_tol(*h, opt.lanczos_tol), opt.reference, false);
        return top.value;
    };

    auto record_at = [&](long t, const Vec& point, const LandscapeReport& rep,
                         const Vec& ref_point) {
        Vec v = sub(point, ref_point);
        CouplingRecord rec;
        rec.t = t;
        rec.norm_v = norm2(v);
        rec.norm_vhat = norm2(vhat.v_hat);
        rec.deviation = distance(v, vhat.v_hat);
        rec.loss_residual = h->loss(point) - h->loss(ref_point) -
                            vhat.x_hat * vhat.x_hat / eta;
        rec.sharp_residual = iterate_sharpness(point, rep.u) - 2.0 / eta - vhat.y_hat -
                             rep.kappa * vhat.x_hat;
        out.records.push_back(rec);
    };

    record_at(0, theta, rep0, out.ref.points.front());

    for (long t = 0; t < T; ++t) {
        BatchGrad bg = batch_grad(*h, theta, noise);
        axpy(-eta, bg.g, theta);
        if (!all_finite(theta) || norm2(theta) > opts.divergence_norm) {
            out.diverged = true;
            break;
        }
        advance_ref(out.ref, h, probe_rng);
        const LandscapeReport& rep_prev = out.ref.reports[std::size_t(t)];
        const LandscapeReport& rep_next = out.ref.reports[std::size_t(t) + 1];
        vhat = full_predicted_step(vhat, rep_prev, rep_next, bg.xi);
        record_at(t + 1, theta, rep_next, out.ref.points.back());
    }
    return out;
}

} // namespace eoslab
