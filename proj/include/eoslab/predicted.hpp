#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "eoslab/report.hpp"
#include "eoslab/rng.hpp"
#include "eoslab/vec.hpp"

namespace eoslab {

// Frozen coefficients of the reduced (x_hat, y_hat) dynamics.
// alpha is tied to the others: alpha = beta * delta_sq / 2.
struct ReducedCoeffs {
    double eta = 0.01;
    double beta = 1.0;
    double delta_sq = 0.5;
    double kappa = 0.0;
    double sigma_u_sq = 0.0;

    double alpha() const { return 0.5 * beta * delta_sq; }

    void validate() const {
        if (!(eta > 0.0)) throw Error("ReducedCoeffs: eta must be positive");
        if (!(beta > 0.0)) throw Error("ReducedCoeffs: beta must be positive");
        if (!(delta_sq > 0.0)) throw Error("ReducedCoeffs: delta_sq must be positive");
        if (sigma_u_sq < 0.0) throw Error("ReducedCoeffs: sigma_u_sq must be >= 0");
    }
};

struct ReducedState {
    double x_hat = 0.0;
    double y_hat = 0.0;
    long t = 0;
};

// One step of the reduced dynamics:
//   x' = -(1 + eta y) x - (eta/2) kappa x^2 - eta zeta
//   y' = y + (eta beta / 2) (delta^2 - x^2)
inline ReducedState reduced_step(const ReducedState& s, const ReducedCoeffs& c, double zeta) {
    ReducedState n;
    n.x_hat = -(1.0 + c.eta * s.y_hat) * s.x_hat -
              0.5 * c.eta * c.kappa * s.x_hat * s.x_hat - c.eta * zeta;
    n.y_hat = s.y_hat + 0.5 * c.eta * c.beta * (c.delta_sq - s.x_hat * s.x_hat);
    n.t = s.t + 1;
    if (!std::isfinite(n.x_hat) || !std::isfinite(n.y_hat))
        throw Error("reduced_step: non-finite state at t = " + std::to_string(n.t));
    return n;
}

struct ReducedRun {
    std::vector<ReducedState> states;  // includes the initial state
    bool diverged = false;
    long diverged_at = -1;
};

// Run the reduced dynamics with Gaussian noise zeta ~ N(0, sigma_u_sq).
// A run is flagged diverged once |x_hat| exceeds guard_mult * delta and the
// partial trajectory is returned.
inline ReducedRun run_reduced(const ReducedCoeffs& c, double x0, double y0, long steps,
                              RngStream& rng, double guard_mult = 1e3) {
    c.validate();
    const double guard = guard_mult * std::sqrt(c.delta_sq);
    const double sig = std::sqrt(c.sigma_u_sq);
    ReducedRun run;
    run.states.reserve(std::size_t(steps) + 1);
    ReducedState s{x0, y0, 0};
    run.states.push_back(s);
    for (long t = 0; t < steps; ++t) {
        double zeta = (sig > 0.0) ? sig * rng.next_normal() : 0.0;
        s = reduced_step(s, c, zeta);
        run.states.push_back(s);
        if (std::abs(s.x_hat) > guard) {
            run.diverged = true;
            run.diverged_at = s.t;
            break;
        }
    }
    return run;
}

struct StationaryStats {
    double mean_x_sq = 0.0;
    double mean_y = 0.0;
    double var_x_sq = 0.0;
    double var_y = 0.0;
    long count = 0;
};

inline StationaryStats stationary_stats(std::span<const ReducedState> traj,
                                        double burn_in_fraction) {
    if (burn_in_fraction < 0.0 || burn_in_fraction >= 1.0)
        throw Error("stationary_stats: burn_in_fraction must be in [0, 1)");
    const std::size_t start = std::size_t(burn_in_fraction * double(traj.size()));
    if (start >= traj.size()) throw Error("stationary_stats: empty post-burn-in window");
    double sx = 0, sxx = 0, sy = 0, syy = 0;
    long n = 0;
    for (std::size_t i = start; i < traj.size(); ++i) {
        double x2 = traj[i].x_hat * traj[i].x_hat;
        sx += x2; sxx += x2 * x2;
        sy += traj[i].y_hat; syy += traj[i].y_hat * traj[i].y_hat;
        ++n;
    }
    StationaryStats st;
    st.count = n;
    st.mean_x_sq = sx / double(n);
    st.mean_y = sy / double(n);
    st.var_x_sq = (n > 1) ? (sxx - sx * sx / double(n)) / double(n - 1) : 0.0;
    st.var_y = (n > 1) ? (syy - sy * sy / double(n)) / double(n - 1) : 0.0;
    return st;
}

// Pooled over an ensemble of runs (each windowed by the same burn-in).
inline StationaryStats stationary_stats(const std::vector<ReducedRun>& ensemble,
                                        double burn_in_fraction) {
    if (ensemble.empty()) throw Error("stationary_stats: empty ensemble");
    double sx = 0, sxx = 0, sy = 0, syy = 0;
    long n = 0;
    for (const auto& run : ensemble) {
        const auto& tr = run.states;
        std::size_t start = std::size_t(burn_in_fraction * double(tr.size()));
        for (std::size_t i = start; i < tr.size(); ++i) {
            double x2 = tr[i].x_hat * tr[i].x_hat;
            sx += x2; sxx += x2 * x2;
            sy += tr[i].y_hat; syy += tr[i].y_hat * tr[i].y_hat;
            ++n;
        }
    }
    if (n == 0) throw Error("stationary_stats: empty post-burn-in window");
    StationaryStats st;
    st.count = n;
    st.mean_x_sq = sx / double(n);
    st.mean_y = sy / double(n);
    st.var_x_sq = (n > 1) ? (sxx - sx * sx / double(n)) / double(n - 1) : 0.0;
    st.var_y = (n > 1) ? (syy - sy * sy / double(n)) / double(n - 1) : 0.0;
    return st;
}

struct DecorrelationResidual {
    double lhs = 0.0;  // E[(1 + eta y)^2 x^2]
    double rhs = 0.0;  // (1 + eta ybar)^2 E[x^2]
    double abs_residual = 0.0;
};

// Mean-field decorrelation check over an ensemble of states at one fixed t.
inline DecorrelationResidual decorrelation_residual(std::span<const ReducedState> ensemble,
                                                    double eta) {
    if (ensemble.size() < 100)
        throw Error("decorrelation_residual: ensemble size must be >= 100, got " +
                    std::to_string(ensemble.size()));
    double lhs = 0.0, ybar = 0.0, x2 = 0.0;
    for (const auto& s : ensemble) {
        double f = 1.0 + eta * s.y_hat;
        lhs += f * f * s.x_hat * s.x_hat;
        ybar += s.y_hat;
        x2 += s.x_hat * s.x_hat;
    }
    const double n = double(ensemble.size());
    lhs /= n; ybar /= n; x2 /= n;
    DecorrelationResidual r;
    r.lhs = lhs;
    r.rhs = (1.0 + eta * ybar) * (1.0 + eta * ybar) * x2;
    r.abs_residual = std::abs(r.lhs - r.rhs);
    return r;
}

// Closed-form equilibrium sharpness gap: Delta S = eta beta sigma_u^2 / (4 alpha).
// Zero noise recovers GD (gap 0); invalid without progressive sharpening.
inline double equilibrium_gap(double eta, double beta, double alpha, double sigma_u_sq) {
    if (!(alpha > 0.0))
        throw Error("equilibrium_gap: alpha must be positive (no progressive sharpening)");
    if (!(beta > 0.0)) throw Error("equilibrium_gap: beta must be positive");
    if (sigma_u_sq < 0.0) throw Error("equilibrium_gap: sigma_u_sq must be >= 0");
    return eta * beta * sigma_u_sq / (4.0 * alpha);
}

// ----------------------------------------------------------------------------
// Vector-valued predicted dynamics around the moving reference trajectory.

struct PredictedVectorState {
    Vec v_hat;
    double x_hat = 0.0;  // <u_t, v_hat>
    double y_hat = 0.0;  // <grad S_t perp, v_hat>
};

inline PredictedVectorState make_predicted_state(const Vec& v, const LandscapeReport& report) {
    PredictedVectorState s;
    s.v_hat = v;
    s.x_hat = dot(report.u, v);
    s.y_hat = dot(report.gradS_perp, v);
    return s;
}

namespace detail {
inline void check_report(const LandscapeReport& r, const char* where) {
    if (r.u.empty() || r.gradS_perp.empty() || !r.hvp)
        throw Error(std::string(where) + ": report is missing u / gradS_perp / hvp");
}
} // namespace detail

// One step of the enhanced stochastic predicted dynamics:
//   v' = P_perp(u') [ (I - eta H) P_perp(u) v + eta gradSperp (delta^2 - x^2)/2 ]
//        - ( (1 + eta y) x + (eta/2) kappa x^2 ) u'  -  eta xi
// The u'-projection of the output reproduces the scalar x-update exactly with
// zeta = <u', xi>.
inline PredictedVectorState full_predicted_step(const PredictedVectorState& s,
                                                const LandscapeReport& rep_t,
                                                const LandscapeReport& rep_t1,
                                                const Vec& xi) {
    detail::check_report(rep_t, "full_predicted_step (t)");
    detail::check_report(rep_t1, "full_predicted_step (t+1)");
    require_same_dim(s.v_hat, rep_t.u, "full_predicted_step");
    require_same_dim(s.v_hat, xi, "full_predicted_step");
    const double eta = rep_t.eta;
    const double x = s.x_hat, y = s.y_hat;

    Vec p = project_out(s.v_hat, rep_t.u);
    Vec w = rep_t.hvp(p);
    scale_inplace(w, -eta);
    axpy(1.0, p, w);
    axpy(eta * 0.5 * (rep_t.delta_sq() - x * x), rep_t.gradS_perp, w);

    Vec v = project_out(w, rep_t1.u);
    const double ucoef = (1.0 + eta * y) * x + 0.5 * eta * rep_t.kappa * x * x;
    axpy(-ucoef, rep_t1.u, v);
    axpy(-eta, xi, v);

    return make_predicted_state(v, rep_t1);
}

// Transport w through A_k = (I - eta H_k) P_perp(u_k).
inline Vec apply_step_matrix(const LandscapeReport& rep, const Vec& w) {
    Vec p = project_out(w, rep.u);
    Vec hp = rep.hvp(p);
    Vec out = p;
    axpy(-rep.eta, hp, out);
    return out;
}

// Sharpness propagation factor
//   beta_{s->t} = (grad S_{t+1} perp)^T [ prod_{k=t}^{s+1} A_k ] grad S_s perp.
// The empty product (s = t) is the identity. When the reports are frozen with
// grad S perp in ker(H restricted to u-perp), this equals beta for all s, t.
inline double propagation_factor(int s, int t, std::span<const LandscapeReport> refs) {
    if (s > t) throw Error("propagation_factor: need s <= t");
    if (s < 0) throw Error("propagation_factor: s out of range");
    if (std::size_t(t) + 1 >= refs.size())
        throw Error("propagation_factor: refs must cover indices up to t+1");
    Vec w = refs[std::size_t(s)].gradS_perp;
    for (int k = s + 1; k <= t; ++k) w = apply_step_matrix(refs[std::size_t(k)], w);
    return dot(refs[std::size_t(t) + 1].gradS_perp, w);
}

// Closed-form y_hat_{t+1} from the complete histories (the unrolled form):
//   y_{t+1} = I_{t+1} + eta sum_s beta_{s->t} (delta_s^2 - x_s^2)/2
//                     - eta sum_s <gamma_{s->t}, xi_s>
// with I_{t+1} = (grad S_{t+1} perp)^T [prod_{k=t}^{0} A_k] P_perp(u_0) v0.
// Evaluated literally from the matrix products, independent of the step
// recursion it mirrors.
inline double unroll_yhat(std::span<const double> x_hist, std::span<const Vec> xi_hist,
                          std::span<const LandscapeReport> refs, const Vec& v0) {
    const std::size_t steps = x_hist.size();  // states x_0 .. x_t, so t+1 = steps
    if (xi_hist.size() != steps) throw Error("unroll_yhat: xi history length mismatch");
    if (refs.size() < steps + 1) throw Error("unroll_yhat: refs must cover indices 0..t+1");
    const int t = int(steps) - 1;  // t = -1 means no steps taken
    const Vec& gS_next = refs[std::size_t(t + 1)].gradS_perp;

    if (t < 0) return dot(refs[0].gradS_perp, v0);

    // I_{t+1}
    Vec w = project_out(v0, refs[0].u);
    for (int k = 0; k <= t; ++k) w = apply_step_matrix(refs[std::size_t(k)], w);
    double y = dot(gS_next, w);

    const double eta = refs[0].eta;
    for (int s = 0; s <= t; ++s) {
        const auto& rs = refs[std::size_t(s)];
        double bst = propagation_factor(s, t, refs);
        y += eta * bst * 0.5 * (rs.delta_sq() - x_hist[std::size_t(s)] * x_hist[std::size_t(s)]);

        // <gamma_{s->t}, xi_s> = (grad S_{t+1})^T [prod_{k=t}^{s+1} A_k] P_perp(u_{s+1}) xi_s
        Vec g = project_out(xi_hist[std::size_t(s)], refs[std::size_t(s) + 1].u);
        for (int k = s + 1; k <= t; ++k) g = apply_step_matrix(refs[std::size_t(k)], g);
        y -= eta * dot(gS_next, g);
    }
    return y;
}

} // namespace eoslab
