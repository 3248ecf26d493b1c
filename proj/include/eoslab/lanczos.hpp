#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "eoslab/rng.hpp"
#include "eoslab/vec.hpp"

namespace eoslab {

using HvpFn = std::function<Vec(const Vec&)>;

// Top eigenpair of a symmetric operator.
// value: algebraically largest eigenvalue. vector: unit norm, oriented so
// that <vector, reference> >= 0 when a reference is supplied; otherwise the
// entry of largest magnitude is made positive.
struct EigenPair {
    double value = 0.0;
    Vec vector;
    bool degenerate = false;  // top gap below 1e-10 relative (deflated re-probe)
    int iterations = 0;
    double residual = 0.0;    // ||H v - value v||
    double second_value = std::numeric_limits<double>::quiet_NaN();
};

struct LanczosError : Error {
    LanczosError(const std::string& msg, double best_residual_, int iterations_)
        : Error(msg), best_residual(best_residual_), iterations(iterations_) {}
    double best_residual;
    int iterations;
};

namespace detail {

// Number of eigenvalues of the symmetric tridiagonal (a, b) strictly below x,
// via the Sturm / LDL^T sign count.
inline int sturm_count(const std::vector<double>& a, const std::vector<double>& b, double x) {
    int count = 0;
    double d = 1.0;
    const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    for (std::size_t i = 0; i < a.size(); ++i) {
        double off = (i == 0) ? 0.0 : b[i - 1];
        d = (a[i] - x) - off * off / d;
        if (d == 0.0) d = tiny;
        if (d < 0.0) ++count;
    }
    return count;
}

// k-th largest eigenvalue (k = 1 is the top) of the tridiagonal by bisection.
inline double tridiag_eig_kth(const std::vector<double>& a, const std::vector<double>& b, int k) {
    const int n = int(a.size());
    double lo = a[0], hi = a[0];
    for (int i = 0; i < n; ++i) {
        double r = ((i > 0) ? std::abs(b[i - 1]) : 0.0) + ((i < n - 1) ? std::abs(b[i]) : 0.0);
        lo = std::min(lo, a[i] - r);
        hi = std::max(hi, a[i] + r);
    }
    lo -= 1.0; hi += 1.0;
    const int want = n - k;  // eigenvalues strictly below the k-th largest
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (sturm_count(a, b, mid) > want) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Eigenvector of the tridiagonal for eigenvalue lambda, by inverse iteration
// with a shifted Thomas solve. Small n; two sweeps are plenty.
inline std::vector<double> tridiag_eigvec(const std::vector<double>& a,
                                          const std::vector<double>& b, double lambda) {
    const int n = int(a.size());
    std::vector<double> v(n, 1.0 / std::sqrt(double(n)));
    const double shift = lambda * (1.0 + 1e-13) + 1e-300;
    for (int sweep = 0; sweep < 3; ++sweep) {
        // solve (T - shift) w = v in place
        std::vector<double> diag(n), rhs(v);
        for (int i = 0; i < n; ++i) diag[i] = a[i] - shift;
        for (int i = 1; i < n; ++i) {
            double piv = diag[i - 1];
            if (std::abs(piv) < 1e-300) piv = (piv < 0 ? -1e-300 : 1e-300);
            double m = b[i - 1] / piv;
            diag[i] -= m * b[i - 1];
            rhs[i] -= m * rhs[i - 1];
        }
        double piv = diag[n - 1];
        if (std::abs(piv) < 1e-300) piv = (piv < 0 ? -1e-300 : 1e-300);
        v[n - 1] = rhs[n - 1] / piv;
        for (int i = n - 2; i >= 0; --i) {
            piv = diag[i];
            if (std::abs(piv) < 1e-300) piv = (piv < 0 ? -1e-300 : 1e-300);
            v[i] = (rhs[i] - b[i] * v[i + 1]) / piv;
        }
        double nrm = 0.0;
        for (double x : v) nrm += x * x;
        nrm = std::sqrt(nrm);
        for (double& x : v) x /= nrm;
    }
    return v;
}

inline void orient(Vec& v, const Vec* reference) {
    double c = 0.0;
    if (reference) c = dot(v, *reference);
    if (c == 0.0) {
        std::size_t imax = 0;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
        c = v[imax];
    }
    if (c < 0.0) scale_inplace(v, -1.0);
}

} // namespace detail

// Matrix-free Lanczos for the algebraically largest eigenpair, with full
// reorthogonalization (dimensions here are small; robustness over speed).
// Defaults: max_iters = min(dim, 200), tol = 1e-8. The returned pair
// satisfies ||H v - value v|| <= tol * max(1, |value|), checked explicitly.
// A single Krylov run cannot see the multiplicity of a degenerate top
// eigenvalue, so the degenerate flag comes from a deflated re-probe after
// convergence; pass check_degenerate = false to skip it on hot paths.
inline EigenPair lanczos_top(const HvpFn& apply_h, int dim, RngStream& rng,
                             int max_iters = -1, double tol = 1e-8,
                             const Vec* reference = nullptr,
                             bool check_degenerate = true) {
    if (dim < 1) throw Error("lanczos_top: dim must be >= 1");
    if (tol <= 0.0) throw Error("lanczos_top: tol must be positive");
    if (max_iters < 0) max_iters = std::min(dim, 200);

    Vec q;
    if (reference && reference->size() == std::size_t(dim) && norm2(*reference) > 0) {
        q = *reference;
    } else {
        q = rng.normal_vec(dim);
    }
    normalize(q);

    std::vector<Vec> basis{q};
    std::vector<double> alpha, beta;
    double best_residual = std::numeric_limits<double>::infinity();

    auto finish = [&](double lambda, const std::vector<double>& s, int iters) -> EigenPair {
        Vec v = zeros(dim);
        for (std::size_t j = 0; j < s.size(); ++j) axpy(s[j], basis[j], v);
        normalize(v);
        detail::orient(v, reference);
        Vec hv = apply_h(v);
        require_finite(hv, "lanczos_top: operator output");
        Vec r = sub(hv, scaled(v, lambda));
        EigenPair out;
        out.value = lambda;
        out.vector = std::move(v);
        out.iterations = iters;
        out.residual = norm2(r);
        if (check_degenerate && dim >= 2) {
            const Vec& u1 = out.vector;
            HvpFn deflated = [&apply_h, &u1](const Vec& x) {
                Vec px = project_out(x, u1);
                Vec y = apply_h(px);
                project_out_inplace(y, u1);
                return y;
            };
            Vec start = rng.normal_vec(dim);
            project_out_inplace(start, u1);
            try {
                EigenPair second = lanczos_top(deflated, dim, rng, std::min(dim, 80),
                                               std::max(tol, 1e-6), &start, false);
                out.second_value = second.value;
                out.degenerate =
                    (lambda - second.value) < 1e-10 * std::max(1.0, std::abs(lambda));
            } catch (const Error&) {
                // diagnostics only; leave second_value as NaN
            }
        }
        return out;
    };

    for (int j = 0; j < max_iters; ++j) {
        Vec w = apply_h(basis[j]);
        if (!all_finite(w))
            throw LanczosError("lanczos_top: NaN from operator at iteration " + std::to_string(j),
                               best_residual, j);
        double a = dot(w, basis[j]);
        alpha.push_back(a);
        axpy(-a, basis[j], w);
        if (j > 0) axpy(-beta[j - 1], basis[j - 1], w);
        // two passes of full reorthogonalization
        for (int pass = 0; pass < 2; ++pass)
            for (const Vec& b : basis) project_out_inplace(w, b);

        double bnorm = norm2(w);
        double lambda = detail::tridiag_eig_kth(alpha, beta, 1);
        std::vector<double> s = detail::tridiag_eigvec(alpha, beta, lambda);
        double bound = bnorm * std::abs(s.back());
        best_residual = std::min(best_residual, bound);
        if (bound <= tol * std::max(1.0, std::abs(lambda)) || bnorm <= 1e-14 * std::max(1.0, std::abs(lambda))) {
            EigenPair out = finish(lambda, s, j + 1);
            if (out.residual <= tol * std::max(1.0, std::abs(lambda)))
                return out;
            best_residual = std::min(best_residual, out.residual);
            if (bnorm <= 1e-14 * std::max(1.0, std::abs(lambda)))
                return out;  // invariant subspace: nothing further to gain
        }
        if (j + 1 == max_iters) break;
        beta.push_back(bnorm);
        scale_inplace(w, 1.0 / bnorm);
        basis.push_back(std::move(w));
    }
    throw LanczosError("lanczos_top: no convergence after " + std::to_string(max_iters) +
                       " iterations (best residual " + std::to_string(best_residual) + ")",
                       best_residual, max_iters);
}

// Second-largest eigenvalue via single-vector deflation against a converged
// top pair. The start vector and every operator output are projected against
// u1, so the Krylov space stays inside u1-perp and the Ritz values are those
// of H restricted to it. Used for the eigengap diagnostic; never enforced.
inline double lanczos_second(const HvpFn& apply_h, int dim, const EigenPair& top,
                             RngStream& rng, int max_iters = -1, double tol = 1e-6) {
    if (dim < 2) return top.value;
    const Vec& u1 = top.vector;
    HvpFn deflated = [&apply_h, &u1](const Vec& v) {
        Vec pv = project_out(v, u1);
        Vec w = apply_h(pv);
        project_out_inplace(w, u1);
        return w;
    };
    Vec start = rng.normal_vec(dim);
    project_out_inplace(start, u1);
    if (norm2(start) == 0.0) start = project_out(rng.normal_vec(dim), u1);
    EigenPair second = lanczos_top(deflated, dim, rng, max_iters, tol, &start, false);
    return second.value;
}

} // namespace eoslab
