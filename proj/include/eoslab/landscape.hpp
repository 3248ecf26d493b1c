#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "eoslab/rng.hpp"
#include "eoslab/vec.hpp"

namespace eoslab {

enum class Deriv { analytic, finite_difference };

// Loss landscape over a finite sample set: L(theta) = (1/n) sum_i l_i(theta).
// Exposes full and per-sample gradients, Hessian-vector products (full and
// batch-restricted), and the third-derivative form grad^3 L (u, u).
class Landscape {
public:
    virtual ~Landscape() = default;

    virtual int dim() const = 0;
    virtual int n_samples() const = 0;

    virtual double loss(const Vec& theta) const = 0;
    virtual Vec grad(const Vec& theta) const = 0;
    virtual Vec sample_grad(const Vec& theta, int i) const = 0;
    virtual Vec hvp(const Vec& theta, const Vec& v) const = 0;
    virtual Vec batch_hvp(const Vec& theta, const Vec& v, std::span<const int> batch) const = 0;
    // grad^3 L(theta)(u, u) with the direction u held fixed across the probe.
    virtual Vec third_form(const Vec& theta, const Vec& u) const = 0;

    virtual Deriv grad_kind() const { return Deriv::analytic; }
    virtual Deriv hvp_kind() const = 0;
    virtual Deriv third_form_kind() const = 0;

protected:
    void check_point(const Vec& theta, const char* where) const {
        if (int(theta.size()) != dim())
            throw Error(std::string(where) + ": point has dim " + std::to_string(theta.size()) +
                        ", landscape has dim " + std::to_string(dim()));
        require_finite(theta, where);
    }

    double checked_loss_value(double value, const Vec& theta, const char* where) const {
        if (!std::isfinite(value))
            throw Error(std::string(where) + ": non-finite loss at point with norm " +
                        std::to_string(norm2(theta)));
        return value;
    }
};

enum class Sampling { without_replacement, with_replacement, gaussian_surrogate };

inline std::string to_string(Sampling s) {
    switch (s) {
        case Sampling::without_replacement: return "without_replacement";
        case Sampling::with_replacement: return "with_replacement";
        case Sampling::gaussian_surrogate: return "gaussian_surrogate";
    }
    throw Error("to_string(Sampling): bad value");
}

inline Sampling sampling_from_string(const std::string& s) {
    if (s == "without_replacement") return Sampling::without_replacement;
    if (s == "with_replacement") return Sampling::with_replacement;
    if (s == "gaussian_surrogate") return Sampling::gaussian_surrogate;
    throw Error("unknown sampling mode: " + s);
}

// Mini-batch sampling scheme. Owns its random stream so parallel workers can
// carry disjoint substreams; E[xi | theta] = 0 in every mode.
struct NoiseModel {
    int batch = 1;
    Sampling mode = Sampling::with_replacement;
    RngStream rng{0};

    NoiseModel(int batch_, Sampling mode_, RngStream rng_)
        : batch(batch_), mode(mode_), rng(rng_) {}
};

struct BatchGrad {
    Vec g;               // mini-batch gradient g_B
    Vec xi;              // gradient noise, g_B = grad + xi exactly
    std::vector<int> batch;  // sampled indices (empty for gaussian_surrogate)
};

// Draw one mini-batch gradient. For b = n without replacement the full-batch
// gradient is returned and xi is exactly zero (GD recovered). The Gaussian
// surrogate draws xi ~ N(0, Sigma1/b) with Sigma1 the population covariance
// of the per-sample gradients at theta, realized as
//   xi = (bn)^{-1/2} sum_i c_i (g_i - gbar),  c_i iid N(0,1).
// Note the variance conventions: with_replacement and the surrogate give
// Var(<xi, u>) = u^T Sigma1 u / b exactly, while without_replacement carries
// the finite-population factor (n - b) / (n - 1) on top of the 1/b law.
inline BatchGrad batch_grad(const Landscape& h, const Vec& theta, NoiseModel& noise) {
    const int n = h.n_samples();
    const int b = noise.batch;
    if (b < 1) throw Error("batch_grad: batch size must be >= 1");
    if (noise.mode == Sampling::without_replacement && b > n)
        throw Error("batch_grad: batch " + std::to_string(b) + " exceeds n = " + std::to_string(n) +
                    " without replacement");

    BatchGrad out;
    Vec full = h.grad(theta);

    if (noise.mode == Sampling::without_replacement && b == n) {
        out.g = full;
        out.xi = zeros(full.size());
        out.batch.resize(n);
        for (int i = 0; i < n; ++i) out.batch[i] = i;
        return out;
    }

    if (noise.mode == Sampling::gaussian_surrogate) {
        Vec xi = zeros(h.dim());
        const double w = 1.0 / std::sqrt(double(b) * double(n));
        for (int i = 0; i < n; ++i) {
            double c = noise.rng.next_normal();
            Vec gi = h.sample_grad(theta, i);
            for (int k = 0; k < h.dim(); ++k) xi[k] += w * c * (gi[k] - full[k]);
        }
        out.xi = xi;
        out.g = add(full, xi);
        return out;
    }

    std::vector<int> idx;
    if (noise.mode == Sampling::without_replacement) {
        idx = noise.rng.sample_without_replacement(n, b);
    } else {
        idx.resize(b);
        for (int i = 0; i < b; ++i) idx[i] = noise.rng.next_int(n);
    }
    Vec g = zeros(h.dim());
    for (int i : idx) axpy(1.0 / double(b), h.sample_grad(theta, i), g);
    out.xi = sub(g, full);
    out.g = std::move(g);
    out.batch = std::move(idx);
    return out;
}

} // namespace eoslab
