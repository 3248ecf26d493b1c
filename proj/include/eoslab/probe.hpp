#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "eoslab/landscape.hpp"
#include "eoslab/report.hpp"

namespace eoslab {

struct NoiseVariance {
    double value = 0.0;
    bool degenerate = false;  // all batch projections identical
    int batches = 0;
};

// Unbiased sample variance of <g_B, u> over m fresh mini-batches.
// Invariant to the sign of u.
inline NoiseVariance projected_noise_variance(const std::shared_ptr<const Landscape>& h,
                                              const Vec& theta, const Vec& u,
                                              NoiseModel& noise, int m_batches = 50) {
    if (m_batches < 2) throw Error("projected_noise_variance: need at least 2 batches");
    std::vector<double> proj(std::size_t(m_batches), 0.0);
    for (int j = 0; j < m_batches; ++j) {
        BatchGrad bg = batch_grad(*h, theta, noise);
        proj[std::size_t(j)] = dot(bg.g, u);
    }
    double mean = 0.0;
    for (double v : proj) mean += v;
    mean /= double(m_batches);
    double ss = 0.0;
    for (double v : proj) ss += (v - mean) * (v - mean);
    NoiseVariance out;
    out.batches = m_batches;
    out.value = ss / double(m_batches - 1);
    out.degenerate = (ss == 0.0);
    return out;
}

struct BatchSharpnessEstimate {
    double value = 0.0;
    int used = 0;
    int skipped = 0;  // batches dropped for zero-norm gradient
};

// BS(theta) = E_B[ g_B^T H_B g_B / ||g_B||^2 ], the expected directional
// curvature of the mini-batch Hessian along the mini-batch gradient.
inline BatchSharpnessEstimate batch_sharpness(const std::shared_ptr<const Landscape>& h,
                                              const Vec& theta, NoiseModel& noise,
                                              int m_batches = 30) {
    if (m_batches < 1) throw Error("batch_sharpness: need at least 1 batch");
    if (noise.mode == Sampling::gaussian_surrogate)
        throw Error("batch_sharpness: needs index-based sampling (no batch Hessian for the surrogate)");
    BatchSharpnessEstimate out;
    double acc = 0.0;
    for (int j = 0; j < m_batches; ++j) {
        BatchGrad bg = batch_grad(*h, theta, noise);
        double n2 = dot(bg.g, bg.g);
        if (n2 == 0.0) {
            ++out.skipped;
            continue;
        }
        Vec hg = h->batch_hvp(theta, bg.g, bg.batch);
        acc += dot(bg.g, hg) / n2;
        ++out.used;
    }
    if (out.used == 0) throw Error("batch_sharpness: every batch had a zero-norm gradient");
    out.value = acc / double(out.used);
    return out;
}

} // namespace eoslab
