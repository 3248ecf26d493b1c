#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eoslab/vec.hpp"

namespace eoslab {

inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) throw Error("mean_of: empty input");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / double(xs.size());
}

// unbiased (n-1) sample variance
inline double variance_of(std::span<const double> xs) {
    if (xs.size() < 2) throw Error("variance_of: need at least 2 values");
    double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / double(xs.size() - 1);
}

// Equilibrium value of a measurement series: mean of the final 20 entries.
inline double equilibrium_sharpness(std::span<const double> series) {
    constexpr std::size_t window = 20;
    if (series.size() < window)
        throw Error("equilibrium_sharpness: need at least 20 entries, got " +
                    std::to_string(series.size()));
    double s = 0.0;
    for (std::size_t i = series.size() - window; i < series.size(); ++i) s += series[i];
    return s / double(window);
}

inline double equilibrium_sharpness(const std::vector<std::pair<double, double>>& series) {
    std::vector<double> vals;
    vals.reserve(series.size());
    for (const auto& [t, s] : series) vals.push_back(s);
    return equilibrium_sharpness(std::span<const double>(vals));
}

// Ordinary least squares on (log10 x, log10 y).
struct PowerLawFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int n_points = 0;
};

inline PowerLawFit power_law_fit(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3)
        throw Error("power_law_fit: need at least 3 points, got " + std::to_string(points.size()));
    std::string offenders;
    for (const auto& [x, y] : points)
        if (!(x > 0.0) || !(y > 0.0))
            offenders += " (" + std::to_string(x) + ", " + std::to_string(y) + ")";
    if (!offenders.empty())
        throw Error("power_law_fit: non-positive values:" + offenders);

    const double n = double(points.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : points) {
        double lx = std::log10(x), ly = std::log10(y);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw Error("power_law_fit: degenerate x values");
    PowerLawFit fit;
    fit.n_points = int(points.size());
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0.0, ss_tot = 0.0;
    const double ybar = sy / n;
    for (const auto& [x, y] : points) {
        double ly = std::log10(y);
        double pred = fit.intercept + fit.slope * std::log10(x);
        ss_res += (ly - pred) * (ly - pred);
        ss_tot += (ly - ybar) * (ly - ybar);
    }
    fit.r2 = (ss_tot == 0.0) ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

inline PowerLawFit power_law_fit(const std::vector<std::pair<double, double>>& points) {
    return power_law_fit(std::span<const std::pair<double, double>>(points));
}

} // namespace eoslab
