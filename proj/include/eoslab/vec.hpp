#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace eoslab {

// Dense parameter vector. Everything in this library works on flat
// double-precision coordinates; dimensions are small (<= a few thousand).
using Vec = std::vector<double>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require_same_dim(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size())
        throw Error(std::string(where) + ": dimension mismatch (" +
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void require_finite(const Vec& v, const char* where) {
    if (!all_finite(v)) throw Error(std::string(where) + ": non-finite entry");
}

inline double dot(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec zeros(std::size_t n) { return Vec(n, 0.0); }

inline Vec unit(std::size_t n, std::size_t i) {
    Vec e(n, 0.0);
    e.at(i) = 1.0;
    return e;
}

// y += a*x
inline void axpy(double a, const Vec& x, Vec& y) {
    require_same_dim(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline Vec add(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "add");
    Vec r(a);
    for (std::size_t i = 0; i < b.size(); ++i) r[i] += b[i];
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "sub");
    Vec r(a);
    for (std::size_t i = 0; i < b.size(); ++i) r[i] -= b[i];
    return r;
}

inline Vec scaled(const Vec& a, double c) {
    Vec r(a);
    for (double& x : r) x *= c;
    return r;
}

inline void scale_inplace(Vec& a, double c) {
    for (double& x : a) x *= c;
}

inline double distance(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Normalize in place; returns the original norm. Throws on zero vectors.
inline double normalize(Vec& v) {
    double n = norm2(v);
    if (n == 0.0) throw Error("normalize: zero vector");
    scale_inplace(v, 1.0 / n);
    return n;
}

// v - <v,u> u  for unit-norm u. Output is orthogonal to u up to rounding.
inline Vec project_out(const Vec& v, const Vec& u) {
    require_same_dim(v, u, "project_out");
    double c = dot(v, u);
    Vec r(v);
    for (std::size_t i = 0; i < u.size(); ++i) r[i] -= c * u[i];
    return r;
}

inline void project_out_inplace(Vec& v, const Vec& u) {
    double c = dot(v, u);
    for (std::size_t i = 0; i < u.size(); ++i) v[i] -= c * u[i];
}

} // namespace eoslab
