#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "eoslab/vec.hpp"

namespace eoslab {

// Seeded random stream with cheap independent substreams.
//
// Generator: xoshiro256++ (Blackman & Vigna, public domain), state filled by
// SplitMix64 from (seed, stream_id). Uniform doubles take the top 53 bits;
// normals use the polar method with a cached spare. The whole pipeline is
// specified here, so identical (seed, stream_id) reproduce identical sample
// sequences on any platform; reproducibility is part of the contract.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_id_(stream_id) {
        std::uint64_t sm = seed ^ (0x9E3779B97F4A7C15ULL * (stream_id + 1));
        for (auto& word : state_) word = splitmix64(sm);
        // avoid the all-zero state
        if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0)
            state_[0] = 0x8BADF00DULL;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    // Derive an independent stream; does not disturb this stream's state.
    RngStream substream(std::uint64_t id) const {
        return RngStream(splitmix_hash(seed_, stream_id_), id + 1);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), unbiased by rejection.
    int next_int(int n) {
        if (n <= 0) throw Error("RngStream::next_int: n must be positive");
        const std::uint64_t un = std::uint64_t(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return int(x % un);
    }

    // Standard normal, polar (Marsaglia) method.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    Vec normal_vec(std::size_t n) {
        Vec v(n);
        for (double& x : v) x = next_normal();
        return v;
    }

    // k distinct indices from [0, n), order as drawn (partial Fisher-Yates).
    std::vector<int> sample_without_replacement(int n, int k) {
        if (k > n) throw Error("sample_without_replacement: k > n");
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        std::vector<int> out(k);
        for (int i = 0; i < k; ++i) {
            int j = i + next_int(n - i);
            std::swap(pool[i], pool[j]);
            out[i] = pool[i];
        }
        return out;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t splitmix_hash(std::uint64_t a, std::uint64_t b) {
        std::uint64_t x = a ^ (0xD1B54A32D192ED03ULL * (b + 1));
        return splitmix64(x);
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::array<std::uint64_t, 4> state_{};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace eoslab
