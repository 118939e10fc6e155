#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "dsscan/errors.hpp"

namespace dsscan {

// Deterministic random stream with cheap key-derived substreams.
//
// Every consumer derives its own stream from (master seed, purpose, index),
// so results do not depend on scheduling or on how many worker threads run.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key), engine_(mix(key)) {}

    // Substream addressed by an integer (replicate index, pair index, ...).
    RngStream derive(std::uint64_t salt) const {
        return RngStream(mix(key_ ^ mix(salt + 0x9e3779b97f4a7c15ull)));
    }

    // Substream addressed by a purpose label.
    RngStream derive(std::string_view label) const { return derive(fnv1a(label)); }

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits; identical across platforms.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double exponential(double rate) {
        if (!(rate > 0.0)) throw InvalidParameter("exponential rate must be positive");
        return -std::log1p(-uniform()) / rate;
    }

    // Sample an index from unnormalized non-negative weights.
    int discrete(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw InvalidParameter("discrete distribution has no mass");
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    // Sample from a precomputed inclusive cumulative distribution.
    int discrete_from_cdf(std::span<const double> cdf) {
        double u = uniform() * cdf.back();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        return static_cast<int>(it - cdf.begin());
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::uint64_t key_;
    std::mt19937_64 engine_;
};

}  // namespace dsscan
