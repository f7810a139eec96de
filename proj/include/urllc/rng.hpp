#pragma once

#include <cstdint>
#include <limits>

namespace urllc {

/// Counter-based 64-bit generator. Output i is a bijective mix of
/// (key, i), so any position of any stream is reachable in O(1) and two
/// instances with the same (seed, stream) produce identical sequences.
///
/// Satisfies UniformRandomBitGenerator; use with <random> distributions.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

    /// Random bits at an absolute position without advancing the stream.
    result_type at(std::uint64_t position) const { return mix(key_ + 0x9E3779B97F4A7C15ULL * (position + 1)); }

    void discard(std::uint64_t n) { counter_ += n; }
    std::uint64_t position() const { return counter_; }

    /// Uniform double in [0,1) with 53 random bits.
    double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

    /// Independent child stream, e.g. one per user or per replication.
    CounterRng split(std::uint64_t stream) const { return CounterRng(key_, stream + 1); }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace urllc
