#pragma once

#include <cmath>
#include <cstdint>

namespace wigmc {

namespace detail {
/// Finalizer of the splitmix64 generator; also used for seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Splittable counter-based random stream. Each particle lineage owns one
/// stream keyed by (master seed, lineage index); branch children fork new
/// streams off the parent, so results never depend on worker assignment.
class SplitStream {
public:
    SplitStream() : state_(0) {}
    explicit SplitStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe under log().
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    /// Deterministically derives an independent child stream.
    SplitStream fork() { return SplitStream(detail::mix64(next_u64())); }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

/// Stream for lineage `index` under `master`. Distinct salts for engine
/// bookkeeping streams live in the engine, not here.
inline SplitStream derive_stream(std::uint64_t master, std::uint64_t index) {
    return SplitStream(detail::mix64(master ^ detail::mix64(index)));
}

}  // namespace wigmc
