#pragma once

#include <cstdint>
#include <random>

namespace pbtrom {

/// Seeded random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; uniform and normal variates are derived here rather than through
/// the <random> distributions, whose algorithms are implementation-defined.
/// Two Rng objects built from the same seed therefore produce the same
/// sequence on every conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal draw (Box-Muller, one cached spare).
    double normal();

    /// Independent child stream identified by `stream`. Does not advance this stream.
    Rng derive(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// splitmix64 finalizer; used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

/// Named sub-streams used across the training pipeline.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kAugment = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kValAugment = 5;
inline constexpr std::uint64_t kTestSampling = 6;
} // namespace streams

} // namespace pbtrom
