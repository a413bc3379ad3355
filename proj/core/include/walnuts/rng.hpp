#ifndef WALNUTS_RNG_HPP
#define WALNUTS_RNG_HPP

#include <cmath>
#include <cstdint>

namespace walnuts {

/// Counter-based random stream (SplitMix64).  One instance per chain; every
/// stochastic decision in a transition consumes from it in a fixed, documented
/// order so that cross-sampler equivalence tests can share streams:
///
///   1. momentum refresh: dim normal draws (two uniforms each)
///   2. step jitter: one uniform, only when jitter > 0
///   3. doubling direction bits: max_doublings uniforms, drawn up front
///   4. per new orbit state, in generation order:
///      a. per-step jitter uniform (per_macro_step mode only)
///      b. micro factor draw (randomized distributions only)
///      c. online categorical uniform (skipped for the first state of an
///         extension)
///   5. one acceptance uniform per completed extension
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform draw on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Fair coin; consumes one uniform.
  bool coin() { return uniform() < 0.5; }

  /// Uniform integer in {0, ..., n-1}; consumes one uniform.
  std::int64_t uniform_int(std::int64_t n) {
    auto k = static_cast<std::int64_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  /// Deterministic per-chain stream derived from a master seed.
  static Rng for_chain(std::uint64_t master_seed, std::uint64_t chain) {
    Rng r(master_seed ^ (0xd1342543de82ef95ULL * (chain + 1)));
    r();  // decorrelate nearby seeds
    return Rng(r());
  }

 private:
  std::uint64_t state_;
};

}  // namespace walnuts

#endif
