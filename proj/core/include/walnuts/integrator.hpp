#ifndef WALNUTS_INTEGRATOR_HPP
#define WALNUTS_INTEGRATOR_HPP

#include <cstdint>
#include <limits>
#include <vector>

#include "walnuts/phase.hpp"
#include "walnuts/rng.hpp"
#include "walnuts/targets.hpp"

namespace walnuts {

/// Which energy error controls the micro step search: the envelope
/// max H - min H over the whole micro trajectory, or the absolute
/// difference of the endpoint Hamiltonians.
enum class EnergyErrorMode { Envelope, Endpoint };

/// One leapfrog update with step h.  Negative h integrates backward.
/// Evaluates two gradients; use leapfrog_n for cached-gradient chains.
PhasePoint leapfrog_step(const Model& model, const MassMatrix& mass,
                         const PhasePoint& z, double h);

struct LeapfrogResult {
  PhasePoint z;        // endpoint, valid only when finite
  Vector grad_end;     // gradient at endpoint position
  double H_start = 0;
  double H_end = 0;
  double H_min = 0;    // envelope over all L+1 states
  double H_max = 0;
  std::int64_t grads = 0;
  bool finite = true;  // false when a state or Hamiltonian went non-finite
};

/// L leapfrog steps with step h and shared gradient caching (L gradient
/// evaluations when grad_start is supplied, L+1 otherwise).  Tracks the
/// Hamiltonian envelope over all visited states and stops early if a state
/// or Hamiltonian becomes non-finite.
LeapfrogResult leapfrog_n(const Model& model, const MassMatrix& mass,
                          const PhasePoint& z, double h, long steps,
                          const Vector* grad_start = nullptr);

struct MicroResult {
  long factor = 1;     // chosen power-of-two micro step count
  PhasePoint end;      // state after one macro step of `factor` micro steps
  Vector grad_end;
  double H_start = 0;
  double H_end = 0;
  double H_min = 0;    // envelope over the accepted micro trajectory
  double H_max = 0;
  std::int64_t grads_used = 0;
  bool divergent = false;
  double best_error = std::numeric_limits<double>::infinity();
};

/// Smallest factor 2^i, i >= min_halvings, such that the energy error of the
/// leapfrog trajectory over [0, h] at micro step h / 2^i stays within
/// max_error.  Each candidate restarts integration from z.  Non-finite states
/// count as exceeding the threshold.  When no factor up to 2^halvings_cap
/// satisfies the bound the result is flagged divergent and carries the best
/// error seen.  An infinite max_error accepts the first candidate outright.
MicroResult micro(const Model& model, const MassMatrix& mass,
                  const PhasePoint& z, double h, double max_error,
                  EnergyErrorMode mode, int min_halvings, int halvings_cap,
                  const Vector* grad_start = nullptr);

/// Distribution of the micro step factor given the deterministic baseline.
/// Support never extends below the baseline.
class MicroDistribution {
 public:
  enum class Kind { Deterministic, RandomizedTwoPoint, Custom };

  static MicroDistribution deterministic();
  /// Baseline with probability 2/3, next doubling with probability 1/3.
  static MicroDistribution randomized_two_point();
  /// weight k on factor baseline * 2^k; weights are normalized.
  static MicroDistribution custom(std::vector<double> offset_weights);

  Kind kind() const { return kind_; }
  /// True when sample() consumes a uniform draw.
  bool consumes_draw() const { return kind_ != Kind::Deterministic; }

  long sample(long baseline, Rng& rng) const;
  double pmf(long factor, long baseline) const;
  double log_pmf(long factor, long baseline) const;

 private:
  explicit MicroDistribution(Kind kind) : kind_(kind) {}
  Kind kind_;
  std::vector<double> weights_;
};

}  // namespace walnuts

#endif
