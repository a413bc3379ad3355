#ifndef WALNUTS_ORBIT_HPP
#define WALNUTS_ORBIT_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "walnuts/phase.hpp"
#include "walnuts/rng.hpp"

namespace walnuts {

/// Consecutive leapfrog states on the macro grid, indexed a..b with 0 inside.
/// This full-storage representation is the reference for testing; the
/// production sampler keeps only O(d * max_doublings) state.
struct Orbit {
  long a = 0;
  long b = -1;
  std::vector<PhasePoint> states;    // states[i - a]
  std::vector<double> log_weights;   // log_weights[i - a]
  // micro factor of the leapfrog step that created each state (0 at the
  // origin state, which is not created by a step)
  std::vector<long> creation_factors;

  long length() const { return b - a + 1; }
  const PhasePoint& state(long i) const { return states[i - a]; }
  double log_weight(long i) const { return log_weights[i - a]; }

  /// Factor of macro interval [t_j, t_{j+1}], j in a..b-1.  Intervals at
  /// j >= 0 were created forward (by state j+1), intervals at j < 0 backward
  /// (by state j).
  long interval_factor(long j) const {
    return j >= 0 ? creation_factors[j + 1 - a] : creation_factors[j - a];
  }

  static Orbit singleton(PhasePoint z, double log_weight);
};

/// Merges two orbits whose index ranges are adjacent (first ends where the
/// second begins).
Orbit concat(const Orbit& left, const Orbit& right);

/// U-turn condition between the two endpoint states of a segment, in index
/// order.  Strict inequality: zero inner products are not U-turns.
bool u_turn_pair(const PhasePoint& left, const PhasePoint& right,
                 const MassMatrix& mass);

bool u_turn(const Orbit& orbit, const MassMatrix& mass);

/// True when any aligned power-of-two sub-orbit in the recursive halving
/// hierarchy satisfies the U-turn condition.  Requires a power-of-two length.
bool sub_u_turn(const Orbit& orbit, const MassMatrix& mass);

/// Incremental sub-U-turn checks over one orbit extension, fed states in
/// generation order.  Performs exactly the checks of the recursive halving
/// hierarchy, in completion order, and discards interior states as soon as
/// every check that flanks them has run.  For backward extensions, feed the
/// generation-frame momentum (flipped); the condition is invariant under
/// index reversal combined with a momentum flip.
class SubUturnScanner {
 public:
  SubUturnScanner() = default;

  /// Start scanning an extension of the given power-of-two length.
  void begin(long length);

  /// Feed the next state; returns true when a completed aligned block
  /// U-turns, at which point remaining integration steps can be skipped.
  bool push(const Vector& theta, const Vector& rho_gen, const MassMatrix& mass);

  int peak_retained() const { return peak_retained_; }

  /// Test hook recording (left, right) 1-based positions of each check.
  void set_check_log(std::vector<std::pair<long, long>>* log) { log_ = log; }

 private:
  struct Checkpoint {
    long pos = -1;
    Vector theta;
    Vector rho;
  };
  int depth_ = 0;
  long length_ = 0;
  long next_pos_ = 0;
  std::vector<Checkpoint> slots_;
  int peak_retained_ = 0;
  std::vector<std::pair<long, long>>* log_ = nullptr;
};

/// Online categorical sampling over log weights: offer states in generation
/// order; the first offer initializes without consuming randomness, each
/// later offer consumes exactly one uniform.  Selection probability is
/// proportional to exp(log_weight).
class ReservoirSampler {
 public:
  void reset();
  void offer(double log_weight, long index, const PhasePoint& z, Rng& rng);

  bool empty() const { return count_ == 0; }
  long index() const { return index_; }
  const PhasePoint& state() const { return state_; }
  double total_log_weight() const { return total_; }

 private:
  long count_ = 0;
  long index_ = 0;
  PhasePoint state_;
  double total_ = 0;
};

/// log(exp(a) + exp(b)) with -inf handling.
double log_add_exp(double a, double b);

}  // namespace walnuts

#endif
