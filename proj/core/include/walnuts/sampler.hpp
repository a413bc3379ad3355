#ifndef WALNUTS_SAMPLER_HPP
#define WALNUTS_SAMPLER_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "walnuts/integrator.hpp"
#include "walnuts/orbit.hpp"
#include "walnuts/phase.hpp"
#include "walnuts/rng.hpp"
#include "walnuts/targets.hpp"

namespace walnuts {

enum class JitterMode { PerTransition, PerMacroStep };

struct WalnutsConfig {
  double step = 1.0;           // macro step size h
  double max_error = 0.3;      // energy error threshold delta
  int max_doublings = 10;
  MicroDistribution micro_dist = MicroDistribution::randomized_two_point();
  double jitter = 0.20;        // uniform +/- fraction of the macro step
  JitterMode jitter_mode = JitterMode::PerTransition;
  EnergyErrorMode energy_error_mode = EnergyErrorMode::Envelope;
  int min_halvings = 0;
  int halvings_cap = 20;

  void validate() const;
};

struct NutsConfig {
  double step = 1.0;
  int max_doublings = 10;
  double jitter = 0.0;
};

enum class Termination { UTurn, SubUTurn, MaxDoublings, ZeroWeights, Divergence };

const char* to_string(Termination t);

struct TransitionStats {
  int doublings = 0;        // m of the final orbit (length 2^m)
  long index = 0;           // selected orbit index i
  double time_displacement = 0;  // i * effective step
  double energy_envelope = 0;    // H+ - H- over the final orbit trajectory
  double min_micro_step = std::numeric_limits<double>::quiet_NaN();
  double max_micro_step = std::numeric_limits<double>::quiet_NaN();
  long max_factor = 0;      // largest micro factor over the final orbit
  long orbit_length = 1;
  std::int64_t gradient_evals = 0;
  Termination terminated_by = Termination::MaxDoublings;
  double coord0_min = 0;    // extreme first coordinate over the orbit
  double coord0_max = 0;
  double step_used = 0;     // effective (jittered) macro step
};

/// Augmented state (theta, rho, m, b, factors, i) of one transition, with the
/// effective step recorded so the orbit map can be replayed.  factors holds
/// one entry per macro interval [t_j, t_{j+1}], j in a..b-1, a = b - 2^m + 1.
struct ExtendedState {
  Vector theta;
  Vector rho;
  int doublings = 0;
  long right_index = 0;
  std::vector<long> factors;
  long index = 0;
  double step = 0;

  long left_index() const { return right_index - (1L << doublings) + 1; }
  long interval_factor(long j) const { return factors[j - left_index()]; }
  void check_consistent() const;
};

/// Side data captured from a transition for property tests.
struct TransitionCapture {
  PhasePoint start;               // state after momentum refresh
  PhasePoint left_edge;           // state at orbit index a
  PhasePoint right_edge;          // state at orbit index b
  PhasePoint selected;
  ExtendedState extended;
  bool valid = false;             // set when capture is supported (no per-step jitter)
};

/// h * Unif(1 - jitter, 1 + jitter); consumes one uniform, or none when
/// jitter <= 0.
double macro_jitter(double step, double jitter, Rng& rng);

/// Metropolis-style index selection favoring the extension.  Weights arrive
/// in generation order as (index, log weight) pairs; consumes one uniform per
/// extension entry after the first plus one acceptance uniform.
struct SelectionResult {
  bool accepted = false;
  long index = 0;
};
SelectionResult biased_progressive_select(
    long current_index, double current_total_log_weight,
    const std::vector<std::pair<long, double>>& extension, Rng& rng);

/// One WALNUTS transition (memory-efficient production path).
Vector walnuts_transition(const Model& model, const MassMatrix& mass,
                          const WalnutsConfig& cfg, const Vector& theta,
                          Rng& rng, TransitionStats* stats = nullptr,
                          TransitionCapture* capture = nullptr);

/// Reference transition with full orbit storage and recursive sub-U-turn
/// checks, transcribing the conceptual algorithm directly.  Consumes the
/// random stream in the same documented order as walnuts_transition and must
/// produce identical selections on a shared stream.
Vector walnuts_transition_full(const Model& model, const MassMatrix& mass,
                               const WalnutsConfig& cfg, const Vector& theta,
                               Rng& rng, TransitionStats* stats = nullptr,
                               TransitionCapture* capture = nullptr);

/// Baseline fixed-step NUTS with biased progressive selection and weights
/// proportional to exp(-H).
Vector nuts_transition(const Model& model, const MassMatrix& mass, double step,
                       int max_doublings, const Vector& theta, Rng& rng,
                       TransitionStats* stats = nullptr);
Vector nuts_transition(const Model& model, const MassMatrix& mass,
                       const NutsConfig& cfg, const Vector& theta, Rng& rng,
                       TransitionStats* stats = nullptr);

/// Fixed-length biased progressive HMC: exactly `doublings` doublings, no
/// U-turn checks.
Vector bphmc_transition(const Model& model, const MassMatrix& mass, double step,
                        int doublings, const Vector& theta, Rng& rng,
                        TransitionStats* stats = nullptr);

/// Index selected by exact-flow biased progressive sampling with m doublings;
/// follows the symmetric discrete triangular law.
long exact_bp_index(int doublings, Rng& rng);

/// Closed-form law of exact_bp_index.
double triangular_pmf(int doublings, long k);

/// Exact-flow biased progressive transition for Gaussian targets.
Vector exact_bp_transition(const GaussianModel& model, const MassMatrix& mass,
                           double step, int doublings, const Vector& theta,
                           Rng& rng, TransitionStats* stats = nullptr);

/// The extended-state involution: moves the origin to the selected index,
/// relabels the orbit, and negates the index.  Applying it twice is the
/// identity.
ExtendedState psi_involution(const Model& model, const MassMatrix& mass,
                             const ExtendedState& z);

/// Replays the orbit map of an extended state from its origin, returning the
/// states at the leftmost and rightmost orbit indices.
std::pair<PhasePoint, PhasePoint> replay_orbit_endpoints(
    const Model& model, const MassMatrix& mass, const ExtendedState& z);

namespace detail {

/// Weight recursion shared by all kernels:
///   log w_new = log w_prev + (H_prev - H_new) + log_pmf_diff
/// with log_pmf_diff the reverse-vs-forward micro factor log probability
/// difference (0 for fixed-step kernels).
double update_log_weight(double lw_prev, double H_prev, double H_new,
                         double log_pmf_diff);

/// Backward micro factor at a flipped macro-step endpoint, searched only up
/// to the traversed factor: larger factors have zero probability under any
/// supported distribution.  When the traversed factor equals the forward
/// baseline, candidates at that factor are skipped and inferred to succeed
/// (the reversed trajectory retraces the forward one).  Returns nullopt when
/// the backward factor exceeds `factor`.
std::optional<long> backward_micro_factor(const Model& model,
                                          const MassMatrix& mass,
                                          const PhasePoint& flipped_end,
                                          double step, double max_error,
                                          EnergyErrorMode mode,
                                          int min_halvings, long factor,
                                          bool matches_forward,
                                          const Vector* grad_end,
                                          std::int64_t* grads,
                                          bool run_inferred_candidate);

}  // namespace detail

}  // namespace walnuts

#endif
