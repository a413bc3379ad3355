#include "walnuts/sampler.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "walnuts/oracles.hpp"

namespace walnuts {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

int log2_exact(long n) {
  int k = 0;
  while ((1L << k) < n) ++k;
  return k;
}
}  // namespace

void WalnutsConfig::validate() const {
  if (step <= 0) throw std::invalid_argument("walnuts: step must be positive");
  if (max_error <= 0) throw std::invalid_argument("walnuts: max_error must be positive");
  if (max_doublings < 1) throw std::invalid_argument("walnuts: max_doublings must be >= 1");
  if (jitter < 0 || jitter >= 1) throw std::invalid_argument("walnuts: jitter must be in [0, 1)");
  if (min_halvings < 0 || min_halvings > halvings_cap) {
    throw std::invalid_argument("walnuts: need 0 <= min_halvings <= halvings_cap");
  }
}

void ExtendedState::check_consistent() const {
  long a = left_index();
  if (doublings < 0 || a > 0 || right_index < 0) {
    throw std::invalid_argument("extended state: index range must contain 0");
  }
  if (static_cast<long>(factors.size()) != (1L << doublings) - 1) {
    throw std::invalid_argument("extended state: wrong number of micro factors");
  }
  if (index < a || index > right_index) {
    throw std::invalid_argument("extended state: selected index outside orbit");
  }
  if (!(step > 0)) {
    throw std::invalid_argument("extended state: step must be positive");
  }
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::UTurn: return "u_turn";
    case Termination::SubUTurn: return "sub_u_turn";
    case Termination::MaxDoublings: return "max_doublings";
    case Termination::ZeroWeights: return "zero_weights";
    case Termination::Divergence: return "divergence";
  }
  return "unknown";
}

double macro_jitter(double step, double jitter, Rng& rng) {
  if (jitter <= 0) return step;
  return step * (1.0 - jitter + 2.0 * jitter * rng.uniform());
}

namespace detail {

double update_log_weight(double lw_prev, double H_prev, double H_new,
                         double log_pmf_diff) {
  return lw_prev + (H_prev - H_new) + log_pmf_diff;
}

std::optional<long> backward_micro_factor(
    const Model& model, const MassMatrix& mass, const PhasePoint& flipped_end,
    double step, double max_error, EnergyErrorMode mode, int min_halvings,
    long factor, bool matches_forward, const Vector* grad_end,
    std::int64_t* grads, bool run_inferred_candidate) {
  const int lmax = log2_exact(factor);
  const int last = (matches_forward && !run_inferred_candidate) ? lmax - 1 : lmax;
  for (int j = min_halvings; j <= last; ++j) {
    long f = 1L << j;
    LeapfrogResult r = leapfrog_n(model, mass, flipped_end,
                                  step / static_cast<double>(f), f, grad_end);
    if (grads != nullptr) *grads += r.grads;
    if (!r.finite) continue;
    double err = mode == EnergyErrorMode::Envelope
                     ? r.H_max - r.H_min
                     : std::abs(r.H_start - r.H_end);
    if (err <= max_error) return f;
  }
  if (matches_forward && !run_inferred_candidate) {
    // The reversed trajectory at `factor` retraces the accepted forward one,
    // so it satisfies the same bound without being integrated.
    return factor;
  }
  return std::nullopt;
}

}  // namespace detail

namespace {

// Orbit edge in the generation frame: rho_gen points in the direction the
// orbit grows, so backward extensions integrate forward in this frame.
struct Edge {
  Vector theta;
  Vector rho_gen;
  Vector grad;
  double H = 0;
  double lw = 0;
  long index = 0;
};

PhasePoint true_frame(const Edge& e, bool forward) {
  return forward ? PhasePoint{e.theta, e.rho_gen}
                 : PhasePoint{e.theta, -e.rho_gen};
}

struct AdvanceResult {
  bool divergent = false;
  long factor = 1;
  double H_min = kInf;
  double H_max = -kInf;
  std::int64_t grads = 0;
};

// One macro step off an orbit edge: micro search, factor draw, traversal,
// reverse-factor check, weight update.  `optimized` reuses the search
// endpoint and truncates the reverse check; the reference path recomputes
// everything the way the conceptual algorithm states it.
AdvanceResult advance_edge(const Model& model, const MassMatrix& mass, Edge& e,
                           double step, const WalnutsConfig& cfg, int dir,
                           Rng& rng, bool optimized) {
  AdvanceResult out;
  MicroResult ms = micro(model, mass, PhasePoint{e.theta, e.rho_gen}, step,
                         cfg.max_error, cfg.energy_error_mode, cfg.min_halvings,
                         cfg.halvings_cap, &e.grad);
  out.grads += ms.grads_used;
  if (ms.divergent) {
    out.divergent = true;
    return out;
  }
  long factor = cfg.micro_dist.sample(ms.factor, rng);
  out.factor = factor;

  PhasePoint end;
  Vector grad_end;
  double H_new;
  if (optimized && factor == ms.factor) {
    end = std::move(ms.end);
    grad_end = std::move(ms.grad_end);
    H_new = ms.H_end;
    out.H_min = ms.H_min;
    out.H_max = ms.H_max;
  } else {
    LeapfrogResult lr =
        leapfrog_n(model, mass, PhasePoint{e.theta, e.rho_gen},
                   step / static_cast<double>(factor), factor, &e.grad);
    out.grads += lr.grads;
    if (!lr.finite) {
      out.divergent = true;
      return out;
    }
    end = std::move(lr.z);
    grad_end = std::move(lr.grad_end);
    H_new = lr.H_end;
    out.H_min = lr.H_min;
    out.H_max = lr.H_max;
  }

  double lw_new;
  if (optimized && e.lw == kNegInf) {
    lw_new = kNegInf;  // dead side, reverse check cannot resurrect it
  } else {
    double lden = cfg.micro_dist.log_pmf(factor, ms.factor);
    PhasePoint flipped{end.theta, -end.rho};
    auto bwd = detail::backward_micro_factor(
        model, mass, flipped, step, cfg.max_error, cfg.energy_error_mode,
        cfg.min_halvings, factor, factor == ms.factor, &grad_end, &out.grads,
        /*run_inferred_candidate=*/!optimized);
    double lnum = bwd ? cfg.micro_dist.log_pmf(factor, *bwd) : kNegInf;
    lw_new = detail::update_log_weight(e.lw, e.H, H_new, lnum - lden);
  }

  e.theta = std::move(end.theta);
  e.rho_gen = std::move(end.rho);
  e.grad = std::move(grad_end);
  e.H = H_new;
  e.lw = lw_new;
  e.index += dir;
  return out;
}

struct PendingStats {
  double env_lo = kInf;
  double env_hi = -kInf;
  double c0_lo = kInf;
  double c0_hi = -kInf;
  double step_lo = kInf;
  double step_hi = 0;
  long max_factor = 0;
  std::vector<long> factors;

  void add(const AdvanceResult& adv, double theta0, double h_step) {
    env_lo = std::min(env_lo, adv.H_min);
    env_hi = std::max(env_hi, adv.H_max);
    c0_lo = std::min(c0_lo, theta0);
    c0_hi = std::max(c0_hi, theta0);
    double micro_step = h_step / static_cast<double>(adv.factor);
    step_lo = std::min(step_lo, micro_step);
    step_hi = std::max(step_hi, micro_step);
    max_factor = std::max(max_factor, adv.factor);
    factors.push_back(adv.factor);
  }
};

struct RunningStats {
  double env_lo;
  double env_hi;
  double c0_lo;
  double c0_hi;
  double step_lo = kInf;
  double step_hi = 0;
  long max_factor = 0;
  std::vector<long> fwd_factors;
  std::vector<long> bwd_factors;

  RunningStats(double H0, double theta0)
      : env_lo(H0), env_hi(H0), c0_lo(theta0), c0_hi(theta0) {}

  void commit(const PendingStats& p, bool forward) {
    env_lo = std::min(env_lo, p.env_lo);
    env_hi = std::max(env_hi, p.env_hi);
    c0_lo = std::min(c0_lo, p.c0_lo);
    c0_hi = std::max(c0_hi, p.c0_hi);
    step_lo = std::min(step_lo, p.step_lo);
    step_hi = std::max(step_hi, p.step_hi);
    max_factor = std::max(max_factor, p.max_factor);
    auto& dst = forward ? fwd_factors : bwd_factors;
    dst.insert(dst.end(), p.factors.begin(), p.factors.end());
  }

  long interval_factor(long j) const {
    return j >= 0 ? fwd_factors[static_cast<std::size_t>(j)]
                  : bwd_factors[static_cast<std::size_t>(-1 - j)];
  }
};

void fill_stats(TransitionStats* stats, int m, long sel_index, double h_eff,
                const RunningStats& rs, std::int64_t grads, Termination term) {
  if (stats == nullptr) return;
  stats->doublings = m;
  stats->index = sel_index;
  stats->time_displacement = static_cast<double>(sel_index) * h_eff;
  stats->energy_envelope = rs.env_hi - rs.env_lo;
  bool any = !rs.fwd_factors.empty() || !rs.bwd_factors.empty();
  stats->min_micro_step = any ? rs.step_lo : std::numeric_limits<double>::quiet_NaN();
  stats->max_micro_step = any ? rs.step_hi : std::numeric_limits<double>::quiet_NaN();
  stats->max_factor = rs.max_factor;
  stats->orbit_length = 1L << m;
  stats->gradient_evals = grads;
  stats->terminated_by = term;
  stats->coord0_min = rs.c0_lo;
  stats->coord0_max = rs.c0_hi;
  stats->step_used = h_eff;
}

void fill_capture(TransitionCapture* capture, const WalnutsConfig& cfg,
                  const PhasePoint& start, const PhasePoint& left,
                  const PhasePoint& right, const PhasePoint& selected,
                  long sel_index, int m, long b, double h_eff,
                  const RunningStats& rs) {
  if (capture == nullptr) return;
  capture->start = start;
  capture->left_edge = left;
  capture->right_edge = right;
  capture->selected = selected;
  capture->valid = cfg.jitter_mode == JitterMode::PerTransition;
  auto& ext = capture->extended;
  ext.theta = start.theta;
  ext.rho = start.rho;
  ext.doublings = m;
  ext.right_index = b;
  ext.index = sel_index;
  ext.step = h_eff;
  long a = b - (1L << m) + 1;
  ext.factors.clear();
  ext.factors.reserve(static_cast<std::size_t>((1L << m) - 1));
  for (long j = a; j < b; ++j) {
    ext.factors.push_back(rs.interval_factor(j));
  }
}

}  // namespace

SelectionResult biased_progressive_select(
    long current_index, double current_total_log_weight,
    const std::vector<std::pair<long, double>>& extension, Rng& rng) {
  ReservoirSampler reservoir;
  reservoir.reset();
  PhasePoint none;
  for (const auto& [idx, lw] : extension) {
    reservoir.offer(lw, idx, none, rng);
  }
  double u = rng.uniform();
  double lw_ext = reservoir.total_log_weight();
  if (lw_ext != kNegInf &&
      u <= std::exp(lw_ext - current_total_log_weight)) {
    return {true, reservoir.index()};
  }
  return {false, current_index};
}

Vector walnuts_transition(const Model& model, const MassMatrix& mass,
                          const WalnutsConfig& cfg, const Vector& theta,
                          Rng& rng, TransitionStats* stats,
                          TransitionCapture* capture) {
  cfg.validate();
  if (theta.size() != mass.dim() || theta.size() != model.dim()) {
    throw std::invalid_argument("walnuts_transition: dimension mismatch");
  }
  Vector rho = mass.sample_momentum(rng);
  double h_eff = cfg.jitter_mode == JitterMode::PerTransition
                     ? macro_jitter(cfg.step, cfg.jitter, rng)
                     : cfg.step;

  Vector grad0(theta.size());
  model.grad_log_density(theta, grad0);
  std::int64_t grads = 1;
  double H0 = -model.log_density(theta) + kinetic_energy(mass, rho);
  if (!std::isfinite(H0)) {
    throw std::domain_error("walnuts_transition: non-finite initial energy");
  }

  Edge fwd{theta, rho, grad0, H0, 0.0, 0};
  Edge bwd{theta, -rho, grad0, H0, 0.0, 0};
  PhasePoint start{theta, rho};
  PhasePoint sel = start;
  long sel_index = 0;

  std::vector<bool> bits(static_cast<std::size_t>(cfg.max_doublings));
  for (int k = 0; k < cfg.max_doublings; ++k) bits[k] = rng.coin();

  double lw_total = 0.0;
  long b = 0;
  RunningStats rs(H0, theta[0]);
  Termination term = Termination::MaxDoublings;
  int m = 0;
  SubUturnScanner scanner;
  ReservoirSampler reservoir;

  for (int k = 0; k < cfg.max_doublings; ++k) {
    long L = 1L << k;
    bool forward = bits[k];
    Edge& edge = forward ? fwd : bwd;
    Edge saved = edge;
    scanner.begin(L);
    reservoir.reset();
    PendingStats pending;
    bool diverged = false;
    bool subu = false;

    for (long s = 0; s < L; ++s) {
      double h_step = cfg.jitter_mode == JitterMode::PerMacroStep
                          ? macro_jitter(cfg.step, cfg.jitter, rng)
                          : h_eff;
      AdvanceResult adv = advance_edge(model, mass, edge, h_step, cfg,
                                       forward ? +1 : -1, rng, true);
      grads += adv.grads;
      if (adv.divergent) {
        diverged = true;
        break;
      }
      reservoir.offer(edge.lw, edge.index, true_frame(edge, forward), rng);
      pending.add(adv, edge.theta[0], h_step);
      if (scanner.push(edge.theta, edge.rho_gen, mass)) {
        subu = true;
        break;
      }
    }

    if (diverged || subu) {
      edge = saved;  // extension abandoned, orbit unchanged
      term = diverged ? Termination::Divergence : Termination::SubUTurn;
      m = k;
      break;
    }

    rs.commit(pending, forward);
    if (forward) {
      b += L;
    }
    m = k + 1;

    double u = rng.uniform();
    double lw_ext = reservoir.total_log_weight();
    if (lw_ext != kNegInf && u <= std::exp(lw_ext - lw_total)) {
      sel = reservoir.state();
      sel_index = reservoir.index();
    }
    lw_total = log_add_exp(lw_total, lw_ext);

    if (u_turn_pair(true_frame(bwd, false), true_frame(fwd, true), mass)) {
      term = Termination::UTurn;
      break;
    }
    if (fwd.lw == kNegInf && bwd.lw == kNegInf) {
      term = Termination::ZeroWeights;
      break;
    }
  }

  fill_stats(stats, m, sel_index, h_eff, rs, grads, term);
  fill_capture(capture, cfg, start, true_frame(bwd, false),
               true_frame(fwd, true), sel, sel_index, m, b, h_eff, rs);
  return sel.theta;
}

Vector walnuts_transition_full(const Model& model, const MassMatrix& mass,
                               const WalnutsConfig& cfg, const Vector& theta,
                               Rng& rng, TransitionStats* stats,
                               TransitionCapture* capture) {
  cfg.validate();
  if (theta.size() != mass.dim() || theta.size() != model.dim()) {
    throw std::invalid_argument("walnuts_transition_full: dimension mismatch");
  }
  Vector rho = mass.sample_momentum(rng);
  double h_eff = cfg.jitter_mode == JitterMode::PerTransition
                     ? macro_jitter(cfg.step, cfg.jitter, rng)
                     : cfg.step;

  Vector grad0(theta.size());
  model.grad_log_density(theta, grad0);
  std::int64_t grads = 1;
  double H0 = -model.log_density(theta) + kinetic_energy(mass, rho);
  if (!std::isfinite(H0)) {
    throw std::domain_error("walnuts_transition_full: non-finite initial energy");
  }

  Orbit orbit = Orbit::singleton(PhasePoint{theta, rho}, 0.0);
  PhasePoint start{theta, rho};
  PhasePoint sel = start;
  long sel_index = 0;

  std::vector<bool> bits(static_cast<std::size_t>(cfg.max_doublings));
  for (int k = 0; k < cfg.max_doublings; ++k) bits[k] = rng.coin();

  double lw_total = 0.0;
  RunningStats rs(H0, theta[0]);
  Termination term = Termination::MaxDoublings;
  int m = 0;
  ReservoirSampler reservoir;

  for (int k = 0; k < cfg.max_doublings; ++k) {
    long L = 1L << k;
    bool forward = bits[k];

    // rebuild the edge in the generation frame from stored orbit state
    const PhasePoint& edge_state =
        forward ? orbit.states.back() : orbit.states.front();
    Edge edge;
    edge.theta = edge_state.theta;
    edge.rho_gen = forward ? edge_state.rho : Vector(-edge_state.rho);
    edge.grad.resize(theta.size());
    model.grad_log_density(edge.theta, edge.grad);
    ++grads;
    edge.H = -model.log_density(edge.theta) + kinetic_energy(mass, edge.rho_gen);
    edge.lw = forward ? orbit.log_weights.back() : orbit.log_weights.front();
    edge.index = forward ? orbit.b : orbit.a;

    Orbit ext;
    ext.a = forward ? orbit.b + 1 : orbit.a - L;
    ext.b = forward ? orbit.b + L : orbit.a - 1;
    ext.states.resize(static_cast<std::size_t>(L));
    ext.log_weights.assign(static_cast<std::size_t>(L), kNegInf);
    ext.creation_factors.assign(static_cast<std::size_t>(L), 0);

    reservoir.reset();
    PendingStats pending;
    bool diverged = false;

    for (long s = 0; s < L; ++s) {
      double h_step = cfg.jitter_mode == JitterMode::PerMacroStep
                          ? macro_jitter(cfg.step, cfg.jitter, rng)
                          : h_eff;
      AdvanceResult adv = advance_edge(model, mass, edge, h_step, cfg,
                                       forward ? +1 : -1, rng, false);
      grads += adv.grads;
      if (adv.divergent) {
        diverged = true;
        break;
      }
      std::size_t slot = static_cast<std::size_t>(
          forward ? s : L - 1 - s);  // states stored in index order
      ext.states[slot] = true_frame(edge, forward);
      ext.log_weights[slot] = edge.lw;
      ext.creation_factors[slot] = adv.factor;
      reservoir.offer(edge.lw, edge.index, ext.states[slot], rng);
      pending.add(adv, edge.theta[0], h_step);
    }

    if (diverged) {
      term = Termination::Divergence;
      m = k;
      break;
    }
    if (sub_u_turn(ext, mass)) {
      term = Termination::SubUTurn;
      m = k;
      break;
    }

    orbit = forward ? concat(orbit, ext) : concat(ext, orbit);
    rs.commit(pending, forward);
    m = k + 1;

    double u = rng.uniform();
    double lw_ext = reservoir.total_log_weight();
    if (lw_ext != kNegInf && u <= std::exp(lw_ext - lw_total)) {
      sel = reservoir.state();
      sel_index = reservoir.index();
    }
    lw_total = log_add_exp(lw_total, lw_ext);

    if (u_turn(orbit, mass)) {
      term = Termination::UTurn;
      break;
    }
    if (orbit.log_weights.front() == kNegInf &&
        orbit.log_weights.back() == kNegInf) {
      term = Termination::ZeroWeights;
      break;
    }
  }

  fill_stats(stats, m, sel_index, h_eff, rs, grads, term);
  fill_capture(capture, cfg, start, orbit.states.front(), orbit.states.back(),
               sel, sel_index, m, orbit.b, h_eff, rs);
  return sel.theta;
}

namespace {

Vector fixed_step_doubling_transition(const Model& model,
                                      const MassMatrix& mass, double step,
                                      int max_doublings, double jitter,
                                      bool uturn_checks, const Vector& theta,
                                      Rng& rng, TransitionStats* stats) {
  if (step <= 0) throw std::invalid_argument("step must be positive");
  if (max_doublings < 0) throw std::invalid_argument("doublings must be >= 0");
  if (theta.size() != mass.dim() || theta.size() != model.dim()) {
    throw std::invalid_argument("transition: dimension mismatch");
  }
  Vector rho = mass.sample_momentum(rng);
  double h_eff = macro_jitter(step, jitter, rng);

  Vector grad0(theta.size());
  model.grad_log_density(theta, grad0);
  std::int64_t grads = 1;
  double H0 = -model.log_density(theta) + kinetic_energy(mass, rho);
  if (!std::isfinite(H0)) {
    throw std::domain_error("transition: non-finite initial energy");
  }

  Edge fwd{theta, rho, grad0, H0, 0.0, 0};
  Edge bwd{theta, -rho, grad0, H0, 0.0, 0};
  PhasePoint sel{theta, rho};
  long sel_index = 0;

  std::vector<bool> bits(static_cast<std::size_t>(max_doublings));
  for (int k = 0; k < max_doublings; ++k) bits[k] = rng.coin();

  double lw_total = 0.0;
  RunningStats rs(H0, theta[0]);
  Termination term = Termination::MaxDoublings;
  int m = 0;
  SubUturnScanner scanner;
  ReservoirSampler reservoir;

  for (int k = 0; k < max_doublings; ++k) {
    long L = 1L << k;
    bool forward = bits[k];
    Edge& edge = forward ? fwd : bwd;
    Edge saved = edge;
    if (uturn_checks) scanner.begin(L);
    reservoir.reset();
    PendingStats pending;
    bool diverged = false;
    bool subu = false;

    for (long s = 0; s < L; ++s) {
      LeapfrogResult lr = leapfrog_n(model, mass,
                                     PhasePoint{edge.theta, edge.rho_gen},
                                     h_eff, 1, &edge.grad);
      grads += lr.grads;
      if (!lr.finite) {
        diverged = true;
        break;
      }
      double lw_new = detail::update_log_weight(edge.lw, edge.H, lr.H_end, 0.0);
      edge.theta = std::move(lr.z.theta);
      edge.rho_gen = std::move(lr.z.rho);
      edge.grad = std::move(lr.grad_end);
      edge.H = lr.H_end;
      edge.lw = lw_new;
      edge.index += forward ? +1 : -1;

      reservoir.offer(edge.lw, edge.index, true_frame(edge, forward), rng);
      AdvanceResult adv;
      adv.factor = 1;
      adv.H_min = lr.H_min;
      adv.H_max = lr.H_max;
      pending.add(adv, edge.theta[0], h_eff);
      if (uturn_checks && scanner.push(edge.theta, edge.rho_gen, mass)) {
        subu = true;
        break;
      }
    }

    if (diverged || subu) {
      edge = saved;
      term = diverged ? Termination::Divergence : Termination::SubUTurn;
      m = k;
      break;
    }

    rs.commit(pending, forward);
    m = k + 1;

    double u = rng.uniform();
    double lw_ext = reservoir.total_log_weight();
    if (lw_ext != kNegInf && u <= std::exp(lw_ext - lw_total)) {
      sel = reservoir.state();
      sel_index = reservoir.index();
    }
    lw_total = log_add_exp(lw_total, lw_ext);

    if (uturn_checks &&
        u_turn_pair(true_frame(bwd, false), true_frame(fwd, true), mass)) {
      term = Termination::UTurn;
      break;
    }
  }

  fill_stats(stats, m, sel_index, h_eff, rs, grads, term);
  return sel.theta;
}

}  // namespace

Vector nuts_transition(const Model& model, const MassMatrix& mass, double step,
                       int max_doublings, const Vector& theta, Rng& rng,
                       TransitionStats* stats) {
  return fixed_step_doubling_transition(model, mass, step, max_doublings, 0.0,
                                        true, theta, rng, stats);
}

Vector nuts_transition(const Model& model, const MassMatrix& mass,
                       const NutsConfig& cfg, const Vector& theta, Rng& rng,
                       TransitionStats* stats) {
  return fixed_step_doubling_transition(model, mass, cfg.step,
                                        cfg.max_doublings, cfg.jitter, true,
                                        theta, rng, stats);
}

Vector bphmc_transition(const Model& model, const MassMatrix& mass, double step,
                        int doublings, const Vector& theta, Rng& rng,
                        TransitionStats* stats) {
  return fixed_step_doubling_transition(model, mass, step, doublings, 0.0,
                                        false, theta, rng, stats);
}

long exact_bp_index(int doublings, Rng& rng) {
  if (doublings < 1) {
    throw std::invalid_argument("exact_bp_index: doublings must be >= 1");
  }
  long N = 1L << (doublings - 1);
  long b = 0;
  for (int j = 1; j <= doublings - 1; ++j) {
    b += (rng.coin() ? 1L : 0L) << (j - 1);
  }
  bool right = rng.coin();
  long c = 1 + rng.uniform_int(N);
  long a = b - N + 1;
  return right ? b + c : a - c;
}

double triangular_pmf(int doublings, long k) {
  if (doublings < 1) {
    throw std::invalid_argument("triangular_pmf: doublings must be >= 1");
  }
  long N = 1L << (doublings - 1);
  long mag = std::labs(k);
  if (mag < 1 || mag > 2 * N - 1) return 0.0;
  double num = static_cast<double>(std::min(mag, 2 * N - mag));
  return num / (2.0 * static_cast<double>(N) * static_cast<double>(N));
}

Vector exact_bp_transition(const GaussianModel& model, const MassMatrix& mass,
                           double step, int doublings, const Vector& theta,
                           Rng& rng, TransitionStats* stats) {
  if (mass.kind() == MassMatrix::Kind::Dense) {
    throw std::invalid_argument(
        "exact_bp_transition supports identity or diagonal mass matrices");
  }
  Vector rho = mass.sample_momentum(rng);
  if (doublings < 1) {
    if (stats != nullptr) *stats = TransitionStats{};
    return theta;
  }
  long i = exact_bp_index(doublings, rng);
  Vector prec = model.standard()
                    ? Vector::Ones(model.dim())
                    : model.scales().array().square().inverse().matrix();
  PhasePoint z = exact_gaussian_flow(prec, mass, PhasePoint{theta, rho},
                                     static_cast<double>(i) * step);
  if (stats != nullptr) {
    *stats = TransitionStats{};
    stats->doublings = doublings;
    stats->index = i;
    stats->time_displacement = static_cast<double>(i) * step;
    stats->orbit_length = 1L << doublings;
    stats->step_used = step;
    stats->terminated_by = Termination::MaxDoublings;
  }
  return z.theta;
}

ExtendedState psi_involution(const Model& model, const MassMatrix& mass,
                             const ExtendedState& z) {
  z.check_consistent();
  PhasePoint cur{z.theta, z.rho};
  long i = z.index;
  if (i > 0) {
    for (long j = 0; j < i; ++j) {
      long f = z.interval_factor(j);
      LeapfrogResult r = leapfrog_n(model, mass, cur,
                                    z.step / static_cast<double>(f), f);
      if (!r.finite) {
        throw std::runtime_error("psi_involution: non-finite trajectory");
      }
      cur = std::move(r.z);
    }
  } else if (i < 0) {
    cur.rho = -cur.rho;
    for (long j = -1; j >= i; --j) {
      long f = z.interval_factor(j);
      LeapfrogResult r = leapfrog_n(model, mass, cur,
                                    z.step / static_cast<double>(f), f);
      if (!r.finite) {
        throw std::runtime_error("psi_involution: non-finite trajectory");
      }
      cur = std::move(r.z);
    }
    cur.rho = -cur.rho;
  }
  ExtendedState out;
  out.theta = std::move(cur.theta);
  out.rho = std::move(cur.rho);
  out.doublings = z.doublings;
  out.right_index = z.right_index - i;
  // relabeling shifts the index range and the lookup offset together, so the
  // stored interval factors are unchanged
  out.factors = z.factors;
  out.index = -i;
  out.step = z.step;
  return out;
}

std::pair<PhasePoint, PhasePoint> replay_orbit_endpoints(
    const Model& model, const MassMatrix& mass, const ExtendedState& z) {
  z.check_consistent();
  PhasePoint right{z.theta, z.rho};
  for (long j = 0; j < z.right_index; ++j) {
    long f = z.interval_factor(j);
    LeapfrogResult r = leapfrog_n(model, mass, right,
                                  z.step / static_cast<double>(f), f);
    if (!r.finite) {
      throw std::runtime_error("replay_orbit_endpoints: non-finite trajectory");
    }
    right = std::move(r.z);
  }
  PhasePoint left{z.theta, -z.rho};
  for (long j = -1; j >= z.left_index(); --j) {
    long f = z.interval_factor(j);
    LeapfrogResult r = leapfrog_n(model, mass, left,
                                  z.step / static_cast<double>(f), f);
    if (!r.finite) {
      throw std::runtime_error("replay_orbit_endpoints: non-finite trajectory");
    }
    left = std::move(r.z);
  }
  left.rho = -left.rho;
  return {left, right};
}

}  // namespace walnuts
