#include "walnuts/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace walnuts {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

int log2_exact(long n) {
  int k = 0;
  while ((1L << k) < n) ++k;
  return k;
}
}  // namespace

Orbit Orbit::singleton(PhasePoint z, double log_weight) {
  Orbit o;
  o.a = 0;
  o.b = 0;
  o.states.push_back(std::move(z));
  o.log_weights.push_back(log_weight);
  o.creation_factors.push_back(0);
  return o;
}

Orbit concat(const Orbit& left, const Orbit& right) {
  if (left.b + 1 != right.a) {
    throw std::invalid_argument("concat: orbit index ranges must be adjacent");
  }
  Orbit out;
  out.a = left.a;
  out.b = right.b;
  out.states = left.states;
  out.states.insert(out.states.end(), right.states.begin(), right.states.end());
  out.log_weights = left.log_weights;
  out.log_weights.insert(out.log_weights.end(), right.log_weights.begin(),
                         right.log_weights.end());
  out.creation_factors = left.creation_factors;
  out.creation_factors.insert(out.creation_factors.end(),
                              right.creation_factors.begin(),
                              right.creation_factors.end());
  return out;
}

bool u_turn_pair(const PhasePoint& left, const PhasePoint& right,
                 const MassMatrix& mass) {
  Vector scaled = mass.apply_inverse(right.theta - left.theta);
  return left.rho.dot(scaled) < 0 || right.rho.dot(scaled) < 0;
}

bool u_turn(const Orbit& orbit, const MassMatrix& mass) {
  if (orbit.length() < 1) {
    throw std::invalid_argument("u_turn: empty orbit");
  }
  return u_turn_pair(orbit.states.front(), orbit.states.back(), mass);
}

namespace {
bool sub_u_turn_range(const Orbit& orbit, long lo, long hi,
                      const MassMatrix& mass) {
  if (hi - lo + 1 < 2) return false;
  if (u_turn_pair(orbit.state(lo), orbit.state(hi), mass)) return true;
  long mid = lo + (hi - lo) / 2;
  return sub_u_turn_range(orbit, lo, mid, mass) ||
         sub_u_turn_range(orbit, mid + 1, hi, mass);
}
}  // namespace

bool sub_u_turn(const Orbit& orbit, const MassMatrix& mass) {
  if (!power_of_two(orbit.length())) {
    throw std::invalid_argument("sub_u_turn: orbit length must be a power of two");
  }
  return sub_u_turn_range(orbit, orbit.a, orbit.b, mass);
}

void SubUturnScanner::begin(long length) {
  if (!power_of_two(length)) {
    throw std::invalid_argument("scanner: extension length must be a power of two");
  }
  length_ = length;
  depth_ = log2_exact(length);
  next_pos_ = 0;
  slots_.assign(static_cast<std::size_t>(depth_ + 1), Checkpoint{});
  peak_retained_ = 0;
}

bool SubUturnScanner::push(const Vector& theta, const Vector& rho_gen,
                           const MassMatrix& mass) {
  long p = next_pos_++;
  if (p >= length_) {
    throw std::logic_error("scanner: pushed past extension length");
  }
  auto slot_of = [&](long pos) {
    if (pos == 0) return depth_;
    int tz = 0;
    while (((pos >> tz) & 1) == 0) ++tz;
    return std::min(tz, depth_);
  };
  if (p % 2 == 0) {
    // block start; retain until its checks complete
    auto& cp = slots_[static_cast<std::size_t>(slot_of(p))];
    cp.pos = p;
    cp.theta = theta;
    cp.rho = rho_gen;
    int live = 0;
    for (const auto& s : slots_) live += s.pos >= 0 ? 1 : 0;
    peak_retained_ = std::max(peak_retained_, live);
    return false;
  }
  bool found = false;
  for (int j = 1; j <= depth_ && !found; ++j) {
    long block = 1L << j;
    if ((p + 1) % block != 0) break;  // larger blocks cannot complete here
    long s0 = p + 1 - block;
    const auto& cp = slots_[static_cast<std::size_t>(slot_of(s0))];
    if (cp.pos != s0) {
      throw std::logic_error("scanner: checkpoint evicted before use");
    }
    if (log_ != nullptr) {
      log_->emplace_back(s0 + 1, p + 1);
    }
    PhasePoint first{cp.theta, cp.rho};
    PhasePoint last{theta, rho_gen};
    found = u_turn_pair(first, last, mass);
  }
  return found;
}

void ReservoirSampler::reset() {
  count_ = 0;
  index_ = 0;
  total_ = kNegInf;
  state_ = PhasePoint{};
}

void ReservoirSampler::offer(double log_weight, long index, const PhasePoint& z,
                             Rng& rng) {
  if (count_ == 0) {
    count_ = 1;
    index_ = index;
    state_ = z;
    total_ = log_weight;
    return;
  }
  ++count_;
  total_ = log_add_exp(total_, log_weight);
  double u = rng.uniform();
  double p = log_weight == kNegInf ? 0.0 : std::exp(log_weight - total_);
  if (u < p) {
    index_ = index;
    state_ = z;
  }
}

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b);
  double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace walnuts
