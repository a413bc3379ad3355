#include "walnuts/integrator.hpp"

#include <cmath>
#include <stdexcept>

namespace walnuts {

PhasePoint leapfrog_step(const Model& model, const MassMatrix& mass,
                         const PhasePoint& z, double h) {
  if (h == 0) {
    throw std::invalid_argument("leapfrog_step: h must be nonzero");
  }
  Vector grad(z.theta.size());
  model.grad_log_density(z.theta, grad);
  PhasePoint out;
  Vector rho_half = z.rho + (0.5 * h) * grad;
  out.theta = z.theta + h * mass.apply_inverse(rho_half);
  if (!out.theta.allFinite()) {
    out.rho = rho_half;
    return out;
  }
  model.grad_log_density(out.theta, grad);
  out.rho = rho_half + (0.5 * h) * grad;
  return out;
}

LeapfrogResult leapfrog_n(const Model& model, const MassMatrix& mass,
                          const PhasePoint& z, double h, long steps,
                          const Vector* grad_start) {
  if (steps < 1) {
    throw std::invalid_argument("leapfrog_n: steps must be >= 1");
  }
  LeapfrogResult r;
  Vector grad;
  if (grad_start != nullptr) {
    grad = *grad_start;
  } else {
    grad.resize(z.theta.size());
    model.grad_log_density(z.theta, grad);
    ++r.grads;
  }
  r.H_start = -model.log_density(z.theta) + kinetic_energy(mass, z.rho);
  r.H_min = r.H_max = r.H_start;
  if (!std::isfinite(r.H_start)) {
    r.finite = false;
    return r;
  }

  Vector theta = z.theta;
  Vector rho = z.rho;
  for (long j = 0; j < steps; ++j) {
    Vector rho_half = rho + (0.5 * h) * grad;
    theta += h * mass.apply_inverse(rho_half);
    if (!theta.allFinite()) {
      r.finite = false;
      return r;
    }
    model.grad_log_density(theta, grad);
    ++r.grads;
    rho = rho_half + (0.5 * h) * grad;
    double H = -model.log_density(theta) + kinetic_energy(mass, rho);
    if (!std::isfinite(H)) {
      r.finite = false;
      return r;
    }
    if (H < r.H_min) r.H_min = H;
    if (H > r.H_max) r.H_max = H;
    r.H_end = H;
  }
  r.z = PhasePoint{std::move(theta), std::move(rho)};
  r.grad_end = std::move(grad);
  return r;
}

namespace {

double energy_error(const LeapfrogResult& r, EnergyErrorMode mode) {
  if (mode == EnergyErrorMode::Envelope) {
    return r.H_max - r.H_min;
  }
  return std::abs(r.H_start - r.H_end);
}

}  // namespace

MicroResult micro(const Model& model, const MassMatrix& mass,
                  const PhasePoint& z, double h, double max_error,
                  EnergyErrorMode mode, int min_halvings, int halvings_cap,
                  const Vector* grad_start) {
  if (h <= 0 || max_error <= 0) {
    throw std::invalid_argument("micro: h and max_error must be positive");
  }
  if (min_halvings < 0 || min_halvings > halvings_cap) {
    throw std::invalid_argument("micro: need 0 <= min_halvings <= halvings_cap");
  }
  MicroResult res;
  const bool vacuous = std::isinf(max_error);
  const int last = vacuous ? min_halvings : halvings_cap;
  for (int i = min_halvings; i <= last; ++i) {
    long factor = 1L << i;
    LeapfrogResult r =
        leapfrog_n(model, mass, z, h / static_cast<double>(factor), factor,
                   grad_start);
    res.grads_used += r.grads;
    if (!r.finite) {
      continue;
    }
    double err = energy_error(r, mode);
    if (err < res.best_error) {
      res.best_error = err;
    }
    if (err <= max_error || vacuous) {
      res.factor = factor;
      res.end = std::move(r.z);
      res.grad_end = std::move(r.grad_end);
      res.H_start = r.H_start;
      res.H_end = r.H_end;
      res.H_min = r.H_min;
      res.H_max = r.H_max;
      return res;
    }
  }
  res.divergent = true;
  res.factor = 1L << last;
  return res;
}

MicroDistribution MicroDistribution::deterministic() {
  return MicroDistribution(Kind::Deterministic);
}

MicroDistribution MicroDistribution::randomized_two_point() {
  return MicroDistribution(Kind::RandomizedTwoPoint);
}

MicroDistribution MicroDistribution::custom(std::vector<double> offset_weights) {
  if (offset_weights.empty()) {
    throw std::invalid_argument("custom micro distribution needs weights");
  }
  double total = 0;
  for (double w : offset_weights) {
    if (w < 0) throw std::invalid_argument("micro weights must be nonnegative");
    total += w;
  }
  if (total <= 0) {
    throw std::invalid_argument("micro weights must have positive mass");
  }
  MicroDistribution d(Kind::Custom);
  d.weights_ = std::move(offset_weights);
  for (double& w : d.weights_) w /= total;
  return d;
}

long MicroDistribution::sample(long baseline, Rng& rng) const {
  switch (kind_) {
    case Kind::Deterministic:
      return baseline;
    case Kind::RandomizedTwoPoint:
      return rng.uniform() < 2.0 / 3.0 ? baseline : 2 * baseline;
    case Kind::Custom: {
      double u = rng.uniform();
      double acc = 0;
      for (std::size_t k = 0; k < weights_.size(); ++k) {
        acc += weights_[k];
        if (u < acc) return baseline << k;
      }
      return baseline << (weights_.size() - 1);
    }
  }
  return baseline;
}

double MicroDistribution::pmf(long factor, long baseline) const {
  if (factor < baseline || factor % baseline != 0) return 0;
  long ratio = factor / baseline;
  if ((ratio & (ratio - 1)) != 0) return 0;  // not a power of two
  switch (kind_) {
    case Kind::Deterministic:
      return ratio == 1 ? 1.0 : 0.0;
    case Kind::RandomizedTwoPoint:
      if (ratio == 1) return 2.0 / 3.0;
      if (ratio == 2) return 1.0 / 3.0;
      return 0.0;
    case Kind::Custom: {
      int k = 0;
      while ((1L << k) < ratio) ++k;
      return k < static_cast<int>(weights_.size()) ? weights_[k] : 0.0;
    }
  }
  return 0;
}

double MicroDistribution::log_pmf(long factor, long baseline) const {
  double p = pmf(factor, baseline);
  return p > 0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

}  // namespace walnuts
