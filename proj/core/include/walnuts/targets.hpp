#ifndef WALNUTS_TARGETS_HPP
#define WALNUTS_TARGETS_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "walnuts/rng.hpp"

namespace walnuts {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Unnormalized target density with hand-coded gradient.  Evaluation is pure
/// and safe to call from multiple threads.
class Model {
 public:
  virtual ~Model() = default;

  virtual int dim() const = 0;
  virtual const std::string& name() const = 0;

  /// log density up to an additive constant; throws std::domain_error on
  /// non-finite input.
  virtual double log_density(const Vector& theta) const = 0;

  /// gradient of log_density; same domain contract.
  virtual void grad_log_density(const Vector& theta, Vector& grad) const = 0;

  /// One name per coordinate, used as draws.csv column headers.
  virtual std::vector<std::string> param_names() const;
};

/// Wraps a model with an atomic gradient-evaluation counter so every sampler
/// reports comparable cost.
class CountedModel final : public Model {
 public:
  explicit CountedModel(const Model& inner) : inner_(inner) {}

  int dim() const override { return inner_.dim(); }
  const std::string& name() const override { return inner_.name(); }
  double log_density(const Vector& theta) const override {
    return inner_.log_density(theta);
  }
  void grad_log_density(const Vector& theta, Vector& grad) const override {
    grads_.fetch_add(1, std::memory_order_relaxed);
    inner_.grad_log_density(theta, grad);
  }
  std::vector<std::string> param_names() const override {
    return inner_.param_names();
  }

  std::int64_t grad_evals() const {
    return grads_.load(std::memory_order_relaxed);
  }
  void reset_grad_evals() { grads_.store(0, std::memory_order_relaxed); }

 private:
  const Model& inner_;
  mutable std::atomic<std::int64_t> grads_{0};
};

/// N(0, diag(scale^2)); identity scales give the standard Gaussian.
class GaussianModel final : public Model {
 public:
  explicit GaussianModel(int dim);
  explicit GaussianModel(Vector scales);

  int dim() const override { return static_cast<int>(scales_.size()); }
  const std::string& name() const override { return name_; }
  double log_density(const Vector& theta) const override;
  void grad_log_density(const Vector& theta, Vector& grad) const override;

  bool standard() const { return standard_; }
  const Vector& scales() const { return scales_; }

 private:
  Vector scales_;
  bool standard_;
  std::string name_;
};

/// Funnel over (omega, x_1..x_d): omega ~ N(0, 9), x_i | omega ~ N(0, e^omega).
class FunnelModel final : public Model {
 public:
  explicit FunnelModel(int d);

  int dim() const override { return d_ + 1; }
  const std::string& name() const override { return name_; }
  double log_density(const Vector& theta) const override;
  void grad_log_density(const Vector& theta, Vector& grad) const override;
  std::vector<std::string> param_names() const override;

  int x_dim() const { return d_; }
  /// Minimizer of the potential: (omega, x) = (-9d/2, 0).
  Vector mode() const;
  /// Exact generative draw, used by tests and validation suites.
  Vector sample(Rng& rng) const;

 private:
  int d_;
  std::string name_;
};

/// Hessian spectral radius and condition number along the funnel axis.
std::pair<double, double> funnel_curvature(double omega);

/// Stock-Watson inflation model in the innovations parameterization.
///
/// Observations y_t, t = 1..T, with latent random walks
///   z_t | z_{t-1}     ~ N(z_{t-1}, sigma^2),      t = 2..T-1
///   x_t | x_{t-1}     ~ N(x_{t-1}, sigma^2),      t = 2..T
///   tau_t | tau_{t-1} ~ N(tau_{t-1}, e^{z_{t-1}}), t = 2..T
///   y_t | tau_t, x_t  ~ N(tau_t, e^{x_t})
/// and prior 1/sigma^2 ~ Gamma(shape 5, rate 0.5).
///
/// The parameter vector stacks the innovations
///   [z_1, (z_2-z_1)/sigma, ..., (z_{T-1}-z_{T-2})/sigma]          (T-1)
///   [x_1, (x_2-x_1)/sigma, ..., (x_T-x_{T-1})/sigma]              (T)
///   [tau_1, (tau_2-tau_1)e^{-z_1/2}, ..., (tau_T-tau_{T-1})e^{-z_{T-1}/2}] (T)
///   [log sigma^2]                                                  (1)
/// for a total of 3T coordinates.  The log posterior includes the log
/// Jacobian of this triangular transform.  Initial states z_1, x_1, tau_1
/// carry diffuse N(0, init_sd^2) priors (default init_sd = 10).
class StockWatsonModel final : public Model {
 public:
  explicit StockWatsonModel(Vector y, double init_sd = 10.0);

  int dim() const override { return 3 * T_; }
  const std::string& name() const override { return name_; }
  double log_density(const Vector& params) const override;
  void grad_log_density(const Vector& params, Vector& grad) const override;
  std::vector<std::string> param_names() const override;

  int num_obs() const { return T_; }
  const Vector& data() const { return y_; }

  struct Latents {
    Vector z;    // length T-1
    Vector x;    // length T
    Vector tau;  // length T
    double log_sigma_sq = 0;
  };

  Latents to_latents(const Vector& params) const;
  Vector from_latents(const Latents& lat) const;

  /// Gamma(5, rate 1/2) log density term in the precision u = 1/sigma^2,
  /// without normalization: 4 log(u) - u/2.
  static double gamma_prior_term(double precision);

 private:
  int T_;
  Vector y_;
  double init_sd_;
  std::string name_;
};

struct StockWatsonDraw {
  Vector y;
  StockWatsonModel::Latents latents;
};

/// Forward simulation of the Stock-Watson generative model.  Initial states
/// are drawn N(0, init_sd^2); deterministic given the seed.
StockWatsonDraw stock_watson_simulate(int T, double sigma, std::uint64_t seed,
                                      double init_sd = 1.0);

/// Reads a one-column CSV with header "y", one observation per row.
Vector read_csv_column(const std::string& path);

}  // namespace walnuts

#endif
