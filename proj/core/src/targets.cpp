#include "walnuts/targets.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace walnuts {

namespace {

void check_finite(const Vector& theta, const char* who) {
  if (!theta.allFinite()) {
    throw std::domain_error(std::string(who) + ": non-finite input point");
  }
}

}  // namespace

std::vector<std::string> Model::param_names() const {
  std::vector<std::string> names;
  names.reserve(dim());
  for (int i = 0; i < dim(); ++i) {
    names.push_back("theta." + std::to_string(i + 1));
  }
  return names;
}

GaussianModel::GaussianModel(int dim)
    : scales_(Vector::Ones(dim)), standard_(true), name_("std_gaussian") {}

GaussianModel::GaussianModel(Vector scales)
    : scales_(std::move(scales)), standard_(false), name_("gaussian") {
  if ((scales_.array() <= 0).any()) {
    throw std::invalid_argument("gaussian scales must be positive");
  }
}

double GaussianModel::log_density(const Vector& theta) const {
  check_finite(theta, "gaussian log_density");
  if (standard_) {
    return -0.5 * theta.squaredNorm();
  }
  return -0.5 * (theta.array() / scales_.array()).square().sum();
}

void GaussianModel::grad_log_density(const Vector& theta, Vector& grad) const {
  check_finite(theta, "gaussian grad_log_density");
  if (standard_) {
    grad = -theta;
    return;
  }
  grad = -(theta.array() / scales_.array().square()).matrix();
}

FunnelModel::FunnelModel(int d) : d_(d), name_("funnel") {
  if (d < 1) {
    throw std::invalid_argument("funnel needs at least one x coordinate");
  }
}

double FunnelModel::log_density(const Vector& theta) const {
  check_finite(theta, "funnel log_density");
  double omega = theta[0];
  double xsq = theta.tail(d_).squaredNorm();
  return -omega * omega / 18.0 - 0.5 * xsq * std::exp(-omega) -
         0.5 * d_ * omega;
}

void FunnelModel::grad_log_density(const Vector& theta, Vector& grad) const {
  check_finite(theta, "funnel grad_log_density");
  double omega = theta[0];
  double inv_var = std::exp(-omega);
  grad.resize(d_ + 1);
  grad[0] = -omega / 9.0 + 0.5 * theta.tail(d_).squaredNorm() * inv_var -
            0.5 * d_;
  grad.tail(d_) = -theta.tail(d_) * inv_var;
}

std::vector<std::string> FunnelModel::param_names() const {
  std::vector<std::string> names;
  names.reserve(d_ + 1);
  names.push_back("omega");
  for (int i = 0; i < d_; ++i) {
    names.push_back("x." + std::to_string(i + 1));
  }
  return names;
}

Vector FunnelModel::mode() const {
  Vector m = Vector::Zero(d_ + 1);
  m[0] = -4.5 * d_;
  return m;
}

Vector FunnelModel::sample(Rng& rng) const {
  Vector draw(d_ + 1);
  double omega = 3.0 * rng.normal();
  draw[0] = omega;
  double sd = std::exp(0.5 * omega);
  for (int i = 0; i < d_; ++i) {
    draw[1 + i] = sd * rng.normal();
  }
  return draw;
}

std::pair<double, double> funnel_curvature(double omega) {
  double lambda = std::max(1.0 / 9.0, std::exp(-omega));
  double kappa = 9.0 * std::max(std::exp(omega), std::exp(-omega));
  return {lambda, kappa};
}

StockWatsonModel::StockWatsonModel(Vector y, double init_sd)
    : T_(static_cast<int>(y.size())),
      y_(std::move(y)),
      init_sd_(init_sd),
      name_("stock_watson") {
  if (T_ < 2) {
    throw std::invalid_argument("stock_watson needs at least two observations");
  }
  if (init_sd_ <= 0) {
    throw std::invalid_argument("stock_watson init_sd must be positive");
  }
}

StockWatsonModel::Latents StockWatsonModel::to_latents(
    const Vector& params) const {
  if (params.size() != 3 * T_) {
    throw std::invalid_argument("stock_watson parameter vector has wrong size");
  }
  Latents lat;
  lat.log_sigma_sq = params[3 * T_ - 1];
  double sigma = std::exp(0.5 * lat.log_sigma_sq);

  lat.z.resize(T_ - 1);
  lat.z[0] = params[0];
  for (int t = 1; t < T_ - 1; ++t) {
    lat.z[t] = lat.z[t - 1] + sigma * params[t];
  }

  const int xoff = T_ - 1;
  lat.x.resize(T_);
  lat.x[0] = params[xoff];
  for (int t = 1; t < T_; ++t) {
    lat.x[t] = lat.x[t - 1] + sigma * params[xoff + t];
  }

  const int toff = 2 * T_ - 1;
  lat.tau.resize(T_);
  lat.tau[0] = params[toff];
  for (int t = 1; t < T_; ++t) {
    lat.tau[t] = lat.tau[t - 1] + std::exp(0.5 * lat.z[t - 1]) * params[toff + t];
  }
  return lat;
}

Vector StockWatsonModel::from_latents(const Latents& lat) const {
  Vector params(3 * T_);
  double sigma = std::exp(0.5 * lat.log_sigma_sq);
  params[0] = lat.z[0];
  for (int t = 1; t < T_ - 1; ++t) {
    params[t] = (lat.z[t] - lat.z[t - 1]) / sigma;
  }
  const int xoff = T_ - 1;
  params[xoff] = lat.x[0];
  for (int t = 1; t < T_; ++t) {
    params[xoff + t] = (lat.x[t] - lat.x[t - 1]) / sigma;
  }
  const int toff = 2 * T_ - 1;
  params[toff] = lat.tau[0];
  for (int t = 1; t < T_; ++t) {
    params[toff + t] = (lat.tau[t] - lat.tau[t - 1]) * std::exp(-0.5 * lat.z[t - 1]);
  }
  params[3 * T_ - 1] = lat.log_sigma_sq;
  return params;
}

double StockWatsonModel::gamma_prior_term(double precision) {
  return 4.0 * std::log(precision) - 0.5 * precision;
}

// In innovation coordinates the random-walk increments whiten to standard
// normals and their normalization terms cancel exactly against the log
// Jacobian of the transform, leaving the observation likelihood, the
// whitened increments, the initial-state priors, and the prior on
// phi = log sigma^2 (Gamma on the precision plus d(precision)/d(phi)).
double StockWatsonModel::log_density(const Vector& params) const {
  check_finite(params, "stock_watson log_density");
  if (params.size() != 3 * T_) {
    throw std::invalid_argument("stock_watson parameter vector has wrong size");
  }
  Latents lat = to_latents(params);
  double phi = lat.log_sigma_sq;

  double lp = 0;
  for (int t = 1; t < T_ - 1; ++t) lp -= 0.5 * params[t] * params[t];
  const int xoff = T_ - 1;
  for (int t = 1; t < T_; ++t) lp -= 0.5 * params[xoff + t] * params[xoff + t];
  const int toff = 2 * T_ - 1;
  for (int t = 1; t < T_; ++t) lp -= 0.5 * params[toff + t] * params[toff + t];

  double inv_init_var = 1.0 / (init_sd_ * init_sd_);
  lp -= 0.5 * inv_init_var *
        (lat.z[0] * lat.z[0] + lat.x[0] * lat.x[0] + lat.tau[0] * lat.tau[0]);

  for (int t = 0; t < T_; ++t) {
    double e = y_[t] - lat.tau[t];
    lp += -0.5 * e * e * std::exp(-lat.x[t]) - 0.5 * lat.x[t];
  }

  lp += -5.0 * phi - 0.5 * std::exp(-phi);
  return lp;
}

void StockWatsonModel::grad_log_density(const Vector& params,
                                        Vector& grad) const {
  check_finite(params, "stock_watson grad_log_density");
  if (params.size() != 3 * T_) {
    throw std::invalid_argument("stock_watson parameter vector has wrong size");
  }
  Latents lat = to_latents(params);
  double phi = lat.log_sigma_sq;
  double sigma = std::exp(0.5 * phi);
  const int xoff = T_ - 1;
  const int toff = 2 * T_ - 1;
  grad.setZero(3 * T_);

  // Observation terms: A_t = dLP/dtau_t, B_t = dLP/dx_t.
  Vector A(T_), B(T_);
  for (int t = 0; t < T_; ++t) {
    double e = y_[t] - lat.tau[t];
    double w = std::exp(-lat.x[t]);
    A[t] = e * w;
    B[t] = 0.5 * e * e * w - 0.5;
  }

  // Suffix sums over observation indices t..T-1.
  Vector SA(T_ + 1), SB(T_ + 1);
  SA[T_] = SB[T_] = 0;
  for (int t = T_ - 1; t >= 0; --t) {
    SA[t] = SA[t + 1] + A[t];
    SB[t] = SB[t + 1] + B[t];
  }

  // C_m = dLP/dz_m via the tau transform coefficients, m = 1..T-1 (1-based).
  Vector C(T_ - 1);
  for (int m = 0; m < T_ - 1; ++m) {
    C[m] = 0.5 * std::exp(0.5 * lat.z[m]) * params[toff + m + 1] * SA[m + 1];
  }
  Vector SC(T_);
  SC[T_ - 1] = 0;
  for (int m = T_ - 2; m >= 0; --m) {
    SC[m] = SC[m + 1] + C[m];
  }

  double inv_init_var = 1.0 / (init_sd_ * init_sd_);

  grad[0] = -lat.z[0] * inv_init_var + SC[0];
  for (int t = 1; t < T_ - 1; ++t) {
    grad[t] = -params[t] + sigma * SC[t];
  }

  grad[xoff] = -lat.x[0] * inv_init_var + SB[0];
  for (int t = 1; t < T_; ++t) {
    grad[xoff + t] = -params[xoff + t] + sigma * SB[t];
  }

  grad[toff] = -lat.tau[0] * inv_init_var + SA[0];
  for (int t = 1; t < T_; ++t) {
    grad[toff + t] = -params[toff + t] + std::exp(0.5 * lat.z[t - 1]) * SA[t];
  }

  double gphi = -5.0 + 0.5 * std::exp(-phi);
  for (int m = 0; m < T_ - 1; ++m) {
    gphi += 0.5 * C[m] * (lat.z[m] - lat.z[0]);
  }
  for (int t = 0; t < T_; ++t) {
    gphi += 0.5 * B[t] * (lat.x[t] - lat.x[0]);
  }
  grad[3 * T_ - 1] = gphi;
}

std::vector<std::string> StockWatsonModel::param_names() const {
  std::vector<std::string> names;
  names.reserve(3 * T_);
  for (int t = 1; t <= T_ - 1; ++t) names.push_back("zeta_z." + std::to_string(t));
  for (int t = 1; t <= T_; ++t) names.push_back("zeta_x." + std::to_string(t));
  for (int t = 1; t <= T_; ++t) names.push_back("zeta_tau." + std::to_string(t));
  names.push_back("log_sigma_sq");
  return names;
}

StockWatsonDraw stock_watson_simulate(int T, double sigma, std::uint64_t seed,
                                      double init_sd) {
  if (T < 2) {
    throw std::invalid_argument("stock_watson_simulate needs T >= 2");
  }
  if (sigma < 0) {
    throw std::invalid_argument("stock_watson_simulate needs sigma >= 0");
  }
  Rng rng(seed);
  StockWatsonDraw draw;
  auto& lat = draw.latents;
  lat.log_sigma_sq = 2.0 * std::log(std::max(sigma, 1e-300));

  lat.z.resize(T - 1);
  lat.z[0] = init_sd * rng.normal();
  for (int t = 1; t < T - 1; ++t) {
    lat.z[t] = lat.z[t - 1] + sigma * rng.normal();
  }
  lat.x.resize(T);
  lat.x[0] = init_sd * rng.normal();
  for (int t = 1; t < T; ++t) {
    lat.x[t] = lat.x[t - 1] + sigma * rng.normal();
  }
  lat.tau.resize(T);
  lat.tau[0] = init_sd * rng.normal();
  for (int t = 1; t < T; ++t) {
    lat.tau[t] = lat.tau[t - 1] + std::exp(0.5 * lat.z[t - 1]) * rng.normal();
  }
  draw.y.resize(T);
  for (int t = 0; t < T; ++t) {
    draw.y[t] = lat.tau[t] + std::exp(0.5 * lat.x[t]) * rng.normal();
  }
  return draw;
}

Vector read_csv_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open data file: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty data file: " + path);
  }
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
    line.pop_back();
  }
  if (line != "y") {
    throw std::runtime_error("expected header 'y' in " + path);
  }
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    vals.push_back(std::stod(line));
  }
  Vector y(static_cast<Eigen::Index>(vals.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = vals[i];
  return y;
}

}  // namespace walnuts
