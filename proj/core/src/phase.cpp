#include "walnuts/phase.hpp"

#include <stdexcept>

namespace walnuts {

MassMatrix MassMatrix::identity(int dim) {
  return MassMatrix(Kind::Identity, dim);
}

MassMatrix MassMatrix::diagonal(Vector diag) {
  if ((diag.array() <= 0).any()) {
    throw std::invalid_argument("mass matrix diagonal must be positive");
  }
  MassMatrix m(Kind::Diagonal, static_cast<int>(diag.size()));
  m.diag_ = std::move(diag);
  m.inv_diag_ = m.diag_.cwiseInverse();
  m.sqrt_diag_ = m.diag_.cwiseSqrt();
  return m;
}

MassMatrix MassMatrix::dense(Matrix mat) {
  if (mat.rows() != mat.cols()) {
    throw std::invalid_argument("mass matrix must be square");
  }
  if (!mat.isApprox(mat.transpose(), 1e-12)) {
    throw std::invalid_argument("mass matrix must be symmetric");
  }
  MassMatrix m(Kind::Dense, static_cast<int>(mat.rows()));
  m.dense_ = std::move(mat);
  m.llt_.compute(m.dense_);
  if (m.llt_.info() != Eigen::Success) {
    throw std::invalid_argument("mass matrix must be positive definite");
  }
  return m;
}

Vector MassMatrix::apply_inverse(const Vector& v) const {
  switch (kind_) {
    case Kind::Identity:
      return v;
    case Kind::Diagonal:
      return v.cwiseProduct(inv_diag_);
    case Kind::Dense:
      return llt_.solve(v);
  }
  return v;
}

double MassMatrix::quad_inverse(const Vector& v) const {
  switch (kind_) {
    case Kind::Identity:
      return v.squaredNorm();
    case Kind::Diagonal:
      return v.cwiseProduct(inv_diag_).dot(v);
    case Kind::Dense:
      return llt_.solve(v).dot(v);
  }
  return 0;
}

Vector MassMatrix::sample_momentum(Rng& rng) const {
  Vector z(dim_);
  for (int i = 0; i < dim_; ++i) {
    z[i] = rng.normal();
  }
  switch (kind_) {
    case Kind::Identity:
      return z;
    case Kind::Diagonal:
      return z.cwiseProduct(sqrt_diag_);
    case Kind::Dense:
      return llt_.matrixL() * z;
  }
  return z;
}

double hamiltonian(const Model& model, const MassMatrix& mass,
                   const PhasePoint& z) {
  if (z.theta.size() != mass.dim() || z.rho.size() != mass.dim()) {
    throw std::invalid_argument("hamiltonian: dimension mismatch");
  }
  return -model.log_density(z.theta) + 0.5 * mass.quad_inverse(z.rho);
}

double kinetic_energy(const MassMatrix& mass, const Vector& rho) {
  return 0.5 * mass.quad_inverse(rho);
}

PhasePoint momentum_flip(PhasePoint z) {
  z.rho = -z.rho;
  return z;
}

}  // namespace walnuts
