#ifndef WALNUTS_PHASE_HPP
#define WALNUTS_PHASE_HPP

#include <Eigen/Dense>

#include "walnuts/rng.hpp"
#include "walnuts/targets.hpp"

namespace walnuts {

struct PhasePoint {
  Vector theta;
  Vector rho;
};

/// Symmetric positive-definite mass matrix.  Identity and diagonal kinds
/// bypass linear algebra; the dense kind precomputes a Cholesky factor used
/// both for momentum sampling and inverse application.  Immutable after
/// construction and safe to share across chains.
class MassMatrix {
 public:
  enum class Kind { Identity, Diagonal, Dense };

  static MassMatrix identity(int dim);
  static MassMatrix diagonal(Vector diag);
  static MassMatrix dense(Matrix m);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }

  /// M^{-1} v
  Vector apply_inverse(const Vector& v) const;
  /// v' M^{-1} v
  double quad_inverse(const Vector& v) const;
  /// rho ~ N(0, M); consumes dim() normal draws.
  Vector sample_momentum(Rng& rng) const;

  const Vector& diagonal_entries() const { return diag_; }
  const Matrix& matrix() const { return dense_; }

 private:
  MassMatrix(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  int dim_;
  Vector diag_;          // diagonal kind
  Vector inv_diag_;
  Vector sqrt_diag_;
  Matrix dense_;         // dense kind
  Eigen::LLT<Matrix> llt_;
};

/// H(theta, rho) = -log mu(theta) + rho' M^{-1} rho / 2
double hamiltonian(const Model& model, const MassMatrix& mass,
                   const PhasePoint& z);

/// Kinetic part only.
double kinetic_energy(const MassMatrix& mass, const Vector& rho);

PhasePoint momentum_flip(PhasePoint z);

}  // namespace walnuts

#endif
