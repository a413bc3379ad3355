#ifndef WALNUTS_ORACLES_HPP
#define WALNUTS_ORACLES_HPP

#include <functional>

#include "walnuts/orbit.hpp"
#include "walnuts/phase.hpp"
#include "walnuts/targets.hpp"

namespace walnuts {

/// Analytic Hamiltonian flow for a Gaussian target with diagonal precision
/// and identity or diagonal mass matrix: each coordinate is an independent
/// harmonic oscillator.  Conserves the Hamiltonian exactly.
PhasePoint exact_gaussian_flow(const Vector& precision_diag,
                               const MassMatrix& mass, const PhasePoint& z,
                               double t);

/// Central-difference Jacobian determinant of a phase-space map, for
/// volume-preservation checks in low dimension.
double numerical_jacobian_det(
    const std::function<Vector(const Vector&)>& map, const Vector& z,
    double eps);

/// Enumerates every aligned power-of-two sub-orbit and applies the U-turn
/// condition; independent of the recursive implementation.
bool brute_force_sub_uturn(const Orbit& orbit, const MassMatrix& mass);

/// Central finite differences of the log density.
Vector finite_diff_grad(const Model& model, const Vector& theta, double eps);

/// Largest relative disagreement between the analytic gradient and central
/// finite differences, maxed over coordinates.
double grad_vs_finite_diff(const Model& model, const Vector& theta, double eps);

}  // namespace walnuts

#endif
