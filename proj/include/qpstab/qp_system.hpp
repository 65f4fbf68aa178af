#ifndef QPSTAB_QP_SYSTEM_HPP
#define QPSTAB_QP_SYSTEM_HPP

#include <Eigen/Dense>

#include "qpstab/errors.hpp"

namespace qpstab {

/// A point in the interior of the positive orthant. Construction rejects
/// non-finite or non-positive entries, so holding a StateVector is proof
/// of interiority.
class StateVector {
public:
  explicit StateVector(Eigen::VectorXd x);

  /// Reconstructs x = exp(u) from logarithmic coordinates; the result is
  /// interior for every finite u.
  static StateVector from_log(const Eigen::VectorXd& u);

  const Eigen::VectorXd& values() const { return x_; }
  Eigen::VectorXd log() const { return x_.array().log(); }
  Eigen::Index size() const { return x_.size(); }
  double operator[](Eigen::Index i) const { return x_(i); }

private:
  Eigen::VectorXd x_;
};

/// The vector of quasimonomial values phi_i(x) = prod_j x_j^{B_ij},
/// strictly positive when produced from an interior state.
class QuasimonomialVector {
public:
  explicit QuasimonomialVector(Eigen::VectorXd phi);

  const Eigen::VectorXd& values() const { return phi_; }
  Eigen::Index size() const { return phi_.size(); }
  double operator[](Eigen::Index i) const { return phi_(i); }

private:
  Eigen::VectorXd phi_;
};

/// Square invertible completion of the exponent matrix: the first
/// `original_columns` columns equal B of the source system, the remaining
/// columns are filler chosen so the whole matrix is well conditioned.
struct ExtendedExponentMatrix {
  Eigen::MatrixXd Btilde;
  int original_columns = 0;
};

/// Quasipolynomial system
///
///   dx_i/dt = x_i * ( lambda_i + sum_j A_ij * prod_k x_k^{B_jk} )
///
/// with n states and m quasimonomials, m >= n and rank(B) = n. Immutable
/// after construction; all member operations are pure, so concurrent reads
/// are safe.
class QPSystem {
public:
  /// Validates dimensions, finiteness and the rank of B.
  /// Throws DimensionMismatch, NonFiniteEntry or RankDeficientB.
  QPSystem(Eigen::VectorXd lambda, Eigen::MatrixXd A, Eigen::MatrixXd B);

  /// Lotka-Volterra embedding: m = n and B is the identity.
  static QPSystem from_lotka_volterra(Eigen::VectorXd lambda, Eigen::MatrixXd A);

  int n() const { return static_cast<int>(lambda_.size()); }
  int m() const { return static_cast<int>(A_.cols()); }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }

  /// Ratio sigma_min/sigma_max of B, recorded at validation time.
  double exponent_condition() const { return sigma_ratio_; }

  /// phi_i(x) = prod_j x_j^{B_ij}, evaluated as exp(B * ln x) so large or
  /// negative exponents neither overflow prematurely nor leave the
  /// positive reals.
  QuasimonomialVector quasimonomials(const StateVector& x) const;

  /// The m x m interaction matrix Q = B * A.
  Eigen::MatrixXd interaction_matrix() const;

  /// Right-hand side of the ODE at an interior state.
  Eigen::VectorXd vector_field(const StateVector& x) const;

  /// Right-hand side in shifted form, dx_i/dt = x_i * sum_j A_ij *
  /// (phi_j(x) - phi_j(xstar)); identical to vector_field when xstar is an
  /// equilibrium. Throws NotAnEquilibrium if the residual at xstar exceeds
  /// `residual_tol` (negative means the default gate, see
  /// equilibrium_gate_tolerance).
  Eigen::VectorXd shifted_vector_field(const StateVector& x, const StateVector& xstar,
                                       double residual_tol = -1.0) const;

  /// d phi_i / d x_j = B_ij * phi_i(x) / x_j, as an m x n matrix.
  Eigen::MatrixXd quasimonomial_jacobian(const StateVector& x) const;

  /// Completes B to an invertible m x m matrix (B | B*). Standard basis
  /// columns are tried first; seeded random unit columns are the fallback.
  /// When m = n the result is B itself. Throws ExtensionFailed if no
  /// completion meets the conditioning bound.
  ExtendedExponentMatrix extend_exponent_matrix(unsigned fallback_seed = 0x5eedcab5u) const;

  /// Infinity norm of lambda + A * phi(x); zero exactly at interior
  /// equilibria.
  double equilibrium_residual(const StateVector& x) const;

  /// Default residual gate used when an operation requires xstar to be an
  /// equilibrium: 1e-9 * (1 + |lambda|_inf).
  double equilibrium_gate_tolerance() const;

  /// Rank and invertibility threshold: sigma_min <= kRankTolerance * sigma_max
  /// counts as rank deficient.
  static constexpr double kRankTolerance = 1e-10;

private:
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd A_;  // n x m
  Eigen::MatrixXd B_;  // m x n
  double sigma_ratio_ = 0.0;
};

}  // namespace qpstab

#endif
