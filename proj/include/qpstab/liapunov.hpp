#ifndef QPSTAB_LIAPUNOV_HPP
#define QPSTAB_LIAPUNOV_HPP

#include "qpstab/certificate.hpp"
#include "qpstab/qp_system.hpp"

namespace qpstab {

/// W, its time derivative and its gradient at one state.
struct LiapunovEvaluation {
  double W = 0.0;
  double Wdot = 0.0;
  Eigen::VectorXd gradW;
};

/// The generalized Liapunov function
///
///   W(x) = sum_i c_i * ( phi_i(x) - phi_i(x*) - phi_i(x*) * ln(phi_i(x)/phi_i(x*)) ).
///
/// Evaluated in log space: with d = B (ln x - ln x*), each term is
/// c_i phi_i(x*) (e^{d_i} - 1 - d_i), which is nonnegative and avoids the
/// cancellation of the raw formula near x*. W(x*) = 0 exactly; W(x) > 0
/// for every other interior x because rank(B) = n forces some d_i != 0.
double evaluate_W(const QPSystem& sys, const DiagonalScaling& scaling, const StateVector& xstar,
                  const StateVector& x);

/// The quadratic form
///
///   Wdot = 1/2 (phi(x) - phi(x*))^T (C Q + Q^T C) (phi(x) - phi(x*)),
///
/// which is the time derivative of W along trajectories. The formula is
/// only valid at fixed points, so xstar is gated on its residual (negative
/// tolerance means the system's default gate). Throws NotAnEquilibrium.
double evaluate_Wdot(const QPSystem& sys, const DiagonalScaling& scaling, const StateVector& xstar,
                     const StateVector& x, double residual_tol = -1.0);

/// dW/dx_j = sum_i c_i B_ij (phi_i(x) - phi_i(x*)) / x_j.
Eigen::VectorXd gradient_W(const QPSystem& sys, const DiagonalScaling& scaling,
                           const StateVector& xstar, const StateVector& x);

/// Wdot computed the long way round, as gradient_W . vector_field. Equals
/// evaluate_Wdot identically at equilibria; kept as an executable
/// cross-check of that algebra. Throws NotAnEquilibrium.
double chain_rule_Wdot(const QPSystem& sys, const DiagonalScaling& scaling,
                       const StateVector& xstar, const StateVector& x,
                       double residual_tol = -1.0);

/// Independent evaluation route for W used as an oracle: completes B to an
/// invertible square matrix, embeds the state as z = (x_1..x_n, 1, .., 1)
/// and evaluates the m-dimensional transformed function at z against
/// z* = (x*_1..x*_n, 1, .., 1). Must equal evaluate_W. Throws
/// ExtensionFailed if the completion fails.
double positivity_oracle(const QPSystem& sys, const DiagonalScaling& scaling,
                         const StateVector& xstar, const StateVector& x);

/// Bundles W, Wdot and the gradient in one call.
LiapunovEvaluation evaluate_liapunov(const QPSystem& sys, const DiagonalScaling& scaling,
                                     const StateVector& xstar, const StateVector& x,
                                     double residual_tol = -1.0);

namespace detail {
/// e^d - 1 - d with a series fallback for small |d|; strictly positive for
/// d != 0, zero at d = 0.
double expm1_minus_linear(double d);
}  // namespace detail

}  // namespace qpstab

#endif
