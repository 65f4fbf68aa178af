#include "qpstab/liapunov.hpp"

#include <cmath>
#include <sstream>

#include "qpstab/errors.hpp"

namespace qpstab {

namespace detail {

double expm1_minus_linear(double d) {
  // Below the crossover the two leading series terms carry the full double
  // precision of the result; above it expm1 is accurate and the subtraction
  // of d no longer cancels catastrophically.
  constexpr double crossover = 1e-4;
  if (std::abs(d) < crossover) {
    return d * d * (0.5 + d / 6.0);
  }
  return std::expm1(d) - d;
}

}  // namespace detail

namespace {

void check_scaling(const QPSystem& sys, const DiagonalScaling& scaling) {
  if (scaling.c.size() != static_cast<Eigen::Index>(sys.m())) {
    std::ostringstream os;
    os << "scaling has " << scaling.c.size() << " entries, expected m = " << sys.m();
    throw DimensionMismatch(os.str());
  }
  for (Eigen::Index i = 0; i < scaling.c.size(); ++i) {
    if (!std::isfinite(scaling.c[i]) || scaling.c[i] <= 0.0) {
      throw ValidationError("scaling entry c[" + std::to_string(i) +
                            "] must be positive and finite");
    }
  }
}

void gate_equilibrium(const QPSystem& sys, const StateVector& xstar, double residual_tol) {
  const double tol = residual_tol < 0.0 ? sys.equilibrium_gate_tolerance() : residual_tol;
  const double res = sys.equilibrium_residual(xstar);
  if (!(res <= tol)) {
    std::ostringstream os;
    os << "xstar is not an equilibrium: residual " << res << " exceeds gate " << tol;
    throw NotAnEquilibrium(os.str());
  }
}

}  // namespace

double evaluate_W(const QPSystem& sys, const DiagonalScaling& scaling, const StateVector& xstar,
                  const StateVector& x) {
  check_scaling(sys, scaling);
  const Eigen::VectorXd d = sys.B() * (x.log() - xstar.log());
  const Eigen::VectorXd phistar = sys.quasimonomials(xstar).values();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    sum += scaling.c[i] * phistar[i] * detail::expm1_minus_linear(d[i]);
  }
  return sum;
}

double evaluate_Wdot(const QPSystem& sys, const DiagonalScaling& scaling, const StateVector& xstar,
                     const StateVector& x, double residual_tol) {
  check_scaling(sys, scaling);
  gate_equilibrium(sys, xstar, residual_tol);
  const Eigen::MatrixXd M = symmetrized_form(sys.interaction_matrix(), scaling);
  const Eigen::VectorXd dphi = sys.quasimonomials(x).values() - sys.quasimonomials(xstar).values();
  return 0.5 * dphi.dot(M * dphi);
}

Eigen::VectorXd gradient_W(const QPSystem& sys, const DiagonalScaling& scaling,
                           const StateVector& xstar, const StateVector& x) {
  check_scaling(sys, scaling);
  const Eigen::VectorXd dphi = sys.quasimonomials(x).values() - sys.quasimonomials(xstar).values();
  const Eigen::VectorXd weighted = scaling.c.cwiseProduct(dphi);
  return (sys.B().transpose() * weighted).cwiseQuotient(x.values());
}

double chain_rule_Wdot(const QPSystem& sys, const DiagonalScaling& scaling,
                       const StateVector& xstar, const StateVector& x, double residual_tol) {
  gate_equilibrium(sys, xstar, residual_tol);
  return gradient_W(sys, scaling, xstar, x).dot(sys.vector_field(x));
}

double positivity_oracle(const QPSystem& sys, const DiagonalScaling& scaling,
                         const StateVector& xstar, const StateVector& x) {
  check_scaling(sys, scaling);
  const ExtendedExponentMatrix ext = sys.extend_exponent_matrix();
  const std::size_t m = sys.m();

  // Embed the n-dimensional states into the m-dimensional space where the
  // extended exponent matrix acts: the added coordinates sit at 1, so their
  // logs vanish and only the original columns of Btilde contribute.
  Eigen::VectorXd zlog = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  Eigen::VectorXd zstarlog = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  zlog.head(x.log().size()) = x.log();
  zstarlog.head(xstar.log().size()) = xstar.log();

  const Eigen::VectorXd d = ext.Btilde * (zlog - zstarlog);
  const Eigen::VectorXd phistar = (ext.Btilde * zstarlog).array().exp();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    sum += scaling.c[i] * phistar[i] * detail::expm1_minus_linear(d[i]);
  }
  return sum;
}

LiapunovEvaluation evaluate_liapunov(const QPSystem& sys, const DiagonalScaling& scaling,
                                     const StateVector& xstar, const StateVector& x,
                                     double residual_tol) {
  LiapunovEvaluation out;
  out.W = evaluate_W(sys, scaling, xstar, x);
  out.Wdot = evaluate_Wdot(sys, scaling, xstar, x, residual_tol);
  out.gradW = gradient_W(sys, scaling, xstar, x);
  return out;
}

}  // namespace qpstab
