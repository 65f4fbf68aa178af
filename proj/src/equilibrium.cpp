#include "qpstab/equilibrium.hpp"

#include <Eigen/LU>

#include <cmath>
#include <random>
#include <sstream>

namespace qpstab {

double residual(const QPSystem& sys, const StateVector& x) {
  return sys.equilibrium_residual(x);
}

namespace {

struct NewtonOutcome {
  bool converged = false;
  bool singular = false;
  Eigen::VectorXd u;
  double residual_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// Newton on r(u) = lambda + A * exp(B u) with J(u) = A * diag(phi) * B.
NewtonOutcome newton_from(const QPSystem& sys, Eigen::VectorXd u, const EquilibriumConfig& cfg,
                          double residual_tol) {
  NewtonOutcome out;
  const Eigen::MatrixXd& A = sys.A();
  const Eigen::MatrixXd& B = sys.B();
  const Eigen::VectorXd& lambda = sys.lambda();

  auto eval_residual = [&](const Eigen::VectorXd& uu, Eigen::VectorXd& phi) -> Eigen::VectorXd {
    phi = (B * uu).array().exp();
    return lambda + A * phi;
  };

  Eigen::VectorXd phi;
  Eigen::VectorXd r = eval_residual(u, phi);
  if (!r.allFinite()) return out;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    out.iterations = it + 1;
    const double rnorm = r.lpNorm<Eigen::Infinity>();
    if (rnorm <= residual_tol) {
      // One polishing step: quadratic convergence pushes the root to
      // machine precision once the residual gate is met.
      Eigen::MatrixXd J = A * phi.asDiagonal() * B;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
      if (lu.isInvertible()) {
        Eigen::VectorXd u_polished = u - lu.solve(r);
        Eigen::VectorXd phi_p;
        Eigen::VectorXd r_p = eval_residual(u_polished, phi_p);
        if (r_p.allFinite() && r_p.lpNorm<Eigen::Infinity>() < rnorm) {
          u = u_polished;
          r = r_p;
        }
      }
      out.converged = true;
      out.u = u;
      out.residual_norm = r.lpNorm<Eigen::Infinity>();
      return out;
    }

    Eigen::MatrixXd J = A * phi.asDiagonal() * B;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) {
      out.singular = true;
      return out;
    }
    const Eigen::VectorXd step = lu.solve(-r);
    if (!step.allFinite()) {
      out.singular = true;
      return out;
    }
    u += step;
    if (!u.allFinite()) return out;
    r = eval_residual(u, phi);
    if (!r.allFinite()) return out;
    if (step.lpNorm<Eigen::Infinity>() <= cfg.step_tolerance) break;
  }

  out.u = u;
  out.residual_norm = r.lpNorm<Eigen::Infinity>();
  out.converged = out.residual_norm <= residual_tol;
  return out;
}

}  // namespace

Equilibrium find_equilibrium(const QPSystem& sys, const std::optional<StateVector>& initial_guess,
                             const EquilibriumConfig& config) {
  const int n = sys.n();
  const double residual_tol =
      config.residual_factor * (1.0 + sys.lambda().lpNorm<Eigen::Infinity>());

  std::vector<Eigen::VectorXd> starts;
  if (initial_guess) starts.push_back(initial_guess->log());
  starts.push_back(Eigen::VectorXd::Zero(n));
  std::mt19937 rng(config.seed);
  std::uniform_real_distribution<double> box(-2.0, 2.0);
  for (int s = 0; s < config.max_starts; ++s) {
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) u(i) = box(rng);
    starts.push_back(std::move(u));
  }

  bool all_singular = true;
  double best_residual = std::numeric_limits<double>::infinity();
  for (const auto& u0 : starts) {
    NewtonOutcome out = newton_from(sys, u0, config, residual_tol);
    if (!out.singular) all_singular = false;
    if (out.converged) {
      return Equilibrium{StateVector::from_log(out.u), out.residual_norm, out.iterations, true};
    }
    best_residual = std::min(best_residual, out.residual_norm);
  }

  std::ostringstream os;
  if (all_singular) {
    os << "Newton Jacobian was singular at every start (" << starts.size() << " starts)";
    throw SingularJacobian(os.str());
  }
  os << "no interior equilibrium found after " << starts.size()
     << " starts; best residual " << best_residual;
  throw NoConvergence(os.str());
}

}  // namespace qpstab
