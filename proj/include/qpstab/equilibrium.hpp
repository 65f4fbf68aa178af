#ifndef QPSTAB_EQUILIBRIUM_HPP
#define QPSTAB_EQUILIBRIUM_HPP

#include <optional>

#include "qpstab/qp_system.hpp"

namespace qpstab {

/// An interior fixed point with solver diagnostics.
struct Equilibrium {
  StateVector xstar;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct EquilibriumConfig {
  unsigned seed = 0;
  /// Random restarts after the deterministic u = 0 start (and the caller's
  /// guess, when given). Draws are uniform in [-2, 2]^n in log coordinates.
  int max_starts = 20;
  int max_iterations = 100;
  /// Converged when residual <= residual_factor * (1 + |lambda|_inf).
  double residual_factor = 1e-12;
  double step_tolerance = 1e-14;
};

/// Infinity norm of lambda + A * phi(x). Vanishes exactly at interior
/// equilibria because the x_i > 0 factor of the vector field is nonzero
/// inside the orthant.
double residual(const QPSystem& sys, const StateVector& x);

/// Newton iteration for lambda + A * phi(x) = 0 in logarithmic coordinates
/// u = ln x, so every iterate reconstructs to an interior state. Multistart:
/// the caller's guess (if any), then u = 0, then seeded uniform draws. The
/// first start that converges wins, which makes the result deterministic
/// for a fixed seed. Throws NoConvergence when every start is exhausted;
/// throws SingularJacobian only if every start died on a singular Jacobian.
Equilibrium find_equilibrium(const QPSystem& sys,
                             const std::optional<StateVector>& initial_guess = std::nullopt,
                             const EquilibriumConfig& config = {});

}  // namespace qpstab

#endif
