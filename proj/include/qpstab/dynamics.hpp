#ifndef QPSTAB_DYNAMICS_HPP
#define QPSTAB_DYNAMICS_HPP

#include <vector>

#include "qpstab/certificate.hpp"
#include "qpstab/errors.hpp"
#include "qpstab/qp_system.hpp"

namespace qpstab {

/// A trajectory sampled on a uniform time grid. The Liapunov columns are
/// empty until annotate_liapunov fills them.
struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<double> W_samples;
  std::vector<double> Wdot_samples;
  long accepted_steps = 0;
  long rejected_steps = 0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  bool annotated() const { return W_samples.size() == times.size() && !times.empty(); }
};

struct IntegrationConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  /// Number of uniform sample intervals; the record holds samples + 1 rows
  /// including both endpoints.
  int samples = 256;
  long max_steps = 2'000'000;
  /// 0 selects the step automatically from the initial derivative.
  double initial_step = 0.0;
};

/// The step controller drove h below the representable minimum
/// (stiffness or finite-time blowup). Carries whatever was integrated
/// before the failure.
class StepSizeUnderflow : public NumericalError {
public:
  StepSizeUnderflow(const std::string& what, TrajectoryRecord partial)
      : NumericalError(what), partial(std::move(partial)) {}
  TrajectoryRecord partial;
};

/// Integrates dx_i/dt = x_i (lambda_i + sum_j A_ij phi_j(x)) from x0 to
/// t_final with an embedded Dormand-Prince 5(4) pair applied in log
/// coordinates u = ln x, where the right-hand side is
/// u'_i = lambda_i + sum_j A_ij exp((B u)_j). States are reconstructed as
/// exp(u), so every sample is interior by construction. Local error is
/// controlled per component of u against abs_tol + rel_tol * |u_i|.
/// Sampling between accepted steps uses the pair's fourth-order continuous
/// extension in u, keeping interpolation error at the order of the
/// integration error. Throws StepSizeUnderflow (with the partial record)
/// and NonFiniteState.
TrajectoryRecord integrate(const QPSystem& sys, const StateVector& x0, double t_final,
                           const IntegrationConfig& config = {});

/// Fills W_samples and Wdot_samples of the record for the given
/// certificate scaling. Idempotent.
void annotate_liapunov(const QPSystem& sys, const DiagonalScaling& scaling,
                       const StateVector& xstar, TrajectoryRecord& record);

/// Result of checking that W decreases monotonically along one trajectory.
struct MonotonicityReport {
  bool passed = false;
  /// W may rise by at most this much between consecutive samples before it
  /// counts as a violation.
  double slack = 0.0;
  /// Largest observed increase W[k+1] - W[k]; negative when W is strictly
  /// decreasing throughout.
  double max_increase = 0.0;
  /// First sample index k with W[k+1] > W[k] + slack, or -1.
  long first_violation = -1;
  /// Terminal-approach check, active only for negative definite
  /// certificates.
  bool terminal_checked = false;
  double terminal_distance = 0.0;
  double terminal_tolerance = 0.0;
  bool terminal_ok = true;
};

/// Checks W non-increasing along the record within slack
/// max(1e-10, 1e-9 * W(0)); for NegativeDefinite certificates additionally
/// requires |x(t_final) - x*|_inf < terminal_tolerance. Annotates the
/// record if needed. Violations are report content, not errors.
MonotonicityReport monitor_liapunov(const QPSystem& sys, const StabilityCertificate& cert,
                                    const StateVector& xstar, TrajectoryRecord& record,
                                    double terminal_tolerance = 1e-6);

struct ConservationReport {
  bool passed = false;
  /// max_t |W(t) - W(0)| / max(1, W(0)).
  double max_relative_drift = 0.0;
  double threshold = 0.0;
};

/// For the conservative case M = C Q + Q^T C = 0, W is a first integral
/// and trajectories stay on its level surfaces; reports the worst relative
/// drift of W over the record against `threshold` (default 1e-8). Throws
/// HypothesisNotMet unless ||M||_F is zero within the semidefinite
/// threshold. Annotates the record if needed.
ConservationReport conservation_check(const QPSystem& sys, const DiagonalScaling& scaling,
                                      const StateVector& xstar, TrajectoryRecord& record,
                                      double threshold = 1e-8,
                                      const CertificateThresholds& thresholds = {});

}  // namespace qpstab

#endif
