#include "qpstab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qpstab/liapunov.hpp"

namespace qpstab {

namespace {

// Dormand-Prince 5(4) tableau. The last stage row doubles as the 5th-order
// weights, so k7 = f(u_new) and the first-same-as-last property holds.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b_i - bhat_i, the weights of the embedded error estimate.
constexpr double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695, e4 = b4 - 393.0 / 640,
                 e5 = b5 + 92097.0 / 339200, e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;
// Weights of the pair's fourth-order continuous extension. A cubic Hermite
// through the step endpoints is only O(h^4); its interpolation error at the
// default tolerances is an order of magnitude above the integration error
// and shows up directly as spurious drift of conserved quantities sampled
// between steps, so the method's own interpolant is used instead.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Log-coordinate right-hand side u' = lambda + A exp(B u).
Eigen::VectorXd log_rhs(const QPSystem& sys, const Eigen::VectorXd& u) {
  return sys.lambda() + sys.A() * (sys.B() * u).array().exp().matrix();
}

// Scaled RMS norm of the error estimate, Hairer-style.
double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& u0,
                  const Eigen::VectorXd& u1, double abs_tol, double rel_tol) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double scale = abs_tol + rel_tol * std::max(std::abs(u0[i]), std::abs(u1[i]));
    const double q = err[i] / scale;
    sum += q * q;
  }
  return std::sqrt(sum / static_cast<double>(err.size()));
}

// Hairer's starting-step heuristic, comparing the size of the state, the
// derivative and an Euler probe of the second derivative.
double initial_step_size(const QPSystem& sys, const Eigen::VectorXd& u0,
                         const Eigen::VectorXd& f0, double t_final, double abs_tol,
                         double rel_tol) {
  const auto scaled_norm = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& ref) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double scale = abs_tol + rel_tol * std::abs(ref[i]);
      const double q = v[i] / scale;
      sum += q * q;
    }
    return std::sqrt(sum / static_cast<double>(v.size()));
  };
  const double d0 = scaled_norm(u0, u0);
  const double d1 = scaled_norm(f0, u0);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, t_final);
  const Eigen::VectorXd u1 = u0 + h0 * f0;
  Eigen::VectorXd f1 = log_rhs(sys, u1);
  if (!finite(f1)) f1 = f0;
  const double d2 = scaled_norm(f1 - f0, u0) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
  return std::min({100.0 * h0, h1, t_final});
}

}  // namespace

TrajectoryRecord integrate(const QPSystem& sys, const StateVector& x0, double t_final,
                           const IntegrationConfig& config) {
  if (!(t_final > 0.0)) throw ValidationError("t_final must be positive");
  if (config.samples < 1) throw ValidationError("samples must be at least 1");
  if (!(config.rel_tol > 0.0) || !(config.abs_tol > 0.0)) {
    throw ValidationError("integration tolerances must be positive");
  }

  TrajectoryRecord rec;
  rec.times.reserve(static_cast<std::size_t>(config.samples) + 1);
  rec.states.reserve(static_cast<std::size_t>(config.samples) + 1);

  Eigen::VectorXd u = x0.log();
  Eigen::VectorXd f = log_rhs(sys, u);
  if (!finite(f)) throw NonFiniteState("right-hand side is not finite at the initial state");

  rec.times.push_back(0.0);
  rec.states.push_back(x0);

  const double dt_sample = t_final / config.samples;
  int next_sample = 1;

  // Coefficient vectors of the continuous extension over one accepted step,
  // evaluated as r1 + s (r2 + (1-s)(r3 + s (r4 + (1-s) r5))).
  Eigen::VectorXd r1, r2, r3, r4, r5;

  const auto emit_samples_through = [&](double t0, double t1) {
    const double h = t1 - t0;
    while (next_sample <= config.samples) {
      const double ts = next_sample * dt_sample;
      if (ts > t1 + 1e-12 * t_final) break;
      const double s = std::clamp((ts - t0) / h, 0.0, 1.0);
      const Eigen::VectorXd us = r1 + s * (r2 + (1 - s) * (r3 + s * (r4 + (1 - s) * r5)));
      Eigen::VectorXd xs = us.array().exp();
      if (!finite(xs) || (xs.array() <= 0.0).any()) {
        throw NonFiniteState("sampled state left the representable positive orthant");
      }
      rec.times.push_back(ts);
      rec.states.push_back(StateVector(std::move(xs)));
      ++next_sample;
    }
  };

  double t = 0.0;
  double h = config.initial_step > 0.0
                 ? std::min(config.initial_step, t_final)
                 : initial_step_size(sys, u, f, t_final, config.abs_tol, config.rel_tol);
  long steps = 0;

  while (t < t_final) {
    if (steps >= config.max_steps) {
      std::ostringstream os;
      os << "step budget of " << config.max_steps << " exhausted at t = " << t;
      throw NoConvergence(os.str());
    }
    const double h_min = 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0);
    if (h < h_min) {
      std::ostringstream os;
      os << "step size underflow at t = " << t << " (h = " << h << ")";
      throw StepSizeUnderflow(os.str(), rec);
    }
    h = std::min(h, t_final - t);

    const Eigen::VectorXd& k1 = f;
    const Eigen::VectorXd k2 = log_rhs(sys, u + h * (a21 * k1));
    const Eigen::VectorXd k3 = log_rhs(sys, u + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 = log_rhs(sys, u + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 = log_rhs(sys, u + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 =
        log_rhs(sys, u + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Eigen::VectorXd u_new = u + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Eigen::VectorXd k7 = log_rhs(sys, u_new);

    ++steps;
    bool ok = finite(k2) && finite(k3) && finite(k4) && finite(k5) && finite(k6) &&
              finite(u_new) && finite(k7);
    double err = std::numeric_limits<double>::infinity();
    if (ok) {
      const Eigen::VectorXd est =
          h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      err = error_norm(est, u, u_new, config.abs_tol, config.rel_tol);
      ok = std::isfinite(err) && err <= 1.0;
    }

    if (ok) {
      if (next_sample <= config.samples && next_sample * dt_sample <= t + h + 1e-12 * t_final) {
        const Eigen::VectorXd ydiff = u_new - u;
        const Eigen::VectorXd bspl = h * k1 - ydiff;
        r1 = u;
        r2 = ydiff;
        r3 = bspl;
        r4 = ydiff - h * k7 - bspl;
        r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        emit_samples_through(t, t + h);
      }
      t += h;
      u = u_new;
      f = k7;  // first-same-as-last
      ++rec.accepted_steps;
      const double factor = err <= 1e-30 ? 5.0 : 0.9 * std::pow(err, -0.2);
      h *= std::clamp(factor, 0.2, 5.0);
    } else {
      ++rec.rejected_steps;
      const double factor = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h *= std::min(factor, 0.5);
    }
  }

  // The loop ends exactly at t_final (the last step is clipped), so the
  // final sample is always emitted; guard against the sub-ulp corner.
  if (next_sample == config.samples) {
    Eigen::VectorXd xf = u.array().exp();
    if (!finite(xf) || (xf.array() <= 0.0).any()) {
      throw NonFiniteState("final state left the representable positive orthant");
    }
    rec.times.push_back(t_final);
    rec.states.push_back(StateVector(std::move(xf)));
  }
  return rec;
}

void annotate_liapunov(const QPSystem& sys, const DiagonalScaling& scaling,
                       const StateVector& xstar, TrajectoryRecord& record) {
  if (record.annotated()) return;
  record.W_samples.clear();
  record.Wdot_samples.clear();
  record.W_samples.reserve(record.size());
  record.Wdot_samples.reserve(record.size());
  for (const StateVector& x : record.states) {
    record.W_samples.push_back(evaluate_W(sys, scaling, xstar, x));
    record.Wdot_samples.push_back(evaluate_Wdot(sys, scaling, xstar, x));
  }
}

MonotonicityReport monitor_liapunov(const QPSystem& sys, const StabilityCertificate& cert,
                                    const StateVector& xstar, TrajectoryRecord& record,
                                    double terminal_tolerance) {
  if (record.empty()) throw ValidationError("cannot monitor an empty trajectory record");
  annotate_liapunov(sys, cert.scaling, xstar, record);

  MonotonicityReport rep;
  rep.slack = std::max(1e-10, 1e-9 * record.W_samples.front());
  rep.max_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < record.W_samples.size(); ++k) {
    const double rise = record.W_samples[k + 1] - record.W_samples[k];
    rep.max_increase = std::max(rep.max_increase, rise);
    if (rise > rep.slack && rep.first_violation < 0) {
      rep.first_violation = static_cast<long>(k);
    }
  }
  if (record.W_samples.size() < 2) rep.max_increase = 0.0;

  if (cert.classification == Classification::NegativeDefinite) {
    rep.terminal_checked = true;
    rep.terminal_tolerance = terminal_tolerance;
    rep.terminal_distance =
        (record.states.back().values() - xstar.values()).cwiseAbs().maxCoeff();
    rep.terminal_ok = rep.terminal_distance < terminal_tolerance;
  }
  rep.passed = rep.first_violation < 0 && rep.terminal_ok;
  return rep;
}

ConservationReport conservation_check(const QPSystem& sys, const DiagonalScaling& scaling,
                                      const StateVector& xstar, TrajectoryRecord& record,
                                      double threshold, const CertificateThresholds& thresholds) {
  if (record.empty()) throw ValidationError("cannot check an empty trajectory record");
  const Eigen::MatrixXd M = symmetrized_form(sys.interaction_matrix(), scaling);
  const double fro = M.norm();
  if (fro > thresholds.semidefinite_tolerance(fro)) {
    std::ostringstream os;
    os << "conservation requires M = 0; ||M||_F = " << fro;
    throw HypothesisNotMet(os.str());
  }
  annotate_liapunov(sys, scaling, xstar, record);

  ConservationReport rep;
  rep.threshold = threshold;
  const double W0 = record.W_samples.front();
  const double denom = std::max(1.0, W0);
  for (double w : record.W_samples) {
    rep.max_relative_drift = std::max(rep.max_relative_drift, std::abs(w - W0) / denom);
  }
  rep.passed = rep.max_relative_drift < threshold;
  return rep;
}

}  // namespace qpstab
