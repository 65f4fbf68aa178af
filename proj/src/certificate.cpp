#include "qpstab/certificate.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

#include "qpstab/nelder_mead.hpp"

namespace qpstab {

const char* to_string(Classification c) {
  switch (c) {
    case Classification::NegativeDefinite: return "negative_definite";
    case Classification::NegativeSemiDefinite: return "negative_semidefinite";
    case Classification::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

DiagonalScaling DiagonalScaling::normalized(Eigen::VectorXd c) {
  if (c.size() == 0) throw ValidationError("diagonal scaling must be non-empty");
  if (!c.allFinite()) throw NonFiniteEntry("diagonal scaling has a non-finite entry");
  if ((c.array() <= 0.0).any())
    throw ValidationError("diagonal scaling entries must be strictly positive");
  c *= static_cast<double>(c.size()) / c.sum();
  return DiagonalScaling{std::move(c)};
}

Eigen::MatrixXd symmetrized_form(const Eigen::MatrixXd& Q, const DiagonalScaling& scaling) {
  if (Q.rows() != Q.cols()) throw DimensionMismatch("Q must be square");
  if (scaling.c.size() != Q.rows())
    throw DimensionMismatch("scaling length does not match the order of Q");
  Eigen::MatrixXd CQ = scaling.c.asDiagonal() * Q;
  Eigen::MatrixXd M = CQ + CQ.transpose();
  M = 0.5 * (M + M.transpose()).eval();
  return M;
}

ClassificationResult classify(const Eigen::MatrixXd& M, const CertificateThresholds& thresholds) {
  if (M.rows() != M.cols()) throw DimensionMismatch("M must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw EigenFailure("symmetric eigendecomposition did not converge");

  ClassificationResult result;
  result.lambda_max = solver.eigenvalues().maxCoeff();
  result.lambda_min = solver.eigenvalues().minCoeff();
  result.frobenius_norm = M.norm();

  const double tau_def = thresholds.definite_tolerance(result.frobenius_norm);
  const double tau_semi = thresholds.semidefinite_tolerance(result.frobenius_norm);
  if (result.lambda_max < -tau_def) {
    result.classification = Classification::NegativeDefinite;
  } else if (result.lambda_max <= tau_semi) {
    result.classification = Classification::NegativeSemiDefinite;
  } else {
    result.classification = Classification::Inconclusive;
  }
  return result;
}

namespace {

// c = m * softmax(theta); clamping theta keeps every c_i strictly positive
// in double precision.
Eigen::VectorXd softmax_scaling(const Eigen::VectorXd& theta) {
  Eigen::ArrayXd t = theta.array().min(40.0).max(-40.0);
  t -= t.maxCoeff();
  Eigen::ArrayXd w = t.exp();
  return (static_cast<double>(theta.size()) / w.sum()) * w.matrix();
}

double largest_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw EigenFailure("symmetric eigendecomposition did not converge");
  return solver.eigenvalues().maxCoeff();
}

StabilityCertificate certificate_at(const Eigen::MatrixXd& Q, DiagonalScaling scaling,
                                    const CertificateThresholds& thresholds) {
  const Eigen::MatrixXd M = symmetrized_form(Q, scaling);
  const ClassificationResult cls = classify(M, thresholds);
  StabilityCertificate cert;
  cert.scaling = std::move(scaling);
  cert.classification = cls.classification;
  cert.lambda_max = cls.lambda_max;
  cert.margin = cls.lambda_max / std::max(1.0, cls.frobenius_norm);
  return cert;
}

}  // namespace

StabilityCertificate search_certificate(const Eigen::MatrixXd& Q,
                                        const CertificateSearchConfig& config) {
  if (Q.rows() != Q.cols()) throw DimensionMismatch("Q must be square");
  if (!Q.allFinite()) throw NonFiniteEntry("Q has a non-finite entry");
  const int m = static_cast<int>(Q.rows());
  const Eigen::VectorXd uniform = Eigen::VectorXd::Ones(m);

  // Necessary condition: a symmetric matrix with a positive diagonal entry
  // cannot be negative semidefinite, and M_ii = 2 c_i Q_ii.
  for (int i = 0; i < m; ++i) {
    if (Q(i, i) > 0.0) {
      StabilityCertificate cert = certificate_at(Q, DiagonalScaling::normalized(uniform),
                                                 config.thresholds);
      cert.classification = Classification::Inconclusive;
      std::ostringstream os;
      os << "Q(" << i << "," << i << ") = " << Q(i, i)
         << " > 0, so C Q + Q^T C has a positive diagonal entry for every positive C";
      cert.note = os.str();
      return cert;
    }
  }

  auto objective = [&](const Eigen::VectorXd& theta) {
    return largest_eigenvalue(symmetrized_form(Q, DiagonalScaling{softmax_scaling(theta)}));
  };

  std::mt19937 rng(config.seed);
  std::uniform_real_distribution<double> box(-2.0, 2.0);

  NelderMeadOptions nm;
  nm.max_evaluations = config.max_evaluations_per_start > 0 ? config.max_evaluations_per_start
                                                            : 300 * m;

  Eigen::VectorXd best_theta = Eigen::VectorXd::Zero(m);
  double best_f = objective(best_theta);
  for (int start = 0; start < config.max_starts; ++start) {
    Eigen::VectorXd theta0(m);
    if (start == 0) {
      theta0.setZero();
    } else {
      for (int i = 0; i < m; ++i) theta0(i) = box(rng);
    }
    NelderMeadResult run = nelder_mead(objective, theta0, nm);
    // Restart once from the incumbent; plain Nelder-Mead stalls on the
    // nonsmooth lambda_max objective near eigenvalue crossings.
    NelderMeadOptions polish = nm;
    polish.initial_step = 0.05;
    NelderMeadResult refined = nelder_mead(objective, run.x, polish);
    const NelderMeadResult& winner = refined.f < run.f ? refined : run;
    if (winner.f < best_f) {
      best_f = winner.f;
      best_theta = winner.x;
    }
  }

  return certificate_at(Q, DiagonalScaling::normalized(softmax_scaling(best_theta)),
                        config.thresholds);
}

VerificationReport verify_certificate(const Eigen::MatrixXd& Q, const StabilityCertificate& cert,
                                      const CertificateThresholds& thresholds) {
  const Eigen::VectorXd& c = cert.scaling.c;
  if (c.size() != Q.rows()) throw VerificationMismatch("scaling length does not match Q");
  if (!c.allFinite() || (c.array() <= 0.0).any())
    throw VerificationMismatch("scaling violates the positivity invariant");
  const double m = static_cast<double>(c.size());
  if (std::abs(c.sum() - m) > 1e-8 * m)
    throw VerificationMismatch("scaling violates the sum(c) = m normalization");

  const Eigen::MatrixXd M = symmetrized_form(Q, cert.scaling);
  const ClassificationResult cls = classify(M, thresholds);
  if (cls.classification != cert.classification) {
    std::ostringstream os;
    os << "classification not reproduced: certificate says " << to_string(cert.classification)
       << ", recomputation says " << to_string(cls.classification);
    throw VerificationMismatch(os.str());
  }
  if (std::abs(cls.lambda_max - cert.lambda_max) > 1e-8 * std::max(1.0, cls.frobenius_norm)) {
    std::ostringstream os;
    os << "lambda_max not reproduced: certificate says " << cert.lambda_max
       << ", recomputation says " << cls.lambda_max;
    throw VerificationMismatch(os.str());
  }

  VerificationReport report;
  report.passed = true;
  report.recomputed = cls.classification;
  report.lambda_max = cls.lambda_max;
  report.margin = cls.lambda_max / std::max(1.0, cls.frobenius_norm);
  return report;
}

}  // namespace qpstab
