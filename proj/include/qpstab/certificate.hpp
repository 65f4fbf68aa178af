#ifndef QPSTAB_CERTIFICATE_HPP
#define QPSTAB_CERTIFICATE_HPP

#include <Eigen/Dense>

#include <string>

#include "qpstab/errors.hpp"

namespace qpstab {

enum class Classification {
  NegativeDefinite,
  NegativeSemiDefinite,
  Inconclusive,
};

const char* to_string(Classification c);

/// Positive diagonal scaling C = diag(c_1..c_m). The canonical
/// normalization sum(c) = m removes the scale invariance of
/// M(alpha c) = alpha M(c); use `normalized` to establish it. The field is
/// public so verification can be exercised against tampered values.
struct DiagonalScaling {
  Eigen::VectorXd c;

  /// Validates positivity and finiteness, then rescales so sum(c) = m.
  static DiagonalScaling normalized(Eigen::VectorXd c);
};

/// Classification thresholds, relative to max(1, |M|_F). Semidefiniteness
/// is a measure-zero boundary, so a band is unavoidable in floating point.
struct CertificateThresholds {
  double definite_factor = 1e-8;
  double semidefinite_factor = 1e-7;

  double definite_tolerance(double frobenius_norm) const {
    return definite_factor * std::max(1.0, frobenius_norm);
  }
  double semidefinite_tolerance(double frobenius_norm) const {
    return semidefinite_factor * std::max(1.0, frobenius_norm);
  }
};

struct ClassificationResult {
  Classification classification = Classification::Inconclusive;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double frobenius_norm = 0.0;
};

struct StabilityCertificate {
  DiagonalScaling scaling;
  Classification classification = Classification::Inconclusive;
  /// Largest eigenvalue of M = C Q + Q^T C at the returned scaling.
  double lambda_max = 0.0;
  /// lambda_max / max(1, |M|_F).
  double margin = 0.0;
  /// Human-readable explanation when the search is Inconclusive by
  /// necessity (for example a positive diagonal entry of Q).
  std::string note;
};

struct CertificateSearchConfig {
  unsigned seed = 0;
  int max_starts = 20;
  /// 0 means the Nelder-Mead default budget per start.
  int max_evaluations_per_start = 0;
  CertificateThresholds thresholds;
};

struct VerificationReport {
  bool passed = false;
  Classification recomputed = Classification::Inconclusive;
  double lambda_max = 0.0;
  double margin = 0.0;
};

/// M = C Q + Q^T C, symmetrized after forming so the result is exactly
/// symmetric regardless of rounding.
Eigen::MatrixXd symmetrized_form(const Eigen::MatrixXd& Q, const DiagonalScaling& scaling);

/// Full symmetric eigendecomposition of M and threshold classification:
/// lambda_max < -tau_def is negative definite, lambda_max <= tau_semi is
/// negative semidefinite, anything above is inconclusive. Throws
/// EigenFailure if the decomposition does not converge.
ClassificationResult classify(const Eigen::MatrixXd& M, const CertificateThresholds& thresholds = {});

/// Searches for a positive diagonal C making C Q + Q^T C negative
/// (semi)definite by minimizing lambda_max(M(c)) over the normalized
/// simplex, parametrized as c = m * softmax(theta) and minimized with
/// seeded multistart Nelder-Mead. A positive diagonal entry of Q settles
/// the question immediately: M_ii = 2 c_i Q_ii > 0 for every admissible c.
/// Deterministic for a fixed seed. Inconclusive is a result, not an error.
StabilityCertificate search_certificate(const Eigen::MatrixXd& Q,
                                        const CertificateSearchConfig& config = {});

/// Recomputes M and its spectrum from scratch and confirms the stored
/// classification; independent of the search path. Throws
/// VerificationMismatch when the scaling violates its invariants or the
/// classification is not reproduced.
VerificationReport verify_certificate(const Eigen::MatrixXd& Q, const StabilityCertificate& cert,
                                      const CertificateThresholds& thresholds = {});

}  // namespace qpstab

#endif
