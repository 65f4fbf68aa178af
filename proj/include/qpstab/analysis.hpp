#ifndef QPSTAB_ANALYSIS_HPP
#define QPSTAB_ANALYSIS_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpstab/certificate.hpp"
#include "qpstab/dynamics.hpp"
#include "qpstab/equilibrium.hpp"
#include "qpstab/qp_system.hpp"

namespace qpstab {

/// A system-definition file: the validated system plus any optional
/// fields the file carried. Command-line flags take precedence over the
/// optional fields when both are given.
struct ParsedInput {
  QPSystem system;
  std::vector<StateVector> x0_list;
  std::optional<unsigned> seed;
  std::optional<double> definite_factor;
  std::optional<double> semidefinite_factor;
};

/// Reads and validates a JSON system definition with fields n, m, lambda,
/// A (row-major array of arrays), B, and optional x0_list, seed,
/// tolerances {definite, semidefinite}. Malformed documents produce
/// ParseError with line/field diagnostics; inconsistent systems propagate
/// the validation errors.
ParsedInput parse_input(const std::string& path);

/// Same, from an in-memory document; `origin` names the source in
/// diagnostics.
ParsedInput parse_input_text(const std::string& text, const std::string& origin);

enum class Verdict {
  GloballyAsymptoticallyStable,
  Stable,
  Inconclusive,
};

const char* to_string(Verdict v);

/// The verdict is a pure function of the certificate classification and
/// whether the trajectory validation passed:
///
///   NegativeDefinite     + pass -> globally asymptotically stable
///   NegativeDefinite     + fail -> stable (empirics below claim)
///   NegativeSemiDefinite + pass -> stable
///   NegativeSemiDefinite + fail -> inconclusive
///   Inconclusive         + any  -> inconclusive
Verdict decide_verdict(Classification classification, bool trajectories_ok);

/// 0 for certified verdicts, 2 for inconclusive. (3 and 4 are reserved
/// for validation and numerical errors and assigned by the frontend.)
int exit_code_for(Verdict v);

enum class ValidationMode {
  Monotonic,
  Conservation,
};

/// Outcome of validating the certificate against one trajectory.
struct TrajectoryValidation {
  Eigen::VectorXd x0;
  ValidationMode mode = ValidationMode::Monotonic;
  bool passed = false;
  bool underflow = false;
  // Monotonic mode.
  double max_increase = 0.0;
  double slack = 0.0;
  bool terminal_checked = false;
  double terminal_distance = 0.0;
  // Conservation mode.
  double max_relative_drift = 0.0;
};

struct AnalysisOptions {
  unsigned seed = 0;
  int max_starts = 20;
  CertificateThresholds thresholds;
  /// Trajectory validation horizon and sampling.
  double t_final = 50.0;
  int samples = 256;
  /// Number of seeded initial conditions when the input supplies none.
  int trajectory_count = 5;
  double terminal_tolerance = 1e-6;
};

struct AnalysisReport {
  // System echo.
  Eigen::VectorXd lambda;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  // Pipeline results.
  Eigen::VectorXd xstar;
  double equilibrium_residual = 0.0;
  StabilityCertificate certificate;
  bool certificate_verified = false;
  std::vector<TrajectoryValidation> trajectories;
  bool trajectories_ok = false;
  Verdict verdict = Verdict::Inconclusive;
  unsigned seed = 0;
  std::string version;
};

/// Full pipeline: equilibrium -> certificate search -> independent
/// certificate verification -> trajectory validation -> verdict.
/// Deterministic for fixed options. Initial conditions come from x0_list
/// when nonempty, otherwise from seeded perturbations of the equilibrium.
/// Throws the underlying module errors (NoConvergence when no interior
/// equilibrium is found, etc.).
AnalysisReport run_analysis(const QPSystem& sys, const AnalysisOptions& options,
                            const std::vector<StateVector>& x0_list = {});

/// Machine-readable report with a stable key order, so equal reports are
/// byte-identical when dumped.
nlohmann::ordered_json report_to_json(const AnalysisReport& report);

/// Aligned human-readable rendering of the same content.
std::string report_to_text(const AnalysisReport& report);

/// Writes the record as tab-separated columns t, x1..xn, W, Wdot with 17
/// significant digits (binary64 round-trip exact). The Liapunov columns
/// require an annotated record. Throws ValidationError on an empty or
/// unannotated record, IoError when the file cannot be written.
void export_trajectory(const TrajectoryRecord& record, const std::string& path);

/// Same serialization, to any stream.
void write_trajectory(const TrajectoryRecord& record, std::ostream& out);

}  // namespace qpstab

#endif
