#include "qpstab/analysis.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "qpstab/liapunov.hpp"
#include "qpstab/version.hpp"

namespace qpstab {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void bad_field(const std::string& origin, const std::string& field,
                            const std::string& why) {
  throw ParseError(origin + ": field '" + field + "' " + why);
}

const json& require_key(const json& doc, const std::string& origin, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw ParseError(origin + ": missing required field '" + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& origin, const std::string& field) {
  if (!v.is_number()) bad_field(origin, field, "must be a number");
  return v.get<double>();
}

int as_positive_int(const json& v, const std::string& origin, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 1)
    bad_field(origin, field, "must be a positive integer");
  return static_cast<int>(v.get<long long>());
}

Eigen::VectorXd as_vector(const json& v, const std::string& origin, const std::string& field) {
  if (!v.is_array() || v.empty()) bad_field(origin, field, "must be a nonempty array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) =
        as_number(v[i], origin, field + "[" + std::to_string(i) + "]");
  }
  return out;
}

Eigen::MatrixXd as_matrix(const json& v, const std::string& origin, const std::string& field) {
  if (!v.is_array() || v.empty())
    bad_field(origin, field, "must be a nonempty array of rows (row-major)");
  const std::size_t rows = v.size();
  if (!v[0].is_array() || v[0].empty())
    bad_field(origin, field, "rows must be nonempty arrays of numbers");
  const std::size_t cols = v[0].size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string row_name = field + "[" + std::to_string(i) + "]";
    if (!v[i].is_array()) bad_field(origin, row_name, "must be an array of numbers");
    if (v[i].size() != cols)
      bad_field(origin, row_name,
                "has " + std::to_string(v[i].size()) + " entries, expected " +
                    std::to_string(cols) + " (ragged matrix)");
    for (std::size_t j = 0; j < cols; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          as_number(v[i][j], origin, row_name + "[" + std::to_string(j) + "]");
    }
  }
  return out;
}

void check_declared_size(const std::string& origin, const std::string& field, long actual,
                         const char* declared_name, long declared) {
  if (actual != declared) {
    std::ostringstream os;
    os << origin << ": field '" << field << "' has dimension " << actual << " but " << declared_name
       << " = " << declared;
    throw DimensionMismatch(os.str());
  }
}

ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ordered_json matrix_json(const Eigen::MatrixXd& M) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << v(i);
  }
  os << "]";
  return os.str();
}

}  // namespace

ParsedInput parse_input_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(origin + ": top-level value must be an object");

  const int n = as_positive_int(require_key(doc, origin, "n"), origin, "n");
  const int m = as_positive_int(require_key(doc, origin, "m"), origin, "m");
  Eigen::VectorXd lambda = as_vector(require_key(doc, origin, "lambda"), origin, "lambda");
  Eigen::MatrixXd A = as_matrix(require_key(doc, origin, "A"), origin, "A");
  Eigen::MatrixXd B = as_matrix(require_key(doc, origin, "B"), origin, "B");

  check_declared_size(origin, "lambda", lambda.size(), "n", n);
  check_declared_size(origin, "A", A.rows(), "n", n);
  check_declared_size(origin, "A", A.cols(), "m", m);
  check_declared_size(origin, "B", B.rows(), "m", m);
  check_declared_size(origin, "B", B.cols(), "n", n);

  ParsedInput input{QPSystem(std::move(lambda), std::move(A), std::move(B)), {}, {}, {}, {}};

  if (const auto it = doc.find("x0_list"); it != doc.end()) {
    if (!it->is_array()) bad_field(origin, "x0_list", "must be an array of state vectors");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string name = "x0_list[" + std::to_string(i) + "]";
      Eigen::VectorXd x0 = as_vector((*it)[i], origin, name);
      check_declared_size(origin, name, x0.size(), "n", n);
      input.x0_list.emplace_back(std::move(x0));
    }
  }
  if (const auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 0)
      bad_field(origin, "seed", "must be a nonnegative integer");
    input.seed = static_cast<unsigned>(it->get<long long>());
  }
  if (const auto it = doc.find("tolerances"); it != doc.end()) {
    if (!it->is_object()) bad_field(origin, "tolerances", "must be an object");
    if (const auto d = it->find("definite"); d != it->end()) {
      const double v = as_number(*d, origin, "tolerances.definite");
      if (!(v > 0.0)) bad_field(origin, "tolerances.definite", "must be positive");
      input.definite_factor = v;
    }
    if (const auto s = it->find("semidefinite"); s != it->end()) {
      const double v = as_number(*s, origin, "tolerances.semidefinite");
      if (!(v > 0.0)) bad_field(origin, "tolerances.semidefinite", "must be positive");
      input.semidefinite_factor = v;
    }
  }
  return input;
}

ParsedInput parse_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open input file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("read failure on input file: " + path);
  return parse_input_text(buffer.str(), path);
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::GloballyAsymptoticallyStable: return "globally_asymptotically_stable";
    case Verdict::Stable: return "stable";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Verdict decide_verdict(Classification classification, bool trajectories_ok) {
  switch (classification) {
    case Classification::NegativeDefinite:
      return trajectories_ok ? Verdict::GloballyAsymptoticallyStable : Verdict::Stable;
    case Classification::NegativeSemiDefinite:
      return trajectories_ok ? Verdict::Stable : Verdict::Inconclusive;
    case Classification::Inconclusive: return Verdict::Inconclusive;
  }
  return Verdict::Inconclusive;
}

int exit_code_for(Verdict v) { return v == Verdict::Inconclusive ? 2 : 0; }

AnalysisReport run_analysis(const QPSystem& sys, const AnalysisOptions& options,
                            const std::vector<StateVector>& x0_list) {
  AnalysisReport rep;
  rep.lambda = sys.lambda();
  rep.A = sys.A();
  rep.B = sys.B();
  rep.seed = options.seed;
  rep.version = kVersion;

  EquilibriumConfig eq_config;
  eq_config.seed = options.seed;
  eq_config.max_starts = options.max_starts;
  const std::optional<StateVector> guess =
      x0_list.empty() ? std::nullopt : std::optional<StateVector>(x0_list.front());
  const Equilibrium eq = find_equilibrium(sys, guess, eq_config);
  rep.xstar = eq.xstar.values();
  rep.equilibrium_residual = eq.residual_norm;

  const Eigen::MatrixXd Q = sys.interaction_matrix();
  CertificateSearchConfig cert_config;
  cert_config.seed = options.seed;
  cert_config.max_starts = options.max_starts;
  cert_config.thresholds = options.thresholds;
  rep.certificate = search_certificate(Q, cert_config);

  if (rep.certificate.classification == Classification::Inconclusive) {
    rep.verdict = decide_verdict(rep.certificate.classification, false);
    return rep;
  }

  rep.certificate_verified = verify_certificate(Q, rep.certificate, options.thresholds).passed;

  std::vector<StateVector> starts = x0_list;
  if (starts.empty()) {
    std::mt19937 rng(options.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int i = 0; i < options.trajectory_count; ++i) {
      Eigen::VectorXd du(sys.n());
      for (int j = 0; j < sys.n(); ++j) du(j) = unif(rng);
      starts.push_back(StateVector::from_log(eq.xstar.log() + du));
    }
  }

  const Eigen::MatrixXd M = symmetrized_form(Q, rep.certificate.scaling);
  const bool conservative = M.norm() <= options.thresholds.semidefinite_tolerance(M.norm());

  bool all_ok = !starts.empty();
  for (const StateVector& x0 : starts) {
    TrajectoryValidation tv;
    tv.x0 = x0.values();
    IntegrationConfig int_config;
    int_config.samples = options.samples;
    try {
      TrajectoryRecord record = integrate(sys, x0, options.t_final, int_config);
      if (conservative) {
        tv.mode = ValidationMode::Conservation;
        const ConservationReport c = conservation_check(sys, rep.certificate.scaling, eq.xstar,
                                                        record, 1e-8, options.thresholds);
        tv.passed = c.passed;
        tv.max_relative_drift = c.max_relative_drift;
      } else {
        tv.mode = ValidationMode::Monotonic;
        const MonotonicityReport m = monitor_liapunov(sys, rep.certificate, eq.xstar, record,
                                                      options.terminal_tolerance);
        tv.passed = m.passed;
        tv.max_increase = m.max_increase;
        tv.slack = m.slack;
        tv.terminal_checked = m.terminal_checked;
        tv.terminal_distance = m.terminal_distance;
      }
    } catch (const StepSizeUnderflow&) {
      tv.underflow = true;
      tv.passed = false;
    }
    all_ok = all_ok && tv.passed;
    rep.trajectories.push_back(std::move(tv));
  }
  rep.trajectories_ok = all_ok;
  rep.verdict = decide_verdict(rep.certificate.classification, rep.trajectories_ok);
  return rep;
}

ordered_json report_to_json(const AnalysisReport& rep) {
  ordered_json j;
  j["tool"] = "qpstab";
  j["version"] = rep.version;
  j["seed"] = rep.seed;

  ordered_json system;
  system["n"] = rep.lambda.size();
  system["m"] = rep.A.cols();
  system["lambda"] = vector_json(rep.lambda);
  system["A"] = matrix_json(rep.A);
  system["B"] = matrix_json(rep.B);
  j["system"] = std::move(system);

  ordered_json eq;
  eq["xstar"] = vector_json(rep.xstar);
  eq["residual"] = rep.equilibrium_residual;
  j["equilibrium"] = std::move(eq);

  ordered_json cert;
  cert["classification"] = to_string(rep.certificate.classification);
  if (rep.certificate.scaling.c.size() > 0) {
    cert["c"] = vector_json(rep.certificate.scaling.c);
    cert["lambda_max"] = rep.certificate.lambda_max;
    cert["margin"] = rep.certificate.margin;
  }
  if (!rep.certificate.note.empty()) cert["note"] = rep.certificate.note;
  cert["verified"] = rep.certificate_verified;
  j["certificate"] = std::move(cert);

  ordered_json traj;
  traj["count"] = rep.trajectories.size();
  std::size_t passed = 0;
  ordered_json runs = ordered_json::array();
  for (const TrajectoryValidation& tv : rep.trajectories) {
    if (tv.passed) ++passed;
    ordered_json r;
    r["x0"] = vector_json(tv.x0);
    r["mode"] = tv.mode == ValidationMode::Conservation ? "conservation" : "monotonic";
    r["passed"] = tv.passed;
    if (tv.underflow) {
      r["step_size_underflow"] = true;
    } else if (tv.mode == ValidationMode::Conservation) {
      r["max_relative_drift"] = tv.max_relative_drift;
    } else {
      r["max_increase"] = tv.max_increase;
      r["slack"] = tv.slack;
      if (tv.terminal_checked) r["terminal_distance"] = tv.terminal_distance;
    }
    runs.push_back(std::move(r));
  }
  traj["passed"] = passed;
  traj["all_passed"] = rep.trajectories_ok;
  traj["runs"] = std::move(runs);
  j["trajectories"] = std::move(traj);

  j["verdict"] = to_string(rep.verdict);
  return j;
}

std::string report_to_text(const AnalysisReport& rep) {
  std::ostringstream os;
  os << "qpstab " << rep.version << " (seed " << rep.seed << ")\n";
  os << "system         n = " << rep.lambda.size() << ", m = " << rep.A.cols() << "\n";
  os << "lambda         " << format_vector(rep.lambda) << "\n";
  os << "equilibrium    x* = " << format_vector(rep.xstar)
     << "   residual = " << rep.equilibrium_residual << "\n";
  os << "certificate    " << to_string(rep.certificate.classification);
  if (rep.certificate.scaling.c.size() > 0) {
    os << "\n               c = " << format_vector(rep.certificate.scaling.c) << "\n";
    os << "               lambda_max = " << rep.certificate.lambda_max
       << "   margin = " << rep.certificate.margin << "\n";
    os << "               verified = " << (rep.certificate_verified ? "yes" : "no");
  }
  os << "\n";
  if (!rep.certificate.note.empty()) os << "note           " << rep.certificate.note << "\n";
  if (!rep.trajectories.empty()) {
    std::size_t passed = 0;
    for (const auto& tv : rep.trajectories)
      if (tv.passed) ++passed;
    os << "trajectories   " << passed << "/" << rep.trajectories.size() << " passed ("
       << (rep.trajectories.front().mode == ValidationMode::Conservation ? "conservation"
                                                                         : "monotonic")
       << ")\n";
  }
  os << "verdict        " << to_string(rep.verdict) << "\n";
  return os.str();
}

void write_trajectory(const TrajectoryRecord& record, std::ostream& out) {
  if (record.empty()) throw ValidationError("cannot export an empty trajectory record");
  if (!record.annotated())
    throw ValidationError("trajectory record must be annotated with W before export");
  const Eigen::Index n = record.states.front().size();
  out << "t";
  for (Eigen::Index j = 0; j < n; ++j) out << "\tx" << (j + 1);
  out << "\tW\tWdot\n";
  char buf[40];
  const auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (std::size_t k = 0; k < record.size(); ++k) {
    emit(record.times[k]);
    for (Eigen::Index j = 0; j < n; ++j) {
      out << '\t';
      emit(record.states[k].values()(j));
    }
    out << '\t';
    emit(record.W_samples[k]);
    out << '\t';
    emit(record.Wdot_samples[k]);
    out << '\n';
  }
}

void export_trajectory(const TrajectoryRecord& record, const std::string& path) {
  if (record.empty()) throw ValidationError("cannot export an empty trajectory record");
  if (!record.annotated())
    throw ValidationError("trajectory record must be annotated with W before export");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path);
  write_trajectory(record, out);
  out.flush();
  if (!out) throw IoError("write failure on output file: " + path);
}

}  // namespace qpstab
