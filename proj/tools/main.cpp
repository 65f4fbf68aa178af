#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qpstab/analysis.hpp"
#include "qpstab/dynamics.hpp"
#include "qpstab/equilibrium.hpp"
#include "qpstab/liapunov.hpp"
#include "qpstab/version.hpp"

namespace {

using namespace qpstab;

// Flags shared by every subcommand. Explicitly passed flags take
// precedence over the optional fields of the input file.
struct CommonFlags {
  std::string file;
  unsigned seed = 0;
  int max_starts = 20;
  double definite_tol = 1e-8;
  double semidefinite_tol = 1e-7;
  std::string format = "text";

  CLI::Option* seed_opt = nullptr;
  CLI::Option* definite_opt = nullptr;
  CLI::Option* semidefinite_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("file", file, "JSON system definition")->required();
    seed_opt = cmd->add_option("--seed", seed, "RNG seed for multistart searches");
    cmd->add_option("--max-starts", max_starts, "multistart budget")
        ->check(CLI::PositiveNumber);
    definite_opt = cmd->add_option("--definite-tol", definite_tol,
                                   "negative-definiteness threshold, relative to max(1, |M|_F)");
    semidefinite_opt =
        cmd->add_option("--semidefinite-tol", semidefinite_tol,
                        "negative-semidefiniteness threshold, relative to max(1, |M|_F)");
    cmd->add_option("--format", format, "report format")
        ->check(CLI::IsMember({"text", "json"}));
  }

  AnalysisOptions merge(const ParsedInput& input) const {
    AnalysisOptions opt;
    opt.seed = seed_opt->count() ? seed : input.seed.value_or(0);
    opt.max_starts = max_starts;
    opt.thresholds.definite_factor =
        definite_opt->count() ? definite_tol : input.definite_factor.value_or(1e-8);
    opt.thresholds.semidefinite_factor =
        semidefinite_opt->count() ? semidefinite_tol : input.semidefinite_factor.value_or(1e-7);
    return opt;
  }
};

int run_analyze(const CommonFlags& flags, double t_final, int samples, int trajectories) {
  const ParsedInput input = parse_input(flags.file);
  AnalysisOptions options = flags.merge(input);
  options.t_final = t_final;
  options.samples = samples;
  options.trajectory_count = trajectories;
  const AnalysisReport report = run_analysis(input.system, options, input.x0_list);
  if (flags.format == "json") {
    std::cout << report_to_json(report).dump(2) << "\n";
  } else {
    std::cout << report_to_text(report);
  }
  return exit_code_for(report.verdict);
}

int run_certificate(const CommonFlags& flags) {
  const ParsedInput input = parse_input(flags.file);
  const AnalysisOptions options = flags.merge(input);
  CertificateSearchConfig config;
  config.seed = options.seed;
  config.max_starts = options.max_starts;
  config.thresholds = options.thresholds;
  const Eigen::MatrixXd Q = input.system.interaction_matrix();
  const StabilityCertificate cert = search_certificate(Q, config);
  bool verified = false;
  if (cert.classification != Classification::Inconclusive) {
    verified = verify_certificate(Q, cert, options.thresholds).passed;
  }

  if (flags.format == "json") {
    nlohmann::ordered_json j;
    j["tool"] = "qpstab";
    j["version"] = kVersion;
    j["seed"] = options.seed;
    j["classification"] = to_string(cert.classification);
    if (cert.scaling.c.size() > 0) {
      nlohmann::ordered_json c = nlohmann::ordered_json::array();
      for (Eigen::Index i = 0; i < cert.scaling.c.size(); ++i) c.push_back(cert.scaling.c(i));
      j["c"] = std::move(c);
      j["lambda_max"] = cert.lambda_max;
      j["margin"] = cert.margin;
    }
    if (!cert.note.empty()) j["note"] = cert.note;
    j["verified"] = verified;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "classification  " << to_string(cert.classification) << "\n";
    if (cert.scaling.c.size() > 0) {
      std::cout << "c               [";
      for (Eigen::Index i = 0; i < cert.scaling.c.size(); ++i) {
        if (i) std::cout << ", ";
        std::cout << cert.scaling.c(i);
      }
      std::cout << "]\n";
      std::cout << "lambda_max      " << cert.lambda_max << "\n";
      std::cout << "margin          " << cert.margin << "\n";
      std::cout << "verified        " << (verified ? "yes" : "no") << "\n";
    }
    if (!cert.note.empty()) std::cout << "note            " << cert.note << "\n";
  }
  return cert.classification == Classification::Inconclusive ? 2 : 0;
}

int run_simulate(const CommonFlags& flags, double t_final, int samples,
                 const std::vector<double>& x0_values, const std::string& output) {
  const ParsedInput input = parse_input(flags.file);
  const AnalysisOptions options = flags.merge(input);
  const QPSystem& sys = input.system;

  std::optional<StateVector> x0;
  if (!x0_values.empty()) {
    if (static_cast<int>(x0_values.size()) != sys.n()) {
      throw ValidationError("--x0 needs exactly " + std::to_string(sys.n()) + " values");
    }
    x0 = StateVector(Eigen::Map<const Eigen::VectorXd>(x0_values.data(),
                                                       static_cast<Eigen::Index>(x0_values.size())));
  } else if (!input.x0_list.empty()) {
    x0 = input.x0_list.front();
  } else {
    throw ValidationError("no initial condition: pass --x0 or provide x0_list in the file");
  }

  EquilibriumConfig eq_config;
  eq_config.seed = options.seed;
  eq_config.max_starts = options.max_starts;
  const Equilibrium eq = find_equilibrium(sys, x0, eq_config);

  CertificateSearchConfig cert_config;
  cert_config.seed = options.seed;
  cert_config.max_starts = options.max_starts;
  cert_config.thresholds = options.thresholds;
  const StabilityCertificate cert = search_certificate(sys.interaction_matrix(), cert_config);
  const DiagonalScaling scaling =
      cert.scaling.c.size() > 0
          ? cert.scaling
          : DiagonalScaling::normalized(Eigen::VectorXd::Ones(sys.m()));

  IntegrationConfig int_config;
  int_config.samples = samples;
  TrajectoryRecord record = integrate(sys, *x0, t_final, int_config);
  annotate_liapunov(sys, scaling, eq.xstar, record);

  if (output == "-") {
    write_trajectory(record, std::cout);
  } else {
    export_trajectory(record, output);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stability certificates for quasipolynomial ODE systems"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonFlags analyze_flags, simulate_flags, certificate_flags;

  CLI::App* analyze = app.add_subcommand(
      "analyze", "equilibrium, certificate search and trajectory validation");
  analyze_flags.attach(analyze);
  double analyze_t_final = 50.0;
  int analyze_samples = 256;
  int analyze_trajectories = 5;
  analyze->add_option("--t-final", analyze_t_final, "validation horizon")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--samples", analyze_samples, "dense samples per trajectory")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--trajectories", analyze_trajectories,
                      "seeded initial conditions when the file has no x0_list")
      ->check(CLI::PositiveNumber);

  CLI::App* simulate =
      app.add_subcommand("simulate", "integrate one trajectory and export t, x, W, Wdot");
  simulate_flags.attach(simulate);
  double simulate_t_final = 50.0;
  int simulate_samples = 256;
  std::vector<double> x0_values;
  std::string output = "-";
  simulate->add_option("--t-final", simulate_t_final, "integration horizon")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--samples", simulate_samples, "dense output samples")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--x0", x0_values, "initial state (n positive values)")->expected(-1);
  simulate->add_option("--output", output, "output path, or - for stdout");

  CLI::App* certificate =
      app.add_subcommand("certificate", "diagonal scaling search for Q = B A only");
  certificate_flags.attach(certificate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (analyze->parsed()) {
      return run_analyze(analyze_flags, analyze_t_final, analyze_samples, analyze_trajectories);
    }
    if (simulate->parsed()) {
      return run_simulate(simulate_flags, simulate_t_final, simulate_samples, x0_values, output);
    }
    return run_certificate(certificate_flags);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
