// Acceptance suite: end-to-end checks of the library contracts at fixed
// seeds, each with a wall-clock budget. Prints one line per criterion and
// exits nonzero if any fails. argv[1] must be the path to the qpstab CLI.

#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "qpstab/analysis.hpp"
#include "qpstab/dynamics.hpp"
#include "qpstab/equilibrium.hpp"
#include "qpstab/liapunov.hpp"
#include "test_support.hpp"

using namespace qpstab;
using namespace test_support;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string human(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

DiagonalScaling uniform_scaling(int m) {
  return DiagonalScaling::normalized(Eigen::VectorXd::Ones(m));
}

StateVector make_state(std::initializer_list<double> values) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) x(i++) = v;
  return StateVector(std::move(x));
}

// ---------------------------------------------------------------------------
// 1. On Lotka-Volterra systems (B = I) the log-space evaluation of W and the
//    quadratic form for Wdot must reduce to the classic textbook formulas.
Outcome lv_reduction() {
  std::mt19937 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(unif(rng, 0.0, 5.99));
    const Eigen::MatrixXd A = unif_matrix(rng, n, n, -2.0, 2.0);
    const StateVector xstar = random_state(rng, n, 1.0);
    const Eigen::VectorXd lambda = -A * xstar.values();
    const QPSystem sys = QPSystem::from_lotka_volterra(lambda, A);
    const DiagonalScaling c{unif_vector(rng, n, 0.1, 3.0)};

    for (int sample = 0; sample < 3; ++sample) {
      const StateVector x = random_state(rng, n, 1.5);

      double classic_W = 0.0;
      for (int i = 0; i < n; ++i) {
        classic_W +=
            c.c(i) * (x[i] - xstar[i] - xstar[i] * std::log(x[i] / xstar[i]));
      }
      const double W = evaluate_W(sys, c, xstar, x);
      const double w_err = std::abs(W - classic_W) / std::max({1.0, std::abs(W), std::abs(classic_W)});

      const Eigen::VectorXd dx = x.values() - xstar.values();
      const Eigen::MatrixXd CA = c.c.asDiagonal() * A;
      const double classic_Wdot = 0.5 * dx.dot((CA + CA.transpose()) * dx);
      const double Wdot = evaluate_Wdot(sys, c, xstar, x);
      const double wd_err =
          std::abs(Wdot - classic_Wdot) / std::max({1.0, std::abs(Wdot), std::abs(classic_Wdot)});

      worst = std::max({worst, w_err, wd_err});
      if (worst > 1e-12) {
        return {false, "relative deviation " + human(worst) + " exceeds 1e-12"};
      }
    }
  }
  return {true, "1000 systems, worst relative deviation " + human(worst)};
}

// ---------------------------------------------------------------------------
// 2. The quadratic form for Wdot must agree with the chain rule
//    gradient . vector_field, and with centered differences of W along
//    integrated trajectories.
Outcome wdot_identities() {
  std::mt19937 rng(2025);
  double worst_identity = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(unif(rng, 0.0, 4.99));
    const PlantedDefiniteSystem planted = planted_definite_system(rng, n);
    const DiagonalScaling c = DiagonalScaling::normalized(planted.c0);
    for (int sample = 0; sample < 5; ++sample) {
      const StateVector x = random_state(rng, n, 1.0);
      const double quadratic = evaluate_Wdot(planted.sys, c, planted.xstar, x);
      const double chained = chain_rule_Wdot(planted.sys, c, planted.xstar, x);
      const double err = std::abs(quadratic - chained) /
                         std::max({1.0, std::abs(quadratic), std::abs(chained)});
      worst_identity = std::max(worst_identity, err);
      if (err > 1e-10) {
        return {false, "chain-rule deviation " + human(err) + " exceeds 1e-10"};
      }
    }
  }

  double worst_fd = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(unif(rng, 0.0, 2.99));
    const PlantedDefiniteSystem planted = planted_definite_system(rng, n);
    const DiagonalScaling c = DiagonalScaling::normalized(planted.c0);
    const StateVector x0 = random_state(rng, n, 0.5);

    // dt = 1.25e-4 keeps the O(dt^2) truncation of the centered difference
    // an order of magnitude under the 1e-6 bound even for the fastest
    // planted contraction rates.
    IntegrationConfig config;
    config.rel_tol = 1e-12;
    config.abs_tol = 1e-14;
    config.samples = 8000;
    TrajectoryRecord rec = integrate(planted.sys, x0, 1.0, config);
    annotate_liapunov(planted.sys, c, planted.xstar, rec);

    double scale = 1.0;
    for (double wd : rec.Wdot_samples) scale = std::max(scale, std::abs(wd));
    const double dt = rec.times[1] - rec.times[0];
    for (std::size_t k = 1; k + 1 < rec.size(); ++k) {
      const double fd = (rec.W_samples[k + 1] - rec.W_samples[k - 1]) / (2.0 * dt);
      const double err = std::abs(fd - rec.Wdot_samples[k]) / scale;
      worst_fd = std::max(worst_fd, err);
      if (err > 1e-6) {
        return {false, "finite-difference deviation " + human(err) + " exceeds 1e-6"};
      }
    }
  }
  return {true, "500 identity systems (worst " + human(worst_identity) + "), 25 trajectories (worst " +
                    human(worst_fd) + ")"};
}

// ---------------------------------------------------------------------------
// 3. W is zero at the equilibrium and strictly positive everywhere else,
//    and the independent extended-matrix evaluation route agrees.
Outcome positivity() {
  std::mt19937 rng(2026);
  double worst_oracle = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(unif(rng, 0.0, 4.0));
    // Every second system strictly wide (m > n).
    const int m = n + (trial % 2 == 0 ? 1 + static_cast<int>(unif(rng, 0.0, 1.99)) : 0);
    const PlantedSystem planted = planted_unique_equilibrium(rng, n, m);
    const DiagonalScaling c{unif_vector(rng, m, 0.1, 3.0)};

    const double at_star = evaluate_W(planted.sys, c, planted.xstar, planted.xstar);
    if (!(std::abs(at_star) <= 1e-14)) {
      return {false, "W at the equilibrium is " + human(at_star)};
    }

    for (int sample = 0; sample < 10000; ++sample) {
      const StateVector x = random_state(rng, n, 1.5);
      if ((x.values() - planted.xstar.values()).lpNorm<Eigen::Infinity>() < 1e-12) continue;
      const double W = evaluate_W(planted.sys, c, planted.xstar, x);
      if (!(W > 0.0)) {
        return {false, "W = " + human(W) + " at an off-equilibrium state"};
      }
      const double oracle = positivity_oracle(planted.sys, c, planted.xstar, x);
      const double err = std::abs(oracle - W) / std::max({1.0, std::abs(W), std::abs(oracle)});
      worst_oracle = std::max(worst_oracle, err);
      if (err > 1e-12) {
        return {false, "oracle deviation " + human(err) + " exceeds 1e-12"};
      }
    }
  }
  return {true, "50 systems x 10000 samples, worst oracle deviation " + human(worst_oracle)};
}

// ---------------------------------------------------------------------------
// 4. The search must recover a negative definite certificate whenever one
//    was planted, and independent verification must confirm it.
Outcome planted_recovery() {
  std::mt19937 rng(2027);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + static_cast<int>(unif(rng, 0.0, 6.99));
    const PlantedQ planted = planted_definite_Q(rng, m);
    CertificateSearchConfig config;
    config.seed = static_cast<unsigned>(trial);
    const StabilityCertificate cert = search_certificate(planted.Q, config);
    if (cert.classification != Classification::NegativeDefinite) {
      return {false, "instance " + std::to_string(trial) + " (m = " + std::to_string(m) +
                         ") not recovered: lambda_max = " + human(cert.lambda_max)};
    }
    if (!verify_certificate(planted.Q, cert).passed) {
      return {false, "verification failed on instance " + std::to_string(trial)};
    }
  }
  return {true, "100/100 planted certificates recovered and verified"};
}

// ---------------------------------------------------------------------------
// 5. A positive diagonal entry of Q rules out every diagonal scaling; the
//    search must say Inconclusive, never a false certificate.
Outcome positive_diagonal_soundness() {
  std::mt19937 rng(2028);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + static_cast<int>(unif(rng, 0.0, 7.99));
    Eigen::MatrixXd Q = unif_matrix(rng, m, m, -1.0, 1.0);
    const int k = static_cast<int>(unif(rng, 0.0, m - 1e-9));
    Q(k, k) = 0.05 + std::abs(Q(k, k));
    const StabilityCertificate cert = search_certificate(Q, CertificateSearchConfig{});
    if (cert.classification != Classification::Inconclusive) {
      return {false, "false certificate on instance " + std::to_string(trial)};
    }
    if (cert.note.empty()) {
      return {false, "missing explanatory note on instance " + std::to_string(trial)};
    }
  }
  return {true, "100/100 classified inconclusive with an explanatory note"};
}

// ---------------------------------------------------------------------------
// 6. Definite certificates claim global attraction: long integrations from
//    scattered starts must land on the equilibrium.
Outcome attractor_empirics() {
  std::mt19937 rng(2029);
  int runs = 0;
  int underflows = 0;
  double worst_distance = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(unif(rng, 0.0, 3.99));
    const PlantedDefiniteSystem planted = planted_definite_system(rng, n);
    for (int start = 0; start < 50; ++start) {
      ++runs;
      const StateVector x0 =
          StateVector::from_log(planted.xstar.log() + unif_vector(rng, n, -1.0, 1.0));
      IntegrationConfig config;
      config.samples = 64;
      try {
        const TrajectoryRecord rec = integrate(planted.sys, x0, 200.0, config);
        const double dist =
            (rec.states.back().values() - planted.xstar.values()).lpNorm<Eigen::Infinity>();
        worst_distance = std::max(worst_distance, dist);
        if (!(dist < 1e-6)) {
          return {false, "terminal distance " + human(dist) + " at run " + std::to_string(runs)};
        }
      } catch (const StepSizeUnderflow&) {
        ++underflows;
      }
    }
  }
  if (underflows * 100 > runs) {
    return {false, std::to_string(underflows) + "/" + std::to_string(runs) + " underflows"};
  }
  std::ostringstream os;
  os << runs - underflows << "/" << runs << " runs converged (worst distance "
     << human(worst_distance) << ", " << underflows << " underflows)";
  return {true, os.str()};
}

// ---------------------------------------------------------------------------
// 7. Conservative pairings keep W constant: small drift at default
//    tolerances, and tightening the controller reduces it monotonically.
Outcome conservation() {
  const QPSystem pp = predator_prey();
  const StateVector pp_star = make_state({1.0, 1.0});
  TrajectoryRecord pp_rec = integrate(pp, make_state({2.0, 1.0}), 100.0);
  const ConservationReport pp_rep = conservation_check(pp, uniform_scaling(2), pp_star, pp_rec);
  if (!pp_rep.passed) {
    return {false, "predator-prey drift " + human(pp_rep.max_relative_drift) + " exceeds 1e-8"};
  }

  const PlantedSystem skew = skew_conservative();
  TrajectoryRecord skew_rec = integrate(skew.sys, make_state({1.5, 0.6}), 100.0);
  const ConservationReport skew_rep =
      conservation_check(skew.sys, uniform_scaling(3), skew.xstar, skew_rec);
  if (!skew_rep.passed) {
    return {false, "skew system drift " + human(skew_rep.max_relative_drift) + " exceeds 1e-8"};
  }

  std::vector<double> drifts;
  for (double rel : {1e-7, 1e-9, 1e-11}) {
    IntegrationConfig config;
    config.rel_tol = rel;
    config.abs_tol = rel * 1e-3;
    TrajectoryRecord rec = integrate(pp, make_state({2.0, 1.0}), 100.0, config);
    drifts.push_back(
        conservation_check(pp, uniform_scaling(2), pp_star, rec, 1.0).max_relative_drift);
  }
  if (!(drifts[1] < drifts[0] && drifts[2] < drifts[1])) {
    return {false, "drift not monotone under tightening: " + human(drifts[0]) + ", " +
                       human(drifts[1]) + ", " + human(drifts[2])};
  }

  std::ostringstream os;
  os << "drift " << human(pp_rep.max_relative_drift) << " (predator-prey), "
     << human(skew_rep.max_relative_drift) << " (skew); tightening " << human(drifts[0]) << " > "
     << human(drifts[1]) << " > " << human(drifts[2]);
  return {true, os.str()};
}

// ---------------------------------------------------------------------------
// 8. The equilibrium solver must recover planted interior roots.
Outcome equilibrium_recovery() {
  std::mt19937 rng(2030);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(unif(rng, 0.0, 4.99));
    const int m = n + static_cast<int>(unif(rng, 0.0, 1.99));
    const PlantedSystem planted = planted_unique_equilibrium(rng, n, m);
    const Equilibrium eq = find_equilibrium(planted.sys);
    if (!eq.converged) {
      return {false, "solver did not converge on instance " + std::to_string(trial)};
    }
    double rel = 0.0;
    for (int i = 0; i < n; ++i) {
      rel = std::max(rel, std::abs(eq.xstar[i] - planted.xstar[i]) / planted.xstar[i]);
    }
    worst = std::max(worst, rel);
    if (rel > 1e-10) {
      return {false, "relative recovery error " + human(rel) + " exceeds 1e-10"};
    }
  }
  return {true, "200/200 planted equilibria recovered (worst relative error " + human(worst) + ")"};
}

// ---------------------------------------------------------------------------
// 9. CLI contract: identical inputs and seeds give byte-identical JSON, and
//    the exit code distinguishes certified / inconclusive / invalid input /
//    numerical failure.
struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return result;
  char buffer[4096];
  std::size_t got = 0;
  while ((got = fread(buffer, 1, sizeof(buffer), pipe)) > 0) {
    result.output.append(buffer, got);
  }
  const int status = pclose(pipe);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  return result;
}

Outcome cli_contract(const std::string& cli) {
  char tmpl[] = "/tmp/qpstab_accept_XXXXXX";
  if (!mkdtemp(tmpl)) return {false, "cannot create temporary directory"};
  const std::string dir = tmpl;
  const auto write_file = [&](const std::string& name, const std::string& content) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    out << content;
    return path;
  };

  const std::string definite = write_file("definite.json", R"({
    "n": 2, "m": 2,
    "lambda": [1.0, 1.0],
    "A": [[-1.0, 0.0], [0.0, -1.0]],
    "B": [[1.0, 0.0], [0.0, 1.0]]
  })");
  const std::string obstructed = write_file("obstructed.json", R"({
    "n": 2, "m": 2,
    "lambda": [-1.0, 1.0],
    "A": [[1.0, 0.0], [0.0, -1.0]],
    "B": [[1.0, 0.0], [0.0, 1.0]]
  })");
  const std::string malformed = write_file("malformed.json", "{ not json");
  const std::string no_interior = write_file("no_interior.json", R"({
    "n": 2, "m": 2,
    "lambda": [1.0, 1.0],
    "A": [[0.0, -1.0], [1.0, 0.0]],
    "B": [[1.0, 0.0], [0.0, 1.0]]
  })");

  const auto cleanup = [&]() {
    for (const char* name :
         {"definite.json", "obstructed.json", "malformed.json", "no_interior.json"}) {
      std::remove((dir + "/" + name).c_str());
    }
    rmdir(dir.c_str());
  };

  const std::string analyze = cli + " analyze --seed 7 --format json " + definite;
  const CommandResult first = run_command(analyze + " 2>/dev/null");
  const CommandResult second = run_command(analyze + " 2>/dev/null");
  if (first.exit_code != 0) {
    cleanup();
    return {false, "certified input exited " + std::to_string(first.exit_code) + ", expected 0"};
  }
  if (first.output.empty() || first.output != second.output) {
    cleanup();
    return {false, "repeated runs are not byte-identical"};
  }
  if (first.output.find("\"verdict\": \"globally_asymptotically_stable\"") == std::string::npos) {
    cleanup();
    return {false, "unexpected verdict in the JSON report"};
  }

  const CommandResult inconclusive =
      run_command(cli + " analyze --format json " + obstructed + " 2>/dev/null");
  if (inconclusive.exit_code != 2) {
    cleanup();
    return {false, "obstructed input exited " + std::to_string(inconclusive.exit_code) +
                       ", expected 2"};
  }

  const CommandResult parse_fail =
      run_command(cli + " analyze --format json " + malformed + " 2>/dev/null");
  if (parse_fail.exit_code != 3) {
    cleanup();
    return {false, "malformed input exited " + std::to_string(parse_fail.exit_code) +
                       ", expected 3"};
  }

  const CommandResult numerical_fail =
      run_command(cli + " analyze --format json " + no_interior + " 2>/dev/null");
  if (numerical_fail.exit_code != 4) {
    cleanup();
    return {false, "equilibrium-free input exited " + std::to_string(numerical_fail.exit_code) +
                       ", expected 4"};
  }

  cleanup();
  return {true, "byte-identical reports; exit codes 0/2/3/4 confirmed"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <path-to-qpstab-cli>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];

  struct Criterion {
    const char* title;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"Lotka-Volterra reduction of W and Wdot", 10.0, lv_reduction},
      {"Wdot identities (chain rule, finite differences)", 60.0, wdot_identities},
      {"positivity of W and oracle agreement", 60.0, positivity},
      {"planted definite certificate recovery", 120.0, planted_recovery},
      {"positive-diagonal soundness", 30.0, positive_diagonal_soundness},
      {"certified attractors reach the equilibrium", 300.0, attractor_empirics},
      {"first-integral conservation", 30.0, conservation},
      {"planted equilibrium recovery", 20.0, equilibrium_recovery},
      {"CLI determinism and exit codes", 60.0, [&cli] { return cli_contract(cli); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("unexpected exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (elapsed > criteria[i].budget_seconds) {
      outcome.pass = false;
      outcome.detail += " [over budget of " + human(criteria[i].budget_seconds) + " s]";
    }
    std::printf("[%s] %zu. %s (%s) [%.2f s]\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].title, outcome.detail.c_str(), elapsed);
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }

  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d acceptance criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
