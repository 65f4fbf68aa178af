#ifndef QPSTAB_NELDER_MEAD_HPP
#define QPSTAB_NELDER_MEAD_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

namespace qpstab {

struct NelderMeadOptions {
  /// 0 means the default budget 400 * dim.
  int max_evaluations = 0;
  double f_tolerance = 1e-13;
  double x_tolerance = 1e-11;
  /// Edge length of the initial axis-aligned simplex.
  double initial_step = 0.25;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Downhill simplex minimization (reflection 1, expansion 2, contraction
/// 0.5, shrink 0.5). Deterministic: no internal randomness, ties resolved
/// by vertex index.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x0, NelderMeadOptions opt = {}) {
  const int dim = static_cast<int>(x0.size());
  const int budget = opt.max_evaluations > 0 ? opt.max_evaluations : 400 * dim;

  std::vector<Eigen::VectorXd> verts(dim + 1, x0);
  std::vector<double> fv(dim + 1);
  int evals = 0;
  for (int j = 0; j < dim; ++j) verts[j + 1](j) += opt.initial_step;
  for (int j = 0; j <= dim; ++j) {
    fv[j] = f(verts[j]);
    ++evals;
  }

  std::vector<int> order(dim + 1);
  auto sort_vertices = [&]() {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
  };

  NelderMeadResult result;
  while (true) {
    sort_vertices();
    const int best = order[0];
    const int worst = order[dim];
    const int second_worst = order[dim - 1];

    double diameter = 0.0;
    for (int j = 0; j <= dim; ++j)
      diameter = std::max(diameter, (verts[j] - verts[best]).lpNorm<Eigen::Infinity>());
    const bool f_done = std::abs(fv[worst] - fv[best]) <= opt.f_tolerance * (1.0 + std::abs(fv[best]));
    const bool x_done = diameter <= opt.x_tolerance * (1.0 + verts[best].lpNorm<Eigen::Infinity>());
    if ((f_done && x_done) || evals >= budget) {
      result.x = verts[best];
      result.f = fv[best];
      result.evaluations = evals;
      result.converged = f_done && x_done;
      return result;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int j = 0; j <= dim; ++j)
      if (j != worst) centroid += verts[j];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd reflected = centroid + (centroid - verts[worst]);
    const double fr = f(reflected);
    ++evals;

    if (fr < fv[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - verts[worst]);
      const double fe = f(expanded);
      ++evals;
      if (fe < fr) {
        verts[worst] = expanded;
        fv[worst] = fe;
      } else {
        verts[worst] = reflected;
        fv[worst] = fr;
      }
    } else if (fr < fv[second_worst]) {
      verts[worst] = reflected;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const Eigen::VectorXd contracted =
          outside ? (centroid + 0.5 * (reflected - centroid)) : (centroid + 0.5 * (verts[worst] - centroid));
      const double fc = f(contracted);
      ++evals;
      if (fc < (outside ? fr : fv[worst])) {
        verts[worst] = contracted;
        fv[worst] = fc;
      } else {
        for (int j = 0; j <= dim; ++j) {
          if (j == best) continue;
          verts[j] = verts[best] + 0.5 * (verts[j] - verts[best]);
          fv[j] = f(verts[j]);
          ++evals;
        }
      }
    }
  }
}

}  // namespace qpstab

#endif
