#include "qpstab/qp_system.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>
#include <sstream>

namespace qpstab {

namespace {

bool all_finite(const Eigen::MatrixXd& M) { return M.allFinite(); }

// sigma_min / sigma_max of an arbitrary rectangular matrix.
double singular_value_ratio(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sigma = svd.singularValues();
  if (sigma.size() == 0 || sigma(0) == 0.0) return 0.0;
  return sigma(sigma.size() - 1) / sigma(0);
}

}  // namespace

StateVector::StateVector(Eigen::VectorXd x) : x_(std::move(x)) {
  if (!x_.allFinite()) throw NonFiniteEntry("state vector has a non-finite entry");
  if ((x_.array() <= 0.0).any())
    throw ValidationError("state vector must lie in the interior of the positive orthant");
}

StateVector StateVector::from_log(const Eigen::VectorXd& u) {
  if (!u.allFinite()) throw NonFiniteEntry("log-state vector has a non-finite entry");
  Eigen::VectorXd x = u.array().exp();
  if (!x.allFinite() || (x.array() <= 0.0).any())
    throw NonFiniteState("exp(u) left the representable interior of the positive orthant");
  return StateVector(std::move(x));
}

QuasimonomialVector::QuasimonomialVector(Eigen::VectorXd phi) : phi_(std::move(phi)) {
  if (!phi_.allFinite() || (phi_.array() <= 0.0).any())
    throw NonFiniteState("quasimonomial value overflowed or underflowed to the boundary");
}

QPSystem::QPSystem(Eigen::VectorXd lambda, Eigen::MatrixXd A, Eigen::MatrixXd B)
    : lambda_(std::move(lambda)), A_(std::move(A)), B_(std::move(B)) {
  const auto n = lambda_.size();
  const auto m = A_.cols();
  if (A_.rows() != n) {
    std::ostringstream os;
    os << "rows(A) = " << A_.rows() << " but |lambda| = " << n;
    throw DimensionMismatch(os.str());
  }
  if (B_.rows() != m) {
    std::ostringstream os;
    os << "cols(A) = " << m << " but rows(B) = " << B_.rows();
    throw DimensionMismatch(os.str());
  }
  if (B_.cols() != n) {
    std::ostringstream os;
    os << "cols(B) = " << B_.cols() << " but n = " << n;
    throw DimensionMismatch(os.str());
  }
  if (n < 1) throw DimensionMismatch("state dimension n must be positive");
  if (m < n) {
    std::ostringstream os;
    os << "m = " << m << " < n = " << n << "; the quasimonomial count may not be smaller than the state dimension";
    throw DimensionMismatch(os.str());
  }
  if (!lambda_.allFinite()) throw NonFiniteEntry("lambda has a non-finite entry");
  if (!all_finite(A_)) throw NonFiniteEntry("A has a non-finite entry");
  if (!all_finite(B_)) throw NonFiniteEntry("B has a non-finite entry");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B_);
  const auto& sigma = svd.singularValues();
  const double sigma_max = sigma(0);
  const double sigma_min = sigma(sigma.size() - 1);
  if (sigma_max == 0.0 || sigma_min <= kRankTolerance * sigma_max) {
    std::ostringstream os;
    os << "numerical rank of B is below n: sigma_min = " << sigma_min
       << " <= " << kRankTolerance << " * sigma_max = " << kRankTolerance * sigma_max;
    throw RankDeficientB(os.str(), sigma_min, sigma_max);
  }
  sigma_ratio_ = sigma_min / sigma_max;
}

QPSystem QPSystem::from_lotka_volterra(Eigen::VectorXd lambda, Eigen::MatrixXd A) {
  if (A.rows() != A.cols()) {
    std::ostringstream os;
    os << "Lotka-Volterra interaction matrix must be square, got " << A.rows() << " x " << A.cols();
    throw DimensionMismatch(os.str());
  }
  if (lambda.size() != A.rows()) {
    std::ostringstream os;
    os << "|lambda| = " << lambda.size() << " but A is " << A.rows() << " x " << A.cols();
    throw DimensionMismatch(os.str());
  }
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(A.rows(), A.rows());
  return QPSystem(std::move(lambda), std::move(A), std::move(B));
}

QuasimonomialVector QPSystem::quasimonomials(const StateVector& x) const {
  Eigen::VectorXd phi = (B_ * x.log()).array().exp();
  return QuasimonomialVector(std::move(phi));
}

Eigen::MatrixXd QPSystem::interaction_matrix() const { return B_ * A_; }

Eigen::VectorXd QPSystem::vector_field(const StateVector& x) const {
  const Eigen::VectorXd phi = quasimonomials(x).values();
  return x.values().cwiseProduct(lambda_ + A_ * phi);
}

Eigen::VectorXd QPSystem::shifted_vector_field(const StateVector& x, const StateVector& xstar,
                                               double residual_tol) const {
  if (residual_tol < 0.0) residual_tol = equilibrium_gate_tolerance();
  const double res = equilibrium_residual(xstar);
  if (res > residual_tol) {
    std::ostringstream os;
    os << "xstar is not an equilibrium: residual " << res << " exceeds tolerance " << residual_tol;
    throw NotAnEquilibrium(os.str());
  }
  const Eigen::VectorXd dphi = quasimonomials(x).values() - quasimonomials(xstar).values();
  return x.values().cwiseProduct(A_ * dphi);
}

Eigen::MatrixXd QPSystem::quasimonomial_jacobian(const StateVector& x) const {
  const Eigen::VectorXd phi = quasimonomials(x).values();
  // (i, j) = B_ij * phi_i / x_j
  return phi.asDiagonal() * B_ * x.values().cwiseInverse().asDiagonal();
}

ExtendedExponentMatrix QPSystem::extend_exponent_matrix(unsigned fallback_seed) const {
  const int nn = n();
  const int mm = m();
  if (mm == nn) return ExtendedExponentMatrix{B_, nn};

  Eigen::MatrixXd candidate(mm, mm);
  candidate.leftCols(nn) = B_;
  int filled = nn;

  auto conditioned_rank = [](const Eigen::MatrixXd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& sigma = svd.singularValues();
    const double cutoff = kRankTolerance * sigma(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
      if (sigma(i) > cutoff) ++rank;
    return rank;
  };

  int current_rank = nn;  // rank(B) = n was established at validation
  // Greedy sweep over standard basis columns.
  for (int k = 0; k < mm && filled < mm; ++k) {
    candidate.col(filled) = Eigen::VectorXd::Unit(mm, k);
    const int r = conditioned_rank(candidate.leftCols(filled + 1));
    if (r > current_rank) {
      current_rank = r;
      ++filled;
    }
  }

  // Rank increments can be rejected by the conditioning cutoff for extreme
  // B; retry the remaining slots with seeded random unit columns.
  if (filled < mm) {
    std::mt19937 rng(fallback_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int attempt = 0; attempt < 100 * (mm - filled) && filled < mm; ++attempt) {
      Eigen::VectorXd col(mm);
      for (int i = 0; i < mm; ++i) col(i) = gauss(rng);
      col.normalize();
      candidate.col(filled) = col;
      const int r = conditioned_rank(candidate.leftCols(filled + 1));
      if (r > current_rank) {
        current_rank = r;
        ++filled;
      }
    }
  }

  if (filled < mm || singular_value_ratio(candidate) <= kRankTolerance)
    throw ExtensionFailed("no column completion of B reached the conditioning bound");

  return ExtendedExponentMatrix{std::move(candidate), nn};
}

double QPSystem::equilibrium_residual(const StateVector& x) const {
  return (lambda_ + A_ * quasimonomials(x).values()).lpNorm<Eigen::Infinity>();
}

double QPSystem::equilibrium_gate_tolerance() const {
  return 1e-9 * (1.0 + lambda_.lpNorm<Eigen::Infinity>());
}

}  // namespace qpstab
