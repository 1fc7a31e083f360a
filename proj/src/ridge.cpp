#include "echoflow/ridge.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>

namespace echoflow {

namespace {

// SPD solve with one retry at lambda + 1e-10 * trace when the factorization
// reports a numerical issue. At lambda = 0 a breakdown means the system is
// genuinely singular and jittering would change the problem.
Vec spd_solve(Mat m, const Vec& rhs, double lambda) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() == Eigen::Success) {
    Vec x = llt.solve(rhs);
    if (x.allFinite()) return x;
  }
  if (lambda > 0.0) {
    const double jitter = 1e-10 * m.trace();
    m.diagonal().array() += jitter;
    Eigen::LLT<Mat> retry(m);
    if (retry.info() == Eigen::Success) {
      Vec x = retry.solve(rhs);
      if (x.allFinite()) return x;
    }
    throw NumericalError("ridge: factorization failed even with diagonal jitter");
  }
  throw NumericalError("ridge: S S^T is singular at lambda = 0; use lambda > 0");
}

}  // namespace

Vec ridge_fit(const Eigen::Ref<const Mat>& S, const Eigen::Ref<const Vec>& theta,
              double lambda) {
  const Index F = S.rows();
  const Index T = S.cols();
  if (F < 1) throw ValidationError("ridge_fit: need at least one feature channel");
  if (T < 2) throw ValidationError("ridge_fit: need at least two samples");
  if (theta.size() != T) {
    std::ostringstream os;
    os << "ridge_fit: theta length " << theta.size() << " vs " << T << " samples";
    throw ValidationError(os.str());
  }
  if (lambda < 0.0) throw ValidationError("ridge_fit: lambda must be >= 0");

  if (F <= T) {
    // Primal: (S S^T + lambda I) w = S theta, an F x F system.
    Mat gram = Mat::Zero(F, F);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(S);
    gram = gram.selfadjointView<Eigen::Lower>();
    gram.diagonal().array() += lambda;
    return spd_solve(std::move(gram), S * theta, lambda);
  }
  // Dual: w = S (S^T S + lambda I)^-1 theta, a T x T system.
  Mat gram = Mat::Zero(T, T);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(S.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += lambda;
  return S * spd_solve(std::move(gram), theta, lambda);
}

Vec ridge_predict(const Eigen::Ref<const Vec>& weights, const Eigen::Ref<const Mat>& S) {
  if (weights.size() != S.rows()) {
    std::ostringstream os;
    os << "ridge_predict: " << weights.size() << " weights vs " << S.rows() << " channels";
    throw ValidationError(os.str());
  }
  return S.transpose() * weights;
}

double ridge_loss(const Eigen::Ref<const Vec>& theta, const Eigen::Ref<const Vec>& theta_hat,
                  const Eigen::Ref<const Vec>& weights, double lambda) {
  if (theta.size() != theta_hat.size()) {
    std::ostringstream os;
    os << "ridge_loss: length mismatch " << theta.size() << " vs " << theta_hat.size();
    throw ValidationError(os.str());
  }
  return (theta - theta_hat).squaredNorm() + 0.5 * lambda * weights.squaredNorm();
}

double rmse(const Eigen::Ref<const Vec>& y, const Eigen::Ref<const Vec>& y_hat) {
  if (y.size() != y_hat.size()) {
    std::ostringstream os;
    os << "rmse: length mismatch " << y.size() << " vs " << y_hat.size();
    throw ValidationError(os.str());
  }
  if (y.size() < 1) throw ValidationError("rmse: need at least one sample");
  return std::sqrt((y - y_hat).squaredNorm() / static_cast<double>(y.size()));
}

double r_squared(const Eigen::Ref<const Vec>& y, const Eigen::Ref<const Vec>& y_hat) {
  if (y.size() != y_hat.size()) {
    std::ostringstream os;
    os << "r_squared: length mismatch " << y.size() << " vs " << y_hat.size();
    throw ValidationError(os.str());
  }
  if (y.size() < 2) throw ValidationError("r_squared: need at least two samples");
  const double mean = y.mean();
  const double ss_tot = (y.array() - mean).square().sum();
  if (!(ss_tot > 0.0)) throw ValidationError("r_squared: y has zero variance");
  const double ss_res = (y - y_hat).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

SplitIndices split_contiguous(Index n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("split: train_fraction must lie in (0, 1)");
  if (n < 5) throw ValidationError("split: need at least 5 samples");
  SplitIndices split;
  split.n_total = n;
  split.n_train = static_cast<Index>(std::floor(static_cast<double>(n) * train_fraction));
  if (split.n_train < 1 || split.n_val() < 1)
    throw ValidationError("split: degenerate split leaves one side empty");
  return split;
}

}  // namespace echoflow
