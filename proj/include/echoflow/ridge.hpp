#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "echoflow/core.hpp"
#include "echoflow/signal.hpp"

namespace echoflow {

/// Learned linear readout plus everything needed to map standardized
/// predictions back to degrees.
struct RidgeModel {
  Vec weights;
  double lambda = 10.0;
  ZScoreParams feature_zparams;
  ZScoreParams angle_zparams;  // single channel
  std::vector<ChannelId> channel_ids;
  std::string config_fingerprint;
};

/// Validation metrics on the original degree scale.
struct EvalReport {
  double rmse_deg = 0.0;
  double r2 = 0.0;
  Index n_train = 0;
  Index n_val = 0;
  Index split_boundary = 0;
};

/// Contiguous train/validation split: first floor(n * train_fraction)
/// samples train, the rest validate. No shuffling.
struct SplitIndices {
  Index n_total = 0;
  Index n_train = 0;
  Index n_val() const { return n_total - n_train; }
};

/// Closed-form ridge weights solving w (S S^T + lambda I) = theta S^T via a
/// symmetric positive-definite factorization (never an explicit inverse).
/// When T < F the algebraically equivalent dual form w = S (S^T S + lambda I)^-1 theta
/// is used instead, sized by the sample count.
Vec ridge_fit(const Eigen::Ref<const Mat>& S, const Eigen::Ref<const Vec>& theta,
              double lambda);

/// theta_hat_k = sum_i w_i S(i, k).
Vec ridge_predict(const Eigen::Ref<const Vec>& weights, const Eigen::Ref<const Mat>& S);

/// Residual sum of squares plus (lambda / 2) * sum(w_i^2).
double ridge_loss(const Eigen::Ref<const Vec>& theta, const Eigen::Ref<const Vec>& theta_hat,
                  const Eigen::Ref<const Vec>& weights, double lambda);

double rmse(const Eigen::Ref<const Vec>& y, const Eigen::Ref<const Vec>& y_hat);

/// 1 - SS_res / SS_tot with SS_tot about the mean of y.
double r_squared(const Eigen::Ref<const Vec>& y, const Eigen::Ref<const Vec>& y_hat);

SplitIndices split_contiguous(Index n, double train_fraction);

/// Model persistence; weights and parameters are stored with full round-trip
/// precision so a reload is bit-stable.
void save_model_json(const RidgeModel& model, const std::filesystem::path& path);
RidgeModel load_model_json(const std::filesystem::path& path);

}  // namespace echoflow
