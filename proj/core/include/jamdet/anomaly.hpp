#pragma once

#include <cstdint>
#include <vector>

#include "jamdet/mat.hpp"
#include "jamdet/telemetry.hpp"

namespace jamdet {

/// Partition of the feature indices produced by agglomerative clustering on
/// 1 - |Pearson correlation| with complete linkage.
struct FeatureClustering {
  std::vector<std::vector<int>> clusters;

  bool operator==(const FeatureClustering&) const = default;
};

/// Correlation-distance clustering of the feature-mapping prefix. Merging
/// stops when the cheapest remaining merge would exceed max_cluster_size;
/// constant features correlate 0 with everything.
FeatureClustering cluster_features(const std::vector<FeatureVector>& prefix,
                                   int max_cluster_size);

struct AeParams {
  double fm_fraction = 0.1;
  double beta = 0.75;  // hidden size = ceil(beta * input size)
  double lr = 0.05;
  int max_cluster_size = 7;
  std::uint64_t seed = 0;
};

/// Sigmoid-sigmoid auto-encoder trained to reconstruct its input.
struct AutoEncoder {
  Mat w_enc;  // hidden x input
  std::vector<double> b_hidden;
  Mat w_dec;  // input x hidden
  std::vector<double> b_out;
};

/// Ensemble of per-cluster auto-encoders whose reconstruction RMSEs feed one
/// output auto-encoder; the output RMSE maps through tanh(s / eta_scale) to a
/// [0,1] jamming score.
///
/// Training is a streaming single pass: the first fm_fraction of the stream
/// (the feature-mapping phase) only fits the clustering; normalization state
/// then grows online from post-FM records while the auto-encoder weights
/// train by SGD. No label ever enters training, and nothing inside the
/// feature-mapping prefix can move a weight once the clustering is fixed.
struct EnsembleAe {
  FeatureClustering clustering;
  std::vector<AutoEncoder> members;
  AutoEncoder output;

  FeatureVector feat_min{};
  FeatureVector feat_max{};
  std::vector<double> rmse_min;
  std::vector<double> rmse_max;

  double eta = 1.0;        // decision threshold on the [0,1] score
  double eta_scale = 1.0;  // tanh calibration scale
  AeParams params;
  std::size_t fm_count = 0;
  std::size_t train_count = 0;
  bool trained = false;
};

EnsembleAe train_ensemble(const std::vector<FeatureVector>& stream, const AeParams& params);

/// Raw output-AE reconstruction RMSE in [0, inf).
double raw_rmse(const EnsembleAe& model, const FeatureVector& x);

/// tanh(raw_rmse / eta_scale); strictly increasing in the raw RMSE.
double score(const EnsembleAe& model, const FeatureVector& x);

/// Nearest-rank quantile: the ceil(q*n)-th smallest value.
double nearest_rank_quantile(std::vector<double> values, double q);

/// Sets eta_scale = 3 * mean clean-validation RMSE, then eta = the
/// nearest-rank q-quantile of the validation scores. Returns eta.
double calibrate_threshold(EnsembleAe& model, const std::vector<FeatureVector>& clean_validation,
                           double quantile = 0.999);

/// Max absolute difference across all weights and biases of two ensembles
/// (infinity when the architectures differ); 0 means bitwise-equal training.
double max_weight_delta(const EnsembleAe& a, const EnsembleAe& b);

}  // namespace jamdet
