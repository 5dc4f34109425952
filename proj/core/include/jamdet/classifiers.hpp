#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "jamdet/telemetry.hpp"

namespace jamdet {

/// Binary-labeled feature matrix (y: 0 = clean, 1 = jam).
struct LabeledMatrix {
  std::vector<FeatureVector> x;
  std::vector<int> y;

  std::size_t size() const { return x.size(); }

  static LabeledMatrix from_dataset(const Dataset& data) {
    return {to_feature_matrix(data), binary_labels(data)};
  }
};

/// Gini impurity 1 - sum(p_c^2) over per-class counts.
double gini(std::span<const std::size_t> counts);

/// Binary decision tree stored as a node arena (root at index 0).
struct TreeModel {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double p_jam = 0.0;  // leaf probability of the jam class
  };
  std::vector<Node> nodes;

  bool operator==(const TreeModel&) const = default;
};

struct TreeParams {
  int max_depth = 12;
  int min_leaf = 1;
};

TreeModel train_tree(const LabeledMatrix& train, const TreeParams& params = {});

struct ForestParams {
  int n_trees = 100;
  int max_depth = 12;
  int min_leaf = 1;
  int features_per_split = 4;  // ceil(sqrt(14))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<TreeModel> trees;
  ForestParams params;
};

ForestModel train_forest(const LabeledMatrix& train, const ForestParams& params = {});

struct LogRegParams {
  double learning_rate = 0.1;
  double l2 = 1e-4;
  int epochs = 500;
};

/// Logistic regression trained by full-batch gradient descent on normalized
/// features. The recorded per-epoch loss is non-increasing (the step is
/// backtracked when a full step would raise it).
struct LinearModel {
  FeatureVector weights{};
  double bias = 0.0;
  std::vector<double> loss_history;
};

LinearModel train_logreg(const LabeledMatrix& train, const LogRegParams& params = {});

/// Analytic loss/gradient pair, exposed for the finite-difference check.
double logreg_loss(const LinearModel& m, const LabeledMatrix& data, double l2);
void logreg_gradient(const LinearModel& m, const LabeledMatrix& data, double l2,
                     FeatureVector& grad_w, double& grad_b);

struct GnbModel {
  std::array<FeatureVector, 2> mean{};      // [class][feature]
  std::array<FeatureVector, 2> variance{};  // floored
  std::array<double, 2> prior{};
};

GnbModel train_gnb(const LabeledMatrix& train);

/// Per-class posterior, summing to 1.
std::array<double, 2> gnb_posterior(const GnbModel& m, const FeatureVector& x);

struct KnnModel {
  std::vector<FeatureVector> rows;  // min-max normalized
  std::vector<int> labels;
  int k = 5;
  FeatureVector feat_min{};
  FeatureVector feat_max{};
};

KnnModel fit_knn(const LabeledMatrix& train, int k = 5);

/// Probability-like jam score in [0,1]; thresholding at eta gives the
/// H1/H0 decision.
double predict_score(const TreeModel& m, const FeatureVector& x);
double predict_score(const ForestModel& m, const FeatureVector& x);
double predict_score(const LinearModel& m, const FeatureVector& x);
double predict_score(const GnbModel& m, const FeatureVector& x);
double predict_score(const KnnModel& m, const FeatureVector& x);

/// Decision rule: H1 iff score > eta (ties decide H0).
inline bool decide(double score, double eta) { return score > eta; }

}  // namespace jamdet
