#include "jamdet/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "jamdet/random.hpp"

namespace jamdet {

double gini(std::span<const std::size_t> counts) {
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  if (total == 0) throw ValidationError("gini: all-zero counts");
  double sum_sq = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

namespace {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = -1.0;
};

double impurity(std::size_t c0, std::size_t c1) {
  const std::size_t counts[2] = {c0, c1};
  return gini(counts);
}

// Best Gini-gain split over the candidate features, ties broken toward the
// lowest feature index then the lowest threshold. Candidate thresholds are
// midpoints between adjacent distinct sorted values, so the result does not
// depend on training-row order.
SplitChoice best_split(const LabeledMatrix& data, const std::vector<int>& idx,
                       const std::vector<int>& features, int min_leaf) {
  const std::size_t n = idx.size();
  std::size_t total1 = 0;
  for (int i : idx) total1 += static_cast<std::size_t>(data.y[i]);
  const std::size_t total0 = n - total1;
  const double parent = impurity(total0, total1);

  SplitChoice best;
  std::vector<std::pair<double, int>> vals(n);  // (value, label)
  for (int f : features) {
    for (std::size_t j = 0; j < n; ++j) {
      vals[j] = {data.x[idx[j]][f], data.y[idx[j]]};
    }
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::size_t left1 = 0;
    std::size_t j = 0;
    while (j < n) {
      // Consume the run of equal values.
      const double v = vals[j].first;
      while (j < n && vals[j].first == v) {
        left1 += static_cast<std::size_t>(vals[j].second);
        ++j;
      }
      if (j == n) break;
      const std::size_t nl = j;
      const std::size_t nr = n - j;
      if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf)) {
        continue;
      }
      const std::size_t l1 = left1;
      const std::size_t l0 = nl - l1;
      const std::size_t r1 = total1 - l1;
      const std::size_t r0 = nr - r1;
      const double children = (static_cast<double>(nl) * impurity(l0, l1) +
                               static_cast<double>(nr) * impurity(r0, r1)) /
                              static_cast<double>(n);
      const double gain = parent - children;
      const double threshold = (v + vals[j].first) / 2.0;
      if (!best.found || gain > best.gain ||
          (gain == best.gain &&
           (f < best.feature || (f == best.feature && threshold < best.threshold)))) {
        best.found = true;
        best.feature = f;
        best.threshold = threshold;
        best.gain = gain;
      }
    }
  }
  return best;
}

class TreeBuilder {
 public:
  TreeBuilder(const LabeledMatrix& data, const TreeParams& params, Rng* rng,
              int features_per_split)
      : data_(data), params_(params), rng_(rng), features_per_split_(features_per_split) {}

  int build(TreeModel& model, const std::vector<int>& idx, int depth) {
    std::size_t n1 = 0;
    for (int i : idx) n1 += static_cast<std::size_t>(data_.y[i]);
    const std::size_t n = idx.size();

    const int node_id = static_cast<int>(model.nodes.size());
    model.nodes.emplace_back();
    model.nodes[node_id].p_jam = static_cast<double>(n1) / static_cast<double>(n);

    const bool pure = (n1 == 0 || n1 == n);
    if (pure || depth >= params_.max_depth || n < 2 * static_cast<std::size_t>(params_.min_leaf)) {
      return node_id;
    }

    std::vector<int> features;
    if (rng_ && features_per_split_ < static_cast<int>(kFeatureCount)) {
      features = rng_->sample_indices(kFeatureCount, features_per_split_);
    } else {
      features.resize(kFeatureCount);
      std::iota(features.begin(), features.end(), 0);
    }

    const SplitChoice split = best_split(data_, idx, features, params_.min_leaf);
    if (!split.found) return node_id;

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(n);
    right_idx.reserve(n);
    for (int i : idx) {
      (data_.x[i][split.feature] <= split.threshold ? left_idx : right_idx).push_back(i);
    }

    model.nodes[node_id].feature = split.feature;
    model.nodes[node_id].threshold = split.threshold;
    const int left = build(model, left_idx, depth + 1);
    model.nodes[node_id].left = left;
    const int right = build(model, right_idx, depth + 1);
    model.nodes[node_id].right = right;
    return node_id;
  }

 private:
  const LabeledMatrix& data_;
  const TreeParams& params_;
  Rng* rng_;
  int features_per_split_;
};

void check_train_input(const LabeledMatrix& train) {
  if (train.x.empty()) throw ValidationError("train: empty input");
  if (train.x.size() != train.y.size()) {
    throw ValidationError("train: feature/label count mismatch");
  }
  for (int label : train.y) {
    if (label != 0 && label != 1) throw ValidationError("train: labels must be 0 or 1");
  }
}

}  // namespace

TreeModel train_tree(const LabeledMatrix& train, const TreeParams& params) {
  check_train_input(train);
  TreeModel model;
  std::vector<int> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  TreeBuilder builder(train, params, nullptr, static_cast<int>(kFeatureCount));
  builder.build(model, idx, 0);
  return model;
}

ForestModel train_forest(const LabeledMatrix& train, const ForestParams& params) {
  check_train_input(train);
  if (params.n_trees < 1) throw ValidationError("train_forest: n_trees must be >= 1");
  if (params.features_per_split < 1 ||
      params.features_per_split > static_cast<int>(kFeatureCount)) {
    throw ValidationError("train_forest: features_per_split out of range");
  }

  ForestModel model;
  model.params = params;
  model.trees.reserve(params.n_trees);
  const TreeParams tree_params{params.max_depth, params.min_leaf};

  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
    std::vector<int> idx(train.size());
    if (params.bootstrap) {
      for (auto& i : idx) i = static_cast<int>(rng.index(train.size()));
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    TreeModel tree;
    TreeBuilder builder(train, tree_params, &rng, params.features_per_split);
    builder.build(tree, idx, 0);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double raw_score(const LinearModel& m, const FeatureVector& x) {
  double z = m.bias;
  for (std::size_t f = 0; f < kFeatureCount; ++f) z += m.weights[f] * x[f];
  return z;
}

}  // namespace

double logreg_loss(const LinearModel& m, const LabeledMatrix& data, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double z = raw_score(m, data.x[i]);
    const double y = static_cast<double>(data.y[i]);
    // max(z,0) - z*y + log(1 + exp(-|z|)), the stable cross-entropy form
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<double>(data.size());
  double reg = 0.0;
  for (double w : m.weights) reg += w * w;
  return loss + 0.5 * l2 * reg;
}

void logreg_gradient(const LinearModel& m, const LabeledMatrix& data, double l2,
                     FeatureVector& grad_w, double& grad_b) {
  grad_w.fill(0.0);
  grad_b = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double err = sigmoid(raw_score(m, data.x[i])) - static_cast<double>(data.y[i]);
    for (std::size_t f = 0; f < kFeatureCount; ++f) grad_w[f] += err * data.x[i][f];
    grad_b += err;
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t f = 0; f < kFeatureCount; ++f) grad_w[f] = grad_w[f] * inv_n + l2 * m.weights[f];
  grad_b *= inv_n;
}

LinearModel train_logreg(const LabeledMatrix& train, const LogRegParams& params) {
  check_train_input(train);
  LinearModel model;
  double loss = logreg_loss(model, train, params.l2);
  model.loss_history.push_back(loss);

  FeatureVector grad_w;
  double grad_b = 0.0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    logreg_gradient(model, train, params.l2, grad_w, grad_b);
    double step = params.learning_rate;
    LinearModel next = model;
    for (int half = 0; half < 60; ++half) {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        next.weights[f] = model.weights[f] - step * grad_w[f];
      }
      next.bias = model.bias - step * grad_b;
      const double next_loss = logreg_loss(next, train, params.l2);
      if (!std::isfinite(next_loss)) {
        throw TrainingError("train_logreg: loss diverged; use a smaller learning_rate");
      }
      if (next_loss <= loss + 1e-9) {
        loss = next_loss;
        break;
      }
      step *= 0.5;  // backtrack: keep the per-epoch loss non-increasing
    }
    next.loss_history = std::move(model.loss_history);
    model = std::move(next);
    model.loss_history.push_back(loss);
  }
  for (double w : model.weights) {
    if (!std::isfinite(w)) {
      throw TrainingError("train_logreg: weights diverged; use a smaller learning_rate");
    }
  }
  return model;
}

GnbModel train_gnb(const LabeledMatrix& train) {
  check_train_input(train);
  std::array<std::size_t, 2> counts{};
  for (int y : train.y) ++counts[static_cast<std::size_t>(y)];
  if (counts[0] == 0 || counts[1] == 0) {
    throw ValidationError("train_gnb: both classes must be present");
  }

  GnbModel m;
  FeatureVector global_min, global_max;
  global_min.fill(std::numeric_limits<double>::infinity());
  global_max.fill(-std::numeric_limits<double>::infinity());

  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::size_t c = static_cast<std::size_t>(train.y[i]);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      m.mean[c][f] += train.x[i][f];
      global_min[f] = std::min(global_min[f], train.x[i][f]);
      global_max[f] = std::max(global_max[f], train.x[i][f]);
    }
  }
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      m.mean[c][f] /= static_cast<double>(counts[c]);
    }
  }
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::size_t c = static_cast<std::size_t>(train.y[i]);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const double d = train.x[i][f] - m.mean[c][f];
      m.variance[c][f] += d * d;
    }
  }
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const double range = global_max[f] - global_min[f];
      const double floor = std::max(1e-9 * range, 1e-12);
      m.variance[c][f] = std::max(m.variance[c][f] / static_cast<double>(counts[c]), floor);
    }
    m.prior[c] = static_cast<double>(counts[c]) / static_cast<double>(train.size());
  }
  return m;
}

std::array<double, 2> gnb_posterior(const GnbModel& m, const FeatureVector& x) {
  std::array<double, 2> log_post{};
  for (std::size_t c = 0; c < 2; ++c) {
    double lp = std::log(m.prior[c]);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const double var = m.variance[c][f];
      const double d = x[f] - m.mean[c][f];
      lp += -0.5 * std::log(2.0 * M_PI * var) - d * d / (2.0 * var);
    }
    log_post[c] = lp;
  }
  const double mx = std::max(log_post[0], log_post[1]);
  const double e0 = std::exp(log_post[0] - mx);
  const double e1 = std::exp(log_post[1] - mx);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

KnnModel fit_knn(const LabeledMatrix& train, int k) {
  check_train_input(train);
  if (k < 1) throw ValidationError("fit_knn: k must be >= 1");
  if (static_cast<std::size_t>(k) > train.size()) {
    throw ValidationError("fit_knn: k exceeds training size");
  }

  KnnModel m;
  m.k = k;
  m.labels = train.y;
  m.feat_min.fill(std::numeric_limits<double>::infinity());
  m.feat_max.fill(-std::numeric_limits<double>::infinity());
  for (const auto& row : train.x) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      m.feat_min[f] = std::min(m.feat_min[f], row[f]);
      m.feat_max[f] = std::max(m.feat_max[f], row[f]);
    }
  }
  auto scale = [&](const FeatureVector& row) {
    FeatureVector out{};
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const double range = m.feat_max[f] - m.feat_min[f];
      out[f] = range > 0.0 ? std::clamp((row[f] - m.feat_min[f]) / range, 0.0, 1.0) : 0.0;
    }
    return out;
  };
  m.rows.reserve(train.size());
  for (const auto& row : train.x) m.rows.push_back(scale(row));
  return m;
}

double predict_score(const TreeModel& m, const FeatureVector& x) {
  if (m.nodes.empty()) throw ValidationError("predict_score: untrained tree");
  int node = 0;
  while (m.nodes[node].feature >= 0) {
    const auto& nd = m.nodes[node];
    node = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return m.nodes[node].p_jam;
}

double predict_score(const ForestModel& m, const FeatureVector& x) {
  if (m.trees.empty()) throw ValidationError("predict_score: untrained forest");
  double sum = 0.0;
  for (const auto& tree : m.trees) sum += predict_score(tree, x);
  return sum / static_cast<double>(m.trees.size());
}

double predict_score(const LinearModel& m, const FeatureVector& x) {
  return sigmoid(raw_score(m, x));
}

double predict_score(const GnbModel& m, const FeatureVector& x) {
  return gnb_posterior(m, x)[1];
}

double predict_score(const KnnModel& m, const FeatureVector& x) {
  if (m.rows.empty()) throw ValidationError("predict_score: untrained knn");
  FeatureVector q{};
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const double range = m.feat_max[f] - m.feat_min[f];
    q[f] = range > 0.0 ? std::clamp((x[f] - m.feat_min[f]) / range, 0.0, 1.0) : 0.0;
  }
  std::vector<std::pair<double, std::size_t>> dist(m.rows.size());
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    double d2 = 0.0;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const double d = m.rows[i][f] - q[f];
      d2 += d * d;
    }
    dist[i] = {d2, i};
  }
  const std::size_t k = static_cast<std::size_t>(m.k);
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  double jam = 0.0;
  for (std::size_t i = 0; i < k; ++i) jam += static_cast<double>(m.labels[dist[i].second]);
  return jam / static_cast<double>(k);
}

}  // namespace jamdet
