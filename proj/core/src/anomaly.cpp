#include "jamdet/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "jamdet/random.hpp"

namespace jamdet {

namespace {

// Pearson correlation matrix; constant features get correlation 0 with
// everything (and 1 with themselves).
std::array<std::array<double, kFeatureCount>, kFeatureCount> correlation(
    const std::vector<FeatureVector>& rows) {
  const double n = static_cast<double>(rows.size());
  std::array<double, kFeatureCount> mean{};
  for (const auto& r : rows) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) mean[f] += r[f];
  }
  for (auto& m : mean) m /= n;

  std::array<std::array<double, kFeatureCount>, kFeatureCount> cov{};
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const double di = r[i] - mean[i];
      for (std::size_t j = i; j < kFeatureCount; ++j) {
        cov[i][j] += di * (r[j] - mean[j]);
      }
    }
  }
  std::array<std::array<double, kFeatureCount>, kFeatureCount> corr{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    for (std::size_t j = i; j < kFeatureCount; ++j) {
      const double denom = std::sqrt(cov[i][i] * cov[j][j]);
      const double r = (i == j) ? 1.0 : (denom > 0.0 ? cov[i][j] / denom : 0.0);
      corr[i][j] = r;
      corr[j][i] = r;
    }
  }
  return corr;
}

}  // namespace

FeatureClustering cluster_features(const std::vector<FeatureVector>& prefix,
                                   int max_cluster_size) {
  if (prefix.size() < 2) throw ValidationError("cluster_features: need at least 2 rows");
  if (max_cluster_size < 1) throw ValidationError("cluster_features: max_cluster_size must be >= 1");

  const auto corr = correlation(prefix);
  auto dist = [&](int i, int j) { return 1.0 - std::abs(corr[i][j]); };

  std::vector<std::vector<int>> clusters;
  for (std::size_t f = 0; f < kFeatureCount; ++f) clusters.push_back({static_cast<int>(f)});

  // Complete-linkage agglomeration; stops when the cheapest remaining merge
  // would exceed max_cluster_size.
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        double d = 0.0;
        for (int a : clusters[i]) {
          for (int b : clusters[j]) d = std::max(d, dist(a, b));
        }
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (clusters[bi].size() + clusters[bj].size() > static_cast<std::size_t>(max_cluster_size)) {
      break;
    }
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    std::sort(clusters[bi].begin(), clusters[bi].end());
    clusters.erase(clusters.begin() + bj);
  }

  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return {clusters};
}

namespace {

AutoEncoder make_ae(int input, double beta, std::uint64_t seed) {
  const int hidden = std::max(1, static_cast<int>(std::ceil(beta * input)));
  AutoEncoder ae;
  ae.w_enc = Mat(hidden, input);
  ae.b_hidden.assign(hidden, 0.0);
  ae.w_dec = Mat(input, hidden);
  ae.b_out.assign(input, 0.0);
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input));
  for (double& v : ae.w_enc.a) v = (2.0 * rng.uniform() - 1.0) * bound;
  for (double& v : ae.w_dec.a) v = (2.0 * rng.uniform() - 1.0) * bound;
  return ae;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct AePass {
  std::vector<double> hidden;
  std::vector<double> out;
  double rmse = 0.0;
};

AePass ae_forward(const AutoEncoder& ae, const std::vector<double>& x) {
  AePass p;
  p.hidden = matvec(ae.w_enc, x);
  for (std::size_t j = 0; j < p.hidden.size(); ++j) p.hidden[j] = sigmoid(p.hidden[j] + ae.b_hidden[j]);
  p.out = matvec(ae.w_dec, p.hidden);
  double err = 0.0;
  for (std::size_t i = 0; i < p.out.size(); ++i) {
    p.out[i] = sigmoid(p.out[i] + ae.b_out[i]);
    const double d = p.out[i] - x[i];
    err += d * d;
  }
  p.rmse = std::sqrt(err / static_cast<double>(x.size()));
  return p;
}

// One SGD step on the mean squared reconstruction error.
void ae_update(AutoEncoder& ae, const std::vector<double>& x, const AePass& p, double lr) {
  const std::size_t c = x.size();
  std::vector<double> da_out(c);
  for (std::size_t i = 0; i < c; ++i) {
    const double dl = 2.0 * (p.out[i] - x[i]) / static_cast<double>(c);
    da_out[i] = dl * p.out[i] * (1.0 - p.out[i]);
  }
  std::vector<double> dh = matvec_t(ae.w_dec, da_out);
  add_outer(ae.w_dec, da_out, p.hidden, -lr);
  axpy(ae.b_out, da_out, -lr);
  for (std::size_t j = 0; j < dh.size(); ++j) dh[j] *= p.hidden[j] * (1.0 - p.hidden[j]);
  add_outer(ae.w_enc, dh, x, -lr);
  axpy(ae.b_hidden, dh, -lr);
}

template <typename Vec>
std::vector<double> gather(const Vec& x, const std::vector<int>& idx) {
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = x[idx[i]];
  return out;
}

void minmax_update(std::vector<double>& lo, std::vector<double>& hi,
                   const std::vector<double>& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo[i] = std::min(lo[i], x[i]);
    hi[i] = std::max(hi[i], x[i]);
  }
}

std::vector<double> minmax_apply(const std::vector<double>& lo, const std::vector<double>& hi,
                                 const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double range = hi[i] - lo[i];
    out[i] = range > 0.0 ? std::clamp((x[i] - lo[i]) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

// Member RMSE vector for an already-normalized feature vector.
std::vector<double> member_rmses(const EnsembleAe& m, const std::vector<double>& norm_x) {
  std::vector<double> v(m.members.size());
  for (std::size_t j = 0; j < m.members.size(); ++j) {
    const std::vector<double> sub = gather(norm_x, m.clustering.clusters[j]);
    v[j] = ae_forward(m.members[j], sub).rmse;
  }
  return v;
}

}  // namespace

EnsembleAe train_ensemble(const std::vector<FeatureVector>& stream, const AeParams& params) {
  if (stream.size() < 20) throw ValidationError("train_ensemble: stream must have >= 20 records");
  if (params.fm_fraction <= 0.0 || params.fm_fraction >= 1.0) {
    throw ValidationError("train_ensemble: fm_fraction must be in (0,1)");
  }

  EnsembleAe model;
  model.params = params;
  model.fm_count = static_cast<std::size_t>(params.fm_fraction * static_cast<double>(stream.size()));
  if (model.fm_count < 2) model.fm_count = 2;

  // Feature-mapping phase: the prefix fixes the clustering and nothing else.
  const std::vector<FeatureVector> prefix(stream.begin(), stream.begin() + model.fm_count);
  model.clustering = cluster_features(prefix, params.max_cluster_size);

  const std::size_t d = model.clustering.clusters.size();
  for (std::size_t j = 0; j < d; ++j) {
    model.members.push_back(make_ae(static_cast<int>(model.clustering.clusters[j].size()),
                                    params.beta, derive_seed(params.seed, j)));
  }
  model.output = make_ae(static_cast<int>(d), params.beta, derive_seed(params.seed, 1000));

  // Streaming single-pass SGD over the remaining records. Normalization state
  // grows online from these records only, so the feature-mapping prefix can
  // never move a weight.
  model.feat_min.fill(std::numeric_limits<double>::infinity());
  model.feat_max.fill(-std::numeric_limits<double>::infinity());
  model.rmse_min.assign(d, std::numeric_limits<double>::infinity());
  model.rmse_max.assign(d, -std::numeric_limits<double>::infinity());

  double sum_s = 0.0;
  for (std::size_t t = model.fm_count; t < stream.size(); ++t) {
    const FeatureVector& x = stream[t];
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      model.feat_min[f] = std::min(model.feat_min[f], x[f]);
      model.feat_max[f] = std::max(model.feat_max[f], x[f]);
    }
    FeatureVector norm{};
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const double range = model.feat_max[f] - model.feat_min[f];
      norm[f] = range > 0.0 ? std::clamp((x[f] - model.feat_min[f]) / range, 0.0, 1.0) : 0.0;
    }

    std::vector<double> rmses(d);
    for (std::size_t j = 0; j < d; ++j) {
      const std::vector<double> sub = gather(norm, model.clustering.clusters[j]);
      const AePass pass = ae_forward(model.members[j], sub);
      rmses[j] = pass.rmse;
      ae_update(model.members[j], sub, pass, params.lr);
    }

    minmax_update(model.rmse_min, model.rmse_max, rmses);
    const std::vector<double> norm_rmse = minmax_apply(model.rmse_min, model.rmse_max, rmses);
    const AePass out_pass = ae_forward(model.output, norm_rmse);
    sum_s += out_pass.rmse;
    ae_update(model.output, norm_rmse, out_pass, params.lr);
    ++model.train_count;
  }

  model.eta_scale = std::max(3.0 * sum_s / static_cast<double>(model.train_count), 1e-12);
  model.eta = 1.0;  // calibrate_threshold sets the operating point
  model.trained = true;
  return model;
}

double raw_rmse(const EnsembleAe& model, const FeatureVector& x) {
  if (!model.trained) throw ValidationError("score: ensemble is not trained");
  std::vector<double> norm(kFeatureCount);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const double range = model.feat_max[f] - model.feat_min[f];
    norm[f] = range > 0.0 ? std::clamp((x[f] - model.feat_min[f]) / range, 0.0, 1.0) : 0.0;
  }
  const std::vector<double> rmses = member_rmses(model, norm);
  const std::vector<double> norm_rmse = minmax_apply(model.rmse_min, model.rmse_max, rmses);
  return ae_forward(model.output, norm_rmse).rmse;
}

double score(const EnsembleAe& model, const FeatureVector& x) {
  return std::tanh(raw_rmse(model, x) / model.eta_scale);
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("nearest_rank_quantile: empty input");
  if (q <= 0.0 || q > 1.0) throw ValidationError("nearest_rank_quantile: q must be in (0,1]");
  std::sort(values.begin(), values.end());
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

double calibrate_threshold(EnsembleAe& model, const std::vector<FeatureVector>& clean_validation,
                           double quantile) {
  if (!model.trained) throw ValidationError("calibrate_threshold: ensemble is not trained");
  if (clean_validation.empty()) throw ValidationError("calibrate_threshold: empty validation set");

  std::vector<double> raw(clean_validation.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < clean_validation.size(); ++i) {
    raw[i] = raw_rmse(model, clean_validation[i]);
    mean += raw[i];
  }
  mean /= static_cast<double>(raw.size());
  model.eta_scale = std::max(3.0 * mean, 1e-12);

  std::vector<double> scores(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) scores[i] = std::tanh(raw[i] / model.eta_scale);
  model.eta = nearest_rank_quantile(std::move(scores), quantile);
  return model.eta;
}

double max_weight_delta(const EnsembleAe& a, const EnsembleAe& b) {
  if (!(a.clustering == b.clustering) || a.members.size() != b.members.size()) {
    return std::numeric_limits<double>::infinity();
  }
  double delta = 0.0;
  auto compare = [&delta](const AutoEncoder& x, const AutoEncoder& y) {
    if (!x.w_enc.same_shape(y.w_enc) || !x.w_dec.same_shape(y.w_dec)) {
      delta = std::numeric_limits<double>::infinity();
      return;
    }
    for (std::size_t i = 0; i < x.w_enc.a.size(); ++i) {
      delta = std::max(delta, std::abs(x.w_enc.a[i] - y.w_enc.a[i]));
    }
    for (std::size_t i = 0; i < x.w_dec.a.size(); ++i) {
      delta = std::max(delta, std::abs(x.w_dec.a[i] - y.w_dec.a[i]));
    }
    for (std::size_t i = 0; i < x.b_hidden.size(); ++i) {
      delta = std::max(delta, std::abs(x.b_hidden[i] - y.b_hidden[i]));
    }
    for (std::size_t i = 0; i < x.b_out.size(); ++i) {
      delta = std::max(delta, std::abs(x.b_out[i] - y.b_out[i]));
    }
  };
  for (std::size_t j = 0; j < a.members.size(); ++j) compare(a.members[j], b.members[j]);
  compare(a.output, b.output);
  return delta;
}

}  // namespace jamdet
