#include "jamdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jamdet/random.hpp"
#include "jamdet/simulator.hpp"

namespace jamdet {

using json = nlohmann::json;

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Largest-remainder allocation of round(fraction*N) train slots across
// groups, each within one sample of its proportional share.
std::vector<std::size_t> allocate_train_counts(const std::vector<std::size_t>& group_sizes,
                                               double fraction) {
  std::size_t total = 0;
  for (std::size_t g : group_sizes) total += g;
  const std::size_t target = static_cast<std::size_t>(std::llround(fraction * total));

  std::vector<std::size_t> take(group_sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;  // (-remainder, group)
  std::size_t allocated = 0;
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    const double quota = fraction * static_cast<double>(group_sizes[g]);
    take[g] = static_cast<std::size_t>(quota);
    allocated += take[g];
    remainders.push_back({-(quota - static_cast<double>(take[g])), g});
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; i < remainders.size() && allocated < target; ++i) {
    const std::size_t g = remainders[i].second;
    if (take[g] < group_sizes[g]) {
      ++take[g];
      ++allocated;
    }
  }
  return take;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0) {
    throw ValidationError("split: train_fraction must be in (0,1)");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    groups[data.records[i].label.key()].push_back(i);
  }
  std::vector<std::size_t> sizes;
  for (const auto& [key, idx] : groups) {
    if (idx.size() < 2) {
      throw ValidationError("split: label '" + key + "' has fewer than 2 samples");
    }
    sizes.push_back(idx.size());
  }
  const std::vector<std::size_t> take = allocate_train_counts(sizes, train_fraction);

  std::vector<bool> in_train(data.size(), false);
  std::size_t g = 0;
  for (auto& [key, idx] : groups) {
    Rng rng(derive_seed(seed, g));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < take[g]; ++i) in_train[idx[i]] = true;
    ++g;
  }

  Dataset train, test;
  train.source = data.source + ":train";
  test.source = data.source + ":test";
  for (std::size_t i = 0; i < data.size(); ++i) {
    (in_train[i] ? train : test).records.push_back(data.records[i]);
  }
  return {std::move(train), std::move(test)};
}

EvalReport metrics(std::span<const double> scores, std::span<const int> labels, double eta,
                   std::string scenario) {
  if (scores.size() != labels.size()) throw ValidationError("metrics: length mismatch");
  if (scores.empty()) throw ValidationError("metrics: empty input");

  EvalReport r;
  r.threshold = eta;
  r.scenario = std::move(scenario);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = decide(scores[i], eta);
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++r.tp;
    else if (predicted && !actual) ++r.fp;
    else if (!predicted && actual) ++r.fn;
    else ++r.tn;
  }
  const double n = static_cast<double>(scores.size());
  r.accuracy = static_cast<double>(r.tp + r.tn) / n;
  r.precision = (r.tp + r.fp) == 0 ? 0.0 : static_cast<double>(r.tp) / (r.tp + r.fp);
  r.recall = (r.tp + r.fn) == 0 ? 0.0 : static_cast<double>(r.tp) / (r.tp + r.fn);
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

RocCurve roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("roc: length mismatch");
  std::size_t pos = 0;
  for (int y : labels) pos += (y != 0);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw ValidationError("roc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  // Trapezoid accumulated in count space so the AUC is exact and matches the
  // Mann-Whitney statistic to rounding.
  double area2 = 0.0;  // 2 * pos * neg * auc
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] != 0 ? tp : fp)++;
      ++i;
    }
    area2 += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  curve.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc_mann_whitney: length mismatch");
  std::size_t pos = 0;
  for (int y : labels) pos += (y != 0);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw ValidationError("auc_mann_whitney: both classes must be present");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Pair counting via tie-aware rank walk: each positive beats every negative
  // with a smaller score and ties count one half.
  double wins2 = 0.0;  // 2 * (#wins + 0.5 * #ties)
  std::size_t seen_neg = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::size_t tie_pos = 0, tie_neg = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] != 0 ? tie_pos : tie_neg)++;
      ++i;
    }
    wins2 += static_cast<double>(tie_pos) *
             (2.0 * static_cast<double>(seen_neg) + static_cast<double>(tie_neg));
    seen_neg += tie_neg;
  }
  return wins2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "tree") return ModelKind::Tree;
  if (name == "forest") return ModelKind::Forest;
  if (name == "logreg") return ModelKind::LogReg;
  if (name == "gnb") return ModelKind::Gnb;
  if (name == "knn") return ModelKind::Knn;
  if (name == "lstm") return ModelKind::Lstm;
  throw ValidationError("unknown model kind: " + name);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Tree: return "tree";
    case ModelKind::Forest: return "forest";
    case ModelKind::LogReg: return "logreg";
    case ModelKind::Gnb: return "gnb";
    case ModelKind::Knn: return "knn";
    case ModelKind::Lstm: return "lstm";
  }
  return "unknown";
}

namespace {

std::vector<std::string> jam_type_keys(const Dataset& campaign) {
  std::vector<std::string> keys;
  for (const auto& lr : campaign.records) {
    if (!lr.label.is_jam()) continue;
    const std::string key = lr.label.key();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  return keys;
}

// Stratified window split mirroring split() for window collections.
std::pair<std::vector<Window>, std::vector<Window>> split_windows(const std::vector<Window>& all,
                                                                  double fraction,
                                                                  std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < all.size(); ++i) groups[all[i].label.key()].push_back(i);
  std::vector<std::size_t> sizes;
  for (const auto& [key, idx] : groups) sizes.push_back(idx.size());
  const std::vector<std::size_t> take = allocate_train_counts(sizes, fraction);

  std::vector<bool> in_train(all.size(), false);
  std::size_t g = 0;
  for (auto& [key, idx] : groups) {
    Rng rng(derive_seed(seed, g));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < take[g]; ++i) in_train[idx[i]] = true;
    ++g;
  }
  std::pair<std::vector<Window>, std::vector<Window>> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (in_train[i] ? out.first : out.second).push_back(all[i]);
  }
  return out;
}

}  // namespace

PerTypeResult per_type_study(const Dataset& campaign, ModelKind kind, std::uint64_t seed,
                             const StudyHyper& hyper) {
  const std::vector<std::string> keys = jam_type_keys(campaign);
  if (keys.size() < 1) throw ValidationError("per_type_study: campaign has no jam scenarios");

  PerTypeResult result;

  if (kind == ModelKind::Lstm) {
    std::vector<Window> windows = segment_windows(campaign, hyper.window_k);
    auto [train_w, test_w] = split_windows(windows, hyper.train_fraction, seed);

    std::vector<FeatureVector> train_rows;
    for (const auto& w : train_w) {
      for (const auto& row : w.rows) train_rows.push_back(row);
    }
    const Normalizer norm = fit_normalizer(train_rows, NormMode::MinMax);
    normalize_windows(train_w, norm);
    normalize_windows(test_w, norm);

    std::uint64_t type_index = 0;
    for (const std::string& key : keys) {
      auto relabel = [&](std::vector<Window> src) {
        for (auto& w : src) {
          w.label = (w.label.key() == key) ? Label::jam(1, 0, 0, Channel::CCH) : Label::clean();
        }
        return src;
      };
      std::vector<Window> tw = relabel(train_w);
      std::vector<Window> sw = relabel(test_w);
      const auto has_both = [](const std::vector<Window>& ws) {
        bool pos = false, neg = false;
        for (const auto& w : ws) (w.label.is_jam() ? pos : neg) = true;
        return pos && neg;
      };
      if (!has_both(tw) || !has_both(sw)) {
        result.skipped.push_back(key);
        continue;
      }
      LstmParams p = hyper.lstm;
      p.seed = derive_seed(seed, 1000 + type_index++);
      const LstmModel model = lstm_train(tw, p);
      std::vector<double> scores;
      std::vector<int> labels;
      for (const auto& w : sw) {
        scores.push_back(lstm_forward(model, w)[1]);
        labels.push_back(w.label.is_jam() ? 1 : 0);
      }
      result.curves[key] = roc(scores, labels);
    }
    return result;
  }

  auto [train, test] = split(campaign, hyper.train_fraction, seed);
  const std::vector<FeatureVector> train_x = to_feature_matrix(train);
  const std::vector<FeatureVector> test_x = to_feature_matrix(test);
  const Normalizer norm = fit_normalizer(train_x, NormMode::MinMax);

  std::uint64_t type_index = 0;
  for (const std::string& key : keys) {
    LabeledMatrix tm, sm;
    tm.x = train_x;
    sm.x = test_x;
    for (const auto& lr : train.records) tm.y.push_back(lr.label.key() == key ? 1 : 0);
    for (const auto& lr : test.records) sm.y.push_back(lr.label.key() == key ? 1 : 0);
    const auto count_pos = [](const std::vector<int>& y) {
      return std::count(y.begin(), y.end(), 1);
    };
    if (count_pos(tm.y) == 0 || count_pos(sm.y) == 0 ||
        count_pos(tm.y) == static_cast<long>(tm.y.size())) {
      result.skipped.push_back(key);
      continue;
    }

    std::vector<double> scores(sm.x.size());
    switch (kind) {
      case ModelKind::Tree: {
        const TreeModel m = train_tree(tm, hyper.tree);
        for (std::size_t i = 0; i < sm.x.size(); ++i) scores[i] = predict_score(m, sm.x[i]);
        break;
      }
      case ModelKind::Forest: {
        ForestParams p = hyper.forest;
        p.seed = derive_seed(seed, 2000 + type_index);
        const ForestModel m = train_forest(tm, p);
        for (std::size_t i = 0; i < sm.x.size(); ++i) scores[i] = predict_score(m, sm.x[i]);
        break;
      }
      case ModelKind::LogReg: {
        LabeledMatrix tn = tm, sn = sm;
        for (auto& row : tn.x) row = apply_normalizer(norm, row);
        for (auto& row : sn.x) row = apply_normalizer(norm, row);
        const LinearModel m = train_logreg(tn, hyper.logreg);
        for (std::size_t i = 0; i < sn.x.size(); ++i) scores[i] = predict_score(m, sn.x[i]);
        break;
      }
      case ModelKind::Gnb: {
        const GnbModel m = train_gnb(tm);
        for (std::size_t i = 0; i < sm.x.size(); ++i) scores[i] = predict_score(m, sm.x[i]);
        break;
      }
      case ModelKind::Knn: {
        const KnnModel m = fit_knn(tm, hyper.knn_k);
        for (std::size_t i = 0; i < sm.x.size(); ++i) scores[i] = predict_score(m, sm.x[i]);
        break;
      }
      case ModelKind::Lstm:
        break;  // handled above
    }
    result.curves[key] = roc(scores, sm.y);
    ++type_index;
  }
  return result;
}

std::vector<PoisonCell> poison_study(const Dataset& clean_stream, const Dataset& jam_source,
                                     const Dataset& test_mix, std::span<const double> fractions,
                                     std::span<const double> stages, const AeParams& params) {
  for (double f : fractions) {
    if (f < 0.0 || f >= 1.0) throw ValidationError("poison_study: fractions must be in [0,1)");
  }
  for (double s : stages) {
    if (s < 0.0 || s >= 1.0) throw ValidationError("poison_study: stages must be in [0,1)");
  }

  const std::vector<FeatureVector> test_x = to_feature_matrix(test_mix);
  const std::vector<int> test_y = binary_labels(test_mix);

  std::vector<PoisonCell> grid;
  for (double fraction : fractions) {
    for (double stage : stages) {
      const Dataset poisoned = inject_poison(clean_stream, jam_source, fraction, stage);
      const EnsembleAe model = train_ensemble(to_feature_matrix(poisoned), params);
      std::vector<double> scores(test_x.size());
      for (std::size_t i = 0; i < test_x.size(); ++i) scores[i] = score(model, test_x[i]);
      grid.push_back({fraction, stage, auc_mann_whitney(scores, test_y)});
    }
  }
  return grid;
}

std::string roc_to_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  for (const auto& [fpr, tpr] : curve.points) {
    out += fmt_double(fpr) + "," + fmt_double(tpr) + "\n";
  }
  return out;
}

std::string poison_grid_to_csv(std::span<const PoisonCell> grid) {
  std::string out = "fraction,stage,auc\n";
  for (const auto& cell : grid) {
    out += fmt_double(cell.fraction) + "," + fmt_double(cell.stage) + "," + fmt_double(cell.auc) +
           "\n";
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["accuracy"] = report.accuracy;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  j["confusion"] = {{"tp", report.tp}, {"fp", report.fp}, {"tn", report.tn}, {"fn", report.fn}};
  j["threshold"] = report.threshold;
  j["scenario"] = report.scenario;
  return j.dump(2) + "\n";
}

}  // namespace jamdet
