#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jamdet/anomaly.hpp"
#include "jamdet/classifiers.hpp"
#include "jamdet/telemetry.hpp"
#include "jamdet/temporal.hpp"

namespace jamdet {

/// ROC points ordered from (0,0) to (1,1); auc is their trapezoidal integral.
struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
  double auc = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold = 0.5;
  std::string scenario;
};

/// Seeded, label-stratified shuffle split. |train| = round(fraction * N) and
/// every label's proportions are preserved within one sample.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Confusion metrics at threshold eta (positive = jam, decision = score > eta,
/// 0/0 precision and recall read as 0).
EvalReport metrics(std::span<const double> scores, std::span<const int> labels, double eta,
                   std::string scenario = "");

RocCurve roc(std::span<const double> scores, std::span<const int> labels);

/// AUC as the Mann-Whitney U statistic (ties count 1/2); the independent
/// route against the trapezoid.
double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels);

/// Windows over each contiguous same-label segment, so no window straddles a
/// scenario boundary.
std::vector<Window> segment_windows(const Dataset& campaign, int k);

enum class ModelKind { Tree, Forest, LogReg, Gnb, Knn, Lstm };

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

struct StudyHyper {
  TreeParams tree;
  ForestParams forest;
  LogRegParams logreg;
  int knn_k = 5;
  LstmParams lstm;
  double train_fraction = 0.75;
  int window_k = 2;
};

/// One-vs-rest study: for each jam type in the campaign, train the chosen
/// model on the train split (positive = that type) and report the test AUC.
/// Types whose split lacks both classes are skipped.
struct PerTypeResult {
  std::map<std::string, RocCurve> curves;  // keyed by Label::key()
  std::vector<std::string> skipped;
};

PerTypeResult per_type_study(const Dataset& campaign, ModelKind kind, std::uint64_t seed,
                             const StudyHyper& hyper = {});

/// Poisoning grid: inject_poison -> train_ensemble -> AUC on the labeled test
/// mix, one row per (fraction, stage). The ensemble seed is shared across
/// cells so the fraction-0 rows reproduce clean training bit-for-bit.
struct PoisonCell {
  double fraction = 0.0;
  double stage = 0.0;
  double auc = 0.0;
};

std::vector<PoisonCell> poison_study(const Dataset& clean_stream, const Dataset& jam_source,
                                     const Dataset& test_mix, std::span<const double> fractions,
                                     std::span<const double> stages, const AeParams& params);

/// CSV emission helpers (plot-ready, no rendering).
std::string roc_to_csv(const RocCurve& curve);
std::string poison_grid_to_csv(std::span<const PoisonCell> grid);
std::string report_to_json(const EvalReport& report);

}  // namespace jamdet
