#pragma once

#include <string>
#include <variant>

#include "jamdet/anomaly.hpp"
#include "jamdet/classifiers.hpp"
#include "jamdet/temporal.hpp"

namespace jamdet {

/// Any persistable detector. Forest/tree/logreg/gnb/knn/ensemble_ae score
/// single records; lstm scores k-step windows.
using Model = std::variant<TreeModel, ForestModel, LinearModel, GnbModel, KnnModel, LstmModel,
                           EnsembleAe>;

/// The versioned kind tag ("tree", "forest", "logreg", "gnb", "knn", "lstm",
/// "ensemble_ae"). Field layout is documented in docs/model_schema.md.
std::string model_kind(const Model& model);

std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

/// Score one record with any instantaneous model; throws for lstm.
double score_record(const Model& model, const FeatureVector& x);

/// True when the model consumes windows rather than single records.
inline bool is_temporal(const Model& model) { return std::holds_alternative<LstmModel>(model); }

}  // namespace jamdet
