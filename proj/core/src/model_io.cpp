#include "jamdet/model_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace jamdet {

using json = nlohmann::json;

namespace {

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const json& j) {
  Mat m(static_cast<int>(j.size()), j.empty() ? 0 : static_cast<int>(j[0].size()));
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json feature_vector_to_json(const FeatureVector& v) {
  return json(std::vector<double>(v.begin(), v.end()));
}

FeatureVector feature_vector_from_json(const json& j) {
  FeatureVector v{};
  for (std::size_t i = 0; i < kFeatureCount && i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

// Trees are persisted as nested nodes.
json tree_node_to_json(const TreeModel& tree, int index) {
  const TreeModel::Node& node = tree.nodes[index];
  json j;
  j["p_jam"] = node.p_jam;
  if (node.feature >= 0) {
    j["feature"] = node.feature;
    j["threshold"] = node.threshold;
    j["left"] = tree_node_to_json(tree, node.left);
    j["right"] = tree_node_to_json(tree, node.right);
  }
  return j;
}

int tree_node_from_json(const json& j, TreeModel& tree) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes[index].p_jam = j.at("p_jam").get<double>();
  if (j.contains("feature")) {
    tree.nodes[index].feature = j.at("feature").get<int>();
    tree.nodes[index].threshold = j.at("threshold").get<double>();
    const int left = tree_node_from_json(j.at("left"), tree);
    tree.nodes[index].left = left;
    const int right = tree_node_from_json(j.at("right"), tree);
    tree.nodes[index].right = right;
  }
  return index;
}

json ae_to_json(const AutoEncoder& ae) {
  json j;
  j["w_enc"] = mat_to_json(ae.w_enc);
  j["b_hidden"] = ae.b_hidden;
  j["w_dec"] = mat_to_json(ae.w_dec);
  j["b_out"] = ae.b_out;
  return j;
}

AutoEncoder ae_from_json(const json& j) {
  AutoEncoder ae;
  ae.w_enc = mat_from_json(j.at("w_enc"));
  ae.b_hidden = j.at("b_hidden").get<std::vector<double>>();
  ae.w_dec = mat_from_json(j.at("w_dec"));
  ae.b_out = j.at("b_out").get<std::vector<double>>();
  return ae;
}

struct JsonWriter {
  json operator()(const TreeModel& m) const {
    json j;
    j["kind"] = "tree";
    j["params"]["root"] = tree_node_to_json(m, 0);
    return j;
  }
  json operator()(const ForestModel& m) const {
    json j;
    j["kind"] = "forest";
    j["hyper"] = {{"n_trees", m.params.n_trees},
                  {"max_depth", m.params.max_depth},
                  {"min_leaf", m.params.min_leaf},
                  {"features_per_split", m.params.features_per_split},
                  {"bootstrap", m.params.bootstrap},
                  {"seed", m.params.seed}};
    json trees = json::array();
    for (const auto& tree : m.trees) trees.push_back(tree_node_to_json(tree, 0));
    j["params"]["trees"] = trees;
    return j;
  }
  json operator()(const LinearModel& m) const {
    json j;
    j["kind"] = "logreg";
    j["params"]["weights"] = feature_vector_to_json(m.weights);
    j["params"]["bias"] = m.bias;
    return j;
  }
  json operator()(const GnbModel& m) const {
    json j;
    j["kind"] = "gnb";
    j["params"]["mean"] = {feature_vector_to_json(m.mean[0]), feature_vector_to_json(m.mean[1])};
    j["params"]["variance"] = {feature_vector_to_json(m.variance[0]),
                               feature_vector_to_json(m.variance[1])};
    j["params"]["prior"] = m.prior;
    return j;
  }
  json operator()(const KnnModel& m) const {
    json j;
    j["kind"] = "knn";
    j["hyper"]["k"] = m.k;
    json rows = json::array();
    for (const auto& row : m.rows) rows.push_back(feature_vector_to_json(row));
    j["params"]["rows"] = rows;
    j["params"]["labels"] = m.labels;
    j["params"]["feat_min"] = feature_vector_to_json(m.feat_min);
    j["params"]["feat_max"] = feature_vector_to_json(m.feat_max);
    return j;
  }
  json operator()(const LstmModel& m) const {
    json j;
    j["kind"] = "lstm";
    j["hyper"] = {{"hidden", m.params.hidden},   {"fc", m.params.fc},
                  {"learning_rate", m.params.learning_rate}, {"epochs", m.params.epochs},
                  {"batch", m.params.batch},     {"clip_norm", m.params.clip_norm},
                  {"seed", m.params.seed},       {"input", m.input}};
    json& p = j["params"];
    p["w_input"] = mat_to_json(m.w_input);
    p["w_forget"] = mat_to_json(m.w_forget);
    p["w_output"] = mat_to_json(m.w_output);
    p["w_cell"] = mat_to_json(m.w_cell);
    p["b_input"] = m.b_input;
    p["b_forget"] = m.b_forget;
    p["b_output"] = m.b_output;
    p["b_cell"] = m.b_cell;
    p["w_fc"] = mat_to_json(m.w_fc);
    p["b_fc"] = m.b_fc;
    p["w_out"] = mat_to_json(m.w_out);
    p["b_out"] = m.b_out;
    p["feat_min"] = m.feat_min;
    p["feat_max"] = m.feat_max;
    return j;
  }
  json operator()(const EnsembleAe& m) const {
    json j;
    j["kind"] = "ensemble_ae";
    j["hyper"] = {{"fm_fraction", m.params.fm_fraction},
                  {"beta", m.params.beta},
                  {"lr", m.params.lr},
                  {"max_cluster_size", m.params.max_cluster_size},
                  {"seed", m.params.seed}};
    json& p = j["params"];
    p["clustering"] = m.clustering.clusters;
    json members = json::array();
    for (const auto& ae : m.members) members.push_back(ae_to_json(ae));
    p["members"] = members;
    p["output"] = ae_to_json(m.output);
    p["feat_min"] = feature_vector_to_json(m.feat_min);
    p["feat_max"] = feature_vector_to_json(m.feat_max);
    p["rmse_min"] = m.rmse_min;
    p["rmse_max"] = m.rmse_max;
    p["eta"] = m.eta;
    p["eta_scale"] = m.eta_scale;
    p["fm_count"] = m.fm_count;
    p["train_count"] = m.train_count;
    return j;
  }
};

}  // namespace

std::string model_kind(const Model& model) {
  return std::visit(JsonWriter{}, model).at("kind").get<std::string>();
}

std::string model_to_json(const Model& model) {
  json j = std::visit(JsonWriter{}, model);
  j["format"] = "jamdet-model";
  j["version"] = 1;
  return j.dump(2) + "\n";
}

Model model_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("model: invalid JSON");
  if (j.value("format", "") != "jamdet-model") {
    throw ValidationError("model: missing jamdet-model format tag");
  }
  if (j.value("version", 0) != 1) {
    throw ValidationError("model: unsupported version " + std::to_string(j.value("version", 0)));
  }
  const std::string kind = j.value("kind", "");
  const json& p = j.at("params");

  if (kind == "tree") {
    TreeModel m;
    tree_node_from_json(p.at("root"), m);
    return m;
  }
  if (kind == "forest") {
    ForestModel m;
    const json& h = j.at("hyper");
    m.params.n_trees = h.at("n_trees").get<int>();
    m.params.max_depth = h.at("max_depth").get<int>();
    m.params.min_leaf = h.at("min_leaf").get<int>();
    m.params.features_per_split = h.at("features_per_split").get<int>();
    m.params.bootstrap = h.at("bootstrap").get<bool>();
    m.params.seed = h.at("seed").get<std::uint64_t>();
    for (const json& t : p.at("trees")) {
      TreeModel tree;
      tree_node_from_json(t, tree);
      m.trees.push_back(std::move(tree));
    }
    return m;
  }
  if (kind == "logreg") {
    LinearModel m;
    m.weights = feature_vector_from_json(p.at("weights"));
    m.bias = p.at("bias").get<double>();
    return m;
  }
  if (kind == "gnb") {
    GnbModel m;
    m.mean = {feature_vector_from_json(p.at("mean")[0]),
              feature_vector_from_json(p.at("mean")[1])};
    m.variance = {feature_vector_from_json(p.at("variance")[0]),
                  feature_vector_from_json(p.at("variance")[1])};
    m.prior = p.at("prior").get<std::array<double, 2>>();
    return m;
  }
  if (kind == "knn") {
    KnnModel m;
    m.k = j.at("hyper").at("k").get<int>();
    for (const json& row : p.at("rows")) m.rows.push_back(feature_vector_from_json(row));
    m.labels = p.at("labels").get<std::vector<int>>();
    m.feat_min = feature_vector_from_json(p.at("feat_min"));
    m.feat_max = feature_vector_from_json(p.at("feat_max"));
    return m;
  }
  if (kind == "lstm") {
    LstmModel m;
    const json& h = j.at("hyper");
    m.params.hidden = h.at("hidden").get<int>();
    m.params.fc = h.at("fc").get<int>();
    m.params.learning_rate = h.at("learning_rate").get<double>();
    m.params.epochs = h.at("epochs").get<int>();
    m.params.batch = h.at("batch").get<int>();
    m.params.clip_norm = h.at("clip_norm").get<double>();
    m.params.seed = h.at("seed").get<std::uint64_t>();
    m.input = h.at("input").get<int>();
    m.hidden = m.params.hidden;
    m.fc = m.params.fc;
    m.w_input = mat_from_json(p.at("w_input"));
    m.w_forget = mat_from_json(p.at("w_forget"));
    m.w_output = mat_from_json(p.at("w_output"));
    m.w_cell = mat_from_json(p.at("w_cell"));
    m.b_input = p.at("b_input").get<std::vector<double>>();
    m.b_forget = p.at("b_forget").get<std::vector<double>>();
    m.b_output = p.at("b_output").get<std::vector<double>>();
    m.b_cell = p.at("b_cell").get<std::vector<double>>();
    m.w_fc = mat_from_json(p.at("w_fc"));
    m.b_fc = p.at("b_fc").get<std::vector<double>>();
    m.w_out = mat_from_json(p.at("w_out"));
    m.b_out = p.at("b_out").get<std::vector<double>>();
    m.feat_min = p.value("feat_min", std::vector<double>{});
    m.feat_max = p.value("feat_max", std::vector<double>{});
    return m;
  }
  if (kind == "ensemble_ae") {
    EnsembleAe m;
    const json& h = j.at("hyper");
    m.params.fm_fraction = h.at("fm_fraction").get<double>();
    m.params.beta = h.at("beta").get<double>();
    m.params.lr = h.at("lr").get<double>();
    m.params.max_cluster_size = h.at("max_cluster_size").get<int>();
    m.params.seed = h.at("seed").get<std::uint64_t>();
    m.clustering.clusters = p.at("clustering").get<std::vector<std::vector<int>>>();
    for (const json& ae : p.at("members")) m.members.push_back(ae_from_json(ae));
    m.output = ae_from_json(p.at("output"));
    m.feat_min = feature_vector_from_json(p.at("feat_min"));
    m.feat_max = feature_vector_from_json(p.at("feat_max"));
    m.rmse_min = p.at("rmse_min").get<std::vector<double>>();
    m.rmse_max = p.at("rmse_max").get<std::vector<double>>();
    m.eta = p.at("eta").get<double>();
    m.eta_scale = p.at("eta_scale").get<double>();
    m.fm_count = p.at("fm_count").get<std::size_t>();
    m.train_count = p.at("train_count").get<std::size_t>();
    m.trained = true;
    return m;
  }
  throw ValidationError("model: unknown kind '" + kind + "'");
}

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model file: " + path);
  out << model_to_json(model);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

double score_record(const Model& model, const FeatureVector& x) {
  return std::visit(
      [&x](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LstmModel>) {
          throw ValidationError("score_record: lstm models score windows, not single records");
        } else if constexpr (std::is_same_v<T, EnsembleAe>) {
          return score(m, x);
        } else {
          return predict_score(m, x);
        }
      },
      model);
}

}  // namespace jamdet
