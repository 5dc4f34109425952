#include "jamdet/bnm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace jamdet {

using json = nlohmann::json;

int Bnm::node_index(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) throw ValidationError("bnm: unknown node '" + name + "'");
  return it->second;
}

int Bnm::state_index(int node, const std::string& state) const {
  const auto& states = nodes[node].states;
  auto it = std::find(states.begin(), states.end(), state);
  if (it == states.end()) {
    throw ValidationError("bnm: node '" + nodes[node].name + "' has no state '" + state + "'");
  }
  return static_cast<int>(it - states.begin());
}

namespace {

constexpr double kRowSumTolerance = 1e-9;

std::size_t cpt_rows_expected(const std::vector<NodeSpec>& specs, const NodeSpec& spec) {
  std::size_t rows = 1;
  for (const auto& parent : spec.parents) {
    auto it = std::find_if(specs.begin(), specs.end(),
                           [&](const NodeSpec& s) { return s.name == parent; });
    if (it == specs.end()) {
      throw ValidationError("bnm: node '" + spec.name + "' references unknown parent '" + parent +
                            "'");
    }
    rows *= it->states.size();
  }
  return rows;
}

}  // namespace

Bnm build_bnm(const std::vector<NodeSpec>& specs) {
  if (specs.empty()) throw ValidationError("bnm: no nodes");

  std::map<std::string, std::size_t> spec_index;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const NodeSpec& s = specs[i];
    if (spec_index.count(s.name)) throw ValidationError("bnm: duplicate node '" + s.name + "'");
    spec_index[s.name] = i;
    if (s.states.size() < 2) {
      throw ValidationError("bnm: node '" + s.name + "' needs at least 2 states");
    }
    const std::size_t rows = cpt_rows_expected(specs, s);
    if (s.cpt.size() != rows) {
      throw ValidationError("bnm: node '" + s.name + "' has an incomplete CPT (" +
                            std::to_string(s.cpt.size()) + " rows, expected " +
                            std::to_string(rows) + ")");
    }
    for (const auto& row : s.cpt) {
      if (row.size() != s.states.size()) {
        throw ValidationError("bnm: node '" + s.name + "' has a CPT row of wrong width");
      }
      double sum = 0.0;
      for (double p : row) {
        if (p < 0.0 || p > 1.0) {
          throw ValidationError("bnm: node '" + s.name + "' has a CPT entry outside [0,1]");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw ValidationError("bnm: node '" + s.name + "' has a CPT row summing to " +
                              std::to_string(sum));
      }
    }
  }

  // Kahn topological sort; leftovers name the cycle.
  std::vector<std::size_t> in_degree(specs.size(), 0);
  std::vector<std::vector<std::size_t>> children(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (const auto& parent : specs[i].parents) {
      children[spec_index[parent]].push_back(i);
      ++in_degree[i];
    }
  }
  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (in_degree[i] == 0) ready.push_back(i);
  }
  while (!ready.empty()) {
    const std::size_t i = ready.front();
    ready.erase(ready.begin());
    order.push_back(i);
    for (std::size_t c : children[i]) {
      if (--in_degree[c] == 0) ready.push_back(c);
    }
  }
  if (order.size() != specs.size()) {
    std::string cycle;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (in_degree[i] > 0) {
        if (!cycle.empty()) cycle += " -> ";
        cycle += specs[i].name;
      }
    }
    throw ValidationError("bnm: graph has a cycle involving: " + cycle);
  }

  Bnm net;
  std::vector<int> new_index(specs.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) new_index[order[pos]] = static_cast<int>(pos);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const NodeSpec& s = specs[order[pos]];
    Bnm::Node node;
    node.name = s.name;
    node.states = s.states;
    for (const auto& parent : s.parents) {
      node.parents.push_back(new_index[spec_index[parent]]);
    }
    node.cpt = s.cpt;
    net.index[s.name] = static_cast<int>(pos);
    net.nodes.push_back(std::move(node));
  }
  return net;
}

Bnm default_network() {
  std::vector<NodeSpec> specs;
  specs.push_back({"Jamming", {"None", "CCH", "DCH"}, {}, {{0.90, 0.05, 0.05}}});
  specs.push_back({"InaccurateCQI",
                   {"F", "T"},
                   {"Jamming"},
                   {{0.98, 0.02}, {0.497, 0.503}, {0.98, 0.02}}});
  specs.push_back({"DataChannelJamming",
                   {"F", "T"},
                   {"Jamming"},
                   {{0.99, 0.01}, {0.98, 0.02}, {0.03, 0.97}}});
  // Given CCH jamming the measured marker rate is 0.845 regardless of the
  // CQI report; otherwise an inaccurate CQI alone mis-sets the MCS at the
  // same measured rate.
  specs.push_back({"McsVarianceIncrease",
                   {"F", "T"},
                   {"Jamming", "InaccurateCQI"},
                   {{0.97, 0.03},
                    {0.155, 0.845},
                    {0.155, 0.845},
                    {0.155, 0.845},
                    {0.97, 0.03},
                    {0.155, 0.845}}});
  // Placeholder rows pending calibration from data.
  specs.push_back({"ThroughputDecrease",
                   {"F", "T"},
                   {"McsVarianceIncrease", "DataChannelJamming"},
                   {{0.95, 0.05}, {0.10, 0.90}, {0.30, 0.70}, {0.03, 0.97}}});
  return build_bnm(specs);
}

namespace {

std::size_t cpt_row(const Bnm& net, const Bnm::Node& node, const std::vector<int>& states) {
  std::size_t row = 0;
  for (int parent : node.parents) {
    row = row * net.nodes[parent].states.size() + static_cast<std::size_t>(states[parent]);
  }
  return row;
}

double joint_of(const Bnm& net, const std::vector<int>& states) {
  double p = 1.0;
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    const Bnm::Node& node = net.nodes[i];
    p *= node.cpt[cpt_row(net, node, states)][static_cast<std::size_t>(states[i])];
  }
  return p;
}

std::vector<int> resolve_evidence(const Bnm& net, const Evidence& evidence) {
  std::vector<int> fixed(net.nodes.size(), -1);
  for (const auto& [name, state] : evidence) {
    const int node = net.node_index(name);
    fixed[node] = net.state_index(node, state);
  }
  return fixed;
}

// Enumerate all assignments consistent with `fixed` (-1 = free), invoking
// visit(states, joint probability).
template <typename Visit>
void enumerate(const Bnm& net, const std::vector<int>& fixed, Visit&& visit) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    if (fixed[i] < 0) {
      total *= net.nodes[i].states.size();
      if (total > (1u << 22)) {
        throw ValidationError("bnm: network too large for exact enumeration");
      }
    }
  }
  std::vector<int> states(net.nodes.size(), 0);
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    if (fixed[i] >= 0) states[i] = fixed[i];
  }
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rem = code;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
      if (fixed[i] < 0) {
        const std::size_t card = net.nodes[i].states.size();
        states[i] = static_cast<int>(rem % card);
        rem /= card;
      }
    }
    visit(states, joint_of(net, states));
  }
}

}  // namespace

double joint(const Bnm& net, const Evidence& assignment) {
  std::vector<int> states(net.nodes.size(), -1);
  for (const auto& [name, state] : assignment) {
    const int node = net.node_index(name);
    states[node] = net.state_index(node, state);
  }
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    if (states[i] < 0) {
      throw ValidationError("joint: assignment is missing node '" + net.nodes[i].name + "'");
    }
  }
  return joint_of(net, states);
}

double query(const Bnm& net, const std::string& target_node, const std::string& target_state,
             const Evidence& evidence) {
  if (evidence.count(target_node)) {
    throw ValidationError("query: target '" + target_node + "' is already in the evidence");
  }
  const int target = net.node_index(target_node);
  const int target_idx = net.state_index(target, target_state);

  const std::vector<int> fixed = resolve_evidence(net, evidence);
  double numerator = 0.0, denominator = 0.0;
  enumerate(net, fixed, [&](const std::vector<int>& states, double p) {
    denominator += p;
    if (states[target] == target_idx) numerator += p;
  });
  if (denominator <= 0.0) {
    throw ValidationError("query: evidence has zero probability; conditional is undefined");
  }
  return numerator / denominator;
}

std::vector<std::pair<std::string, double>> posterior_root(const Bnm& net,
                                                           const Evidence& evidence) {
  const int root = net.node_index(net.root_cause);
  if (evidence.count(net.root_cause)) {
    throw ValidationError("posterior_root: root cause is already observed");
  }
  const std::vector<int> fixed = resolve_evidence(net, evidence);
  std::vector<double> mass(net.nodes[root].states.size(), 0.0);
  double total = 0.0;
  enumerate(net, fixed, [&](const std::vector<int>& states, double p) {
    mass[static_cast<std::size_t>(states[root])] += p;
    total += p;
  });
  if (total <= 0.0) {
    throw ValidationError("posterior_root: evidence has zero probability");
  }
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t s = 0; s < mass.size(); ++s) {
    out.push_back({net.nodes[root].states[s], mass[s] / total});
  }
  return out;
}

double fuse(double detector_score, const Bnm& net, const Evidence& side_evidence) {
  if (detector_score < 0.0 || detector_score > 1.0 || !std::isfinite(detector_score)) {
    throw ValidationError("fuse: detector score must be in [0,1]");
  }

  const int root = net.node_index(net.root_cause);
  const int clean = net.state_index(root, net.root_clean_state);

  auto jam_mass = [&](const Evidence& e) {
    double p = 0.0;
    for (const auto& [state, prob] : posterior_root(net, e)) {
      if (state != net.nodes[root].states[static_cast<std::size_t>(clean)]) p += prob;
    }
    return p;
  };

  const double prior = jam_mass({});
  if (prior <= 0.0 || prior >= 1.0) {
    throw ValidationError("fuse: degenerate prior P(jamming) = " + std::to_string(prior));
  }
  const double posterior = jam_mass(side_evidence);

  if (detector_score == 0.0 || detector_score == 1.0) return detector_score;
  if (posterior >= 1.0) return 1.0;
  if (posterior <= 0.0) return 0.0;

  const double odds = detector_score / (1.0 - detector_score);
  const double ratio = (posterior / (1.0 - posterior)) / (prior / (1.0 - prior));
  const double fused = odds * ratio;
  return std::clamp(fused / (1.0 + fused), 0.0, 1.0);
}

namespace {

std::string cpt_key(const Bnm& net, const Bnm::Node& node, std::size_t row) {
  if (node.parents.empty()) return "";
  std::vector<std::size_t> digits(node.parents.size());
  std::size_t rem = row;
  for (std::size_t p = node.parents.size(); p-- > 0;) {
    const std::size_t card = net.nodes[node.parents[p]].states.size();
    digits[p] = rem % card;
    rem /= card;
  }
  std::string key;
  for (std::size_t p = 0; p < node.parents.size(); ++p) {
    if (p) key += ',';
    key += net.nodes[node.parents[p]].states[digits[p]];
  }
  return key;
}

}  // namespace

Bnm parse_network(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("bnm: invalid JSON");

  std::vector<NodeSpec> specs;
  std::map<std::string, std::vector<std::string>> states_by_name;
  for (const json& n : j.value("nodes", json::array())) {
    NodeSpec spec;
    spec.name = n.at("name").get<std::string>();
    spec.states = n.at("states").get<std::vector<std::string>>();
    spec.parents = n.value("parents", std::vector<std::string>{});
    states_by_name[spec.name] = spec.states;

    const json& cpt = n.at("cpt");
    std::size_t rows = 1;
    std::vector<std::size_t> cards;
    for (const auto& parent : spec.parents) {
      auto it = states_by_name.find(parent);
      if (it == states_by_name.end()) {
        throw ValidationError("bnm: node '" + spec.name + "' lists parent '" + parent +
                              "' before its definition");
      }
      cards.push_back(it->second.size());
      rows *= it->second.size();
    }
    spec.cpt.resize(rows);
    for (std::size_t row = 0; row < rows; ++row) {
      std::string key;
      std::size_t rem = row;
      std::vector<std::size_t> digits(spec.parents.size());
      for (std::size_t p = spec.parents.size(); p-- > 0;) {
        digits[p] = rem % cards[p];
        rem /= cards[p];
      }
      for (std::size_t p = 0; p < spec.parents.size(); ++p) {
        if (p) key += ',';
        key += states_by_name[spec.parents[p]][digits[p]];
      }
      if (!cpt.contains(key)) {
        throw ValidationError("bnm: node '" + spec.name + "' CPT is missing row '" + key + "'");
      }
      spec.cpt[row] = cpt.at(key).get<std::vector<double>>();
    }
    specs.push_back(std::move(spec));
  }

  Bnm net = build_bnm(specs);
  net.root_cause = j.value("root_cause", std::string("Jamming"));
  net.sentinel = j.value("sentinel", std::string("ThroughputDecrease"));
  net.root_clean_state = j.value("root_clean_state", std::string("None"));
  net.node_index(net.root_cause);
  net.state_index(net.node_index(net.root_cause), net.root_clean_state);
  return net;
}

Bnm load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open network file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_network(buf.str());
}

std::string network_to_json(const Bnm& net) {
  json j;
  j["format"] = "jamdet-bnm";
  j["version"] = 1;
  j["root_cause"] = net.root_cause;
  j["sentinel"] = net.sentinel;
  j["root_clean_state"] = net.root_clean_state;
  j["nodes"] = json::array();
  for (const auto& node : net.nodes) {
    json n;
    n["name"] = node.name;
    n["states"] = node.states;
    json parents = json::array();
    for (int p : node.parents) parents.push_back(net.nodes[p].name);
    n["parents"] = parents;
    json cpt = json::object();
    for (std::size_t row = 0; row < node.cpt.size(); ++row) {
      cpt[cpt_key(net, node, row)] = node.cpt[row];
    }
    n["cpt"] = cpt;
    j["nodes"].push_back(n);
  }
  return j.dump(2) + "\n";
}

}  // namespace jamdet
