#include "jamdet/bnm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "jamdet/random.hpp"

using namespace jamdet;

namespace {

// Brute-force test oracle: explicit joint table built with nested loops and
// chain-rule lookups, conditioned by summation.
struct JointTable {
  std::vector<std::vector<int>> assignments;
  std::vector<double> probability;
};

JointTable full_table(const Bnm& net) {
  JointTable table;
  std::size_t total = 1;
  for (const auto& node : net.nodes) total *= node.states.size();
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<int> states(net.nodes.size());
    std::size_t rem = code;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
      states[i] = static_cast<int>(rem % net.nodes[i].states.size());
      rem /= net.nodes[i].states.size();
    }
    double p = 1.0;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
      const auto& node = net.nodes[i];
      std::size_t row = 0;
      for (int parent : node.parents) {
        row = row * net.nodes[parent].states.size() + static_cast<std::size_t>(states[parent]);
      }
      p *= node.cpt[row][static_cast<std::size_t>(states[i])];
    }
    table.assignments.push_back(states);
    table.probability.push_back(p);
  }
  return table;
}

double oracle_query(const Bnm& net, const std::string& target, const std::string& state,
                    const Evidence& evidence) {
  const JointTable table = full_table(net);
  const int t = net.node_index(target);
  const int ts = net.state_index(t, state);
  double num = 0.0, den = 0.0;
  for (std::size_t row = 0; row < table.assignments.size(); ++row) {
    bool consistent = true;
    for (const auto& [name, st] : evidence) {
      const int n = net.node_index(name);
      if (table.assignments[row][n] != net.state_index(n, st)) {
        consistent = false;
        break;
      }
    }
    if (!consistent) continue;
    den += table.probability[row];
    if (table.assignments[row][t] == ts) num += table.probability[row];
  }
  return num / den;
}

// Random binary DAG with bounded parent counts and random CPTs.
Bnm random_dag(Rng& rng, int n_nodes) {
  std::vector<NodeSpec> specs;
  for (int i = 0; i < n_nodes; ++i) {
    NodeSpec s;
    s.name = "N" + std::to_string(i);
    s.states = {"F", "T"};
    for (int p = 0; p < i; ++p) {
      if (s.parents.size() < 3 && rng.uniform() < 0.4) {
        s.parents.push_back("N" + std::to_string(p));
      }
    }
    const std::size_t rows = 1ull << s.parents.size();
    for (std::size_t r = 0; r < rows; ++r) {
      const double p = 0.05 + 0.9 * rng.uniform();
      s.cpt.push_back({p, 1.0 - p});
    }
    specs.push_back(std::move(s));
  }
  Bnm net = build_bnm(specs);
  net.root_cause = "N0";
  net.root_clean_state = "F";
  return net;
}

}  // namespace

TEST_CASE("default network has the documented shape and values") {
  const Bnm net = default_network();
  CHECK(net.nodes.size() == 5);
  CHECK(net.node_index("Jamming") >= 0);
  CHECK(net.node_index("InaccurateCQI") >= 0);
  CHECK(net.node_index("McsVarianceIncrease") >= 0);
  CHECK(net.node_index("DataChannelJamming") >= 0);
  CHECK(net.node_index("ThroughputDecrease") >= 0);

  // The measured CCH probabilities appear literally in the CPTs.
  bool has_845 = false, has_503 = false;
  for (const auto& node : net.nodes) {
    for (const auto& row : node.cpt) {
      for (double p : row) {
        if (p == 0.845) has_845 = true;
        if (p == 0.503) has_503 = true;
      }
    }
  }
  CHECK(has_845);
  CHECK(has_503);

  // And they hold as conditionals given CCH jamming.
  CHECK(query(net, "McsVarianceIncrease", "T", {{"Jamming", "CCH"}}) ==
        doctest::Approx(0.845).epsilon(1e-12));
  CHECK(query(net, "InaccurateCQI", "T", {{"Jamming", "CCH"}}) ==
        doctest::Approx(0.503).epsilon(1e-12));
}

TEST_CASE("cycles are rejected at build time with the cycle named") {
  std::vector<NodeSpec> specs;
  specs.push_back({"A", {"F", "T"}, {"B"}, {{0.5, 0.5}, {0.5, 0.5}}});
  specs.push_back({"B", {"F", "T"}, {"A"}, {{0.5, 0.5}, {0.5, 0.5}}});
  try {
    build_bnm(specs);
    FAIL("expected cycle error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cycle") != std::string::npos);
    CHECK(msg.find("A") != std::string::npos);
    CHECK(msg.find("B") != std::string::npos);
  }
}

TEST_CASE("incomplete CPTs are rejected naming the node") {
  std::vector<NodeSpec> specs;
  specs.push_back({"A", {"F", "T"}, {}, {{0.5, 0.5}}});
  specs.push_back({"B", {"F", "T"}, {"A"}, {{0.5, 0.5}}});  // needs 2 rows
  try {
    build_bnm(specs);
    FAIL("expected CPT error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("'B'") != std::string::npos);
  }
}

TEST_CASE("joint sums to 1 over all assignments") {
  const Bnm net = default_network();
  const JointTable table = full_table(net);
  double total = 0.0;
  for (double p : table.probability) total += p;
  CHECK(std::abs(total - 1.0) <= 1e-9);
}

TEST_CASE("single-root joint is the CPT entry") {
  std::vector<NodeSpec> specs;
  specs.push_back({"A", {"F", "T"}, {}, {{0.7, 0.3}}});
  const Bnm net = build_bnm(specs);
  CHECK(joint(net, {{"A", "T"}}) == doctest::Approx(0.3));
}

TEST_CASE("joint of a full assignment matches the hand chain-rule product") {
  const Bnm net = default_network();
  const Evidence assignment = {{"Jamming", "CCH"},
                               {"InaccurateCQI", "T"},
                               {"McsVarianceIncrease", "T"},
                               {"DataChannelJamming", "F"},
                               {"ThroughputDecrease", "T"}};
  // By hand: P(CCH)=0.05, P(IC=T|CCH)=0.503, P(MVI=T|CCH,T)=0.845,
  // P(DCJ=F|CCH)=0.98, P(TD=T|MVI=T,DCJ=F)=0.70.
  const double expected = 0.05 * 0.503 * 0.845 * 0.98 * 0.70;
  CHECK(joint(net, assignment) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("joint rejects partial assignments") {
  const Bnm net = default_network();
  CHECK_THROWS_AS(joint(net, {{"Jamming", "CCH"}}), ValidationError);
}

TEST_CASE("query with full parent evidence returns the CPT row") {
  const Bnm net = default_network();
  const double p = query(net, "ThroughputDecrease", "T",
                         {{"McsVarianceIncrease", "T"}, {"DataChannelJamming", "F"}});
  CHECK(p == doctest::Approx(0.70).epsilon(1e-12));
}

TEST_CASE("enumeration matches the brute-force oracle on the default network") {
  const Bnm net = default_network();
  const Evidence evidence = {{"Jamming", "CCH"}};
  const double fast = query(net, "ThroughputDecrease", "T", evidence);
  const double brute = oracle_query(net, "ThroughputDecrease", "T", evidence);
  CHECK(std::abs(fast - brute) <= 1e-12);
}

TEST_CASE("enumeration matches the oracle on 100 random DAGs") {
  Rng rng(2025);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(7));  // up to 8 nodes
    const Bnm net = random_dag(rng, n);

    Evidence evidence;
    for (std::size_t i = 1; i < net.nodes.size(); ++i) {
      if (rng.uniform() < 0.35) {
        evidence[net.nodes[i].name] = rng.uniform() < 0.5 ? "F" : "T";
      }
    }
    const std::string target = net.nodes[0].name;
    if (evidence.count(target)) evidence.erase(target);
    const double fast = query(net, target, "T", evidence);
    const double brute = oracle_query(net, target, "T", evidence);
    CHECK(std::abs(fast - brute) <= 1e-12);
  }
}

TEST_CASE("marginalizing extra unobserved nodes changes nothing") {
  // P(S | r, C_i) must equal the same query on a network extended with
  // unobserved nodes that are d-separated given the evidence.
  const Bnm base = default_network();
  const Evidence evidence = {{"Jamming", "CCH"},
                             {"InaccurateCQI", "T"},
                             {"McsVarianceIncrease", "T"},
                             {"DataChannelJamming", "F"}};
  const double p_base = query(base, "ThroughputDecrease", "T", evidence);

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
  specs.push_back({"McsVarianceIncrease",
                   {"F", "T"},
                   {"Jamming", "InaccurateCQI"},
                   {{0.97, 0.03},
                    {0.155, 0.845},
                    {0.155, 0.845},
                    {0.155, 0.845},
                    {0.97, 0.03},
                    {0.155, 0.845}}});
  specs.push_back({"ThroughputDecrease",
                   {"F", "T"},
                   {"McsVarianceIncrease", "DataChannelJamming"},
                   {{0.95, 0.05}, {0.10, 0.90}, {0.30, 0.70}, {0.03, 0.97}}});
  // Unobserved extras: an isolated cause and a child of observed nodes.
  specs.push_back({"AmbientInterference", {"F", "T"}, {}, {{0.8, 0.2}}});
  specs.push_back({"AlarmRaised",
                   {"F", "T"},
                   {"McsVarianceIncrease"},
                   {{0.9, 0.1}, {0.2, 0.8}}});
  const Bnm extended = build_bnm(specs);

  const double p_ext = query(extended, "ThroughputDecrease", "T", evidence);
  CHECK(std::abs(p_base - p_ext) <= 1e-12);
}

TEST_CASE("posterior over the root") {
  const Bnm net = default_network();

  SUBCASE("sums to one") {
    const auto post = posterior_root(net, {{"ThroughputDecrease", "T"}});
    double total = 0.0;
    for (const auto& [state, p] : post) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }

  SUBCASE("evidence independent of the root leaves the prior untouched") {
    std::vector<NodeSpec> specs;
    specs.push_back({"Jamming", {"None", "CCH", "DCH"}, {}, {{0.5, 0.25, 0.25}}});
    specs.push_back({"Noise", {"F", "T"}, {}, {{0.6, 0.4}}});
    const Bnm toy = build_bnm(specs);
    const auto post = posterior_root(toy, {{"Noise", "T"}});
    CHECK(post[0].second == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(post[1].second == doctest::Approx(0.25).epsilon(1e-12));
  }

  SUBCASE("mcs variance evidence raises the CCH posterior above its prior") {
    const auto post = posterior_root(net, {{"McsVarianceIncrease", "T"}});
    double p_cch = 0.0;
    for (const auto& [state, p] : post) {
      if (state == "CCH") p_cch = p;
    }
    CHECK(p_cch > 0.05);
  }

  SUBCASE("impossible evidence is a zero-probability error") {
    std::vector<NodeSpec> specs;
    specs.push_back({"Jamming", {"None", "CCH"}, {}, {{1.0, 0.0}}});
    specs.push_back({"Effect", {"F", "T"}, {"Jamming"}, {{1.0, 0.0}, {0.0, 1.0}}});
    const Bnm toy = build_bnm(specs);
    CHECK_THROWS_AS(posterior_root(toy, {{"Effect", "T"}}), ValidationError);
  }
}

TEST_CASE("fusion") {
  const Bnm net = default_network();

  SUBCASE("no evidence is the identity") {
    for (double s : {0.0, 0.25, 0.5, 0.9, 1.0}) {
      CHECK(fuse(s, net, {}) == doctest::Approx(s).epsilon(1e-12));
    }
  }

  SUBCASE("doubling the odds maps 0.5 to 2/3") {
    // Oracle: posterior odds / prior odds = 2 and detector odds 1
    // compose to fused odds 2, i.e. a score of 2/3. Build a network whose
    // posterior does exactly that.
    // Prior P(jam) = 0.2 (odds 1/4); posterior must be 1/3 (odds 1/2).
    // With P(E=T|jam)=c1 and P(E=T|none)=c0: posterior odds =
    // prior odds * c1/c0 = 2 * prior odds when c1 = 2*c0.
    std::vector<NodeSpec> specs;
    specs.push_back({"Jamming", {"None", "CCH"}, {}, {{0.8, 0.2}}});
    specs.push_back({"Marker", {"F", "T"}, {"Jamming"}, {{0.7, 0.3}, {0.4, 0.6}}});
    Bnm toy = build_bnm(specs);
    const double fused = fuse(0.5, toy, {{"Marker", "T"}});
    CHECK(fused == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }

  SUBCASE("degenerate priors are rejected") {
    std::vector<NodeSpec> specs;
    specs.push_back({"Jamming", {"None", "CCH"}, {}, {{1.0, 0.0}}});
    const Bnm toy = build_bnm(specs);
    CHECK_THROWS_AS(fuse(0.5, toy, {}), ValidationError);
  }

  SUBCASE("fused scores stay in [0,1]") {
    Rng rng(8);
    for (int i = 0; i < 30; ++i) {
      const double s = rng.uniform();
      const double fused = fuse(s, net, {{"McsVarianceIncrease", "T"}});
      CHECK(fused >= 0.0);
      CHECK(fused <= 1.0);
      CHECK(fused >= s);  // this evidence only raises suspicion
    }
  }
}

TEST_CASE("network json round-trip") {
  const Bnm net = default_network();
  const std::string text = network_to_json(net);
  const Bnm again = parse_network(text);
  REQUIRE(again.nodes.size() == net.nodes.size());
  CHECK(again.root_cause == net.root_cause);
  CHECK(again.sentinel == net.sentinel);

  const Evidence evidence = {{"Jamming", "CCH"}};
  CHECK(query(again, "ThroughputDecrease", "T", evidence) ==
        doctest::Approx(query(net, "ThroughputDecrease", "T", evidence)).epsilon(1e-15));
}

TEST_CASE("the bundled fig4 config matches the built-in default network") {
  const char* dir = std::getenv("JAMDET_CONFIG_DIR");
  REQUIRE(dir != nullptr);
  const Bnm from_file = load_network(std::string(dir) + "/fig4_network.json");
  const Bnm builtin = default_network();
  REQUIRE(from_file.nodes.size() == builtin.nodes.size());
  for (std::size_t i = 0; i < builtin.nodes.size(); ++i) {
    CHECK(from_file.nodes[i].name == builtin.nodes[i].name);
    CHECK(from_file.nodes[i].cpt == builtin.nodes[i].cpt);
  }
}

TEST_CASE("unknown nodes and states are rejected") {
  const Bnm net = default_network();
  CHECK_THROWS_AS(query(net, "NoSuchNode", "T", {}), ValidationError);
  CHECK_THROWS_AS(query(net, "Jamming", "Sideways", {}), ValidationError);
  CHECK_THROWS_AS(query(net, "ThroughputDecrease", "T", {{"Jamming", "Nope"}}), ValidationError);
}

TEST_CASE("query rejects a target that is already evidence") {
  const Bnm net = default_network();
  CHECK_THROWS_AS(query(net, "Jamming", "CCH", {{"Jamming", "CCH"}}), ValidationError);
}
