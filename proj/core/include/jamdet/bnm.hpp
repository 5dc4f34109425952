#pragma once

#include <map>
#include <string>
#include <vector>

#include "jamdet/errors.hpp"

namespace jamdet {

/// One discrete node: named states, ordered parents, and a CPT with one
/// probability row per parent-state combination (row order: mixed-radix over
/// parent states, first parent most significant).
struct NodeSpec {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> cpt;
};

/// Validated DAG with topologically ordered nodes. The designated root-cause
/// node r defaults to "Jamming" and the sentinel S to "ThroughputDecrease";
/// nodes absent from a query's evidence play the role of the unobserved
/// causes and are marginalized exactly.
struct Bnm {
  struct Node {
    std::string name;
    std::vector<std::string> states;
    std::vector<int> parents;  // indices into nodes, topological order
    std::vector<std::vector<double>> cpt;
  };
  std::vector<Node> nodes;  // topological order
  std::map<std::string, int> index;
  std::string root_cause = "Jamming";
  std::string sentinel = "ThroughputDecrease";
  std::string root_clean_state = "None";

  int node_index(const std::string& name) const;
  int state_index(int node, const std::string& state) const;
};

/// Node name -> state name.
using Evidence = std::map<std::string, std::string>;

Bnm build_bnm(const std::vector<NodeSpec>& specs);

/// The bundled throughput-degradation network: Jamming {None,CCH,DCH} ->
/// {InaccurateCQI, DataChannelJamming, McsVarianceIncrease},
/// InaccurateCQI -> McsVarianceIncrease, and {McsVarianceIncrease,
/// DataChannelJamming} -> ThroughputDecrease, carrying the measured
/// P(McsVarianceIncrease=T | CCH) = 0.845 and P(InaccurateCQI=T | CCH) = 0.503.
Bnm default_network();

Bnm load_network(const std::string& path);
Bnm parse_network(const std::string& json_text);
std::string network_to_json(const Bnm& net);

/// Chain-rule probability of one full assignment.
double joint(const Bnm& net, const Evidence& assignment);

/// Exact inference by enumeration: P(target_node = target_state | evidence).
/// Zero-probability evidence raises ValidationError.
double query(const Bnm& net, const std::string& target_node, const std::string& target_state,
             const Evidence& evidence);

/// P(root-cause state | evidence) for every root state; sums to 1.
std::vector<std::pair<std::string, double>> posterior_root(const Bnm& net,
                                                           const Evidence& evidence);

/// Bayes-rule reweighting of a detector score: the detector's implied odds
/// are multiplied by the ratio of posterior to prior odds of "root cause is
/// not the clean state". Evidence that moves nothing returns the score
/// unchanged.
double fuse(double detector_score, const Bnm& net, const Evidence& side_evidence);

}  // namespace jamdet
