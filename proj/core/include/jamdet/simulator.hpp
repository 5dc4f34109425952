#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jamdet/telemetry.hpp"

namespace jamdet {

/// One jamming scenario (or the clean baseline). severity in [0,1] scales the
/// KPI shift magnitudes; overlap=true shrinks every shift far enough that the
/// jam feature distributions overlap the clean baseline.
struct ScenarioSpec {
  Label label;
  double severity = 0.0;
  bool overlap = false;
  std::uint64_t seed = 0;

  /// severity == 0 iff the label is Clean.
  void validate() const;
};

/// Clean-state (H0) feature distribution: truncated Gaussians with the
/// documented default means/stddevs. Values are calibration targets for the
/// synthetic campaign, not measurements.
struct BaselineModel {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};

  static BaselineModel defaults();
};

/// Counts of per-record CCH reporting markers drawn during generation.
struct ScenarioStats {
  std::size_t records = 0;
  std::size_t mcs_variance_marked = 0;
  std::size_t inaccurate_cqi_marked = 0;
};

/// Linear power-to-severity mapping: -13 dBm -> 0.3, 0 dBm -> 1.0.
double power_to_severity(double power_dbm);

/// Shrink factor applied to every shift when overlap=true.
inline constexpr double kOverlapScale = 0.15;

/// n labeled records (alternating LTE/NR, paired timestamps on the 180 ms
/// grid) drawn from the baseline and shifted per the scenario.
Dataset generate_scenario(const ScenarioSpec& spec, const BaselineModel& baseline, std::size_t n,
                          std::int64_t start_timestamp_ms = 0, ScenarioStats* stats = nullptr);

struct CampaignEntry {
  Label label;
  double severity = 0.0;
  bool overlap = false;
  std::size_t n = 0;  // 0 = use per_scenario_n
};

/// Campaign = clean plus the Table-I waveform grid: 80 MHz WiFi-type jamming
/// at 2140 MHz (LTE DL, CCH) and 1950 MHz (LTE UL, DCH) at
/// {0,-5,-11,-12,-13} dBm, and 3490 MHz (NR, DCH) at {-11,-12,-13} dBm.
/// 2140 MHz entries below 0 dBm are the designed overlap scenarios.
struct CampaignConfig {
  BaselineModel baseline = BaselineModel::defaults();
  std::size_t per_scenario_n = 100;
  std::uint64_t seed = 0;
  std::vector<CampaignEntry> entries;

  static CampaignConfig table1(std::size_t per_scenario_n, std::uint64_t seed,
                               const BaselineModel& baseline = BaselineModel::defaults());

  static CampaignConfig from_json_file(const std::string& path);
  static CampaignConfig from_json(const std::string& text);
  std::string to_json() const;
};

/// Concatenated labeled dataset over all campaign entries. Per-entry sub-seeds
/// derive deterministically from the campaign seed; timestamps run
/// continuously across entries.
Dataset generate_campaign(const CampaignConfig& config, ScenarioStats* stats = nullptr);
Dataset generate_campaign(const BaselineModel& baseline, std::size_t per_scenario_n,
                          std::uint64_t seed);

/// Replace fraction*N contiguous records starting at offset stage*N with
/// jam-source records re-labeled Clean (mislabeled poison). Replacement keeps
/// the victim position's timestamp and cell so stream ordering is preserved.
Dataset inject_poison(const Dataset& clean_stream, const Dataset& jam_source, double fraction,
                      double stage);

}  // namespace jamdet
