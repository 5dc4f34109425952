#include "jamdet/simulator.hpp"

#include <cmath>
#include <map>

#include "doctest.h"

using namespace jamdet;

namespace {

ScenarioSpec cch_spec(double severity, bool overlap, std::uint64_t seed) {
  ScenarioSpec s;
  s.label = Label::jam(1, 2140.0, 0.0, Channel::CCH);
  s.severity = severity;
  s.overlap = overlap;
  s.seed = seed;
  return s;
}

ScenarioSpec dch_spec(double severity, std::uint64_t seed) {
  ScenarioSpec s;
  s.label = Label::jam(11, 3490.0, -11.0, Channel::DCH);
  s.severity = severity;
  s.seed = seed;
  return s;
}

FeatureVector empirical_mean(const Dataset& d) {
  FeatureVector m{};
  for (const auto& lr : d.records) {
    const FeatureVector f = lr.record.features();
    for (std::size_t i = 0; i < kFeatureCount; ++i) m[i] += f[i];
  }
  for (auto& v : m) v /= static_cast<double>(d.size());
  return m;
}

double mahalanobis(const FeatureVector& a, const FeatureVector& b, const BaselineModel& base) {
  double d2 = 0.0;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const double z = (a[f] - b[f]) / base.stddev[f];
    d2 += z * z;
  }
  return std::sqrt(d2);
}

}  // namespace

TEST_CASE("clean scenario of 596 records is all clean and valid") {
  ScenarioSpec spec;
  spec.label = Label::clean();
  spec.seed = 42;
  const Dataset d = generate_scenario(spec, BaselineModel::defaults(), 596);
  REQUIRE(d.size() == 596);
  for (const auto& lr : d.records) CHECK_FALSE(lr.label.is_jam());
  d.validate();
}

TEST_CASE("jam scenario with severity 0 violates the spec invariant") {
  ScenarioSpec spec = cch_spec(1.0, false, 1);
  spec.severity = 0.0;
  CHECK_THROWS_AS(generate_scenario(spec, BaselineModel::defaults(), 10), ValidationError);
}

TEST_CASE("clean scenario with nonzero severity violates the spec invariant") {
  ScenarioSpec spec;
  spec.label = Label::clean();
  spec.severity = 0.5;
  CHECK_THROWS_AS(generate_scenario(spec, BaselineModel::defaults(), 10), ValidationError);
}

TEST_CASE("cch markers hit the measured rates at severity 1") {
  ScenarioStats stats;
  const Dataset d =
      generate_scenario(cch_spec(1.0, false, 1234), BaselineModel::defaults(), 10000, 0, &stats);
  REQUIRE(stats.records == 10000);
  const double mvi = static_cast<double>(stats.mcs_variance_marked) / 10000.0;
  const double icqi = static_cast<double>(stats.inaccurate_cqi_marked) / 10000.0;
  CHECK(std::abs(mvi - 0.845) <= 0.02);
  CHECK(std::abs(icqi - 0.503) <= 0.02);

  // The markers must be visible in the data itself: inflated MCS variance
  // and a bimodal CQI with mass near the clean mean.
  double mcs_var_jam = 0.0, mcs_mean = 0.0;
  for (const auto& lr : d.records) mcs_mean += lr.record.dl_mcs;
  mcs_mean /= static_cast<double>(d.size());
  for (const auto& lr : d.records) {
    mcs_var_jam += (lr.record.dl_mcs - mcs_mean) * (lr.record.dl_mcs - mcs_mean);
  }
  mcs_var_jam /= static_cast<double>(d.size());
  const double clean_var = 0.8 * 0.8;
  CHECK(mcs_var_jam > 4.0 * clean_var);
}

TEST_CASE("dch scenarios carry no reporting markers") {
  ScenarioStats stats;
  generate_scenario(dch_spec(1.0, 5), BaselineModel::defaults(), 2000, 0, &stats);
  CHECK(stats.mcs_variance_marked == 0);
  CHECK(stats.inaccurate_cqi_marked == 0);
}

TEST_CASE("generation is deterministic under the seed") {
  const Dataset a = generate_scenario(cch_spec(0.7, true, 99), BaselineModel::defaults(), 200);
  const Dataset b = generate_scenario(cch_spec(0.7, true, 99), BaselineModel::defaults(), 200);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.records[i] == b.records[i]);

  const std::string csv_a = serialize_dataset(a, DataFormat::Csv);
  const std::string csv_b = serialize_dataset(b, DataFormat::Csv);
  CHECK(csv_a == csv_b);
}

TEST_CASE("campaign covers clean plus all 13 table rows") {
  const Dataset d = generate_campaign(BaselineModel::defaults(), 100, 7);
  CHECK(d.size() == 1400);

  std::map<std::string, std::size_t> per_key;
  for (const auto& lr : d.records) ++per_key[lr.label.key()];
  CHECK(per_key.size() == 14);
  CHECK(per_key["clean"] == 100);
  d.validate();
}

TEST_CASE("campaign configured for the 4125-sample test mix") {
  CampaignConfig cfg = CampaignConfig::table1(200, 77);
  cfg.entries[0].n = 1525;  // clean remainder
  const Dataset d = generate_campaign(cfg);
  CHECK(d.size() == 1525 + 13 * 200);
  CHECK(d.size() == 4125);
}

TEST_CASE("same campaign seed twice gives byte-identical datasets") {
  const Dataset a = generate_campaign(BaselineModel::defaults(), 40, 123);
  const Dataset b = generate_campaign(BaselineModel::defaults(), 40, 123);
  CHECK(serialize_dataset(a, DataFormat::Csv) == serialize_dataset(b, DataFormat::Csv));
}

TEST_CASE("mahalanobis distance to clean grows with severity") {
  const BaselineModel base = BaselineModel::defaults();
  ScenarioSpec clean;
  clean.label = Label::clean();
  clean.seed = 5;
  const FeatureVector clean_mean = empirical_mean(generate_scenario(clean, base, 4000));

  double prev = 0.0;
  for (double severity : {0.25, 0.5, 0.75, 1.0}) {
    const FeatureVector jam_mean =
        empirical_mean(generate_scenario(dch_spec(severity, 5), base, 4000));
    const double dist = mahalanobis(jam_mean, clean_mean, base);
    CHECK(dist >= prev);
    prev = dist;
  }
  CHECK(prev > 5.0);
}

TEST_CASE("overlap shifts are at most a quarter of the severity-1 shift") {
  const BaselineModel base = BaselineModel::defaults();
  ScenarioSpec clean;
  clean.label = Label::clean();
  clean.seed = 31;
  const FeatureVector clean_mean = empirical_mean(generate_scenario(clean, base, 6000));
  const FeatureVector full_mean =
      empirical_mean(generate_scenario(cch_spec(1.0, false, 31), base, 6000));
  const FeatureVector overlap_mean =
      empirical_mean(generate_scenario(cch_spec(1.0, true, 31), base, 6000));

  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const double full_shift = std::abs(full_mean[f] - clean_mean[f]);
    const double overlap_shift = std::abs(overlap_mean[f] - clean_mean[f]);
    // Integer rounding leaves sub-step wiggle on cqi/mcs; allow slack of
    // a twentieth of a stddev.
    CHECK(overlap_shift <= 0.25 * full_shift + 0.05 * base.stddev[f]);
  }
}

TEST_CASE("all generated records pass validation") {
  for (double severity : {0.3, 1.0}) {
    for (bool overlap : {false, true}) {
      const Dataset d =
          generate_scenario(cch_spec(severity, overlap, 8), BaselineModel::defaults(), 500);
      d.validate();
    }
  }
}

TEST_CASE("power-to-severity mapping is the documented line") {
  CHECK(power_to_severity(-13.0) == doctest::Approx(0.3));
  CHECK(power_to_severity(0.0) == doctest::Approx(1.0));
  CHECK(power_to_severity(-5.0) == doctest::Approx(0.3 + 0.7 * 8.0 / 13.0));
}

TEST_CASE("poison injection") {
  ScenarioSpec clean;
  clean.label = Label::clean();
  clean.seed = 17;
  const Dataset stream = generate_scenario(clean, BaselineModel::defaults(), 100);
  const Dataset jam = generate_scenario(dch_spec(1.0, 18), BaselineModel::defaults(), 100);

  SUBCASE("fraction 0 is the identity") {
    const Dataset out = inject_poison(stream, jam, 0.0, 0.5);
    REQUIRE(out.size() == stream.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.records[i] == stream.records[i]);
  }

  SUBCASE("fraction 0.2 at stage 0.5 replaces exactly [50, 70)") {
    const Dataset out = inject_poison(stream, jam, 0.2, 0.5);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const bool poisoned = i >= 50 && i < 70;
      if (poisoned) {
        CHECK(out.records[i].record != stream.records[i].record);
        CHECK(out.records[i].label.kind == LabelKind::Clean);  // mislabeled
        CHECK(out.records[i].record.timestamp_ms == stream.records[i].record.timestamp_ms);
        CHECK(out.records[i].record.cell == stream.records[i].record.cell);
      } else {
        CHECK(out.records[i] == stream.records[i]);
      }
    }
    out.validate();
  }

  SUBCASE("poison at stage 0 fraction 0.05 stays inside the first 10%") {
    const Dataset out = inject_poison(stream, jam, 0.05, 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const bool differs = !(out.records[i] == stream.records[i]);
      if (differs) CHECK(i < 10);
    }
  }

  SUBCASE("insufficient jam source is an error") {
    Dataset small;
    small.records.assign(jam.records.begin(), jam.records.begin() + 4);
    CHECK_THROWS_AS(inject_poison(stream, small, 0.5, 0.0), ValidationError);
  }
}

TEST_CASE("campaign config round-trips through json") {
  CampaignConfig cfg = CampaignConfig::table1(64, 9);
  cfg.baseline.mean[7] = 12.0;  // cqi override
  cfg.entries[3].n = 80;
  const CampaignConfig again = CampaignConfig::from_json(cfg.to_json());
  CHECK(again.seed == cfg.seed);
  CHECK(again.per_scenario_n == cfg.per_scenario_n);
  CHECK(again.baseline.mean[7] == 12.0);
  REQUIRE(again.entries.size() == cfg.entries.size());
  for (std::size_t i = 0; i < cfg.entries.size(); ++i) {
    CHECK(again.entries[i].label == cfg.entries[i].label);
    CHECK(again.entries[i].severity == doctest::Approx(cfg.entries[i].severity));
    CHECK(again.entries[i].overlap == cfg.entries[i].overlap);
    CHECK(again.entries[i].n == cfg.entries[i].n);
  }
  const Dataset a = generate_campaign(cfg);
  const Dataset b = generate_campaign(again);
  CHECK(serialize_dataset(a, DataFormat::Csv) == serialize_dataset(b, DataFormat::Csv));
}
