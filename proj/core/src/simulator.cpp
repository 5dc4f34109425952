#include "jamdet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jamdet/random.hpp"

namespace jamdet {

using json = nlohmann::json;

namespace {

// Feature indices in canonical order.
enum : std::size_t {
  kDlBitrate = 0,
  kUlBitrate,
  kDlPacketRate,
  kUlPacketRate,
  kDlRetxRate,
  kUlRetxRate,
  kPuschSnr,
  kCqi,
  kPowerHeadroom,
  kEpre,
  kUlPathLoss,
  kDlMcs,
  kUlMcs,
  kTurboRate
};

// Latent-factor loadings for the clean baseline: q = channel quality,
// l = traffic load, u = uplink condition. Unit-variance standardized features;
// noise coefficient tops the variance up to 1.
struct Loading {
  double q, l, u;
};

constexpr std::array<Loading, kFeatureCount> kLoadings = {{
    {0.45, 0.75, 0.00},   // dl_bitrate
    {0.00, 0.75, 0.35},   // ul_bitrate
    {0.00, 0.85, 0.00},   // dl_packet_rate
    {0.00, 0.80, 0.00},   // ul_packet_rate
    {-0.70, 0.00, 0.00},  // dl_retx_rate
    {-0.20, 0.00, -0.65}, // ul_retx_rate
    {0.00, 0.00, 0.85},   // pusch_snr_db
    {0.85, 0.00, 0.00},   // cqi
    {0.00, 0.00, -0.50},  // power_headroom_db
    {0.40, 0.00, 0.00},   // epre_dbm
    {0.00, 0.00, -0.75},  // ul_path_loss_db
    {0.80, 0.00, 0.00},   // dl_mcs
    {0.25, 0.00, 0.75},   // ul_mcs
    {0.50, 0.00, 0.30},   // turbo_decoder_rate
}};

double noise_coef(std::size_t f) {
  const Loading& w = kLoadings[f];
  return std::sqrt(std::max(0.0, 1.0 - w.q * w.q - w.l * w.l - w.u * w.u));
}

// Mean shifts in clean-stddev units at effect scale 1.
constexpr std::array<double, kFeatureCount> kDchShift = {
    -6.0, -6.0, -5.5, -5.5, 20.0, 20.0, -8.0, -6.0, -2.5, 8.0, 2.0, -6.0, -8.0, -15.0};
constexpr std::array<double, kFeatureCount> kCchShift = {
    -5.5, -2.0, -5.0, -1.5, 6.0, 1.5, 0.0, 0.0 /* cqi is marker-driven */,
    0.0,  5.0,  0.0,  0.0 /* mcs is marker-driven */, 0.0, -4.0};

// CCH reporting-marker model: per record, with probability
// kMcsMarkerRate * severity the UE's MCS values are redrawn with inflated
// variance, and with probability kInaccurateCqiRate * severity the reported
// CQI stays near the clean value while the channel is actually degraded.
constexpr double kMcsMarkerRate = 0.845;
constexpr double kInaccurateCqiRate = 0.503;
constexpr double kCchCqiShift = -6.0;       // stddev units, unmarked records
constexpr double kMcsSigmaBoost = 5.0;      // marked sigma = (1 + boost*e) * clean sigma

double clamp_feature(std::size_t f, double v) {
  switch (f) {
    case kDlBitrate:
    case kUlBitrate:
    case kDlPacketRate:
    case kUlPacketRate:
    case kUlPathLoss:
      return std::max(0.0, v);
    case kDlRetxRate:
    case kUlRetxRate:
    case kTurboRate:
      return std::clamp(v, 0.0, 1.0);
    case kCqi:
      return std::clamp(std::round(v), 0.0, 15.0);
    case kDlMcs:
    case kUlMcs:
      return std::clamp(std::round(v), 0.0, 28.0);
    default:
      return v;
  }
}

}  // namespace

void ScenarioSpec::validate() const {
  const bool clean = label.kind == LabelKind::Clean;
  if (clean && severity != 0.0) {
    throw ValidationError("ScenarioSpec: Clean scenario must have severity 0");
  }
  if (!clean && severity <= 0.0) {
    throw ValidationError("ScenarioSpec: Jam scenario must have severity > 0");
  }
  if (severity < 0.0 || severity > 1.0) {
    throw ValidationError("ScenarioSpec: severity must be in [0,1]");
  }
}

BaselineModel BaselineModel::defaults() {
  BaselineModel b;
  b.mean = {75.0e6, 20.0e6, 8000.0, 3000.0, 0.02, 0.03, 20.0,
            13.0,   12.0,   -95.0,  70.0,   26.0, 23.0, 0.97};
  b.stddev = {6.0e6, 2.0e6, 600.0, 250.0, 0.008, 0.01, 1.5,
              0.8,   2.0,   1.5,   2.0,   0.8,   0.8,  0.01};
  return b;
}

double power_to_severity(double power_dbm) {
  const double p = std::clamp(power_dbm, -13.0, 0.0);
  return 0.3 + 0.7 * (p + 13.0) / 13.0;
}

Dataset generate_scenario(const ScenarioSpec& spec, const BaselineModel& baseline, std::size_t n,
                          std::int64_t start_timestamp_ms, ScenarioStats* stats) {
  spec.validate();
  if (n < 1) throw ValidationError("generate_scenario: n must be >= 1");

  const bool jam = spec.label.is_jam();
  const bool cch = jam && spec.label.channel == Channel::CCH;
  const double effect = spec.severity * (spec.overlap ? kOverlapScale : 1.0);
  const double p_mvi = cch ? kMcsMarkerRate * spec.severity : 0.0;
  const double p_icqi = cch ? kInaccurateCqiRate * spec.severity : 0.0;

  Rng rng(spec.seed);
  Dataset out;
  out.records.reserve(n);
  out.source = "scenario:" + spec.label.key();

  for (std::size_t i = 0; i < n; ++i) {
    // Fixed per-record draw order so datasets generated from the same seed
    // share baseline draws across scenario settings.
    const double q = rng.gauss();
    const double l = rng.gauss();
    const double u = rng.gauss();
    std::array<double, kFeatureCount> noise;
    for (std::size_t f = 0; f < kFeatureCount; ++f) noise[f] = rng.gauss();
    const double u_mvi = rng.uniform();
    const double u_icqi = rng.uniform();
    const double g_dl_mcs = rng.gauss();
    const double g_ul_mcs = rng.gauss();

    FeatureVector x{};
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      const Loading& w = kLoadings[f];
      const double z = w.q * q + w.l * l + w.u * u + noise_coef(f) * noise[f];
      x[f] = baseline.mean[f] + baseline.stddev[f] * z;
    }

    bool mvi_marked = false;
    bool icqi_marked = false;
    if (jam) {
      if (!cch) {
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
          x[f] += kDchShift[f] * effect * baseline.stddev[f];
        }
      } else {
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
          x[f] += kCchShift[f] * effect * baseline.stddev[f];
        }
        mvi_marked = u_mvi < p_mvi;
        icqi_marked = u_icqi < p_icqi;
        if (mvi_marked) {
          // Mis-set MCS: redraw decoupled from channel quality with
          // inflated variance.
          const double sigma = (1.0 + kMcsSigmaBoost * effect);
          x[kDlMcs] = baseline.mean[kDlMcs] + baseline.stddev[kDlMcs] * sigma * g_dl_mcs;
          x[kUlMcs] = baseline.mean[kUlMcs] + baseline.stddev[kUlMcs] * sigma * g_ul_mcs;
        }
        if (!icqi_marked) {
          // Accurately reported degradation; marked records keep the
          // clean-looking CQI.
          x[kCqi] += kCchCqiShift * effect * baseline.stddev[kCqi];
        }
      }
    }

    for (std::size_t f = 0; f < kFeatureCount; ++f) x[f] = clamp_feature(f, x[f]);

    const Cell cell = (i % 2 == 0) ? Cell::LTE : Cell::NR;
    const std::int64_t ts = start_timestamp_ms + static_cast<std::int64_t>(i / 2) * kSamplePeriodMs;
    LabeledRecord lr;
    lr.record = KpiRecord::from_features(ts, cell, x);
    lr.label = spec.label;
    out.records.push_back(std::move(lr));

    if (stats) {
      ++stats->records;
      if (mvi_marked) ++stats->mcs_variance_marked;
      if (icqi_marked) ++stats->inaccurate_cqi_marked;
    }
  }
  out.validate();
  return out;
}

CampaignConfig CampaignConfig::table1(std::size_t per_scenario_n, std::uint64_t seed,
                                      const BaselineModel& baseline) {
  CampaignConfig cfg;
  cfg.baseline = baseline;
  cfg.per_scenario_n = per_scenario_n;
  cfg.seed = seed;

  cfg.entries.push_back({Label::clean(), 0.0, false, 0});
  int type = 1;
  const double lte_dl = 2140.0, lte_ul = 1950.0, nr = 3490.0;
  for (double p : {0.0, -5.0, -11.0, -12.0, -13.0}) {
    cfg.entries.push_back(
        {Label::jam(type++, lte_dl, p, Channel::CCH), power_to_severity(p), p < 0.0, 0});
  }
  for (double p : {0.0, -5.0, -11.0, -12.0, -13.0}) {
    cfg.entries.push_back(
        {Label::jam(type++, lte_ul, p, Channel::DCH), power_to_severity(p), false, 0});
  }
  for (double p : {-11.0, -12.0, -13.0}) {
    cfg.entries.push_back(
        {Label::jam(type++, nr, p, Channel::DCH), power_to_severity(p), false, 0});
  }
  return cfg;
}

namespace {

int feature_index(const std::string& name) {
  const auto& names = feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw ValidationError("unknown feature name: " + name);
}

}  // namespace

CampaignConfig CampaignConfig::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ValidationError("campaign config: invalid JSON");
  }
  CampaignConfig cfg = table1(j.value("per_scenario_n", std::size_t{100}),
                              j.value("seed", std::uint64_t{0}));
  if (j.contains("baseline")) {
    const json& b = j["baseline"];
    for (auto& [key, val] : b.value("mean", json::object()).items()) {
      cfg.baseline.mean[feature_index(key)] = val.get<double>();
    }
    for (auto& [key, val] : b.value("stddev", json::object()).items()) {
      cfg.baseline.stddev[feature_index(key)] = val.get<double>();
    }
  }
  if (j.contains("scenarios")) {
    cfg.entries.clear();
    int type = 1;
    for (const json& s : j["scenarios"]) {
      CampaignEntry e;
      e.n = s.value("n", std::size_t{0});
      const std::string kind = s.value("kind", "jam");
      if (kind == "clean") {
        e.label = Label::clean();
      } else {
        const double power = s.at("power_dbm").get<double>();
        const std::string ch = s.value("channel", "DCH");
        e.label = Label::jam(s.value("jam_type", type), s.at("center_freq_mhz").get<double>(),
                             power, ch == "CCH" ? Channel::CCH : Channel::DCH);
        e.severity = s.contains("severity") ? s["severity"].get<double>()
                                            : power_to_severity(power);
        e.overlap = s.value("overlap", false);
        ++type;
      }
      cfg.entries.push_back(e);
    }
  }
  return cfg;
}

CampaignConfig CampaignConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open campaign config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string CampaignConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["per_scenario_n"] = per_scenario_n;
  json mean = json::object(), stddev = json::object();
  const BaselineModel defs = BaselineModel::defaults();
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (baseline.mean[f] != defs.mean[f]) mean[std::string(feature_names()[f])] = baseline.mean[f];
    if (baseline.stddev[f] != defs.stddev[f]) {
      stddev[std::string(feature_names()[f])] = baseline.stddev[f];
    }
  }
  if (!mean.empty() || !stddev.empty()) j["baseline"] = {{"mean", mean}, {"stddev", stddev}};
  j["scenarios"] = json::array();
  for (const auto& e : entries) {
    json s;
    if (e.label.kind == LabelKind::Clean) {
      s["kind"] = "clean";
    } else {
      s["kind"] = "jam";
      s["jam_type"] = e.label.jam_type;
      s["center_freq_mhz"] = e.label.center_freq_mhz;
      s["power_dbm"] = e.label.power_dbm;
      s["channel"] = std::string(to_string(e.label.channel));
      s["severity"] = e.severity;
      s["overlap"] = e.overlap;
    }
    if (e.n > 0) s["n"] = e.n;
    j["scenarios"].push_back(s);
  }
  return j.dump(2) + "\n";
}

Dataset generate_campaign(const CampaignConfig& config, ScenarioStats* stats) {
  if (config.per_scenario_n < 1) {
    throw ValidationError("generate_campaign: per_scenario_n must be >= 1");
  }
  Dataset out;
  out.source = "campaign";
  std::int64_t next_ts = 0;
  std::size_t index = 0;
  for (const auto& e : config.entries) {
    ScenarioSpec spec;
    spec.label = e.label;
    spec.severity = e.severity;
    spec.overlap = e.overlap;
    spec.seed = derive_seed(config.seed, index++);
    const std::size_t n = e.n > 0 ? e.n : config.per_scenario_n;
    Dataset part = generate_scenario(spec, config.baseline, n, next_ts, stats);
    next_ts += static_cast<std::int64_t>((n + 1) / 2) * kSamplePeriodMs;
    out.records.insert(out.records.end(), part.records.begin(), part.records.end());
  }
  out.validate();
  return out;
}

Dataset generate_campaign(const BaselineModel& baseline, std::size_t per_scenario_n,
                          std::uint64_t seed) {
  return generate_campaign(CampaignConfig::table1(per_scenario_n, seed, baseline));
}

Dataset inject_poison(const Dataset& clean_stream, const Dataset& jam_source, double fraction,
                      double stage) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw ValidationError("inject_poison: fraction must be in [0,1)");
  }
  if (stage < 0.0 || stage > 1.0) throw ValidationError("inject_poison: stage must be in [0,1]");

  const std::size_t n = clean_stream.size();
  const std::size_t count = static_cast<std::size_t>(std::llround(fraction * n));
  const std::size_t start = static_cast<std::size_t>(std::llround(stage * n));
  if (start + count > n) {
    throw ValidationError("inject_poison: poison window [" + std::to_string(start) + ", " +
                          std::to_string(start + count) + ") exceeds stream length " +
                          std::to_string(n));
  }

  Dataset out = clean_stream;
  out.source = clean_stream.source + "+poison";
  if (count == 0) return out;

  // Per-cell cursors into the jam source keep LTE features on LTE
  // positions and NR features on NR positions.
  std::size_t cursor_lte = 0, cursor_nr = 0;
  auto next_jam = [&](Cell cell) -> const KpiRecord& {
    std::size_t& cur = (cell == Cell::LTE) ? cursor_lte : cursor_nr;
    while (cur < jam_source.size()) {
      const LabeledRecord& cand = jam_source.records[cur++];
      if (cand.record.cell == cell) return cand.record;
    }
    throw ValidationError("inject_poison: jam_source has too few " +
                          std::string(to_string(cell)) + " records");
  };

  for (std::size_t i = start; i < start + count; ++i) {
    LabeledRecord& victim = out.records[i];
    const KpiRecord& jam = next_jam(victim.record.cell);
    KpiRecord replaced = jam;
    replaced.timestamp_ms = victim.record.timestamp_ms;
    replaced.cell = victim.record.cell;
    victim.record = replaced;
    victim.label = Label::clean();  // poison is mislabeled by definition
  }
  return out;
}

}  // namespace jamdet
