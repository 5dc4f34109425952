#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "jamdet/errors.hpp"

namespace jamdet {

/// Number of numeric KPI features per record. The ordering below is the one
/// canonical feature-vector layout used by every model and file format.
inline constexpr std::size_t kFeatureCount = 14;

/// Interval between consecutive telemetry samples of one cell.
inline constexpr std::int64_t kSamplePeriodMs = 180;

enum class Cell { LTE, NR };
enum class Channel { CCH, DCH };
enum class LabelKind { Clean, Jam };

using FeatureVector = std::array<double, kFeatureCount>;

/// Canonical feature names, in feature-vector order.
const std::array<std::string_view, kFeatureCount>& feature_names();

/// One cross-layer telemetry sample from one cell.
struct KpiRecord {
  std::int64_t timestamp_ms = 0;
  Cell cell = Cell::LTE;

  double dl_bitrate = 0.0;        // bits/s, >= 0
  double ul_bitrate = 0.0;        // bits/s, >= 0
  double dl_packet_rate = 0.0;    // packets/s, >= 0
  double ul_packet_rate = 0.0;    // packets/s, >= 0
  double dl_retx_rate = 0.0;      // [0, 1]
  double ul_retx_rate = 0.0;      // [0, 1]
  double pusch_snr_db = 0.0;      // dB
  int cqi = 0;                    // [0, 15]
  double power_headroom_db = 0.0; // dB
  double epre_dbm = 0.0;          // dBm
  double ul_path_loss_db = 0.0;   // dB, >= 0
  int dl_mcs = 0;                 // [0, 28]
  int ul_mcs = 0;                 // [0, 28]
  double turbo_decoder_rate = 0.0;  // [0, 1]

  FeatureVector features() const;

  /// Rebuild a record from a feature vector (integer features are rounded).
  static KpiRecord from_features(std::int64_t timestamp_ms, Cell cell, const FeatureVector& f);

  bool operator==(const KpiRecord&) const = default;
};

/// Throws ValidationError naming the first out-of-range field.
void validate(const KpiRecord& rec);

/// Ground-truth annotation carried alongside each record. Jam fields are
/// meaningful only when kind == Jam; Clean labels compare equal regardless
/// of what the jam fields hold.
struct Label {
  LabelKind kind = LabelKind::Clean;
  int jam_type = 0;  // m in [0, M]; 0 = unknown type
  double center_freq_mhz = 0.0;
  double power_dbm = 0.0;
  Channel channel = Channel::CCH;

  static Label clean() { return {}; }
  static Label jam(int type, double freq_mhz, double power_dbm, Channel ch) {
    return {LabelKind::Jam, type, freq_mhz, power_dbm, ch};
  }

  bool is_jam() const { return kind == LabelKind::Jam; }

  friend bool operator==(const Label& a, const Label& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == LabelKind::Clean) return true;
    return a.jam_type == b.jam_type && a.center_freq_mhz == b.center_freq_mhz &&
           a.power_dbm == b.power_dbm && a.channel == b.channel;
  }

  /// Stable identifier for stratification and per-type studies,
  /// e.g. "clean" or "type3_f2140_p-5".
  std::string key() const;
};

struct LabeledRecord {
  KpiRecord record;
  Label label;

  bool operator==(const LabeledRecord&) const = default;
};

/// Ordered collection of labeled samples. Within each cell, timestamps must
/// be strictly increasing (the generator emits them on the 180 ms grid).
struct Dataset {
  std::vector<LabeledRecord> records;
  std::string source;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  /// Validates every record plus per-cell timestamp monotonicity.
  void validate() const;
};

enum class DataFormat { Csv, Jsonl };

Dataset parse_dataset(std::string_view bytes, DataFormat format);
std::string serialize_dataset(const Dataset& data, DataFormat format);

/// File helpers; format chosen by extension (.csv / .jsonl).
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& data, const std::string& path);

enum class NormMode { MinMax, ZScore };

/// Per-feature scaling statistics fitted on a training dataset.
struct Normalizer {
  NormMode mode = NormMode::MinMax;
  std::array<double, kFeatureCount> min{};
  std::array<double, kFeatureCount> max{};
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};  // population

  /// True when the feature had zero range in the fit data; such features
  /// always map to 0.
  bool constant(std::size_t f) const { return max[f] <= min[f] || stddev[f] <= 0.0; }
};

Normalizer fit_normalizer(const Dataset& data, NormMode mode);
Normalizer fit_normalizer(const std::vector<FeatureVector>& rows, NormMode mode);

/// MinMax maps into [0,1] (out-of-range inputs clip); ZScore is (x-mean)/stddev.
FeatureVector apply_normalizer(const Normalizer& norm, const FeatureVector& x);
FeatureVector apply_normalizer(const Normalizer& norm, const KpiRecord& rec);

/// Inverse transform; constant features recover their fitted value.
FeatureVector invert_normalizer(const Normalizer& norm, const FeatureVector& y);

/// k consecutive feature vectors, most recent last. The label is the label
/// of the most recent row.
struct Window {
  int k = 1;
  std::vector<FeatureVector> rows;
  Label label;
};

/// PerCell slides over each cell's stream separately; Interleaved slides over
/// the dataset order as one stream, which with alternating LTE/NR rows and
/// k=2 pairs one sample from each cell.
enum class WindowingMode { PerCell, Interleaved };

std::vector<Window> make_windows(const Dataset& data, int k,
                                 WindowingMode mode = WindowingMode::PerCell);

/// Normalize every row of every window in place.
void normalize_windows(std::vector<Window>& windows, const Normalizer& norm);

/// Feature matrix / binary-label views of a dataset (1 = jam).
std::vector<FeatureVector> to_feature_matrix(const Dataset& data);
std::vector<int> binary_labels(const Dataset& data);

std::string_view to_string(Cell c);
std::string_view to_string(Channel c);
std::string_view to_string(LabelKind k);

}  // namespace jamdet
