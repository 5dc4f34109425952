#include "jamdet/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace jamdet {

using json = nlohmann::json;

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static const std::array<std::string_view, kFeatureCount> names = {
      "dl_bitrate",      "ul_bitrate",         "dl_packet_rate", "ul_packet_rate",
      "dl_retx_rate",    "ul_retx_rate",       "pusch_snr_db",   "cqi",
      "power_headroom_db", "epre_dbm",         "ul_path_loss_db", "dl_mcs",
      "ul_mcs",          "turbo_decoder_rate"};
  return names;
}

FeatureVector KpiRecord::features() const {
  return {dl_bitrate,
          ul_bitrate,
          dl_packet_rate,
          ul_packet_rate,
          dl_retx_rate,
          ul_retx_rate,
          pusch_snr_db,
          static_cast<double>(cqi),
          power_headroom_db,
          epre_dbm,
          ul_path_loss_db,
          static_cast<double>(dl_mcs),
          static_cast<double>(ul_mcs),
          turbo_decoder_rate};
}

KpiRecord KpiRecord::from_features(std::int64_t timestamp_ms, Cell cell, const FeatureVector& f) {
  KpiRecord r;
  r.timestamp_ms = timestamp_ms;
  r.cell = cell;
  r.dl_bitrate = f[0];
  r.ul_bitrate = f[1];
  r.dl_packet_rate = f[2];
  r.ul_packet_rate = f[3];
  r.dl_retx_rate = f[4];
  r.ul_retx_rate = f[5];
  r.pusch_snr_db = f[6];
  r.cqi = static_cast<int>(std::llround(f[7]));
  r.power_headroom_db = f[8];
  r.epre_dbm = f[9];
  r.ul_path_loss_db = f[10];
  r.dl_mcs = static_cast<int>(std::llround(f[11]));
  r.ul_mcs = static_cast<int>(std::llround(f[12]));
  r.turbo_decoder_rate = f[13];
  return r;
}

namespace {

void check(bool ok, const char* field, const std::string& why) {
  if (!ok) throw ValidationError(std::string("field '") + field + "' " + why);
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void validate(const KpiRecord& rec) {
  check(rec.dl_bitrate >= 0.0 && std::isfinite(rec.dl_bitrate), "dl_bitrate", "must be >= 0");
  check(rec.ul_bitrate >= 0.0 && std::isfinite(rec.ul_bitrate), "ul_bitrate", "must be >= 0");
  check(rec.dl_packet_rate >= 0.0 && std::isfinite(rec.dl_packet_rate), "dl_packet_rate",
        "must be >= 0");
  check(rec.ul_packet_rate >= 0.0 && std::isfinite(rec.ul_packet_rate), "ul_packet_rate",
        "must be >= 0");
  check(rec.dl_retx_rate >= 0.0 && rec.dl_retx_rate <= 1.0, "dl_retx_rate", "must be in [0,1]");
  check(rec.ul_retx_rate >= 0.0 && rec.ul_retx_rate <= 1.0, "ul_retx_rate", "must be in [0,1]");
  check(std::isfinite(rec.pusch_snr_db), "pusch_snr_db", "must be finite");
  check(rec.cqi >= 0 && rec.cqi <= 15, "cqi", "must be in [0,15]");
  check(std::isfinite(rec.power_headroom_db), "power_headroom_db", "must be finite");
  check(std::isfinite(rec.epre_dbm), "epre_dbm", "must be finite");
  check(rec.ul_path_loss_db >= 0.0 && std::isfinite(rec.ul_path_loss_db), "ul_path_loss_db",
        "must be >= 0");
  check(rec.dl_mcs >= 0 && rec.dl_mcs <= 28, "dl_mcs", "must be in [0,28]");
  check(rec.ul_mcs >= 0 && rec.ul_mcs <= 28, "ul_mcs", "must be in [0,28]");
  check(rec.turbo_decoder_rate >= 0.0 && rec.turbo_decoder_rate <= 1.0, "turbo_decoder_rate",
        "must be in [0,1]");
}

std::string Label::key() const {
  if (kind == LabelKind::Clean) return "clean";
  std::ostringstream os;
  os << "type" << jam_type << "_f" << fmt_double(center_freq_mhz) << "_p" << fmt_double(power_dbm);
  return os.str();
}

void Dataset::validate() const {
  std::map<Cell, std::int64_t> last_ts;
  std::size_t row = 1;
  for (const auto& lr : records) {
    try {
      jamdet::validate(lr.record);
    } catch (const ValidationError& e) {
      throw ValidationError("row " + std::to_string(row) + ": " + e.what());
    }
    auto it = last_ts.find(lr.record.cell);
    if (it != last_ts.end() && lr.record.timestamp_ms <= it->second) {
      throw ValidationError("row " + std::to_string(row) +
                            ": timestamps must be strictly increasing within a cell");
    }
    last_ts[lr.record.cell] = lr.record.timestamp_ms;
    ++row;
  }
}

std::string_view to_string(Cell c) { return c == Cell::LTE ? "LTE" : "NR"; }
std::string_view to_string(Channel c) { return c == Channel::CCH ? "CCH" : "DCH"; }
std::string_view to_string(LabelKind k) { return k == LabelKind::Clean ? "clean" : "jam"; }

namespace {

constexpr const char* kCsvHeader =
    "timestamp_ms,cell,dl_bitrate,ul_bitrate,dl_packet_rate,ul_packet_rate,dl_retx_rate,"
    "ul_retx_rate,pusch_snr_db,cqi,power_headroom_db,epre_dbm,ul_path_loss_db,dl_mcs,ul_mcs,"
    "turbo_decoder_rate,label_kind,jam_type,center_freq_mhz,power_dbm,channel";
constexpr std::size_t kCsvColumns = 21;

Cell parse_cell(std::size_t row, std::string_view s) {
  if (s == "LTE") return Cell::LTE;
  if (s == "NR") return Cell::NR;
  throw ParseError(row, "cell", "expected LTE or NR, got '" + std::string(s) + "'");
}

Channel parse_channel(std::size_t row, std::string_view s) {
  if (s == "CCH") return Channel::CCH;
  if (s == "DCH") return Channel::DCH;
  throw ParseError(row, "channel", "expected CCH or DCH, got '" + std::string(s) + "'");
}

double parse_double(std::size_t row, const char* field, std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(row, field, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_int(std::size_t row, const char* field, std::string_view s) {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(row, field, "not an integer: '" + std::string(s) + "'");
  }
  return v;
}

void validate_row(std::size_t row, const KpiRecord& rec) {
  try {
    validate(rec);
  } catch (const ValidationError& e) {
    // Recover the field name for the row-scoped error.
    std::string msg = e.what();
    std::string field = "record";
    auto a = msg.find('\'');
    auto b = msg.find('\'', a + 1);
    if (a != std::string::npos && b != std::string::npos) field = msg.substr(a + 1, b - a - 1);
    throw ParseError(row, field, msg);
  }
}

LabeledRecord parse_csv_row(std::size_t row, const std::vector<std::string_view>& cols) {
  if (cols.size() != kCsvColumns) {
    throw ParseError(row, "row",
                     "expected " + std::to_string(kCsvColumns) + " columns, got " +
                         std::to_string(cols.size()));
  }
  LabeledRecord lr;
  KpiRecord& r = lr.record;
  r.timestamp_ms = parse_int(row, "timestamp_ms", cols[0]);
  r.cell = parse_cell(row, cols[1]);
  r.dl_bitrate = parse_double(row, "dl_bitrate", cols[2]);
  r.ul_bitrate = parse_double(row, "ul_bitrate", cols[3]);
  r.dl_packet_rate = parse_double(row, "dl_packet_rate", cols[4]);
  r.ul_packet_rate = parse_double(row, "ul_packet_rate", cols[5]);
  r.dl_retx_rate = parse_double(row, "dl_retx_rate", cols[6]);
  r.ul_retx_rate = parse_double(row, "ul_retx_rate", cols[7]);
  r.pusch_snr_db = parse_double(row, "pusch_snr_db", cols[8]);
  r.cqi = static_cast<int>(parse_int(row, "cqi", cols[9]));
  r.power_headroom_db = parse_double(row, "power_headroom_db", cols[10]);
  r.epre_dbm = parse_double(row, "epre_dbm", cols[11]);
  r.ul_path_loss_db = parse_double(row, "ul_path_loss_db", cols[12]);
  r.dl_mcs = static_cast<int>(parse_int(row, "dl_mcs", cols[13]));
  r.ul_mcs = static_cast<int>(parse_int(row, "ul_mcs", cols[14]));
  r.turbo_decoder_rate = parse_double(row, "turbo_decoder_rate", cols[15]);

  const std::string_view kind = cols[16];
  if (kind == "clean") {
    for (std::size_t c = 17; c < kCsvColumns; ++c) {
      if (!cols[c].empty()) {
        throw ParseError(row, "label_kind", "clean rows must leave jam columns empty");
      }
    }
    lr.label = Label::clean();
  } else if (kind == "jam") {
    lr.label = Label::jam(static_cast<int>(parse_int(row, "jam_type", cols[17])),
                          parse_double(row, "center_freq_mhz", cols[18]),
                          parse_double(row, "power_dbm", cols[19]), parse_channel(row, cols[20]));
  } else {
    throw ParseError(row, "label_kind", "expected clean or jam, got '" + std::string(kind) + "'");
  }
  validate_row(row, r);
  return lr;
}

Dataset parse_csv(std::string_view bytes) {
  Dataset out;
  std::size_t pos = 0;
  std::size_t row = 0;
  bool saw_header = false;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    std::string_view line = bytes.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? bytes.size() : eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kCsvHeader) throw ParseError(0, "header", "unexpected CSV header");
      saw_header = true;
      continue;
    }
    ++row;
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      cols.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    out.records.push_back(parse_csv_row(row, cols));
  }
  if (!saw_header) throw ParseError(0, "header", "missing CSV header");
  return out;
}

LabeledRecord parse_json_row(std::size_t row, const json& j) {
  if (!j.is_object()) throw ParseError(row, "row", "expected a JSON object");
  auto get = [&](const char* field) -> const json& {
    auto it = j.find(field);
    if (it == j.end()) throw ParseError(row, field, "missing");
    return *it;
  };
  auto num = [&](const char* field) -> double {
    const json& v = get(field);
    if (!v.is_number()) throw ParseError(row, field, "not a number");
    return v.get<double>();
  };
  auto integer = [&](const char* field) -> std::int64_t {
    const json& v = get(field);
    if (!v.is_number_integer()) throw ParseError(row, field, "not an integer");
    return v.get<std::int64_t>();
  };
  auto str = [&](const char* field) -> std::string {
    const json& v = get(field);
    if (!v.is_string()) throw ParseError(row, field, "not a string");
    return v.get<std::string>();
  };

  LabeledRecord lr;
  KpiRecord& r = lr.record;
  r.timestamp_ms = integer("timestamp_ms");
  r.cell = parse_cell(row, str("cell"));
  r.dl_bitrate = num("dl_bitrate");
  r.ul_bitrate = num("ul_bitrate");
  r.dl_packet_rate = num("dl_packet_rate");
  r.ul_packet_rate = num("ul_packet_rate");
  r.dl_retx_rate = num("dl_retx_rate");
  r.ul_retx_rate = num("ul_retx_rate");
  r.pusch_snr_db = num("pusch_snr_db");
  r.cqi = static_cast<int>(integer("cqi"));
  r.power_headroom_db = num("power_headroom_db");
  r.epre_dbm = num("epre_dbm");
  r.ul_path_loss_db = num("ul_path_loss_db");
  r.dl_mcs = static_cast<int>(integer("dl_mcs"));
  r.ul_mcs = static_cast<int>(integer("ul_mcs"));
  r.turbo_decoder_rate = num("turbo_decoder_rate");

  const std::string kind = str("label_kind");
  if (kind == "clean") {
    lr.label = Label::clean();
  } else if (kind == "jam") {
    lr.label = Label::jam(static_cast<int>(integer("jam_type")), num("center_freq_mhz"),
                          num("power_dbm"), parse_channel(row, str("channel")));
  } else {
    throw ParseError(row, "label_kind", "expected clean or jam, got '" + kind + "'");
  }
  validate_row(row, r);
  return lr;
}

Dataset parse_jsonl(std::string_view bytes) {
  Dataset out;
  std::size_t pos = 0;
  std::size_t row = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    std::string_view line = bytes.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? bytes.size() : eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    ++row;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(row, "row", "invalid JSON");
    out.records.push_back(parse_json_row(row, j));
  }
  return out;
}

void append_csv_row(std::string& out, const LabeledRecord& lr) {
  const KpiRecord& r = lr.record;
  out += std::to_string(r.timestamp_ms);
  out += ',';
  out += to_string(r.cell);
  const double doubles_head[7] = {r.dl_bitrate,   r.ul_bitrate,   r.dl_packet_rate,
                                  r.ul_packet_rate, r.dl_retx_rate, r.ul_retx_rate,
                                  r.pusch_snr_db};
  for (double v : doubles_head) {
    out += ',';
    out += fmt_double(v);
  }
  out += ',';
  out += std::to_string(r.cqi);
  const double doubles_mid[3] = {r.power_headroom_db, r.epre_dbm, r.ul_path_loss_db};
  for (double v : doubles_mid) {
    out += ',';
    out += fmt_double(v);
  }
  out += ',';
  out += std::to_string(r.dl_mcs);
  out += ',';
  out += std::to_string(r.ul_mcs);
  out += ',';
  out += fmt_double(r.turbo_decoder_rate);
  out += ',';
  out += to_string(lr.label.kind);
  if (lr.label.kind == LabelKind::Jam) {
    out += ',';
    out += std::to_string(lr.label.jam_type);
    out += ',';
    out += fmt_double(lr.label.center_freq_mhz);
    out += ',';
    out += fmt_double(lr.label.power_dbm);
    out += ',';
    out += to_string(lr.label.channel);
  } else {
    out += ",,,,";
  }
  out += '\n';
}

json record_to_json(const LabeledRecord& lr) {
  const KpiRecord& r = lr.record;
  json j;
  j["timestamp_ms"] = r.timestamp_ms;
  j["cell"] = to_string(r.cell);
  j["dl_bitrate"] = r.dl_bitrate;
  j["ul_bitrate"] = r.ul_bitrate;
  j["dl_packet_rate"] = r.dl_packet_rate;
  j["ul_packet_rate"] = r.ul_packet_rate;
  j["dl_retx_rate"] = r.dl_retx_rate;
  j["ul_retx_rate"] = r.ul_retx_rate;
  j["pusch_snr_db"] = r.pusch_snr_db;
  j["cqi"] = r.cqi;
  j["power_headroom_db"] = r.power_headroom_db;
  j["epre_dbm"] = r.epre_dbm;
  j["ul_path_loss_db"] = r.ul_path_loss_db;
  j["dl_mcs"] = r.dl_mcs;
  j["ul_mcs"] = r.ul_mcs;
  j["turbo_decoder_rate"] = r.turbo_decoder_rate;
  j["label_kind"] = to_string(lr.label.kind);
  if (lr.label.kind == LabelKind::Jam) {
    j["jam_type"] = lr.label.jam_type;
    j["center_freq_mhz"] = lr.label.center_freq_mhz;
    j["power_dbm"] = lr.label.power_dbm;
    j["channel"] = to_string(lr.label.channel);
  }
  return j;
}

}  // namespace

Dataset parse_dataset(std::string_view bytes, DataFormat format) {
  return format == DataFormat::Csv ? parse_csv(bytes) : parse_jsonl(bytes);
}

std::string serialize_dataset(const Dataset& data, DataFormat format) {
  std::string out;
  if (format == DataFormat::Csv) {
    out += kCsvHeader;
    out += '\n';
    for (const auto& lr : data.records) append_csv_row(out, lr);
  } else {
    for (const auto& lr : data.records) {
      out += record_to_json(lr).dump();
      out += '\n';
    }
  }
  return out;
}

namespace {

DataFormat format_from_path(const std::string& path) {
  if (path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0) {
    return DataFormat::Jsonl;
  }
  return DataFormat::Csv;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  Dataset d = parse_dataset(buf.str(), format_from_path(path));
  d.source = path;
  return d;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write dataset file: " + path);
  out << serialize_dataset(data, format_from_path(path));
}

Normalizer fit_normalizer(const std::vector<FeatureVector>& rows, NormMode mode) {
  if (rows.empty()) throw ValidationError("fit_normalizer: empty dataset");
  Normalizer n;
  n.mode = mode;
  n.min.fill(std::numeric_limits<double>::infinity());
  n.max.fill(-std::numeric_limits<double>::infinity());
  n.mean.fill(0.0);
  n.stddev.fill(0.0);

  const double count = static_cast<double>(rows.size());
  for (const auto& f : rows) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      n.min[i] = std::min(n.min[i], f[i]);
      n.max[i] = std::max(n.max[i], f[i]);
      n.mean[i] += f[i];
    }
  }
  for (std::size_t i = 0; i < kFeatureCount; ++i) n.mean[i] /= count;
  for (const auto& f : rows) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      const double d = f[i] - n.mean[i];
      n.stddev[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < kFeatureCount; ++i) n.stddev[i] = std::sqrt(n.stddev[i] / count);
  return n;
}

Normalizer fit_normalizer(const Dataset& data, NormMode mode) {
  return fit_normalizer(to_feature_matrix(data), mode);
}

FeatureVector apply_normalizer(const Normalizer& norm, const FeatureVector& x) {
  FeatureVector y{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (norm.constant(i)) {
      y[i] = 0.0;
    } else if (norm.mode == NormMode::MinMax) {
      const double v = (x[i] - norm.min[i]) / (norm.max[i] - norm.min[i]);
      y[i] = std::clamp(v, 0.0, 1.0);
    } else {
      y[i] = (x[i] - norm.mean[i]) / norm.stddev[i];
    }
  }
  return y;
}

FeatureVector apply_normalizer(const Normalizer& norm, const KpiRecord& rec) {
  return apply_normalizer(norm, rec.features());
}

FeatureVector invert_normalizer(const Normalizer& norm, const FeatureVector& y) {
  FeatureVector x{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (norm.constant(i)) {
      x[i] = norm.mode == NormMode::MinMax ? norm.min[i] : norm.mean[i];
    } else if (norm.mode == NormMode::MinMax) {
      x[i] = norm.min[i] + y[i] * (norm.max[i] - norm.min[i]);
    } else {
      x[i] = norm.mean[i] + y[i] * norm.stddev[i];
    }
  }
  return x;
}

std::vector<Window> make_windows(const Dataset& data, int k, WindowingMode mode) {
  if (k < 1) throw ValidationError("make_windows: k must be >= 1");

  std::vector<std::vector<const LabeledRecord*>> streams;
  if (mode == WindowingMode::Interleaved) {
    streams.emplace_back();
    for (const auto& lr : data.records) streams[0].push_back(&lr);
  } else {
    std::vector<const LabeledRecord*> lte, nr;
    for (const auto& lr : data.records) {
      (lr.record.cell == Cell::LTE ? lte : nr).push_back(&lr);
    }
    if (!lte.empty()) streams.push_back(std::move(lte));
    if (!nr.empty()) streams.push_back(std::move(nr));
  }

  std::vector<Window> out;
  for (const auto& stream : streams) {
    if (stream.size() < static_cast<std::size_t>(k)) {
      throw ValidationError("make_windows: stream of length " + std::to_string(stream.size()) +
                            " is shorter than k=" + std::to_string(k));
    }
    for (std::size_t i = 0; i + k <= stream.size(); ++i) {
      Window w;
      w.k = k;
      w.rows.reserve(k);
      for (int j = 0; j < k; ++j) w.rows.push_back(stream[i + j]->record.features());
      w.label = stream[i + k - 1]->label;
      out.push_back(std::move(w));
    }
  }
  return out;
}

void normalize_windows(std::vector<Window>& windows, const Normalizer& norm) {
  for (auto& w : windows) {
    for (auto& row : w.rows) row = apply_normalizer(norm, row);
  }
}

std::vector<FeatureVector> to_feature_matrix(const Dataset& data) {
  std::vector<FeatureVector> m;
  m.reserve(data.size());
  for (const auto& lr : data.records) m.push_back(lr.record.features());
  return m;
}

std::vector<int> binary_labels(const Dataset& data) {
  std::vector<int> y;
  y.reserve(data.size());
  for (const auto& lr : data.records) y.push_back(lr.label.is_jam() ? 1 : 0);
  return y;
}

}  // namespace jamdet
