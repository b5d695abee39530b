#include "mtpop/popularity.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mtpop/error.hpp"

namespace mtpop {

double log_popularity(std::uint64_t views, double age_days) {
  if (!(age_days > 0.0) || !std::isfinite(age_days)) {
    throw ConfigError(fmt::format("post age must be a positive number of days, got {}", age_days));
  }
  const double r = static_cast<double>(std::max<std::uint64_t>(views, 1));
  return std::log2(r / age_days) + 1.0;
}

std::int64_t day_floor(std::int64_t t) {
  std::int64_t d = t / kSecondsPerDay;
  if (t % kSecondsPerDay < 0) --d;
  return d * kSecondsPerDay;
}

std::size_t Dataset::time_bin(std::int64_t share_time) const {
  const double width = bin_width_days * static_cast<double>(kSecondsPerDay);
  return static_cast<std::size_t>(std::floor(static_cast<double>(share_time - time_origin) / width));
}

void Dataset::validate() const {
  if (!(bin_width_days > 0.0)) throw DataError("bin width must be positive");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.user_id.empty() || r.post_id.empty()) {
      throw DataError(fmt::format("record {} has an empty id", i));
    }
    if (!(r.age_days > 0.0)) throw DataError(fmt::format("record {} has age_days <= 0", i));
    if (r.share_time < time_origin) {
      throw DataError(fmt::format("record {} was shared before the time origin", i));
    }
  }
}

// ---------------------------------------------------------------- timestamps

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return value;
}

std::optional<double> parse_real(std::string_view s) {
  // from_chars for double is unavailable on some toolchains; strtod on a copy.
  if (s.empty()) return std::nullopt;
  std::string copy(s);
  char* end = nullptr;
  const double v = std::strtod(copy.c_str(), &end);
  if (end != copy.c_str() + copy.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::int64_t parse_timestamp(std::string_view raw) {
  const std::string_view text = trim(raw);
  if (auto epoch = parse_number<std::int64_t>(text)) return *epoch;

  auto fail = [&]() -> std::int64_t {
    throw DataError(fmt::format("malformed timestamp '{}'", text));
  };
  auto digits = [&](std::size_t pos, std::size_t n) -> std::int64_t {
    if (pos + n > text.size()) fail();
    auto v = parse_number<std::int64_t>(text.substr(pos, n));
    if (!v || text[pos] == '+' || text[pos] == '-') fail();
    return *v;
  };

  if (text.size() < 10 || text[4] != '-' || text[7] != '-') fail();
  const std::int64_t year = digits(0, 4);
  const std::int64_t month = digits(5, 2);
  const std::int64_t day = digits(8, 2);
  if (month < 1 || month > 12 || day < 1 || day > 31) fail();
  std::int64_t hour = 0, minute = 0, second = 0, offset = 0;
  std::size_t pos = 10;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
    hour = digits(pos + 1, 2);
    if (pos + 3 >= text.size() || text[pos + 3] != ':') fail();
    minute = digits(pos + 4, 2);
    pos += 6;
    if (pos < text.size() && text[pos] == ':') {
      second = digits(pos + 1, 2);
      pos += 3;
      if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
      }
    }
    if (hour > 23 || minute > 59 || second > 60) fail();
  }
  if (pos < text.size()) {
    if (text[pos] == 'Z' && pos + 1 == text.size()) {
      pos = text.size();
    } else if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size() &&
               text[pos + 3] == ':') {
      const std::int64_t sign = text[pos] == '+' ? 1 : -1;
      offset = sign * (digits(pos + 1, 2) * 3600 + digits(pos + 4, 2) * 60);
      pos = text.size();
    } else {
      fail();
    }
  }
  const auto days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  return days * kSecondsPerDay + hour * 3600 + minute * 60 + second - offset;
}

// ----------------------------------------------------------------- ingestion

namespace {

constexpr const char* kMandatory[] = {"user_id", "post_id", "share_time", "views", "age_days"};

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

// Feature column "uf_7" -> 7 for prefix "uf_".
std::optional<std::size_t> feature_slot(std::string_view name, std::string_view prefix) {
  if (name.substr(0, prefix.size()) != prefix) return std::nullopt;
  return parse_number<std::size_t>(name.substr(prefix.size()));
}

// Field values of one row, by logical name, prior to validation.
struct RawRow {
  std::string user_id, post_id, share_time, views, age_days;
  std::vector<std::string> uf, pf;
};

PopularityRecord convert(const RawRow& raw) {
  PopularityRecord r;
  r.user_id = std::string(trim(raw.user_id));
  r.post_id = std::string(trim(raw.post_id));
  if (r.user_id.empty()) throw DataError("empty user_id");
  if (r.post_id.empty()) throw DataError("empty post_id");
  r.share_time = parse_timestamp(raw.share_time);
  auto views = parse_number<std::uint64_t>(trim(raw.views));
  if (!views) {
    // Views written as a real with zero fraction (e.g. "12.0") are accepted.
    auto real = parse_real(trim(raw.views));
    if (!real || *real < 0 || std::floor(*real) != *real) {
      throw DataError(fmt::format("views '{}' is not a non-negative integer", raw.views));
    }
    views = static_cast<std::uint64_t>(*real);
  }
  r.views = *views;
  auto age = parse_real(trim(raw.age_days));
  if (!age) throw DataError(fmt::format("age_days '{}' is not a number", raw.age_days));
  if (!(*age > 0.0)) throw DataError(fmt::format("age_days must be positive, got {}", *age));
  r.age_days = *age;
  auto features = [](const std::vector<std::string>& src, const char* what) {
    FeatureVector out;
    out.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      auto x = parse_real(trim(src[i]));
      if (!x) throw DataError(fmt::format("{}_{} '{}' is not a finite number", what, i, src[i]));
      out.push_back(*x);
    }
    return out;
  };
  r.user_features = features(raw.uf, "uf");
  r.post_features = features(raw.pf, "pf");
  return r;
}

// Collects feature columns named prefix_0..prefix_{p-1}; returns column
// positions ordered by slot.
std::vector<std::size_t> feature_columns(const std::map<std::size_t, std::size_t>& slots,
                                         const char* prefix) {
  std::vector<std::size_t> cols;
  std::size_t expect = 0;
  for (const auto& [slot, col] : slots) {
    if (slot != expect) {
      throw DataError(fmt::format("feature columns {}0..{}{} are not contiguous (missing {}{})",
                                  prefix, prefix, slots.rbegin()->first, prefix, expect));
    }
    cols.push_back(col);
    ++expect;
  }
  return cols;
}

void finish(IngestResult& result, std::size_t rows, double bin_width_days) {
  if (rows > 0 && result.rejected.size() * 10 > rows) {
    std::string first = result.rejected.empty()
                            ? std::string()
                            : fmt::format(" (first: line {}: {})", result.rejected[0].line,
                                          result.rejected[0].reason);
    throw DataError(fmt::format("{} of {} rows rejected, more than 10%{}", result.rejected.size(),
                                rows, first));
  }
  auto& ds = result.dataset;
  ds.bin_width_days = bin_width_days;
  if (!ds.records.empty()) {
    std::int64_t earliest = ds.records.front().share_time;
    for (const auto& r : ds.records) earliest = std::min(earliest, r.share_time);
    ds.time_origin = day_floor(earliest);
  }
  // Feature dimensionality must agree across records.
  if (!ds.records.empty()) {
    const auto p = ds.records.front().user_features.size();
    const auto q = ds.records.front().post_features.size();
    for (const auto& r : ds.records) {
      if (r.user_features.size() != p || r.post_features.size() != q) {
        throw DataError("records disagree on feature dimensionality");
      }
    }
  }
}

IngestResult ingest_csv(std::istream& in, double bin_width_days) {
  IngestResult result;
  std::string line;
  if (!std::getline(in, line)) throw DataError("input is empty (no header line)");
  const auto header = split_csv(line);

  std::map<std::string, std::size_t> mandatory;
  std::map<std::size_t, std::size_t> uf_slots, pf_slots;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(trim(header[c]));
    bool known = false;
    for (const char* m : kMandatory) {
      if (name == m) {
        mandatory[name] = c;
        known = true;
      }
    }
    if (auto s = feature_slot(name, "uf_")) {
      uf_slots[*s] = c;
      known = true;
    } else if (auto s2 = feature_slot(name, "pf_")) {
      pf_slots[*s2] = c;
      known = true;
    }
    if (!known) result.warnings.push_back(fmt::format("ignoring unknown column '{}'", name));
  }
  for (const char* m : kMandatory) {
    if (!mandatory.count(m)) throw DataError(fmt::format("missing mandatory column '{}'", m));
  }
  const auto uf_cols = feature_columns(uf_slots, "uf_");
  const auto pf_cols = feature_columns(pf_slots, "pf_");

  std::size_t line_no = 1, rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++rows;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      result.rejected.push_back(
          {line_no, fmt::format("expected {} fields, found {}", header.size(), fields.size())});
      continue;
    }
    RawRow raw{fields[mandatory["user_id"]], fields[mandatory["post_id"]],
               fields[mandatory["share_time"]], fields[mandatory["views"]],
               fields[mandatory["age_days"]], {}, {}};
    for (auto c : uf_cols) raw.uf.push_back(fields[c]);
    for (auto c : pf_cols) raw.pf.push_back(fields[c]);
    try {
      result.dataset.records.push_back(convert(raw));
    } catch (const DataError& e) {
      result.rejected.push_back({line_no, e.what()});
    }
  }
  finish(result, rows, bin_width_days);
  return result;
}

std::string json_field(const nlohmann::json& obj, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(fmt::format("missing field '{}'", key));
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_unsigned()) return std::to_string(it->get<std::uint64_t>());
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  if (it->is_number_float()) return fmt::format("{}", it->get<double>());
  throw DataError(fmt::format("field '{}' has an unsupported type", key));
}

IngestResult ingest_jsonl(std::istream& in, double bin_width_days) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0, rows = 0;
  std::optional<std::size_t> uf_count, pf_count;
  std::map<std::string, bool> warned;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++rows;
    try {
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed JSON: {}", e.what()));
      }
      if (!obj.is_object()) throw DataError("line is not a JSON object");
      std::map<std::size_t, std::string> uf, pf;
      for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& key = it.key();
        if (auto s = feature_slot(key, "uf_")) {
          uf[*s] = json_field(obj, key);
        } else if (auto s2 = feature_slot(key, "pf_")) {
          pf[*s2] = json_field(obj, key);
        } else {
          bool known = false;
          for (const char* m : kMandatory) known = known || key == m;
          if (!known && !warned[key]) {
            warned[key] = true;
            result.warnings.push_back(fmt::format("ignoring unknown field '{}'", key));
          }
        }
      }
      RawRow raw{json_field(obj, "user_id"), json_field(obj, "post_id"),
                 json_field(obj, "share_time"), json_field(obj, "views"),
                 json_field(obj, "age_days"), {}, {}};
      auto take = [](const std::map<std::size_t, std::string>& slots, std::vector<std::string>& out,
                     const char* prefix) {
        std::size_t expect = 0;
        for (const auto& [slot, value] : slots) {
          if (slot != expect++) throw DataError(fmt::format("{} features are not contiguous", prefix));
          out.push_back(value);
        }
      };
      take(uf, raw.uf, "uf_");
      take(pf, raw.pf, "pf_");
      if (!uf_count) uf_count = raw.uf.size();
      if (!pf_count) pf_count = raw.pf.size();
      if (raw.uf.size() != *uf_count || raw.pf.size() != *pf_count) {
        throw DataError("feature count differs from the first row");
      }
      result.dataset.records.push_back(convert(raw));
    } catch (const DataError& e) {
      result.rejected.push_back({line_no, e.what()});
    }
  }
  finish(result, rows, bin_width_days);
  return result;
}

}  // namespace

IngestResult ingest_stream(std::istream& in, DataFormat format, double bin_width_days) {
  if (!(bin_width_days > 0.0)) throw ConfigError("bin width must be positive");
  if (format == DataFormat::jsonl) return ingest_jsonl(in, bin_width_days);
  return ingest_csv(in, bin_width_days);
}

IngestResult ingest(const std::filesystem::path& path, DataFormat format, double bin_width_days) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open input file '{}'", path.string()));
  if (format == DataFormat::automatic) {
    const auto ext = path.extension().string();
    format = (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") ? DataFormat::jsonl
                                                                     : DataFormat::csv;
  }
  return ingest_stream(in, format, bin_width_days);
}

// ------------------------------------------------------------------- writing

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string csv_header(std::size_t user_dims, std::size_t post_dims) {
  std::string h = "user_id,post_id,share_time,views,age_days";
  for (std::size_t i = 0; i < user_dims; ++i) h += fmt::format(",uf_{}", i);
  for (std::size_t i = 0; i < post_dims; ++i) h += fmt::format(",pf_{}", i);
  return h;
}

void write_csv(const Dataset& ds, std::ostream& out) {
  const std::size_t p = ds.records.empty() ? 0 : ds.records.front().user_features.size();
  const std::size_t q = ds.records.empty() ? 0 : ds.records.front().post_features.size();
  out << csv_header(p, q) << '\n';
  fmt::memory_buffer buf;
  for (const auto& r : ds.records) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{},{},{},{},{}", csv_escape(r.user_id),
                   csv_escape(r.post_id), r.share_time, r.views, r.age_days);
    for (double x : r.user_features) fmt::format_to(std::back_inserter(buf), ",{}", x);
    for (double x : r.post_features) fmt::format_to(std::back_inserter(buf), ",{}", x);
    buf.push_back('\n');
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  write_csv(ds, out);
  if (!out) throw DataError(fmt::format("failed while writing '{}'", path.string()));
}

// ------------------------------------------------------------------- tensors

std::size_t IdMap::intern(const std::string& id) {
  auto [it, inserted] = index.emplace(id, ids.size());
  if (inserted) ids.push_back(id);
  return it->second;
}

TensorIndex index_dataset(const Dataset& ds) {
  ds.validate();
  if (ds.records.empty()) throw DataError("dataset has no records");
  TensorIndex idx;
  idx.cells.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    const std::size_t u = idx.users.intern(r.user_id);
    const std::size_t v = idx.posts.intern(r.post_id);
    const std::size_t t = ds.time_bin(r.share_time);
    idx.cells.push_back({u, v, t});
    idx.time_bins = std::max(idx.time_bins, t + 1);
    idx.features.user_features.emplace(u, r.user_features);
    idx.features.post_features.emplace(v, r.post_features);
    auto [it, inserted] = idx.features.share_time.emplace(v, r.share_time);
    if (!inserted) it->second = std::min(it->second, r.share_time);
  }
  return idx;
}

PTensor build_tensor(const Dataset& ds, const TensorIndex& index,
                     std::span<const std::size_t> records) {
  PTensor tensor(index.dims());
  std::vector<std::uint32_t> counts(tensor.size(), 0);
  for (auto id : records) {
    const Index3& c = index.cells.at(id);
    const std::size_t k = tensor.offset(c.user, c.post, c.time);
    tensor.values()[k] += ds.records[id].popularity();
    tensor.mask()[k] = 1;
    ++counts[k];
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > 1) tensor.values()[k] /= counts[k];
  }
  return tensor;
}

TensorBundle to_tensor(const Dataset& ds) {
  TensorIndex index = index_dataset(ds);
  std::vector<std::size_t> all(ds.records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  PTensor tensor = build_tensor(ds, index, all);
  return {std::move(tensor), std::move(index)};
}

}  // namespace mtpop
