#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mtpop/rearrange.hpp"
#include "mtpop/tensor.hpp"

namespace mtpop {

inline constexpr std::int64_t kSecondsPerDay = 86400;

/// s = log2(max(r, 1) / d) + 1. Throws ConfigError for d <= 0.
double log_popularity(std::uint64_t views, double age_days);

/// One sharing event <user, post, time> with its raw counts.
struct PopularityRecord {
  std::string user_id;
  std::string post_id;
  std::int64_t share_time = 0;  // epoch seconds, UTC
  std::uint64_t views = 0;
  double age_days = 1.0;
  FeatureVector user_features;
  FeatureVector post_features;

  double popularity() const { return log_popularity(views, age_days); }
  friend bool operator==(const PopularityRecord&, const PopularityRecord&) = default;
};

struct Dataset {
  std::vector<PopularityRecord> records;
  std::int64_t time_origin = 0;
  double bin_width_days = 1.0;

  std::size_t time_bin(std::int64_t share_time) const;
  /// Throws DataError when a record or the binning violates its invariants.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// UTC midnight at or before the earliest share time.
std::int64_t day_floor(std::int64_t epoch_seconds);

/// Integer epoch seconds or ISO-8601 (`YYYY-MM-DD[THH:MM[:SS[.fff]]][Z|±HH:MM]`).
std::int64_t parse_timestamp(std::string_view text);

enum class DataFormat { automatic, csv, jsonl };

struct RowDiagnostic {
  std::size_t line = 0;  // 1-based line in the input, header included
  std::string reason;
};

struct IngestResult {
  Dataset dataset;
  std::vector<RowDiagnostic> rejected;
  std::vector<std::string> warnings;
};

/// Reads a dataset. Malformed rows are rejected individually; more than
/// 10% rejected rows, a missing mandatory column, or an unreadable file is
/// a hard DataError.
IngestResult ingest(const std::filesystem::path& path, DataFormat format = DataFormat::automatic,
                    double bin_width_days = 1.0);
IngestResult ingest_stream(std::istream& in, DataFormat format, double bin_width_days = 1.0);

/// Canonical CSV: integer epoch share times, shortest round-trip reals.
void write_csv(const Dataset& ds, std::ostream& out);
void write_csv(const Dataset& ds, const std::filesystem::path& path);
std::string csv_header(std::size_t user_dims, std::size_t post_dims);

/// Dense id <-> index mapping in first-appearance order.
struct IdMap {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;

  std::size_t intern(const std::string& id);
  std::size_t size() const { return ids.size(); }
};

/// Tensor coordinates for every record of a dataset, plus the context
/// features keyed by tensor index.
struct TensorIndex {
  IdMap users;
  IdMap posts;
  std::size_t time_bins = 0;
  std::vector<Index3> cells;  // one per record
  ContextFeatures features;

  Dims dims() const { return {users.size(), posts.size(), time_bins}; }
};

TensorIndex index_dataset(const Dataset& ds);

/// Tensor observing only the listed record ids; duplicate cells take the mean.
PTensor build_tensor(const Dataset& ds, const TensorIndex& index,
                     std::span<const std::size_t> records);

struct TensorBundle {
  PTensor tensor;
  TensorIndex index;
};

/// Every record observed; throws DataError for an empty dataset.
TensorBundle to_tensor(const Dataset& ds);

}  // namespace mtpop
