#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hdmed::cli {

/// One analysis result, serialized as a flat JSON object per line.
///
/// Field names match the member names. `selected` lists the mediators picked
/// at the checkpoints of the reported ordering as "label:count" pairs joined
/// by ';', most frequent first.
struct AnalysisRecord {
  std::string version;
  std::string data;
  std::string time;
  std::string status;
  std::string exposure;
  std::string mediators;
  std::string confounders;
  bool log_time = false;
  std::string method;
  bool extended = false;
  std::string standardize;
  std::string nuisance_scope;
  std::string cond_mean;
  std::uint64_t seed = 0;
  double alpha = 0.1;
  std::size_t orderings = 1;
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t q = 0;
  std::size_t qn = 0;
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ci_alpha = 0.1;
  double p_value = 1.0;
  double combined_p = 1.0;
  std::string selected;
  std::size_t failed_orderings = 0;
  std::size_t truncated_weights = 0;
  std::size_t fallback_fits = 0;

  bool operator==(const AnalysisRecord&) const = default;
};

std::string to_json_line(const AnalysisRecord& record);
/// Throws hdmed::ParseError on malformed input or missing fields.
AnalysisRecord parse_json_line(const std::string& line);

void write_records(std::ostream& out, const std::vector<AnalysisRecord>& records);
/// Every non-blank line must be a record. Errors name the file and line.
std::vector<AnalysisRecord> read_records(const std::filesystem::path& path);

}  // namespace hdmed::cli
