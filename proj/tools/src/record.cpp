#include "hdmed/cli/record.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "hdmed/error.hpp"

namespace hdmed::cli {

namespace {

using nlohmann::ordered_json;

#define HDMED_RECORD_FIELDS(X)                                                              \
  X(version) X(data) X(time) X(status) X(exposure) X(mediators) X(confounders) X(log_time) \
  X(method) X(extended) X(standardize) X(nuisance_scope) X(cond_mean) X(seed) X(alpha) X(orderings)     \
  X(n) X(p) X(q) X(qn) X(estimate) X(se) X(ci_low) X(ci_high) X(ci_alpha) X(p_value)       \
  X(combined_p) X(selected) X(failed_orderings) X(truncated_weights) X(fallback_fits)

}  // namespace

std::string to_json_line(const AnalysisRecord& record) {
  ordered_json j;
#define X(field) j[#field] = record.field;
  HDMED_RECORD_FIELDS(X)
#undef X
  return j.dump();
}

AnalysisRecord parse_json_line(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("cli", std::string("not a JSON record: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("cli", "record is not a JSON object");
  AnalysisRecord r;
  try {
#define X(field) j.at(#field).get_to(r.field);
    HDMED_RECORD_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("cli", std::string("bad record field: ") + e.what());
  }
  return r;
}

#undef HDMED_RECORD_FIELDS

void write_records(std::ostream& out, const std::vector<AnalysisRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<AnalysisRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cli", "cannot open " + path.string());
  std::vector<AnalysisRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_json_line(line));
    } catch (const ParseError& e) {
      throw ParseError("cli", path.string() + ":" + std::to_string(line_no) + ": " + e.message());
    }
  }
  return out;
}

}  // namespace hdmed::cli
