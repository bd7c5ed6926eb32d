#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hdmed/cli/record.hpp"

namespace hdmed::cli {

/// Exit codes of the hdmed tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumeric = 2;

/// Entry point shared by main() and the tests; `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Table header and one row in the analyze/report summary layout.
std::string record_table_header();
std::string record_table_row(const AnalysisRecord& r);

}  // namespace hdmed::cli
