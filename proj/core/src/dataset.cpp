#include "hdmed/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "hdmed/error.hpp"
#include "hdmed/normal.hpp"
#include "hdmed/rng.hpp"

namespace hdmed {

namespace {

constexpr const char* kModule = "dataset";

std::vector<std::string> default_labels(const std::string& stem, std::size_t count) {
  std::vector<std::string> labels(count);
  for (std::size_t k = 0; k < count; ++k) labels[k] = stem + std::to_string(k + 1);
  return labels;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

double parse_cell(const std::string& cell, std::size_t line, const std::string& column) {
  const std::string text = trim(cell);
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    std::ostringstream os;
    os << "non-numeric or non-finite value '" << text << "' at line " << line << ", column '"
       << column << "'";
    throw ParseError(kModule, os.str());
  }
  return value;
}

std::uint8_t parse_binary(const std::string& cell, std::size_t line, const std::string& column) {
  const double v = parse_cell(cell, line, column);
  if (v != 0.0 && v != 1.0) {
    std::ostringstream os;
    os << "column '" << column << "' must be 0/1, found '" << trim(cell) << "' at line " << line;
    throw DomainError(kModule, os.str());
  }
  return static_cast<std::uint8_t>(v);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
  std::vector<double> ranks(n);
  std::size_t start = 0;
  while (start < n) {
    std::size_t stop = start + 1;
    while (stop < n && values[order[stop]] == values[order[start]]) ++stop;
    // ranks are 1-based; a tie block [start, stop) shares the mean rank
    const double rank = 0.5 * static_cast<double>(start + 1 + stop);
    for (std::size_t t = start; t < stop; ++t) ranks[order[t]] = rank;
    start = stop;
  }
  return ranks;
}

}  // namespace

Dataset::Dataset(std::vector<double> x, std::vector<std::uint8_t> delta,
                 std::vector<std::uint8_t> a, RowMatrix mediators, RowMatrix confounders,
                 std::vector<std::string> mediator_labels,
                 std::vector<std::string> confounder_labels, Standardization standardization)
    : x_(std::move(x)),
      delta_(std::move(delta)),
      a_(std::move(a)),
      mediators_(std::move(mediators)),
      confounders_(std::move(confounders)),
      mediator_labels_(std::move(mediator_labels)),
      confounder_labels_(std::move(confounder_labels)),
      standardization_(standardization) {
  const std::size_t n = x_.size();
  if (delta_.size() != n || a_.size() != n) {
    throw SchemaError(kModule, "time, status and exposure columns differ in length");
  }
  if (static_cast<std::size_t>(mediators_.rows()) != n) {
    if (mediators_.size() == 0) {
      mediators_.resize(static_cast<Eigen::Index>(n), 0);
    } else {
      throw SchemaError(kModule, "mediator matrix row count differs from n");
    }
  }
  if (static_cast<std::size_t>(confounders_.rows()) != n) {
    if (confounders_.size() == 0) {
      confounders_.resize(static_cast<Eigen::Index>(n), 0);
    } else {
      throw SchemaError(kModule, "confounder matrix row count differs from n");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x_[i])) throw DomainError(kModule, "non-finite follow-up time");
    if (delta_[i] > 1 || a_[i] > 1) throw DomainError(kModule, "status/exposure must be 0/1");
  }
  if (!mediators_.allFinite()) throw DomainError(kModule, "non-finite mediator value");
  if (!confounders_.allFinite()) throw DomainError(kModule, "non-finite confounder value");
  if (mediator_labels_.empty()) mediator_labels_ = default_labels("B", p());
  if (confounder_labels_.empty()) confounder_labels_ = default_labels("Z", q());
  if (mediator_labels_.size() != p() || confounder_labels_.size() != q()) {
    throw SchemaError(kModule, "label count does not match column count");
  }
}

std::span<const double> Dataset::mediator_row(std::size_t i) const {
  return {mediators_.data() + i * p(), p()};
}

std::span<const double> Dataset::confounder_row(std::size_t i) const {
  return {confounders_.data() + i * q(), q()};
}

Observation Dataset::observation(std::size_t i) const {
  return Observation{x_[i], delta_[i] != 0, a_[i] != 0, mediator_row(i), confounder_row(i)};
}

bool Dataset::has_both_exposure_levels(std::size_t prefix_length) const {
  bool seen0 = false;
  bool seen1 = false;
  const std::size_t m = std::min(prefix_length, n());
  for (std::size_t i = 0; i < m && !(seen0 && seen1); ++i) {
    (a_[i] ? seen1 : seen0) = true;
  }
  return seen0 && seen1;
}

void Dataset::require_positivity() const {
  if (!has_both_exposure_levels(n())) {
    throw PositivityError(kModule, "both exposure levels must be observed");
  }
}

Dataset Dataset::permuted(std::span<const std::size_t> perm) const {
  const std::size_t n_rows = n();
  if (perm.size() != n_rows) throw SchemaError(kModule, "permutation length differs from n");
  std::vector<double> x(n_rows);
  std::vector<std::uint8_t> delta(n_rows);
  std::vector<std::uint8_t> a(n_rows);
  RowMatrix b(static_cast<Eigen::Index>(n_rows), mediators_.cols());
  RowMatrix z(static_cast<Eigen::Index>(n_rows), confounders_.cols());
  for (std::size_t i = 0; i < n_rows; ++i) {
    const std::size_t src = perm[i];
    x[i] = x_[src];
    delta[i] = delta_[src];
    a[i] = a_[src];
    b.row(static_cast<Eigen::Index>(i)) = mediators_.row(static_cast<Eigen::Index>(src));
    if (q() > 0) z.row(static_cast<Eigen::Index>(i)) = confounders_.row(static_cast<Eigen::Index>(src));
  }
  return Dataset(std::move(x), std::move(delta), std::move(a), std::move(b), std::move(z),
                 mediator_labels_, confounder_labels_, standardization_);
}

Dataset Dataset::with_mediators(RowMatrix mediators, Standardization standardization) const {
  return Dataset(x_, delta_, a_, std::move(mediators), confounders_, mediator_labels_,
                 confounder_labels_, standardization);
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError(kModule, "cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw SchemaError(kModule, "empty file '" + path.string() + "'");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) index.emplace(header[c], c);
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = index.find(name);
    if (it == index.end()) throw SchemaError(kModule, "missing column '" + name + "'");
    return it->second;
  };

  const std::size_t time_col = column(schema.time);
  const std::size_t status_col = column(schema.status);
  const std::size_t exposure_col = column(schema.exposure);
  std::vector<std::size_t> confounder_cols;
  for (const auto& name : schema.confounders) confounder_cols.push_back(column(name));

  std::vector<std::size_t> mediator_cols;
  if (!schema.mediators.empty()) {
    for (const auto& name : schema.mediators) mediator_cols.push_back(column(name));
  } else {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == time_col || c == status_col || c == exposure_col) continue;
      if (std::find(confounder_cols.begin(), confounder_cols.end(), c) != confounder_cols.end()) {
        continue;
      }
      if (!schema.mediator_prefix.empty() && header[c].rfind(schema.mediator_prefix, 0) != 0) {
        continue;
      }
      mediator_cols.push_back(c);
    }
  }
  if (mediator_cols.empty()) throw SchemaError(kModule, "no mediator columns selected");

  std::vector<double> x;
  std::vector<std::uint8_t> delta;
  std::vector<std::uint8_t> a;
  std::vector<double> b_values;
  std::vector<double> z_values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      std::ostringstream os;
      os << "line " << line_no << " has " << fields.size() << " fields, header has "
         << header.size();
      throw ParseError(kModule, os.str());
    }
    double t = parse_cell(fields[time_col], line_no, header[time_col]);
    if (schema.log_time) {
      if (t <= 0.0) {
        std::ostringstream os;
        os << "raw time must be positive for log transform, found " << t << " at line "
           << line_no;
        throw DomainError(kModule, os.str());
      }
      t = std::log(t);
    }
    x.push_back(t);
    delta.push_back(parse_binary(fields[status_col], line_no, header[status_col]));
    a.push_back(parse_binary(fields[exposure_col], line_no, header[exposure_col]));
    for (std::size_t c : mediator_cols) b_values.push_back(parse_cell(fields[c], line_no, header[c]));
    for (std::size_t c : confounder_cols) z_values.push_back(parse_cell(fields[c], line_no, header[c]));
  }
  if (x.empty()) throw SchemaError(kModule, "no data rows in '" + path.string() + "'");

  const auto rows = static_cast<Eigen::Index>(x.size());
  RowMatrix b = Eigen::Map<RowMatrix>(b_values.data(), rows, static_cast<Eigen::Index>(mediator_cols.size()));
  RowMatrix z(rows, static_cast<Eigen::Index>(confounder_cols.size()));
  if (!confounder_cols.empty()) {
    z = Eigen::Map<RowMatrix>(z_values.data(), rows, static_cast<Eigen::Index>(confounder_cols.size()));
  }
  std::vector<std::string> mediator_labels;
  for (std::size_t c : mediator_cols) mediator_labels.push_back(header[c]);
  std::vector<std::string> confounder_labels;
  for (std::size_t c : confounder_cols) confounder_labels.push_back(header[c]);
  return Dataset(std::move(x), std::move(delta), std::move(a), std::move(b), std::move(z),
                 std::move(mediator_labels), std::move(confounder_labels));
}

Dataset standardize_mediators(const Dataset& d, Standardization method) {
  if (method == Standardization::raw) return d;
  const std::size_t n = d.n();
  if (n < 2) throw DomainError(kModule, "standardization needs at least two observations");
  RowMatrix out(d.mediators().rows(), d.mediators().cols());
  std::vector<double> column(n);
  for (std::size_t k = 0; k < d.p(); ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = d.mediator(i, k);
    if (method == Standardization::zscore) {
      const double mean = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(n);
      double ss = 0.0;
      for (double v : column) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n - 1));
      if (!(sd > 0.0) || sd < 1e-12 * std::max(1.0, std::abs(mean))) {
        throw DegenerateColumnError(kModule, "constant mediator column").with_mediator(k);
      }
      for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (column[i] - mean) / sd;
    } else {
      const auto ranks = average_ranks(column);
      const double denom = static_cast<double>(n) + 0.25;
      for (std::size_t i = 0; i < n; ++i) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = normal_quantile((ranks[i] - 0.375) / denom);
      }
    }
  }
  return d.with_mediators(std::move(out), method);
}

std::vector<std::size_t> ordering_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Engine engine(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_index(engine, i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

Dataset random_ordering(const Dataset& d, std::uint64_t seed) {
  const auto perm = ordering_permutation(d.n(), seed);
  return d.permuted(perm);
}

std::string to_string(Standardization s) {
  switch (s) {
    case Standardization::raw: return "raw";
    case Standardization::zscore: return "zscore";
    case Standardization::normal_score: return "normal-score";
  }
  return "raw";
}

Standardization parse_standardization(const std::string& name) {
  if (name == "raw" || name == "none") return Standardization::raw;
  if (name == "zscore") return Standardization::zscore;
  if (name == "normal-score" || name == "normal_score") return Standardization::normal_score;
  throw DomainError(kModule, "unknown standardization '" + name + "'");
}

}  // namespace hdmed
