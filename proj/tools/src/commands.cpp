#include "hdmed/cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "hdmed/cli/svg.hpp"
#include "hdmed/competing.hpp"
#include "hdmed/dataset.hpp"
#include "hdmed/error.hpp"
#include "hdmed/normal.hpp"
#include "hdmed/parallel.hpp"
#include "hdmed/simulation.hpp"
#include "hdmed/stabilized.hpp"

#ifndef HDMED_VERSION
#define HDMED_VERSION "0.0.0"
#endif

namespace hdmed::cli {

namespace {

constexpr const char* kModule = "cli";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

std::optional<std::size_t> parse_count(const std::string& s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SchemaError(kModule, "cannot write " + path);
  f << content;
}

Standardization standardization_flag(const std::string& s) {
  if (s == "zscore") return Standardization::zscore;
  if (s == "normal-score" || s == "normal_score") return Standardization::normal_score;
  throw DomainError(kModule, "--standardize must be zscore or normal-score, got '" + s + "'");
}

// ---------------------------------------------------------------- analyze

struct AnalyzeOptions {
  std::string data;
  std::string time;
  std::string status;
  std::string exposure;
  std::string mediators;
  std::string confounders;
  bool log_time = false;
  double qn_fraction = 0.8;
  std::string qn_list;
  std::size_t orderings = 1;
  double alpha = 0.1;
  std::uint64_t seed = 1;
  std::string method = "stabilized";
  bool extended = false;
  std::string standardize = "normal-score";
  std::string scope = "appendix";
  std::string cond_mean = "subsample";
  std::string out;
  std::size_t threads = default_threads();
};

std::size_t resolve_mediator(const Dataset& d, const std::string& ref) {
  if (auto idx = parse_count(ref)) {
    if (*idx < 1 || *idx > d.p()) {
      throw IndexError(kModule, "mediator index " + ref + " outside 1.." + std::to_string(d.p()) +
                                    " (indices are 1-based)");
    }
    return *idx - 1;
  }
  const auto& labels = d.mediator_labels();
  const auto it = std::find(labels.begin(), labels.end(), ref);
  if (it == labels.end()) throw IndexError(kModule, "no mediator labelled '" + ref + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

std::vector<std::size_t> qn_values(const AnalyzeOptions& o, std::size_t n) {
  std::vector<std::size_t> out;
  if (!o.qn_list.empty()) {
    for (const auto& item : split(o.qn_list, ',')) {
      const auto v = parse_count(item);
      if (!v) throw DomainError(kModule, "--qn-list entry '" + item + "' is not a count");
      out.push_back(*v);
    }
  } else {
    if (!(o.qn_fraction > 0.0 && o.qn_fraction < 1.0)) {
      throw DomainError(kModule, "--qn-fraction must lie in (0, 1)");
    }
    out.push_back(static_cast<std::size_t>(std::llround(o.qn_fraction * static_cast<double>(n))));
  }
  for (std::size_t qn : out) {
    if (qn < 1 || qn >= n) {
      throw DomainError(kModule, "qn=" + std::to_string(qn) + " must lie in [1, n-1] with n=" +
                                     std::to_string(n));
    }
  }
  return out;
}

AnalysisRecord base_record(const AnalyzeOptions& o, const Dataset& d) {
  AnalysisRecord r;
  r.version = HDMED_VERSION;
  r.data = o.data;
  r.time = o.time;
  r.status = o.status;
  r.exposure = o.exposure;
  r.mediators = o.mediators;
  r.confounders = o.confounders;
  r.log_time = o.log_time;
  r.method = o.method;
  r.extended = o.extended;
  r.standardize = to_string(d.standardization());
  r.nuisance_scope = o.scope;
  r.cond_mean = o.cond_mean;
  r.seed = o.seed;
  r.alpha = o.alpha;
  r.n = d.n();
  r.p = d.p();
  r.q = d.q();
  return r;
}

std::vector<AnalysisRecord> analyze(const AnalyzeOptions& o) {
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw DomainError(kModule, "--alpha must lie in (0, 1)");
  if (o.orderings == 0) throw DomainError(kModule, "--orderings must be at least 1");
  CsvSchema schema;
  schema.time = o.time;
  schema.status = o.status;
  schema.exposure = o.exposure;
  if (o.mediators.find(',') != std::string::npos) {
    schema.mediators = split(o.mediators, ',');
  } else {
    schema.mediator_prefix = o.mediators;
  }
  schema.confounders = split(o.confounders, ',');
  schema.log_time = o.log_time;
  if (o.extended && schema.confounders.empty()) {
    throw DomainError(kModule, "--extended needs --confounders");
  }
  const Standardization method = standardization_flag(o.standardize);
  const NuisanceScope scope = parse_nuisance_scope(o.scope);
  const NuisanceOptions options{o.extended, parse_conditional_mean_form(o.cond_mean)};

  Dataset d = standardize_mediators(load_csv(o.data, schema), method);
  d.require_positivity();

  std::vector<AnalysisRecord> records;
  if (o.method == "stabilized") {
    StabilizedConfig cfg;
    cfg.scope = scope;
    cfg.adjust_for_z = o.extended;
    cfg.cond_mean = options.cond_mean;
    cfg.alpha = o.alpha;
    for (std::size_t qn : qn_values(o, d.n())) {
      const OrderingEnsemble ens =
          multi_ordering_analysis(d, o.orderings, qn, o.alpha, o.seed, cfg, o.threads);
      const StabilizedEstimate& est = ens.reported_estimate();
      AnalysisRecord r = base_record(o, d);
      r.orderings = o.orderings;
      r.qn = qn;
      r.estimate = est.s_star;
      r.se = est.se();
      r.ci_low = ens.combined_ci_low;
      r.ci_high = ens.combined_ci_high;
      r.ci_alpha = o.alpha / static_cast<double>(o.orderings);
      r.p_value = est.p_value;
      r.combined_p = ens.combined_p;
      std::vector<std::string> picks;
      for (const auto& [k, count] : ens.checkpoint_selection) {
        picks.push_back(d.mediator_labels()[k] + ":" + std::to_string(count));
      }
      r.selected = join(picks, ';');
      r.failed_orderings = static_cast<std::size_t>(std::count_if(
          ens.results.begin(), ens.results.end(), [](const auto& x) { return !x.estimate; }));
      r.truncated_weights = est.truncated_weights;
      r.fallback_fits = est.fallback_fits;
      records.push_back(std::move(r));
    }
    return records;
  }

  CompetitorResult c;
  if (o.method == "bonferroni") {
    c = bonferroni_one_step(d, o.alpha, options);
  } else if (o.method == "naive") {
    c = naive_one_step(d, o.alpha, options);
  } else if (o.method.rfind("oracle:", 0) == 0) {
    c = oracle_one_step(d, resolve_mediator(d, o.method.substr(7)), o.alpha, options);
  } else {
    throw DomainError(kModule, "unknown --method '" + o.method +
                                   "' (stabilized, bonferroni, naive, oracle:K)");
  }
  AnalysisRecord r = base_record(o, d);
  r.orderings = 1;
  r.qn = 0;
  r.estimate = c.estimate;
  r.se = c.se;
  r.ci_low = c.ci_low;
  r.ci_high = c.ci_high;
  r.ci_alpha = c.ci_level_alpha;
  r.p_value = c.raw_p;
  r.combined_p = c.p_value;
  r.selected = d.mediator_labels()[c.k_used] + ":1";
  records.push_back(std::move(r));
  return records;
}

void add_analyze(CLI::App& app, AnalyzeOptions& o) {
  auto* cmd = app.add_subcommand("analyze", "Estimate the maximal indirect effect on a CSV dataset");
  cmd->add_option("--data", o.data, "Input CSV")->required();
  cmd->add_option("--time", o.time, "Observed (log) time column")->required();
  cmd->add_option("--status", o.status, "Event indicator column (1 = event)")->required();
  cmd->add_option("--exposure", o.exposure, "Binary exposure column")->required();
  cmd->add_option("--mediators", o.mediators,
                  "Mediator column prefix, or comma-separated list (default: all other columns)");
  cmd->add_option("--confounders", o.confounders, "Comma-separated confounder columns");
  cmd->add_flag("--log-time", o.log_time, "Time column is on the raw scale; take logs");
  auto* frac = cmd->add_option("--qn-fraction", o.qn_fraction, "Burn-in length as a fraction of n");
  auto* list = cmd->add_option("--qn-list", o.qn_list, "Comma-separated burn-in lengths");
  frac->excludes(list);
  list->excludes(frac);
  cmd->add_option("--orderings", o.orderings, "Random orderings combined by Bonferroni");
  cmd->add_option("--alpha", o.alpha, "Significance level");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--method", o.method, "stabilized, bonferroni, naive or oracle:K (1-based)");
  cmd->add_flag("--extended", o.extended, "Adjust nuisance regressions for the confounders");
  cmd->add_option("--standardize", o.standardize, "zscore or normal-score");
  cmd->add_option("--nuisance-scope", o.scope, "appendix or full");
  cmd->add_option("--cond-mean", o.cond_mean, "Risk-set regression form: subsample or masked");
  cmd->add_option("--out", o.out, "Output record file (one JSON object per line)")->required();
  cmd->add_option("--threads", o.threads, "Worker threads");
}

int run_analyze(const AnalyzeOptions& o, std::ostream& out) {
  const auto records = analyze(o);
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw SchemaError(kModule, "cannot write " + o.out);
  write_records(f, records);
  out << record_table_header() << '\n';
  for (const auto& r : records) out << record_table_row(r) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string model;
  std::size_t n = 800;
  std::string p_list = "100";
  std::size_t reps = 500;
  std::string methods = "stabilized";
  std::optional<std::size_t> qn;
  double qn_fraction = 0.8;
  double alpha = 0.1;
  std::uint64_t seed = 1;
  bool extended = false;
  double censor = 0.2;
  std::optional<double> z_coef;
  std::string standardize = "normal-score";
  std::string scope = "appendix";
  std::string cond_mean = "subsample";
  std::size_t oracle_k = 1;
  std::string out_prefix;
  bool svg = false;
  std::size_t threads = default_threads();
};

void add_simulate(CLI::App& app, SimulateOptions& o) {
  auto* cmd = app.add_subcommand("simulate", "Run a coverage study on a simulation model");
  cmd->add_option("--model", o.model, "M0, M1, M2, M0p, M1p or M2p")->required();
  cmd->add_option("--n", o.n, "Sample size");
  cmd->add_option("--p", o.p_list, "Comma-separated numbers of mediators");
  cmd->add_option("--reps", o.reps, "Replications per p");
  cmd->add_option("--methods", o.methods, "Comma-separated: stabilized, bonferroni, naive, oracle");
  auto* qn = cmd->add_option("--qn", o.qn, "Burn-in length");
  auto* frac = cmd->add_option("--qn-fraction", o.qn_fraction, "Burn-in length as a fraction of n");
  qn->excludes(frac);
  frac->excludes(qn);
  cmd->add_option("--alpha", o.alpha, "Significance level");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_flag("--extended", o.extended, "Adjust for the confounder");
  cmd->add_option("--censor", o.censor, "Target censoring fraction");
  cmd->add_option("--z-coef", o.z_coef, "Coefficient of Z in the primed models");
  cmd->add_option("--standardize", o.standardize, "zscore or normal-score");
  cmd->add_option("--nuisance-scope", o.scope, "appendix or full");
  cmd->add_option("--cond-mean", o.cond_mean, "Risk-set regression form: subsample or masked");
  cmd->add_option("--oracle-k", o.oracle_k, "Mediator used by the oracle method (1-based)");
  cmd->add_option("--out-prefix", o.out_prefix, "Prefix for the output files")->required();
  cmd->add_flag("--svg", o.svg, "Also write SVG panels");
  cmd->add_option("--threads", o.threads, "Worker threads");
}

Chart metric_chart(const std::vector<CoverageReport>& reports, bool coverage) {
  Chart c;
  const CoverageReport& first = reports.front();
  c.title = to_string(first.model) + (coverage ? ": empirical coverage" : ": mean CI width");
  c.x_label = "p";
  c.y_label = coverage ? "coverage" : "width";
  c.log_x = true;
  if (coverage) c.reference_y = 1.0 - first.alpha;
  std::map<std::string, Series> by_method;
  std::vector<std::string> order;
  for (const auto& rep : reports) {
    for (const auto& row : rep.rows) {
      const std::string name = to_string(row.method) + (row.extended ? " (ext)" : "");
      if (!by_method.count(name)) {
        order.push_back(name);
        by_method[name].name = name;
      }
      by_method[name].points.emplace_back(static_cast<double>(row.p),
                                          coverage ? row.coverage : row.mean_width);
    }
  }
  for (const auto& name : order) c.series.push_back(by_method[name]);
  return c;
}

Chart qq_chart(const std::vector<CoverageReport>& reports) {
  Chart c;
  c.title = to_string(reports.front().model) + ": standardized statistics";
  c.x_label = "N(0,1) quantile";
  c.y_label = "sample quantile";
  c.diagonal = true;
  for (const auto& rep : reports) {
    for (const auto& row : rep.rows) {
      Series s;
      s.name = to_string(row.method) + " p=" + std::to_string(row.p);
      s.line = false;
      std::vector<double> sorted = row.standardized;
      std::sort(sorted.begin(), sorted.end());
      const double m = static_cast<double>(sorted.size());
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        s.points.emplace_back(normal_quantile((static_cast<double>(i) + 0.5) / m), sorted[i]);
      }
      c.series.push_back(std::move(s));
    }
  }
  return c;
}

std::string coverage_table(const std::vector<CoverageReport>& reports) {
  std::ostringstream o;
  o << "model  method       ext  p        reps  fail  coverage  width     mean_est  reject\n";
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      char line[160];
      std::snprintf(line, sizeof line, "%-6s %-12s %-4d %-8zu %-5zu %-5zu %-9.4f %-9.4f %-9.4f %.4f\n",
                    to_string(rep.model).c_str(), to_string(r.method).c_str(), r.extended ? 1 : 0,
                    r.p, r.reps, r.failures, r.coverage, r.mean_width, r.mean_estimate,
                    r.rejection_rate);
      o << line;
    }
  }
  return o.str();
}

int run_simulate(const SimulateOptions& o, std::ostream& out) {
  SimulationSpec spec;
  spec.model = parse_model(o.model);
  spec.n = o.n;
  spec.censor_target = o.censor;
  spec.seed = o.seed;
  spec.z_coef = o.z_coef;

  StudyConfig cfg;
  cfg.methods.clear();
  for (const auto& m : split(o.methods, ',')) cfg.methods.push_back(parse_method(m));
  cfg.reps = o.reps;
  cfg.qn = o.qn;
  cfg.qn_fraction = o.qn_fraction;
  cfg.alpha = o.alpha;
  cfg.extended = o.extended;
  cfg.standardization = standardization_flag(o.standardize);
  cfg.scope = parse_nuisance_scope(o.scope);
  cfg.cond_mean = parse_conditional_mean_form(o.cond_mean);
  if (o.oracle_k < 1) throw IndexError(kModule, "--oracle-k is 1-based");
  cfg.oracle_k = o.oracle_k - 1;
  cfg.threads = o.threads;
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw DomainError(kModule, "--alpha must lie in (0, 1)");
  if (!cfg.qn && !(cfg.qn_fraction > 0.0 && cfg.qn_fraction < 1.0)) {
    throw DomainError(kModule, "--qn-fraction must lie in (0, 1)");
  }
  if (cfg.qn && (*cfg.qn < 1 || *cfg.qn >= spec.n)) {
    throw DomainError(kModule, "--qn must lie in [1, n-1]");
  }

  std::vector<CoverageReport> reports;
  for (const auto& item : split(o.p_list, ',')) {
    const auto p = parse_count(item);
    if (!p) throw DomainError(kModule, "--p entry '" + item + "' is not a count");
    spec.p = *p;
    if (cfg.oracle_k >= spec.p) {
      throw IndexError(kModule, "--oracle-k exceeds p=" + std::to_string(spec.p));
    }
    reports.push_back(run_coverage_study(spec, cfg));
  }
  if (reports.empty()) throw DomainError(kModule, "--p is empty");

  std::ostringstream cov, qq, reps;
  write_coverage_csv(cov, reports);
  write_qq_csv(qq, reports);
  write_replications_csv(reps, reports);
  write_file(o.out_prefix + "_coverage.csv", cov.str());
  write_file(o.out_prefix + "_qq.csv", qq.str());
  write_file(o.out_prefix + "_replications.csv", reps.str());
  if (o.svg) {
    write_file(o.out_prefix + "_coverage.svg", render_svg(metric_chart(reports, true)));
    write_file(o.out_prefix + "_width.svg", render_svg(metric_chart(reports, false)));
    write_file(o.out_prefix + "_qq.svg", render_svg(qq_chart(reports)));
  }
  out << "model=" << to_string(spec.model) << " n=" << spec.n << " seed=" << spec.seed
      << " censor_rate=" << reports.front().censor_rate << '\n';
  out << coverage_table(reports);
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  std::vector<std::string> inputs;
  std::string svg_prefix;
};

void add_report(CLI::App& app, ReportOptions& o) {
  auto* cmd = app.add_subcommand("report", "Merge analysis records or coverage tables");
  cmd->add_option("inputs", o.inputs, "Record (.jsonl) or coverage (.csv) files");
  cmd->add_option("--svg-prefix", o.svg_prefix, "Write SVG panels with this prefix");
}

struct CoverageRow {
  std::string model;
  std::string method;
  bool extended = false;
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double coverage = 0.0;
  double mean_width = 0.0;
  double mean_estimate = 0.0;
  double rejection_rate = 0.0;
  double alpha = 0.0;
};

constexpr const char* kCoverageHeader =
    "model,method,extended,n,p,reps,failures,coverage,mean_width,mean_estimate,rejection_rate,alpha";

std::vector<CoverageRow> read_coverage(const std::string& path, std::istream& in) {
  std::vector<CoverageRow> rows;
  std::string line;
  std::size_t line_no = 1;
  auto bad = [&](const std::string& what) {
    return ParseError(kModule, path + ":" + std::to_string(line_no) + ": " + what);
  };
  auto number = [&](const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw bad("'" + s + "' is not a number");
    return v;
  };
  auto count = [&](const std::string& s) {
    const auto v = parse_count(s);
    if (!v) throw bad("'" + s + "' is not a count");
    return *v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string item;
    std::istringstream ls(line);
    while (std::getline(ls, item, ',')) f.push_back(item);
    if (f.size() != 12) throw bad("expected 12 fields, found " + std::to_string(f.size()));
    CoverageRow r;
    r.model = f[0];
    r.method = f[1];
    r.extended = count(f[2]) != 0;
    r.n = count(f[3]);
    r.p = count(f[4]);
    r.reps = count(f[5]);
    r.failures = count(f[6]);
    r.coverage = number(f[7]);
    r.mean_width = number(f[8]);
    r.mean_estimate = number(f[9]);
    r.rejection_rate = number(f[10]);
    r.alpha = number(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

int run_report(const ReportOptions& o, std::ostream& out) {
  if (o.inputs.empty()) throw SchemaError(kModule, "report needs at least one input file");
  std::vector<AnalysisRecord> records;
  std::vector<CoverageRow> coverage;
  for (const auto& path : o.inputs) {
    std::ifstream in(path);
    if (!in) throw ParseError(kModule, "cannot open " + path);
    std::string first;
    while (std::getline(in, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
    }
    if (!first.empty() && first.back() == '\r') first.pop_back();
    const auto start = first.find_first_not_of(" \t");
    if (start != std::string::npos && first[start] == '{') {
      auto more = read_records(path);
      records.insert(records.end(), more.begin(), more.end());
    } else if (first == kCoverageHeader) {
      auto more = read_coverage(path, in);
      coverage.insert(coverage.end(), more.begin(), more.end());
    } else {
      throw ParseError(kModule, path + ": neither an analysis record file nor a coverage table");
    }
  }

  if (!records.empty()) {
    std::stable_sort(records.begin(), records.end(), [](const auto& l, const auto& r) {
      return std::tie(l.qn, l.method) < std::tie(r.qn, r.method);
    });
    out << record_table_header() << '\n';
    for (const auto& r : records) out << record_table_row(r) << '\n';
  }
  if (!coverage.empty()) {
    std::stable_sort(coverage.begin(), coverage.end(), [](const auto& l, const auto& r) {
      return std::tie(l.model, l.method, l.extended, l.p) <
             std::tie(r.model, r.method, r.extended, r.p);
    });
    if (!records.empty()) out << '\n';
    out << "model  method       ext  p        reps  fail  coverage  width     mean_est  reject\n";
    for (const auto& r : coverage) {
      char line[160];
      std::snprintf(line, sizeof line, "%-6s %-12s %-4d %-8zu %-5zu %-5zu %-9.4f %-9.4f %-9.4f %.4f\n",
                    r.model.c_str(), r.method.c_str(), r.extended ? 1 : 0, r.p, r.reps,
                    r.failures, r.coverage, r.mean_width, r.mean_estimate, r.rejection_rate);
      out << line;
    }
  }

  if (!o.svg_prefix.empty()) {
    if (!records.empty()) {
      Chart c;
      c.title = "Estimate and confidence limits by burn-in length";
      c.x_label = "qn";
      c.y_label = "estimate";
      std::map<std::string, std::array<Series, 3>> by_method;
      for (const auto& r : records) {
        auto& s = by_method[r.method];
        s[0].name = r.method;
        s[1].name = r.method + " lower";
        s[2].name = r.method + " upper";
        const double x = static_cast<double>(r.qn);
        s[0].points.emplace_back(x, r.estimate);
        s[1].points.emplace_back(x, r.ci_low);
        s[2].points.emplace_back(x, r.ci_high);
      }
      for (auto& [name, s] : by_method) {
        for (auto& series : s) c.series.push_back(series);
      }
      c.reference_y = 0.0;
      write_file(o.svg_prefix + "_estimates.svg", render_svg(c));
    }
    if (!coverage.empty()) {
      for (bool is_cov : {true, false}) {
        Chart c;
        c.title = is_cov ? "Empirical coverage" : "Mean CI width";
        c.x_label = "p";
        c.y_label = is_cov ? "coverage" : "width";
        c.log_x = true;
        if (is_cov) c.reference_y = 1.0 - coverage.front().alpha;
        std::map<std::string, Series> by_key;
        for (const auto& r : coverage) {
          const std::string key = r.model + " " + r.method + (r.extended ? " (ext)" : "");
          by_key[key].name = key;
          by_key[key].points.emplace_back(static_cast<double>(r.p),
                                          is_cov ? r.coverage : r.mean_width);
        }
        for (auto& [key, s] : by_key) c.series.push_back(s);
        write_file(o.svg_prefix + (is_cov ? "_coverage.svg" : "_width.svg"), render_svg(c));
      }
    }
  }
  return kExitOk;
}

}  // namespace

std::string record_table_header() {
  char line[200];
  std::snprintf(line, sizeof line, "%-12s %6s %10s %10s %-23s %10s %10s  %s", "method", "qn",
                "Est.", "S.E.", "C.I.", "P-Value", "Comb.P", "selected");
  return line;
}

std::string record_table_row(const AnalysisRecord& r) {
  const std::string ci = "(" + fmt("%.4f", r.ci_low) + ", " + fmt("%.4f", r.ci_high) + ")";
  char line[400];
  std::snprintf(line, sizeof line, "%-12s %6zu %10.4f %10.4f %-23s %10.3g %10.3g  %s",
                r.method.c_str(), r.qn, r.estimate, r.se, ci.c_str(), r.p_value, r.combined_p,
                r.selected.c_str());
  return line;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-selection inference for the maximal indirect effect on censored survival"};
  app.set_version_flag("--version", HDMED_VERSION);
  app.require_subcommand(1);
  AnalyzeOptions analyze_opts;
  SimulateOptions simulate_opts;
  ReportOptions report_opts;
  add_analyze(app, analyze_opts);
  add_simulate(app, simulate_opts);
  add_report(app, report_opts);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (app.got_subcommand("analyze")) return run_analyze(analyze_opts, out);
    if (app.got_subcommand("simulate")) return run_simulate(simulate_opts, out);
    return run_report(report_opts, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.category() == ErrorCategory::numeric ? kExitNumeric : kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace hdmed::cli
