#include "hdmed/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "hdmed/competing.hpp"
#include "hdmed/error.hpp"
#include "hdmed/normal.hpp"
#include "hdmed/parallel.hpp"
#include "hdmed/rng.hpp"
#include "hdmed/stabilized.hpp"

namespace hdmed {

namespace {

constexpr const char* kModule = "simulation";
constexpr std::size_t kCalibrationDraws = 100000;
constexpr double kCalibrationTolerance = 0.005;

// Stream indices under a replication seed.
constexpr std::uint64_t kMainStream = 0;
constexpr std::uint64_t kConfounderStream = 1;
constexpr std::uint64_t kCalibrationStream = 2;
constexpr std::uint64_t kOrderingStream = 3;

bool family_m0(Model m) { return m == Model::M0 || m == Model::M0p; }
bool family_m2(Model m) { return m == Model::M2 || m == Model::M2p; }

// Outcome coefficient of B_k (0-based k) in the M2 family.
double m2_beta(std::size_t k) {
  if (k < 5) return 0.2;
  if (k < 10) return -0.1;
  return 0.0;
}

// Exposure loading of B_k (0-based k) in the M1/M2 families.
double exposure_loading(std::size_t k) {
  if (k == 0) return 1.0;
  if (k < 5) return 0.6;
  if (k < 10) return 0.3;
  return 0.0;
}

}  // namespace

bool SimulationSpec::primed() const noexcept {
  return model == Model::M0p || model == Model::M1p || model == Model::M2p;
}

double SimulationSpec::z_coefficient() const noexcept {
  if (z_coef) return *z_coef;
  return primed() ? -0.1 : 0.0;
}

double SimulationSpec::true_psi() const noexcept { return family_m0(model) ? 0.0 : 0.2; }

void SimulationSpec::validate() const {
  if (n < 2) throw DomainError(kModule, "n must be at least 2");
  if (p == 0) throw DomainError(kModule, "p must be positive");
  if (!family_m0(model) && p < 11) {
    throw DomainError(kModule, "models 1 and 2 address mediators 1..10 and need p >= 11");
  }
  if (!(censor_target >= 0.0 && censor_target < 1.0)) {
    throw DomainError(kModule, "censoring target must lie in [0, 1)");
  }
}

double calibrate_censoring_rate(const SimulationSpec& spec, double target, std::uint64_t seed) {
  spec.validate();
  if (!(target >= 0.0 && target < 1.0)) throw DomainError(kModule, "censoring target must lie in [0, 1)");
  if (target == 0.0) return 0.0;

  Engine engine(derive_seed(seed, kCalibrationStream));
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> exponential(1.0);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution z_draw(0.4);
  const double zc = spec.z_coefficient();
  // P(T > C) = P(log E - T < log rate); keep the differences.
  std::vector<double> gap(kCalibrationDraws);
  for (auto& g : gap) {
    const double a = coin(engine) ? 1.0 : 0.0;
    double t = 0.0;
    if (family_m0(spec.model)) {
      t = 0.2 * a;
    } else if (family_m2(spec.model)) {
      t = 0.4 * a;
      for (std::size_t k = 0; k < 10; ++k) t += m2_beta(k) * (exposure_loading(k) * a + normal(engine));
    } else {
      t = 0.4 * a + 0.2 * (a + normal(engine));
    }
    t += normal(engine);
    if (spec.primed()) t += zc * (z_draw(engine) ? 1.0 : 0.0);
    g = std::log(exponential(engine)) - t;
  }
  std::sort(gap.begin(), gap.end());
  auto censored_fraction = [&](double log_rate) {
    const auto below = std::lower_bound(gap.begin(), gap.end(), log_rate) - gap.begin();
    return static_cast<double>(below) / static_cast<double>(gap.size());
  };

  double lo = -5.0, hi = 5.0;
  for (int expand = 0; expand < 10 && censored_fraction(lo) > target; ++expand) lo -= 5.0;
  for (int expand = 0; expand < 10 && censored_fraction(hi) < target; ++expand) hi += 5.0;
  if (censored_fraction(lo) > target || censored_fraction(hi) < target) {
    throw CalibrationError(kModule, "could not bracket the censoring target");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double frac = censored_fraction(mid);
    if (std::abs(frac - target) < kCalibrationTolerance) return std::exp(mid);
    (frac < target ? lo : hi) = mid;
  }
  throw CalibrationError(kModule, "bisection did not reach the censoring tolerance");
}

Dataset generate(const SimulationSpec& spec, std::uint64_t seed, double censor_rate) {
  spec.validate();
  if (!(censor_rate >= 0.0) || !std::isfinite(censor_rate)) {
    throw DomainError(kModule, "censoring rate must be finite and non-negative");
  }
  const std::size_t n = spec.n;
  const std::size_t p = spec.p;
  Engine engine(derive_seed(seed, kMainStream));
  Engine z_engine(derive_seed(seed, kConfounderStream));
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> exponential(1.0);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution z_draw(0.4);
  const double zc = spec.z_coefficient();

  std::vector<double> x(n);
  std::vector<std::uint8_t> delta(n);
  std::vector<std::uint8_t> a(n);
  RowMatrix b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  RowMatrix z(static_cast<Eigen::Index>(n), spec.primed() ? 1 : 0);

  // Exchangeable normals via one shared factor: E_k = sqrt(rho) W + sqrt(1 - rho) V_k.
  const double rho = family_m0(spec.model) ? 0.5 : 0.1;
  const double shared = std::sqrt(rho);
  const double own = std::sqrt(1.0 - rho);
  const std::size_t first_exchangeable = family_m0(spec.model) ? 0 : 10;

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double ai = coin(engine) ? 1.0 : 0.0;
    a[i] = static_cast<std::uint8_t>(ai);
    double* bi = b.row(row).data();
    for (std::size_t k = 0; k < std::min(first_exchangeable, p); ++k) {
      bi[k] = exposure_loading(k) * ai + normal(engine);
    }
    const double w = normal(engine);
    for (std::size_t k = first_exchangeable; k < p; ++k) bi[k] = shared * w + own * normal(engine);

    double t = 0.0;
    if (family_m0(spec.model)) {
      t = 0.2 * ai;
    } else if (family_m2(spec.model)) {
      t = 0.4 * ai;
      for (std::size_t k = 0; k < 10; ++k) t += m2_beta(k) * bi[k];
    } else {
      t = 0.4 * ai + 0.2 * bi[0];
    }
    t += normal(engine);
    const double e = exponential(engine);
    if (spec.primed()) {
      const double zi = z_draw(z_engine) ? 1.0 : 0.0;
      z(row, 0) = zi;
      t += zc * zi;
    }
    const double c = censor_rate > 0.0 ? std::log(e) - std::log(censor_rate)
                                       : std::numeric_limits<double>::infinity();
    x[i] = std::min(t, c);
    delta[i] = t <= c ? 1 : 0;
  }
  return Dataset(std::move(x), std::move(delta), std::move(a), std::move(b), std::move(z));
}

Dataset generate(const SimulationSpec& spec, std::uint64_t seed) {
  const double rate = calibrate_censoring_rate(spec, spec.censor_target, spec.seed);
  return generate(spec, seed, rate);
}

const MethodSummary& CoverageReport::row(Method method, std::size_t p) const {
  for (const auto& r : rows) {
    if (r.method == method && r.p == p) return r;
  }
  throw IndexError(kModule, "no summary row for " + to_string(method) + " at p=" + std::to_string(p));
}

CoverageReport run_coverage_study(const SimulationSpec& spec, const StudyConfig& config) {
  spec.validate();
  if (config.reps == 0) throw DomainError(kModule, "reps must be at least 1");
  if (config.methods.empty()) throw DomainError(kModule, "no methods requested");
  const std::size_t qn = config.qn ? *config.qn
                                   : std::clamp<std::size_t>(
                                         static_cast<std::size_t>(std::llround(config.qn_fraction * static_cast<double>(spec.n))),
                                         1, spec.n - 1);
  const double psi = spec.true_psi();
  const std::size_t methods = config.methods.size();

  CoverageReport report;
  report.model = spec.model;
  report.n = spec.n;
  report.true_psi = psi;
  report.alpha = config.alpha;
  report.censor_rate = calibrate_censoring_rate(spec, spec.censor_target, spec.seed);

  std::vector<ReplicationRecord> records(config.reps * methods);
  StabilizedConfig stab;
  stab.alpha = config.alpha;
  stab.adjust_for_z = config.extended;
  stab.scope = config.scope;
  stab.cond_mean = config.cond_mean;
  const NuisanceOptions options{config.extended, config.cond_mean};

  parallel_for(config.reps, config.threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(spec.seed, r);
    std::optional<Dataset> data;
    std::string data_failure;
    try {
      data = standardize_mediators(generate(spec, rep_seed, report.censor_rate), config.standardization);
      data = random_ordering(*data, derive_seed(rep_seed, kOrderingStream));
    } catch (const Error& e) {
      data_failure = e.what();
    }
    for (std::size_t mi = 0; mi < methods; ++mi) {
      ReplicationRecord& rec = records[r * methods + mi];
      rec.rep = r;
      rec.method = config.methods[mi];
      rec.p = spec.p;
      if (!data) {
        rec.failure = data_failure;
        continue;
      }
      try {
        switch (rec.method) {
          case Method::stabilized: {
            const StabilizedEstimate est = stabilized_one_step(*data, qn, stab);
            rec.estimate = est.s_star;
            rec.se = est.se();
            rec.ci_low = est.ci_low;
            rec.ci_high = est.ci_high;
            rec.p_value = est.p_value;
            break;
          }
          case Method::bonferroni:
          case Method::naive:
          case Method::oracle: {
            const CompetitorResult c =
                rec.method == Method::bonferroni ? bonferroni_one_step(*data, config.alpha, options)
                : rec.method == Method::naive    ? naive_one_step(*data, config.alpha, options)
                                                 : oracle_one_step(*data, config.oracle_k, config.alpha, options);
            rec.estimate = c.estimate;
            rec.se = c.se;
            rec.ci_low = c.ci_low;
            rec.ci_high = c.ci_high;
            rec.p_value = c.p_value;
            break;
          }
        }
        rec.ok = true;
        rec.covered = rec.ci_low <= psi && psi <= rec.ci_high;
        rec.standardized = (rec.estimate - psi) / rec.se;
      } catch (const Error& e) {
        rec.failure = e.what();
      }
    }
  });

  for (std::size_t mi = 0; mi < methods; ++mi) {
    MethodSummary s;
    s.method = config.methods[mi];
    s.extended = config.extended;
    s.p = spec.p;
    std::size_t covered = 0, rejected = 0;
    double width = 0.0, estimate = 0.0;
    for (std::size_t r = 0; r < config.reps; ++r) {
      const auto& rec = records[r * methods + mi];
      if (!rec.ok) {
        ++s.failures;
        continue;
      }
      ++s.reps;
      covered += rec.covered;
      rejected += rec.p_value < config.alpha;
      width += rec.ci_high - rec.ci_low;
      estimate += rec.estimate;
      s.standardized.push_back(rec.standardized);
    }
    if (s.reps > 0) {
      const double count = static_cast<double>(s.reps);
      s.coverage = static_cast<double>(covered) / count;
      s.rejection_rate = static_cast<double>(rejected) / count;
      s.mean_width = width / count;
      s.mean_estimate = estimate / count;
    }
    report.rows.push_back(std::move(s));
  }
  report.replications = std::move(records);
  return report;
}

void write_coverage_csv(std::ostream& out, const std::vector<CoverageReport>& reports) {
  out << "model,method,extended,n,p,reps,failures,coverage,mean_width,mean_estimate,rejection_rate,alpha\n";
  out << std::setprecision(17);
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      out << to_string(rep.model) << ',' << to_string(r.method) << ',' << (r.extended ? 1 : 0) << ','
          << rep.n << ',' << r.p << ',' << r.reps << ',' << r.failures << ',' << r.coverage << ','
          << r.mean_width << ',' << r.mean_estimate << ',' << r.rejection_rate << ',' << rep.alpha
          << '\n';
    }
  }
}

void write_qq_csv(std::ostream& out, const std::vector<CoverageReport>& reports) {
  out << "model,method,p,index,theoretical,statistic\n";
  out << std::setprecision(17);
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      std::vector<double> sorted = r.standardized;
      std::sort(sorted.begin(), sorted.end());
      const double m = static_cast<double>(sorted.size());
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double theoretical = normal_quantile((static_cast<double>(i) + 0.5) / m);
        out << to_string(rep.model) << ',' << to_string(r.method) << ',' << r.p << ',' << i + 1
            << ',' << theoretical << ',' << sorted[i] << '\n';
      }
    }
  }
}

void write_replications_csv(std::ostream& out, const std::vector<CoverageReport>& reports) {
  out << "model,method,p,rep,ok,estimate,se,ci_low,ci_high,p_value,covered,standardized,failure\n";
  out << std::setprecision(17);
  for (const auto& rep : reports) {
    for (const auto& r : rep.replications) {
      std::string failure = r.failure;
      std::replace(failure.begin(), failure.end(), ',', ';');
      std::replace(failure.begin(), failure.end(), '\n', ' ');
      out << to_string(rep.model) << ',' << to_string(r.method) << ',' << r.p << ',' << r.rep + 1
          << ',' << (r.ok ? 1 : 0) << ',' << r.estimate << ',' << r.se << ',' << r.ci_low << ','
          << r.ci_high << ',' << r.p_value << ',' << (r.covered ? 1 : 0) << ',' << r.standardized
          << ',' << failure << '\n';
    }
  }
}

std::string to_string(Model model) {
  switch (model) {
    case Model::M0: return "M0";
    case Model::M1: return "M1";
    case Model::M2: return "M2";
    case Model::M0p: return "M0p";
    case Model::M1p: return "M1p";
    case Model::M2p: return "M2p";
  }
  return "M0";
}

Model parse_model(const std::string& name) {
  if (name == "M0" || name == "0") return Model::M0;
  if (name == "M1" || name == "1") return Model::M1;
  if (name == "M2" || name == "2") return Model::M2;
  if (name == "M0p" || name == "M0'" || name == "0p") return Model::M0p;
  if (name == "M1p" || name == "M1'" || name == "1p") return Model::M1p;
  if (name == "M2p" || name == "M2'" || name == "2p") return Model::M2p;
  throw DomainError(kModule, "unknown model '" + name + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::stabilized: return "stabilized";
    case Method::bonferroni: return "bonferroni";
    case Method::naive: return "naive";
    case Method::oracle: return "oracle";
  }
  return "stabilized";
}

Method parse_method(const std::string& name) {
  if (name == "stabilized") return Method::stabilized;
  if (name == "bonferroni") return Method::bonferroni;
  if (name == "naive") return Method::naive;
  if (name == "oracle") return Method::oracle;
  throw DomainError(kModule, "unknown method '" + name + "'");
}

}  // namespace hdmed
