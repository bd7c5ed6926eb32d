#include "hdmed/nuisance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <mutex>
#include <unordered_map>

#include "hdmed/error.hpp"

namespace hdmed {

namespace {

constexpr const char* kModule = "nuisance";
constexpr double kRankThreshold = 1e-10;

void require_prefix(const Dataset& d, std::size_t len) {
  if (len == 0 || len > d.n()) throw DomainError(kModule, "prefix length out of range");
}

// Least squares by column-pivoted QR on an explicit design; used by the
// direct adjusted fits.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < x.cols()) {
    throw CollinearityError(kModule, "rank-deficient design").with_mediator(k);
  }
  return qr.solve(y);
}

Eigen::MatrixXd base_design(const Dataset& d, std::size_t len) {
  const auto q = static_cast<Eigen::Index>(d.q());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(len), 2 + q);
  for (std::size_t i = 0; i < len; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = d.exposure()[i];
    for (Eigen::Index l = 0; l < q; ++l) x(r, 2 + l) = d.confounder(i, static_cast<std::size_t>(l));
  }
  return x;
}

}  // namespace

ExposureProb fit_exposure_prob(std::span<const std::uint8_t> a) {
  if (a.empty()) throw PositivityError(kModule, "empty prefix");
  std::size_t treated = 0;
  for (auto v : a) treated += v;
  if (treated == 0 || treated == a.size()) {
    throw PositivityError(kModule, "prefix contains a single exposure level");
  }
  const double p1 = static_cast<double>(treated) / static_cast<double>(a.size());
  return {1.0 - p1, p1};
}

MediatorMeans fit_conditional_mediator_means(const Dataset& d, std::size_t len, std::size_t k,
                                             bool adjust_for_z) {
  require_prefix(d, len);
  fit_exposure_prob(d.exposure().first(len));
  if (adjust_for_z && d.q() > 0) {
    const Eigen::MatrixXd x = base_design(d, len);
    Eigen::VectorXd b(static_cast<Eigen::Index>(len));
    for (std::size_t i = 0; i < len; ++i) b(static_cast<Eigen::Index>(i)) = d.mediator(i, k);
    const Eigen::VectorXd coef = least_squares(x, b, k);
    const Eigen::VectorXd zbar = x.rightCols(x.cols() - 2).colwise().mean();
    MediatorMeans out;
    out.zeta = coef(1);
    out.q0 = coef(0) + coef.tail(coef.size() - 2).dot(zbar);
    out.q1 = out.q0 + out.zeta;
    return out;
  }
  double s0 = 0.0, s1 = 0.0;
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < len; ++i) {
    if (d.exposure()[i]) {
      s1 += d.mediator(i, k);
      ++n1;
    } else {
      s0 += d.mediator(i, k);
    }
  }
  MediatorMeans out;
  out.q1 = s1 / static_cast<double>(n1);
  out.q0 = s0 / static_cast<double>(len - n1);
  out.zeta = out.q1 - out.q0;
  return out;
}

double fit_ksv_slope(const Dataset& d, std::size_t len, std::size_t k, std::span<const double> y,
                     bool adjust_for_z) {
  require_prefix(d, len);
  if (adjust_for_z && d.q() > 0) {
    const Eigen::MatrixXd base = base_design(d, len);
    Eigen::MatrixXd x(base.rows(), base.cols() + 1);
    x.leftCols(2) = base.leftCols(2);
    for (std::size_t i = 0; i < len; ++i) x(static_cast<Eigen::Index>(i), 2) = d.mediator(i, k);
    x.rightCols(base.cols() - 2) = base.rightCols(base.cols() - 2);
    const Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(len));
    return least_squares(x, yy, k)(2);
  }
  const double inv = 1.0 / static_cast<double>(len);
  double ma = 0.0, mb = 0.0, my = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    ma += d.exposure()[i];
    mb += d.mediator(i, k);
    my += y[i];
  }
  ma *= inv;
  mb *= inv;
  my *= inv;
  double va = 0.0, vb = 0.0, cab = 0.0, cby = 0.0, cay = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double da = d.exposure()[i] - ma;
    const double db = d.mediator(i, k) - mb;
    const double dy = y[i] - my;
    va += da * da;
    vb += db * db;
    cab += da * db;
    cby += db * dy;
    cay += da * dy;
  }
  va *= inv;
  vb *= inv;
  cab *= inv;
  cby *= inv;
  cay *= inv;
  const double den = va * vb - cab * cab;
  if (!(den > kDenominatorFloor)) {
    throw CollinearityError(kModule, "KSV denominator below tolerance").with_mediator(k);
  }
  return (va * cby - cab * cay) / den;
}

LogisticFit fit_reciprocal_odds(const Dataset& d, std::size_t len, std::size_t k) {
  require_prefix(d, len);
  const ExposureProb ex = fit_exposure_prob(d.exposure().first(len));
  LogisticFit fit;
  fit.theta0 = std::log(ex.p1 / ex.p0);
  fit.theta1 = 0.0;
  for (int it = 1; it <= kMaxLogisticIterations; ++it) {
    double h00 = kLogisticRidge, h01 = 0.0, h11 = kLogisticRidge, g0 = 0.0, g1 = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double b = d.mediator(i, k);
      const double mu = 1.0 / (1.0 + std::exp(-(fit.theta0 + fit.theta1 * b)));
      const double w = mu * (1.0 - mu);
      const double r = d.exposure()[i] - mu;
      g0 += r;
      g1 += r * b;
      h00 += w;
      h01 += w * b;
      h11 += w * b * b;
    }
    const double det = h00 * h11 - h01 * h01;
    const double step0 = (h11 * g0 - h01 * g1) / det;
    const double step1 = (h00 * g1 - h01 * g0) / det;
    fit.theta0 += step0;
    fit.theta1 += step1;
    fit.iterations = it;
    if (!std::isfinite(fit.theta1) || std::abs(fit.theta1) > kSeparationBound) {
      const double sign1 = fit.theta1 < 0 ? -1.0 : 1.0;
      fit.theta1 = sign1 * kSeparationBound;
      fit.theta0 = std::clamp(std::isfinite(fit.theta0) ? fit.theta0 : 0.0, -kSeparationBound,
                              kSeparationBound);
      fit.separated = true;
      return fit;
    }
    if (std::max(std::abs(step0), std::abs(step1)) < kLogisticTolerance) return fit;
  }
  throw ConvergenceError(kModule, "logistic regression did not converge in 50 iterations")
      .with_mediator(k);
}

LinearFit fit_conditional_mean_regression(const Dataset& d, std::size_t len, std::size_t k, bool a,
                                          double s, std::span<const double> y,
                                          ConditionalMeanForm form) {
  require_prefix(d, len);
  const bool masked_form = form == ConditionalMeanForm::masked;
  std::size_t count = 0;
  double mu = 0.0, mv = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto masked = [&](std::size_t i) {
    return (d.exposure()[i] != 0) == a && d.x()[i] >= s;
  };
  for (std::size_t i = 0; i < len; ++i) {
    if (!masked(i)) continue;
    ++count;
    mu += d.mediator(i, k);
    mv += y[i];
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
  }
  const double inv = 1.0 / static_cast<double>(masked_form ? len : std::max<std::size_t>(count, 1));
  mu *= inv;
  mv *= inv;
  double var = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const bool m = masked(i);
    if (!m && !masked_form) continue;
    const double du = (m ? d.mediator(i, k) : 0.0) - mu;
    const double dv = (m ? y[i] : 0.0) - mv;
    var += du * du;
    cov += du * dv;
  }
  var *= inv;
  cov *= inv;
  if (count < 2 || !(var > kMaskedVarianceFloor)) {
    if (s == kMinusInfinity) {
      LinearFit fit{mv, 0.0, true};
      if (!masked_form && count > 0) fit.lower = lo, fit.upper = hi;
      return fit;
    }
    LinearFit fit = fit_conditional_mean_regression(d, len, k, a, kMinusInfinity, y, form);
    fit.fallback = true;
    return fit;
  }
  const double slope = cov / var;
  LinearFit fit{mv - slope * mu, slope, false};
  if (!masked_form) fit.lower = lo, fit.upper = hi;
  return fit;
}

// ---------------------------------------------------------------------------

PrefixMoments::PrefixMoments(const Dataset& d, std::span<const double> y, bool track_confounders)
    : d_(&d), y_(y), track_z_(track_confounders && d.q() > 0) {
  if (y.size() < d.n()) throw SchemaError(kModule, "response vector shorter than the dataset");
  const std::size_t p = d.p();
  sb_.assign(p, 0.0);
  sbb_.assign(p, 0.0);
  sab_.assign(p, 0.0);
  sby_.assign(p, 0.0);
  if (track_z_) {
    const auto q = static_cast<Eigen::Index>(d.q());
    sz_ = Eigen::VectorXd::Zero(q);
    saz_ = Eigen::VectorXd::Zero(q);
    szy_ = Eigen::VectorXd::Zero(q);
    szz_ = Eigen::MatrixXd::Zero(q, q);
    sbz_ = RowMatrix::Zero(static_cast<Eigen::Index>(p), q);
  }
}

void PrefixMoments::advance_to(std::size_t length) {
  if (length < len_ || length > d_->n()) throw DomainError(kModule, "cannot advance prefix to that length");
  const std::size_t p = d_->p();
  for (std::size_t i = len_; i < length; ++i) {
    const double a = d_->exposure()[i];
    const double y = y_[i];
    const double* b = d_->mediator_row(i).data();
    sa_ += a;
    sy_ += y;
    say_ += a * y;
    for (std::size_t k = 0; k < p; ++k) {
      const double bk = b[k];
      sb_[k] += bk;
      sbb_[k] += bk * bk;
      sby_[k] += bk * y;
    }
    if (a != 0.0) {
      for (std::size_t k = 0; k < p; ++k) sab_[k] += b[k];
    }
    if (track_z_) {
      const auto zr = d_->confounder_row(i);
      const Eigen::Map<const Eigen::VectorXd> z(zr.data(), static_cast<Eigen::Index>(zr.size()));
      sz_ += z;
      saz_ += a * z;
      szy_ += y * z;
      szz_ += z * z.transpose();
      for (std::size_t k = 0; k < p; ++k) {
        sbz_.row(static_cast<Eigen::Index>(k)) += b[k] * z.transpose();
      }
    }
  }
  len_ = length;
}

ExposureProb PrefixMoments::exposure() const {
  if (len_ == 0 || sa_ == 0.0 || sa_ == static_cast<double>(len_)) {
    throw PositivityError(kModule, "prefix contains a single exposure level");
  }
  const double p1 = sa_ / static_cast<double>(len_);
  return {1.0 - p1, p1};
}

Eigen::MatrixXd PrefixMoments::base_system_inverse() const {
  const auto q = static_cast<Eigen::Index>(d_->q());
  const double inv = 1.0 / static_cast<double>(len_);
  Eigen::MatrixXd m(2 + q, 2 + q);
  m(0, 0) = 1.0;
  m(0, 1) = m(1, 0) = m(1, 1) = sa_ * inv;
  m.block(0, 2, 1, q) = sz_.transpose() * inv;
  m.block(1, 2, 1, q) = saz_.transpose() * inv;
  m.block(2, 0, q, 1) = sz_ * inv;
  m.block(2, 1, q, 1) = saz_ * inv;
  m.block(2, 2, q, q) = szz_ * inv;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(kRankThreshold);
  if (lu.rank() < m.rows()) {
    throw CollinearityError(kModule, "exposure and confounders are collinear");
  }
  return lu.inverse();
}

MediatorMeans PrefixMoments::adjusted_means(std::size_t k, const Eigen::MatrixXd& base_inverse) const {
  const auto q = static_cast<Eigen::Index>(d_->q());
  const double inv = 1.0 / static_cast<double>(len_);
  Eigen::VectorXd rhs(2 + q);
  rhs(0) = sb_[k] * inv;
  rhs(1) = sab_[k] * inv;
  rhs.tail(q) = sbz_.row(static_cast<Eigen::Index>(k)).transpose() * inv;
  const Eigen::VectorXd coef = base_inverse * rhs;
  MediatorMeans out;
  out.zeta = coef(1);
  out.q0 = coef(0) + coef.tail(q).dot(sz_ * inv);
  out.q1 = out.q0 + out.zeta;
  return out;
}

double PrefixMoments::adjusted_slope(std::size_t k) const {
  const auto q = static_cast<Eigen::Index>(d_->q());
  const double inv = 1.0 / static_cast<double>(len_);
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd m(3 + q, 3 + q);
  m(0, 0) = 1.0;
  m(0, 1) = m(1, 0) = m(1, 1) = sa_ * inv;
  m(0, 2) = m(2, 0) = sb_[k] * inv;
  m(1, 2) = m(2, 1) = sab_[k] * inv;
  m(2, 2) = sbb_[k] * inv;
  m.block(0, 3, 1, q) = sz_.transpose() * inv;
  m.block(3, 0, q, 1) = sz_ * inv;
  m.block(1, 3, 1, q) = saz_.transpose() * inv;
  m.block(3, 1, q, 1) = saz_ * inv;
  m.block(2, 3, 1, q) = sbz_.row(kk) * inv;
  m.block(3, 2, q, 1) = sbz_.row(kk).transpose() * inv;
  m.block(3, 3, q, q) = szz_ * inv;
  Eigen::VectorXd rhs(3 + q);
  rhs(0) = sy_ * inv;
  rhs(1) = say_ * inv;
  rhs(2) = sby_[k] * inv;
  rhs.tail(q) = szy_ * inv;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(kRankThreshold);
  if (lu.rank() < m.rows()) {
    throw CollinearityError(kModule, "rank-deficient adjusted design").with_mediator(k);
  }
  return lu.solve(rhs)(2);
}

MediatorMeans PrefixMoments::means(std::size_t k) const {
  exposure();
  if (track_z_) return adjusted_means(k, base_system_inverse());
  MediatorMeans out;
  out.q1 = sab_[k] / sa_;
  out.q0 = (sb_[k] - sab_[k]) / (static_cast<double>(len_) - sa_);
  out.zeta = out.q1 - out.q0;
  return out;
}

double PrefixMoments::ksv_slope(std::size_t k) const {
  if (len_ == 0) throw DomainError(kModule, "empty prefix");
  if (track_z_) return adjusted_slope(k);
  const double inv = 1.0 / static_cast<double>(len_);
  const double ma = sa_ * inv;
  const double mb = sb_[k] * inv;
  const double my = sy_ * inv;
  const double va = ma - ma * ma;
  const double vb = sbb_[k] * inv - mb * mb;
  const double cab = sab_[k] * inv - ma * mb;
  const double cby = sby_[k] * inv - mb * my;
  const double cay = say_ * inv - ma * my;
  const double den = va * vb - cab * cab;
  if (!(den > kDenominatorFloor)) {
    throw CollinearityError(kModule, "KSV denominator below tolerance").with_mediator(k);
  }
  return (va * cby - cab * cay) / den;
}

void PrefixMoments::fill(std::span<double> q0, std::span<double> q1, std::span<double> zeta,
                         std::span<double> beta) const {
  exposure();
  const std::size_t p = d_->p();
  if (track_z_) {
    const Eigen::MatrixXd base_inverse = base_system_inverse();
    for (std::size_t k = 0; k < p; ++k) {
      const MediatorMeans m = adjusted_means(k, base_inverse);
      q0[k] = m.q0;
      q1[k] = m.q1;
      zeta[k] = m.zeta;
      beta[k] = adjusted_slope(k);
    }
    return;
  }
  const double n1 = sa_;
  const double n0 = static_cast<double>(len_) - sa_;
  for (std::size_t k = 0; k < p; ++k) {
    q1[k] = sab_[k] / n1;
    q0[k] = (sb_[k] - sab_[k]) / n0;
    zeta[k] = q1[k] - q0[k];
    beta[k] = ksv_slope(k);
  }
}

// ---------------------------------------------------------------------------

MediatorNuisance build_mediator_nuisance(const Dataset& d, std::size_t len, std::size_t k,
                                         const CensoringFit& censoring, ConditionalMeanForm form) {
  const auto y = std::span<const double>(censoring.responses.y);
  MediatorNuisance out;
  out.k = k;
  out.recip_odds = fit_reciprocal_odds(d, len, k);
  out.treated_mean = fit_conditional_mean_regression(d, len, k, true, kMinusInfinity, y, form);
  out.control_mean = fit_conditional_mean_regression(d, len, k, false, kMinusInfinity, y, form);

  const CensoringModel& cm = censoring.model;
  const std::size_t jumps = cm.jump_count();
  struct Sums {
    std::size_t count = 0;
    double b = 0.0, bb = 0.0, y = 0.0, by = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
  };
  // Subject i belongs to the risk set of every jump s_m <= x_i, so it is
  // dropped into the bucket of the last such jump and the buckets are
  // accumulated from the top.
  std::vector<Sums> bucket(jumps);
  for (std::size_t i = 0; i < len; ++i) {
    if (!d.exposure()[i]) continue;
    const std::size_t idx = cm.jumps_at_or_before(d.x()[i]);
    if (idx == 0) continue;
    Sums& s = bucket[idx - 1];
    const double b = d.mediator(i, k);
    s.count += 1;
    s.b += b;
    s.bb += b * b;
    s.y += y[i];
    s.by += b * y[i];
    s.lo = std::min(s.lo, y[i]);
    s.hi = std::max(s.hi, y[i]);
  }

  CondMeanPath& path = out.treated_path;
  path.intercept.resize(jumps);
  path.slope.resize(jumps);
  path.fallback.assign(jumps, 0);
  path.clamped = form == ConditionalMeanForm::subsample;
  path.lower.assign(jumps, -std::numeric_limits<double>::infinity());
  path.upper.assign(jumps, std::numeric_limits<double>::infinity());
  const bool masked_form = form == ConditionalMeanForm::masked;
  Sums run;
  for (std::size_t m = jumps; m-- > 0;) {
    run.count += bucket[m].count;
    run.b += bucket[m].b;
    run.bb += bucket[m].bb;
    run.y += bucket[m].y;
    run.by += bucket[m].by;
    run.lo = std::min(run.lo, bucket[m].lo);
    run.hi = std::max(run.hi, bucket[m].hi);
    const double inv =
        1.0 / static_cast<double>(masked_form ? len : std::max<std::size_t>(run.count, 1));
    const double mu = run.b * inv;
    const double mv = run.y * inv;
    const double var = run.bb * inv - mu * mu;
    const double cov = run.by * inv - mu * mv;
    if (run.count < 2 || !(var > kMaskedVarianceFloor)) {
      path.intercept[m] = out.treated_mean.intercept;
      path.slope[m] = out.treated_mean.slope;
      path.lower[m] = out.treated_mean.lower;
      path.upper[m] = out.treated_mean.upper;
      path.fallback[m] = 1;
      ++path.fallback_count;
    } else {
      path.slope[m] = cov / var;
      path.intercept[m] = mv - path.slope[m] * mu;
      if (path.clamped) path.lower[m] = run.lo, path.upper[m] = run.hi;
    }
  }
  const auto dl = cm.hazard_increments();
  path.cum_intercept.assign(jumps + 1, 0.0);
  path.cum_slope.assign(jumps + 1, 0.0);
  for (std::size_t m = 0; m < jumps; ++m) {
    path.cum_intercept[m + 1] = path.cum_intercept[m] + path.intercept[m] * dl[m];
    path.cum_slope[m + 1] = path.cum_slope[m] + path.slope[m] * dl[m];
  }
  return out;
}

// ---------------------------------------------------------------------------

struct NuisanceSet::Cache {
  std::mutex mutex;
  std::unordered_map<std::size_t, std::unique_ptr<MediatorNuisance>> items;
};

NuisanceSet::NuisanceSet(const Dataset& data, std::shared_ptr<const CensoringFit> censoring,
                         const PrefixMoments& moments, NuisanceOptions options)
    : data_(&data),
      censoring_(std::move(censoring)),
      len_(moments.length()),
      options_(options),
      cache_(std::make_unique<Cache>()) {
  if (!censoring_) throw DomainError(kModule, "missing censoring fit");
  exposure_ = moments.exposure();
  const std::size_t p = data.p();
  q0_.resize(p);
  q1_.resize(p);
  zeta_.resize(p);
  beta_.resize(p);
  psi_.resize(p);
  moments.fill(q0_, q1_, zeta_, beta_);
  for (std::size_t k = 0; k < p; ++k) psi_[k] = beta_[k] * zeta_[k];
}

NuisanceSet::NuisanceSet(NuisanceSet&&) noexcept = default;
NuisanceSet& NuisanceSet::operator=(NuisanceSet&&) noexcept = default;
NuisanceSet::~NuisanceSet() = default;

const MediatorNuisance& NuisanceSet::mediator(std::size_t k) const {
  if (k >= p()) throw IndexError(kModule, "mediator index out of range");
  std::lock_guard lock(cache_->mutex);
  auto& slot = cache_->items[k];
  if (!slot) {
    slot = std::make_unique<MediatorNuisance>(build_mediator_nuisance(*data_, len_, k, *censoring_, options_.cond_mean));
  }
  return *slot;
}

NuisanceSet assemble_nuisance(const Dataset& d, std::size_t len,
                              std::shared_ptr<const CensoringFit> censoring,
                              NuisanceOptions options) {
  require_prefix(d, len);
  if (!censoring) throw DomainError(kModule, "missing censoring fit");
  PrefixMoments moments(d, censoring->responses.y, options.adjust_for_z);
  moments.advance_to(len);
  return NuisanceSet(d, std::move(censoring), moments, options);
}

std::string to_string(ConditionalMeanForm form) {
  return form == ConditionalMeanForm::subsample ? "subsample" : "masked";
}

ConditionalMeanForm parse_conditional_mean_form(const std::string& name) {
  if (name == "subsample") return ConditionalMeanForm::subsample;
  if (name == "masked") return ConditionalMeanForm::masked;
  throw DomainError(kModule, "unknown conditional-mean form '" + name + "'");
}

}  // namespace hdmed
