#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hdmed/dataset.hpp"
#include "hdmed/nuisance.hpp"

namespace hdmed {

struct InfluenceValue {
  double f = 0.0;
  double f_car = 0.0;
  double f_star = 0.0;  // f - f_car
};

/// Uncensored-data influence function of Psi_k evaluated with the plug-in
/// nuisances of `ns`; `y` is the observation's IPCW response.
double eval_f(const Observation& obs, double y, const NuisanceSet& ns, std::size_t k);

/// Projection onto the censoring tangent space. Zero for unexposed subjects.
double eval_f_car(const Observation& obs, const NuisanceSet& ns, std::size_t k);

InfluenceValue eval_f_star(const Observation& obs, double y, const NuisanceSet& ns, std::size_t k);

/// Half-open row range [begin, end) of ns.data(). The one-step functional
/// is evaluated at the empirical measure of these rows, so [0, n) gives the
/// usual full-sample estimator and [j, j+1) the point mass at row j.
struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<double> f_star_values(const NuisanceSet& ns, std::size_t k, RowRange rows);

struct OneStepEstimate {
  std::size_t k = 0;
  double psi_plugin = 0.0;
  double correction = 0.0;
  double psi_onestep = 0.0;
  double sigma_hat = 0.0;
  std::size_t n_eval = 0;
};

OneStepEstimate one_step(const NuisanceSet& ns, std::size_t k, RowRange rows);
OneStepEstimate one_step(const NuisanceSet& ns, std::size_t k);

/// sqrt of the mean squared deviation (denominator = count).
double population_sd(std::span<const double> values);

}  // namespace hdmed
