#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hdmed {

enum class Standardization { raw, zscore, normal_score };

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One subject, viewed in place. `x` is on the log-time scale.
struct Observation {
  double x = 0.0;
  bool delta = false;
  bool a = false;
  std::span<const double> b;
  std::span<const double> z;
};

/// Columnar store for (x, delta, a, B, Z). Immutable once built.
///
/// Mediators and confounders are stored row-major so that adding one
/// subject to running prefix sums touches contiguous memory.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<double> x, std::vector<std::uint8_t> delta, std::vector<std::uint8_t> a,
          RowMatrix mediators, RowMatrix confounders = {},
          std::vector<std::string> mediator_labels = {},
          std::vector<std::string> confounder_labels = {},
          Standardization standardization = Standardization::raw);

  std::size_t n() const noexcept { return x_.size(); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(mediators_.cols()); }
  std::size_t q() const noexcept { return static_cast<std::size_t>(confounders_.cols()); }

  std::span<const double> x() const noexcept { return x_; }
  std::span<const std::uint8_t> delta() const noexcept { return delta_; }
  std::span<const std::uint8_t> exposure() const noexcept { return a_; }

  double mediator(std::size_t i, std::size_t k) const { return mediators_(i, k); }
  std::span<const double> mediator_row(std::size_t i) const;
  const RowMatrix& mediators() const noexcept { return mediators_; }

  double confounder(std::size_t i, std::size_t l) const { return confounders_(i, l); }
  std::span<const double> confounder_row(std::size_t i) const;
  const RowMatrix& confounders() const noexcept { return confounders_; }

  const std::vector<std::string>& mediator_labels() const noexcept { return mediator_labels_; }
  const std::vector<std::string>& confounder_labels() const noexcept { return confounder_labels_; }
  Standardization standardization() const noexcept { return standardization_; }

  Observation observation(std::size_t i) const;

  /// True when rows [0, prefix_length) contain both exposure levels.
  bool has_both_exposure_levels(std::size_t prefix_length) const;
  /// Throws PositivityError unless the full sample has both exposure levels.
  void require_positivity() const;

  /// Row i of the result is row perm[i] of this dataset.
  Dataset permuted(std::span<const std::size_t> perm) const;
  Dataset with_mediators(RowMatrix mediators, Standardization standardization) const;

 private:
  std::vector<double> x_;
  std::vector<std::uint8_t> delta_;
  std::vector<std::uint8_t> a_;
  RowMatrix mediators_;
  RowMatrix confounders_;
  std::vector<std::string> mediator_labels_;
  std::vector<std::string> confounder_labels_;
  Standardization standardization_ = Standardization::raw;
};

/// Column mapping for CSV ingestion. Mediators are taken from `mediators`
/// when non-empty, else every column starting with `mediator_prefix` when
/// that is non-empty, else every column not otherwise mapped.
struct CsvSchema {
  std::string time;
  std::string status;
  std::string exposure;
  std::vector<std::string> mediators;
  std::string mediator_prefix;
  std::vector<std::string> confounders;
  /// The time column holds raw (positive) times; take logs on ingestion.
  bool log_time = false;
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// zscore: centre and divide by the sample sd (n - 1).
/// normal_score: Phi^{-1}((r - 3/8) / (n + 1/4)) of within-column ranks r,
/// ties receiving their average rank (Blom scores).
Dataset standardize_mediators(const Dataset& d, Standardization method);

/// Fisher-Yates permutation driven by Engine(seed), drawing positions with
/// uniform_index so the result does not depend on the standard library.
std::vector<std::size_t> ordering_permutation(std::size_t n, std::uint64_t seed);

Dataset random_ordering(const Dataset& d, std::uint64_t seed);

std::string to_string(Standardization s);
Standardization parse_standardization(const std::string& name);

}  // namespace hdmed
