#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "twincount/rng.hpp"

namespace twincount {

struct Dimension {
  std::string name;
  double lower = 0.0, upper = 1.0;
  bool log_scale = false;
  bool integer = false;
};

struct SearchSpace {
  std::vector<Dimension> dims;

  void validate() const;
  size_t size() const { return dims.size(); }
  // unit hypercube <-> raw values (log mapping, integer rounding)
  std::vector<double> to_raw(const std::vector<double>& unit) const;
  std::vector<double> to_unit(const std::vector<double>& raw) const;

  // the searched dimensions: learning rate, bottleneck width, shared
  // convolution channels, and the three loss weights
  static SearchSpace default_space();
};

struct Trial {
  std::vector<double> point;  // normalized [0,1]^d
  std::vector<double> raw;
  double objective = 0.0;  // validation MAE, lower is better
  enum class Status { completed, failed } status = Status::completed;
  double duration_s = 0.0;
};

// Squared-exponential GP with per-dimension length scales; hyperparameters
// picked by multi-start gradient-free maximization of the log marginal
// likelihood. Targets are standardized internally.
class GPModel {
 public:
  static GPModel fit(const std::vector<std::vector<double>>& points,
                     const std::vector<double>& values);

  // posterior (mean, variance); variance clamped at 0
  std::pair<double, double> predict(const std::vector<double>& x) const;

  const std::vector<double>& length_scales() const { return length_scales_; }
  double signal_variance() const { return signal_var_; }
  double noise_variance() const { return noise_var_; }
  double log_marginal_likelihood() const { return lml_; }

 private:
  double kernel(const std::vector<double>& a, const std::vector<double>& b) const;

  std::vector<std::vector<double>> x_;
  std::vector<double> y_;  // standardized
  double y_mean_ = 0.0, y_std_ = 1.0;
  std::vector<double> length_scales_;
  double signal_var_ = 1.0, noise_var_ = 1e-8;
  std::vector<double> chol_;   // lower Cholesky factor of K + noise I
  std::vector<double> alpha_;  // (K + noise I)^-1 y
  double lml_ = 0.0;
};

// EI for minimization; max(best - mean, 0) when the variance vanishes.
double expected_improvement(double mean, double variance, double best_so_far);

// First 5 suggestions follow a Halton design; afterwards EI is maximized
// over random candidates plus local refinement around the incumbent.
// Integer dimensions are rounded after optimization.
std::vector<double> suggest(const std::vector<Trial>& trials,
                            const SearchSpace& space, Rng& rng);

struct SearchResult {
  Trial best;
  std::vector<Trial> history;
};

// Runs `budget` trials through the objective callback; failed trials (thrown
// exceptions or non-finite objectives) are recorded and excluded from the
// surrogate. History is appended as JSON lines when a path is given.
SearchResult run_search(
    const SearchSpace& space, int budget,
    const std::function<double(const std::vector<double>& raw)>& objective,
    uint64_t seed, const std::string& history_path = "");

}  // namespace twincount
