#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qklab/dataset.hpp"
#include "qklab/kernel_matrix.hpp"

namespace qklab {

/// c = a * n^(-alpha): the bandwidth law tying the embedding scale to the
/// feature count.
double bandwidth_from(double a, double alpha, int n);

struct SearchDim {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  bool log_scale = false;
  std::optional<double> pinned;  // fixed value, excluded from the search
};

/// SVM hyperparameter box: C log-uniform [1e0, 1e2], a log-uniform
/// [1e-1, 1e1], alpha uniform [0, 3]. The no-bandwidth protocol pins
/// a = 1, alpha = 0 and optimizes C alone through the same code path.
struct SearchSpace {
  std::vector<SearchDim> dims;

  static SearchSpace svm_bandwidth();
  static SearchSpace svm_no_bandwidth();

  std::size_t active_count() const;
  /// Map a unit-cube point over the active dims to the full parameter
  /// vector (pinned dims filled in, log dims exponentiated).
  std::vector<double> params_from_unit(std::span<const double> unit) const;
};

struct GpConfig {
  double signal_var = 1.0;   // prior variance
  double length_scale = 0.2; // in the unit-cube-normalized space
  double noise = 1e-6;
  double max_jitter = 1e-8;
};

struct GpPosterior {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Squared-exponential GP regression posterior at `query`, observations
/// centered on their empirical mean. Cholesky with escalating jitter;
/// throws when the covariance stays singular past max_jitter.
GpPosterior gp_posterior(const std::vector<std::vector<double>>& points,
                         const std::vector<double>& values,
                         std::span<const double> query,
                         const GpConfig& config = {});

/// Expected improvement (maximization form):
///   (mean-best) Phi(z) + std phi(z), z = (mean-best)/std;
/// the std = 0 limit is max(mean-best, 0).
double expected_improvement(double mean, double stddev, double best_so_far);

struct HpoIteration {
  std::vector<double> params;
  double score = 0.0;
};

struct HpoTrace {
  std::vector<HpoIteration> iterations;
  std::vector<double> best_params;
  double best_score = 0.0;
  std::uint64_t seed = 0;
  int n_features = 0;
};

struct BayesOptions {
  int iterations = 50;
  int init_points = 10;   // scrambled Halton start
  int candidates = 1024;  // EI maximized over this many seeded samples
  GpConfig gp;
};

/// Bayesian optimization of `objective` (to be maximized) over the active
/// dims. Deterministic per seed; objective failures propagate with the
/// failing parameters attached to the message.
HpoTrace bayes_optimize(
    const std::function<double(const std::vector<double>&)>& objective,
    const SearchSpace& space, const BayesOptions& opts, std::uint64_t seed);

nlohmann::json trace_to_json(const HpoTrace& trace);
HpoTrace trace_from_json(const nlohmann::json& j);

/// Everything needed to score one (split, n) cell on the validation set.
struct ObjectiveContext {
  const SpectralDataset* normalized = nullptr;  // full-feature, normalized
  const std::vector<Eigen::Index>* ranking = nullptr;
  const DatasetSplit* split = nullptr;
  int n_features = 0;
  KernelKind kind = KernelKind::FidelityQuantum;
  SimBackend backend = SimBackend::Tn;
  int workers = 1;
  int sv_cap = kDefaultQubitCap;
};

/// Builds the train and train x val kernels at c = a * n^-alpha (gamma = c^2
/// for the RBF counterpart), trains the SVM at C and returns validation
/// accuracy. params = {C, a, alpha}.
double validation_objective(const ObjectiveContext& ctx,
                            const std::vector<double>& params);

/// Accuracy of the model trained on `train` against an arbitrary labeled
/// cross kernel; shared by the objective and the final test evaluation.
double evaluate_accuracy(const KernelMatrix& k_train,
                         const std::vector<int>& y_train,
                         const KernelMatrix& k_cross,
                         const std::vector<int>& y_eval, double C);

}  // namespace qklab
