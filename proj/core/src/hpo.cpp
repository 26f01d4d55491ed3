#include "qklab/hpo.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "qklab/rng.hpp"
#include "qklab/svm.hpp"

namespace qklab {

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Halton sequence in the given prime base, Cranley-Patterson rotated by a
// seeded shift: a scrambled low-discrepancy start for the optimizer.
double halton(int index, int base) {
  double f = 1.0, r = 0.0;
  int i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13};

double se_kernel(const std::vector<double>& a, const std::vector<double>& b,
                 const GpConfig& cfg) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d2 += diff * diff;
  }
  return cfg.signal_var *
         std::exp(-0.5 * d2 / (cfg.length_scale * cfg.length_scale));
}

}  // namespace

double bandwidth_from(double a, double alpha, int n) {
  if (!(a > 0.0)) throw std::invalid_argument("bandwidth_from: a must be > 0");
  if (n < 1) throw std::invalid_argument("bandwidth_from: n must be >= 1");
  return a * std::pow(static_cast<double>(n), -alpha);
}

SearchSpace SearchSpace::svm_bandwidth() {
  SearchSpace s;
  s.dims = {
      {"C", 1e0, 1e2, true, std::nullopt},
      {"a", 1e-1, 1e1, true, std::nullopt},
      {"alpha", 0.0, 3.0, false, std::nullopt},
  };
  return s;
}

SearchSpace SearchSpace::svm_no_bandwidth() {
  SearchSpace s = svm_bandwidth();
  s.dims[1].pinned = 1.0;  // a
  s.dims[2].pinned = 0.0;  // alpha -> c = 1 for every n
  return s;
}

std::size_t SearchSpace::active_count() const {
  std::size_t n = 0;
  for (const auto& d : dims)
    if (!d.pinned) ++n;
  return n;
}

std::vector<double> SearchSpace::params_from_unit(
    std::span<const double> unit) const {
  if (unit.size() != active_count())
    throw std::invalid_argument("params_from_unit: dimension mismatch");
  std::vector<double> out;
  out.reserve(dims.size());
  std::size_t u = 0;
  for (const auto& d : dims) {
    if (d.pinned) {
      out.push_back(*d.pinned);
      continue;
    }
    const double t = unit[u++];
    if (d.log_scale) {
      const double lo = std::log(d.lo), hi = std::log(d.hi);
      out.push_back(std::exp(lo + t * (hi - lo)));
    } else {
      out.push_back(d.lo + t * (d.hi - d.lo));
    }
  }
  return out;
}

namespace {

// Observations are centered on their empirical mean; the covariance is
// factorized once so repeated posterior queries cost O(m^2).
class GpSurrogate {
 public:
  GpSurrogate(const std::vector<std::vector<double>>& points,
              const std::vector<double>& values, const GpConfig& config)
      : points_(points), config_(config) {
    if (points.empty() || points.size() != values.size())
      throw std::invalid_argument("gp_posterior: need matched observations");
    const auto n = static_cast<Eigen::Index>(points.size());

    mean_y_ = 0.0;
    for (double v : values) mean_y_ += v;
    mean_y_ /= static_cast<double>(n);

    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        cov(i, j) = se_kernel(points[static_cast<std::size_t>(i)],
                              points[static_cast<std::size_t>(j)], config);

    // Escalating jitter; only applied when the plain Cholesky fails.
    double jitter = 0.0;
    for (;;) {
      llt_.compute(cov + (config.noise + jitter) *
                             Eigen::MatrixXd::Identity(n, n));
      if (llt_.info() == Eigen::Success) break;
      if (jitter >= config.max_jitter)
        throw std::runtime_error(
            "gp_posterior: covariance singular beyond jitter repair");
      jitter = jitter == 0.0 ? 1e-12 : jitter * 100.0;
      jitter = std::min(jitter, config.max_jitter);
    }

    Eigen::VectorXd centered(n);
    for (Eigen::Index i = 0; i < n; ++i)
      centered[i] = values[static_cast<std::size_t>(i)] - mean_y_;
    weights_ = llt_.solve(centered);
  }

  GpPosterior posterior(std::span<const double> query) const {
    const auto n = static_cast<Eigen::Index>(points_.size());
    const std::vector<double> q(query.begin(), query.end());
    Eigen::VectorXd k_star(n);
    for (Eigen::Index i = 0; i < n; ++i)
      k_star[i] = se_kernel(points_[static_cast<std::size_t>(i)], q, config_);
    GpPosterior post;
    post.mean = mean_y_ + k_star.dot(weights_);
    const double var = config_.signal_var - k_star.dot(llt_.solve(k_star));
    post.stddev = std::sqrt(std::max(0.0, var));
    return post;
  }

 private:
  std::vector<std::vector<double>> points_;
  GpConfig config_;
  double mean_y_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd weights_;
};

}  // namespace

GpPosterior gp_posterior(const std::vector<std::vector<double>>& points,
                         const std::vector<double>& values,
                         std::span<const double> query,
                         const GpConfig& config) {
  return GpSurrogate(points, values, config).posterior(query);
}

double expected_improvement(double mean, double stddev, double best_so_far) {
  if (stddev < 0.0)
    throw std::invalid_argument("expected_improvement: negative stddev");
  const double gap = mean - best_so_far;
  if (stddev == 0.0) return std::max(gap, 0.0);
  const double z = gap / stddev;
  return gap * norm_cdf(z) + stddev * norm_pdf(z);
}

HpoTrace bayes_optimize(
    const std::function<double(const std::vector<double>&)>& objective,
    const SearchSpace& space, const BayesOptions& opts, std::uint64_t seed) {
  const std::size_t dim = space.active_count();
  if (dim == 0) throw std::invalid_argument("bayes_optimize: no active dims");
  if (dim > std::size(kPrimes))
    throw std::invalid_argument("bayes_optimize: too many dimensions");
  if (opts.init_points < 1 || opts.iterations < opts.init_points)
    throw std::invalid_argument(
        "bayes_optimize: need iterations >= init_points >= 1");

  Rng rng = Rng(seed).stream("bayes_optimize");
  std::vector<double> shift(dim);
  for (auto& s : shift) s = rng.next_double();

  HpoTrace trace;
  trace.seed = seed;
  trace.best_score = -std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> unit_points;
  std::vector<double> scores;

  auto evaluate = [&](const std::vector<double>& unit) {
    const std::vector<double> params = space.params_from_unit(unit);
    double score;
    try {
      score = objective(params);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "objective failed at params (";
      for (std::size_t i = 0; i < params.size(); ++i)
        msg << (i ? ", " : "") << params[i];
      msg << "): " << e.what();
      throw std::runtime_error(msg.str());
    }
    unit_points.push_back(unit);
    scores.push_back(score);
    trace.iterations.push_back({params, score});
    if (score > trace.best_score) {
      trace.best_score = score;
      trace.best_params = params;
    }
  };

  for (int it = 0; it < opts.iterations; ++it) {
    std::vector<double> unit(dim);
    if (it < opts.init_points) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double h = halton(it + 1, kPrimes[d]) + shift[d];
        unit[d] = h - std::floor(h);
      }
    } else {
      // EI-maximizing proposal over seeded uniform candidates.
      const GpSurrogate surrogate(unit_points, scores, opts.gp);
      const double best = trace.best_score;
      double best_ei = -1.0;
      Rng cand_rng = rng.stream(static_cast<std::uint64_t>(it));
      for (int cand = 0; cand < opts.candidates; ++cand) {
        std::vector<double> u(dim);
        for (auto& x : u) x = cand_rng.next_double();
        const GpPosterior post = surrogate.posterior(u);
        const double ei = expected_improvement(post.mean, post.stddev, best);
        if (ei > best_ei) {
          best_ei = ei;
          unit = u;
        }
      }
    }
    evaluate(unit);
  }
  return trace;
}

nlohmann::json trace_to_json(const HpoTrace& trace) {
  nlohmann::json iterations = nlohmann::json::array();
  for (const auto& it : trace.iterations)
    iterations.push_back({{"params", it.params}, {"score", it.score}});
  return nlohmann::json{
      {"iterations", iterations},
      {"best_params", trace.best_params},
      {"best_score", trace.best_score},
      {"seed", trace.seed},
      {"n_features", trace.n_features},
  };
}

HpoTrace trace_from_json(const nlohmann::json& j) {
  HpoTrace trace;
  for (const auto& it : j.at("iterations"))
    trace.iterations.push_back({it.at("params").get<std::vector<double>>(),
                                it.at("score").get<double>()});
  trace.best_params = j.at("best_params").get<std::vector<double>>();
  trace.best_score = j.at("best_score").get<double>();
  trace.seed = j.at("seed").get<std::uint64_t>();
  trace.n_features = j.at("n_features").get<int>();
  return trace;
}

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m,
                            const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<Eigen::Index>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (Eigen::Index i : idx)
    out.push_back(labels[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

double evaluate_accuracy(const KernelMatrix& k_train,
                         const std::vector<int>& y_train,
                         const KernelMatrix& k_cross,
                         const std::vector<int>& y_eval, double C) {
  std::set<int> classes(y_train.begin(), y_train.end());
  std::vector<int> pred;
  if (classes.size() == 2) {
    // Binary: lower class id maps to +1.
    const int pos = *classes.begin();
    std::vector<int> y_bin(y_train.size());
    for (std::size_t i = 0; i < y_train.size(); ++i)
      y_bin[i] = y_train[i] == pos ? 1 : -1;
    const SvmModel model = train_binary(k_train, y_bin, C);
    const std::vector<int> bin_pred = predict_binary(model, k_cross);
    const int neg = *std::next(classes.begin());
    pred.reserve(bin_pred.size());
    for (int p : bin_pred) pred.push_back(p > 0 ? pos : neg);
  } else {
    const OvrModel model = train_ovr(k_train, y_train, C);
    pred = predict_ovr(model, k_cross);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y_eval.size(); ++i)
    if (pred[i] == y_eval[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(y_eval.size());
}

double validation_objective(const ObjectiveContext& ctx,
                            const std::vector<double>& params) {
  if (params.size() != 3)
    throw std::invalid_argument("validation_objective: expected {C, a, alpha}");
  if (!ctx.normalized || !ctx.ranking || !ctx.split)
    throw std::invalid_argument("validation_objective: incomplete context");

  const double C = params[0];
  const double c = bandwidth_from(params[1], params[2], ctx.n_features);

  const SpectralDataset selected =
      select_top_features(*ctx.normalized, *ctx.ranking, ctx.n_features);
  const Eigen::MatrixXd x_train =
      gather_rows(selected.samples, ctx.split->train_idx);
  const Eigen::MatrixXd x_val = gather_rows(selected.samples, ctx.split->val_idx);

  KernelSpec spec;
  spec.kind = ctx.kind;
  spec.backend = ctx.backend;
  spec.sv_cap = ctx.sv_cap;
  // Hyperparameter parity: the classical counterpart sees gamma = c^2, the
  // bandwidth correspondence c = sqrt(gamma).
  spec.bandwidth = ctx.kind == KernelKind::Rbf ? c * c : c;

  const KernelMatrix k_train = compute_kernel(spec, x_train, ctx.workers);
  const KernelMatrix k_val = compute_kernel(spec, x_train, x_val, ctx.workers);

  return evaluate_accuracy(k_train, gather_labels(selected.labels, ctx.split->train_idx),
                           k_val, gather_labels(selected.labels, ctx.split->val_idx), C);
}

}  // namespace qklab
