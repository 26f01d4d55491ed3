#include "qklab/svm.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "qklab/errors.hpp"
#include "qklab/parallel.hpp"

namespace qklab {

namespace {

constexpr double kTau = 1e-12;  // curvature floor for the pair subproblem

void check_train_inputs(const KernelMatrix& k, const std::vector<int>& y,
                        double C, const SmoOptions& opts) {
  const Eigen::Index n = k.rows();
  if (n != k.cols()) throw std::invalid_argument("train_binary: kernel not square");
  if (static_cast<Eigen::Index>(y.size()) != n)
    throw std::invalid_argument("train_binary: label count mismatch");
  if (!(C > 0.0)) throw std::invalid_argument("train_binary: C must be positive");
  bool pos = false, neg = false;
  for (int label : y) {
    if (label == 1) pos = true;
    else if (label == -1) neg = true;
    else throw std::invalid_argument("train_binary: labels must be +-1");
  }
  if (!pos || !neg)
    throw std::invalid_argument("train_binary: both classes must be present");
  if ((k.values - k.values.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("train_binary: kernel not symmetric");
  if (opts.check_psd) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.values,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -opts.psd_tol)
      throw InternalError(
          "train_binary: kernel fails PSD check (min eigenvalue " +
          std::to_string(es.eigenvalues().minCoeff()) +
          "); both kernel families are PSD by construction, so this "
          "signals a backend bug");
  }
}

// I_up:  y=+1 with a<C, or y=-1 with a>0
// I_low: y=+1 with a>0, or y=-1 with a<C
bool in_up(double a, int y, double C) {
  return (y > 0 && a < C) || (y < 0 && a > 0.0);
}
bool in_low(double a, int y, double C) {
  return (y > 0 && a > 0.0) || (y < 0 && a < C);
}

}  // namespace

SvmModel train_binary(const KernelMatrix& k_train, const std::vector<int>& y,
                      double C, const SmoOptions& opts) {
  check_train_inputs(k_train, y, C, opts);
  const Eigen::Index n = k_train.rows();
  const Eigen::MatrixXd& K = k_train.values;

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  // grad_i of the minimization objective; alpha = 0 gives grad = -e.
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  auto Q = [&](Eigen::Index i, Eigen::Index j) {
    return static_cast<double>(y[static_cast<std::size_t>(i)]) *
           static_cast<double>(y[static_cast<std::size_t>(j)]) * K(i, j);
  };

  long iter = 0;
  for (;; ++iter) {
    if (iter >= opts.max_iter)
      throw std::runtime_error("train_binary: SMO did not converge within " +
                               std::to_string(opts.max_iter) + " iterations");

    // First-order pick of i: most violating index in I_up.
    Eigen::Index i = -1;
    double m_up = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const int yt = y[static_cast<std::size_t>(t)];
      if (!in_up(alpha[t], yt, C)) continue;
      const double v = -yt * grad[t];
      if (v > m_up) {
        m_up = v;
        i = t;
      }
    }

    // Second-order pick of j: largest decrease among I_low with v_t < m_up.
    // In K terms the curvature along the feasible pair direction is always
    // K_ii + K_tt - 2 K_it regardless of the label combination.
    Eigen::Index j = -1;
    double m_low = std::numeric_limits<double>::infinity();
    double best_gain = 0.0;
    const int yi = y[static_cast<std::size_t>(i)];
    for (Eigen::Index t = 0; t < n; ++t) {
      const int yt = y[static_cast<std::size_t>(t)];
      if (!in_low(alpha[t], yt, C)) continue;
      const double v = -yt * grad[t];
      m_low = std::min(m_low, v);
      const double b_it = m_up - v;
      if (b_it <= 0.0) continue;
      double a_it = K(i, i) + K(t, t) - 2.0 * K(i, t);
      if (a_it <= 0.0) a_it = kTau;
      const double gain = b_it * b_it / a_it;
      if (gain > best_gain) {
        best_gain = gain;
        j = t;
      }
    }

    if (i < 0 || m_up - m_low < opts.tol || j < 0) break;

    // Two-variable subproblem, clipped to the box (libsvm-style update).
    const int yj = y[static_cast<std::size_t>(j)];
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
    if (quad <= 0.0) quad = kTau;

    if (yi != yj) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = old_ai - old_aj;
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
      }
      if (diff > 0.0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = old_ai + old_aj;
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
      } else {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
      }
      if (sum > C) {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
      }
    }

    const double d_ai = alpha[i] - old_ai;
    const double d_aj = alpha[j] - old_aj;
    if (d_ai == 0.0 && d_aj == 0.0) break;  // numerical stall at optimum
    for (Eigen::Index t = 0; t < n; ++t)
      grad[t] += Q(t, i) * d_ai + Q(t, j) * d_aj;
  }

  SvmModel model;
  model.alphas = alpha;
  model.labels = y;
  model.C = C;
  model.kernel_meta_hash = k_train.meta.dataset_hash;
  for (Eigen::Index t = 0; t < n; ++t)
    if (alpha[t] > 0.0) model.support_idx.push_back(t);

  // Bias from KKT: free SVs give -y_t grad_t exactly; otherwise take the
  // midpoint of the feasible interval [max over lower set, min over upper].
  double free_sum = 0.0;
  int free_count = 0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < n; ++t) {
    const int yt = y[static_cast<std::size_t>(t)];
    const double v = -yt * grad[t];
    if (alpha[t] > 0.0 && alpha[t] < C) {
      free_sum += v;
      ++free_count;
    } else if ((yt > 0 && alpha[t] == 0.0) || (yt < 0 && alpha[t] >= C)) {
      lo = std::max(lo, v);
    } else {
      hi = std::min(hi, v);
    }
  }
  if (free_count > 0)
    model.bias = free_sum / free_count;
  else if (std::isfinite(lo) && std::isfinite(hi))
    model.bias = 0.5 * (lo + hi);
  else if (std::isfinite(lo))
    model.bias = lo;
  else
    model.bias = std::isfinite(hi) ? hi : 0.0;

  return model;
}

Eigen::VectorXd decision_values(const SvmModel& model,
                                const KernelMatrix& k_cross) {
  const Eigen::Index n_train = model.alphas.size();
  if (k_cross.rows() != n_train)
    throw std::invalid_argument(
        "decision_values: cross kernel rows must equal N_train");
  Eigen::VectorXd coef(n_train);
  for (Eigen::Index i = 0; i < n_train; ++i)
    coef[i] = model.alphas[i] * model.labels[static_cast<std::size_t>(i)];
  return (k_cross.values.transpose() * coef).array() + model.bias;
}

std::vector<int> predict_binary(const SvmModel& model,
                                const KernelMatrix& k_cross) {
  const Eigen::VectorXd values = decision_values(model, k_cross);
  std::vector<int> out(static_cast<std::size_t>(values.size()));
  for (Eigen::Index j = 0; j < values.size(); ++j)
    out[static_cast<std::size_t>(j)] = values[j] >= 0.0 ? 1 : -1;
  return out;
}

OvrModel train_ovr(const KernelMatrix& k_train, const std::vector<int>& y_multi,
                   double C, const SmoOptions& opts) {
  std::set<int> classes(y_multi.begin(), y_multi.end());
  if (classes.size() < 2)
    throw std::invalid_argument("train_ovr: need at least 2 classes");

  OvrModel ovr;
  ovr.class_ids.assign(classes.begin(), classes.end());
  // The per-class PSD check would repeat the same eigendecomposition; run
  // it once up front instead.
  SmoOptions per_class = opts;
  if (opts.check_psd) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k_train.values,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -opts.psd_tol)
      throw InternalError("train_ovr: kernel fails PSD check");
    per_class.check_psd = false;
  }

  // The per-class problems are independent; train them in parallel against
  // the shared read-only kernel.
  ovr.models.resize(ovr.class_ids.size());
  std::vector<std::exception_ptr> errors(ovr.class_ids.size());
  parallel_for(
      ovr.class_ids.size(), 0, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
          try {
            std::vector<int> y_bin(y_multi.size());
            for (std::size_t i = 0; i < y_multi.size(); ++i)
              y_bin[i] = y_multi[i] == ovr.class_ids[c] ? 1 : -1;
            ovr.models[c] = train_binary(k_train, y_bin, C, per_class);
          } catch (...) {
            errors[c] = std::current_exception();
          }
        }
      });
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
  return ovr;
}

std::vector<int> predict_ovr(const OvrModel& model,
                             const KernelMatrix& k_cross) {
  if (model.models.empty())
    throw std::invalid_argument("predict_ovr: empty model");
  const Eigen::Index m = k_cross.cols();
  Eigen::MatrixXd scores(static_cast<Eigen::Index>(model.models.size()), m);
  for (std::size_t c = 0; c < model.models.size(); ++c)
    scores.row(static_cast<Eigen::Index>(c)) =
        decision_values(model.models[c], k_cross).transpose();
  std::vector<int> out(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.rows(); ++c)
      if (scores(c, j) > scores(best, j)) best = c;  // ties keep lowest id
    out[static_cast<std::size_t>(j)] =
        model.class_ids[static_cast<std::size_t>(best)];
  }
  return out;
}

double dual_objective(const Eigen::VectorXd& alphas, const std::vector<int>& y,
                      const Eigen::MatrixXd& k) {
  const Eigen::Index n = alphas.size();
  double quad = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      quad += alphas[i] * alphas[j] * y[static_cast<std::size_t>(i)] *
              y[static_cast<std::size_t>(j)] * k(i, j);
  return alphas.sum() - 0.5 * quad;
}

double kkt_violation(const SvmModel& model, const KernelMatrix& k_train) {
  const Eigen::Index n = model.alphas.size();
  Eigen::VectorXd coef(n);
  for (Eigen::Index i = 0; i < n; ++i)
    coef[i] = model.alphas[i] * model.labels[static_cast<std::size_t>(i)];
  const Eigen::VectorXd kalpha = k_train.values * coef;
  double m_up = -std::numeric_limits<double>::infinity();
  double m_low = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < n; ++t) {
    const int yt = model.labels[static_cast<std::size_t>(t)];
    const double grad_t = yt * kalpha[t] - 1.0;
    const double v = -yt * grad_t;
    if (in_up(model.alphas[t], yt, model.C)) m_up = std::max(m_up, v);
    if (in_low(model.alphas[t], yt, model.C)) m_low = std::min(m_low, v);
  }
  return m_up - m_low;
}

nlohmann::json svm_to_json(const SvmModel& model) {
  std::vector<double> alphas(model.alphas.data(),
                             model.alphas.data() + model.alphas.size());
  return nlohmann::json{
      {"alphas", alphas},
      {"bias", model.bias},
      {"labels", model.labels},
      {"support_idx", model.support_idx},
      {"C", model.C},
      {"kernel_meta_hash", model.kernel_meta_hash},
  };
}

SvmModel svm_from_json(const nlohmann::json& j) {
  SvmModel model;
  const auto alphas = j.at("alphas").get<std::vector<double>>();
  model.alphas = Eigen::Map<const Eigen::VectorXd>(
      alphas.data(), static_cast<Eigen::Index>(alphas.size()));
  model.bias = j.at("bias").get<double>();
  model.labels = j.at("labels").get<std::vector<int>>();
  model.support_idx = j.at("support_idx").get<std::vector<Eigen::Index>>();
  model.C = j.at("C").get<double>();
  model.kernel_meta_hash = j.at("kernel_meta_hash").get<std::string>();
  return model;
}

}  // namespace qklab
