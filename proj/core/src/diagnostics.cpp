#include "qklab/diagnostics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace qklab {

namespace {

void require_square(const KernelMatrix& k, const char* who) {
  if (k.rows() != k.cols())
    throw std::invalid_argument(std::string(who) + ": matrix must be square");
}

// log(CDF(hi) - CDF(lo)) for the Haar fidelity distribution, computed as
// log((1-lo)^M - (1-hi)^M) with M = 2^n - 1 without forming the
// (possibly underflowing) powers.
double log_haar_bin_mass(double lo, double hi, double m_exponent) {
  // log terms; log1p for accuracy near 0.
  const double log_lo = m_exponent * std::log1p(-lo);  // log (1-lo)^M
  if (hi >= 1.0) return log_lo;
  const double log_hi = m_exponent * std::log1p(-hi);
  // log(exp(log_lo) - exp(log_hi)) = log_lo + log(1 - exp(log_hi - log_lo))
  const double ratio = log_hi - log_lo;  // <= 0
  return log_lo + std::log1p(-std::exp(ratio));
}

}  // namespace

KernelStats kernel_stats(const KernelMatrix& k) {
  require_square(k, "kernel_stats");
  const Eigen::Index n = k.rows();
  if (n < 2) throw std::invalid_argument("kernel_stats: need N >= 2");
  double sum = 0.0, sum2 = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      sum += k.values(i, j);
      sum2 += k.values(i, j) * k.values(i, j);
      ++count;
    }
  KernelStats stats;
  stats.sample_count = count;
  stats.mean_offdiag = sum / static_cast<double>(count);
  const double var =
      std::max(0.0, sum2 / static_cast<double>(count) -
                        stats.mean_offdiag * stats.mean_offdiag);
  stats.std_offdiag = std::sqrt(var);
  stats.n_qubits = static_cast<int>(k.meta.feature_count);
  stats.bandwidth = k.bandwidth_or_gamma;
  return stats;
}

std::vector<double> offdiag_upper(const KernelMatrix& k) {
  require_square(k, "offdiag_upper");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(k.rows() * (k.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = i + 1; j < k.cols(); ++j)
      out.push_back(k.values(i, j));
  return out;
}

double haar_fidelity_cdf(double fidelity, int n_qubits) {
  if (!(fidelity >= 0.0 && fidelity <= 1.0))
    throw std::invalid_argument("haar_fidelity_cdf: F outside [0,1]");
  if (n_qubits < 1)
    throw std::invalid_argument("haar_fidelity_cdf: need n >= 1");
  const double m = std::pow(2.0, n_qubits) - 1.0;
  return 1.0 - std::pow(1.0 - fidelity, m);
}

double expressibility(const std::vector<double>& fidelity_samples,
                      int n_qubits, int bins) {
  if (fidelity_samples.empty())
    throw std::invalid_argument("expressibility: empty sample set");
  if (bins < 2) throw std::invalid_argument("expressibility: need bins >= 2");

  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double f : fidelity_samples) {
    if (!(f >= 0.0 && f <= 1.0))
      throw std::invalid_argument("expressibility: fidelity outside [0,1]");
    auto bin = static_cast<std::size_t>(f * bins);
    if (bin >= static_cast<std::size_t>(bins))
      bin = static_cast<std::size_t>(bins) - 1;  // f == 1.0
    counts[bin] += 1.0;
  }

  const double total = static_cast<double>(fidelity_samples.size());
  const double m_exponent = std::pow(2.0, n_qubits) - 1.0;
  double kl = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double p = counts[static_cast<std::size_t>(b)] / total;
    if (p == 0.0) continue;  // 0 log 0 = 0
    const double lo = static_cast<double>(b) / bins;
    const double hi = static_cast<double>(b + 1) / bins;
    const double log_q = log_haar_bin_mass(lo, hi, m_exponent);
    kl += p * (std::log(p) - log_q);
  }
  return kl;
}

double default_geometric_lambda(const KernelMatrix& k_classical) {
  require_square(k_classical, "default_geometric_lambda");
  return 1e-6 * k_classical.values.trace() /
         static_cast<double>(k_classical.rows());
}

double geometric_difference(const KernelMatrix& k_classical,
                            const KernelMatrix& k_quantum, double lambda) {
  require_square(k_classical, "geometric_difference");
  require_square(k_quantum, "geometric_difference");
  if (k_classical.rows() != k_quantum.rows())
    throw std::invalid_argument("geometric_difference: shape mismatch");
  if (lambda < 0.0)
    throw std::invalid_argument("geometric_difference: lambda must be >= 0");

  const Eigen::Index n = k_classical.rows();

  // sqrt(K_Q) with negative eigenvalues clipped to zero.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_q(k_quantum.values);
  Eigen::VectorXd root = es_q.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt_q = es_q.eigenvectors() * root.asDiagonal() *
                                 es_q.eigenvectors().transpose();

  Eigen::MatrixXd reg =
      k_classical.values + lambda * Eigen::MatrixXd::Identity(n, n);
  Eigen::LLT<Eigen::MatrixXd> solver(reg);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error(
        "geometric_difference: K_C + lambda I is singular");
  const Eigen::MatrixXd inner = sqrt_q * solver.solve(sqrt_q);

  // Spectral norm of the (symmetric) inner matrix.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_inner(
      0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double top = es_inner.eigenvalues().cwiseAbs().maxCoeff();
  return std::sqrt(top);
}

double alignment(const KernelMatrix& k_classical,
                 const KernelMatrix& k_quantum) {
  if (k_classical.rows() != k_quantum.rows() ||
      k_classical.cols() != k_quantum.cols())
    throw std::invalid_argument("alignment: shape mismatch");
  const double nc = k_classical.values.norm();
  const double nq = k_quantum.values.norm();
  if (nc == 0.0 || nq == 0.0)
    throw std::invalid_argument("alignment: zero matrix");
  return (k_classical.values.array() * k_quantum.values.array()).sum() /
         (nc * nq);
}

Eigen::VectorXd spectrum(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols())
    throw std::invalid_argument("spectrum: matrix must be square");
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("spectrum: matrix not symmetric within 1e-10");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = es.eigenvalues();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<double>());
  return ev;
}

ScalingFit fit_scaling(const std::vector<double>& ns,
                       const std::vector<double>& c_stars, FitKind kind) {
  if (ns.size() != c_stars.size() || ns.size() < 3)
    throw std::invalid_argument("fit_scaling: need >= 3 matched points");
  const auto n = static_cast<Eigen::Index>(ns.size());
  Eigen::VectorXd xs(n), ys(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = c_stars[static_cast<std::size_t>(i)];
    if (!(c > 0.0))
      throw std::invalid_argument("fit_scaling: c* values must be positive");
    const double nn = ns[static_cast<std::size_t>(i)];
    xs[i] = kind == FitKind::PowerLaw ? std::log(nn) : nn;
    ys[i] = std::log(c);
  }
  const double x_mean = xs.mean();
  const double y_mean = ys.mean();
  const double sxx = (xs.array() - x_mean).square().sum();
  const double sxy = ((xs.array() - x_mean) * (ys.array() - y_mean)).sum();
  ScalingFit fit;
  fit.kind = kind;
  fit.a = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.b = y_mean - fit.a * x_mean;
  const double ss_tot = (ys.array() - y_mean).square().sum();
  const double ss_res =
      (ys.array() - (fit.a * xs.array() + fit.b)).square().sum();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  fit.r_squared = std::clamp(fit.r_squared, 0.0, 1.0);
  return fit;
}

BinaryReport classification_report(const std::vector<int>& y_true,
                                   const std::vector<int>& y_pred,
                                   int positive_class) {
  if (y_true.size() != y_pred.size() || y_true.empty())
    throw std::invalid_argument("classification_report: length mismatch");
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool truth = y_true[i] == positive_class;
    const bool pred = y_pred[i] == positive_class;
    if (truth && pred) ++tp;
    else if (!truth && pred) ++fp;
    else if (!truth && !pred) ++tn;
    else ++fn;
  }
  BinaryReport r;
  r.accuracy = (tp + tn) / static_cast<double>(y_true.size());
  if (tp + fp == 0.0) {
    r.precision = 0.0;
    r.precision_undefined = true;
  } else {
    r.precision = tp / (tp + fp);
  }
  r.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  r.specificity = (tn + fp) > 0 ? tn / (tn + fp) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

MulticlassReport classification_report_multiclass(
    const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty())
    throw std::invalid_argument("classification_report: length mismatch");
  const double n = static_cast<double>(y_true.size());

  std::map<int, double> support, predicted, correct;
  double agree = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    support[y_true[i]] += 1.0;
    predicted[y_pred[i]] += 1.0;
    if (y_true[i] == y_pred[i]) {
      correct[y_true[i]] += 1.0;
      agree += 1.0;
    }
  }

  MulticlassReport r;
  r.accuracy = agree / n;
  for (const auto& [cls, sup] : support) {
    const double tp = correct.count(cls) ? correct[cls] : 0.0;
    const double pred = predicted.count(cls) ? predicted[cls] : 0.0;
    const double prec = pred > 0.0 ? tp / pred : 0.0;
    const double rec = tp / sup;
    const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    const double weight = sup / n;
    r.precision_weighted += weight * prec;
    r.recall_weighted += weight * rec;
    r.f1_weighted += weight * f1;
  }
  // kappa = (p_o - p_e) / (1 - p_e), chance agreement from the marginals.
  double p_e = 0.0;
  for (const auto& [cls, sup] : support)
    p_e += (sup / n) * ((predicted.count(cls) ? predicted[cls] : 0.0) / n);
  const double p_o = r.accuracy;
  r.cohen_kappa = p_e < 1.0 ? (p_o - p_e) / (1.0 - p_e) : 0.0;
  return r;
}

std::vector<std::uint64_t> wilcoxon_null_distribution(
    const std::vector<double>& abs_ranks_doubled) {
  // Counting over all 2^m sign assignments by dynamic programming on the
  // (integral) doubled statistic.
  long max_sum = 0;
  for (double r2 : abs_ranks_doubled) {
    const long v = std::lround(r2);
    if (std::abs(r2 - static_cast<double>(v)) > 1e-9)
      throw std::invalid_argument(
          "wilcoxon_null_distribution: doubled ranks must be integral");
    max_sum += v;
  }
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(max_sum) + 1, 0);
  counts[0] = 1;
  long reach = 0;
  for (double r2 : abs_ranks_doubled) {
    const long v = std::lround(r2);
    for (long w = reach; w >= 0; --w)
      if (counts[static_cast<std::size_t>(w)])
        counts[static_cast<std::size_t>(w + v)] +=
            counts[static_cast<std::size_t>(w)];
    reach += v;
  }
  return counts;
}

double wilcoxon_signed_rank_exact(const std::vector<double>& diffs) {
  std::vector<double> nonzero;
  for (double d : diffs)
    if (d != 0.0) nonzero.push_back(d);
  if (nonzero.empty())
    throw std::invalid_argument("wilcoxon_signed_rank_exact: all diffs zero");
  if (nonzero.size() > 25)
    throw std::invalid_argument(
        "wilcoxon_signed_rank_exact: more than 25 non-zero diffs (outside "
        "the exact enumeration regime)");

  const std::size_t m = nonzero.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(nonzero[a]) < std::abs(nonzero[b]);
  });

  // Average ranks on ties; doubled ranks stay integral.
  std::vector<double> rank2(m, 0.0);
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && std::abs(nonzero[order[j + 1]]) ==
                            std::abs(nonzero[order[i]]))
      ++j;
    // Positions i..j share rank (i+1 + ... + j+1)/(j-i+1).
    const double avg2 =
        static_cast<double>((i + 1) + (j + 1));  // 2 * average rank
    for (std::size_t t = i; t <= j; ++t) rank2[order[t]] = avg2;
    i = j + 1;
  }

  double w_plus2 = 0.0;
  std::vector<double> all_ranks2;
  for (std::size_t t = 0; t < m; ++t) {
    all_ranks2.push_back(rank2[t]);
    if (nonzero[t] > 0.0) w_plus2 += rank2[t];
  }

  const std::vector<std::uint64_t> null_counts =
      wilcoxon_null_distribution(all_ranks2);
  const auto total = static_cast<double>(std::uint64_t{1} << m);
  const long w_obs = std::lround(w_plus2);

  double tail_ge = 0.0, tail_le = 0.0;
  for (long w = 0; w < static_cast<long>(null_counts.size()); ++w) {
    const auto c = static_cast<double>(null_counts[static_cast<std::size_t>(w)]);
    if (w >= w_obs) tail_ge += c;
    if (w <= w_obs) tail_le += c;
  }
  const double one_sided = std::min(tail_ge, tail_le) / total;
  return std::min(1.0, 2.0 * one_sided);
}

}  // namespace qklab
