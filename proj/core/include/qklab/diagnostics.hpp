#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "qklab/kernel_matrix.hpp"

namespace qklab {

/// Mean and population standard deviation of the strictly off-diagonal
/// (upper triangle) entries of a square kernel matrix.
struct KernelStats {
  double mean_offdiag = 0.0;
  double std_offdiag = 0.0;
  int n_qubits = 0;
  double bandwidth = 0.0;
  Eigen::Index sample_count = 0;
};

KernelStats kernel_stats(const KernelMatrix& k);

/// Strictly upper off-diagonal entries, row-major order; the fidelity
/// sample set used by the expressibility estimator.
std::vector<double> offdiag_upper(const KernelMatrix& k);

/// P(F' <= F) for Haar-random states in dimension 2^n:
///   1 - (1-F)^(2^n - 1).
double haar_fidelity_cdf(double fidelity, int n_qubits);

/// KL divergence of the binned fidelity samples from the Haar distribution,
/// equal-width bins on [0,1]. Zero-count bins contribute 0; Haar bin masses
/// are evaluated in log space, so the result stays finite (if very large)
/// even when the Haar tail underflows.
double expressibility(const std::vector<double>& fidelity_samples,
                      int n_qubits, int bins = 75);

/// g = sqrt(||sqrt(K_Q) (K_C + lambda I)^{-1} sqrt(K_Q)||_2); matrix square
/// root via symmetric eigendecomposition with negative eigenvalues clipped
/// to zero. g near sqrt(N_train) flags potential quantum advantage.
double geometric_difference(const KernelMatrix& k_classical,
                            const KernelMatrix& k_quantum, double lambda);

/// Default regularizer: 1e-6 * trace(K_C) / N.
double default_geometric_lambda(const KernelMatrix& k_classical);

/// Normalized Frobenius inner product <K_C, K_Q>_F / (|K_C|_F |K_Q|_F).
double alignment(const KernelMatrix& k_classical,
                 const KernelMatrix& k_quantum);

/// Real spectrum of a symmetric matrix, sorted descending. Throws when the
/// asymmetry exceeds 1e-10.
Eigen::VectorXd spectrum(const Eigen::MatrixXd& k);

enum class FitKind { PowerLaw, Exponential };

/// Least-squares fit of log(c*) against log(n) (power law) or n
/// (exponential). r_squared is defined as 0 when the targets are constant.
struct ScalingFit {
  FitKind kind = FitKind::PowerLaw;
  double a = 0.0;  // slope
  double b = 0.0;  // intercept
  double r_squared = 0.0;
};

ScalingFit fit_scaling(const std::vector<double>& ns,
                       const std::vector<double>& c_stars, FitKind kind);

struct BinaryReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // no predicted positives; reported as 0
};

struct MulticlassReport {
  double accuracy = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  double cohen_kappa = 0.0;
};

BinaryReport classification_report(const std::vector<int>& y_true,
                                   const std::vector<int>& y_pred,
                                   int positive_class);

MulticlassReport classification_report_multiclass(
    const std::vector<int>& y_true, const std::vector<int>& y_pred);

/// Exact two-sided Wilcoxon signed-rank p-value: zeros dropped, average
/// ranks on ties, null distribution enumerated over all 2^m sign
/// assignments. Valid for 1..25 non-zero differences.
double wilcoxon_signed_rank_exact(const std::vector<double>& diffs);

/// Null distribution of 2*W+ (doubled so tied half-ranks stay integral):
/// counts[w] = number of sign assignments with 2*W+ == w.
std::vector<std::uint64_t> wilcoxon_null_distribution(
    const std::vector<double>& abs_ranks_doubled);

}  // namespace qklab
