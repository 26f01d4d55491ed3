#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "qklab/kernel_matrix.hpp"

namespace qklab {

/// Dual SVM trained on a precomputed kernel.
/// Invariants: 0 <= alpha_i <= C and sum_i alpha_i y_i = 0 (within 1e-8).
struct SvmModel {
  Eigen::VectorXd alphas;
  double bias = 0.0;
  std::vector<int> labels;  // +-1 per training point
  std::vector<Eigen::Index> support_idx;
  double C = 1.0;
  std::string kernel_meta_hash;  // provenance of the training Gram matrix
};

/// One binary model per class (rest labeled -1), shared kernel provenance.
struct OvrModel {
  std::vector<int> class_ids;
  std::vector<SvmModel> models;
};

struct SmoOptions {
  double tol = 1e-6;          // KKT violation stopping threshold
  long max_iter = 100000;     // hard stop; exceeding it is an error
  double psd_tol = 1e-8;      // reject kernels with eigenvalues below -psd_tol
  bool check_psd = true;
};

/// SMO with second-order working-set selection on the dual
///   min 1/2 a^T Q a - e^T a,  0 <= a <= C,  y^T a = 0,
/// Q_ij = y_i y_j K_ij. Deterministic for a fixed kernel and labels.
/// The bias is the average of -y_i grad_i over free support vectors, or
/// the midpoint of the KKT-feasible interval when none are free.
SvmModel train_binary(const KernelMatrix& k_train, const std::vector<int>& y,
                      double C, const SmoOptions& opts = {});

/// value_j = sum_i alpha_i y_i K(x_i, x*_j) + b. k_cross is N_train x N_eval.
Eigen::VectorXd decision_values(const SvmModel& model,
                                const KernelMatrix& k_cross);

/// sign of the decision values; exact zero maps to +1.
std::vector<int> predict_binary(const SvmModel& model,
                                const KernelMatrix& k_cross);

OvrModel train_ovr(const KernelMatrix& k_train, const std::vector<int>& y_multi,
                   double C, const SmoOptions& opts = {});

/// argmax of per-class decision values, ties to the lowest class id.
std::vector<int> predict_ovr(const OvrModel& model,
                             const KernelMatrix& k_cross);

/// Dual objective sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij (maximization
/// form), for oracle comparisons.
double dual_objective(const Eigen::VectorXd& alphas, const std::vector<int>& y,
                      const Eigen::MatrixXd& k);

/// Largest KKT violation m(a) - M(a); < tol after successful training.
double kkt_violation(const SvmModel& model, const KernelMatrix& k_train);

nlohmann::json svm_to_json(const SvmModel& model);
SvmModel svm_from_json(const nlohmann::json& j);

}  // namespace qklab
