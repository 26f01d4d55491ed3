#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>

#include "qklab/statevector.hpp"

namespace qklab {

enum class KernelKind { FidelityQuantum, Rbf };
enum class SimBackend { Tn, Sv };

std::string to_string(KernelKind kind);
std::string to_string(SimBackend backend);
KernelKind kernel_kind_from_name(const std::string& name);
SimBackend backend_from_name(const std::string& name);

/// Provenance sidecar written next to every persisted matrix.
struct KernelMeta {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  double bandwidth = 0.0;  // c for quantum, gamma for rbf
  std::string backend;     // "tn", "sv" or "rbf"
  Eigen::Index feature_count = 0;
  std::string dataset_hash;  // fnv1a64 hex of the sample bytes
  std::string created_at;    // ISO 8601 UTC
};

/// Gram matrix (square, symmetric, unit diagonal) or rectangular cross
/// matrix between a training set and an evaluation set.
struct KernelMatrix {
  Eigen::MatrixXd values;
  KernelKind kind = KernelKind::FidelityQuantum;
  double bandwidth_or_gamma = 0.0;
  KernelMeta meta;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// exp(-gamma * ||x - y||^2); gamma must be positive.
double rbf_entry(std::span<const double> x, std::span<const double> y,
                 double gamma);

/// How to evaluate entries: kernel family, its bandwidth, and for the
/// quantum kernel which simulator realizes it. The same provider front-end
/// serves both families so callers never branch on the kind.
struct KernelSpec {
  KernelKind kind = KernelKind::FidelityQuantum;
  double bandwidth = 1.0;  // c (quantum) or gamma (rbf)
  SimBackend backend = SimBackend::Tn;
  int sv_cap = kDefaultQubitCap;
};

/// Rectangular rows x cols matrix. Samples are matrix rows. Per-sample MPS
/// are built once and shared across entries; the fill is data-parallel and
/// byte-identical for every worker count. Pass the same matrix object for
/// rows and cols (or use the square overload) to compute the symmetric case
/// from the upper triangle.
KernelMatrix compute_kernel(const KernelSpec& spec, const Eigen::MatrixXd& x_rows,
                            const Eigen::MatrixXd& x_cols, int workers);

/// Symmetric train Gram matrix.
KernelMatrix compute_kernel(const KernelSpec& spec, const Eigen::MatrixXd& x,
                            int workers);

KernelMatrix rbf_matrix(const Eigen::MatrixXd& x_rows,
                        const Eigen::MatrixXd& x_cols, double gamma,
                        int workers);
KernelMatrix rbf_matrix(const Eigen::MatrixXd& x, double gamma, int workers);

KernelMatrix quantum_kernel_matrix(const Eigen::MatrixXd& x_rows,
                                   const Eigen::MatrixXd& x_cols, double c,
                                   SimBackend backend, int workers,
                                   int sv_cap = kDefaultQubitCap);
KernelMatrix quantum_kernel_matrix(const Eigen::MatrixXd& x, double c,
                                   SimBackend backend, int workers,
                                   int sv_cap = kDefaultQubitCap);

/// Persistence: `<prefix>.k64` holds row-major little-endian IEEE-754
/// doubles, `<prefix>.json` the sidecar. Round-trips are bit-exact.
void save_kernel(const KernelMatrix& k, const std::string& path_prefix);
KernelMatrix load_kernel(const std::string& path_prefix);

/// fnv1a64 hex digest of a sample matrix (row-major doubles).
std::string dataset_hash_hex(const Eigen::MatrixXd& samples);

}  // namespace qklab
