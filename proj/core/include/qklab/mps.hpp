#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <span>
#include <vector>

#include "qklab/circuit.hpp"

namespace qklab {

/// Chain of rank-3 tensors (left bond x physical-2 x right bond) stored as
/// one matrix per physical index. Gate application is exact: two-site SVD
/// splits drop only singular values at roundoff level (< 1e-14 relative),
/// never entanglement. For the embedding ansatz every internal bond stays
/// <= 2 structurally, because each cut is crossed by a single CNOT applied
/// while everything to its right is still a product state.
class MatrixProductState {
 public:
  /// |0...0> product state.
  explicit MatrixProductState(int n_qubits);

  int n_qubits() const { return static_cast<int>(tensors_.size()); }

  /// Internal bond dimensions, size n-1 (empty for a single site).
  std::vector<int> bond_dims() const;
  int max_bond_dim() const;

  /// Site tensor slice for physical index `phys` (0 or 1).
  const Eigen::MatrixXcd& tensor(int site, int phys) const;

  void apply_gate(const Gate& g);
  void apply(const GateSequence& gs);

  /// Left-canonical gauge via exact SVD sweep; the state is unchanged.
  void left_canonicalize();

 private:
  void apply_single(const Gate& g);
  void apply_cnot(int control);

  std::vector<std::array<Eigen::MatrixXcd, 2>> tensors_;
};

/// Exact MPS of the embedding circuit applied to |0...0>. Checks the
/// bond <= 2 invariant and throws InternalError if it ever fails.
MatrixProductState embed_mps(std::span<const double> x, double c);

/// <A|B> by left-to-right transfer contraction; O(n D^3).
std::complex<double> mps_overlap(const MatrixProductState& a,
                                 const MatrixProductState& b);

/// Fidelity kernel entry |<phi(y)|phi(x)>|^2 at polynomial cost in n.
/// Values within 1e-12 of [0,1] are clamped; anything further out raises
/// InternalError.
double kernel_entry_tn(std::span<const double> x, std::span<const double> y,
                       double c);

}  // namespace qklab
