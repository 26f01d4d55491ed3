#pragma once

#include <span>
#include <string>
#include <vector>

namespace qklab {

enum class GateKind { H, RZ, RY, CNOT };

/// One gate on a linear qubit register. Rotation conventions:
///   RZ(t) = exp(-i t Z / 2),  RY(t) = exp(-i t Y / 2).
/// CNOT acts on adjacent sites only, control q and target q+1; that
/// restriction is what keeps the tensor-network backend truncation-free.
struct Gate {
  GateKind kind = GateKind::H;
  int q0 = 0;        // site (control for CNOT)
  int q1 = -1;       // CNOT target, -1 otherwise
  double angle = 0;  // rotations only

  static Gate h(int q);
  static Gate rz(int q, double angle);
  static Gate ry(int q, double angle);
  static Gate cnot(int control);  // target = control + 1
};

struct GateSequence {
  int n_qubits = 0;
  std::vector<Gate> gates;
};

/// Embedding unitary for one data point: per qubit q the layer
/// H, RZ(c*x_q), RY(c*x_q); then the CNOT staircase q -> q+1 in ascending
/// order; then a final RZ(c*x_q) layer. One qubit per feature.
GateSequence build_embedding(std::span<const double> x, double c);

/// Reversed gate order with negated rotation angles (H, CNOT self-inverse).
GateSequence adjoint(const GateSequence& gs);

/// Echo circuit: embed(x) followed by the inverse embedding of y. Applied to
/// |0...0>, the probability of returning to |0...0> is the fidelity kernel.
GateSequence build_loschmidt(std::span<const double> x,
                             std::span<const double> y, double c);

/// One gate per line (kind, sites, angle at 17 significant digits); stable
/// across backends, meant for debugging diffs.
std::string dump(const GateSequence& gs);

}  // namespace qklab
