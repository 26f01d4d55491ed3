#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "qklab/circuit.hpp"

namespace qklab {

/// Exponential-cost exact simulator; the oracle backend for small n.
/// Qubit 0 is the least significant bit of the amplitude index.
struct StateVector {
  int n_qubits = 0;
  std::vector<std::complex<double>> amps;  // size 2^n

  static StateVector zero_state(int n_qubits);
  double norm() const;
};

inline constexpr int kDefaultQubitCap = 20;  // 16 MiB of complex doubles

void apply_in_place(const Gate& g, StateVector& s);
void apply_in_place(const GateSequence& gs, StateVector& s);

/// Returns a transformed copy; throws on qubit-count mismatch or when
/// n exceeds `qubit_cap`.
StateVector apply(const GateSequence& gs, StateVector s,
                  int qubit_cap = kDefaultQubitCap);

/// <a|b> for equal-sized states.
std::complex<double> inner_product(const StateVector& a, const StateVector& b);

/// Fidelity kernel |<0|U_emb(y)^dag U_emb(x)|0>|^2 via the echo circuit.
double kernel_entry_sv(std::span<const double> x, std::span<const double> y,
                       double c, int qubit_cap = kDefaultQubitCap);

/// Binomial proportion estimate k/S with k ~ Bin(S, p), deterministic per
/// seed. This is the measurement model of the echo circuit run S times.
double shot_estimate(double p, long shots, std::uint64_t seed);

}  // namespace qklab
