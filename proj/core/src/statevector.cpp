#include "qklab/statevector.hpp"

#include <cmath>
#include <stdexcept>

#include "qklab/rng.hpp"

namespace qklab {

namespace {
using cx = std::complex<double>;
constexpr double kInvSqrt2 = 0.7071067811865475244;
}  // namespace

StateVector StateVector::zero_state(int n_qubits) {
  if (n_qubits < 1)
    throw std::invalid_argument("StateVector: need at least one qubit");
  StateVector s;
  s.n_qubits = n_qubits;
  s.amps.assign(std::size_t{1} << n_qubits, cx{0.0, 0.0});
  s.amps[0] = cx{1.0, 0.0};
  return s;
}

double StateVector::norm() const {
  double sum = 0.0;
  for (const cx& a : amps) sum += std::norm(a);
  return std::sqrt(sum);
}

void apply_in_place(const Gate& g, StateVector& s) {
  const std::size_t dim = s.amps.size();
  switch (g.kind) {
    case GateKind::H: {
      const std::size_t bit = std::size_t{1} << g.q0;
      for (std::size_t i = 0; i < dim; ++i) {
        if (i & bit) continue;
        const cx a0 = s.amps[i];
        const cx a1 = s.amps[i | bit];
        s.amps[i] = kInvSqrt2 * (a0 + a1);
        s.amps[i | bit] = kInvSqrt2 * (a0 - a1);
      }
      break;
    }
    case GateKind::RZ: {
      const std::size_t bit = std::size_t{1} << g.q0;
      const cx p0 = std::polar(1.0, -g.angle / 2.0);
      const cx p1 = std::polar(1.0, +g.angle / 2.0);
      for (std::size_t i = 0; i < dim; ++i)
        s.amps[i] *= (i & bit) ? p1 : p0;
      break;
    }
    case GateKind::RY: {
      const std::size_t bit = std::size_t{1} << g.q0;
      const double ch = std::cos(g.angle / 2.0);
      const double sh = std::sin(g.angle / 2.0);
      for (std::size_t i = 0; i < dim; ++i) {
        if (i & bit) continue;
        const cx a0 = s.amps[i];
        const cx a1 = s.amps[i | bit];
        s.amps[i] = ch * a0 - sh * a1;
        s.amps[i | bit] = sh * a0 + ch * a1;
      }
      break;
    }
    case GateKind::CNOT: {
      const std::size_t cbit = std::size_t{1} << g.q0;
      const std::size_t tbit = std::size_t{1} << g.q1;
      for (std::size_t i = 0; i < dim; ++i) {
        if ((i & cbit) && !(i & tbit)) std::swap(s.amps[i], s.amps[i | tbit]);
      }
      break;
    }
  }
}

void apply_in_place(const GateSequence& gs, StateVector& s) {
  if (gs.n_qubits != s.n_qubits)
    throw std::invalid_argument("apply: qubit-count mismatch");
  for (const Gate& g : gs.gates) apply_in_place(g, s);
}

StateVector apply(const GateSequence& gs, StateVector s, int qubit_cap) {
  if (s.n_qubits > qubit_cap)
    throw std::runtime_error("statevector qubit cap exceeded (n=" +
                             std::to_string(s.n_qubits) + ", cap=" +
                             std::to_string(qubit_cap) + ")");
  apply_in_place(gs, s);
  return s;
}

std::complex<double> inner_product(const StateVector& a,
                                   const StateVector& b) {
  if (a.n_qubits != b.n_qubits)
    throw std::invalid_argument("inner_product: qubit-count mismatch");
  cx sum{0.0, 0.0};
  for (std::size_t i = 0; i < a.amps.size(); ++i)
    sum += std::conj(a.amps[i]) * b.amps[i];
  return sum;
}

double kernel_entry_sv(std::span<const double> x, std::span<const double> y,
                       double c, int qubit_cap) {
  if (x.size() != y.size())
    throw std::invalid_argument("kernel_entry_sv: dimension mismatch");
  const int n = static_cast<int>(x.size());
  if (n > qubit_cap)
    throw std::runtime_error("kernel_entry_sv: qubit cap exceeded (n=" +
                             std::to_string(n) + ", cap=" +
                             std::to_string(qubit_cap) + ")");
  StateVector s = StateVector::zero_state(n);
  apply_in_place(build_loschmidt(x, y, c), s);
  return std::norm(s.amps[0]);
}

double shot_estimate(double p, long shots, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("shot_estimate: p outside [0,1]");
  if (shots < 1) throw std::invalid_argument("shot_estimate: shots must be >= 1");
  Rng rng = Rng(seed).stream("shots");
  return static_cast<double>(binomial_draw(rng, shots, p)) /
         static_cast<double>(shots);
}

}  // namespace qklab
