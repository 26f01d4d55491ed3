#include "qklab/circuit.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace qklab {

namespace {
void check_angle(double angle) {
  if (!std::isfinite(angle))
    throw std::invalid_argument("Gate: rotation angle must be finite");
}
}  // namespace

Gate Gate::h(int q) { return Gate{GateKind::H, q, -1, 0.0}; }

Gate Gate::rz(int q, double angle) {
  check_angle(angle);
  return Gate{GateKind::RZ, q, -1, angle};
}

Gate Gate::ry(int q, double angle) {
  check_angle(angle);
  return Gate{GateKind::RY, q, -1, angle};
}

Gate Gate::cnot(int control) {
  return Gate{GateKind::CNOT, control, control + 1, 0.0};
}

GateSequence build_embedding(std::span<const double> x, double c) {
  const int d = static_cast<int>(x.size());
  if (d < 1) throw std::invalid_argument("build_embedding: empty feature vector");
  if (!std::isfinite(c))
    throw std::invalid_argument("build_embedding: bandwidth must be finite");

  GateSequence gs;
  gs.n_qubits = d;
  gs.gates.reserve(static_cast<std::size_t>(4 * d + (d > 1 ? d - 1 : 0)));
  for (int q = 0; q < d; ++q) {
    gs.gates.push_back(Gate::h(q));
    gs.gates.push_back(Gate::rz(q, c * x[static_cast<std::size_t>(q)]));
    gs.gates.push_back(Gate::ry(q, c * x[static_cast<std::size_t>(q)]));
  }
  for (int q = 0; q + 1 < d; ++q) gs.gates.push_back(Gate::cnot(q));
  for (int q = 0; q < d; ++q)
    gs.gates.push_back(Gate::rz(q, c * x[static_cast<std::size_t>(q)]));
  return gs;
}

GateSequence adjoint(const GateSequence& gs) {
  GateSequence out;
  out.n_qubits = gs.n_qubits;
  out.gates.reserve(gs.gates.size());
  for (auto it = gs.gates.rbegin(); it != gs.gates.rend(); ++it) {
    Gate g = *it;
    if (g.kind == GateKind::RZ || g.kind == GateKind::RY) g.angle = -g.angle;
    out.gates.push_back(g);
  }
  return out;
}

GateSequence build_loschmidt(std::span<const double> x,
                             std::span<const double> y, double c) {
  if (x.size() != y.size())
    throw std::invalid_argument("build_loschmidt: feature length mismatch");
  GateSequence echo = build_embedding(x, c);
  GateSequence inverse = adjoint(build_embedding(y, c));
  echo.gates.insert(echo.gates.end(), inverse.gates.begin(),
                    inverse.gates.end());
  return echo;
}

std::string dump(const GateSequence& gs) {
  std::string out;
  out.reserve(gs.gates.size() * 32);
  char buf[64];
  for (const Gate& g : gs.gates) {
    switch (g.kind) {
      case GateKind::H:
        std::snprintf(buf, sizeof(buf), "H %d\n", g.q0);
        break;
      case GateKind::CNOT:
        std::snprintf(buf, sizeof(buf), "CNOT %d %d\n", g.q0, g.q1);
        break;
      case GateKind::RZ:
        std::snprintf(buf, sizeof(buf), "RZ %d %.17g\n", g.q0, g.angle);
        break;
      case GateKind::RY:
        std::snprintf(buf, sizeof(buf), "RY %d %.17g\n", g.q0, g.angle);
        break;
    }
    out += buf;
  }
  return out;
}

}  // namespace qklab
