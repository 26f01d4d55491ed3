#include "qklab/mps.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qklab/errors.hpp"

namespace qklab {

namespace {

using cx = std::complex<double>;
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kZeroCutoff = 1e-14;  // relative; roundoff cleanup only

// Pack a two-site block or a single site (phys-major rows) for SVD.
// Row index = phys * Dl + left_bond, column index = phys * Dr + right_bond.

struct SvdSplit {
  Eigen::MatrixXcd u;       // (2*Dl) x r, left-canonical
  Eigen::MatrixXcd sv_adj;  // r x (cols), singular values folded in
};

SvdSplit split_exact(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff = sigma.size() ? sigma[0] * kZeroCutoff : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > cutoff) ++rank;
  rank = std::max<Eigen::Index>(rank, 1);
  SvdSplit out;
  out.u = svd.matrixU().leftCols(rank);
  out.sv_adj = sigma.head(rank).asDiagonal() *
               svd.matrixV().leftCols(rank).adjoint();
  return out;
}

}  // namespace

MatrixProductState::MatrixProductState(int n_qubits) {
  if (n_qubits < 1)
    throw std::invalid_argument("MatrixProductState: need at least one site");
  tensors_.resize(static_cast<std::size_t>(n_qubits));
  for (auto& site : tensors_) {
    site[0] = Eigen::MatrixXcd::Constant(1, 1, cx{1.0, 0.0});
    site[1] = Eigen::MatrixXcd::Zero(1, 1);
  }
}

std::vector<int> MatrixProductState::bond_dims() const {
  std::vector<int> dims;
  for (std::size_t q = 0; q + 1 < tensors_.size(); ++q)
    dims.push_back(static_cast<int>(tensors_[q][0].cols()));
  return dims;
}

int MatrixProductState::max_bond_dim() const {
  int m = 1;
  for (int d : bond_dims()) m = std::max(m, d);
  return m;
}

const Eigen::MatrixXcd& MatrixProductState::tensor(int site, int phys) const {
  return tensors_.at(static_cast<std::size_t>(site))[static_cast<std::size_t>(phys)];
}

void MatrixProductState::apply_single(const Gate& g) {
  auto& site = tensors_[static_cast<std::size_t>(g.q0)];
  const Eigen::MatrixXcd a0 = site[0];
  const Eigen::MatrixXcd a1 = site[1];
  switch (g.kind) {
    case GateKind::H:
      site[0] = kInvSqrt2 * (a0 + a1);
      site[1] = kInvSqrt2 * (a0 - a1);
      break;
    case GateKind::RZ: {
      site[0] = std::polar(1.0, -g.angle / 2.0) * a0;
      site[1] = std::polar(1.0, +g.angle / 2.0) * a1;
      break;
    }
    case GateKind::RY: {
      const double ch = std::cos(g.angle / 2.0);
      const double sh = std::sin(g.angle / 2.0);
      site[0] = ch * a0 - sh * a1;
      site[1] = sh * a0 + ch * a1;
      break;
    }
    default:
      throw std::logic_error("apply_single: not a single-qubit gate");
  }
}

void MatrixProductState::apply_cnot(int control) {
  const auto q = static_cast<std::size_t>(control);
  auto& left = tensors_[q];
  auto& right = tensors_[q + 1];
  const Eigen::Index dl = left[0].rows();
  const Eigen::Index dr = right[0].cols();

  // Two-site blocks T[s][t] = A_q[s] * A_{q+1}[t]; CNOT flips t when s = 1.
  std::array<std::array<Eigen::MatrixXcd, 2>, 2> block;
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 2; ++t)
      block[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)] =
          left[static_cast<std::size_t>(s)] * right[static_cast<std::size_t>(t)];
  std::swap(block[1][0], block[1][1]);

  Eigen::MatrixXcd merged(2 * dl, 2 * dr);
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 2; ++t)
      merged.block(s * dl, t * dr, dl, dr) =
          block[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];

  SvdSplit split = split_exact(merged);
  left[0] = split.u.topRows(dl);
  left[1] = split.u.bottomRows(dl);
  right[0] = split.sv_adj.leftCols(dr);
  right[1] = split.sv_adj.rightCols(dr);
}

void MatrixProductState::apply_gate(const Gate& g) {
  const int n = n_qubits();
  if (g.q0 < 0 || g.q0 >= n)
    throw std::invalid_argument("apply_gate: site out of range");
  if (g.kind == GateKind::CNOT) {
    if (g.q1 != g.q0 + 1 || g.q1 >= n)
      throw std::invalid_argument("apply_gate: CNOT must act on (q, q+1)");
    apply_cnot(g.q0);
  } else {
    apply_single(g);
  }
}

void MatrixProductState::apply(const GateSequence& gs) {
  if (gs.n_qubits != n_qubits())
    throw std::invalid_argument("MPS apply: qubit-count mismatch");
  for (const Gate& g : gs.gates) apply_gate(g);
}

void MatrixProductState::left_canonicalize() {
  for (std::size_t q = 0; q + 1 < tensors_.size(); ++q) {
    auto& site = tensors_[q];
    const Eigen::Index dl = site[0].rows();
    const Eigen::Index dr = site[0].cols();
    Eigen::MatrixXcd m(2 * dl, dr);
    m.topRows(dl) = site[0];
    m.bottomRows(dl) = site[1];
    SvdSplit split = split_exact(m);
    site[0] = split.u.topRows(dl);
    site[1] = split.u.bottomRows(dl);
    auto& next = tensors_[q + 1];
    next[0] = split.sv_adj * next[0];
    next[1] = split.sv_adj * next[1];
  }
}

MatrixProductState embed_mps(std::span<const double> x, double c) {
  MatrixProductState mps(static_cast<int>(x.size()));
  mps.apply(build_embedding(x, c));
  mps.left_canonicalize();
  if (mps.max_bond_dim() > 2)
    throw InternalError(
        "embed_mps: bond dimension exceeded 2 for the staircase ansatz");
  return mps;
}

std::complex<double> mps_overlap(const MatrixProductState& a,
                                 const MatrixProductState& b) {
  if (a.n_qubits() != b.n_qubits())
    throw std::invalid_argument("mps_overlap: qubit-count mismatch");
  Eigen::MatrixXcd env = Eigen::MatrixXcd::Constant(1, 1, cx{1.0, 0.0});
  for (int q = 0; q < a.n_qubits(); ++q) {
    env = a.tensor(q, 0).adjoint() * env * b.tensor(q, 0) +
          a.tensor(q, 1).adjoint() * env * b.tensor(q, 1);
  }
  return env(0, 0);
}

double kernel_entry_tn(std::span<const double> x, std::span<const double> y,
                       double c) {
  if (x.size() != y.size())
    throw std::invalid_argument("kernel_entry_tn: dimension mismatch");
  const double p = std::norm(mps_overlap(embed_mps(x, c), embed_mps(y, c)));
  if (p < -1e-12 || p > 1.0 + 1e-12)
    throw InternalError("kernel_entry_tn: probability " + std::to_string(p) +
                        " outside [0,1] beyond tolerance");
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace qklab
