#include "qklab/kernel_matrix.hpp"

#include <bit>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "qklab/errors.hpp"
#include "qklab/mps.hpp"
#include "qklab/parallel.hpp"
#include "qklab/rng.hpp"

namespace qklab {

namespace {

std::span<const double> row_span(const Eigen::MatrixXd& m, Eigen::Index i,
                                 std::vector<double>& scratch) {
  // Eigen matrices are column-major; copy the row once.
  scratch.resize(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    scratch[static_cast<std::size_t>(j)] = m(i, j);
  return scratch;
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

KernelMeta make_meta(Eigen::Index rows, Eigen::Index cols, double bandwidth,
                     const std::string& backend, Eigen::Index features,
                     const Eigen::MatrixXd& rows_data) {
  KernelMeta meta;
  meta.rows = rows;
  meta.cols = cols;
  meta.bandwidth = bandwidth;
  meta.backend = backend;
  meta.feature_count = features;
  meta.dataset_hash = dataset_hash_hex(rows_data);
  meta.created_at = now_iso8601();
  return meta;
}

// Shared fill for both kernel families. `entry(i, j)` must be pure.
void fill_matrix(Eigen::MatrixXd& out, bool symmetric, int workers,
                 const std::function<double(Eigen::Index, Eigen::Index)>& entry) {
  const Eigen::Index rows = out.rows();
  const Eigen::Index cols = out.cols();
  if (symmetric) {
    // Upper triangle including the diagonal, then mirror.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(rows) * (rows + 1) / 2);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = i; j < cols; ++j) pairs.emplace_back(i, j);
    parallel_for(pairs.size(), workers, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k)
        out(pairs[k].first, pairs[k].second) =
            entry(pairs[k].first, pairs[k].second);
    });
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = i + 1; j < cols; ++j) out(j, i) = out(i, j);
  } else {
    parallel_for(static_cast<std::size_t>(rows * cols), workers,
                 [&](std::size_t b, std::size_t e) {
                   for (std::size_t k = b; k < e; ++k) {
                     const auto i = static_cast<Eigen::Index>(k) /
                                    cols;
                     const auto j = static_cast<Eigen::Index>(k) % cols;
                     out(i, j) = entry(i, j);
                   }
                 });
  }
}

}  // namespace

std::string to_string(KernelKind kind) {
  return kind == KernelKind::FidelityQuantum ? "fidelity-quantum" : "rbf";
}

std::string to_string(SimBackend backend) {
  return backend == SimBackend::Tn ? "tn" : "sv";
}

KernelKind kernel_kind_from_name(const std::string& name) {
  if (name == "fidelity-quantum" || name == "quantum")
    return KernelKind::FidelityQuantum;
  if (name == "rbf") return KernelKind::Rbf;
  throw ConfigError("unknown kernel kind '" + name + "'");
}

SimBackend backend_from_name(const std::string& name) {
  if (name == "tn") return SimBackend::Tn;
  if (name == "sv") return SimBackend::Sv;
  throw ConfigError("unknown backend '" + name + "'");
}

double rbf_entry(std::span<const double> x, std::span<const double> y,
                 double gamma) {
  if (x.size() != y.size())
    throw std::invalid_argument("rbf_entry: dimension mismatch");
  if (!(gamma > 0.0))
    throw std::invalid_argument("rbf_entry: gamma must be positive");
  double dist2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    dist2 += diff * diff;
  }
  return std::exp(-gamma * dist2);
}

KernelMatrix quantum_kernel_matrix(const Eigen::MatrixXd& x_rows,
                                   const Eigen::MatrixXd& x_cols, double c,
                                   SimBackend backend, int workers,
                                   int sv_cap) {
  if (x_rows.cols() != x_cols.cols())
    throw std::invalid_argument("kernel_matrix: feature-count mismatch");
  const bool symmetric = &x_rows == &x_cols;
  const auto n = static_cast<int>(x_rows.cols());
  if (backend == SimBackend::Sv && n > sv_cap)
    throw ConfigError("sv backend: " + std::to_string(n) +
                      " qubits exceeds cap " + std::to_string(sv_cap));

  KernelMatrix k;
  k.kind = KernelKind::FidelityQuantum;
  k.bandwidth_or_gamma = c;
  k.values.resize(x_rows.rows(), x_cols.rows());

  if (backend == SimBackend::Tn) {
    // Build every sample's MPS once, then fill from cheap pair overlaps.
    // This is the path-reuse optimization: N builds + N^2 overlaps instead
    // of N^2 full contractions.
    std::vector<MatrixProductState> row_mps;
    row_mps.reserve(static_cast<std::size_t>(x_rows.rows()));
    std::vector<double> scratch;
    for (Eigen::Index i = 0; i < x_rows.rows(); ++i)
      row_mps.push_back(embed_mps(row_span(x_rows, i, scratch), c));
    std::vector<MatrixProductState> col_storage;
    const std::vector<MatrixProductState>* col_mps = &row_mps;
    if (!symmetric) {
      col_storage.reserve(static_cast<std::size_t>(x_cols.rows()));
      for (Eigen::Index j = 0; j < x_cols.rows(); ++j)
        col_storage.push_back(embed_mps(row_span(x_cols, j, scratch), c));
      col_mps = &col_storage;
    }
    fill_matrix(k.values, symmetric, workers,
                [&](Eigen::Index i, Eigen::Index j) {
                  const double p = std::norm(mps_overlap(
                      row_mps[static_cast<std::size_t>(i)],
                      (*col_mps)[static_cast<std::size_t>(j)]));
                  if (p < -1e-12 || p > 1.0 + 1e-12)
                    throw InternalError("kernel_matrix: entry outside [0,1]");
                  return std::clamp(p, 0.0, 1.0);
                });
  } else {
    fill_matrix(k.values, symmetric, workers,
                [&](Eigen::Index i, Eigen::Index j) {
                  std::vector<double> xi, xj;
                  return kernel_entry_sv(row_span(x_rows, i, xi),
                                         row_span(x_cols, j, xj), c, sv_cap);
                });
  }

  k.meta = make_meta(x_rows.rows(), x_cols.rows(), c, to_string(backend),
                     x_rows.cols(), x_rows);
  return k;
}

KernelMatrix quantum_kernel_matrix(const Eigen::MatrixXd& x, double c,
                                   SimBackend backend, int workers,
                                   int sv_cap) {
  return quantum_kernel_matrix(x, x, c, backend, workers, sv_cap);
}

KernelMatrix rbf_matrix(const Eigen::MatrixXd& x_rows,
                        const Eigen::MatrixXd& x_cols, double gamma,
                        int workers) {
  if (x_rows.cols() != x_cols.cols())
    throw std::invalid_argument("rbf_matrix: feature-count mismatch");
  const bool symmetric = &x_rows == &x_cols;
  KernelMatrix k;
  k.kind = KernelKind::Rbf;
  k.bandwidth_or_gamma = gamma;
  k.values.resize(x_rows.rows(), x_cols.rows());
  fill_matrix(k.values, symmetric, workers,
              [&](Eigen::Index i, Eigen::Index j) {
                std::vector<double> xi, xj;
                return rbf_entry(row_span(x_rows, i, xi),
                                 row_span(x_cols, j, xj), gamma);
              });
  k.meta = make_meta(x_rows.rows(), x_cols.rows(), gamma, "rbf",
                     x_rows.cols(), x_rows);
  return k;
}

KernelMatrix rbf_matrix(const Eigen::MatrixXd& x, double gamma, int workers) {
  return rbf_matrix(x, x, gamma, workers);
}

KernelMatrix compute_kernel(const KernelSpec& spec,
                            const Eigen::MatrixXd& x_rows,
                            const Eigen::MatrixXd& x_cols, int workers) {
  if (spec.kind == KernelKind::Rbf)
    return rbf_matrix(x_rows, x_cols, spec.bandwidth, workers);
  return quantum_kernel_matrix(x_rows, x_cols, spec.bandwidth, spec.backend,
                               workers, spec.sv_cap);
}

KernelMatrix compute_kernel(const KernelSpec& spec, const Eigen::MatrixXd& x,
                            int workers) {
  return compute_kernel(spec, x, x, workers);
}

std::string dataset_hash_hex(const Eigen::MatrixXd& samples) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint64_t>(samples(i, j));
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void save_kernel(const KernelMatrix& k, const std::string& path_prefix) {
  std::ofstream bin(path_prefix + ".k64", std::ios::binary);
  if (!bin) throw std::runtime_error("save_kernel: cannot open " + path_prefix);
  for (Eigen::Index i = 0; i < k.rows(); ++i)
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint64_t>(k.values(i, j));
      unsigned char bytes[8];
      for (int b = 0; b < 8; ++b)
        bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
      bin.write(reinterpret_cast<const char*>(bytes), 8);
    }
  bin.close();

  nlohmann::json sidecar{
      {"rows", k.meta.rows},
      {"cols", k.meta.cols},
      {"bandwidth", k.meta.bandwidth},
      {"backend", k.meta.backend},
      {"feature_count", k.meta.feature_count},
      {"dataset_hash", k.meta.dataset_hash},
      {"created_at", k.meta.created_at},
      {"kind", to_string(k.kind)},
  };
  std::ofstream js(path_prefix + ".json");
  js << sidecar.dump(2) << '\n';
}

KernelMatrix load_kernel(const std::string& path_prefix) {
  std::ifstream js(path_prefix + ".json");
  if (!js)
    throw std::runtime_error("load_kernel: missing sidecar for " + path_prefix);
  nlohmann::json sidecar = nlohmann::json::parse(js);

  KernelMatrix k;
  k.meta.rows = sidecar.at("rows").get<Eigen::Index>();
  k.meta.cols = sidecar.at("cols").get<Eigen::Index>();
  k.meta.bandwidth = sidecar.at("bandwidth").get<double>();
  k.meta.backend = sidecar.at("backend").get<std::string>();
  k.meta.feature_count = sidecar.at("feature_count").get<Eigen::Index>();
  k.meta.dataset_hash = sidecar.at("dataset_hash").get<std::string>();
  k.meta.created_at = sidecar.at("created_at").get<std::string>();
  k.kind = kernel_kind_from_name(sidecar.at("kind").get<std::string>());
  k.bandwidth_or_gamma = k.meta.bandwidth;

  std::ifstream bin(path_prefix + ".k64", std::ios::binary);
  if (!bin)
    throw std::runtime_error("load_kernel: missing matrix for " + path_prefix);
  k.values.resize(k.meta.rows, k.meta.cols);
  for (Eigen::Index i = 0; i < k.meta.rows; ++i)
    for (Eigen::Index j = 0; j < k.meta.cols; ++j) {
      unsigned char bytes[8];
      bin.read(reinterpret_cast<char*>(bytes), 8);
      if (!bin) throw std::runtime_error("load_kernel: truncated " + path_prefix);
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      k.values(i, j) = std::bit_cast<double>(bits);
    }
  return k;
}

}  // namespace qklab
