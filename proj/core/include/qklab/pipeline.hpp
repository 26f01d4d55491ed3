#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qklab/dataset.hpp"
#include "qklab/hpo.hpp"

namespace qklab {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;    // invalid config or missing input
inline constexpr int kExitPartial = 2;   // some grid cells failed or missing
inline constexpr int kExitInternal = 3;  // numerical self-check failed

struct DatasetSpec {
  std::string csv_path;  // one of csv_path / synth_task must be set
  std::string label_column = "label";
  std::string synth_task;
  Eigen::Index synth_samples = 0;
  Eigen::Index synth_features = 0;
};

struct SplitSpec {
  std::string mode = "balanced";  // "balanced" | "kfold"
  int count = 4;                  // number of splits (balanced) or k (kfold)
  Eigen::Index n_train = 50;
  Eigen::Index n_val = 50;
  Eigen::Index n_test = 100;
  std::vector<int> classes;  // balanced mode; empty means all classes
  std::array<int, 3> ratio{2, 1, 2};
};

struct HpoSpec {
  int iterations = 50;
  int init_points = 10;
};

struct BenchSpec {
  std::vector<int> sv_qubits{4, 6, 8, 10, 12, 14, 16};
  std::vector<int> tn_qubits{16, 32, 64, 128, 256};
  Eigen::Index matrix_samples = 12;
  int repetitions = 3;
};

/// One experiment run: dataset, sweep, protocols, backend, splits, seed.
/// Loaded from a single JSON document; CLI flags override fields.
struct RunConfig {
  DatasetSpec dataset;
  std::vector<int> feature_counts;  // empty -> default sweep clipped to d
  std::vector<std::string> protocols{"bandwidth", "no-bandwidth"};
  std::vector<std::string> models{"quantum", "classical"};
  std::string backend = "tn";
  SplitSpec splits;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 -> QKLAB_WORKERS env or hardware concurrency
  std::string output_dir = "runs/out";
  HpoSpec hpo;
  BenchSpec bench;
  int sv_cap = 20;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  nlohmann::json to_json() const;

  /// Field-level validation; throws ConfigError.
  void validate() const;

  /// fnv1a64 hex of the canonical JSON form.
  std::string config_hash() const;
};

/// In-memory result of the prepare stage (also usable without touching the
/// filesystem): raw dataset, variance ranking on the raw features, splits,
/// and one train-statistics-normalized dataset per split.
struct PreparedData {
  SpectralDataset raw;
  std::vector<Eigen::Index> ranking;
  std::vector<DatasetSplit> splits;
  std::vector<SpectralDataset> normalized;  // full-feature, one per split
};

PreparedData prepare_data(const RunConfig& config);

/// Feature sweep for this config: explicit list or the default
/// {2,5,10,25,50,75,100,150,200} clipped to the feature count.
std::vector<int> resolve_feature_counts(const RunConfig& config,
                                        Eigen::Index d);

// Subcommands. Each returns a process exit code and persists artifacts under
// config.output_dir with a MANIFEST.json of content hashes. Reruns with an
// identical config are no-ops for already-present artifacts.
int cmd_prepare(const RunConfig& config);
int cmd_kernel(const RunConfig& config, int split_index, int n,
               double c_or_gamma, const std::string& kind);
int cmd_experiment(const RunConfig& config);
int cmd_diagnose(const RunConfig& config);
int cmd_bench(const RunConfig& config);
int cmd_report(const RunConfig& config);

/// One cell of the experiment grid.
struct CellResult {
  int split = 0;
  int n = 0;
  std::string protocol;
  std::string model;  // "quantum" | "classical"
  double C = 0.0, a = 0.0, alpha = 0.0;
  double c_star = 0.0;
  double train_acc = 0.0, val_acc = 0.0, test_acc = 0.0;
  std::string trace_ref;
  std::string error;  // empty on success
};

/// Runs HPO and the final fit for one cell; exposed for tests and the
/// acceptance suite. The prepared data must match the config.
CellResult run_experiment_cell(const RunConfig& config,
                               const PreparedData& prepared, int split_index,
                               int n, const std::string& protocol,
                               const std::string& model, HpoTrace* trace_out);

}  // namespace qklab
