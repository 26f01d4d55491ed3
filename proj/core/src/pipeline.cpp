#include "qklab/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "qklab/diagnostics.hpp"
#include "qklab/errors.hpp"
#include "qklab/kernel_matrix.hpp"
#include "qklab/parallel.hpp"
#include "qklab/rng.hpp"
#include "qklab/svm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace qklab {

namespace {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing artifact: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes only when the content differs; returns true when the file changed.
bool write_artifact(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (ss.str() == content) return false;
  }
  std::ofstream out(path, std::ios::binary);
  out << content;
  return true;
}

class Manifest {
 public:
  Manifest(const fs::path& run_dir, const std::string& config_hash)
      : path_(run_dir / "MANIFEST.json"), config_hash_(config_hash) {
    if (fs::exists(path_)) {
      json j = json::parse(read_file(path_));
      if (j.value("config_hash", "") == config_hash_)
        artifacts_ = j.value("artifacts", json::object());
    }
  }

  void record(const fs::path& run_dir, const fs::path& file) {
    const std::string content = read_file(file);
    artifacts_[fs::relative(file, run_dir).string()] =
        hex64(fnv1a64(content.data(), content.size()));
  }

  void save() {
    json j{{"config_hash", config_hash_}, {"artifacts", artifacts_}};
    std::ofstream out(path_);
    out << j.dump(2) << '\n';
  }

 private:
  fs::path path_;
  std::string config_hash_;
  json artifacts_ = json::object();
};

void echo_config(const fs::path& run_dir, const RunConfig& config,
                 Manifest& manifest) {
  write_artifact(run_dir / "config.resolved.json",
                 config.to_json().dump(2) + "\n");
  manifest.record(run_dir, run_dir / "config.resolved.json");
}

json split_to_json(const DatasetSplit& split, const std::string& config_hash) {
  return json{{"seed", split.seed},
              {"config_hash", config_hash},
              {"train", split.train_idx},
              {"val", split.val_idx},
              {"test", split.test_idx}};
}

DatasetSplit split_from_json(const json& j) {
  DatasetSplit split;
  split.seed = j.at("seed").get<std::uint64_t>();
  split.train_idx = j.at("train").get<std::vector<Eigen::Index>>();
  split.val_idx = j.at("val").get<std::vector<Eigen::Index>>();
  split.test_idx = j.at("test").get<std::vector<Eigen::Index>>();
  return split;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m,
                            const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<Eigen::Index>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (Eigen::Index i : idx) out.push_back(labels[static_cast<std::size_t>(i)]);
  return out;
}

std::string format_double_token(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  std::string s = buf;
  for (char& ch : s)
    if (ch == '.' || ch == '+') ch = '_';
  return s;
}

std::string cell_key(int split, int n, const std::string& protocol,
                     const std::string& model) {
  return "s" + std::to_string(split) + "_n" + std::to_string(n) + "_" +
         protocol + "_" + model;
}

json cell_to_json(const CellResult& cell) {
  json j{{"split", cell.split},
         {"n", cell.n},
         {"protocol", cell.protocol},
         {"model", cell.model}};
  if (!cell.error.empty()) {
    j["error"] = cell.error;
    return j;
  }
  j["C"] = cell.C;
  j["a"] = cell.a;
  j["alpha"] = cell.alpha;
  j["c_star"] = cell.c_star;
  j["train_acc"] = cell.train_acc;
  j["val_acc"] = cell.val_acc;
  j["test_acc"] = cell.test_acc;
  j["trace"] = cell.trace_ref;
  return j;
}

CellResult cell_from_json(const json& j) {
  CellResult cell;
  cell.split = j.at("split").get<int>();
  cell.n = j.at("n").get<int>();
  cell.protocol = j.at("protocol").get<std::string>();
  cell.model = j.at("model").get<std::string>();
  if (j.contains("error")) {
    cell.error = j.at("error").get<std::string>();
    return cell;
  }
  cell.C = j.at("C").get<double>();
  cell.a = j.at("a").get<double>();
  cell.alpha = j.at("alpha").get<double>();
  cell.c_star = j.at("c_star").get<double>();
  cell.train_acc = j.at("train_acc").get<double>();
  cell.val_acc = j.at("val_acc").get<double>();
  cell.test_acc = j.at("test_acc").get<double>();
  cell.trace_ref = j.value("trace", "");
  return cell;
}

std::string machine_descriptor() {
  std::ostringstream ss;
  ss << "hw_threads=" << std::thread::hardware_concurrency();
#if defined(__VERSION__)
  ss << ";compiler=" << __VERSION__;
#endif
#if defined(__linux__)
  ss << ";os=linux";
#elif defined(__APPLE__)
  ss << ";os=macos";
#endif
  return ss.str();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    c.dataset.csv_path = d.value("csv", "");
    c.dataset.label_column = d.value("label_column", "label");
    if (d.contains("synth")) {
      const json& s = d.at("synth");
      c.dataset.synth_task = s.value("task", "");
      c.dataset.synth_samples = s.value("n_samples", Eigen::Index{0});
      c.dataset.synth_features = s.value("d", Eigen::Index{0});
    }
  }
  if (j.contains("features") && j.at("features").empty())
    throw ConfigError(
        "features: list must not be empty (omit the field for the default "
        "sweep)");
  c.feature_counts = j.value("features", std::vector<int>{});
  c.protocols = j.value("protocols",
                        std::vector<std::string>{"bandwidth", "no-bandwidth"});
  c.models =
      j.value("models", std::vector<std::string>{"quantum", "classical"});
  c.backend = j.value("backend", "tn");
  if (j.contains("splits")) {
    const json& s = j.at("splits");
    c.splits.mode = s.value("mode", "balanced");
    c.splits.count = s.value("count", s.value("k", 4));
    c.splits.n_train = s.value("train", Eigen::Index{50});
    c.splits.n_val = s.value("val", Eigen::Index{50});
    c.splits.n_test = s.value("test", Eigen::Index{100});
    c.splits.classes = s.value("classes", std::vector<int>{});
    const auto ratio = s.value("ratio", std::vector<int>{2, 1, 2});
    if (ratio.size() != 3)
      throw ConfigError("splits.ratio must have 3 entries");
    c.splits.ratio = {ratio[0], ratio[1], ratio[2]};
  }
  c.seed = j.value("seed", std::uint64_t{0});
  c.workers = j.value("workers", 0);
  c.output_dir = j.value("output_dir", "runs/out");
  if (j.contains("hpo")) {
    c.hpo.iterations = j.at("hpo").value("iterations", 50);
    c.hpo.init_points = j.at("hpo").value("init_points", 10);
  }
  if (j.contains("bench")) {
    const json& b = j.at("bench");
    c.bench.sv_qubits = b.value("sv_qubits", c.bench.sv_qubits);
    c.bench.tn_qubits = b.value("tn_qubits", c.bench.tn_qubits);
    c.bench.matrix_samples = b.value("matrix_samples", Eigen::Index{12});
    c.bench.repetitions = b.value("repetitions", 3);
  }
  c.sv_cap = j.value("sv_cap", 20);
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json d{{"csv", dataset.csv_path}, {"label_column", dataset.label_column}};
  if (!dataset.synth_task.empty())
    d["synth"] = json{{"task", dataset.synth_task},
                      {"n_samples", dataset.synth_samples},
                      {"d", dataset.synth_features}};
  return json{
      {"dataset", d},
      {"features", feature_counts},
      {"protocols", protocols},
      {"models", models},
      {"backend", backend},
      {"splits",
       json{{"mode", splits.mode},
            {"count", splits.count},
            {"train", splits.n_train},
            {"val", splits.n_val},
            {"test", splits.n_test},
            {"classes", splits.classes},
            {"ratio", std::vector<int>{splits.ratio[0], splits.ratio[1],
                                       splits.ratio[2]}}}},
      {"seed", seed},
      {"workers", workers},
      {"output_dir", output_dir},
      {"hpo", json{{"iterations", hpo.iterations},
                   {"init_points", hpo.init_points}}},
      {"bench", json{{"sv_qubits", bench.sv_qubits},
                     {"tn_qubits", bench.tn_qubits},
                     {"matrix_samples", bench.matrix_samples},
                     {"repetitions", bench.repetitions}}},
      {"sv_cap", sv_cap},
  };
}

void RunConfig::validate() const {
  const bool has_csv = !dataset.csv_path.empty();
  const bool has_synth = !dataset.synth_task.empty();
  if (has_csv == has_synth)
    throw ConfigError(
        "dataset: exactly one of dataset.csv or dataset.synth is required");
  if (has_synth) {
    synth_task_from_name(dataset.synth_task);  // throws on unknown task
    if (dataset.synth_samples < 2 || dataset.synth_features < 1)
      throw ConfigError("dataset.synth: n_samples >= 2 and d >= 1 required");
  }
  for (const auto& p : protocols)
    if (p != "bandwidth" && p != "no-bandwidth")
      throw ConfigError("protocols: unknown protocol '" + p + "'");
  if (protocols.empty()) throw ConfigError("protocols: must not be empty");
  for (const auto& m : models)
    if (m != "quantum" && m != "classical")
      throw ConfigError("models: unknown model '" + m + "'");
  if (models.empty()) throw ConfigError("models: must not be empty");
  backend_from_name(backend);
  if (splits.mode != "balanced" && splits.mode != "kfold")
    throw ConfigError("splits.mode: must be 'balanced' or 'kfold'");
  if (splits.count < 1) throw ConfigError("splits.count: must be >= 1");
  if (splits.mode == "kfold" && splits.count < 2)
    throw ConfigError("splits.count: kfold needs k >= 2");
  for (int n : feature_counts)
    if (n < 1) throw ConfigError("features: counts must be >= 1");
  if (backend == "sv")
    for (int n : feature_counts)
      if (n > sv_cap)
        throw ConfigError("features: sv backend caps qubit count at " +
                          std::to_string(sv_cap) + ", got " +
                          std::to_string(n));
  if (hpo.iterations < hpo.init_points || hpo.init_points < 1)
    throw ConfigError("hpo: need iterations >= init_points >= 1");
  if (sv_cap < 1) throw ConfigError("sv_cap: must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

std::string RunConfig::config_hash() const {
  // Execution parameters do not define the experiment: worker count and
  // output location never change numerical artifacts, bench settings only
  // shape the (exempt) timing files.
  json canonical = to_json();
  canonical.erase("workers");
  canonical.erase("output_dir");
  canonical.erase("bench");
  const std::string dumped = canonical.dump();
  return hex64(fnv1a64(dumped));
}

std::vector<int> resolve_feature_counts(const RunConfig& config,
                                        Eigen::Index d) {
  std::vector<int> out;
  if (config.feature_counts.empty()) {
    for (int n : {2, 5, 10, 25, 50, 75, 100, 150, 200})
      if (n <= d) out.push_back(n);
    if (out.empty()) out.push_back(static_cast<int>(d));
  } else {
    for (int n : config.feature_counts) {
      if (n > d)
        throw ConfigError("features: count " + std::to_string(n) +
                          " exceeds dataset feature count " +
                          std::to_string(d));
      out.push_back(n);
    }
  }
  return out;
}

PreparedData prepare_data(const RunConfig& config) {
  config.validate();
  PreparedData prepared;
  if (!config.dataset.csv_path.empty()) {
    prepared.raw =
        load_csv(config.dataset.csv_path, config.dataset.label_column);
  } else {
    prepared.raw = synth_dataset(config.dataset.synth_samples,
                                 config.dataset.synth_features,
                                 synth_task_from_name(config.dataset.synth_task),
                                 config.seed);
  }
  prepared.raw.validate(true);
  resolve_feature_counts(config, prepared.raw.n_features());

  prepared.ranking = rank_features_by_variance(prepared.raw);

  if (config.splits.mode == "balanced") {
    std::vector<int> classes = config.splits.classes;
    if (classes.empty()) classes = prepared.raw.distinct_labels();
    Rng root(config.seed);
    for (int s = 0; s < config.splits.count; ++s) {
      const std::uint64_t split_seed =
          root.stream("split").stream(static_cast<std::uint64_t>(s)).next_u64();
      prepared.splits.push_back(make_balanced_split(
          prepared.raw,
          {config.splits.n_train, config.splits.n_val, config.splits.n_test},
          classes, split_seed));
    }
  } else {
    prepared.splits = kfold_splits(prepared.raw, config.splits.count,
                                   config.splits.ratio, config.seed);
  }

  for (const auto& split : prepared.splits) {
    auto [normalized, scaling] = normalize_minmax(prepared.raw, split.train_idx);
    (void)scaling;
    prepared.normalized.push_back(std::move(normalized));
  }
  return prepared;
}

int cmd_prepare(const RunConfig& config) {
  try {
    const PreparedData prepared = prepare_data(config);
    const fs::path run_dir(config.output_dir);
    fs::create_directories(run_dir / "data");
    const std::string hash = config.config_hash();
    Manifest manifest(run_dir, hash);
    echo_config(run_dir, config, manifest);

    {
      const fs::path p = run_dir / "data" / "dataset.csv";
      write_artifact(p, to_csv_string(prepared.raw));
      manifest.record(run_dir, p);
    }
    {
      json j{{"config_hash", hash},
             {"seed", config.seed},
             {"ranking", prepared.ranking}};
      const fs::path p = run_dir / "data" / "ranking.json";
      const bool fresh = write_artifact(p, j.dump(2) + "\n");
      manifest.record(run_dir, p);
      std::cout << "prepare: ranking.json" << (fresh ? "" : " (cached)")
                << "\n";
    }
    for (std::size_t s = 0; s < prepared.splits.size(); ++s) {
      const fs::path p =
          run_dir / "data" / ("split_" + std::to_string(s) + ".json");
      const bool fresh = write_artifact(
          p, split_to_json(prepared.splits[s], hash).dump(2) + "\n");
      manifest.record(run_dir, p);
      const fs::path np =
          run_dir / "data" / ("normalized_" + std::to_string(s) + ".csv");
      write_artifact(np, to_csv_string(prepared.normalized[s]));
      manifest.record(run_dir, np);
      std::cout << "prepare: split " << s << " train/val/test = "
                << prepared.splits[s].train_idx.size() << "/"
                << prepared.splits[s].val_idx.size() << "/"
                << prepared.splits[s].test_idx.size()
                << (fresh ? "" : " (cached)") << "\n";
    }
    manifest.save();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

namespace {

struct LoadedPrepared {
  std::vector<Eigen::Index> ranking;
  DatasetSplit split;
  SpectralDataset normalized;
};

LoadedPrepared load_prepared(const RunConfig& config, int split_index) {
  const fs::path run_dir(config.output_dir);
  LoadedPrepared out;
  const json ranking_json =
      json::parse(read_file(run_dir / "data" / "ranking.json"));
  out.ranking = ranking_json.at("ranking").get<std::vector<Eigen::Index>>();
  out.split = split_from_json(json::parse(read_file(
      run_dir / "data" / ("split_" + std::to_string(split_index) + ".json"))));
  out.normalized =
      load_csv((run_dir / "data" /
                ("normalized_" + std::to_string(split_index) + ".csv"))
                   .string(),
               "label");
  return out;
}

}  // namespace

int cmd_kernel(const RunConfig& config, int split_index, int n,
               double c_or_gamma, const std::string& kind_name) {
  try {
    config.validate();
    const KernelKind kind = kernel_kind_from_name(kind_name);
    const LoadedPrepared prepared = load_prepared(config, split_index);
    if (n < 1 || n > prepared.normalized.n_features())
      throw ConfigError("kernel: n out of range");

    const SpectralDataset selected =
        select_top_features(prepared.normalized, prepared.ranking, n);
    const Eigen::MatrixXd x_train =
        gather_rows(selected.samples, prepared.split.train_idx);
    const Eigen::MatrixXd x_val =
        gather_rows(selected.samples, prepared.split.val_idx);
    const Eigen::MatrixXd x_test =
        gather_rows(selected.samples, prepared.split.test_idx);

    KernelSpec spec;
    spec.kind = kind;
    spec.bandwidth = c_or_gamma;
    spec.backend = backend_from_name(config.backend);
    spec.sv_cap = config.sv_cap;

    const fs::path run_dir(config.output_dir);
    fs::create_directories(run_dir / "kernels");
    Manifest manifest(run_dir, config.config_hash());
    echo_config(run_dir, config, manifest);

    // Backend goes into the artifact name so tn and sv products of the same
    // cell never collide.
    const std::string family = kind == KernelKind::Rbf
                                   ? std::string("rbf")
                                   : kind_name + "_" + config.backend;
    const std::string stem = family + "_s" + std::to_string(split_index) +
                             "_n" + std::to_string(n) + "_c" +
                             format_double_token(c_or_gamma);
    const struct {
      const char* tag;
      const Eigen::MatrixXd* cols;
    } jobs[] = {{"train", nullptr}, {"val", &x_val}, {"test", &x_test}};
    for (const auto& job : jobs) {
      const KernelMatrix k =
          job.cols == nullptr
              ? compute_kernel(spec, x_train, config.workers)
              : compute_kernel(spec, x_train, *job.cols, config.workers);
      const fs::path prefix = run_dir / "kernels" / (stem + "_" + job.tag);
      save_kernel(k, prefix.string());
      manifest.record(run_dir, fs::path(prefix.string() + ".k64"));
      manifest.record(run_dir, fs::path(prefix.string() + ".json"));
      std::cout << "kernel: " << prefix.filename().string() << " ("
                << k.rows() << "x" << k.cols() << ")\n";
    }
    manifest.save();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

CellResult run_experiment_cell(const RunConfig& config,
                               const PreparedData& prepared, int split_index,
                               int n, const std::string& protocol,
                               const std::string& model, HpoTrace* trace_out) {
  CellResult cell;
  cell.split = split_index;
  cell.n = n;
  cell.protocol = protocol;
  cell.model = model;

  const DatasetSplit& split = prepared.splits[static_cast<std::size_t>(split_index)];
  const SpectralDataset& normalized =
      prepared.normalized[static_cast<std::size_t>(split_index)];

  ObjectiveContext ctx;
  ctx.normalized = &normalized;
  ctx.ranking = &prepared.ranking;
  ctx.split = &split;
  ctx.n_features = n;
  ctx.kind = model == "quantum" ? KernelKind::FidelityQuantum : KernelKind::Rbf;
  ctx.backend = backend_from_name(config.backend);
  ctx.workers = config.workers;
  ctx.sv_cap = config.sv_cap;

  const SearchSpace space = protocol == "bandwidth"
                                ? SearchSpace::svm_bandwidth()
                                : SearchSpace::svm_no_bandwidth();
  BayesOptions opts;
  opts.iterations = config.hpo.iterations;
  opts.init_points = config.hpo.init_points;

  const std::uint64_t cell_seed = Rng(config.seed)
                                      .stream("hpo-cell")
                                      .stream(static_cast<std::uint64_t>(split_index))
                                      .stream(static_cast<std::uint64_t>(n))
                                      .stream(protocol)
                                      .stream(model)
                                      .next_u64();

  HpoTrace trace = bayes_optimize(
      [&](const std::vector<double>& params) {
        return validation_objective(ctx, params);
      },
      space, opts, cell_seed);
  trace.n_features = n;

  cell.C = trace.best_params[0];
  cell.a = trace.best_params[1];
  cell.alpha = trace.best_params[2];
  cell.c_star = bandwidth_from(cell.a, cell.alpha, n);
  cell.val_acc = trace.best_score;

  // Final fit at the optimized hyperparameters.
  const SpectralDataset selected =
      select_top_features(normalized, prepared.ranking, n);
  const Eigen::MatrixXd x_train = gather_rows(selected.samples, split.train_idx);
  const Eigen::MatrixXd x_test = gather_rows(selected.samples, split.test_idx);
  const std::vector<int> y_train = gather_labels(selected.labels, split.train_idx);
  const std::vector<int> y_test = gather_labels(selected.labels, split.test_idx);

  KernelSpec spec;
  spec.kind = ctx.kind;
  spec.backend = ctx.backend;
  spec.sv_cap = ctx.sv_cap;
  spec.bandwidth =
      ctx.kind == KernelKind::Rbf ? cell.c_star * cell.c_star : cell.c_star;

  const KernelMatrix k_train = compute_kernel(spec, x_train, config.workers);
  const KernelMatrix k_test =
      compute_kernel(spec, x_train, x_test, config.workers);
  cell.train_acc = evaluate_accuracy(k_train, y_train, k_train, y_train, cell.C);
  cell.test_acc = evaluate_accuracy(k_train, y_train, k_test, y_test, cell.C);

  if (trace_out) *trace_out = std::move(trace);
  return cell;
}

int cmd_experiment(const RunConfig& config) {
  int exit_code = kExitOk;
  try {
    const PreparedData prepared = prepare_data(config);
    const std::vector<int> feature_counts =
        resolve_feature_counts(config, prepared.raw.n_features());

    const fs::path run_dir(config.output_dir);
    fs::create_directories(run_dir / "experiment" / "traces");
    const std::string hash = config.config_hash();
    Manifest manifest(run_dir, hash);
    echo_config(run_dir, config, manifest);

    // Resume: keep cells from an existing results file for the same config.
    const fs::path results_path = run_dir / "experiment" / "results.json";
    std::map<std::string, CellResult> cells;
    if (fs::exists(results_path)) {
      const json existing = json::parse(read_file(results_path));
      if (existing.value("config_hash", "") == hash) {
        for (const auto& jc : existing.at("cells")) {
          CellResult cell = cell_from_json(jc);
          if (cell.error.empty())
            cells[cell_key(cell.split, cell.n, cell.protocol, cell.model)] =
                cell;
        }
      }
    }

    auto save_results = [&]() {
      json out{{"config_hash", hash}, {"seed", config.seed}};
      json arr = json::array();
      for (const auto& [key, cell] : cells) arr.push_back(cell_to_json(cell));
      out["cells"] = arr;
      write_artifact(results_path, out.dump(2) + "\n");
    };

    int failures = 0;
    for (std::size_t s = 0; s < prepared.splits.size(); ++s)
      for (int n : feature_counts)
        for (const auto& protocol : config.protocols)
          for (const auto& model : config.models) {
            const std::string key =
                cell_key(static_cast<int>(s), n, protocol, model);
            if (cells.count(key)) {
              std::cout << "experiment: " << key << " (cached)\n";
              continue;
            }
            CellResult cell;
            try {
              HpoTrace trace;
              cell = run_experiment_cell(config, prepared, static_cast<int>(s),
                                         n, protocol, model, &trace);
              const fs::path trace_path =
                  run_dir / "experiment" / "traces" / (key + ".json");
              cell.trace_ref = fs::relative(trace_path, run_dir).string();
              json tj = trace_to_json(trace);
              tj["config_hash"] = hash;
              write_artifact(trace_path, tj.dump(2) + "\n");
              manifest.record(run_dir, trace_path);
              std::cout << "experiment: " << key << " val=" << cell.val_acc
                        << " test=" << cell.test_acc << "\n";
            } catch (const std::exception& e) {
              cell.split = static_cast<int>(s);
              cell.n = n;
              cell.protocol = protocol;
              cell.model = model;
              cell.error = e.what();
              ++failures;
              std::cerr << "experiment: " << key << " FAILED: " << e.what()
                        << "\n";
            }
            cells[key] = cell;
            save_results();
          }

    save_results();
    manifest.record(run_dir, results_path);

    // Tidy summary, one row per finished cell.
    std::ostringstream csv;
    csv << "split,n,protocol,model,C,a,alpha,c_star,train_acc,val_acc,test_acc\n";
    csv.precision(10);
    for (const auto& [key, cell] : cells) {
      if (!cell.error.empty()) continue;
      csv << cell.split << ',' << cell.n << ',' << cell.protocol << ','
          << cell.model << ',' << cell.C << ',' << cell.a << ',' << cell.alpha
          << ',' << cell.c_star << ',' << cell.train_acc << ',' << cell.val_acc
          << ',' << cell.test_acc << '\n';
    }
    const fs::path summary_path = run_dir / "experiment" / "summary.csv";
    write_artifact(summary_path, csv.str());
    manifest.record(run_dir, summary_path);
    manifest.save();

    if (failures > 0) {
      std::cerr << "experiment: " << failures << " cell(s) failed\n";
      exit_code = kExitPartial;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return exit_code;
}

int cmd_diagnose(const RunConfig& config) {
  try {
    const PreparedData prepared = prepare_data(config);
    const std::vector<int> feature_counts =
        resolve_feature_counts(config, prepared.raw.n_features());
    const fs::path run_dir(config.output_dir);
    const std::string hash = config.config_hash();

    const fs::path results_path = run_dir / "experiment" / "results.json";
    if (!fs::exists(results_path))
      throw ConfigError("diagnose: experiment results not found; run the "
                        "experiment command first");
    const json results = json::parse(read_file(results_path));
    if (results.value("config_hash", "") != hash)
      throw ConfigError("diagnose: results.json belongs to a different config");

    std::map<std::string, CellResult> cells;
    for (const auto& jc : results.at("cells")) {
      CellResult cell = cell_from_json(jc);
      if (cell.error.empty())
        cells[cell_key(cell.split, cell.n, cell.protocol, cell.model)] = cell;
    }

    std::vector<std::string> missing;
    json records = json::array();
    std::ostringstream tidy;
    tidy << "split,n,protocol,metric,value\n";
    tidy.precision(10);
    std::ostringstream spectra_csv;
    spectra_csv << "split,n,protocol,model,index,eigenvalue\n";
    spectra_csv.precision(10);

    const SimBackend backend = backend_from_name(config.backend);

    for (std::size_t s = 0; s < prepared.splits.size(); ++s) {
      const DatasetSplit& split = prepared.splits[s];
      const SpectralDataset& normalized = prepared.normalized[s];
      for (int n : feature_counts) {
        for (const auto& protocol : config.protocols) {
          const std::string qkey =
              cell_key(static_cast<int>(s), n, protocol, "quantum");
          const std::string ckey =
              cell_key(static_cast<int>(s), n, protocol, "classical");
          if (!cells.count(qkey) || !cells.count(ckey)) {
            if (!cells.count(qkey)) missing.push_back(qkey);
            if (!cells.count(ckey)) missing.push_back(ckey);
            continue;
          }
          const CellResult& qc = cells.at(qkey);
          const CellResult& cc = cells.at(ckey);

          const SpectralDataset selected =
              select_top_features(normalized, prepared.ranking, n);
          const Eigen::MatrixXd x_train =
              gather_rows(selected.samples, split.train_idx);

          const KernelMatrix k_q = quantum_kernel_matrix(
              x_train, qc.c_star, backend, config.workers, config.sv_cap);
          const KernelMatrix k_c =
              rbf_matrix(x_train, cc.c_star * cc.c_star, config.workers);

          const KernelStats stats = kernel_stats(k_q);
          const double eps = expressibility(offdiag_upper(k_q), n);
          const double lambda = default_geometric_lambda(k_c);
          const double g = geometric_difference(k_c, k_q, lambda);
          const double align = alignment(k_c, k_q);
          const Eigen::VectorXd spec_q = spectrum(k_q.values);
          const Eigen::VectorXd spec_c = spectrum(k_c.values);
          const double sqrt_n =
              std::sqrt(static_cast<double>(split.train_idx.size()));

          json rec{{"split", static_cast<int>(s)},
                   {"n", n},
                   {"protocol", protocol},
                   {"mean_offdiag", stats.mean_offdiag},
                   {"std_offdiag", stats.std_offdiag},
                   {"expressibility", eps},
                   {"geometric_difference", g},
                   {"sqrt_n_train", sqrt_n},
                   {"alignment", align},
                   {"lambda", lambda},
                   {"c_star_quantum", qc.c_star},
                   {"c_star_classical", cc.c_star}};
          records.push_back(rec);

          const auto emit = [&](const char* metric, double value) {
            tidy << s << ',' << n << ',' << protocol << ',' << metric << ','
                 << value << '\n';
          };
          emit("mean_offdiag", stats.mean_offdiag);
          emit("std_offdiag", stats.std_offdiag);
          emit("expressibility", eps);
          emit("geometric_difference", g);
          emit("sqrt_n_train", sqrt_n);
          emit("alignment", align);
          emit("c_star_quantum", qc.c_star);
          emit("c_star_classical", cc.c_star);

          for (Eigen::Index i = 0; i < spec_q.size(); ++i)
            spectra_csv << s << ',' << n << ',' << protocol << ",quantum," << i
                        << ',' << spec_q[i] << '\n';
          for (Eigen::Index i = 0; i < spec_c.size(); ++i)
            spectra_csv << s << ',' << n << ',' << protocol << ",classical,"
                        << i << ',' << spec_c[i] << '\n';
        }
      }
    }

    // Scaling fits of c*(n) per split, bandwidth protocol only.
    json fits = json::array();
    for (std::size_t s = 0; s < prepared.splits.size(); ++s) {
      std::vector<double> ns, c_stars;
      for (int n : feature_counts) {
        const std::string qkey =
            cell_key(static_cast<int>(s), n, "bandwidth", "quantum");
        if (!cells.count(qkey)) continue;
        ns.push_back(static_cast<double>(n));
        c_stars.push_back(cells.at(qkey).c_star);
      }
      if (ns.size() < 3) continue;
      for (FitKind kind : {FitKind::PowerLaw, FitKind::Exponential}) {
        const ScalingFit fit = fit_scaling(ns, c_stars, kind);
        fits.push_back(json{
            {"split", static_cast<int>(s)},
            {"kind", kind == FitKind::PowerLaw ? "power-law" : "exponential"},
            {"a", fit.a},
            {"b", fit.b},
            {"r_squared", fit.r_squared}});
      }
    }

    // Wilcoxon signed-rank across splits: quantum vs classical test accuracy
    // (bandwidth protocol), per n and pooled.
    json wilcoxon = json::array();
    std::vector<double> pooled;
    for (int n : feature_counts) {
      std::vector<double> diffs;
      for (std::size_t s = 0; s < prepared.splits.size(); ++s) {
        const std::string qkey =
            cell_key(static_cast<int>(s), n, "bandwidth", "quantum");
        const std::string ckey =
            cell_key(static_cast<int>(s), n, "bandwidth", "classical");
        if (!cells.count(qkey) || !cells.count(ckey)) continue;
        const double diff = cells.at(qkey).test_acc - cells.at(ckey).test_acc;
        diffs.push_back(diff);
        pooled.push_back(diff);
      }
      if (diffs.empty()) continue;
      json entry{{"n", n}, {"n_splits", diffs.size()}};
      const bool all_zero =
          std::all_of(diffs.begin(), diffs.end(), [](double d) { return d == 0.0; });
      if (all_zero || diffs.size() > 25)
        entry["p_value"] = nullptr;
      else
        entry["p_value"] = wilcoxon_signed_rank_exact(diffs);
      wilcoxon.push_back(entry);
    }
    if (!pooled.empty() && pooled.size() <= 25 &&
        !std::all_of(pooled.begin(), pooled.end(),
                     [](double d) { return d == 0.0; })) {
      wilcoxon.push_back(json{{"n", "all"},
                              {"n_splits", pooled.size()},
                              {"p_value", wilcoxon_signed_rank_exact(pooled)}});
    }

    json out{{"config_hash", hash},
             {"seed", config.seed},
             {"records", records},
             {"fits", fits},
             {"wilcoxon", wilcoxon},
             {"missing_cells", missing}};

    fs::create_directories(run_dir / "diagnostics");
    Manifest manifest(run_dir, hash);
    echo_config(run_dir, config, manifest);
    const fs::path diag_path = run_dir / "diagnostics" / "diagnostics.json";
    write_artifact(diag_path, out.dump(2) + "\n");
    manifest.record(run_dir, diag_path);
    const fs::path tidy_path = run_dir / "diagnostics" / "diagnostics.csv";
    write_artifact(tidy_path, tidy.str());
    manifest.record(run_dir, tidy_path);
    const fs::path spectra_path = run_dir / "diagnostics" / "spectra.csv";
    write_artifact(spectra_path, spectra_csv.str());
    manifest.record(run_dir, spectra_path);
    manifest.save();

    std::cout << "diagnose: " << records.size() << " records, " << fits.size()
              << " fits\n";
    if (!missing.empty()) {
      std::cerr << "diagnose: missing cells:\n";
      for (const auto& key : missing) std::cerr << "  " << key << "\n";
      return kExitPartial;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_bench(const RunConfig& config) {
  try {
    config.validate();
    const fs::path run_dir(config.output_dir);
    fs::create_directories(run_dir / "bench");

    std::ostringstream csv;
    csv << "backend,n,samples,repetitions,median_seconds,machine\n";
    const std::string machine = machine_descriptor();

    const auto time_once = [&](SimBackend backend, int n) {
      const SpectralDataset data = synth_dataset(
          config.bench.matrix_samples, n, SynthTask::Random, config.seed);
      const auto t0 = std::chrono::steady_clock::now();
      const KernelMatrix k = quantum_kernel_matrix(
          data.samples, 0.5, backend, config.workers,
          std::max(config.sv_cap, n));
      const auto t1 = std::chrono::steady_clock::now();
      (void)k;
      return std::chrono::duration<double>(t1 - t0).count();
    };

    const auto run_sweep = [&](SimBackend backend,
                               const std::vector<int>& qubits) {
      for (int n : qubits) {
        if (backend == SimBackend::Sv && n > config.sv_cap) continue;
        std::vector<double> times;
        for (int rep = 0; rep < std::max(3, config.bench.repetitions); ++rep)
          times.push_back(time_once(backend, n));
        std::sort(times.begin(), times.end());
        const double median = times[times.size() / 2];
        csv << to_string(backend) << ',' << n << ','
            << config.bench.matrix_samples << ',' << times.size() << ','
            << median << ',' << machine << '\n';
        std::cout << "bench: " << to_string(backend) << " n=" << n << " "
                  << median << " s\n";
      }
    };

    run_sweep(SimBackend::Sv, config.bench.sv_qubits);
    run_sweep(SimBackend::Tn, config.bench.tn_qubits);

    // Timing artifacts are machine-dependent; recorded but exempt from the
    // byte-identical rerun contract.
    write_artifact(run_dir / "bench" / "timings.csv", csv.str());
    Manifest manifest(run_dir, config.config_hash());
    echo_config(run_dir, config, manifest);
    manifest.record(run_dir, run_dir / "bench" / "timings.csv");
    manifest.save();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

int cmd_report(const RunConfig& config) {
  try {
    config.validate();
    const fs::path run_dir(config.output_dir);
    const fs::path results_path = run_dir / "experiment" / "results.json";
    if (!fs::exists(results_path))
      throw ConfigError("report: no experiment results under " +
                        config.output_dir);
    const json results = json::parse(read_file(results_path));

    struct Agg {
      std::vector<double> train, test;
    };
    std::map<std::tuple<int, std::string, std::string>, Agg> groups;
    for (const auto& jc : results.at("cells")) {
      const CellResult cell = cell_from_json(jc);
      if (!cell.error.empty()) continue;
      auto& agg = groups[{cell.n, cell.protocol, cell.model}];
      agg.train.push_back(cell.train_acc);
      agg.test.push_back(cell.test_acc);
    }

    const auto mean_std = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= static_cast<double>(v.size());
      return std::pair<double, double>{mean, std::sqrt(var)};
    };

    std::printf("%6s  %-13s  %-9s  %-17s  %-17s  %s\n", "n", "protocol",
                "model", "train acc", "test acc", "splits");
    for (const auto& [key, agg] : groups) {
      const auto [n, protocol, model] = key;
      const auto [tr_m, tr_s] = mean_std(agg.train);
      const auto [te_m, te_s] = mean_std(agg.test);
      std::printf("%6d  %-13s  %-9s  %.3f +/- %.3f   %.3f +/- %.3f   %zu\n", n,
                  protocol.c_str(), model.c_str(), tr_m, tr_s, te_m, te_s,
                  agg.test.size());
    }

    const fs::path diag_path = run_dir / "diagnostics" / "diagnostics.json";
    if (fs::exists(diag_path)) {
      const json diag = json::parse(read_file(diag_path));
      if (!diag.at("fits").empty()) {
        std::printf("\nscaling fits of c*(n), bandwidth protocol:\n");
        std::printf("%6s  %-12s  %9s  %9s  %7s\n", "split", "kind", "a", "b",
                    "R^2");
        for (const auto& fit : diag.at("fits"))
          std::printf("%6d  %-12s  %9.4f  %9.4f  %7.4f\n",
                      fit.at("split").get<int>(),
                      fit.at("kind").get<std::string>().c_str(),
                      fit.at("a").get<double>(), fit.at("b").get<double>(),
                      fit.at("r_squared").get<double>());
      }
      if (!diag.at("wilcoxon").empty()) {
        std::printf("\nWilcoxon signed-rank (quantum - classical test acc):\n");
        for (const auto& w : diag.at("wilcoxon")) {
          const std::string n_label = w.at("n").is_string()
                                          ? w.at("n").get<std::string>()
                                          : std::to_string(w.at("n").get<int>());
          if (w.at("p_value").is_null())
            std::printf("  n=%-6s  p=none (all diffs zero or m > 25)\n",
                        n_label.c_str());
          else
            std::printf("  n=%-6s  p=%.4f\n", n_label.c_str(),
                        w.at("p_value").get<double>());
        }
      }
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace qklab
