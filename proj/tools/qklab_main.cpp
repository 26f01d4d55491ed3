// qklab: quantum-kernel SVM laboratory.
//
// Subcommands: prepare, kernel, experiment, diagnose, bench, report.
// A run is described by a JSON config (see README); flags override fields.
// QKLAB_WORKERS sets the default worker count.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "qklab/errors.hpp"
#include "qklab/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> backend;
  std::optional<int> sv_cap;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("-c,--config", flags.config_path,
                  "JSON run configuration file")
      ->required();
  cmd->add_option("-o,--output-dir", flags.output_dir,
                  "override output directory");
  cmd->add_option("--seed", flags.seed, "override run seed");
  cmd->add_option("--workers", flags.workers,
                  "override worker count (default: QKLAB_WORKERS or all cores)");
  cmd->add_option("--backend", flags.backend, "override backend (tn|sv)");
  cmd->add_option("--sv-cap", flags.sv_cap,
                  "override the statevector qubit cap (default 20)");
}

qklab::RunConfig load_config(const CommonFlags& flags) {
  qklab::RunConfig config = qklab::RunConfig::from_file(flags.config_path);
  if (flags.output_dir) config.output_dir = *flags.output_dir;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.workers) config.workers = *flags.workers;
  if (flags.backend) config.backend = *flags.backend;
  if (flags.sv_cap) config.sv_cap = *flags.sv_cap;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum-kernel SVM laboratory"};
  app.require_subcommand(1);

  CommonFlags prepare_flags, kernel_flags, experiment_flags, diagnose_flags,
      bench_flags, report_flags;

  CLI::App* prepare =
      app.add_subcommand("prepare", "generate splits and normalized datasets");
  add_common(prepare, prepare_flags);

  CLI::App* kernel = app.add_subcommand(
      "kernel", "compute and persist train/val/test kernel matrices");
  add_common(kernel, kernel_flags);
  int kernel_split = 0;
  int kernel_n = 0;
  double kernel_c = 1.0;
  std::string kernel_kind = "fidelity-quantum";
  kernel->add_option("--split", kernel_split, "split index")->required();
  kernel->add_option("-n,--features", kernel_n, "number of features")
      ->required();
  kernel->add_option("--bandwidth", kernel_c,
                     "bandwidth c (quantum) or gamma (rbf)")
      ->required();
  kernel->add_option("--kind", kernel_kind,
                     "kernel kind: fidelity-quantum | rbf");

  CLI::App* experiment = app.add_subcommand(
      "experiment", "run the full HPO + train/test grid");
  add_common(experiment, experiment_flags);

  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "kernel statistics, expressibility, g, alignment, spectra, "
                  "fits, Wilcoxon tests");
  add_common(diagnose, diagnose_flags);

  CLI::App* bench =
      app.add_subcommand("bench", "wall-time sweeps for both backends");
  add_common(bench, bench_flags);

  CLI::App* report =
      app.add_subcommand("report", "print summary tables for a finished run");
  add_common(report, report_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) return qklab::cmd_prepare(load_config(prepare_flags));
    if (kernel->parsed())
      return qklab::cmd_kernel(load_config(kernel_flags), kernel_split,
                               kernel_n, kernel_c, kernel_kind);
    if (experiment->parsed())
      return qklab::cmd_experiment(load_config(experiment_flags));
    if (diagnose->parsed())
      return qklab::cmd_diagnose(load_config(diagnose_flags));
    if (bench->parsed()) return qklab::cmd_bench(load_config(bench_flags));
    if (report->parsed()) return qklab::cmd_report(load_config(report_flags));
  } catch (const qklab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return qklab::kExitConfig;
  } catch (const qklab::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return qklab::kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qklab::kExitConfig;
  }
  return qklab::kExitOk;
}
