// exf: embedding-transfer experiments with relaxed contrastive losses.
//
// Subcommands:
//   train-source  train the source model from an experiment config
//   transfer      run the embedding transfer and write the eval report
//   eval          retrieval + spectral reports for a checkpoint on a dataset
//   gradcheck     finite-difference verification of every loss gradient

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "exf/error.hpp"
#include "exf/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerification = 3;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  bool deterministic = true;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config JSON")->required();
  auto* seed = cmd->add_option("--seed", "override the config seed");
  seed->each([&opts](const std::string& v) { opts.seed_override = std::stoull(v); });
  auto* out = cmd->add_option("--out", "override the output directory");
  out->each([&opts](const std::string& v) { opts.out_override = v; });
  cmd->add_flag("--deterministic,!--no-deterministic", opts.deterministic,
                "deterministic mode (default on)");
}

exf::ExperimentConfig load_with_overrides(const CommonOpts& opts) {
  exf::ExperimentConfig cfg = exf::ExperimentConfig::load(opts.config_path);
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  if (opts.out_override) cfg.out_dir = *opts.out_override;
  if (!opts.deterministic) cfg.deterministic = false;
  if (cfg.transfer) cfg.transfer->seed = cfg.seed;
  return cfg;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const exf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const exf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"embedding transfer with relaxed contrastive losses"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  CLI::App* train_cmd =
      app.add_subcommand("train-source", "train and checkpoint the source model");
  add_common(train_cmd, train_opts);

  CommonOpts transfer_opts;
  CLI::App* transfer_cmd =
      app.add_subcommand("transfer", "train the target model and write the report");
  add_common(transfer_cmd, transfer_opts);

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on a dataset file");
  std::string eval_ckpt, eval_data, eval_format = "auto";
  std::vector<std::size_t> eval_ks{1, 2, 4, 8};
  bool eval_normalize = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--dataset", eval_data, "dataset file (csv or binary)")
      ->required();
  eval_cmd->add_option("--format", eval_format, "csv|binary|auto (by extension)");
  eval_cmd->add_option("--k", eval_ks, "K values for Recall@K");
  eval_cmd->add_flag("--normalize", eval_normalize,
                     "l2-normalize embeddings before evaluation");

  CLI::App* grad_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::uint64_t grad_seed = 7;
  std::size_t grad_trials = 100;
  std::string corrupt_op;
  grad_cmd->add_option("--seed", grad_seed, "instance seed");
  grad_cmd->add_option("--trials", grad_trials, "instances per op")
      ->check(CLI::PositiveNumber);
  grad_cmd->add_option("--corrupt-op", corrupt_op,
                       "test hook: corrupt this op's analytic gradient");

  CLI11_PARSE(app, argc, argv);

  if (train_cmd->parsed()) {
    return guarded([&] {
      auto cfg = load_with_overrides(train_opts);
      auto path = exf::run_train_source(cfg);
      std::cout << "source checkpoint written: " << path.string() << "\n";
      return kExitOk;
    });
  }

  if (transfer_cmd->parsed()) {
    return guarded([&] {
      auto cfg = load_with_overrides(transfer_opts);
      auto report = exf::run_transfer(cfg);
      std::cout << report.dump(2) << "\n";
      return kExitOk;
    });
  }

  if (eval_cmd->parsed()) {
    return guarded([&] {
      exf::FileFormat fmt;
      if (eval_format == "csv")
        fmt = exf::FileFormat::csv;
      else if (eval_format == "binary")
        fmt = exf::FileFormat::binary;
      else if (eval_format == "auto")
        fmt = eval_data.ends_with(".csv") ? exf::FileFormat::csv
                                          : exf::FileFormat::binary;
      else
        throw exf::ConfigError("--format must be csv, binary, or auto");
      auto report = exf::run_eval(eval_ckpt, eval_data, fmt, eval_ks, eval_normalize);
      std::cout << report.dump(2) << "\n";
      return kExitOk;
    });
  }

  // gradcheck
  return guarded([&] {
    auto report = exf::run_gradcheck(grad_seed, grad_trials, corrupt_op);
    for (const auto& [op, err] : report.max_rel_err)
      std::cout << op << ": max rel err " << err << "\n";
    if (!report.ok) {
      std::cerr << "gradient check FAILED for op '" << report.failed_op
                << "' (instance seed " << report.failed_instance_seed << ")\n";
      return kExitVerification;
    }
    std::cout << "all gradient checks passed (" << grad_trials << " instances per op)\n";
    return kExitOk;
  });
}
