#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "exf/data.hpp"
#include "exf/transfer.hpp"

#include "json.hpp"

namespace exf {

// Where a run's dataset comes from: generated clusters or a feature file.
struct DatasetSpec {
  bool generate = true;
  // generate
  std::size_t classes = 8, per_class = 32, dim = 16;
  double separation = 4.0, noise = 0.25;
  // load
  std::filesystem::path path;
  FileFormat format = FileFormat::csv;
  // split
  std::string split_kind = "class";  // class | sample
  double train_fraction = 0.5;
};

struct SourceSpec {
  std::vector<std::size_t> dims;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double delta = 1.0;
  OptimizerSettings optim;
  std::optional<std::filesystem::path> checkpoint;  // load instead of out_dir default
};

struct EvalSpec {
  std::vector<std::size_t> k_values{1, 2, 4, 8};
  std::size_t pair_ranking_top = 5;
};

// A fully validated experiment file. Unknown keys anywhere are rejected
// before any work starts; see configs/config.schema.json for the shape.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  bool deterministic = true;
  DatasetSpec dataset;
  std::optional<SourceSpec> source;
  std::optional<TransferConfig> transfer;
  std::vector<double> sigma_sweep;
  std::vector<double> delta_sweep;
  EvalSpec eval;
  std::filesystem::path out_dir;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct PreparedData {
  Dataset full;
  Dataset train;
  Dataset test;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

// Artifact paths inside the configured output directory.
std::filesystem::path source_checkpoint_path(const ExperimentConfig& cfg);
std::filesystem::path target_checkpoint_path(const ExperimentConfig& cfg,
                                             std::size_t run_index);

// Trains the source model (metric embedding, or classifier when the
// transfer mode is classifier_distill), writes checkpoint + JSONL log and
// returns the checkpoint path.
std::filesystem::path run_train_source(const ExperimentConfig& cfg);

// Runs the transfer (one run per sweep point, a single run otherwise),
// writes target checkpoints, logs, and the final report JSON; returns the
// report.
nlohmann::json run_transfer(const ExperimentConfig& cfg);

// Loads a checkpoint and a dataset file and returns retrieval + spectral
// reports as JSON.
nlohmann::json run_eval(const std::filesystem::path& checkpoint,
                        const std::filesystem::path& dataset, FileFormat format,
                        const std::vector<std::size_t>& k_values, bool normalize);

struct GradcheckReport {
  // op name -> max relative error over all trials
  std::map<std::string, double> max_rel_err;
  std::string failed_op;  // empty when all ops pass
  std::uint64_t failed_instance_seed = 0;
  bool ok = true;
};

// Finite-difference verification of every loss gradient and the MLP
// backward pass. `corrupt_op` perturbs that op's analytic gradient to
// exercise the failure path.
GradcheckReport run_gradcheck(std::uint64_t seed, std::size_t trials,
                              const std::string& corrupt_op = "");

}  // namespace exf
