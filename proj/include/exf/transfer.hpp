#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "exf/data.hpp"
#include "exf/losses.hpp"
#include "exf/model.hpp"
#include "exf/numcore.hpp"
#include "exf/optim.hpp"

namespace exf {

enum class TransferMode { self_transfer, dim_reduction, compression, classifier_distill };
enum class TransferLoss {
  relaxed_contrastive,
  relaxed_contrastive_abs,
  relaxed_ms,
  unrelaxed_relative,
};

TransferMode transfer_mode_from_string(const std::string& s);
TransferLoss transfer_loss_from_string(const std::string& s);
std::string to_string(TransferMode mode);
std::string to_string(TransferLoss loss);

struct OptimizerSettings {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double min_lr = 0.0;
  std::size_t warmup_epochs = 0;
};

struct TransferConfig {
  TransferMode mode = TransferMode::self_transfer;
  TransferLoss loss = TransferLoss::relaxed_contrastive;
  LossConfig loss_cfg;
  std::vector<std::size_t> source_dims;
  std::vector<std::size_t> target_dims;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerSettings optim;
  AugmentConfig augment;
  // classifier distillation only
  double lambda_hkd = 1.0;
  double lambda_rc = 1.0;

  // Enforces the per-regime architecture contracts: identical dims for
  // self-transfer, reduced output dim for dim_reduction, strictly fewer
  // parameters for compression.
  void validate() const;
};

// Per-batch relaxed relation labels from the frozen source: Gaussian-kernel
// weights over l2-normalized source embeddings.
struct KnowledgeBatch {
  WeightMatrix w;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
  bool has_wall_time = false;  // wall time is recorded only outside deterministic mode
};

struct TrainLog {
  std::vector<EpochRecord> records;
};

struct SourceTrainSettings {
  std::vector<std::size_t> dims;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  double delta = 1.0;
  OptimizerSettings optim;
  std::uint64_t seed = 0;
  bool deterministic = true;
};

// Trains an embedding model with the binary contrastive loss on
// l2-normalized embeddings (gradients flow through the normalization).
MlpModel train_source(const Dataset& train, const SourceTrainSettings& settings,
                      TrainLog* log = nullptr);

// Trains a classifier (MLP with a class-count output head) with plain
// cross-entropy; the teacher for classifier distillation.
MlpModel train_classifier(const Dataset& train, const std::vector<std::size_t>& dims,
                          const SourceTrainSettings& settings, TrainLog* log = nullptr);

KnowledgeBatch extract_knowledge(const MlpModel& source, const Batch& batch,
                                 double sigma);

// The transfer engine: per batch, build the multi-view inputs, extract
// knowledge from the frozen source, evaluate the configured loss on the
// raw target embeddings, backprop, AdamW step under the cosine schedule.
std::pair<MlpModel, TrainLog> train_target(const MlpModel& source,
                                           const Dataset& train,
                                           const TransferConfig& cfg,
                                           bool deterministic = true);

// Composite distillation: cross-entropy + lambda_hkd * HKD +
// lambda_rc * relaxed contrastive on penultimate features, with knowledge
// extracted from the teacher's l2-normalized penultimate features.
std::pair<MlpModel, TrainLog> distill_classifier(const MlpModel& source_cls,
                                                 const Dataset& train,
                                                 const TransferConfig& cfg,
                                                 bool deterministic = true);

// One evaluation of the composite distillation objective (no update);
// exposed so the loss coupling is testable in isolation.
double composite_distill_loss(const MlpModel& teacher, const MlpModel& student,
                              const Matrix& inputs,
                              const std::vector<std::size_t>& labels,
                              const TransferConfig& cfg);

double classification_accuracy(const MlpModel& cls, const Dataset& ds);

}  // namespace exf
