#include "exf/transfer.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "exf/util.hpp"

namespace exf {

TransferMode transfer_mode_from_string(const std::string& s) {
  if (s == "self") return TransferMode::self_transfer;
  if (s == "dim_reduction") return TransferMode::dim_reduction;
  if (s == "compression") return TransferMode::compression;
  if (s == "classifier_distill") return TransferMode::classifier_distill;
  throw ConfigError("unknown transfer mode: '" + s + "'");
}

TransferLoss transfer_loss_from_string(const std::string& s) {
  if (s == "relaxed_contrastive") return TransferLoss::relaxed_contrastive;
  if (s == "relaxed_contrastive_abs") return TransferLoss::relaxed_contrastive_abs;
  if (s == "relaxed_ms") return TransferLoss::relaxed_ms;
  if (s == "unrelaxed_relative") return TransferLoss::unrelaxed_relative;
  throw ConfigError("unknown transfer loss: '" + s + "'");
}

std::string to_string(TransferMode mode) {
  switch (mode) {
    case TransferMode::self_transfer: return "self";
    case TransferMode::dim_reduction: return "dim_reduction";
    case TransferMode::compression: return "compression";
    case TransferMode::classifier_distill: return "classifier_distill";
  }
  return "?";
}

std::string to_string(TransferLoss loss) {
  switch (loss) {
    case TransferLoss::relaxed_contrastive: return "relaxed_contrastive";
    case TransferLoss::relaxed_contrastive_abs: return "relaxed_contrastive_abs";
    case TransferLoss::relaxed_ms: return "relaxed_ms";
    case TransferLoss::unrelaxed_relative: return "unrelaxed_relative";
  }
  return "?";
}

void TransferConfig::validate() const {
  loss_cfg.validate();
  augment.validate();
  if (source_dims.size() < 2 || target_dims.size() < 2)
    throw ConfigError("TransferConfig: dims need at least input and output");
  if (source_dims.front() != target_dims.front())
    throw ConfigError("TransferConfig: source and target input dims differ");
  if (batch_size < 3) throw ConfigError("TransferConfig: batch_size must be >= 3");
  if (optim.lr <= 0.0) throw ConfigError("TransferConfig: lr must be > 0");
  if (lambda_hkd < 0.0 || lambda_rc < 0.0)
    throw ConfigError("TransferConfig: loss weights must be >= 0");

  switch (mode) {
    case TransferMode::self_transfer:
      if (target_dims != source_dims)
        throw ConfigError(
            "TransferConfig: self mode requires identical source/target dims");
      break;
    case TransferMode::dim_reduction:
      if (target_dims.back() > source_dims.back())
        throw ConfigError(
            "TransferConfig: dim_reduction requires target output dim <= source");
      break;
    case TransferMode::compression:
      if (mlp_param_count(target_dims) >= mlp_param_count(source_dims))
        throw ConfigError(
            "TransferConfig: compression requires fewer target parameters (" +
            std::to_string(mlp_param_count(target_dims)) + " vs " +
            std::to_string(mlp_param_count(source_dims)) + ")");
      break;
    case TransferMode::classifier_distill:
      break;
  }
}

namespace {

double finite_or_throw(double loss, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw Error("training diverged: non-finite loss at epoch " +
                std::to_string(epoch) + ", batch " + std::to_string(batch));
  return loss;
}

struct EpochClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

}  // namespace

MlpModel train_source(const Dataset& train, const SourceTrainSettings& settings,
                      TrainLog* log) {
  train.validate();
  MlpModel model = mlp_init(settings.dims, sub_seed(settings.seed, SeedStream::source_init));
  if (settings.epochs == 0) return model;

  Schedule schedule{settings.optim.warmup_epochs, settings.epochs, settings.optim.lr,
                    settings.optim.min_lr};
  schedule.validate();
  AdamWConfig acfg;
  acfg.weight_decay = settings.optim.weight_decay;
  acfg.base_lr = settings.optim.lr;
  AdamWState opt = adamw_init(model.param_count(), acfg);

  AugmentConfig no_aug;
  no_aug.views = 1;
  auto rng = make_rng(settings.seed, SeedStream::source_batches);

  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    EpochClock clock;
    double lr = lr_at(schedule, static_cast<double>(epoch));
    auto batches = make_batches(train, settings.batch_size, rng, no_aug);
    Accumulator epoch_loss;
    std::size_t bi = 0;
    for (const Batch& batch : batches) {
      Matrix inputs = concat_views(batch);
      ForwardTrace trace;
      Matrix raw = mlp_forward(model, inputs, trace);
      Matrix normalized = l2_normalize_rows(raw);
      Matrix y = class_equivalence(batch.labels);
      LossResult loss = contrastive(normalized, y, settings.delta);
      finite_or_throw(loss.value, epoch, bi);
      epoch_loss.add(loss.value);
      Matrix grad_raw = l2_normalize_rows_vjp(raw, normalized, loss.grad);
      MlpGradients grads = mlp_backward(model, trace, grad_raw);
      adamw_step(model.params, grads.params, opt, lr);
      ++bi;
    }
    if (log) {
      EpochRecord rec;
      rec.epoch = epoch;
      rec.mean_loss = batches.empty() ? 0.0
                                      : epoch_loss.total() /
                                            static_cast<double>(batches.size());
      rec.lr = lr;
      if (!settings.deterministic) {
        rec.wall_seconds = clock.seconds();
        rec.has_wall_time = true;
      }
      log->records.push_back(rec);
    }
  }
  return model;
}

MlpModel train_classifier(const Dataset& train, const std::vector<std::size_t>& dims,
                          const SourceTrainSettings& settings, TrainLog* log) {
  train.validate();
  if (dims.back() != train.class_count)
    throw ConfigError("train_classifier: head dim " + std::to_string(dims.back()) +
                      " does not match class count " +
                      std::to_string(train.class_count));
  MlpModel model = mlp_init(dims, sub_seed(settings.seed, SeedStream::source_init));
  if (settings.epochs == 0) return model;

  Schedule schedule{settings.optim.warmup_epochs, settings.epochs, settings.optim.lr,
                    settings.optim.min_lr};
  schedule.validate();
  AdamWConfig acfg;
  acfg.weight_decay = settings.optim.weight_decay;
  acfg.base_lr = settings.optim.lr;
  AdamWState opt = adamw_init(model.param_count(), acfg);

  AugmentConfig no_aug;
  no_aug.views = 1;
  auto rng = make_rng(settings.seed, SeedStream::source_batches);

  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    EpochClock clock;
    double lr = lr_at(schedule, static_cast<double>(epoch));
    auto batches = make_batches(train, settings.batch_size, rng, no_aug);
    Accumulator epoch_loss;
    std::size_t bi = 0;
    for (const Batch& batch : batches) {
      Matrix inputs = concat_views(batch);
      ForwardTrace trace;
      Matrix logits = mlp_forward(model, inputs, trace);
      LossResult loss = cross_entropy(logits, batch.labels);
      finite_or_throw(loss.value, epoch, bi);
      epoch_loss.add(loss.value);
      MlpGradients grads = mlp_backward(model, trace, loss.grad);
      adamw_step(model.params, grads.params, opt, lr);
      ++bi;
    }
    if (log) {
      EpochRecord rec;
      rec.epoch = epoch;
      rec.mean_loss = batches.empty() ? 0.0
                                      : epoch_loss.total() /
                                            static_cast<double>(batches.size());
      rec.lr = lr;
      if (!settings.deterministic) {
        rec.wall_seconds = clock.seconds();
        rec.has_wall_time = true;
      }
      log->records.push_back(rec);
    }
  }
  return model;
}

KnowledgeBatch extract_knowledge(const MlpModel& source, const Batch& batch,
                                 double sigma) {
  Matrix inputs = concat_views(batch);
  if (inputs.cols != source.input_dim())
    throw InvalidInput("extract_knowledge: feature dim does not match source input");
  Matrix embeddings = mlp_forward(source, inputs);
  Matrix normalized = l2_normalize_rows(embeddings);
  DistanceMatrix d = pairwise_distances(normalized);
  return KnowledgeBatch{gaussian_weights(d, sigma)};
}

namespace {

LossResult target_loss(const TransferConfig& cfg, const Matrix& embeddings,
                       const WeightMatrix& w, const std::vector<std::size_t>& labels,
                       Matrix* raw_grad_out) {
  switch (cfg.loss) {
    case TransferLoss::relaxed_contrastive: {
      LossResult r = relaxed_contrastive(embeddings, w, cfg.loss_cfg.delta);
      *raw_grad_out = r.grad;
      return r;
    }
    case TransferLoss::relaxed_ms: {
      LossResult r = relaxed_ms(embeddings, w, cfg.loss_cfg);
      *raw_grad_out = r.grad;
      return r;
    }
    case TransferLoss::unrelaxed_relative: {
      LossResult r = unrelaxed_relative(embeddings, class_equivalence(labels),
                                        cfg.loss_cfg.delta);
      *raw_grad_out = r.grad;
      return r;
    }
    case TransferLoss::relaxed_contrastive_abs: {
      // The absolute form keeps the margin meaningful by operating on
      // l2-normalized target embeddings; the chain rule through the
      // normalization is applied here.
      Matrix normalized = l2_normalize_rows(embeddings);
      LossResult r = relaxed_contrastive_abs(normalized, w, cfg.loss_cfg.delta);
      *raw_grad_out = l2_normalize_rows_vjp(embeddings, normalized, r.grad);
      return r;
    }
  }
  throw ConfigError("target_loss: unhandled loss");
}

}  // namespace

std::pair<MlpModel, TrainLog> train_target(const MlpModel& source,
                                           const Dataset& train,
                                           const TransferConfig& cfg,
                                           bool deterministic) {
  cfg.validate();
  train.validate();
  if (cfg.mode == TransferMode::classifier_distill)
    throw ConfigError("train_target: classifier_distill runs via distill_classifier");
  if (source.layer_dims != cfg.source_dims)
    throw ConfigError("train_target: source checkpoint dims do not match config");
  if (source.input_dim() != train.dim())
    throw ConfigError("train_target: dataset dim does not match source input");

  MlpModel target = mlp_init(cfg.target_dims, sub_seed(cfg.seed, SeedStream::target_init));
  TrainLog log;
  if (cfg.epochs == 0) return {target, log};

  Schedule schedule{cfg.optim.warmup_epochs, cfg.epochs, cfg.optim.lr, cfg.optim.min_lr};
  schedule.validate();
  AdamWConfig acfg;
  acfg.weight_decay = cfg.optim.weight_decay;
  acfg.base_lr = cfg.optim.lr;
  AdamWState opt = adamw_init(target.param_count(), acfg);

  auto rng = make_rng(cfg.seed, SeedStream::target_batches);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochClock clock;
    double lr = lr_at(schedule, static_cast<double>(epoch));
    auto batches = make_batches(train, cfg.batch_size, rng, cfg.augment);
    Accumulator epoch_loss;
    std::size_t bi = 0;
    for (const Batch& batch : batches) {
      try {
        KnowledgeBatch knowledge = extract_knowledge(source, batch, cfg.loss_cfg.sigma);
        Matrix inputs = concat_views(batch);
        ForwardTrace trace;
        Matrix embeddings = mlp_forward(target, inputs, trace);
        Matrix grad_embeddings;
        LossResult loss = target_loss(cfg, embeddings, knowledge.w,
                                      tiled_labels(batch), &grad_embeddings);
        finite_or_throw(loss.value, epoch, bi);
        epoch_loss.add(loss.value);
        MlpGradients grads = mlp_backward(target, trace, grad_embeddings);
        adamw_step(target.params, grads.params, opt, lr);
      } catch (const Error& e) {
        throw Error("epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(bi) + ": " + e.what());
      }
      ++bi;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss =
        batches.empty() ? 0.0 : epoch_loss.total() / static_cast<double>(batches.size());
    rec.lr = lr;
    if (!deterministic) {
      rec.wall_seconds = clock.seconds();
      rec.has_wall_time = true;
    }
    log.records.push_back(rec);
  }
  return {target, log};
}

double composite_distill_loss(const MlpModel& teacher, const MlpModel& student,
                              const Matrix& inputs,
                              const std::vector<std::size_t>& labels,
                              const TransferConfig& cfg) {
  ForwardTrace teacher_trace, student_trace;
  Matrix teacher_logits = mlp_forward(teacher, inputs, teacher_trace);
  Matrix student_logits = mlp_forward(student, inputs, student_trace);

  double total = cross_entropy(student_logits, labels).value;
  if (cfg.lambda_hkd > 0.0)
    total += cfg.lambda_hkd *
             hkd_kl(student_logits, teacher_logits, cfg.loss_cfg.temperature).value;
  if (cfg.lambda_rc > 0.0) {
    Matrix teacher_feat = l2_normalize_rows(penultimate_activations(teacher_trace));
    WeightMatrix w =
        gaussian_weights(pairwise_distances(teacher_feat), cfg.loss_cfg.sigma);
    total += cfg.lambda_rc *
             relaxed_contrastive(penultimate_activations(student_trace), w,
                                 cfg.loss_cfg.delta)
                 .value;
  }
  return total;
}

std::pair<MlpModel, TrainLog> distill_classifier(const MlpModel& source_cls,
                                                 const Dataset& train,
                                                 const TransferConfig& cfg,
                                                 bool deterministic) {
  cfg.validate();
  train.validate();
  if (cfg.mode != TransferMode::classifier_distill)
    throw ConfigError("distill_classifier: mode must be classifier_distill");
  if (source_cls.output_dim() != train.class_count)
    throw ConfigError("distill_classifier: teacher head does not match class count");
  if (cfg.target_dims.back() != train.class_count)
    throw ConfigError("distill_classifier: student head does not match class count");
  if (cfg.target_dims.size() < 3)
    throw ConfigError("distill_classifier: student needs a hidden layer for features");

  MlpModel student = mlp_init(cfg.target_dims, sub_seed(cfg.seed, SeedStream::target_init));
  TrainLog log;
  if (cfg.epochs == 0) return {student, log};

  Schedule schedule{cfg.optim.warmup_epochs, cfg.epochs, cfg.optim.lr, cfg.optim.min_lr};
  schedule.validate();
  AdamWConfig acfg;
  acfg.weight_decay = cfg.optim.weight_decay;
  acfg.base_lr = cfg.optim.lr;
  AdamWState opt = adamw_init(student.param_count(), acfg);

  auto rng = make_rng(cfg.seed, SeedStream::target_batches);
  const std::size_t penult_layer = student.layer_count() - 2;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochClock clock;
    double lr = lr_at(schedule, static_cast<double>(epoch));
    auto batches = make_batches(train, cfg.batch_size, rng, cfg.augment);
    Accumulator epoch_loss;
    std::size_t bi = 0;
    for (const Batch& batch : batches) {
      try {
        Matrix inputs = concat_views(batch);
        std::vector<std::size_t> labels = tiled_labels(batch);

        ForwardTrace teacher_trace;
        Matrix teacher_logits = mlp_forward(source_cls, inputs, teacher_trace);

        ForwardTrace trace;
        Matrix logits = mlp_forward(student, inputs, trace);

        LossResult ce = cross_entropy(logits, labels);
        double value = ce.value;
        Matrix grad_logits = ce.grad;
        if (cfg.lambda_hkd > 0.0) {
          LossResult hkd = hkd_kl(logits, teacher_logits, cfg.loss_cfg.temperature);
          value += cfg.lambda_hkd * hkd.value;
          for (std::size_t k = 0; k < grad_logits.data.size(); ++k)
            grad_logits.data[k] += cfg.lambda_hkd * hkd.grad.data[k];
        }

        MlpGradients grads;
        if (cfg.lambda_rc > 0.0) {
          Matrix teacher_feat =
              l2_normalize_rows(penultimate_activations(teacher_trace));
          WeightMatrix w =
              gaussian_weights(pairwise_distances(teacher_feat), cfg.loss_cfg.sigma);
          LossResult rc = relaxed_contrastive(penultimate_activations(trace), w,
                                              cfg.loss_cfg.delta);
          value += cfg.lambda_rc * rc.value;
          grads = mlp_backward(student, trace, grad_logits, penult_layer,
                               scaled(rc.grad, cfg.lambda_rc));
        } else {
          grads = mlp_backward(student, trace, grad_logits);
        }

        finite_or_throw(value, epoch, bi);
        epoch_loss.add(value);
        adamw_step(student.params, grads.params, opt, lr);
      } catch (const Error& e) {
        throw Error("epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(bi) + ": " + e.what());
      }
      ++bi;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss =
        batches.empty() ? 0.0 : epoch_loss.total() / static_cast<double>(batches.size());
    rec.lr = lr;
    if (!deterministic) {
      rec.wall_seconds = clock.seconds();
      rec.has_wall_time = true;
    }
    log.records.push_back(rec);
  }
  return {student, log};
}

double classification_accuracy(const MlpModel& cls, const Dataset& ds) {
  ds.validate();
  Matrix logits = mlp_forward(cls, ds.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.cols; ++k)
      if (logits(i, k) > logits(i, best)) best = k;
    if (best == ds.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace exf
