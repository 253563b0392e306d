#include "exf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "exf/checkpoint.hpp"
#include "exf/eval.hpp"
#include "exf/util.hpp"

namespace exf {

namespace {

// Strict accessor over one JSON object: every key must be consumed, and
// type errors carry the config path.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(path_ + ": missing required key '" + key + "'");
    used_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return get<T>(key);
  }

  const nlohmann::json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key()))
        throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> used_;
};

DatasetSpec parse_dataset(const nlohmann::json& j) {
  Section s(j, "dataset");
  DatasetSpec spec;
  if (s.has("generate") == s.has("load"))
    throw ConfigError("dataset: exactly one of 'generate' or 'load' is required");
  if (s.has("generate")) {
    Section g(s.raw("generate"), "dataset.generate");
    spec.generate = true;
    spec.classes = g.get<std::size_t>("classes");
    spec.per_class = g.get<std::size_t>("per_class");
    spec.dim = g.get<std::size_t>("dim");
    spec.separation = g.get<double>("separation");
    spec.noise = g.get<double>("noise");
    g.finish();
  } else {
    Section l(s.raw("load"), "dataset.load");
    spec.generate = false;
    spec.path = l.get<std::string>("path");
    std::string fmt = l.get_or<std::string>("format", "csv");
    if (fmt == "csv")
      spec.format = FileFormat::csv;
    else if (fmt == "binary")
      spec.format = FileFormat::binary;
    else
      throw ConfigError("dataset.load.format: expected 'csv' or 'binary'");
    l.finish();
  }
  if (s.has("split")) {
    Section sp(s.raw("split"), "dataset.split");
    spec.split_kind = sp.get_or<std::string>("kind", "class");
    if (spec.split_kind != "class" && spec.split_kind != "sample")
      throw ConfigError("dataset.split.kind: expected 'class' or 'sample'");
    spec.train_fraction = sp.get_or<double>("train_fraction", 0.5);
    sp.finish();
  }
  s.finish();
  return spec;
}

OptimizerSettings parse_optim(Section& s) {
  OptimizerSettings o;
  o.lr = s.get_or<double>("lr", 1e-4);
  o.weight_decay = s.get_or<double>("weight_decay", 1e-4);
  o.warmup_epochs = s.get_or<std::size_t>("warmup_epochs", 0);
  o.min_lr = s.get_or<double>("min_lr", 0.0);
  return o;
}

SourceSpec parse_source(const nlohmann::json& j) {
  Section s(j, "source");
  SourceSpec spec;
  spec.dims = s.get<std::vector<std::size_t>>("dims");
  spec.epochs = s.get<std::size_t>("epochs");
  spec.batch_size = s.get_or<std::size_t>("batch_size", 32);
  spec.delta = s.get_or<double>("delta", 1.0);
  spec.optim = parse_optim(s);
  if (s.has("checkpoint"))
    spec.checkpoint = std::filesystem::path(s.get<std::string>("checkpoint"));
  s.finish();
  return spec;
}

TransferConfig parse_transfer(const nlohmann::json& j, std::vector<double>& sigma_sweep,
                              std::vector<double>& delta_sweep) {
  Section s(j, "transfer");
  TransferConfig cfg;
  cfg.mode = transfer_mode_from_string(s.get<std::string>("mode"));
  cfg.loss = transfer_loss_from_string(s.get_or<std::string>("loss", "relaxed_contrastive"));
  cfg.target_dims = s.get<std::vector<std::size_t>>("target_dims");
  cfg.epochs = s.get<std::size_t>("epochs");
  cfg.batch_size = s.get_or<std::size_t>("batch_size", 32);
  cfg.optim = parse_optim(s);
  cfg.loss_cfg.delta = s.get_or<double>("delta", 1.0);
  cfg.loss_cfg.sigma = s.get_or<double>("sigma", 1.0);
  cfg.loss_cfg.alpha = s.get_or<double>("alpha", 1.0);
  cfg.loss_cfg.beta = s.get_or<double>("beta", 4.0);
  cfg.loss_cfg.temperature = s.get_or<double>("temperature", 4.0);
  cfg.lambda_hkd = s.get_or<double>("lambda_hkd", 1.0);
  cfg.lambda_rc = s.get_or<double>("lambda_rc", 1.0);
  cfg.augment.views = s.get_or<std::size_t>("views", 2);
  cfg.augment.noise_std = s.get_or<double>("noise_std", 0.0);
  cfg.augment.feature_dropout = s.get_or<double>("feature_dropout", 0.0);
  sigma_sweep = s.get_or<std::vector<double>>("sigma_sweep", {});
  delta_sweep = s.get_or<std::vector<double>>("delta_sweep", {});
  s.finish();
  return cfg;
}

EvalSpec parse_eval(const nlohmann::json& j) {
  Section s(j, "eval");
  EvalSpec spec;
  spec.k_values = s.get_or<std::vector<std::size_t>>("k_values", {1, 2, 4, 8});
  spec.pair_ranking_top = s.get_or<std::size_t>("pair_ranking_top", 5);
  s.finish();
  if (spec.k_values.empty()) throw ConfigError("eval.k_values: must not be empty");
  return spec;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  Section s(j, "config");
  ExperimentConfig cfg;
  cfg.seed = s.get<std::uint64_t>("seed");
  cfg.deterministic = s.get_or<bool>("deterministic", true);
  cfg.dataset = parse_dataset(s.raw("dataset"));
  if (s.has("source")) cfg.source = parse_source(s.raw("source"));
  if (s.has("transfer"))
    cfg.transfer = parse_transfer(s.raw("transfer"), cfg.sigma_sweep, cfg.delta_sweep);
  if (s.has("eval")) cfg.eval = parse_eval(s.raw("eval"));
  Section out(s.raw("output"), "output");
  cfg.out_dir = out.get<std::string>("dir");
  out.finish();
  s.finish();

  if (cfg.transfer) {
    if (!cfg.source) throw ConfigError("transfer requires a source section");
    cfg.transfer->source_dims = cfg.source->dims;
    cfg.transfer->seed = cfg.seed;
    cfg.transfer->validate();
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": invalid JSON: " + e.what());
  }
  return from_json(j);
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData data;
  if (cfg.dataset.generate) {
    data.full = generate_clusters(cfg.dataset.classes, cfg.dataset.per_class,
                                  cfg.dataset.dim, cfg.dataset.separation,
                                  cfg.dataset.noise, sub_seed(cfg.seed, SeedStream::dataset));
  } else {
    if (!std::filesystem::exists(cfg.dataset.path))
      throw ConfigError("dataset file not found: " + cfg.dataset.path.string());
    data.full = load_dataset(cfg.dataset.path, cfg.dataset.format);
  }
  auto split_seed = sub_seed(cfg.seed, SeedStream::split);
  if (cfg.dataset.split_kind == "class") {
    auto [train, test] = split_by_class(data.full, cfg.dataset.train_fraction, split_seed);
    data.train = std::move(train);
    data.test = std::move(test);
  } else {
    auto [train, test] = split_by_sample(data.full, cfg.dataset.train_fraction, split_seed);
    data.train = std::move(train);
    data.test = std::move(test);
  }
  return data;
}

std::filesystem::path source_checkpoint_path(const ExperimentConfig& cfg) {
  if (cfg.source && cfg.source->checkpoint) return *cfg.source->checkpoint;
  return cfg.out_dir / "source.ckpt";
}

std::filesystem::path target_checkpoint_path(const ExperimentConfig& cfg,
                                             std::size_t run_index) {
  if (cfg.sigma_sweep.empty() && cfg.delta_sweep.empty())
    return cfg.out_dir / "target.ckpt";
  return cfg.out_dir / ("target_run" + std::to_string(run_index) + ".ckpt");
}

namespace {

bool is_distill(const ExperimentConfig& cfg) {
  return cfg.transfer && cfg.transfer->mode == TransferMode::classifier_distill;
}

SourceTrainSettings source_settings(const ExperimentConfig& cfg) {
  SourceTrainSettings st;
  st.dims = cfg.source->dims;
  st.epochs = cfg.source->epochs;
  st.batch_size = cfg.source->batch_size;
  st.delta = cfg.source->delta;
  st.optim = cfg.source->optim;
  st.seed = cfg.seed;
  st.deterministic = cfg.deterministic;
  return st;
}

nlohmann::json retrieval_json(const Matrix& embeddings,
                              const std::vector<std::size_t>& labels,
                              const std::vector<std::size_t>& ks) {
  // Drop K values that are not meaningful for this split size.
  std::vector<std::size_t> usable;
  for (std::size_t k : ks)
    if (k < embeddings.rows) usable.push_back(k);
  if (usable.empty())
    throw ConfigError("eval.k_values: no K < n = " + std::to_string(embeddings.rows));
  return recall_at_k(embeddings, labels, usable).to_json();
}

nlohmann::json eval_model_json(const MlpModel& model, const PreparedData& data,
                               const std::vector<std::size_t>& ks, bool normalize) {
  Matrix train_emb = mlp_forward(model, data.train.features);
  Matrix test_emb = mlp_forward(model, data.test.features);
  if (normalize) {
    train_emb = l2_normalize_rows(train_emb);
    test_emb = l2_normalize_rows(test_emb);
  }
  nlohmann::json j;
  j["train"] = retrieval_json(train_emb, data.train.labels, ks);
  j["test"] = retrieval_json(test_emb, data.test.labels, ks);
  j["rho_train"] = spectral_decay(train_emb).rho;
  return j;
}

}  // namespace

std::filesystem::path run_train_source(const ExperimentConfig& cfg) {
  if (!cfg.source) throw ConfigError("train-source requires a source section");
  PreparedData data = prepare_data(cfg);
  std::filesystem::create_directories(cfg.out_dir);

  TrainLog log;
  MlpModel model;
  nlohmann::json meta;
  meta["seed"] = cfg.seed;
  meta["epochs"] = cfg.source->epochs;
  if (is_distill(cfg)) {
    if (cfg.source->dims.back() != data.train.class_count)
      throw ConfigError("source.dims must end with the class count (" +
                        std::to_string(data.train.class_count) + ") for distillation");
    model = train_classifier(data.train, cfg.source->dims, source_settings(cfg), &log);
    meta["kind"] = "classifier";
    meta["objective"] = "cross_entropy";
  } else {
    model = train_source(data.train, source_settings(cfg), &log);
    meta["kind"] = "embedding";
    meta["objective"] = "contrastive";
  }

  std::filesystem::path ckpt = cfg.out_dir / "source.ckpt";
  save_checkpoint(ckpt, model, meta);
  save_train_log(cfg.out_dir / "source_train.jsonl", log);
  return ckpt;
}

nlohmann::json run_transfer(const ExperimentConfig& cfg) {
  if (!cfg.transfer) throw ConfigError("transfer requires a transfer section");
  PreparedData data = prepare_data(cfg);

  std::filesystem::path source_path = source_checkpoint_path(cfg);
  if (!std::filesystem::exists(source_path))
    throw ConfigError("source checkpoint not found: " + source_path.string() +
                      " (run train-source first)");
  auto [source, source_meta] = load_checkpoint(source_path);
  if (source.layer_dims != cfg.source->dims)
    throw ConfigError("source checkpoint dims do not match config source.dims");

  std::filesystem::create_directories(cfg.out_dir);

  // Sweep points: the cross product of the sigma and delta lists, or the
  // single configured (sigma, delta) when neither list is present.
  std::vector<std::pair<double, double>> points;
  std::vector<double> sigmas = cfg.sigma_sweep.empty()
                                   ? std::vector<double>{cfg.transfer->loss_cfg.sigma}
                                   : cfg.sigma_sweep;
  std::vector<double> deltas = cfg.delta_sweep.empty()
                                   ? std::vector<double>{cfg.transfer->loss_cfg.delta}
                                   : cfg.delta_sweep;
  for (double sg : sigmas)
    for (double dl : deltas) points.emplace_back(sg, dl);

  nlohmann::json report;
  report["mode"] = to_string(cfg.transfer->mode);
  report["loss"] = to_string(cfg.transfer->loss);
  report["seed"] = cfg.seed;
  report["runs"] = nlohmann::json::array();

  for (std::size_t run = 0; run < points.size(); ++run) {
    TransferConfig tcfg = *cfg.transfer;
    tcfg.loss_cfg.sigma = points[run].first;
    tcfg.loss_cfg.delta = points[run].second;

    nlohmann::json entry;
    entry["sigma"] = tcfg.loss_cfg.sigma;
    entry["delta"] = tcfg.loss_cfg.delta;

    MlpModel target;
    TrainLog log;
    if (tcfg.mode == TransferMode::classifier_distill) {
      auto [model, tl] = distill_classifier(source, data.train, tcfg, cfg.deterministic);
      target = std::move(model);
      log = std::move(tl);
      entry["teacher_accuracy"] = {{"train", classification_accuracy(source, data.train)},
                                   {"test", classification_accuracy(source, data.test)}};
      entry["student_accuracy"] = {{"train", classification_accuracy(target, data.train)},
                                   {"test", classification_accuracy(target, data.test)}};
    } else {
      auto [model, tl] = train_target(source, data.train, tcfg, cfg.deterministic);
      target = std::move(model);
      log = std::move(tl);
      entry["source"] = eval_model_json(source, data, cfg.eval.k_values, true);
      entry["target"] = eval_model_json(target, data, cfg.eval.k_values, false);

      // Pair-weight ranking of the source knowledge over the train split.
      Matrix source_emb =
          l2_normalize_rows(mlp_forward(source, data.train.features));
      WeightMatrix w =
          gaussian_weights(pairwise_distances(source_emb), tcfg.loss_cfg.sigma);
      std::size_t top = std::min(cfg.eval.pair_ranking_top,
                                 w.n * (w.n - 1) / 2);
      entry["pair_ranking"] = rank_pairs_by_weight(w, data.train.labels, top).to_json();
    }
    if (!log.records.empty()) entry["final_train_loss"] = log.records.back().mean_loss;

    std::filesystem::path tpath = target_checkpoint_path(cfg, run);
    nlohmann::json meta;
    meta["seed"] = cfg.seed;
    meta["mode"] = to_string(tcfg.mode);
    meta["loss"] = to_string(tcfg.loss);
    meta["sigma"] = tcfg.loss_cfg.sigma;
    meta["delta"] = tcfg.loss_cfg.delta;
    meta["kind"] = tcfg.mode == TransferMode::classifier_distill ? "classifier"
                                                                 : "embedding";
    save_checkpoint(tpath, target, meta);
    save_train_log(points.size() == 1
                       ? cfg.out_dir / "transfer_train.jsonl"
                       : cfg.out_dir / ("transfer_train_run" + std::to_string(run) +
                                        ".jsonl"),
                   log);
    entry["checkpoint"] = tpath.string();
    report["runs"].push_back(entry);
  }

  std::ofstream out(cfg.out_dir / "report.json");
  if (!out) throw Error("cannot write report.json");
  out << report.dump(2) << "\n";
  return report;
}

nlohmann::json run_eval(const std::filesystem::path& checkpoint,
                        const std::filesystem::path& dataset, FileFormat format,
                        const std::vector<std::size_t>& k_values, bool normalize) {
  auto [model, meta] = load_checkpoint(checkpoint);
  if (!std::filesystem::exists(dataset))
    throw ConfigError("dataset file not found: " + dataset.string());
  Dataset ds = load_dataset(dataset, format);
  if (ds.dim() != model.input_dim())
    throw ConfigError("dataset dim " + std::to_string(ds.dim()) +
                      " does not match model input " + std::to_string(model.input_dim()));
  for (std::size_t k : k_values)
    if (k == 0 || k >= ds.size())
      throw ConfigError("K = " + std::to_string(k) + " must satisfy 1 <= K < n = " +
                        std::to_string(ds.size()));

  Matrix emb = mlp_forward(model, ds.features);
  if (normalize) emb = l2_normalize_rows(emb);
  nlohmann::json j;
  j["checkpoint"] = checkpoint.string();
  j["n"] = ds.size();
  j["retrieval"] = recall_at_k(emb, ds.labels, k_values).to_json();
  j["spectral"] = spectral_decay(emb).to_json();
  return j;
}

// ---------------------------------------------------------------------------
// Gradient verification.
// ---------------------------------------------------------------------------

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kGradTol = 1e-4;

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

template <typename ValueFn>
double max_grad_rel_err(Matrix x, const Matrix& analytic, ValueFn value) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    double keep = x.data[k];
    x.data[k] = keep + kFdStep;
    double up = value(x);
    x.data[k] = keep - kFdStep;
    double down = value(x);
    x.data[k] = keep;
    double fd = (up - down) / (2.0 * kFdStep);
    worst = std::max(worst, rel_err(analytic.data[k], fd));
  }
  return worst;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t d, double scale) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix x(n, d);
  for (double& v : x.data) v = gauss(rng);
  return x;
}

WeightMatrix random_weights(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    w(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = unif(rng);
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return WeightMatrix{n, std::move(w)};
}

Matrix random_binary_labels(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> coin(0, 2);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = static_cast<std::size_t>(coin(rng));
  return class_equivalence(labels);
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t seed, std::size_t trials,
                              const std::string& corrupt_op) {
  if (trials < 1) throw InvalidInput("run_gradcheck: trials must be >= 1");
  GradcheckReport report;

  auto record = [&](const std::string& op, std::uint64_t instance_seed, double err) {
    auto [it, inserted] = report.max_rel_err.emplace(op, err);
    if (!inserted) it->second = std::max(it->second, err);
    if (err >= kGradTol && report.ok) {
      report.ok = false;
      report.failed_op = op;
      report.failed_instance_seed = instance_seed;
    }
  };

  auto corrupt = [&](const std::string& op, Matrix& grad) {
    if (op == corrupt_op && !grad.data.empty()) grad.data[0] += 1e-2;
  };

  std::uniform_int_distribution<std::size_t> n_dist(3, 16);
  std::uniform_int_distribution<std::size_t> d_dist(2, 8);

  for (std::size_t t = 0; t < trials; ++t) {
    std::uint64_t iseed = splitmix64(sub_seed(seed, SeedStream::gradcheck) + t);
    std::mt19937_64 rng(iseed);
    std::size_t n = n_dist(rng), d = d_dist(rng);

    {
      Matrix x = l2_normalize_rows(random_matrix(rng, n, d, 1.0));
      Matrix y = random_binary_labels(rng, n);
      LossResult r = contrastive(x, y, 1.0);
      corrupt("contrastive", r.grad);
      record("contrastive", iseed, max_grad_rel_err(x, r.grad, [&](const Matrix& m) {
               return contrastive(m, y, 1.0).value;
             }));
    }
    {
      Matrix x = random_matrix(rng, n, d, 1.0);
      WeightMatrix w = random_weights(rng, n);
      LossResult r = relaxed_contrastive_abs(x, w, 1.0);
      corrupt("relaxed_contrastive_abs", r.grad);
      record("relaxed_contrastive_abs", iseed,
             max_grad_rel_err(x, r.grad, [&](const Matrix& m) {
               return relaxed_contrastive_abs(m, w, 1.0).value;
             }));
    }
    {
      Matrix x = random_matrix(rng, n, d, 1.0);
      WeightMatrix w = random_weights(rng, n);
      LossResult r = relaxed_contrastive(x, w, 1.0);
      corrupt("relaxed_contrastive", r.grad);
      record("relaxed_contrastive", iseed,
             max_grad_rel_err(x, r.grad, [&](const Matrix& m) {
               return relaxed_contrastive(m, w, 1.0).value;
             }));
    }
    {
      Matrix x = random_matrix(rng, n, d, 1.0);
      Matrix y = random_binary_labels(rng, n);
      LossResult r = unrelaxed_relative(x, y, 1.0);
      corrupt("unrelaxed_relative", r.grad);
      record("unrelaxed_relative", iseed,
             max_grad_rel_err(x, r.grad, [&](const Matrix& m) {
               return unrelaxed_relative(m, y, 1.0).value;
             }));
    }
    {
      Matrix x = random_matrix(rng, n, d, 1.0);
      WeightMatrix w = random_weights(rng, n);
      LossConfig cfg;
      cfg.alpha = 1.0;
      cfg.beta = 4.0;
      LossResult r = relaxed_ms(x, w, cfg);
      corrupt("relaxed_ms", r.grad);
      record("relaxed_ms", iseed, max_grad_rel_err(x, r.grad, [&](const Matrix& m) {
               return relaxed_ms(m, w, cfg).value;
             }));
    }
    {
      Matrix student = random_matrix(rng, n, d, 2.0);
      Matrix teacher = random_matrix(rng, n, d, 2.0);
      LossResult r = hkd_kl(student, teacher, 4.0);
      corrupt("hkd_kl", r.grad);
      record("hkd_kl", iseed, max_grad_rel_err(student, r.grad, [&](const Matrix& m) {
               return hkd_kl(m, teacher, 4.0).value;
             }));
    }
    {
      Matrix logits = random_matrix(rng, n, d, 2.0);
      std::uniform_int_distribution<std::size_t> cls(0, d - 1);
      std::vector<std::size_t> labels(n);
      for (auto& l : labels) l = cls(rng);
      LossResult r = cross_entropy(logits, labels);
      corrupt("cross_entropy", r.grad);
      record("cross_entropy", iseed, max_grad_rel_err(logits, r.grad, [&](const Matrix& m) {
               return cross_entropy(m, labels).value;
             }));
    }
    {
      // MLP backward against finite differences of a quadratic objective.
      // Instances with a hidden pre-activation near the rectifier kink are
      // re-drawn: finite differences are not valid across the kink.
      std::size_t hidden = 4 + (n % 3);
      MlpModel model = mlp_init({d, hidden, 3}, iseed);
      Matrix x = random_matrix(rng, n, d, 1.0);
      auto relu_margin_ok = [&](const Matrix& probe) {
        ForwardTrace ft;
        mlp_forward(model, probe, ft);
        for (std::size_t l = 0; l + 1 < model.layer_count(); ++l)
          for (double z : ft.pre_acts[l].data)
            if (std::abs(z) < 1e-3) return false;
        return true;
      };
      while (!relu_margin_ok(x)) x = random_matrix(rng, n, d, 1.0);
      Matrix ref = random_matrix(rng, n, 3, 1.0);
      auto objective = [&](const MlpModel& m) {
        Matrix y = mlp_forward(m, x);
        double s = 0.0;
        for (std::size_t k = 0; k < y.data.size(); ++k) {
          double diff = y.data[k] - ref.data[k];
          s += 0.5 * diff * diff;
        }
        return s;
      };
      ForwardTrace trace;
      Matrix y = mlp_forward(model, x, trace);
      Matrix grad_out(y.rows, y.cols);
      for (std::size_t k = 0; k < y.data.size(); ++k)
        grad_out.data[k] = y.data[k] - ref.data[k];
      MlpGradients grads = mlp_backward(model, trace, grad_out);
      if (corrupt_op == "mlp_backward") grads.params[0] += 1e-2;
      double worst = 0.0;
      MlpModel probe = model;
      for (std::size_t k = 0; k < probe.params.size(); ++k) {
        double keep = probe.params[k];
        probe.params[k] = keep + kFdStep;
        double up = objective(probe);
        probe.params[k] = keep - kFdStep;
        double down = objective(probe);
        probe.params[k] = keep;
        double fd = (up - down) / (2.0 * kFdStep);
        worst = std::max(worst, rel_err(grads.params[k], fd));
      }
      record("mlp_backward", iseed, worst);
    }
  }
  return report;
}

}  // namespace exf
