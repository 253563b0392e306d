#include "exf/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "exf/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary dataset format assumes a little-endian host");

namespace exf {

void Dataset::validate() const {
  if (features.rows == 0 || features.cols == 0)
    throw InvalidInput("Dataset: empty feature matrix");
  if (labels.size() != features.rows)
    throw InvalidInput("Dataset: label count does not match rows");
  if (!features.all_finite()) throw InvalidInput("Dataset: non-finite features");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= class_count)
      throw InvalidInput("Dataset: label out of range at row " + std::to_string(i));
}

void AugmentConfig::validate() const {
  if (noise_std < 0.0) throw InvalidInput("AugmentConfig: noise_std must be >= 0");
  if (feature_dropout < 0.0 || feature_dropout >= 1.0)
    throw InvalidInput("AugmentConfig: feature_dropout must lie in [0,1)");
  if (views == 0) throw InvalidInput("AugmentConfig: views must be >= 1");
}

Dataset generate_clusters(std::size_t classes, std::size_t per_class, std::size_t d_in,
                          double separation, double noise, std::uint64_t seed) {
  if (classes < 2) throw InvalidInput("generate_clusters: need at least 2 classes");
  if (per_class < 1) throw InvalidInput("generate_clusters: per_class must be >= 1");
  if (d_in < 1) throw InvalidInput("generate_clusters: d_in must be >= 1");
  if (separation <= 0.0) throw InvalidInput("generate_clusters: separation must be > 0");
  if (noise < 0.0) throw InvalidInput("generate_clusters: noise must be >= 0");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, separation);

  Matrix centers(classes, d_in);
  const std::size_t max_attempts = 1000 * classes;
  std::size_t placed = 0;
  for (std::size_t attempt = 0; placed < classes; ++attempt) {
    if (attempt >= max_attempts)
      throw Error("generate_clusters: infeasible geometry, could not place " +
                  std::to_string(classes) + " centers with separation " +
                  std::to_string(separation) + " after " +
                  std::to_string(max_attempts) + " attempts");
    std::vector<double> cand(d_in);
    for (double& v : cand) v = unif(rng);
    bool ok = true;
    for (std::size_t c = 0; c < placed && ok; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < d_in; ++k) {
        double diff = cand[k] - centers(c, k);
        s += diff * diff;
      }
      ok = s >= separation * separation;
    }
    if (!ok) continue;
    for (std::size_t k = 0; k < d_in; ++k) centers(placed, k) = cand[k];
    ++placed;
  }

  Dataset ds;
  ds.class_count = classes;
  ds.features = Matrix(classes * per_class, d_in);
  ds.labels.resize(classes * per_class);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      ds.labels[row] = c;
      for (std::size_t k = 0; k < d_in; ++k)
        ds.features(row, k) = centers(c, k) + (noise > 0.0 ? noise * gauss(rng) : 0.0);
    }
  }
  return ds;
}

namespace {

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows,
               const std::string& tag) {
  Dataset out;
  out.class_count = ds.class_count;
  out.split_tag = tag;
  out.features = Matrix(rows.size(), ds.dim());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.labels[i] = ds.labels[rows[i]];
    for (std::size_t k = 0; k < ds.dim(); ++k)
      out.features(i, k) = ds.features(rows[i], k);
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_by_class(const Dataset& ds, double train_fraction,
                                           std::uint64_t seed) {
  ds.validate();
  if (ds.class_count < 2) throw InvalidInput("split_by_class: need at least 2 classes");
  std::vector<std::size_t> class_order(ds.class_count);
  std::iota(class_order.begin(), class_order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(class_order.begin(), class_order.end(), rng);

  std::size_t n_train =
      static_cast<std::size_t>(train_fraction * static_cast<double>(ds.class_count));
  if (n_train == 0 || n_train >= ds.class_count)
    throw InvalidInput("split_by_class: fraction " + std::to_string(train_fraction) +
                       " yields an empty side");

  std::vector<bool> in_train(ds.class_count, false);
  for (std::size_t c = 0; c < n_train; ++c) in_train[class_order[c]] = true;

  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < ds.size(); ++i)
    (in_train[ds.labels[i]] ? train_rows : test_rows).push_back(i);
  return {subset(ds, train_rows, "train"), subset(ds, test_rows, "test")};
}

std::pair<Dataset, Dataset> split_by_sample(const Dataset& ds, double train_fraction,
                                            std::uint64_t seed) {
  ds.validate();
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw InvalidInput("split_by_sample: fraction must lie in (0,1)");
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.labels[i] == c) rows.push_back(i);
    if (rows.empty()) continue;
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t n_train =
        static_cast<std::size_t>(train_fraction * static_cast<double>(rows.size()));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    for (std::size_t i = 0; i < rows.size(); ++i)
      (i < n_train ? train_rows : test_rows).push_back(rows[i]);
  }
  if (train_rows.empty() || test_rows.empty())
    throw InvalidInput("split_by_sample: fraction yields an empty side");
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {subset(ds, train_rows, "train"), subset(ds, test_rows, "test")};
}

std::vector<Matrix> augment_views(const Matrix& x, const AugmentConfig& cfg,
                                  std::mt19937_64& rng) {
  cfg.validate();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Matrix> views;
  views.reserve(cfg.views);
  for (std::size_t v = 0; v < cfg.views; ++v) {
    Matrix view = x;
    if (cfg.noise_std > 0.0)
      for (double& e : view.data) e += cfg.noise_std * gauss(rng);
    if (cfg.feature_dropout > 0.0)
      for (double& e : view.data)
        if (unif(rng) < cfg.feature_dropout) e = 0.0;
    views.push_back(std::move(view));
  }
  return views;
}

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size,
                                std::mt19937_64& rng, const AugmentConfig& aug) {
  ds.validate();
  aug.validate();
  if (batch_size < 3) throw InvalidInput("make_batches: batch_size must be >= 3");
  if (batch_size > ds.size())
    throw InvalidInput("make_batches: batch_size " + std::to_string(batch_size) +
                       " exceeds dataset size " + std::to_string(ds.size()));

  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < perm.size(); start += batch_size) {
    std::size_t count = std::min(batch_size, perm.size() - start);
    if (count * aug.views < 3) break;  // drop a too-small trailing batch
    Batch b;
    b.indices.assign(perm.begin() + start, perm.begin() + start + count);
    b.labels.resize(count);
    Matrix rows(count, ds.dim());
    for (std::size_t i = 0; i < count; ++i) {
      b.labels[i] = ds.labels[b.indices[i]];
      for (std::size_t k = 0; k < ds.dim(); ++k)
        rows(i, k) = ds.features(b.indices[i], k);
    }
    b.views = augment_views(rows, aug, rng);
    batches.push_back(std::move(b));
  }
  return batches;
}

Matrix concat_views(const Batch& batch) {
  if (batch.views.empty()) throw InvalidInput("concat_views: batch has no views");
  const Matrix& first = batch.views.front();
  Matrix out(first.rows * batch.views.size(), first.cols);
  std::size_t row = 0;
  for (const Matrix& v : batch.views) {
    if (!v.same_shape(first)) throw InvalidInput("concat_views: view shape mismatch");
    for (std::size_t i = 0; i < v.rows; ++i, ++row)
      for (std::size_t k = 0; k < v.cols; ++k) out(row, k) = v(i, k);
  }
  return out;
}

std::vector<std::size_t> tiled_labels(const Batch& batch) {
  std::vector<std::size_t> out;
  out.reserve(batch.labels.size() * batch.views.size());
  for (std::size_t v = 0; v < batch.views.size(); ++v)
    out.insert(out.end(), batch.labels.begin(), batch.labels.end());
  return out;
}

// ---------------------------------------------------------------------------
// File formats.
//   CSV:    header "label,f0,...,f{D-1}", one sample per line.
//   binary: magic "EXF1", u32 N, u32 D (little-endian), then per sample a
//           u32 label and D little-endian float64 features.
// ---------------------------------------------------------------------------

namespace {

constexpr char kBinaryMagic[4] = {'E', 'X', 'F', '1'};

Dataset finalize_loaded(Matrix features, std::vector<std::size_t> labels) {
  Dataset ds;
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  std::size_t max_label = 0;
  for (std::size_t l : ds.labels) max_label = std::max(max_label, l);
  ds.class_count = max_label + 1;
  ds.validate();
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw ParseError(path.string() + ": empty file, expected header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("label", 0) != 0)
    throw ParseError(path.string() + ": header must start with 'label'");
  std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (dim == 0) throw ParseError(path.string() + ": header declares no features");

  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::size_t fields = 0;
    long long label = -1;
    std::vector<double> row(dim);
    while (std::getline(ss, field, ',')) {
      std::size_t pos = 0;
      try {
        if (fields == 0) {
          label = std::stoll(field, &pos);
        } else if (fields <= dim) {
          row[fields - 1] = std::stod(field, &pos);
        }
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": cannot parse field " + std::to_string(fields + 1) + " '" +
                         field + "'");
      }
      if (pos != field.size())
        throw ParseError(path.string() + ":" + std::to_string(lineno) +
                         ": trailing junk in field '" + field + "'");
      ++fields;
    }
    if (fields != dim + 1)
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": row has " +
                       std::to_string(fields) + " fields, expected " +
                       std::to_string(dim + 1));
    if (label < 0)
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": label must be a nonnegative integer");
    labels.push_back(static_cast<std::size_t>(label));
    values.insert(values.end(), row.begin(), row.end());
  }
  if (labels.empty()) throw ParseError(path.string() + ": no data rows");
  Matrix features(labels.size(), dim);
  features.data = std::move(values);
  return finalize_loaded(std::move(features), std::move(labels));
}

Dataset load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset file: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kBinaryMagic, 4) != 0)
    throw ParseError(path.string() + ": bad magic, expected EXF1");
  std::uint32_t n = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in || n == 0 || d == 0)
    throw ParseError(path.string() + ": invalid header counts");
  Matrix features(n, d);
  std::vector<std::size_t> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t label = 0;
    in.read(reinterpret_cast<char*>(&label), 4);
    in.read(reinterpret_cast<char*>(features.row(i).data()),
            static_cast<std::streamsize>(d * sizeof(double)));
    if (!in)
      throw ParseError(path.string() + ": truncated at sample " + std::to_string(i));
    labels[i] = label;
  }
  return finalize_loaded(std::move(features), std::move(labels));
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, FileFormat format) {
  return format == FileFormat::csv ? load_csv(path) : load_binary(path);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  FileFormat format) {
  ds.validate();
  if (format == FileFormat::csv) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file: " + path.string());
    out << "label";
    for (std::size_t k = 0; k < ds.dim(); ++k) out << ",f" << k;
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
      out << ds.labels[i];
      for (std::size_t k = 0; k < ds.dim(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, k));
        out << ',' << buf;
      }
      out << "\n";
    }
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset file: " + path.string());
    out.write(kBinaryMagic, 4);
    std::uint32_t n = static_cast<std::uint32_t>(ds.size());
    std::uint32_t d = static_cast<std::uint32_t>(ds.dim());
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&d), 4);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      std::uint32_t label = static_cast<std::uint32_t>(ds.labels[i]);
      out.write(reinterpret_cast<const char*>(&label), 4);
      out.write(reinterpret_cast<const char*>(ds.features.row(i).data()),
                static_cast<std::streamsize>(d * sizeof(double)));
    }
  }
}

}  // namespace exf
