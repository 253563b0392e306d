#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "exf/matrix.hpp"

namespace exf {

struct Dataset {
  Matrix features;                  // N x d_in
  std::vector<std::size_t> labels;  // in [0, class_count)
  std::size_t class_count = 0;
  std::string split_tag = "train";

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
  void validate() const;
};

struct AugmentConfig {
  double noise_std = 0.0;
  double feature_dropout = 0.0;  // in [0,1)
  std::size_t views = 2;

  void validate() const;
};

// A minibatch: dataset row indices plus v augmented views of their
// features, all of identical shape.
struct Batch {
  std::vector<std::size_t> indices;
  std::vector<Matrix> views;
  std::vector<std::size_t> labels;
};

// Gaussian blobs around rejection-sampled centers: centers are uniform on
// the hypercube [0, separation]^d and accepted only when at least
// `separation` away from every earlier center.
Dataset generate_clusters(std::size_t classes, std::size_t per_class, std::size_t d_in,
                          double separation, double noise, std::uint64_t seed);

// Class-disjoint split: train gets floor(fraction * classes) whole classes,
// test the rest. Sample order within each side follows the original rows.
std::pair<Dataset, Dataset> split_by_class(const Dataset& ds, double train_fraction,
                                           std::uint64_t seed);

// Stratified sample-wise split (same classes on both sides); used by the
// classifier-distillation pipeline where unseen classes make no sense.
std::pair<Dataset, Dataset> split_by_sample(const Dataset& ds, double train_fraction,
                                            std::uint64_t seed);

// Each view is x + Gaussian(noise_std) with independent feature dropout.
std::vector<Matrix> augment_views(const Matrix& x, const AugmentConfig& cfg,
                                  std::mt19937_64& rng);

// One epoch of batches: a fresh permutation per call from the shared rng
// stream; a trailing partial batch is dropped when its effective size
// (rows x views) falls below 3.
std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size,
                                std::mt19937_64& rng, const AugmentConfig& aug);

// Rows of every view stacked: view 0 rows, then view 1 rows, ... with the
// labels tiled to match.
Matrix concat_views(const Batch& batch);
std::vector<std::size_t> tiled_labels(const Batch& batch);

enum class FileFormat { csv, binary };

Dataset load_dataset(const std::filesystem::path& path, FileFormat format);
void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  FileFormat format);

}  // namespace exf
