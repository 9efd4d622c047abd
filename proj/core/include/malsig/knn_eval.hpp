#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "malsig/bytes_image.hpp"
#include "malsig/sparse.hpp"

namespace malsig {

struct LabeledItem {
  std::uint64_t id = 0;
  std::vector<double> features;
  std::string label;
};

struct LabeledDataset {
  std::vector<LabeledItem> items;

  std::vector<std::string> families() const;  // sorted, unique
  std::size_t dimension() const { return items.empty() ? 0 : items.front().features.size(); }
  // Throws HeterogeneousLength if feature lengths differ.
  void validate() const;
};

// Label of the Euclidean-nearest training item; ties go to the lowest id.
const std::string& classify_nn(const LabeledDataset& train, std::span<const double> query);

enum class ClassifierKind { NearestNeighbor, Src };
std::string to_string(ClassifierKind kind);

struct EvalReport {
  double accuracy = 0.0;  // trace(confusion) / total
  double mean_fold_accuracy = 0.0;
  std::vector<std::string> families;
  std::map<std::string, double> per_family_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<double> fold_accuracies;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified k-fold assignment: fold[i] in [0,k). Throws InsufficientSamples
// if any family has fewer than k members.
std::vector<std::size_t> stratified_folds(std::span<const std::string> labels, std::size_t k,
                                          std::uint64_t seed);

// Stratified holdout: per family round(train_frac * n_k) items train, the
// rest test (at least one of each when n_k >= 2).
Split stratified_split(std::span<const std::string> labels, double train_frac, std::uint64_t seed);

// Subsamples every family to the size of the smallest one.
std::vector<std::size_t> balanced_subset(std::span<const std::string> labels, std::uint64_t seed);

struct ClassifierOptions {
  ClassifierKind kind = ClassifierKind::NearestNeighbor;
  SrcOptions src = SrcOptions::descriptors();
};

// Predicts every test item from the train items.
std::vector<std::string> predict(const LabeledDataset& data, std::span<const std::size_t> train,
                                 std::span<const std::size_t> test, const ClassifierOptions& options);

EvalReport kfold(const LabeledDataset& data, std::size_t k, std::uint64_t seed,
                 const ClassifierOptions& options = {});

EvalReport holdout(const LabeledDataset& data, const Split& split, const ClassifierOptions& options = {});

struct RawSample {
  std::uint64_t id = 0;
  ByteSignal signal;
  std::string label;
};

enum class FeatureKind { Gist, RandomProjection };
std::string to_string(FeatureKind kind);

struct GridConfig {
  double train_frac = 0.8;
  std::uint64_t split_seed = 1;
  std::uint64_t projection_seed = 7;
  std::vector<std::size_t> dims{48, 96, 192, 256, 384, 512};
  std::vector<FeatureKind> features{FeatureKind::RandomProjection, FeatureKind::Gist};
  std::vector<ClassifierKind> classifiers{ClassifierKind::Src, ClassifierKind::NearestNeighbor};
  SrcOptions src = SrcOptions::descriptors();
  WidthPolicy width_policy = WidthPolicy::standard();
  bool balance_families = true;
};

struct GridCell {
  FeatureKind feature;
  ClassifierKind classifier;
  std::size_t dim;
  EvalReport report;
};

// The {feature} x {classifier} x {dims} grid on one stratified split. RP pads
// every signal to the longest one in the corpus.
std::vector<GridCell> holdout_grid(std::span<const RawSample> corpus, const GridConfig& config);

std::string grid_csv(std::span<const GridCell> cells);

}  // namespace malsig
