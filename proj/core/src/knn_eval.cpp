#include "malsig/knn_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "malsig/error.hpp"
#include "malsig/features.hpp"
#include "malsig/gist.hpp"
#include "malsig/projection.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace malsig {

std::vector<std::string> LabeledDataset::families() const {
  std::set<std::string> s;
  for (const auto& it : items) s.insert(it.label);
  return {s.begin(), s.end()};
}

void LabeledDataset::validate() const {
  for (const auto& it : items)
    if (it.features.size() != dimension())
      throw Error(Errc::HeterogeneousLength, "item " + std::to_string(it.id) + " has length " +
                                                 std::to_string(it.features.size()));
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

const LabeledItem* nearest(const LabeledDataset& data, std::span<const std::size_t> candidates,
                           std::span<const double> query) {
  const LabeledItem* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (auto idx : candidates) {
    const auto& it = data.items[idx];
    if (it.features.size() != query.size())
      throw Error(Errc::DimensionMismatch, "query length differs from training features");
    const double d = squared_distance(it.features, query);
    if (d < best_d || (d == best_d && best && it.id < best->id)) {
      best = &it;
      best_d = d;
    }
  }
  return best;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

// family -> member indices, families sorted
std::map<std::string, std::vector<std::size_t>> group(std::span<const std::string> labels) {
  std::map<std::string, std::vector<std::size_t>> g;
  for (std::size_t i = 0; i < labels.size(); ++i) g[labels[i]].push_back(i);
  return g;
}

}  // namespace

const std::string& classify_nn(const LabeledDataset& train, std::span<const double> query) {
  if (train.items.empty()) throw Error(Errc::EmptyIndex, "nearest-neighbour training set is empty");
  const auto all = iota_indices(train.items.size());
  return nearest(train, all, query)->label;
}

std::string to_string(ClassifierKind kind) {
  return kind == ClassifierKind::Src ? "SRC" : "NN";
}

std::string to_string(FeatureKind kind) {
  return kind == FeatureKind::Gist ? "GIST" : "RP";
}

nlohmann::json EvalReport::to_json() const {
  return {{"accuracy", accuracy},
          {"mean_fold_accuracy", mean_fold_accuracy},
          {"families", families},
          {"per_family_accuracy", per_family_accuracy},
          {"confusion", confusion},
          {"fold_accuracies", fold_accuracies},
          {"train_count", train_count},
          {"test_count", test_count},
          {"config", config}};
}

std::vector<std::size_t> stratified_folds(std::span<const std::string> labels, std::size_t k,
                                          std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidConfig, "k-fold needs k >= 2");
  std::vector<std::size_t> fold(labels.size());
  std::mt19937_64 gen(seed);
  std::size_t offset = 0;
  for (auto& [family, members] : group(labels)) {
    if (members.size() < k)
      throw Error(Errc::InsufficientSamples, "family '" + family + "' has " +
                                                 std::to_string(members.size()) + " members, need " +
                                                 std::to_string(k));
    detail::shuffle(members, gen);
    // Rotating the start keeps fold sizes balanced across families.
    for (std::size_t j = 0; j < members.size(); ++j) fold[members[j]] = (offset + j) % k;
    offset = (offset + members.size()) % k;
  }
  return fold;
}

Split stratified_split(std::span<const std::string> labels, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw Error(Errc::InvalidConfig, "train fraction must be in (0,1)");
  Split split;
  std::mt19937_64 gen(seed);
  for (auto& [family, members] : group(labels)) {
    detail::shuffle(members, gen);
    auto n_train = static_cast<std::size_t>(std::llround(train_frac * members.size()));
    if (members.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    split.train.insert(split.train.end(), members.begin(), members.begin() + n_train);
    split.test.insert(split.test.end(), members.begin() + n_train, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<std::size_t> balanced_subset(std::span<const std::string> labels, std::uint64_t seed) {
  auto groups = group(labels);
  if (groups.empty()) return {};
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (const auto& [_, m] : groups) smallest = std::min(smallest, m.size());
  std::mt19937_64 gen(seed);
  std::vector<std::size_t> keep;
  for (auto& [_, members] : groups) {
    detail::shuffle(members, gen);
    keep.insert(keep.end(), members.begin(), members.begin() + smallest);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<std::string> predict(const LabeledDataset& data, std::span<const std::size_t> train,
                                 std::span<const std::size_t> test, const ClassifierOptions& options) {
  if (train.empty()) throw Error(Errc::InsufficientSamples, "empty training split");
  std::vector<std::string> out(test.size());
  if (options.kind == ClassifierKind::NearestNeighbor) {
    detail::parallel_for(test.size(), [&](std::size_t i) {
      out[i] = nearest(data, train, data.items[test[i]].features)->label;
    });
    return out;
  }
  std::vector<LabeledVector> columns;
  columns.reserve(train.size());
  for (auto idx : train) columns.push_back({data.items[idx].features, data.items[idx].label});
  const Dictionary dict = build_dictionary(columns);
  const L1Solver solver(dict, options.src.solver);
  detail::parallel_for(test.size(), [&](std::size_t i) {
    const auto& f = data.items[test[i]].features;
    const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    out[i] = classify_src(solver, w, options.src).family;
  });
  return out;
}

namespace {

struct Tally {
  std::vector<std::string> families;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> confusion;

  explicit Tally(std::vector<std::string> fams) : families(std::move(fams)) {
    for (std::size_t i = 0; i < families.size(); ++i) index[families[i]] = i;
    confusion.assign(families.size(), std::vector<std::size_t>(families.size(), 0));
  }

  // Returns correct count.
  std::size_t add(const LabeledDataset& data, std::span<const std::size_t> test,
                  std::span<const std::string> predicted) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto& truth = data.items[test[i]].label;
      ++confusion[index.at(truth)][index.at(predicted[i])];
      correct += truth == predicted[i];
    }
    return correct;
  }

  void finish(EvalReport& r) const {
    std::size_t total = 0, trace = 0;
    for (std::size_t i = 0; i < families.size(); ++i) {
      const std::size_t row = std::accumulate(confusion[i].begin(), confusion[i].end(), std::size_t{0});
      total += row;
      trace += confusion[i][i];
      r.per_family_accuracy[families[i]] = row ? double(confusion[i][i]) / double(row) : 0.0;
    }
    r.families = families;
    r.confusion = confusion;
    r.accuracy = total ? double(trace) / double(total) : 0.0;
  }
};

nlohmann::json classifier_json(const ClassifierOptions& options) {
  nlohmann::json j = {{"classifier", to_string(options.kind)}};
  if (options.kind == ClassifierKind::Src) {
    j["src"] = {{"eps_abs", options.src.eps_abs},
                {"eps_rel", options.src.eps_rel},
                {"max_iterations", options.src.solver.max_iterations},
                {"abs_tol", options.src.solver.abs_tol},
                {"rel_tol", options.src.solver.rel_tol},
                {"column_normalization", "unit_l2"}};
  }
  return j;
}

}  // namespace

EvalReport kfold(const LabeledDataset& data, std::size_t k, std::uint64_t seed,
                 const ClassifierOptions& options) {
  data.validate();
  std::vector<std::string> labels;
  for (const auto& it : data.items) labels.push_back(it.label);
  const auto fold = stratified_folds(labels, k, seed);

  Tally tally(data.families());
  EvalReport report;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? test : train).push_back(i);
    const auto predicted = predict(data, train, test, options);
    const std::size_t correct = tally.add(data, test, predicted);
    report.fold_accuracies.push_back(test.empty() ? 0.0 : double(correct) / double(test.size()));
  }
  tally.finish(report);
  report.mean_fold_accuracy =
      std::accumulate(report.fold_accuracies.begin(), report.fold_accuracies.end(), 0.0) / double(k);
  report.train_count = data.items.size();
  report.test_count = data.items.size();
  report.config = classifier_json(options);
  report.config["protocol"] = "stratified-kfold";
  report.config["folds"] = k;
  report.config["seed"] = seed;
  report.config["metric"] = "euclidean";
  return report;
}

EvalReport holdout(const LabeledDataset& data, const Split& split, const ClassifierOptions& options) {
  data.validate();
  Tally tally(data.families());
  const auto predicted = predict(data, split.train, split.test, options);
  const std::size_t correct = tally.add(data, split.test, predicted);
  EvalReport report;
  tally.finish(report);
  report.fold_accuracies = {split.test.empty() ? 0.0 : double(correct) / double(split.test.size())};
  report.mean_fold_accuracy = report.fold_accuracies.front();
  report.train_count = split.train.size();
  report.test_count = split.test.size();
  report.config = classifier_json(options);
  report.config["protocol"] = "holdout";
  return report;
}

std::vector<GridCell> holdout_grid(std::span<const RawSample> corpus_in, const GridConfig& config) {
  if (corpus_in.empty()) throw Error(Errc::InsufficientSamples, "empty corpus");
  std::vector<std::string> all_labels;
  for (const auto& s : corpus_in) all_labels.push_back(s.label);
  std::vector<std::size_t> chosen = config.balance_families ? balanced_subset(all_labels, config.split_seed)
                                                            : iota_indices(corpus_in.size());
  std::vector<const RawSample*> corpus;
  std::vector<std::string> labels;
  for (auto i : chosen) {
    corpus.push_back(&corpus_in[i]);
    labels.push_back(corpus_in[i].label);
  }
  const Split split = stratified_split(labels, config.train_frac, config.split_seed);

  auto dataset_from = [&](std::vector<std::vector<double>> feats) {
    LabeledDataset d;
    for (std::size_t i = 0; i < corpus.size(); ++i)
      d.items.push_back({corpus[i]->id, std::move(feats[i]), corpus[i]->label});
    return d;
  };

  nlohmann::json base = {{"train_frac", config.train_frac},
                         {"split_seed", config.split_seed},
                         {"balanced", config.balance_families},
                         {"samples", corpus.size()}};

  std::vector<GridCell> cells;
  auto run_cells = [&](FeatureKind feature, std::size_t dim, const LabeledDataset& data,
                       const nlohmann::json& feature_json) {
    for (auto kind : config.classifiers) {
      ClassifierOptions options{kind, config.src};
      EvalReport r = holdout(data, split, options);
      r.config.update(base);
      r.config["feature"] = feature_json;
      r.config["dim"] = dim;
      cells.push_back({feature, kind, dim, std::move(r)});
    }
  };

  for (auto feature : config.features) {
    if (feature == FeatureKind::RandomProjection) {
      std::size_t m = 0;
      for (auto* s : corpus) m = std::max(m, s->signal.length());
      std::vector<ByteSignal> padded;
      padded.reserve(corpus.size());
      for (auto* s : corpus) padded.push_back(pad_to_length(s->signal, m).signal);
      for (auto dim : config.dims) {
        const ProjectionMatrix r(dim, m, config.projection_seed);
        const auto data = dataset_from(project_all(padded, r));
        run_cells(feature, dim, data,
                  {{"kind", "RP"},
                   {"seed", config.projection_seed},
                   {"input_length", m},
                   {"generator", std::string(ProjectionMatrix::kGenerator)},
                   {"generator_version", ProjectionMatrix::kGeneratorVersion}});
      }
    } else {
      const GistConfig defaults;
      std::vector<RealImage> images;
      images.reserve(corpus.size());
      for (auto* s : corpus) {
        const auto img = resize_bilinear(to_image(s->signal, config.width_policy), defaults.image_size,
                                         defaults.image_size);
        images.push_back(RealImage::from(img));
      }
      for (auto dim : config.dims) {
        auto layout = gist_config_for_dim(dim);
        nlohmann::json fj = {{"kind", "GIST"}, {"image_size", defaults.image_size}};
        std::size_t keep = dim;
        if (layout) {
          fj["orientations_per_scale"] = layout->orientations_per_scale;
          fj["grid"] = layout->grid;
          fj["dimension_rule"] = "configured";
        } else {
          if (dim > defaults.descriptor_length())
            throw Error(Errc::InvalidDim, "no GIST layout reaches " + std::to_string(dim) + " values");
          layout = defaults;
          fj["orientations_per_scale"] = defaults.orientations_per_scale;
          fj["grid"] = defaults.grid;
          fj["dimension_rule"] = "prefix-truncation";
        }
        const GistExtractor extractor(*layout);
        std::vector<std::vector<double>> feats(images.size());
        detail::parallel_for(images.size(), [&](std::size_t i) {
          feats[i] = extractor.compute(images[i]).values;
          feats[i].resize(keep);
        });
        run_cells(feature, dim, dataset_from(std::move(feats)), fj);
      }
    }
  }
  return cells;
}

std::string grid_csv(std::span<const GridCell> cells) {
  std::ostringstream os;
  os << "feature,classifier,dim,accuracy,train,test\n";
  for (const auto& c : cells)
    os << to_string(c.feature) << ',' << to_string(c.classifier) << ',' << c.dim << ','
       << c.report.accuracy << ',' << c.report.train_count << ',' << c.report.test_count << '\n';
  return os.str();
}

}  // namespace malsig
