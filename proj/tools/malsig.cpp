// malsig: byte-image signatures for malware triage.
//
//   convert      file(s) -> descriptor JSON lines
//   fingerprint  corpus directory -> fingerprint store
//   index        store statistics, tree audit, threshold calibration
//   classify     NN or SRC family prediction against a store
//   retrieve     top-k matches against a store
//   eval         k-fold or 80/20 grid experiments on a labelled corpus
//   serve        HTTP query service over a store
//   export-png   byte images as PNG files
//
// Every verb accepts --config <file>; command-line flags override it.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "malsig/ball_tree.hpp"
#include "malsig/bytes_image.hpp"
#include "malsig/config.hpp"
#include "malsig/corpus.hpp"
#include "malsig/error.hpp"
#include "malsig/features.hpp"
#include "malsig/fingerprint_store.hpp"
#include "malsig/knn_eval.hpp"
#include "malsig/png_export.hpp"
#include "malsig/service.hpp"
#include "malsig/sparse.hpp"
#include "malsig/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace malsig;

namespace {

json section(const json& cfg, const char* name) {
  return cfg.contains(name) && cfg.at(name).is_object() ? cfg.at(name) : json::object();
}

// Settings shared by verbs that extract descriptors.
struct FeatureFlags {
  std::string kind;
  std::size_t rp_dim = 0;
  std::uint64_t rp_seed = 0;
  std::size_t rp_length = 0;
};

void add_feature_flags(CLI::App* app, FeatureFlags& f) {
  app->add_option("--kind", f.kind, "Descriptor kind: gist | rp")->check(CLI::IsMember({"gist", "rp"}));
  app->add_option("--rp-dim", f.rp_dim, "Random-projection dimension");
  app->add_option("--rp-seed", f.rp_seed, "Random-projection seed");
  app->add_option("--rp-length", f.rp_length, "Signal length the projection expects");
}

FeatureConfig resolve_features(const json& cfg, const FeatureFlags& flags) {
  const json s = section(cfg, "features");
  FeatureConfig c;
  const std::string kind = flags.kind.empty() ? s.value("kind", std::string("gist")) : flags.kind;
  c.kind = descriptor_kind_from_string(kind);
  c.gist.image_size = s.value("image_size", c.gist.image_size);
  c.gist.grid = s.value("grid", c.gist.grid);
  c.gist.orientations_per_scale = s.value("orientations_per_scale", c.gist.orientations_per_scale);
  c.rp_dim = flags.rp_dim ? flags.rp_dim : s.value("rp_dim", c.rp_dim);
  c.rp_seed = flags.rp_seed ? flags.rp_seed : s.value("rp_seed", c.rp_seed);
  c.rp_length = flags.rp_length ? flags.rp_length : s.value("rp_length", c.rp_length);
  return c;
}

ConfidenceThresholds resolve_thresholds(const json& cfg, const std::vector<double>& flag) {
  ConfidenceThresholds t;
  std::vector<double> v = flag;
  const json s = section(cfg, "index");
  if (v.empty() && s.contains("thresholds")) v = s.at("thresholds").get<std::vector<double>>();
  if (!v.empty()) {
    if (v.size() != 3) throw Error(Errc::InvalidConfig, "thresholds need three values t1 t2 t3");
    t = {v[0], v[1], v[2]};
  }
  return t;
}

json thresholds_json(const ConfidenceThresholds& t) {
  return {{"very_high", t.very_high}, {"high", t.high}, {"low", t.low}};
}

void export_png(const fs::path& input, const ByteSignal& signal, const WidthPolicy& policy, const fs::path& dir) {
  fs::create_directories(dir);
  write_png(to_image(signal, policy), dir / (input.filename().string() + ".png"));
}

LabeledDataset dataset_from_store(const Store& store) {
  LabeledDataset data;
  data.items.reserve(store.records.size());
  std::uint64_t id = 0;
  for (const auto& r : store.records)
    data.items.push_back({id++, std::vector<double>(r.descriptor.begin(), r.descriptor.end()), r.label});
  return data;
}

std::vector<RawSample> raw_corpus(const CorpusManifest& manifest) {
  std::vector<RawSample> out;
  std::uint64_t id = 0;
  for (const auto& e : manifest.entries) {
    if (e.label.empty()) continue;
    out.push_back({id++, ByteSignal{read_file(manifest.root / e.path)}, e.label});
  }
  return out;
}

CorpusLayout parse_layout(const std::string& s) {
  if (s == "family-dirs") return CorpusLayout::FamilyDirs;
  if (s == "flat") return CorpusLayout::Flat;
  throw Error(Errc::InvalidConfig, "unknown layout '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"malsig - byte-image signatures, sparse classification and retrieval for binaries"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "TOML-style config file")->check(CLI::ExistingFile);

  // convert
  auto* convert = app.add_subcommand("convert", "Compute descriptors for files (JSON lines)");
  std::vector<std::string> convert_inputs;
  std::string convert_png;
  FeatureFlags convert_ff;
  convert->add_option("inputs", convert_inputs, "Input binaries")->required()->check(CLI::ExistingFile);
  convert->add_option("--export-png", convert_png, "Also write byte images into this directory");
  add_feature_flags(convert, convert_ff);

  // fingerprint
  auto* fingerprint = app.add_subcommand("fingerprint", "Fingerprint a corpus into a store");
  std::string fp_root, fp_out, fp_layout = "family-dirs", fp_labels, fp_png, fp_manifest;
  FeatureFlags fp_ff;
  fingerprint->add_option("root", fp_root, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  fingerprint->add_option("-o,--output", fp_out, "Store path")->required();
  fingerprint->add_option("--layout", fp_layout, "family-dirs | flat");
  fingerprint->add_option("--labels", fp_labels, "sha256<TAB>label file (flat layout)")->check(CLI::ExistingFile);
  fingerprint->add_option("--export-png", fp_png, "Also write byte images into this directory");
  fingerprint->add_option("--manifest", fp_manifest, "Write the corpus manifest JSON here");
  add_feature_flags(fingerprint, fp_ff);

  // index
  auto* index = app.add_subcommand("index", "Build the index over a store and report on it");
  std::string ix_store;
  bool ix_audit = false, ix_calibrate = false;
  std::size_t ix_leaf = 0;
  index->add_option("store", ix_store, "Store path")->required()->check(CLI::ExistingFile);
  index->add_flag("--audit", ix_audit, "Verify every ball contains its items");
  index->add_flag("--calibrate", ix_calibrate, "Derive confidence thresholds from labelled records");
  index->add_option("--leaf-size", ix_leaf, "Leaf size");

  // classify
  auto* classify = app.add_subcommand("classify", "Predict families for files against a store");
  std::string cl_store, cl_method = "nn";
  std::vector<std::string> cl_inputs;
  double cl_eps_rel = -1;
  classify->add_option("--store", cl_store, "Store path")->required()->check(CLI::ExistingFile);
  classify->add_option("--method", cl_method, "nn | src")->check(CLI::IsMember({"nn", "src"}));
  classify->add_option("--eps-rel", cl_eps_rel, "SRC tolerance relative to the query norm");
  classify->add_option("inputs", cl_inputs, "Query binaries")->required()->check(CLI::ExistingFile);

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Top-k nearest fingerprints for files");
  std::string rt_store;
  std::vector<std::string> rt_inputs;
  std::size_t rt_k = 0;
  std::vector<double> rt_thresholds;
  retrieve->add_option("--store", rt_store, "Store path")->required()->check(CLI::ExistingFile);
  retrieve->add_option("-k", rt_k, "Number of matches");
  retrieve->add_option("--thresholds", rt_thresholds, "Confidence thresholds t1 t2 t3")->expected(3);
  retrieve->add_option("inputs", rt_inputs, "Query binaries")->required()->check(CLI::ExistingFile);

  // eval
  auto* eval = app.add_subcommand("eval", "k-fold or 80/20 grid evaluation");
  std::string ev_root, ev_mode, ev_classifier, ev_out, ev_csv;
  bool ev_synthetic = false;
  std::size_t ev_folds = 0;
  std::uint64_t ev_seed = 0;
  FeatureFlags ev_ff;
  eval->add_option("root", ev_root, "Corpus with one directory per family")->check(CLI::ExistingDirectory);
  eval->add_flag("--synthetic", ev_synthetic, "Use the built-in synthetic 5-family corpus");
  eval->add_option("--mode", ev_mode, "kfold | grid")->check(CLI::IsMember({"kfold", "grid"}));
  eval->add_option("--classifier", ev_classifier, "nn | src (kfold)")->check(CLI::IsMember({"nn", "src"}));
  eval->add_option("--folds", ev_folds, "Number of folds");
  eval->add_option("--seed", ev_seed, "Split seed");
  eval->add_option("-o,--output", ev_out, "Write the JSON report here instead of stdout");
  eval->add_option("--csv", ev_csv, "Write grid results as CSV");
  add_feature_flags(eval, ev_ff);

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP query service over a store");
  std::string sv_store, sv_host;
  int sv_port = -1;
  std::vector<double> sv_thresholds;
  serve->add_option("--store", sv_store, "Store path")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--port", sv_port, "Port");
  serve->add_option("--thresholds", sv_thresholds, "Confidence thresholds t1 t2 t3")->expected(3);

  // export-png
  auto* png = app.add_subcommand("export-png", "Write byte images as PNG files");
  std::vector<std::string> png_inputs;
  std::string png_dir;
  png->add_option("inputs", png_inputs, "Input binaries")->required()->check(CLI::ExistingFile);
  png->add_option("-o,--out-dir", png_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = config_path.empty() ? json::object() : load_config(config_path);

    if (*convert) {
      const FeatureExtractor extractor(resolve_features(cfg, convert_ff));
      for (const auto& in : convert_inputs) {
        const auto raw = read_file(in);
        const auto result = extractor.extract(raw);
        const auto signal = to_signal(raw);
        json line = {{"path", in},
                     {"sha256", to_hex(sha256(raw))},
                     {"byte_length", raw.size()},
                     {"kind", to_string(extractor.config().kind)},
                     {"truncated", result.truncated},
                     {"descriptor", result.values}};
        if (extractor.config().kind == DescriptorKind::Gist) {
          const auto w = extractor.config().width_policy.width_for(raw.size());
          line["image"] = {{"width", w}, {"height", (raw.size() + w - 1) / w}};
        }
        if (!convert_png.empty()) export_png(in, signal, extractor.config().width_policy, convert_png);
        std::cout << line.dump() << '\n';
      }
      return 0;
    }

    if (*fingerprint) {
      const FeatureExtractor extractor(resolve_features(cfg, fp_ff));
      std::optional<OfflineLabelSource> labels;
      if (!fp_labels.empty()) labels.emplace(LabelCache::from_tsv(fp_labels));
      const auto manifest = ingest(fp_root, parse_layout(fp_layout), labels ? &*labels : nullptr);
      for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << '\n';
      if (!fp_manifest.empty()) std::ofstream(fp_manifest) << manifest.to_json().dump(2) << '\n';
      if (manifest.entries.empty()) {
        std::cerr << "warning: corpus is empty, no store written\n";
        return 0;
      }
      FingerprintOptions options;
      if (!fp_png.empty()) options.export_png_dir = fp_png;
      options.progress = [](std::size_t done, std::size_t total) {
        if (done == total || done % 100 == 0) std::cerr << "\rfingerprinted " << done << '/' << total << std::flush;
      };
      const auto summary = fingerprint_corpus(manifest, extractor, fp_out, options);
      std::cerr << '\n';
      for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& e : summary.errors) std::cerr << "error: " << e << '\n';
      std::cout << json{{"store", fp_out},
                        {"records", summary.records},
                        {"errors", summary.errors},
                        {"feature_config", extractor.config().to_json()}}
                       .dump(2)
                << '\n';
      return summary.errors.empty() ? 0 : 2;
    }

    if (*index) {
      auto store = store_load(ix_store);
      const std::size_t leaf = ix_leaf ? ix_leaf : section(cfg, "index").value("leaf_size", std::size_t{32});
      const BallTree tree(std::move(store.records), leaf);
      json report = {{"count", tree.size()},
                     {"dimension", tree.dimension()},
                     {"nodes", tree.nodes().size()},
                     {"leaf_size", leaf},
                     {"descriptor_kind", to_string(store.metadata.kind)},
                     {"feature_config", store.metadata.feature_config}};
      if (ix_audit) report["audit_violations"] = tree.audit();
      if (ix_calibrate) report["calibrated_thresholds"] = thresholds_json(calibrate_thresholds(tree));
      std::cout << report.dump(2) << '\n';
      return ix_audit && report["audit_violations"].get<std::size_t>() != 0 ? 2 : 0;
    }

    if (*classify) {
      const auto store = store_load(cl_store);
      const FeatureExtractor extractor(FeatureConfig::from_json(store.metadata.feature_config));
      const auto data = dataset_from_store(store);
      std::optional<Dictionary> dict;
      std::optional<L1Solver> solver;
      SrcOptions src = SrcOptions::descriptors();
      if (cl_eps_rel >= 0) src.eps_rel = cl_eps_rel;
      else src.eps_rel = section(cfg, "classify").value("eps_rel", src.eps_rel);
      if (cl_method == "src") {
        std::vector<LabeledVector> cols;
        for (const auto& it : data.items) cols.push_back({it.features, it.label});
        dict.emplace(build_dictionary(cols));
        solver.emplace(*dict, src.solver);
      }
      for (const auto& in : cl_inputs) {
        const auto raw = read_file(in);
        const auto w = extractor.extract(raw).values;
        check_query_dimension(store.metadata, w.size());
        json line = {{"path", in}, {"method", cl_method}};
        if (cl_method == "nn") {
          line["family"] = classify_nn(data, w);
        } else {
          const auto d = classify_src(*solver, Eigen::Map<const Eigen::VectorXd>(w.data(), w.size()), src);
          line["family"] = d.family;
          line["tie"] = d.tie;
          line["converged"] = d.coefficients.converged;
          json residuals = json::object();
          for (std::size_t k = 0; k < d.residuals.size(); ++k) residuals[dict->families[k]] = d.residuals[k];
          line["residuals"] = residuals;
        }
        std::cout << line.dump() << '\n';
      }
      return 0;
    }

    if (*retrieve) {
      auto store = store_load(rt_store);
      const FeatureExtractor extractor(FeatureConfig::from_json(store.metadata.feature_config));
      const std::size_t k = rt_k ? rt_k : section(cfg, "retrieve").value("k", std::size_t{10});
      const RetrievalIndex index(std::move(store.records), resolve_thresholds(cfg, rt_thresholds));
      for (const auto& in : rt_inputs) {
        const auto result = extractor.extract(read_file(in));
        const std::vector<float> q(result.values.begin(), result.values.end());
        json line = index.query(q, k).to_json();
        line["path"] = in;
        line["truncated"] = result.truncated;
        std::cout << line.dump() << '\n';
      }
      return 0;
    }

    if (*eval) {
      const json s = section(cfg, "eval");
      const std::string mode = !ev_mode.empty() ? ev_mode : s.value("mode", std::string("kfold"));
      const std::uint64_t seed = ev_seed ? ev_seed : s.value("seed", std::uint64_t{1});
      if (ev_root.empty() && !ev_synthetic) throw Error(Errc::InvalidConfig, "eval needs a corpus root or --synthetic");

      std::vector<RawSample> corpus;
      json source;
      if (ev_synthetic) {
        synthetic::VariantCorpusOptions o;
        corpus = synthetic::variant_corpus(o);
        source = {{"synthetic", {{"families", o.families}, {"per_family", o.per_family}, {"length", o.length},
                                 {"mutation_rate", o.mutation_rate}, {"seed", o.seed}}}};
      } else {
        corpus = raw_corpus(ingest(ev_root, CorpusLayout::FamilyDirs));
        source = {{"root", ev_root}};
      }

      json report;
      if (mode == "kfold") {
        const FeatureExtractor extractor(resolve_features(cfg, ev_ff));
        const std::size_t folds = ev_folds ? ev_folds : s.value("folds", std::size_t{10});
        const std::string clf = !ev_classifier.empty() ? ev_classifier : s.value("classifier", std::string("nn"));
        LabeledDataset data;
        for (const auto& r : corpus) data.items.push_back({r.id, extractor.extract(r.signal.bytes).values, r.label});
        ClassifierOptions options;
        options.kind = clf == "src" ? ClassifierKind::Src : ClassifierKind::NearestNeighbor;
        options.src.eps_rel = s.value("eps_rel", options.src.eps_rel);
        auto r = kfold(data, folds, seed, options);
        report = r.to_json();
        report["config"] = {{"mode", mode}, {"folds", folds}, {"seed", seed}, {"classifier", clf},
                            {"features", extractor.config().to_json()}, {"eps_rel", options.src.eps_rel},
                            {"source", source}};
      } else {
        GridConfig g;
        g.split_seed = seed;
        g.train_frac = s.value("train_frac", g.train_frac);
        g.projection_seed = s.value("projection_seed", g.projection_seed);
        g.dims = s.value("dims", g.dims);
        g.src.eps_rel = s.value("eps_rel", g.src.eps_rel);
        g.balance_families = s.value("balance_families", g.balance_families);
        const auto cells = holdout_grid(corpus, g);
        json rows = json::array();
        for (const auto& c : cells)
          rows.push_back({{"feature", to_string(c.feature)}, {"classifier", to_string(c.classifier)},
                          {"dim", c.dim}, {"report", c.report.to_json()}});
        report = {{"cells", rows},
                  {"config", {{"mode", mode}, {"split_seed", g.split_seed}, {"train_frac", g.train_frac},
                              {"projection_seed", g.projection_seed}, {"dims", g.dims},
                              {"eps_rel", g.src.eps_rel}, {"balance_families", g.balance_families},
                              {"source", source}}}};
        if (!ev_csv.empty()) std::ofstream(ev_csv) << grid_csv(cells);
      }
      if (ev_out.empty()) std::cout << report.dump(2) << '\n';
      else std::ofstream(ev_out) << report.dump(2) << '\n';
      return 0;
    }

    if (*serve) {
      const json s = section(cfg, "serve");
      ServiceOptions options;
      options.thresholds = resolve_thresholds(cfg, sv_thresholds);
      options.max_body_bytes = s.value("max_body_bytes", options.max_body_bytes);
      options.default_k = s.value("k", options.default_k);
      options.threads = s.value("threads", options.threads);
      const std::string host = !sv_host.empty() ? sv_host : s.value("host", std::string("127.0.0.1"));
      const int port = sv_port >= 0 ? sv_port : s.value("port", 8080);
      QueryService service(store_load(sv_store), options);
      std::cerr << "listening on " << host << ':' << port << '\n';
      if (!service.listen(host, port)) {
        std::cerr << "error: cannot bind " << host << ':' << port << '\n';
        return 1;
      }
      return 0;
    }

    if (*png) {
      const FeatureConfig features = resolve_features(cfg, {});
      for (const auto& in : png_inputs) export_png(in, to_signal(read_file(in)), features.width_policy, png_dir);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
