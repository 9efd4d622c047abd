#include "malsig/service.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <thread>

#include "malsig/error.hpp"
#include "malsig/features.hpp"

namespace malsig {

struct QueryService::Impl {
  Impl(Store s, ServiceOptions o)
      : options(std::move(o)),
        metadata(std::move(s.metadata)),
        extractor(FeatureConfig::from_json(metadata.feature_config)),
        started(std::chrono::steady_clock::now()),
        record_count(s.records.size()) {
    if (extractor.dimension() != metadata.dimension)
      throw Error(Errc::DimensionMismatch, "store dimension disagrees with its feature config");
    builder = std::thread([this, records = std::move(s.records)]() mutable {
      try {
        auto built = std::make_unique<RetrievalIndex>(std::move(records), options.thresholds, options.leaf_size);
        std::lock_guard lock(mutex);
        index = std::move(built);
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        build_error = e.what();
      }
      cv.notify_all();
    });
    routes();
  }

  ~Impl() {
    server.stop();
    if (builder.joinable()) builder.join();
  }

  const RetrievalIndex* current() const {
    std::lock_guard lock(mutex);
    return index.get();
  }

  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void routes() {
    server.set_payload_max_length(options.max_body_bytes);
    server.new_task_queue = [n = options.threads] { return new httplib::ThreadPool(n); };

    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", current() ? "ok" : "building"}});
    });

    server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
      const auto uptime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      nlohmann::json body = {{"count", record_count},
                             {"dimension", metadata.dimension},
                             {"descriptor_kind", to_string(metadata.kind)},
                             {"feature_config", metadata.feature_config},
                             {"uptime_seconds", uptime},
                             {"ready", current() != nullptr}};
      if (const auto* idx = current()) {
        body["thresholds"] = {idx->thresholds().very_high, idx->thresholds().high, idx->thresholds().low};
        body["nodes"] = idx->tree().nodes().size();
      }
      send_json(res, 200, body);
    });

    server.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
      const auto* idx = current();
      if (!idx) {
        std::lock_guard lock(mutex);
        send_json(res, 503, {{"error", build_error.empty() ? "index is building" : build_error}});
        return;
      }
      if (req.body.empty()) {
        send_json(res, 400, {{"error", "empty body"}});
        return;
      }
      std::size_t k = options.default_k;
      if (req.has_param("k")) {
        try {
          k = std::stoul(req.get_param_value("k"));
        } catch (const std::exception&) {
          k = 0;
        }
        if (k < 1 || k > options.max_k) {
          send_json(res, 400, {{"error", "k must be in [1, " + std::to_string(options.max_k) + "]"}});
          return;
        }
      }
      try {
        const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
        const auto features = extractor.extract({data, req.body.size()});
        const std::vector<float> q(features.values.begin(), features.values.end());
        auto body = idx->query(q, k).to_json();
        body["truncated"] = features.truncated;
        body["byte_length"] = req.body.size();
        send_json(res, 200, body);
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", e.what()}});
      }
    });
  }

  ServiceOptions options;
  StoreMetadata metadata;
  FeatureExtractor extractor;
  std::chrono::steady_clock::time_point started;
  std::size_t record_count;

  mutable std::mutex mutex;
  mutable std::condition_variable cv;
  std::unique_ptr<RetrievalIndex> index;
  std::string build_error;
  std::thread builder;
  httplib::Server server;
};

QueryService::QueryService(Store store, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(store), std::move(options))) {}

QueryService::~QueryService() = default;

bool QueryService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int QueryService::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool QueryService::listen_after_bind() { return impl_->server.listen_after_bind(); }

void QueryService::stop() { impl_->server.stop(); }

bool QueryService::ready() const { return impl_->current() != nullptr; }

void QueryService::wait_until_ready() const {
  std::unique_lock lock(impl_->mutex);
  impl_->cv.wait(lock, [&] { return impl_->index != nullptr || !impl_->build_error.empty(); });
}

}  // namespace malsig
