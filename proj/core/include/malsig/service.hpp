#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "malsig/ball_tree.hpp"
#include "malsig/fingerprint_store.hpp"

namespace malsig {

struct ServiceOptions {
  std::size_t max_body_bytes = std::size_t{32} << 20;
  std::size_t default_k = 10;
  std::size_t max_k = 1000;
  std::size_t leaf_size = 32;
  ConfidenceThresholds thresholds;
  std::size_t threads = 8;
};

// HTTP front end over an immutable, loaded fingerprint index.
//
//   POST /query[?k=N]  raw binary body -> MatchResult JSON
//   GET  /stats        record count, dimension, feature config, uptime
//   GET  /health       {"status": "ok" | "building"}
//
// The index is built on a background thread after construction; queries
// answer 503 until it is ready. Empty bodies get 400, bodies above
// max_body_bytes get 413.
class QueryService {
 public:
  QueryService(Store store, ServiceOptions options = {});
  ~QueryService();
  QueryService(const QueryService&) = delete;
  QueryService& operator=(const QueryService&) = delete;

  // Blocking. Returns false if the socket could not be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it (or -1); call listen_after_bind().
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();

  bool ready() const;
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace malsig
