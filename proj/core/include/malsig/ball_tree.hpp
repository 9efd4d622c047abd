#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "malsig/hashing.hpp"

namespace malsig {

struct FingerprintRecord {
  Sha256 sha256{};
  std::string label;
  std::vector<float> descriptor;
  std::uint64_t byte_length = 0;
  std::int64_t added_at = 0;  // unix seconds

  bool operator==(const FingerprintRecord&) const = default;
};

struct Neighbor {
  std::size_t index;  // into the tree's record list
  double distance;
};

struct QueryStats {
  std::size_t nodes_visited = 0;
  std::size_t distance_evaluations = 0;
};

// Euclidean distance accumulated in double, in coordinate order. Both the
// tree and the brute-force scan use this, so equal inputs give equal bits.
double euclidean(std::span<const float> a, std::span<const float> b);

// Exact k-nearest-neighbour index. Internal nodes split the widest-spread
// coordinate at its median; every node stores the centroid of its items and
// the largest item distance from it.
class BallTree {
 public:
  struct Node {
    std::vector<double> centroid;
    double radius = 0.0;
    std::size_t begin = 0;  // range into order()
    std::size_t end = 0;
    std::int64_t left = -1;
    std::int64_t right = -1;

    bool leaf() const noexcept { return left < 0; }
  };

  // Throws EmptyIndex for no records, DimensionMismatch for ragged records.
  explicit BallTree(std::vector<FingerprintRecord> records, std::size_t leaf_size = 32);

  // k nearest records ordered by (distance, sha256); k is clamped to size().
  std::vector<Neighbor> query(std::span<const float> q, std::size_t k, QueryStats* stats = nullptr) const;
  std::vector<Neighbor> brute_force(std::span<const float> q, std::size_t k) const;

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t dimension() const noexcept { return dim_; }
  std::size_t leaf_size() const noexcept { return leaf_size_; }
  const FingerprintRecord& record(std::size_t i) const { return records_[i]; }
  std::span<const FingerprintRecord> records() const noexcept { return records_; }
  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::span<const std::size_t> order() const noexcept { return order_; }

  // Checks ball containment for every node and that leaves partition the
  // items. Returns the number of violations (0 when the tree is sound).
  std::size_t audit() const;

 private:
  std::int64_t build(std::size_t begin, std::size_t end);
  std::span<const float> point(std::size_t record) const {
    return {records_[record].descriptor.data(), dim_};
  }

  std::vector<FingerprintRecord> records_;
  std::size_t dim_ = 0;
  std::size_t leaf_size_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

enum class Confidence { VeryHigh, High, Low, VeryLow };
std::string to_string(Confidence c);

// Defaults come from calibrate_thresholds on a held-out synthetic GIST corpus
// (8 families x 60 variants, 4 KiB each, 2% byte mutations). Real corpora
// should be recalibrated with `malsig index --calibrate`.
struct ConfidenceThresholds {
  double very_high = 10.6;  // t1
  double high = 16.0;       // t2
  double low = 21.3;        // t3
};

// d <= t1 VeryHigh, d <= t2 High, d <= t3 Low, else VeryLow.
Confidence grade_confidence(double top1_distance, const ConfidenceThresholds& t);

// t1 = 99th percentile of each labelled record's distance to its nearest
// same-family neighbour, t3 = median distance to the nearest other-family
// record, t2 halfway between (all forced non-decreasing).
ConfidenceThresholds calibrate_thresholds(const BallTree& tree);

struct Match {
  std::string sha256;
  std::string label;
  double distance;
};

struct MatchResult {
  std::vector<Match> matches;
  Confidence confidence = Confidence::VeryLow;
  std::chrono::nanoseconds query_time{0};

  nlohmann::json to_json() const;
};

class RetrievalIndex {
 public:
  RetrievalIndex(std::vector<FingerprintRecord> records, ConfidenceThresholds thresholds = {},
                 std::size_t leaf_size = 32);

  // Throws DimensionMismatch; k >= 1.
  MatchResult query(std::span<const float> q, std::size_t k, QueryStats* stats = nullptr) const;

  const BallTree& tree() const noexcept { return tree_; }
  const ConfidenceThresholds& thresholds() const noexcept { return thresholds_; }

 private:
  BallTree tree_;
  ConfidenceThresholds thresholds_;
};

}  // namespace malsig
