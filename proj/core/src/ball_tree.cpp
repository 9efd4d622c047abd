#include "malsig/ball_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "malsig/error.hpp"

namespace malsig {

double euclidean(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

namespace {

double distance_to_centroid(std::span<const double> c, std::span<const float> p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = c[i] - static_cast<double>(p[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

struct Candidate {
  double distance;
  std::size_t index;
  const Sha256* sha;
};

// Strict weak order on (distance, sha256).
struct Closer {
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.distance != b.distance) return a.distance < b.distance;
    return *a.sha < *b.sha;
  }
};

class KBest {
 public:
  explicit KBest(std::size_t k) : k_(k) {}

  bool full() const { return heap_.size() == k_; }
  double worst() const { return heap_.top().distance; }

  void offer(const Candidate& c) {
    if (heap_.size() < k_) {
      heap_.push(c);
    } else if (Closer{}(c, heap_.top())) {
      heap_.pop();
      heap_.push(c);
    }
  }

  std::vector<Neighbor> sorted() {
    std::vector<Candidate> all;
    while (!heap_.empty()) {
      all.push_back(heap_.top());
      heap_.pop();
    }
    std::sort(all.begin(), all.end(), Closer{});
    std::vector<Neighbor> out;
    for (const auto& c : all) out.push_back({c.index, c.distance});
    return out;
  }

 private:
  std::size_t k_;
  std::priority_queue<Candidate, std::vector<Candidate>, Closer> heap_;
};

}  // namespace

BallTree::BallTree(std::vector<FingerprintRecord> records, std::size_t leaf_size)
    : records_(std::move(records)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  if (records_.empty()) throw Error(Errc::EmptyIndex, "cannot index zero records");
  dim_ = records_.front().descriptor.size();
  if (dim_ == 0) throw Error(Errc::DimensionMismatch, "descriptors are empty");
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (records_[i].descriptor.size() != dim_)
      throw Error(Errc::DimensionMismatch, "record " + std::to_string(i) + " has dimension " +
                                               std::to_string(records_[i].descriptor.size()) +
                                               ", expected " + std::to_string(dim_));
  order_.resize(records_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * records_.size() / leaf_size_ + 1);
  build(0, order_.size());
}

std::int64_t BallTree::build(std::size_t begin, std::size_t end) {
  const auto id = static_cast<std::int64_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  node.centroid.assign(dim_, 0.0);
  for (std::size_t i = begin; i < end; ++i) {
    const auto p = point(order_[i]);
    for (std::size_t d = 0; d < dim_; ++d) node.centroid[d] += p[d];
  }
  const double inv = 1.0 / static_cast<double>(end - begin);
  for (auto& c : node.centroid) c *= inv;
  for (std::size_t i = begin; i < end; ++i)
    node.radius = std::max(node.radius, distance_to_centroid(node.centroid, point(order_[i])));

  if (end - begin > leaf_size_) {
    std::size_t split_dim = 0;
    float best_spread = -1.0f;
    for (std::size_t d = 0; d < dim_; ++d) {
      float lo = std::numeric_limits<float>::infinity(), hi = -lo;
      for (std::size_t i = begin; i < end; ++i) {
        const float v = records_[order_[i]].descriptor[d];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        split_dim = d;
      }
    }
    const std::size_t mid = begin + (end - begin) / 2;
    auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
    std::nth_element(first, order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       const float va = records_[a].descriptor[split_dim];
                       const float vb = records_[b].descriptor[split_dim];
                       return va != vb ? va < vb : a < b;
                     });
    node.left = build(begin, mid);
    node.right = build(mid, end);
  }
  nodes_[static_cast<std::size_t>(id)] = std::move(node);
  return id;
}

std::vector<Neighbor> BallTree::query(std::span<const float> q, std::size_t k, QueryStats* stats) const {
  if (q.size() != dim_)
    throw Error(Errc::DimensionMismatch, "query has dimension " + std::to_string(q.size()) +
                                             ", index has " + std::to_string(dim_));
  if (k == 0) throw Error(Errc::InvalidConfig, "k must be at least 1");
  k = std::min(k, records_.size());
  KBest best(k);
  QueryStats local;

  auto visit = [&](auto&& self, std::int64_t id) -> void {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    ++local.nodes_visited;
    if (node.leaf()) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t r = order_[i];
        ++local.distance_evaluations;
        best.offer({euclidean(point(r), q), r, &records_[r].sha256});
      }
      return;
    }
    const Node& l = nodes_[static_cast<std::size_t>(node.left)];
    const Node& rt = nodes_[static_cast<std::size_t>(node.right)];
    const double dl = distance_to_centroid(l.centroid, q);
    const double dr = distance_to_centroid(rt.centroid, q);
    auto maybe = [&](std::int64_t child, const Node& c, double dc) {
      // Lower bound on any item distance; the slack absorbs rounding in the
      // triangle inequality so an equal-distance tie is never pruned.
      const double bound = dc - c.radius;
      if (best.full() && bound > best.worst() * (1.0 + 1e-12) + 1e-12) return;
      self(self, child);
    };
    if (dl <= dr) {
      maybe(node.left, l, dl);
      maybe(node.right, rt, dr);
    } else {
      maybe(node.right, rt, dr);
      maybe(node.left, l, dl);
    }
  };
  visit(visit, 0);
  if (stats) *stats = local;
  return best.sorted();
}

std::vector<Neighbor> BallTree::brute_force(std::span<const float> q, std::size_t k) const {
  if (q.size() != dim_) throw Error(Errc::DimensionMismatch, "query dimension mismatch");
  std::vector<Candidate> all;
  all.reserve(records_.size());
  for (std::size_t r = 0; r < records_.size(); ++r)
    all.push_back({euclidean(point(r), q), r, &records_[r].sha256});
  std::sort(all.begin(), all.end(), Closer{});
  all.resize(std::min(k, all.size()));
  std::vector<Neighbor> out;
  for (const auto& c : all) out.push_back({c.index, c.distance});
  return out;
}

std::size_t BallTree::audit() const {
  std::size_t violations = 0;
  std::vector<int> covered(records_.size(), 0);
  for (const auto& node : nodes_) {
    for (std::size_t i = node.begin; i < node.end; ++i)
      if (distance_to_centroid(node.centroid, point(order_[i])) > node.radius) ++violations;
    if (node.leaf()) {
      for (std::size_t i = node.begin; i < node.end; ++i) ++covered[order_[i]];
    } else {
      const auto& l = nodes_[static_cast<std::size_t>(node.left)];
      const auto& r = nodes_[static_cast<std::size_t>(node.right)];
      if (l.begin != node.begin || l.end != r.begin || r.end != node.end) ++violations;
    }
  }
  for (int c : covered)
    if (c != 1) ++violations;
  return violations;
}

std::string to_string(Confidence c) {
  switch (c) {
    case Confidence::VeryHigh: return "VeryHigh";
    case Confidence::High: return "High";
    case Confidence::Low: return "Low";
    case Confidence::VeryLow: return "VeryLow";
  }
  return "VeryLow";
}

Confidence grade_confidence(double d, const ConfidenceThresholds& t) {
  if (d <= t.very_high) return Confidence::VeryHigh;
  if (d <= t.high) return Confidence::High;
  if (d <= t.low) return Confidence::Low;
  return Confidence::VeryLow;
}

namespace {

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

}  // namespace

ConfidenceThresholds calibrate_thresholds(const BallTree& tree) {
  std::vector<double> intra, inter;
  const std::size_t k = std::min<std::size_t>(tree.size(), 16);
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& rec = tree.record(i);
    if (rec.label.empty()) continue;
    double same = -1.0, other = -1.0;
    for (const auto& n : tree.query(rec.descriptor, k)) {
      if (n.index == i) continue;
      const auto& label = tree.record(n.index).label;
      if (label.empty()) continue;
      if (label == rec.label && same < 0) same = n.distance;
      if (label != rec.label && other < 0) other = n.distance;
    }
    if (same >= 0) intra.push_back(same);
    if (other >= 0) inter.push_back(other);
  }
  ConfidenceThresholds t;
  t.very_high = percentile(intra, 0.99);
  t.low = std::max(t.very_high, inter.empty() ? 2.0 * t.very_high : percentile(inter, 0.5));
  t.high = 0.5 * (t.very_high + t.low);
  return t;
}

nlohmann::json MatchResult::to_json() const {
  nlohmann::json matches_json = nlohmann::json::array();
  for (const auto& m : matches)
    matches_json.push_back({{"sha256", m.sha256}, {"label", m.label}, {"distance", m.distance}});
  return {{"matches", matches_json},
          {"confidence", to_string(confidence)},
          {"query_time_ms", std::chrono::duration<double, std::milli>(query_time).count()}};
}

RetrievalIndex::RetrievalIndex(std::vector<FingerprintRecord> records, ConfidenceThresholds thresholds,
                               std::size_t leaf_size)
    : tree_(std::move(records), leaf_size), thresholds_(thresholds) {
  if (!(thresholds_.very_high >= 0 && thresholds_.very_high <= thresholds_.high &&
        thresholds_.high <= thresholds_.low))
    throw Error(Errc::InvalidConfig, "confidence thresholds must satisfy 0 <= t1 <= t2 <= t3");
}

MatchResult RetrievalIndex::query(std::span<const float> q, std::size_t k, QueryStats* stats) const {
  const auto start = std::chrono::steady_clock::now();
  const auto hits = tree_.query(q, k, stats);
  MatchResult result;
  for (const auto& h : hits) {
    const auto& rec = tree_.record(h.index);
    result.matches.push_back({to_hex(rec.sha256), rec.label, h.distance});
  }
  result.confidence = grade_confidence(hits.front().distance, thresholds_);
  result.query_time = std::chrono::steady_clock::now() - start;
  return result;
}

}  // namespace malsig
