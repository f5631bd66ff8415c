#ifndef CBS_CACHE_HPP
#define CBS_CACHE_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <list>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cbs/text.hpp"

namespace cbs {

using Timestamp = std::chrono::steady_clock::time_point;
using Duration = std::chrono::steady_clock::duration;

// Canonical query identity: the sorted keywords joined by single spaces.
// Keywords contain no spaces, so distinct keyword lists cannot collide.
struct CacheKey {
  std::string canonical;

  bool empty() const { return canonical.empty(); }
  bool operator==(const CacheKey&) const = default;
};

inline CacheKey make_cache_key(const KeywordSet& query) {
  std::string joined;
  for (const auto& kw : query.keywords) {
    if (!joined.empty()) joined += ' ';
    joined += kw;
  }
  return {std::move(joined)};
}

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  std::size_t size = 0;
  std::size_t capacity = 0;

  bool operator==(const CacheStats&) const = default;
};

// LRU with TTL. Expired entries are removed lazily on access and do not
// count as evictions; evictions are capacity-driven only. All operations
// are linearizable, counters are exact.
template <typename Value>
class LruTtlCache {
 public:
  struct Snapshot {
    std::string key;
    Value value;
    Timestamp inserted_at;
    Timestamp last_hit_at;
    std::uint64_t hit_count;
  };

  LruTtlCache(std::size_t capacity, Duration ttl) : ttl_(ttl) {
    if (capacity == 0) throw std::invalid_argument("cache capacity must be >= 1");
    capacity_ = capacity;
  }

  std::optional<Value> get(const CacheKey& key, Timestamp now) {
    std::lock_guard lock(mu_);
    auto it = map_.find(key.canonical);
    if (it == map_.end()) {
      ++stats_.misses;
      return std::nullopt;
    }
    auto node = it->second;
    if (now - node->inserted_at > ttl_) {
      map_.erase(it);
      lru_.erase(node);
      ++stats_.misses;
      return std::nullopt;
    }
    ++stats_.hits;
    ++node->hit_count;
    node->last_hit_at = now;
    lru_.splice(lru_.begin(), lru_, node);
    return node->value;
  }

  // Empty keys are rejected: the engine never caches fallbacks, so an empty
  // key here is a caller bug.
  void put(const CacheKey& key, Value value, Timestamp now) {
    if (key.empty()) throw std::invalid_argument("cache key must not be empty");
    std::lock_guard lock(mu_);
    auto it = map_.find(key.canonical);
    if (it != map_.end()) {
      auto node = it->second;
      node->value = std::move(value);
      node->inserted_at = now;
      node->last_hit_at = now;
      node->hit_count = 0;
      lru_.splice(lru_.begin(), lru_, node);
      return;
    }
    if (lru_.size() == capacity_) {
      map_.erase(lru_.back().key);
      lru_.pop_back();
      ++stats_.evictions;
    }
    lru_.push_front(Node{key.canonical, std::move(value), now, now, 0});
    map_.emplace(lru_.front().key, lru_.begin());
  }

  CacheStats stats() const {
    std::lock_guard lock(mu_);
    CacheStats s = stats_;
    s.size = lru_.size();
    s.capacity = capacity_;
    return s;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return lru_.size();
  }

  // Most-recently-used first.
  std::vector<Snapshot> snapshot() const {
    std::lock_guard lock(mu_);
    std::vector<Snapshot> out;
    out.reserve(lru_.size());
    for (const auto& n : lru_)
      out.push_back({n.key, n.value, n.inserted_at, n.last_hit_at, n.hit_count});
    return out;
  }

 private:
  struct Node {
    std::string key;
    Value value;
    Timestamp inserted_at;
    Timestamp last_hit_at;
    std::uint64_t hit_count;
  };

  mutable std::mutex mu_;
  std::list<Node> lru_; // front = most recent
  std::unordered_map<std::string, typename std::list<Node>::iterator> map_;
  CacheStats stats_;
  std::size_t capacity_;
  Duration ttl_;
};

} // namespace cbs

#endif // CBS_CACHE_HPP
