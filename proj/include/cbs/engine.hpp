#ifndef CBS_ENGINE_HPP
#define CBS_ENGINE_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cbs/cache.hpp"
#include "cbs/kb.hpp"
#include "cbs/matcher.hpp"
#include "cbs/text.hpp"

namespace cbs {

enum class ReplyKind { advice, fallback };

struct Reply {
  std::string text;
  ReplyKind kind = ReplyKind::fallback;
  std::optional<std::string> entry_id;
  std::optional<std::string> topic_name;
  std::optional<double> score;
  std::vector<std::pair<std::string, std::string>> related; // (entry_id, topic)

  bool operator==(const Reply&) const = default;
};

struct EngineConfig {
  MatchConfig match;
  std::size_t cache_capacity = 1024;
  std::chrono::seconds cache_ttl = std::chrono::hours(24);
  std::string fallback_text =
      "Sorry, I don't have advice on that yet. Try rephrasing your question.";
  bool cache_enabled = true;
};

struct EngineMetrics {
  std::uint64_t requests = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t searches = 0;
  std::uint64_t entries_scored = 0;
  std::uint64_t fallbacks = 0;

  bool operator==(const EngineMetrics&) const = default;
};

// Steps of one request, in execution order.
enum class EngineEvent {
  extract,
  cache_get_hit,
  cache_get_miss,
  search,
  formulate,
  fallback,
  cache_put,
};

inline const char* to_string(EngineEvent e) {
  switch (e) {
    case EngineEvent::extract: return "extract";
    case EngineEvent::cache_get_hit: return "cache_get(hit)";
    case EngineEvent::cache_get_miss: return "cache_get(miss)";
    case EngineEvent::search: return "search";
    case EngineEvent::formulate: return "formulate";
    case EngineEvent::fallback: return "fallback";
    case EngineEvent::cache_put: return "cache_put";
  }
  return "?";
}

struct EntryLocation {
  const Topic* topic = nullptr;
  const AdviceEntry* entry = nullptr;
};

inline std::optional<EntryLocation> find_entry(const KnowledgeBase& kb,
                                               const std::string& id) {
  for (const auto& topic : kb.topics)
    for (const auto& entry : topic.entries)
      if (entry.id == id) return EntryLocation{&topic, &entry};
  return std::nullopt;
}

inline Reply fallback_reply(const EngineConfig& cfg) {
  Reply r;
  r.kind = ReplyKind::fallback;
  r.text = cfg.fallback_text;
  return r;
}

// Fixed reply template: topic header, blank line, advice body of the top
// match; when there is more to point at, a "Related:" line with up to two
// further matches plus the top match's see_also entries, deduplicated.
inline Reply formulate_reply(const std::vector<MatchResult>& matches,
                             const KnowledgeBase& kb) {
  if (matches.empty())
    throw std::invalid_argument("formulate_reply requires at least one match");

  const MatchResult& top = matches[0];
  const auto top_loc = find_entry(kb, top.entry_id);
  if (!top_loc)
    throw std::invalid_argument("match references unknown entry id \"" +
                                top.entry_id + "\"");

  Reply r;
  r.kind = ReplyKind::advice;
  r.entry_id = top.entry_id;
  r.topic_name = top.topic_name;
  r.score = top.score;

  const auto add_related = [&](const std::string& id, const std::string& topic) {
    if (id == top.entry_id) return;
    for (const auto& [seen, _] : r.related)
      if (seen == id) return;
    r.related.emplace_back(id, topic);
  };
  for (std::size_t i = 1; i < matches.size() && i <= 2; ++i)
    add_related(matches[i].entry_id, matches[i].topic_name);
  for (const auto& id : top_loc->entry->see_also)
    if (const auto loc = find_entry(kb, id)) add_related(id, loc->topic->name);

  r.text = "== " + top.topic_name + " ==\n\n" + top_loc->entry->advice;
  if (!r.related.empty()) {
    r.text += "\n\nRelated: ";
    for (std::size_t i = 0; i < r.related.size(); ++i) {
      if (i > 0) r.text += ", ";
      r.text += r.related[i].first + " (" + r.related[i].second + ")";
    }
  }
  return r;
}

// Request flow: extract keywords, check the cache, on a miss search the KB,
// formulate or fall back, cache advice replies. The reply is a pure
// function of (KB, utterance, config); the cache can only change latency,
// never content.
class Engine {
 public:
  explicit Engine(KnowledgeBase kb, EngineConfig cfg = {},
                  StopwordList stops = StopwordList::default_english())
      : kb_(std::move(kb)),
        cfg_(std::move(cfg)),
        stops_(std::move(stops)),
        cache_(cfg_.cache_capacity, cfg_.cache_ttl) {
    if (cfg_.fallback_text.empty())
      throw std::invalid_argument("fallback_text must not be empty");
    if (!(cfg_.match.min_score > 0.0 && cfg_.match.min_score <= 1.0))
      throw std::invalid_argument("min_score must be in (0, 1]");
    if (cfg_.match.max_results < 1)
      throw std::invalid_argument("max_results must be >= 1");
    index_ = build_index(kb_); // throws KbError on an invalid KB
  }

  Reply handle_request(std::string_view utterance, Timestamp now,
                       std::vector<EngineEvent>* trace = nullptr) {
    const auto emit = [&](EngineEvent e) {
      if (trace) trace->push_back(e);
    };

    emit(EngineEvent::extract);
    const KeywordSet query = extract_keywords(utterance, stops_);
    const CacheKey key = make_cache_key(query);

    if (cfg_.cache_enabled) {
      if (auto cached = cache_.get(key, now)) {
        ++cache_hits_;
        ++requests_;
        emit(EngineEvent::cache_get_hit);
        return *cached;
      }
      emit(EngineEvent::cache_get_miss);
    }

    ++searches_;
    ++requests_;
    SearchStats stats;
    const auto matches = search(index_, kb_, query, cfg_.match, &stats);
    entries_scored_ += stats.entries_scored;
    emit(EngineEvent::search);

    Reply reply;
    if (matches.empty()) {
      ++fallbacks_;
      emit(EngineEvent::fallback);
      reply = fallback_reply(cfg_);
    } else {
      emit(EngineEvent::formulate);
      reply = formulate_reply(matches, kb_);
    }

    if (cfg_.cache_enabled && reply.kind == ReplyKind::advice && !key.empty()) {
      cache_.put(key, reply, now);
      emit(EngineEvent::cache_put);
    }
    return reply;
  }

  EngineMetrics metrics() const {
    EngineMetrics m;
    m.requests = requests_.load();
    m.cache_hits = cache_hits_.load();
    m.searches = searches_.load();
    m.entries_scored = entries_scored_.load();
    m.fallbacks = fallbacks_.load();
    return m;
  }

  CacheStats cache_stats() const { return cache_.stats(); }

  const KnowledgeBase& kb() const { return kb_; }
  const InvertedIndex& index() const { return index_; }
  const EngineConfig& config() const { return cfg_; }
  const StopwordList& stopwords() const { return stops_; }

  std::vector<std::string> topic_names() const {
    std::vector<std::string> names;
    names.reserve(kb_.topics.size());
    for (const auto& t : kb_.topics) names.push_back(t.name);
    return names;
  }

 private:
  KnowledgeBase kb_;
  EngineConfig cfg_;
  StopwordList stops_;
  InvertedIndex index_;
  LruTtlCache<Reply> cache_;

  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> searches_{0};
  std::atomic<std::uint64_t> entries_scored_{0};
  std::atomic<std::uint64_t> fallbacks_{0};
};

} // namespace cbs

#endif // CBS_ENGINE_HPP
