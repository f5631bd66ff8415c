#ifndef CBS_MATCHER_HPP
#define CBS_MATCHER_HPP

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "cbs/kb.hpp"
#include "cbs/text.hpp"

namespace cbs {

struct MatchConfig {
  double min_score = 0.34;
  std::size_t max_results = 3;
};

struct MatchResult {
  std::string entry_id;
  std::string topic_name;
  double score = 0.0;

  bool operator==(const MatchResult&) const = default;
};

struct SearchStats {
  std::size_t entries_scored = 0;
};

// Coverage of the entry's trigger keywords by the query: |entry ∩ query| /
// |entry|. 1.0 means every trigger keyword is present. The scoring strategy
// is deliberately this simple so that search stays oracle-checkable.
inline double score_entry(const std::vector<std::string>& entry_keywords,
                          const KeywordSet& query) {
  if (entry_keywords.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& kw : entry_keywords)
    if (std::binary_search(query.keywords.begin(), query.keywords.end(), kw))
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(entry_keywords.size());
}

namespace detail {

inline void sort_and_truncate(std::vector<MatchResult>& matches,
                              std::size_t max_results) {
  std::sort(matches.begin(), matches.end(),
            [](const MatchResult& a, const MatchResult& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.entry_id < b.entry_id;
            });
  if (matches.size() > max_results) matches.resize(max_results);
}

} // namespace detail

// Entries scoring at least cfg.min_score, ordered by (score desc, entry_id
// asc), truncated to cfg.max_results. The index only narrows the candidate
// set; because min_score > 0, results equal brute-force scoring of every
// entry.
inline std::vector<MatchResult> search(const InvertedIndex& index,
                                       const KnowledgeBase& kb,
                                       const KeywordSet& query,
                                       const MatchConfig& cfg,
                                       SearchStats* stats = nullptr) {
  std::vector<std::string> candidates;
  for (const auto& kw : query.keywords) {
    const auto& ids = index.ids_for(kw);
    candidates.insert(candidates.end(), ids.begin(), ids.end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  std::vector<MatchResult> matches;
  for (const auto& id : candidates) {
    const auto* ref = index.locate(id);
    if (!ref) continue;
    const Topic& topic = kb.topics[ref->topic_index];
    const AdviceEntry& entry = topic.entries[ref->entry_index];
    const double score = score_entry(entry.keywords, query);
    if (stats) ++stats->entries_scored;
    if (score >= cfg.min_score)
      matches.push_back({entry.id, topic.name, score});
  }

  detail::sort_and_truncate(matches, cfg.max_results);
  return matches;
}

} // namespace cbs

#endif // CBS_MATCHER_HPP
