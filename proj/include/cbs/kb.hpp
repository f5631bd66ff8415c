#ifndef CBS_KB_HPP
#define CBS_KB_HPP

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbs/diagnostics.hpp"
#include "cbs/text.hpp"

namespace cbs {

// One unit of advice plus the trigger keywords that select it.
struct AdviceEntry {
  std::string id;
  std::vector<std::string> keywords; // validated unique and canonical
  std::string advice;
  std::vector<std::string> see_also;

  bool has_keyword(const std::string& k) const {
    return std::find(keywords.begin(), keywords.end(), k) != keywords.end();
  }

  bool operator==(const AdviceEntry&) const = default;
};

struct Topic {
  std::string name;
  std::vector<AdviceEntry> entries;

  bool operator==(const Topic&) const = default;
};

// Two-level tree: topics hold entries. Immutable once built.
struct KnowledgeBase {
  std::string version;
  std::vector<Topic> topics;

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& t : topics) n += t.entries.size();
    return n;
  }

  bool operator==(const KnowledgeBase&) const = default;
};

struct ParseResult {
  std::optional<KnowledgeBase> kb; // present iff no structural errors
  std::vector<Diagnostic> diagnostics;
};

namespace detail {

using json = nlohmann::ordered_json;

inline std::string pointer_escape(std::string_view key) {
  std::string out;
  out.reserve(key.size());
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

inline std::pair<std::size_t, std::size_t> line_col(std::string_view bytes,
                                                    std::size_t offset) {
  offset = std::min(offset, bytes.size());
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (bytes[i] == '\n') { ++line; col = 1; } else ++col;
  }
  return {line, col};
}

struct SchemaWalker {
  std::vector<Diagnostic>& diags;
  bool ok = true;

  void error(std::string path, std::string message) {
    diags.push_back({Severity::error, std::move(path), std::move(message)});
    ok = false;
  }

  // Unknown keys are errors: silent authoring typos must not drop advice.
  void check_keys(const json& obj, const std::string& path,
                  const std::vector<std::string>& required,
                  const std::vector<std::string>& optional) {
    for (const auto& key : required)
      if (!obj.contains(key))
        error(path, "missing required key \"" + key + "\"");
    for (const auto& [key, value] : obj.items()) {
      const bool known =
          std::find(required.begin(), required.end(), key) != required.end() ||
          std::find(optional.begin(), optional.end(), key) != optional.end();
      if (!known) error(path + "/" + pointer_escape(key), "unknown key");
    }
  }

  const json* object_at(const json& j, const std::string& path) {
    if (!j.is_object()) { error(path, "expected an object"); return nullptr; }
    return &j;
  }

  std::optional<std::string> string_field(const json& obj, const std::string& path,
                                          const std::string& key) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_string()) {
      error(path + "/" + pointer_escape(key), "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  const json* array_field(const json& obj, const std::string& path,
                          const std::string& key) {
    if (!obj.contains(key)) return nullptr;
    const auto& v = obj.at(key);
    if (!v.is_array()) {
      error(path + "/" + pointer_escape(key), "expected an array");
      return nullptr;
    }
    return &v;
  }

  std::vector<std::string> string_array(const json& arr, const std::string& path) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string())
        error(path + "/" + std::to_string(i), "expected a string");
      else
        out.push_back(arr[i].get<std::string>());
    }
    return out;
  }
};

} // namespace detail

// Structural layer: syntax plus schema. Every field is read, unknown fields
// are rejected, nesting deeper than topics/entries cannot parse.
inline ParseResult parse_kb_document(std::string_view bytes) {
  ParseResult result;
  if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF") {
    result.diagnostics.push_back(
        {Severity::error, "", "byte-order mark not allowed; use plain UTF-8"});
    return result;
  }

  detail::json doc;
  try {
    doc = detail::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_col(bytes, e.byte > 0 ? e.byte - 1 : 0);
    std::string reason = e.what();
    if (auto pos = reason.find("]: "); pos != std::string::npos)
      reason = reason.substr(pos + 3);
    result.diagnostics.push_back(
        {Severity::error, "",
         "malformed JSON at line " + std::to_string(line) + ", column " +
             std::to_string(col) + ": " + reason});
    return result;
  }

  detail::SchemaWalker w{result.diagnostics};
  KnowledgeBase kb;

  if (!w.object_at(doc, "")) return result;
  w.check_keys(doc, "", {"version", "topics"}, {});
  if (auto version = w.string_field(doc, "", "version")) kb.version = *version;

  if (const auto* topics = w.array_field(doc, "", "topics")) {
    for (std::size_t ti = 0; ti < topics->size(); ++ti) {
      const std::string tpath = "/topics/" + std::to_string(ti);
      const auto* tj = w.object_at((*topics)[ti], tpath);
      if (!tj) continue;
      Topic topic;
      w.check_keys(*tj, tpath, {"name", "entries"}, {});
      if (auto name = w.string_field(*tj, tpath, "name")) topic.name = *name;

      if (const auto* entries = w.array_field(*tj, tpath, "entries")) {
        for (std::size_t ei = 0; ei < entries->size(); ++ei) {
          const std::string epath = tpath + "/entries/" + std::to_string(ei);
          const auto* ej = w.object_at((*entries)[ei], epath);
          if (!ej) continue;
          AdviceEntry entry;
          w.check_keys(*ej, epath, {"id", "keywords", "advice"}, {"see_also"});
          if (auto id = w.string_field(*ej, epath, "id")) entry.id = *id;
          if (auto advice = w.string_field(*ej, epath, "advice"))
            entry.advice = *advice;
          if (const auto* kws = w.array_field(*ej, epath, "keywords"))
            entry.keywords = w.string_array(*kws, epath + "/keywords");
          if (const auto* sa = w.array_field(*ej, epath, "see_also"))
            entry.see_also = w.string_array(*sa, epath + "/see_also");
          topic.entries.push_back(std::move(entry));
        }
      }
      kb.topics.push_back(std::move(topic));
    }
  }

  sort_diagnostics(result.diagnostics);
  if (!has_errors(result.diagnostics)) result.kb = std::move(kb);
  return result;
}

// Semantic invariants. Empty result means the KB is fully well-formed;
// canonical-form findings are warnings, everything else is an error.
inline std::vector<Diagnostic> validate_kb(const KnowledgeBase& kb) {
  std::vector<Diagnostic> diags;
  const auto error = [&](std::string path, std::string msg) {
    diags.push_back({Severity::error, std::move(path), std::move(msg)});
  };
  const auto warning = [&](std::string path, std::string msg) {
    diags.push_back({Severity::warning, std::move(path), std::move(msg)});
  };

  if (kb.topics.empty()) error("/topics", "knowledge base has no topics");

  std::set<std::string> topic_names;
  std::set<std::string> entry_ids;
  for (std::size_t ti = 0; ti < kb.topics.size(); ++ti) {
    const Topic& topic = kb.topics[ti];
    const std::string tpath = "/topics/" + std::to_string(ti);

    const std::string norm_name = normalize_text(topic.name);
    if (norm_name.empty())
      error(tpath + "/name", "topic name is empty");
    else if (!topic_names.insert(norm_name).second)
      error(tpath + "/name", "duplicate topic name \"" + topic.name + "\"");

    if (topic.entries.empty()) error(tpath + "/entries", "topic has no entries");

    for (std::size_t ei = 0; ei < topic.entries.size(); ++ei) {
      const AdviceEntry& entry = topic.entries[ei];
      const std::string epath = tpath + "/entries/" + std::to_string(ei);

      if (entry.id.empty())
        error(epath + "/id", "entry id is empty");
      else if (!entry_ids.insert(entry.id).second)
        error(epath + "/id", "duplicate entry id \"" + entry.id + "\"");

      if (entry.keywords.empty())
        error(epath + "/keywords", "entry has no keywords");
      std::set<std::string> seen_keywords;
      for (std::size_t ki = 0; ki < entry.keywords.size(); ++ki) {
        const std::string& kw = entry.keywords[ki];
        const std::string kpath = epath + "/keywords/" + std::to_string(ki);
        if (kw.empty())
          error(kpath, "empty keyword");
        else if (!seen_keywords.insert(kw).second)
          error(kpath, "duplicate keyword \"" + kw + "\"");
        else if (!is_canonical_keyword(kw))
          warning(kpath, "keyword \"" + kw + "\" not in canonical form");
      }

      if (entry.advice.empty()) error(epath + "/advice", "entry advice is empty");
    }
  }

  // see_also targets resolve against the whole KB, so collect ids first.
  for (std::size_t ti = 0; ti < kb.topics.size(); ++ti) {
    for (std::size_t ei = 0; ei < kb.topics[ti].entries.size(); ++ei) {
      const AdviceEntry& entry = kb.topics[ti].entries[ei];
      for (std::size_t si = 0; si < entry.see_also.size(); ++si) {
        if (!entry_ids.count(entry.see_also[si]))
          error("/topics/" + std::to_string(ti) + "/entries/" +
                    std::to_string(ei) + "/see_also/" + std::to_string(si),
                "see_also references unknown entry id \"" +
                    entry.see_also[si] + "\"");
      }
    }
  }

  sort_diagnostics(diags);
  return diags;
}

// Parse + validate; the returned KB satisfies every invariant.
inline KnowledgeBase parse_kb(std::string_view bytes) {
  ParseResult parsed = parse_kb_document(bytes);
  if (!parsed.kb) throw KbError(std::move(parsed.diagnostics));
  std::vector<Diagnostic> diags = validate_kb(*parsed.kb);
  if (has_errors(diags)) throw KbError(std::move(diags));
  return std::move(*parsed.kb);
}

inline std::string serialize_kb(const KnowledgeBase& kb) {
  detail::json doc;
  doc["version"] = kb.version;
  doc["topics"] = detail::json::array();
  for (const auto& topic : kb.topics) {
    detail::json tj;
    tj["name"] = topic.name;
    tj["entries"] = detail::json::array();
    for (const auto& entry : topic.entries) {
      detail::json ej;
      ej["id"] = entry.id;
      ej["keywords"] = entry.keywords;
      ej["advice"] = entry.advice;
      if (!entry.see_also.empty()) ej["see_also"] = entry.see_also;
      tj["entries"].push_back(std::move(ej));
    }
    doc["topics"].push_back(std::move(tj));
  }
  return doc.dump(2) + "\n";
}

inline KnowledgeBase load_kb_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open knowledge base: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kb(buf.str());
}

// Keyword -> sorted entry ids, plus an id -> position locator. Postings hold
// exactly the (keyword, entry) pairs present in the KB.
class InvertedIndex {
 public:
  struct EntryRef {
    std::size_t topic_index;
    std::size_t entry_index;
  };

  const std::vector<std::string>& ids_for(const std::string& keyword) const {
    static const std::vector<std::string> empty;
    auto it = postings_.find(keyword);
    return it == postings_.end() ? empty : it->second;
  }

  const EntryRef* locate(const std::string& id) const {
    auto it = locator_.find(id);
    return it == locator_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, std::vector<std::string>>& postings() const {
    return postings_;
  }

  std::size_t entry_count() const { return entry_count_; }

 private:
  friend InvertedIndex build_index(const KnowledgeBase& kb);

  std::map<std::string, std::vector<std::string>> postings_;
  std::unordered_map<std::string, EntryRef> locator_;
  std::size_t entry_count_ = 0;
};

// Pre: the KB validates without errors (warnings are fine).
inline InvertedIndex build_index(const KnowledgeBase& kb) {
  if (std::vector<Diagnostic> diags = validate_kb(kb); has_errors(diags))
    throw KbError(std::move(diags));

  InvertedIndex index;
  for (std::size_t ti = 0; ti < kb.topics.size(); ++ti) {
    for (std::size_t ei = 0; ei < kb.topics[ti].entries.size(); ++ei) {
      const AdviceEntry& entry = kb.topics[ti].entries[ei];
      index.locator_.emplace(entry.id, InvertedIndex::EntryRef{ti, ei});
      for (const auto& kw : entry.keywords)
        index.postings_[kw].push_back(entry.id);
      ++index.entry_count_;
    }
  }
  for (auto& [kw, ids] : index.postings_) std::sort(ids.begin(), ids.end());
  return index;
}

inline const std::vector<std::string>& lookup_keyword(const InvertedIndex& index,
                                                      const std::string& keyword) {
  return index.ids_for(keyword);
}

} // namespace cbs

#endif // CBS_KB_HPP
