#ifndef CBS_TEXT_HPP
#define CBS_TEXT_HPP

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace cbs {

// Canonical form: lowercase, NFC, whitespace runs collapsed to single
// spaces, no leading/trailing whitespace. Total over arbitrary bytes
// (invalid UTF-8 decodes to U+FFFD) and idempotent.
inline std::string normalize_text(std::string_view text) {
  UErrorCode ec = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(ec);
  if (U_FAILURE(ec)) throw std::runtime_error("ICU NFC instance unavailable");

  icu::UnicodeString s = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));

  // One pass of lowercase + compose + collapse is idempotent for all text
  // we have seen; the loop guards the few Unicode corners where casing and
  // composition interact, by running to a fixpoint.
  for (int pass = 0; pass < 4; ++pass) {
    icu::UnicodeString lowered = s;
    lowered.toLower(icu::Locale::getRoot());
    ec = U_ZERO_ERROR;
    icu::UnicodeString composed = nfc->normalize(lowered, ec);
    if (U_FAILURE(ec)) composed = lowered;

    icu::UnicodeString collapsed;
    bool pending_space = false;
    for (int32_t i = 0; i < composed.length();) {
      const UChar32 c = composed.char32At(i);
      i += U16_LENGTH(c);
      if (u_isUWhiteSpace(c)) {
        pending_space = !collapsed.isEmpty();
      } else {
        if (pending_space) collapsed.append(u' ');
        pending_space = false;
        collapsed.append(c);
      }
    }
    if (collapsed == s) break;
    s = collapsed;
  }

  std::string out;
  s.toUTF8String(out);
  return out;
}

// Number of code points in a UTF-8 string (invalid sequences count one per
// replacement).
inline std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  int32_t i = 0;
  const auto len = static_cast<int32_t>(s.size());
  while (i < len) {
    UChar32 c;
    U8_NEXT(s.data(), i, len, c);
    ++n;
  }
  return n;
}

// Maximal runs of Unicode letters and digits, in order of appearance.
// Everything else (punctuation, symbols, marks) separates tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  const auto len = static_cast<int32_t>(text.size());
  int32_t i = 0;
  int32_t start = -1;
  while (i < len) {
    const int32_t at = i;
    UChar32 c;
    U8_NEXT(text.data(), i, len, c);
    const bool word = c >= 0 && u_isalnum(c);
    if (word && start < 0) start = at;
    if (!word && start >= 0) {
      tokens.emplace_back(text.substr(start, at - start));
      start = -1;
    }
  }
  if (start >= 0) tokens.emplace_back(text.substr(start));
  return tokens;
}

struct KeywordSet {
  std::vector<std::string> keywords; // sorted, deduplicated, canonical
  std::string source_text;           // original utterance

  bool empty() const { return keywords.empty(); }
  bool operator==(const KeywordSet&) const = default;
};

class StopwordList {
 public:
  StopwordList() = default;

  static StopwordList from_words(const std::vector<std::string>& words) {
    StopwordList list;
    for (const auto& w : words)
      for (auto& tok : tokenize(normalize_text(w))) list.words_.insert(std::move(tok));
    return list;
  }

  // UTF-8, one word per line, '#' starts a comment.
  static StopwordList load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open stopword file: " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      words.push_back(line);
    }
    return from_words(words);
  }

  static const StopwordList& default_english();

  bool contains(const std::string& word) const { return words_.count(word) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

inline const StopwordList& StopwordList::default_english() {
  static const StopwordList list = from_words({
      "a",      "about",   "above",    "after",   "again",    "against",
      "all",    "am",      "an",       "and",     "any",      "are",
      "aren",   "as",      "at",       "be",      "because",  "been",
      "before", "being",   "below",    "between", "both",     "but",
      "by",     "can",     "cannot",   "cant",    "could",    "couldn",
      "did",    "didn",    "do",       "does",    "doesn",    "doing",
      "don",    "dont",    "down",     "during",  "each",     "few",
      "for",    "from",    "further",  "had",     "hadn",     "has",
      "hasn",   "have",    "haven",    "having",  "he",       "her",
      "here",   "hers",    "herself",  "him",     "himself",  "his",
      "how",    "i",       "if",       "im",      "in",       "into",
      "is",     "isn",     "it",       "its",     "itself",   "ive",
      "just",   "let",     "ll",       "me",      "more",     "most",
      "mustn",  "my",      "myself",   "need",    "no",       "nor",
      "not",    "now",     "of",       "off",     "on",       "once",
      "only",   "or",      "other",    "our",     "ours",     "ourselves",
      "out",    "over",    "own",      "re",      "same",     "shan",
      "she",    "should",  "shouldn",  "so",      "some",     "such",
      "than",   "that",    "the",      "their",   "theirs",   "them",
      "themselves",        "then",     "there",   "these",    "they",
      "this",   "those",   "through",  "to",      "too",      "under",
      "until",  "up",      "ve",       "very",    "was",      "wasn",
      "we",     "were",    "weren",    "what",    "whats",    "when",
      "where",  "which",   "while",    "who",     "whom",     "why",
      "will",   "with",    "won",      "wont",    "would",    "wouldn",
      "you",    "your",    "yours",    "yourself","yourselves",
  });
  return list;
}

// Stopword-filtered unigram bag: dedupe, drop stopwords and
// single-character tokens, sort ascending by code point.
inline KeywordSet extract_keywords(const std::vector<std::string>& tokens,
                                   const StopwordList& stops,
                                   std::string source_text = {}) {
  KeywordSet out;
  out.source_text = std::move(source_text);
  for (const auto& tok : tokens) {
    if (utf8_length(tok) < 2) continue;
    if (stops.contains(tok)) continue;
    out.keywords.push_back(tok);
  }
  std::sort(out.keywords.begin(), out.keywords.end());
  out.keywords.erase(std::unique(out.keywords.begin(), out.keywords.end()),
                     out.keywords.end());
  return out;
}

// Full pipeline: raw utterance -> canonical keyword set.
inline KeywordSet extract_keywords(std::string_view utterance,
                                   const StopwordList& stops) {
  return extract_keywords(tokenize(normalize_text(utterance)), stops,
                          std::string(utterance));
}

// A knowledge-base keyword is canonical when the pipeline would hand it
// back unchanged as a single token.
inline bool is_canonical_keyword(const std::string& keyword) {
  if (keyword.empty()) return false;
  const auto tokens = tokenize(normalize_text(keyword));
  return tokens.size() == 1 && tokens[0] == keyword;
}

} // namespace cbs

#endif // CBS_TEXT_HPP
