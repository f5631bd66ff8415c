#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <string>
#include <vector>

#include "cbs/engine.hpp"
#include "support/generators.hpp"
#include "support/paths.hpp"

using namespace std::chrono_literals;
using cbs::Engine;
using cbs::EngineConfig;
using cbs::EngineEvent;
using cbs::KnowledgeBase;
using cbs::Reply;
using cbs::ReplyKind;
using cbs::Timestamp;

namespace {

Timestamp t0() {
  static const Timestamp base = std::chrono::steady_clock::now();
  return base;
}

KnowledgeBase fixture_kb() {
  return cbs::load_kb_file(testsupport::fixture_kb_path());
}

KnowledgeBase minimal_kb() {
  return cbs::parse_kb(R"({
    "version": "1",
    "topics": [{"name": "malware", "entries": [
      {"id": "m1", "keywords": ["virus"],
       "advice": "Install and update antivirus software."}]}]
  })");
}

} // namespace

TEST_CASE("formulate_reply applies the fixed template") {
  const KnowledgeBase kb = minimal_kb();
  SECTION("single match: header, blank line, advice") {
    const Reply r = cbs::formulate_reply({{"m1", "malware", 1.0}}, kb);
    CHECK(r.text == "== malware ==\n\nInstall and update antivirus software.");
    CHECK(r.kind == ReplyKind::advice);
    CHECK(r.entry_id == "m1");
    CHECK(r.topic_name == "malware");
    CHECK(r.score == 1.0);
    CHECK(r.related.empty());
  }
  SECTION("empty matches are rejected") {
    CHECK_THROWS_AS(cbs::formulate_reply({}, kb), std::invalid_argument);
  }
}

TEST_CASE("formulate_reply lists related matches and see_also") {
  const KnowledgeBase kb = fixture_kb();
  SECTION("two matches add a Related line naming the second") {
    const Reply r = cbs::formulate_reply(
        {{"m2", "malware", 1.0}, {"m4", "malware", 0.5}}, kb);
    CHECK(r.text ==
          "== malware ==\n\n"
          "Treat unexpected emails with links or attachments as hostile. "
          "Check the sender's address, and when in doubt type the website "
          "address yourself instead of clicking."
          "\n\nRelated: m4 (malware)");
    CHECK(r.related ==
          std::vector<std::pair<std::string, std::string>>{{"m4", "malware"}});
  }
  SECTION("see_also entries follow further matches, deduplicated") {
    // p1's see_also is p2, which is already the second match.
    const Reply r = cbs::formulate_reply({{"p1", "strong passwords", 1.0},
                                          {"p2", "strong passwords", 0.5},
                                          {"p3", "strong passwords", 0.5}},
                                         kb);
    CHECK(r.related == std::vector<std::pair<std::string, std::string>>{
                           {"p2", "strong passwords"}, {"p3", "strong passwords"}});
  }
  SECTION("at most two further matches are listed") {
    const Reply r = cbs::formulate_reply({{"p4", "strong passwords", 1.0},
                                          {"p2", "strong passwords", 0.5},
                                          {"p3", "strong passwords", 0.5},
                                          {"m1", "malware", 0.4}},
                                         kb);
    // p2, p3 from matches; p1 from p4's see_also.
    CHECK(r.related == std::vector<std::pair<std::string, std::string>>{
                           {"p2", "strong passwords"},
                           {"p3", "strong passwords"},
                           {"p1", "strong passwords"}});
  }
}

TEST_CASE("fallback_reply uses the configured text and is never cached") {
  EngineConfig cfg;
  SECTION("default text") {
    const Reply r = cbs::fallback_reply(cfg);
    CHECK(r.kind == ReplyKind::fallback);
    CHECK(r.text ==
          "Sorry, I don't have advice on that yet. Try rephrasing your question.");
    CHECK_FALSE(r.entry_id.has_value());
    CHECK(r.related.empty());
  }
  SECTION("custom text") {
    cfg.fallback_text = "Try asking about passwords.";
    CHECK(cbs::fallback_reply(cfg).text == "Try asking about passwords.");
  }
  SECTION("repeated unknown queries never populate the cache") {
    Engine engine(fixture_kb());
    for (int i = 0; i < 100; ++i) {
      const Reply r = engine.handle_request("qwzx gibberish", t0() + i * 1s);
      REQUIRE(r.kind == ReplyKind::fallback);
    }
    CHECK(engine.cache_stats().size == 0);
    CHECK(engine.metrics().searches == 100);
    CHECK(engine.metrics().fallbacks == 100);
  }
}

TEST_CASE("handle_request follows the request flow") {
  Engine engine(fixture_kb());

  SECTION("advice request, then an identical repeat from cache") {
    std::vector<EngineEvent> first_trace;
    const Reply first =
        engine.handle_request("how do I pick a password", t0(), &first_trace);
    CHECK(first.kind == ReplyKind::advice);
    CHECK(first.entry_id == "p1");
    CHECK(first.topic_name == "strong passwords");
    CHECK(first_trace == std::vector<EngineEvent>{
                             EngineEvent::extract, EngineEvent::cache_get_miss,
                             EngineEvent::search, EngineEvent::formulate,
                             EngineEvent::cache_put});

    const auto scored_before = engine.metrics().entries_scored;
    std::vector<EngineEvent> second_trace;
    const Reply second =
        engine.handle_request("how do I pick a password", t0() + 1s, &second_trace);
    CHECK(second == first);
    CHECK(second_trace == std::vector<EngineEvent>{EngineEvent::extract,
                                                   EngineEvent::cache_get_hit});
    CHECK(engine.metrics().entries_scored == scored_before);
    CHECK(engine.metrics().cache_hits == 1);
  }

  SECTION("empty utterance falls back and is not cached") {
    const Reply r = engine.handle_request("", t0());
    CHECK(r.kind == ReplyKind::fallback);
    CHECK(engine.cache_stats().size == 0);
  }

  SECTION("pure stopword utterance falls back") {
    const Reply r = engine.handle_request("how do i do it", t0());
    CHECK(r.kind == ReplyKind::fallback);
  }

  SECTION("unknown keywords fall back with a miss trace") {
    std::vector<EngineEvent> trace;
    const Reply r = engine.handle_request("qwzx gibberish", t0(), &trace);
    CHECK(r.kind == ReplyKind::fallback);
    CHECK(trace == std::vector<EngineEvent>{
                       EngineEvent::extract, EngineEvent::cache_get_miss,
                       EngineEvent::search, EngineEvent::fallback});
  }
}

TEST_CASE("handle_request is total over hostile input") {
  Engine engine(fixture_kb());
  const std::vector<std::string> inputs = {
      "", "   ", "????", "\xF0\x9F\x98\x80", std::string(100000, 'a'),
      std::string("\x00\x01\x02", 3), "\xFF\xFE broken utf8"};
  for (const auto& input : inputs) {
    const Reply r = engine.handle_request(input, t0());
    CHECK_FALSE(r.text.empty());
  }
}

TEST_CASE("metrics stay balanced and monotone") {
  Engine engine(fixture_kb());
  auto rng = testsupport::make_rng(1313);
  const KnowledgeBase kb = fixture_kb();
  std::uint64_t last_requests = 0;
  for (int i = 0; i < 500; ++i) {
    engine.handle_request(testsupport::random_utterance(rng, kb), t0() + i * 1s);
    const auto m = engine.metrics();
    REQUIRE(m.cache_hits + m.searches == m.requests);
    REQUIRE(m.requests == last_requests + 1);
    last_requests = m.requests;
  }
}

TEST_CASE("cache transparency on the fixture") {
  EngineConfig with_cache;
  EngineConfig without_cache;
  without_cache.cache_enabled = false;

  Engine cached(fixture_kb(), with_cache);
  Engine uncached(fixture_kb(), without_cache);

  auto rng = testsupport::make_rng(1414);
  const KnowledgeBase kb = fixture_kb();
  std::vector<std::string> history;
  for (int i = 0; i < 400; ++i) {
    std::string utterance;
    if (!history.empty() && testsupport::chance(rng, 0.4))
      utterance = testsupport::pick(rng, history);
    else
      utterance = testsupport::random_utterance(rng, kb);
    history.push_back(utterance);

    const Reply a = cached.handle_request(utterance, t0() + i * 1s);
    const Reply b = uncached.handle_request(utterance, t0() + i * 1s);
    CAPTURE(utterance);
    REQUIRE(a.text == b.text);
    REQUIRE(a == b);
  }
  CHECK(cached.metrics().cache_hits > 0);
  CHECK(uncached.metrics().cache_hits == 0);
}

TEST_CASE("reply depends only on the keyword set, not the phrasing") {
  Engine engine(fixture_kb());
  const Reply a = engine.handle_request("Pick a PASSWORD!", t0());
  const Reply b = engine.handle_request("password...  pick?", t0() + 1s);
  CHECK(a == b);
  CHECK(engine.metrics().cache_hits == 1); // reordering hits the same key
}

TEST_CASE("engine construction validates KB and config") {
  SECTION("invalid KB") {
    KnowledgeBase kb = fixture_kb();
    kb.topics[0].entries[0].keywords.clear();
    CHECK_THROWS_AS(Engine(kb), cbs::KbError);
  }
  SECTION("empty fallback text") {
    EngineConfig cfg;
    cfg.fallback_text = "";
    CHECK_THROWS_AS(Engine(fixture_kb(), cfg), std::invalid_argument);
  }
  SECTION("bad min_score") {
    EngineConfig cfg;
    cfg.match.min_score = 0.0;
    CHECK_THROWS_AS(Engine(fixture_kb(), cfg), std::invalid_argument);
    cfg.match.min_score = 1.5;
    CHECK_THROWS_AS(Engine(fixture_kb(), cfg), std::invalid_argument);
  }
}

TEST_CASE("cached replies expire after the TTL") {
  EngineConfig cfg;
  cfg.cache_ttl = 60s;
  Engine engine(fixture_kb(), cfg);

  engine.handle_request("what is ransomware", t0());
  std::vector<EngineEvent> trace;
  engine.handle_request("what is ransomware", t0() + 61s, &trace);
  CHECK(trace[1] == EngineEvent::cache_get_miss); // expired, searched again
  CHECK(engine.metrics().searches == 2);
}
