// cbs: keyword-matching information-security advice chatbot.
//
// Subcommands: kb validate, query, chat, serve. Replies go to stdout;
// structured logs go to stderr. Exit codes: 0 success, 1 domain error
// (invalid KB, fatal API error), 2 usage or environment error.

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbs/channel.hpp"
#include "cbs/config.hpp"
#include "cbs/engine.hpp"
#include "cbs/kb.hpp"
#include "cbs/matcher.hpp"
#include "cbs/telegram.hpp"
#include "cbs/text.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

cbs::StopwordList load_stopwords(const std::optional<std::string>& path) {
  if (!path) return cbs::StopwordList::default_english();
  return cbs::StopwordList::load_file(*path);
}

void print_diagnostics(const std::vector<cbs::Diagnostic>& diags, std::ostream& os) {
  for (const auto& d : diags) os << d << "\n";
}

std::string format_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", score);
  return buf;
}

int cmd_kb_validate(const std::string& kb_path) {
  const auto bytes = read_file(kb_path);
  if (!bytes) {
    std::cerr << "error: cannot open knowledge base: " << kb_path << "\n";
    return 2;
  }
  cbs::ParseResult parsed = cbs::parse_kb_document(*bytes);
  print_diagnostics(parsed.diagnostics, std::cout);
  if (!parsed.kb) return 1;

  const auto diags = cbs::validate_kb(*parsed.kb);
  print_diagnostics(diags, std::cout);
  if (cbs::has_errors(diags)) return 1;

  std::cout << "OK: " << parsed.kb->topics.size() << " topics, "
            << parsed.kb->entry_count() << " entries\n";
  return 0;
}

struct QueryOptions {
  std::string kb_path;
  std::string utterance;
  std::optional<std::string> stopwords_path;
  double min_score = cbs::MatchConfig{}.min_score;
  std::size_t max_results = cbs::MatchConfig{}.max_results;
  bool show_score = false;
};

int cmd_query(const QueryOptions& opt) {
  const auto bytes = read_file(opt.kb_path);
  if (!bytes) {
    std::cerr << "error: cannot open knowledge base: " << opt.kb_path << "\n";
    return 2;
  }
  cbs::EngineConfig cfg;
  cfg.match.min_score = opt.min_score;
  cfg.match.max_results = opt.max_results;
  try {
    cbs::StopwordList stops = load_stopwords(opt.stopwords_path);
    cbs::Engine engine(cbs::parse_kb(*bytes), cfg, stops);

    const cbs::KeywordSet keys = cbs::extract_keywords(opt.utterance, stops);
    std::cout << "keywords:";
    if (keys.empty()) std::cout << " (none)";
    for (const auto& k : keys.keywords) std::cout << " " << k;
    std::cout << "\n";

    const auto matches =
        cbs::search(engine.index(), engine.kb(), keys, cfg.match);
    if (matches.empty()) {
      std::cout << "matches: (none)\n";
    } else {
      std::cout << "matches:\n";
      for (const auto& m : matches) {
        std::cout << "  " << m.entry_id << "  " << m.topic_name;
        if (opt.show_score) std::cout << "  " << format_score(m.score);
        std::cout << "\n";
      }
    }

    const cbs::Reply reply =
        engine.handle_request(opt.utterance, std::chrono::steady_clock::now());
    std::cout << "reply:\n" << reply.text << "\n";
    return 0;
  } catch (const cbs::KbError& e) {
    print_diagnostics(e.diagnostics(), std::cerr);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

struct ChatOptions {
  std::string kb_path;
  std::optional<std::string> stopwords_path;
  double min_score = cbs::MatchConfig{}.min_score;
  std::size_t max_results = cbs::MatchConfig{}.max_results;
};

int cmd_chat(const ChatOptions& opt) {
  const auto bytes = read_file(opt.kb_path);
  if (!bytes) {
    std::cerr << "error: cannot open knowledge base: " << opt.kb_path << "\n";
    return 2;
  }
  cbs::EngineConfig cfg;
  cfg.match.min_score = opt.min_score;
  cfg.match.max_results = opt.max_results;
  try {
    cbs::Engine engine(cbs::parse_kb(*bytes), cfg,
                       load_stopwords(opt.stopwords_path));
    const bool interactive = isatty(STDIN_FILENO) != 0;
    if (interactive)
      std::cout << "cbs chat; :stats for counters, :quit to leave\n";

    std::string line;
    while (true) {
      if (interactive) std::cout << "> " << std::flush;
      if (!std::getline(std::cin, line)) break;
      if (line == ":quit") break;
      if (line == ":stats") {
        const cbs::EngineMetrics m = engine.metrics();
        const cbs::CacheStats c = engine.cache_stats();
        std::cout << "requests=" << m.requests << " cache_hits=" << m.cache_hits
                  << " searches=" << m.searches
                  << " entries_scored=" << m.entries_scored
                  << " fallbacks=" << m.fallbacks << "\n"
                  << "cache: hits=" << c.hits << " misses=" << c.misses
                  << " evictions=" << c.evictions << " size=" << c.size
                  << " capacity=" << c.capacity << "\n\n";
        continue;
      }
      const cbs::Reply reply =
          engine.handle_request(line, std::chrono::steady_clock::now());
      std::cout << reply.text << "\n\n";
    }
    return 0;
  } catch (const cbs::KbError& e) {
    print_diagnostics(e.diagnostics(), std::cerr);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_serve(const std::string& config_path) {
  cbs::AppConfig cfg;
  try {
    cfg = cbs::load_app_config(config_path);
  } catch (const cbs::KbError& e) {
    print_diagnostics(e.diagnostics(), std::cerr);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const char* token = std::getenv(cbs::kTokenEnvVar);
  if (!token || std::string(token).empty()) {
    std::cerr << "error: environment variable " << cbs::kTokenEnvVar
              << " is not set; export your bot token before running serve\n";
    return 2;
  }
  cfg.adapter.token = token;

  const cbs::LogFn log = [](const std::string& line) {
    std::cerr << line << std::endl;
  };

  try {
    const auto bytes = read_file(cfg.kb_path);
    if (!bytes) {
      std::cerr << "error: cannot open knowledge base: " << cfg.kb_path << "\n";
      return 2;
    }
    cbs::Engine engine(cbs::parse_kb(*bytes), cfg.engine,
                       load_stopwords(cfg.stopwords_path));

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    cbs::TelegramClient client(cfg.adapter, log);
    client.set_stop(&g_stop);
    cbs::TelegramChannel channel(client, cfg.adapter.poll_timeout);

    cbs::detail::log_json(log, {{"event", "startup"},
                                {"kb", cfg.kb_path},
                                {"topics", engine.kb().topics.size()},
                                {"entries", engine.kb().entry_count()}});
    cbs::run_loop(engine, channel, g_stop, log);

    const cbs::EngineMetrics m = engine.metrics();
    cbs::detail::log_json(log, {{"event", "shutdown"},
                                {"requests", m.requests},
                                {"cache_hits", m.cache_hits},
                                {"fallbacks", m.fallbacks}});
    return 0;
  } catch (const cbs::TelegramAuthError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cbs::KbError& e) {
    print_diagnostics(e.diagnostics(), std::cerr);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"keyword-matching information security advice chatbot"};
  app.require_subcommand(1);

  auto* kb = app.add_subcommand("kb", "knowledge base utilities");
  kb->require_subcommand(1);
  std::string validate_path;
  auto* validate = kb->add_subcommand("validate", "check a knowledge base file");
  validate->add_option("path", validate_path, "knowledge base JSON file")
      ->required();

  QueryOptions query_opt;
  auto* query = app.add_subcommand("query", "answer a single question");
  query->add_option("path", query_opt.kb_path, "knowledge base JSON file")
      ->required();
  query->add_option("utterance", query_opt.utterance, "the question to answer")
      ->required();
  query->add_option("--min-score", query_opt.min_score, "match threshold in (0,1]");
  query->add_option("--max-results", query_opt.max_results, "result cap");
  query->add_flag("--show-score", query_opt.show_score, "print match scores");
  std::string query_stops;
  query->add_option("--stopwords", query_stops, "stopword file (one word per line)");

  ChatOptions chat_opt;
  auto* chat = app.add_subcommand("chat", "interactive local chat");
  chat->add_option("path", chat_opt.kb_path, "knowledge base JSON file")
      ->required();
  chat->add_option("--min-score", chat_opt.min_score, "match threshold in (0,1]");
  chat->add_option("--max-results", chat_opt.max_results, "result cap");
  std::string chat_stops;
  chat->add_option("--stopwords", chat_stops, "stopword file (one word per line)");

  std::string config_path;
  auto* serve = app.add_subcommand("serve", "run the Telegram bot service");
  serve->add_option("--config", config_path, "service config JSON file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (!query_stops.empty()) query_opt.stopwords_path = query_stops;
  if (!chat_stops.empty()) chat_opt.stopwords_path = chat_stops;

  if (validate->parsed()) return cmd_kb_validate(validate_path);
  if (query->parsed()) return cmd_query(query_opt);
  if (chat->parsed()) return cmd_chat(chat_opt);
  if (serve->parsed()) return cmd_serve(config_path);
  return 2;
}
