#ifndef CBS_CONFIG_HPP
#define CBS_CONFIG_HPP

#include <chrono>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbs/diagnostics.hpp"
#include "cbs/engine.hpp"
#include "cbs/telegram.hpp"

namespace cbs {

// Name of the environment variable holding the bot token. The token never
// appears in the config file or in any serialized form.
inline constexpr const char* kTokenEnvVar = "CBS_TELEGRAM_TOKEN";

struct AppConfig {
  std::string kb_path;
  std::optional<std::string> stopwords_path;
  EngineConfig engine;
  AdapterConfig adapter;
};

namespace detail {

inline void reject_token_key(const json& obj, const std::string& path,
                             SchemaWalker& w) {
  if (obj.contains("token"))
    w.error(path + "/token",
            "token must come from the environment (" + std::string(kTokenEnvVar) +
                "), never from the config file");
}

inline std::optional<double> number_field(SchemaWalker& w, const json& obj,
                                          const std::string& path,
                                          const std::string& key) {
  if (!obj.contains(key)) return std::nullopt;
  const auto& v = obj.at(key);
  if (!v.is_number()) {
    w.error(path + "/" + key, "expected a number");
    return std::nullopt;
  }
  return v.get<double>();
}

inline std::optional<std::uint64_t> count_field(SchemaWalker& w, const json& obj,
                                                const std::string& path,
                                                const std::string& key,
                                                std::uint64_t min_value) {
  if (!obj.contains(key)) return std::nullopt;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() < min_value) {
    w.error(path + "/" + key,
            "expected an integer >= " + std::to_string(min_value));
    return std::nullopt;
  }
  return v.get<std::uint64_t>();
}

} // namespace detail

// Same interchange format and diagnostics as the knowledge base: strict
// UTF-8 JSON, unknown keys rejected.
inline AppConfig parse_app_config(std::string_view bytes) {
  std::vector<Diagnostic> diags;
  detail::SchemaWalker w{diags};
  AppConfig cfg;

  if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF")
    throw KbError({{Severity::error, "",
                    "byte-order mark not allowed; use plain UTF-8"}});

  detail::json doc;
  try {
    doc = detail::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_col(bytes, e.byte > 0 ? e.byte - 1 : 0);
    throw KbError({{Severity::error, "",
                    "malformed JSON at line " + std::to_string(line) +
                        ", column " + std::to_string(col)}});
  }

  if (!w.object_at(doc, "")) throw KbError(std::move(diags));
  detail::reject_token_key(doc, "", w);
  w.check_keys(doc, "", {"kb_path"},
               {"stopwords_path", "engine", "telegram", "token"});
  if (auto v = w.string_field(doc, "", "kb_path")) cfg.kb_path = *v;
  if (auto v = w.string_field(doc, "", "stopwords_path")) cfg.stopwords_path = *v;

  if (doc.contains("engine")) {
    const std::string path = "/engine";
    if (const auto* ej = w.object_at(doc["engine"], path)) {
      w.check_keys(*ej, path, {},
                   {"min_score", "max_results", "cache_capacity",
                    "cache_ttl_seconds", "fallback_text", "cache_enabled"});
      if (auto v = detail::number_field(w, *ej, path, "min_score")) {
        if (*v > 0.0 && *v <= 1.0)
          cfg.engine.match.min_score = *v;
        else
          w.error(path + "/min_score", "expected a number in (0, 1]");
      }
      if (auto v = detail::count_field(w, *ej, path, "max_results", 1))
        cfg.engine.match.max_results = static_cast<std::size_t>(*v);
      if (auto v = detail::count_field(w, *ej, path, "cache_capacity", 1))
        cfg.engine.cache_capacity = static_cast<std::size_t>(*v);
      if (auto v = detail::count_field(w, *ej, path, "cache_ttl_seconds", 1))
        cfg.engine.cache_ttl = std::chrono::seconds(*v);
      if (auto v = w.string_field(*ej, path, "fallback_text")) {
        if (v->empty())
          w.error(path + "/fallback_text", "fallback_text must not be empty");
        else
          cfg.engine.fallback_text = *v;
      }
      if (ej->contains("cache_enabled")) {
        if (!(*ej)["cache_enabled"].is_boolean())
          w.error(path + "/cache_enabled", "expected a boolean");
        else
          cfg.engine.cache_enabled = (*ej)["cache_enabled"].get<bool>();
      }
    }
  }

  if (doc.contains("telegram")) {
    const std::string path = "/telegram";
    if (const auto* tj = w.object_at(doc["telegram"], path)) {
      detail::reject_token_key(*tj, path, w);
      w.check_keys(*tj, path, {},
                   {"api_base_url", "poll_timeout_seconds",
                    "retry_backoff_seconds", "token"});
      if (auto v = w.string_field(*tj, path, "api_base_url")) {
        if (v->rfind("http://", 0) == 0 || v->rfind("https://", 0) == 0)
          cfg.adapter.api_base_url = *v;
        else
          w.error(path + "/api_base_url", "expected an http(s) URL");
      }
      if (auto v = detail::count_field(w, *tj, path, "poll_timeout_seconds", 0))
        cfg.adapter.poll_timeout = std::chrono::seconds(*v);
      if (const auto* arr = w.array_field(*tj, path, "retry_backoff_seconds")) {
        std::vector<std::chrono::milliseconds> backoff;
        for (std::size_t i = 0; i < arr->size(); ++i) {
          const auto& v = (*arr)[i];
          if (!v.is_number() || v.get<double>() < 0.0)
            w.error(path + "/retry_backoff_seconds/" + std::to_string(i),
                    "expected a number >= 0");
          else
            backoff.emplace_back(
                static_cast<std::int64_t>(v.get<double>() * 1000.0));
        }
        if (!has_errors(diags)) cfg.adapter.retry_backoff = std::move(backoff);
      }
    }
  }

  if (cfg.kb_path.empty() && !has_errors(diags))
    w.error("/kb_path", "kb_path must not be empty");

  sort_diagnostics(diags);
  if (has_errors(diags)) throw KbError(std::move(diags));
  return cfg;
}

inline AppConfig load_app_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_app_config(buf.str());
}

} // namespace cbs

#endif // CBS_CONFIG_HPP
