#ifndef CBS_TELEGRAM_HPP
#define CBS_TELEGRAM_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <unicode/utf8.h>

#include "cbs/channel.hpp"

namespace cbs {

// Telegram caps message text at 4096 characters.
inline constexpr std::size_t kTelegramTextLimit = 4096;

struct BotUpdate {
  std::int64_t update_id = 0;
  std::int64_t chat_id = 0;
  std::optional<std::string> text; // absent for non-text messages
  std::int64_t sender_id = 0;
};

struct OutboundMessage {
  std::int64_t chat_id = 0;
  std::string text;
  std::optional<std::int64_t> reply_to;
};

struct AdapterConfig {
  std::string api_base_url = "https://api.telegram.org";
  std::string token; // from the environment; never logged or serialized
  std::chrono::seconds poll_timeout{30};
  std::vector<std::chrono::milliseconds> retry_backoff{
      std::chrono::milliseconds(1000), std::chrono::milliseconds(2000),
      std::chrono::milliseconds(5000)};
};

// Fatal: the token is wrong. Message carries a remediation hint, never the
// token itself.
class TelegramAuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TelegramTransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Splits oversized text into <= limit-character chunks, preferring line
// boundaries. Counts code points, so multibyte text never splits mid
// character. The newline at a split point is consumed by the boundary.
inline std::vector<std::string> chunk_text(std::string_view text,
                                           std::size_t limit = kTelegramTextLimit) {
  std::vector<std::string> chunks;
  while (!text.empty()) {
    const auto len = static_cast<int32_t>(text.size());
    std::size_t count = 0;
    int32_t i = 0;
    int32_t last_newline = -1;
    while (i < len && count < limit) {
      const int32_t at = i;
      UChar32 c;
      U8_NEXT(text.data(), i, len, c);
      if (c == '\n') last_newline = at;
      ++count;
    }
    if (i >= len) {
      chunks.emplace_back(text);
      break;
    }
    std::size_t cut = static_cast<std::size_t>(i);
    std::size_t resume = cut;
    if (last_newline > 0) {
      cut = static_cast<std::size_t>(last_newline);
      resume = cut + 1;
    }
    if (cut > 0) chunks.emplace_back(text.substr(0, cut));
    text.remove_prefix(resume);
  }
  std::erase_if(chunks, [](const std::string& c) { return c.empty(); });
  return chunks;
}

// Thin Bot API client: getUpdates long polling and sendMessage, with the
// retry behavior the wire demands (backoff on transport errors, honoring
// retry_after on 429).
class TelegramClient {
 public:
  explicit TelegramClient(AdapterConfig cfg, LogFn log = {})
      : cfg_(std::move(cfg)), log_(std::move(log)), http_(cfg_.api_base_url) {
    http_.set_connection_timeout(std::chrono::seconds(10));
  }

  void set_stop(const std::atomic<bool>* stop) { stop_ = stop; }

  // Updates with update_id >= offset, ascending. Transport failures walk
  // the backoff schedule and retry; a malformed response discards the batch
  // (offset unchanged, so nothing is ever skipped).
  std::vector<BotUpdate> poll_updates(std::int64_t offset,
                                      std::chrono::seconds timeout) {
    std::string target = api_path("getUpdates") +
                         "?timeout=" + std::to_string(timeout.count());
    if (offset > 0) target += "&offset=" + std::to_string(offset);

    http_.set_read_timeout(timeout + std::chrono::seconds(10));

    for (std::size_t attempt = 0;; ++attempt) {
      auto res = http_.Get(target);
      if (res && res->status < 500) {
        auto body = parse_envelope(res->status, res->body, "getUpdates");
        if (!body) return {}; // malformed; discard batch
        std::vector<BotUpdate> updates;
        for (const auto& uj : (*body)["result"]) {
          if (!uj.contains("update_id")) continue;
          BotUpdate u;
          u.update_id = uj["update_id"].get<std::int64_t>();
          if (uj.contains("message")) {
            const auto& mj = uj["message"];
            if (mj.contains("chat") && mj["chat"].contains("id"))
              u.chat_id = mj["chat"]["id"].get<std::int64_t>();
            if (mj.contains("from") && mj["from"].contains("id"))
              u.sender_id = mj["from"]["id"].get<std::int64_t>();
            if (mj.contains("text")) u.text = mj["text"].get<std::string>();
          }
          if (u.update_id >= offset) updates.push_back(std::move(u));
        }
        std::sort(updates.begin(), updates.end(),
                  [](const BotUpdate& a, const BotUpdate& b) {
                    return a.update_id < b.update_id;
                  });
        return updates;
      }
      if (attempt >= cfg_.retry_backoff.size() || stopping()) return {};
      log_line("warn", "getUpdates transport error; retrying");
      sleep_backoff(cfg_.retry_backoff[attempt]);
    }
  }

  // Sends msg.text, chunking oversized replies on line boundaries. Returns
  // the id of the last delivered message (0 when the chat is gone).
  std::int64_t send_message(const OutboundMessage& msg) {
    std::int64_t last_id = 0;
    bool first = true;
    for (const auto& chunk : chunk_text(msg.text)) {
      nlohmann::json payload{{"chat_id", msg.chat_id}, {"text", chunk}};
      if (first && msg.reply_to) payload["reply_to_message_id"] = *msg.reply_to;
      first = false;
      last_id = send_chunk(payload);
    }
    return last_id;
  }

 private:
  std::string api_path(const std::string& method) const {
    return "/bot" + cfg_.token + "/" + method;
  }

  bool stopping() const { return stop_ && stop_->load(); }

  void sleep_backoff(std::chrono::milliseconds d) {
    const auto deadline = std::chrono::steady_clock::now() + d;
    while (std::chrono::steady_clock::now() < deadline && !stopping())
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }

  void log_line(std::string_view level, std::string_view msg) {
    if (log_)
      log_(nlohmann::json{{"event", "transport"},
                          {"level", std::string(level)},
                          {"message", std::string(msg)}}
               .dump());
  }

  // Returns the parsed body when ok:true; throws on auth failure; nullopt
  // for anything malformed.
  std::optional<nlohmann::json> parse_envelope(int status, const std::string& body,
                                               const std::string& method) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("ok")) {
      log_line("warn", method + " returned a malformed response; discarding");
      return std::nullopt;
    }
    if (j["ok"] == true) return j;
    const int code = j.value("error_code", status);
    if (code == 401 || code == 403)
      throw TelegramAuthError(
          "Telegram rejected the bot token (HTTP " + std::to_string(code) +
          "); check the CBS_TELEGRAM_TOKEN environment variable");
    log_line("warn", method + " failed with error_code " + std::to_string(code));
    return std::nullopt;
  }

  std::int64_t send_chunk(const nlohmann::json& payload) {
    http_.set_read_timeout(std::chrono::seconds(30));
    std::size_t transport_attempt = 0;
    for (int rate_limit_round = 0; rate_limit_round < 5;) {
      auto res = http_.Post(api_path("sendMessage"), payload.dump(),
                            "application/json");
      if (!res || res->status >= 500) {
        if (transport_attempt >= cfg_.retry_backoff.size() || stopping())
          throw TelegramTransportError("sendMessage failed: transport error");
        log_line("warn", "sendMessage transport error; retrying");
        sleep_backoff(cfg_.retry_backoff[transport_attempt++]);
        continue;
      }
      nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
      if (j.is_discarded() || !j.contains("ok"))
        throw TelegramTransportError("sendMessage returned a malformed response");
      if (j["ok"] == true) {
        if (j.contains("result") && j["result"].contains("message_id"))
          return j["result"]["message_id"].get<std::int64_t>();
        return 0;
      }
      const int code = j.value("error_code", res->status);
      if (code == 401 || code == 403)
        throw TelegramAuthError(
            "Telegram rejected the bot token (HTTP " + std::to_string(code) +
            "); check the CBS_TELEGRAM_TOKEN environment variable");
      if (code == 429) {
        int retry_after = 1;
        if (j.contains("parameters") && j["parameters"].contains("retry_after"))
          retry_after = j["parameters"]["retry_after"].get<int>();
        log_line("warn", "rate limited; waiting " + std::to_string(retry_after) + "s");
        sleep_backoff(std::chrono::seconds(retry_after));
        ++rate_limit_round;
        continue;
      }
      const std::string description = j.value("description", "");
      if (code == 400 && description.find("chat not found") != std::string::npos) {
        log_line("warn", "chat not found; dropping message");
        return 0;
      }
      throw TelegramTransportError("sendMessage failed with error_code " +
                                   std::to_string(code));
    }
    throw TelegramTransportError("sendMessage still rate limited after retries");
  }

  AdapterConfig cfg_;
  LogFn log_;
  httplib::Client http_;
  const std::atomic<bool>* stop_ = nullptr;
};

// ChatChannel over a TelegramClient. Offset bookkeeping lives here: the
// offset advances only when the batch is acknowledged, and shutdown issues
// one zero-timeout poll so a finished batch is confirmed before exit.
class TelegramChannel : public ChatChannel {
 public:
  TelegramChannel(TelegramClient& client, std::chrono::seconds poll_timeout)
      : client_(client), poll_timeout_(poll_timeout) {}

  std::vector<InboundMessage> receive_batch() override {
    const auto updates = client_.poll_updates(offset_, poll_timeout_);
    std::vector<InboundMessage> batch;
    batch.reserve(updates.size());
    pending_ = offset_;
    for (const auto& u : updates) {
      pending_ = std::max(pending_, u.update_id + 1);
      batch.push_back({u.chat_id, u.sender_id, u.text});
    }
    return batch;
  }

  void send(std::int64_t chat_id, const std::string& text) override {
    client_.send_message({chat_id, text, std::nullopt});
  }

  void acknowledge_batch() override { offset_ = pending_; }

  void shutdown() override {
    try {
      client_.poll_updates(offset_, std::chrono::seconds(0));
    } catch (const std::exception&) {
      // Best effort: an unconfirmed batch is redelivered on the next run.
    }
  }

  std::int64_t offset() const { return offset_; }

 private:
  TelegramClient& client_;
  std::chrono::seconds poll_timeout_;
  std::int64_t offset_ = 0;
  std::int64_t pending_ = 0;
};

} // namespace cbs

#endif // CBS_TELEGRAM_HPP
