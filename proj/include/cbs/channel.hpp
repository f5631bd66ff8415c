#ifndef CBS_CHANNEL_HPP
#define CBS_CHANNEL_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbs/engine.hpp"

namespace cbs {

inline constexpr std::string_view kNonTextNotice =
    "I only understand text messages. Please type your question.";

struct InboundMessage {
  std::int64_t chat_id = 0;
  std::int64_t sender_id = 0;
  std::optional<std::string> text; // absent for non-text messages
};

// Transport boundary. The engine never sees platform specifics; a new
// platform means a new channel implementation, zero engine changes.
class ChatChannel {
 public:
  virtual ~ChatChannel() = default;

  // Blocks up to the transport's poll timeout; empty batch on timeout.
  virtual std::vector<InboundMessage> receive_batch() = 0;
  virtual void send(std::int64_t chat_id, const std::string& text) = 0;

  // Marks the last received batch as processed. Until called, a crash
  // redelivers the batch (at-least-once inbound).
  virtual void acknowledge_batch() = 0;

  // Final confirmation on graceful shutdown.
  virtual void shutdown() {}
};

// Structured log sink: receives one complete line per event.
using LogFn = std::function<void(const std::string& line)>;

namespace detail {

inline std::string iso8601_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void log_json(const LogFn& log, nlohmann::json fields) {
  if (!log) return;
  fields["ts"] = iso8601_utc_now();
  log(fields.dump());
}

} // namespace detail

inline std::string start_greeting(const Engine& engine) {
  std::string topics;
  for (const auto& name : engine.topic_names()) {
    if (!topics.empty()) topics += ", ";
    topics += name;
  }
  return "Hi! I give information security advice. Ask me about: " + topics + ".";
}

// Poll -> reply -> acknowledge loop. The batch in flight is always finished
// before the loop exits; acknowledgment happens only after every reply in
// the batch went out.
inline void run_loop(Engine& engine, ChatChannel& channel,
                     const std::atomic<bool>& stop, const LogFn& log = {},
                     std::chrono::seconds metrics_interval = std::chrono::seconds(60)) {
  auto last_metrics = std::chrono::steady_clock::now();
  while (!stop.load()) {
    const auto batch = channel.receive_batch();
    for (const auto& msg : batch) {
      if (msg.chat_id == 0) continue; // update without a chat: nothing to answer
      if (!msg.text) {
        channel.send(msg.chat_id, std::string(kNonTextNotice));
        detail::log_json(log, {{"event", "non_text"}, {"chat_id", msg.chat_id}});
        continue;
      }
      if (*msg.text == "/start") {
        channel.send(msg.chat_id, start_greeting(engine));
        detail::log_json(log, {{"event", "start"}, {"chat_id", msg.chat_id}});
        continue;
      }
      std::vector<EngineEvent> trace;
      const Reply reply =
          engine.handle_request(*msg.text, std::chrono::steady_clock::now(), &trace);
      channel.send(msg.chat_id, reply.text);

      const KeywordSet keys = extract_keywords(*msg.text, engine.stopwords());
      const bool hit = trace.size() > 1 && trace[1] == EngineEvent::cache_get_hit;
      detail::log_json(log,
                       {{"event", "request"},
                        {"chat_id", msg.chat_id},
                        {"keywords", make_cache_key(keys).canonical},
                        {"cache", hit ? "hit" : "miss"},
                        {"kind", reply.kind == ReplyKind::advice ? "advice" : "fallback"}});
    }
    channel.acknowledge_batch();

    const auto now = std::chrono::steady_clock::now();
    if (log && now - last_metrics >= metrics_interval) {
      last_metrics = now;
      const EngineMetrics m = engine.metrics();
      const CacheStats c = engine.cache_stats();
      detail::log_json(log, {{"event", "metrics"},
                             {"requests", m.requests},
                             {"cache_hits", m.cache_hits},
                             {"searches", m.searches},
                             {"entries_scored", m.entries_scored},
                             {"fallbacks", m.fallbacks},
                             {"cache_size", c.size},
                             {"cache_evictions", c.evictions}});
    }
  }
  channel.shutdown();
}

} // namespace cbs

#endif // CBS_CHANNEL_HPP
