#ifndef CBS_TESTS_MOCK_TELEGRAM_HPP
#define CBS_TESTS_MOCK_TELEGRAM_HPP

// In-process Bot API stand-in implementing the getUpdates/sendMessage
// subset, bit-compatible with the platform envelope:
//   {ok, result | error_code, description, parameters.retry_after}
// An update is confirmed (deleted) once getUpdates arrives with an offset
// above its update_id; unconfirmed updates are redelivered.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace testsupport {

class MockTelegramServer {
 public:
  struct SentMessage {
    std::int64_t chat_id = 0;
    std::string text;
    std::optional<std::int64_t> reply_to;
  };

  explicit MockTelegramServer(std::string token) : token_(std::move(token)) {
    srv_.Get(R"(/bot([^/]+)/getUpdates)",
             [this](const httplib::Request& req, httplib::Response& res) {
               handle_get_updates(req, res);
             });
    srv_.Post(R"(/bot([^/]+)/sendMessage)",
              [this](const httplib::Request& req, httplib::Response& res) {
                handle_send_message(req, res);
              });
  }

  ~MockTelegramServer() { stop(); }

  void start() {
    port_ = srv_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { srv_.listen_after_bind(); });
    while (!srv_.is_running())
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }

  void stop() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) {
      srv_.stop();
      thread_.join();
    }
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int port() const { return port_; }

  std::int64_t enqueue_text(std::int64_t chat_id, std::int64_t sender_id,
                            const std::string& text) {
    return enqueue(chat_id, sender_id, text, /*with_text=*/true);
  }

  // A sticker: a message without a text field.
  std::int64_t enqueue_non_text(std::int64_t chat_id, std::int64_t sender_id) {
    return enqueue(chat_id, sender_id, "", /*with_text=*/false);
  }

  void set_next_update_id(std::int64_t id) {
    std::lock_guard lock(mu_);
    next_update_id_ = id;
  }

  void fail_next_get_updates(int n) {
    std::lock_guard lock(mu_);
    get_updates_failures_ = n;
  }

  void rate_limit_next_send(int retry_after_seconds) {
    std::lock_guard lock(mu_);
    rate_limit_retry_after_ = retry_after_seconds;
  }

  std::vector<SentMessage> sent() const {
    std::lock_guard lock(mu_);
    return sent_;
  }

  std::size_t send_attempts() const {
    std::lock_guard lock(mu_);
    return send_attempt_times_.size();
  }

  std::vector<std::chrono::steady_clock::time_point> send_attempt_times() const {
    std::lock_guard lock(mu_);
    return send_attempt_times_;
  }

  std::vector<std::int64_t> observed_offsets() const {
    std::lock_guard lock(mu_);
    return observed_offsets_;
  }

  std::vector<std::int64_t> confirmed_ids() const {
    std::lock_guard lock(mu_);
    return confirmed_ids_;
  }

  // How many times each update id was handed out in a getUpdates response.
  std::size_t delivery_count(std::int64_t update_id) const {
    std::lock_guard lock(mu_);
    auto it = deliveries_.find(update_id);
    return it == deliveries_.end() ? 0 : it->second;
  }

  std::size_t pending_updates() const {
    std::lock_guard lock(mu_);
    return updates_.size();
  }

  bool wait_for_sent(std::size_t n, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return sent_.size() >= n; });
  }

  bool wait_for_confirmed(std::int64_t update_id, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] {
      for (auto id : confirmed_ids_)
        if (id == update_id) return true;
      return false;
    });
  }

 private:
  std::int64_t enqueue(std::int64_t chat_id, std::int64_t sender_id,
                       const std::string& text, bool with_text) {
    nlohmann::json message{{"message_id", ++next_message_id_},
                           {"from", {{"id", sender_id}}},
                           {"chat", {{"id", chat_id}}}};
    if (with_text)
      message["text"] = text;
    else
      message["sticker"] = {{"emoji", "\xF0\x9F\x91\x8D"}};
    std::int64_t id;
    {
      std::lock_guard lock(mu_);
      id = next_update_id_++;
      updates_.push_back({{"update_id", id}, {"message", message}});
    }
    cv_.notify_all();
    return id;
  }

  bool check_token(const httplib::Request& req, httplib::Response& res) {
    if (req.matches.size() > 1 && req.matches[1] == token_) return true;
    res.status = 401;
    res.set_content(
        nlohmann::json{
            {"ok", false}, {"error_code", 401}, {"description", "Unauthorized"}}
            .dump(),
        "application/json");
    return false;
  }

  void handle_get_updates(const httplib::Request& req, httplib::Response& res) {
    if (!check_token(req, res)) return;

    std::int64_t offset = 0;
    if (req.has_param("offset")) offset = std::stoll(req.get_param_value("offset"));
    std::int64_t timeout_s = 0;
    if (req.has_param("timeout")) timeout_s = std::stoll(req.get_param_value("timeout"));

    std::unique_lock lock(mu_);
    observed_offsets_.push_back(offset);

    if (get_updates_failures_ > 0) {
      --get_updates_failures_;
      res.status = 500;
      res.set_content("upstream hiccup", "text/plain");
      return;
    }

    // Confirm everything below the offset.
    while (!updates_.empty() &&
           updates_.front()["update_id"].get<std::int64_t>() < offset) {
      confirmed_ids_.push_back(updates_.front()["update_id"].get<std::int64_t>());
      updates_.pop_front();
    }
    cv_.notify_all();

    const auto deadline =
        std::chrono::steady_clock::now() +
        std::min(std::chrono::seconds(timeout_s), std::chrono::seconds(2));
    cv_.wait_until(lock, deadline, [&] {
      if (stopping_) return true;
      for (const auto& u : updates_)
        if (u["update_id"].get<std::int64_t>() >= offset) return true;
      return false;
    });

    nlohmann::json result = nlohmann::json::array();
    for (const auto& u : updates_) {
      const auto id = u["update_id"].get<std::int64_t>();
      if (id >= offset) {
        result.push_back(u);
        ++deliveries_[id];
      }
    }
    res.set_content(nlohmann::json{{"ok", true}, {"result", result}}.dump(),
                    "application/json");
  }

  void handle_send_message(const httplib::Request& req, httplib::Response& res) {
    if (!check_token(req, res)) return;

    std::lock_guard lock(mu_);
    send_attempt_times_.push_back(std::chrono::steady_clock::now());

    if (rate_limit_retry_after_ > 0) {
      const int retry_after = rate_limit_retry_after_;
      rate_limit_retry_after_ = 0;
      res.status = 429;
      res.set_content(
          nlohmann::json{{"ok", false},
                         {"error_code", 429},
                         {"description", "Too Many Requests: retry after " +
                                             std::to_string(retry_after)},
                         {"parameters", {{"retry_after", retry_after}}}}
              .dump(),
          "application/json");
      return;
    }

    const auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("chat_id") || !body.contains("text")) {
      res.status = 400;
      res.set_content(nlohmann::json{{"ok", false},
                                     {"error_code", 400},
                                     {"description", "Bad Request"}}
                          .dump(),
                      "application/json");
      return;
    }

    SentMessage msg;
    msg.chat_id = body["chat_id"].get<std::int64_t>();
    msg.text = body["text"].get<std::string>();
    if (body.contains("reply_to_message_id"))
      msg.reply_to = body["reply_to_message_id"].get<std::int64_t>();
    sent_.push_back(std::move(msg));
    cv_.notify_all();

    res.set_content(
        nlohmann::json{{"ok", true},
                       {"result", {{"message_id", ++next_message_id_}}}}
            .dump(),
        "application/json");
  }

  std::string token_;
  httplib::Server srv_;
  std::thread thread_;
  int port_ = 0;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::deque<nlohmann::json> updates_;
  std::vector<SentMessage> sent_;
  std::vector<std::chrono::steady_clock::time_point> send_attempt_times_;
  std::vector<std::int64_t> observed_offsets_;
  std::vector<std::int64_t> confirmed_ids_;
  std::map<std::int64_t, std::size_t> deliveries_;
  std::int64_t next_update_id_ = 1;
  std::int64_t next_message_id_ = 100;
  int get_updates_failures_ = 0;
  int rate_limit_retry_after_ = 0;
};

} // namespace testsupport

#endif // CBS_TESTS_MOCK_TELEGRAM_HPP
