#include "lensloop/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <numeric>
#include <random>
#include <thread>

#include <boost/regex.hpp>

#include "http_util.hpp"
#include "lensloop/serialization.hpp"

namespace lensloop {

using nlohmann::json;

namespace {

// Failure of a remote call; `retryable` distinguishes transient transport
// problems (connection errors, 429, 5xx) from definitive rejections.
class TransportFailure : public Error {
 public:
  TransportFailure(const std::string& message, bool retryable)
      : Error(ErrorCode::TransportError, message), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

std::string env_or_empty(const std::string& name) {
  const char* value = std::getenv(name.c_str());
  return value ? std::string(value) : std::string();
}

std::string env_key(const std::string& backend_id) {
  std::string out;
  for (const char c : backend_id) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(c)) : '_');
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

struct ScriptedBackend::Compiled {
  std::vector<std::optional<boost::regex>> regexes;
};

ScriptedBackend::ScriptedBackend(std::vector<ScriptedRule> rules) : rules_(std::move(rules)) {
  auto compiled = std::make_shared<Compiled>();
  for (const auto& rule : rules_) {
    if (rule.match == ScriptedRule::Match::Regex) {
      try {
        compiled->regexes.emplace_back(boost::regex(rule.pattern));
      } catch (const boost::regex_error& e) {
        throw Error(ErrorCode::ConfigError, "invalid scripted regex '" + rule.pattern + "': " + e.what());
      }
    } else {
      compiled->regexes.emplace_back(std::nullopt);
    }
  }
  compiled_ = std::move(compiled);
  order_.resize(rules_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return rules_[a].priority < rules_[b].priority; });
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::ConfigError, "scripted rules must be a JSON list");
  std::vector<ScriptedRule> rules;
  for (const auto& entry : doc) {
    ScriptedRule rule;
    const std::string match = entry.value("match", "always");
    if (match == "contains") {
      rule.match = ScriptedRule::Match::Contains;
    } else if (match == "regex") {
      rule.match = ScriptedRule::Match::Regex;
    } else if (match == "always") {
      rule.match = ScriptedRule::Match::Always;
    } else {
      throw Error(ErrorCode::ConfigError, "unknown scripted matcher '" + match + "'");
    }
    rule.pattern = entry.value("pattern", "");
    if (!entry.contains("response") || !entry["response"].is_string()) {
      throw Error(ErrorCode::ConfigError, "scripted rule without a string response");
    }
    rule.response = entry["response"].get<std::string>();
    rule.priority = entry.value("priority", 0);
    rules.push_back(std::move(rule));
  }
  return std::make_shared<ScriptedBackend>(std::move(rules));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

std::optional<std::size_t> ScriptedBackend::firing_rule(const std::string& text) const {
  for (const std::size_t i : order_) {
    const ScriptedRule& rule = rules_[i];
    switch (rule.match) {
      case ScriptedRule::Match::Always:
        return i;
      case ScriptedRule::Match::Contains:
        if (text.find(rule.pattern) != std::string::npos) return i;
        break;
      case ScriptedRule::Match::Regex:
        if (boost::regex_search(text, *compiled_->regexes[i])) return i;
        break;
    }
  }
  return std::nullopt;
}

std::string ScriptedBackend::complete(const ChatRequest& request) {
  const auto rule = firing_rule(request.system + "\n" + request.user);
  if (!rule) throw Error(ErrorCode::ResponseEmpty, "no scripted rule matched");
  return rules_[*rule].response;
}

// ---------------------------------------------------------------------------

RemoteBackendConfig RemoteBackendConfig::from_env(const std::string& backend_id, std::string model,
                                                  std::string explicit_url, std::string explicit_key) {
  RemoteBackendConfig cfg;
  cfg.model = std::move(model);
  const std::string key = env_key(backend_id);
  cfg.base_url = !explicit_url.empty() ? std::move(explicit_url) : env_or_empty("LENSLOOP_BACKEND_" + key + "_URL");
  if (cfg.base_url.empty()) cfg.base_url = env_or_empty("LENSLOOP_API_BASE");
  cfg.api_key = !explicit_key.empty() ? std::move(explicit_key) : env_or_empty("LENSLOOP_BACKEND_" + key + "_KEY");
  if (cfg.api_key.empty()) cfg.api_key = env_or_empty("LENSLOOP_API_KEY");
  if (cfg.base_url.empty()) {
    throw Error(ErrorCode::ConfigError, "no endpoint for backend '" + backend_id +
                                            "' (set LENSLOOP_BACKEND_" + key + "_URL or LENSLOOP_API_BASE)");
  }
  return cfg;
}

RemoteBackend::RemoteBackend(RemoteBackendConfig config) : config_(std::move(config)) {}

std::string RemoteBackend::complete(const ChatRequest& request) {
  const http::Url url = http::parse_url(config_.base_url);
  std::string path = url.path;
  while (!path.empty() && path.back() == '/') path.pop_back();
  if (path.size() < 17 || path.substr(path.size() - 17) != "/chat/completions") path += "/chat/completions";

  json body{{"model", config_.model},
            {"messages", json::array({json{{"role", "system"}, {"content", request.system}},
                                      json{{"role", "user"}, {"content", request.user}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};

  auto client = http::make_client(url, config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = client->Post(path, headers, body.dump(), "application/json");
  if (!res) throw TransportFailure(config_.base_url + ": " + httplib::to_string(res.error()), true);
  if (res->status == 429 || res->status >= 500) {
    throw TransportFailure(config_.base_url + ": HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw TransportFailure(config_.base_url + ": HTTP " + std::to_string(res->status) + " " + res->body, false);
  }
  try {
    const json doc = json::parse(res->body);
    const json& content = doc.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const json::exception& e) {
    throw TransportFailure(std::string("malformed chat-completions response: ") + e.what(), false);
  }
}

// ---------------------------------------------------------------------------

const std::string& Completion::value() const {
  if (error) throw *error;
  return text;
}

json to_json(const TranscriptEntry& entry) {
  json j{{"seq", entry.seq},
         {"backend_id", entry.backend_id},
         {"system", entry.system},
         {"user", entry.user},
         {"temperature", entry.temperature},
         {"max_tokens", entry.max_tokens},
         {"attempts", entry.attempts}};
  if (entry.error.empty()) {
    j["response"] = entry.response;
  } else {
    j["error"] = entry.error;
  }
  return j;
}

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)) {
  if (options_.parallelism < 1) options_.parallelism = 1;
  if (options_.retry.attempts < 1) options_.retry.attempts = 1;
  if (!options_.transcript_path.empty()) {
    if (options_.transcript_path.has_parent_path()) {
      std::filesystem::create_directories(options_.transcript_path.parent_path());
    }
    transcript_file_.open(options_.transcript_path, std::ios::app | std::ios::binary);
    if (!transcript_file_) throw Error(ErrorCode::IoError, "cannot open transcript " + options_.transcript_path.string());
  }
}

void Gateway::register_backend(const std::string& id, std::shared_ptr<Backend> backend) {
  std::unique_lock lock(backends_mutex_);
  backends_[id] = std::move(backend);
}

bool Gateway::has_backend(const std::string& id) const {
  std::shared_lock lock(backends_mutex_);
  return backends_.count(id) != 0;
}

std::shared_ptr<Backend> Gateway::backend(const std::string& id) const {
  std::shared_lock lock(backends_mutex_);
  const auto it = backends_.find(id);
  if (it == backends_.end()) throw Error(ErrorCode::BackendUnknown, "backend '" + id + "' is not registered");
  return it->second;
}

TranscriptEntry Gateway::run(const ChatRequest& request, std::string& text, std::optional<Error>& error) {
  TranscriptEntry entry;
  entry.backend_id = request.backend_id;
  entry.system = request.system;
  entry.user = request.user;
  entry.temperature = request.temperature;
  entry.max_tokens = request.max_tokens;

  try {
    if (request.system.size() + request.user.size() > options_.max_input_bytes) {
      throw Error(ErrorCode::InputTooLarge, std::to_string(request.system.size() + request.user.size()) +
                                                " bytes exceeds the " + std::to_string(options_.max_input_bytes) +
                                                "-byte input limit");
    }
    const auto impl = backend(request.backend_id);
    thread_local std::mt19937 rng{std::random_device{}()};
    for (int attempt = 1;; ++attempt) {
      entry.attempts = attempt;
      try {
        text = impl->complete(request);
        break;
      } catch (const TransportFailure& failure) {
        if (!failure.retryable() || attempt >= options_.retry.attempts) {
          throw Error(ErrorCode::TransportError,
                      std::string(failure.what()) + " (after " + std::to_string(attempt) + " attempts)");
        }
        double delay = static_cast<double>(options_.retry.backoff_base.count()) * static_cast<double>(1 << (attempt - 1));
        if (options_.retry.jitter) delay *= std::uniform_real_distribution<double>(0.5, 1.5)(rng);
        std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(delay)));
      }
    }
    if (text.empty()) throw Error(ErrorCode::ResponseEmpty, "backend '" + request.backend_id + "' returned nothing");
    entry.response = text;
  } catch (const Error& e) {
    error = e;
    entry.error = e.what();
  }
  return entry;
}

void Gateway::record(std::vector<TranscriptEntry> entries) {
  std::lock_guard lock(transcript_mutex_);
  for (auto& entry : entries) {
    entry.seq = next_seq_++;
    if (transcript_file_.is_open()) {
      transcript_file_ << to_json(entry).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
      transcript_file_.flush();
    }
    transcript_.push_back(std::move(entry));
  }
}

std::string Gateway::complete(const ChatRequest& request) {
  std::string text;
  std::optional<Error> error;
  record({run(request, text, error)});
  if (error) throw *error;
  return text;
}

std::vector<Completion> Gateway::complete_many(const std::vector<ChatRequest>& requests) {
  std::vector<Completion> results(requests.size());
  std::vector<TranscriptEntry> entries(requests.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      entries[i] = run(requests[i], results[i].text, results[i].error);
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(options_.parallelism), requests.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  // Appended in request order so the transcript does not depend on scheduling.
  record(std::move(entries));
  return results;
}

std::vector<TranscriptEntry> Gateway::transcript() const {
  std::lock_guard lock(transcript_mutex_);
  return transcript_;
}

}  // namespace lensloop
