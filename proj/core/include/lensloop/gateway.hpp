#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lensloop/error.hpp"

namespace lensloop {

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 2048;
  std::string backend_id;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct ScriptedRule {
  enum class Match { Contains, Regex, Always };

  Match match = Match::Always;
  std::string pattern;
  std::string response;
  int priority = 0;
};

/// Test double whose output is a pure function of the request text
/// (system + "\n" + user). Rules are tried in ascending (priority, insertion
/// order); the first match fires.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::vector<ScriptedRule> rules);

  /// Parses a JSON list of {"match":"contains"|"regex"|"always",
  /// "pattern":..., "response":..., "priority":...}.
  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& rules);
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  std::string complete(const ChatRequest& request) override;
  /// Index (in insertion order) of the rule that fires for `text`, if any.
  std::optional<std::size_t> firing_rule(const std::string& text) const;

 private:
  struct Compiled;
  std::vector<ScriptedRule> rules_;
  std::vector<std::size_t> order_;
  std::shared_ptr<const Compiled> compiled_;
};

struct RemoteBackendConfig {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string model;
  std::string api_key;
  int timeout_seconds = 120;

  /// Resolves URL and key from LENSLOOP_BACKEND_<ID>_URL / _KEY, falling back
  /// to LENSLOOP_API_BASE / LENSLOOP_API_KEY. Explicit values win.
  static RemoteBackendConfig from_env(const std::string& backend_id, std::string model,
                                      std::string explicit_url = {}, std::string explicit_key = {});
};

/// Chat-completions client: POST {base_url}/chat/completions with
/// {"model","messages":[system,user],"temperature","max_tokens"}.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteBackendConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  RemoteBackendConfig config_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  bool jitter = true;
};

struct GatewayOptions {
  int parallelism = 4;
  RetryPolicy retry;
  std::size_t max_input_bytes = 1 << 20;
  int max_tokens = 2048;  // default for requests built by the pipeline
  std::filesystem::path transcript_path;  // empty: keep the transcript in memory only
};

/// Result slot of complete_many(): either text or the error for that slot.
struct Completion {
  std::string text;
  std::optional<Error> error;

  bool ok() const { return !error.has_value(); }
  const std::string& value() const;
};

struct TranscriptEntry {
  std::uint64_t seq = 0;
  std::string backend_id;
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 0;
  int attempts = 0;
  std::string response;
  std::string error;  // empty on success
};

nlohmann::json to_json(const TranscriptEntry& entry);

class Gateway {
 public:
  explicit Gateway(GatewayOptions options = {});

  void register_backend(const std::string& id, std::shared_ptr<Backend> backend);
  bool has_backend(const std::string& id) const;

  std::string complete(const ChatRequest& request);
  /// Runs requests concurrently (bounded by `parallelism`); slot i answers
  /// request i and failures stay in their slot.
  std::vector<Completion> complete_many(const std::vector<ChatRequest>& requests);

  std::vector<TranscriptEntry> transcript() const;
  const GatewayOptions& options() const { return options_; }

 private:
  std::shared_ptr<Backend> backend(const std::string& id) const;
  TranscriptEntry run(const ChatRequest& request, std::string& text, std::optional<Error>& error);
  void record(std::vector<TranscriptEntry> entries);

  GatewayOptions options_;
  mutable std::shared_mutex backends_mutex_;
  std::map<std::string, std::shared_ptr<Backend>> backends_;

  mutable std::mutex transcript_mutex_;
  std::vector<TranscriptEntry> transcript_;
  std::ofstream transcript_file_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace lensloop
