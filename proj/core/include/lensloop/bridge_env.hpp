#pragma once

#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "lensloop/environment.hpp"

namespace lensloop {

/// One request/response exchange of the bridge protocol. Requests are
/// {"op":"reset","task_id":...} or {"op":"step","action":"<browser action>"};
/// responses are {"observation":...,"reward":...,"done":...} or {"error":...}.
class BridgeTransport {
 public:
  virtual ~BridgeTransport() = default;
  virtual nlohmann::json exchange(const nlohmann::json& request) = 0;
};

/// POSTs each request line to an HTTP endpoint such as
/// "http://127.0.0.1:8765/bridge" and reads one JSON object back.
class HttpBridgeTransport final : public BridgeTransport {
 public:
  explicit HttpBridgeTransport(std::string endpoint, int timeout_seconds = 30);
  nlohmann::json exchange(const nlohmann::json& request) override;

 private:
  std::string endpoint_;
  int timeout_seconds_;
};

/// Newline-delimited JSON over a pair of byte streams (e.g. a child process'
/// stdin/stdout).
class StreamBridgeTransport final : public BridgeTransport {
 public:
  StreamBridgeTransport(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  nlohmann::json exchange(const nlohmann::json& request) override;

 private:
  std::istream& in_;
  std::ostream& out_;
  std::mutex mutex_;
};

class BridgeEnvironment final : public Environment {
 public:
  BridgeEnvironment(std::unique_ptr<BridgeTransport> transport, std::string domain_info, int max_steps = 30);

  Observation reset(const Task& task) override;
  StepOutcome step(const Action& action) override;

  ActionDialect dialect() const override { return ActionDialect::Browser; }
  std::string domain_info() const override { return domain_info_; }
  int max_steps() const override { return max_steps_; }

 private:
  nlohmann::json call(const nlohmann::json& request);

  std::unique_ptr<BridgeTransport> transport_;
  std::string domain_info_;
  int max_steps_;
  int steps_ = 0;
  bool open_ = false;
};

}  // namespace lensloop
