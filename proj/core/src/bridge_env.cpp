#include "lensloop/bridge_env.hpp"

#include <istream>
#include <ostream>

#include "http_util.hpp"
#include "lensloop/error.hpp"

namespace lensloop {

using nlohmann::json;

HttpBridgeTransport::HttpBridgeTransport(std::string endpoint, int timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {}

json HttpBridgeTransport::exchange(const json& request) {
  const http::Url url = http::parse_url(endpoint_);
  auto client = http::make_client(url, timeout_seconds_);
  auto res = client->Post(url.path.empty() ? "/" : url.path, request.dump() + "\n", "application/json");
  if (!res) throw Error(ErrorCode::BridgeUnavailable, endpoint_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error(ErrorCode::BridgeUnavailable, endpoint_ + ": HTTP " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("bridge response: ") + e.what());
  }
}

json StreamBridgeTransport::exchange(const json& request) {
  std::lock_guard lock(mutex_);
  out_ << request.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::BridgeUnavailable, "bridge stream closed for writing");
  std::string line;
  if (!std::getline(in_, line)) throw Error(ErrorCode::BridgeUnavailable, "bridge stream closed");
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("bridge response: ") + e.what());
  }
}

BridgeEnvironment::BridgeEnvironment(std::unique_ptr<BridgeTransport> transport, std::string domain_info,
                                     int max_steps)
    : transport_(std::move(transport)), domain_info_(std::move(domain_info)), max_steps_(max_steps) {
  if (!transport_) throw Error(ErrorCode::ConfigError, "bridge environment needs a transport");
}

json BridgeEnvironment::call(const json& request) {
  json response = transport_->exchange(request);
  if (!response.is_object()) throw Error(ErrorCode::SchemaError, "bridge response must be an object");
  if (response.contains("error")) {
    const std::string message = response["error"].is_string() ? response["error"].get<std::string>()
                                                              : response["error"].dump();
    if (request.value("op", "") == "reset") throw Error(ErrorCode::UnknownTask, message);
    throw Error(ErrorCode::BridgeUnavailable, message);
  }
  if (!response.contains("observation") || !response["observation"].is_string()) {
    throw Error(ErrorCode::SchemaError, "bridge response has no observation");
  }
  return response;
}

Observation BridgeEnvironment::reset(const Task& task) {
  const json response = call(json{{"op", "reset"}, {"task_id", task.id}});
  steps_ = 0;
  open_ = true;
  return Observation{response["observation"].get<std::string>(), PageKind::External, 0};
}

StepOutcome BridgeEnvironment::step(const Action& action) {
  if (!open_) throw Error(ErrorCode::EpisodeClosed, "no open episode");
  const std::string text = render_action(action, ActionDialect::Browser);
  const json response = call(json{{"op", "step"}, {"action", text}});
  ++steps_;
  StepOutcome outcome;
  outcome.observation = Observation{response["observation"].get<std::string>(), PageKind::External, steps_};
  outcome.reward = response.value("reward", 0.0);
  outcome.done = response.value("done", false);
  if (outcome.reward < 0.0 || outcome.reward > 1.0) {
    throw Error(ErrorCode::SchemaError, "bridge reward outside [0, 1]");
  }
  if (!outcome.done && steps_ >= max_steps_) {
    outcome.done = true;
    outcome.reward = 0.0;
  }
  if (outcome.done) open_ = false;
  return outcome;
}

}  // namespace lensloop
