#pragma once

#include <httplib.h>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "lensloop/config.hpp"
#include "lensloop/gateway.hpp"
#include "lensloop/serialization.hpp"
#include "lensloop/task.hpp"
#include "lensloop/toyshop.hpp"

namespace lensloop::testing {

inline std::filesystem::path demo_dir() { return LENSLOOP_DEMO_DIR; }
inline std::filesystem::path asset_dir() { return LENSLOOP_ASSET_DIR; }

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lensloop-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) { return read_file(path); }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::shared_ptr<const Catalog> demo_catalog() {
  static const auto catalog = std::make_shared<const Catalog>(load_catalog(demo_dir() / "toyshop_catalog_v1.json"));
  return catalog;
}

inline std::vector<Task> demo_tasks() { return load_tasks(demo_dir() / "tasks.json"); }

inline EnvironmentFactory demo_env_factory(int max_steps = 15) {
  const auto catalog = demo_catalog();
  return [catalog, max_steps](const Task&) -> std::unique_ptr<Environment> {
    return std::make_unique<ToyShop>(catalog, ToyShopOptions{max_steps, 10});
  };
}

/// The demo run configuration pointed at a scratch run directory.
inline RunConfig demo_config(const std::filesystem::path& run_dir, std::vector<std::string> overrides = {}) {
  overrides.insert(overrides.begin(), "run_dir=\"" + run_dir.string() + "\"");
  return load_config(demo_dir() / "run.json", overrides);
}

/// In-process HTTP server on an ephemeral localhost port.
class StubServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit StubServer(Handler handler) {
    server_.Post(".*", [handler](const httplib::Request& req, httplib::Response& res) { handler(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string url(const std::string& path = "") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

/// Chat-completions response body carrying `content`.
inline std::string chat_reply(const std::string& content) {
  return nlohmann::json{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}
      .dump();
}

inline std::shared_ptr<ScriptedBackend> scripted(std::vector<ScriptedRule> rules) {
  return std::make_shared<ScriptedBackend>(std::move(rules));
}

inline ScriptedRule always(std::string response, int priority = 100) {
  return ScriptedRule{ScriptedRule::Match::Always, "", std::move(response), priority};
}

inline ScriptedRule contains(std::string pattern, std::string response, int priority = 0) {
  return ScriptedRule{ScriptedRule::Match::Contains, std::move(pattern), std::move(response), priority};
}

inline GatewayOptions quiet_gateway(std::filesystem::path transcript = {}) {
  GatewayOptions options;
  options.retry.attempts = 1;
  options.retry.backoff_base = std::chrono::milliseconds(0);
  options.retry.jitter = false;
  options.transcript_path = std::move(transcript);
  return options;
}

}  // namespace lensloop::testing
