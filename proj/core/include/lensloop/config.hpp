#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lensloop/agent.hpp"
#include "lensloop/context_source.hpp"
#include "lensloop/environment.hpp"
#include "lensloop/flywheel.hpp"
#include "lensloop/gateway.hpp"
#include "lensloop/reward.hpp"
#include "lensloop/toyshop.hpp"
#include "lensloop/trainer.hpp"

namespace lensloop {

/// Where contextualized observations come from: "none", "model", "self"
/// (both need a backend) or "exemplar" (needs a store path).
struct SourceSpec {
  std::string kind = "none";
  std::string backend;
  std::filesystem::path path;
};

struct BackendSpec {
  std::string kind;  // "scripted" or "remote"
  std::filesystem::path rules;
  nlohmann::json inline_rules;
  std::string url;
  std::string model;
};

/// A parsed run configuration. Relative paths are resolved against the
/// directory holding the config file.
struct RunConfig {
  std::filesystem::path config_path;
  nlohmann::json raw;  // after overrides

  std::filesystem::path run_dir;
  std::string env_kind = "toyshop";
  std::filesystem::path catalog;
  std::string endpoint;
  std::string domain_info;
  std::optional<int> max_steps;
  int page_size = 10;

  std::filesystem::path tasks;
  std::string train_split = "train";
  std::string eval_split = "eval";

  std::map<std::string, BackendSpec> backends;
  std::string agent_backend;
  EnsembleConfig ensemble;

  SourceSpec initial_ctx;
  std::string bootstrap_backend;
  MineOptions mine;
  bool collect_with_contextualizer = false;
  int iterations = 1;
  TrainerSpec trainer;
  std::filesystem::path seed_demos;

  ObservationMode mode = ObservationMode::Contextualized;
  std::optional<SourceSpec> eval_ctx;  // unset: latest trained checkpoint, else the initial source
  std::filesystem::path curve_heldout;  // trajectory file; default is the run's buffer

  GatewayOptions gateway;
  int episode_parallelism = 1;

  /// SHA-256 of the canonical (sorted-key) dump of `raw`.
  std::string hash() const;
};

/// Sets a dotted key ("a.b.c=value"). The value is parsed as JSON when it
/// parses, otherwise taken as a string. Throws ConfigError.
void apply_override(nlohmann::json& doc, const std::string& assignment);

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
/// Reads the file, applies overrides in order and parses. Every problem is a
/// ConfigError.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Live objects built from a RunConfig: gateway with registered backends,
/// tasks, environments and context sources.
class Workspace {
 public:
  explicit Workspace(RunConfig config);

  const RunConfig& config() const { return config_; }
  Gateway& gateway() { return *gateway_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  std::vector<Task> split(const std::string& tag) const;
  const EnvironmentFactory& env_factory() const { return env_factory_; }

  std::filesystem::path buffer_path() const { return config_.run_dir / "trajectories.jsonl"; }

  /// Null for kind "none".
  std::shared_ptr<ContextSource> make_source(const SourceSpec& spec);
  std::shared_ptr<ContextSource> initial_source();
  /// Iteration-1 sampler: the bootstrap backend when set, else the initial source.
  std::shared_ptr<ContextSource> first_sampler();
  /// Source backed by the newest successful iteration manifest, or null.
  std::shared_ptr<ContextSource> latest_source();
  /// Paths of successful iteration manifests in iteration order.
  std::vector<std::filesystem::path> manifests() const;

  FlywheelSettings flywheel_settings() const;

 private:
  RunConfig config_;
  std::unique_ptr<Gateway> gateway_;
  std::vector<Task> tasks_;
  std::shared_ptr<const Catalog> catalog_;
  EnvironmentFactory env_factory_;
  std::shared_ptr<ContextSource> initial_;
  bool initial_built_ = false;
};

}  // namespace lensloop
