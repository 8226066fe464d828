#include "lensloop/config.hpp"

#include <algorithm>

#include "lensloop/bridge_env.hpp"
#include "lensloop/datastore.hpp"
#include "lensloop/error.hpp"
#include "lensloop/hashing.hpp"
#include "lensloop/serialization.hpp"
#include "text_util.hpp"

namespace lensloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& message) { throw Error(ErrorCode::ConfigError, message); }

const json* child(const json& doc, const char* key) {
  if (!doc.is_object()) return nullptr;
  const auto it = doc.find(key);
  return it == doc.end() || it->is_null() ? nullptr : &*it;
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  const json* v = child(doc, key);
  if (!v) return fallback;
  try {
    return v->get<T>();
  } catch (const json::exception&) {
    bad(std::string("config key '") + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

SourceSpec parse_source(const json& doc, const fs::path& base, const std::string& where) {
  SourceSpec spec;
  if (doc.is_string()) {
    spec.kind = doc.get<std::string>();
  } else if (doc.is_object()) {
    spec.kind = get_or<std::string>(doc, "kind", "none");
    spec.backend = get_or<std::string>(doc, "backend", "");
    spec.path = resolve(base, get_or<std::string>(doc, "path", ""));
  } else {
    bad(where + " must be a string or an object");
  }
  if (spec.kind != "none" && spec.kind != "model" && spec.kind != "self" && spec.kind != "exemplar") {
    bad(where + ": unknown source kind '" + spec.kind + "'");
  }
  if ((spec.kind == "model" || spec.kind == "self") && spec.backend.empty()) bad(where + " needs a backend");
  if (spec.kind == "exemplar" && spec.path.empty()) bad(where + " needs a path");
  return spec;
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) bad("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) bad("override key '" + key + "' has an empty segment");
    if (!node->is_object()) {
      if (!node->is_null()) bad("override key '" + key + "' descends into a non-object");
      *node = json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  *node = std::move(value);
}

std::string RunConfig::hash() const { return sha256_hex(raw.dump()); }

RunConfig parse_config(const json& doc, const fs::path& base) {
  if (!doc.is_object()) bad("config must be a JSON object");
  RunConfig cfg;
  cfg.raw = doc;

  cfg.run_dir = resolve(base, get_or<std::string>(doc, "run_dir", "run"));

  if (const json* env = child(doc, "env")) {
    cfg.env_kind = get_or<std::string>(*env, "kind", "toyshop");
    cfg.catalog = resolve(base, get_or<std::string>(*env, "catalog", ""));
    cfg.endpoint = get_or<std::string>(*env, "endpoint", "");
    cfg.domain_info = get_or<std::string>(*env, "domain_info", "");
    if (child(*env, "max_steps")) cfg.max_steps = get_or<int>(*env, "max_steps", 0);
    cfg.page_size = get_or<int>(*env, "page_size", 10);
  }
  if (cfg.env_kind == "toyshop") {
    if (cfg.catalog.empty()) bad("env.catalog is required for the toyshop environment");
  } else if (cfg.env_kind == "bridge") {
    if (cfg.endpoint.empty()) bad("env.endpoint is required for the bridge environment");
  } else {
    bad("env.kind must be 'toyshop' or 'bridge'");
  }
  if (cfg.max_steps && *cfg.max_steps < 1) bad("env.max_steps must be positive");

  cfg.tasks = resolve(base, get_or<std::string>(doc, "tasks", ""));
  if (cfg.tasks.empty()) bad("'tasks' is required");
  cfg.train_split = get_or<std::string>(doc, "train_split", "train");
  cfg.eval_split = get_or<std::string>(doc, "eval_split", "eval");

  if (const json* backends = child(doc, "backends")) {
    if (!backends->is_object()) bad("'backends' must be an object");
    for (const auto& [id, spec] : backends->items()) {
      BackendSpec b;
      b.kind = get_or<std::string>(spec, "kind", "");
      if (b.kind == "scripted") {
        if (const json* rules = child(spec, "rules")) {
          if (rules->is_string()) {
            b.rules = resolve(base, rules->get<std::string>());
          } else {
            b.inline_rules = *rules;
          }
        } else {
          bad("scripted backend '" + id + "' needs rules");
        }
      } else if (b.kind == "remote") {
        b.url = get_or<std::string>(spec, "url", "");
        b.model = get_or<std::string>(spec, "model", id);
      } else {
        bad("backend '" + id + "' has unknown kind '" + b.kind + "'");
      }
      cfg.backends.emplace(id, std::move(b));
    }
  }
  const auto require_backend = [&](const std::string& id, const std::string& where) {
    if (!cfg.backends.count(id)) bad(where + " names unknown backend '" + id + "'");
  };

  cfg.agent_backend = get_or<std::string>(doc, "agent_backend", "");
  if (cfg.agent_backend.empty()) bad("'agent_backend' is required");
  require_backend(cfg.agent_backend, "agent_backend");

  if (const json* ens = child(doc, "ensemble")) {
    cfg.ensemble.agent_backends = get_or<std::vector<std::string>>(*ens, "agents", {});
    if (const json* judge = child(*ens, "judge")) cfg.ensemble.judge_backend = judge->get<std::string>();
    if (const json* kinds = child(*ens, "open_ended_kinds")) {
      cfg.ensemble.open_ended_kinds.clear();
      for (const auto& k : *kinds) {
        const std::string verb = k.get<std::string>();
        auto kind = kind_from_verb(verb, ActionDialect::Browser);
        if (!kind) kind = kind_from_verb(verb, ActionDialect::Shop);
        if (!kind) bad("ensemble.open_ended_kinds: unknown action '" + k.get<std::string>() + "'");
        cfg.ensemble.open_ended_kinds.insert(*kind);
      }
    }
  }
  if (cfg.ensemble.agent_backends.empty()) cfg.ensemble.agent_backends = {cfg.agent_backend};
  for (const auto& id : cfg.ensemble.agent_backends) require_backend(id, "ensemble.agents");
  if (cfg.ensemble.judge_backend) require_backend(*cfg.ensemble.judge_backend, "ensemble.judge");

  if (const json* ctx = child(doc, "contextualizer")) {
    if (const json* initial = child(*ctx, "initial")) cfg.initial_ctx = parse_source(*initial, base, "contextualizer.initial");
    cfg.bootstrap_backend = get_or<std::string>(*ctx, "bootstrap_backend", "");
    cfg.mine.n = get_or<int>(*ctx, "n", cfg.mine.n);
    cfg.mine.temperature = get_or<double>(*ctx, "temperature", cfg.mine.temperature);
    cfg.collect_with_contextualizer = get_or<bool>(*ctx, "collect_with_contextualizer", false);
  }
  if (cfg.mine.n < 1) bad("contextualizer.n must be at least 1");
  if (!cfg.initial_ctx.backend.empty()) require_backend(cfg.initial_ctx.backend, "contextualizer.initial");
  if (!cfg.bootstrap_backend.empty()) require_backend(cfg.bootstrap_backend, "contextualizer.bootstrap_backend");
  cfg.mine.keep_zero_reward_retry = get_or<bool>(doc, "keep_zero_reward_retry", true);

  cfg.iterations = get_or<int>(doc, "iterations", 1);
  if (cfg.iterations < 1) bad("'iterations' must be at least 1");

  if (const json* trainer = child(doc, "trainer")) {
    const auto kind = trainer_kind_from_string(get_or<std::string>(*trainer, "kind", "exemplar"));
    if (!kind) bad("trainer.kind must be 'exemplar' or 'external_sft'");
    cfg.trainer.kind = *kind;
    cfg.trainer.adapter_endpoint = get_or<std::string>(*trainer, "endpoint", "");
    cfg.trainer.adapter_command = get_or<std::string>(*trainer, "command", "");
    cfg.trainer.timeout_seconds = get_or<int>(*trainer, "timeout_seconds", cfg.trainer.timeout_seconds);
  }

  cfg.seed_demos = resolve(base, get_or<std::string>(doc, "seed_demos", ""));

  const auto mode = observation_mode_from_string(get_or<std::string>(doc, "mode", "Contextualized"));
  if (!mode) bad("'mode' must be 'Raw' or 'Contextualized'");
  cfg.mode = *mode;
  if (const json* ev = child(doc, "eval")) {
    if (const json* ctx = child(*ev, "ctx")) {
      if (!(ctx->is_string() && ctx->get<std::string>() == "latest")) cfg.eval_ctx = parse_source(*ctx, base, "eval.ctx");
    }
  }
  if (const json* curve = child(doc, "curve")) {
    cfg.curve_heldout = resolve(base, get_or<std::string>(*curve, "heldout", ""));
  }

  if (const json* gw = child(doc, "gateway")) {
    cfg.gateway.parallelism = get_or<int>(*gw, "parallelism", cfg.gateway.parallelism);
    cfg.gateway.retry.attempts = get_or<int>(*gw, "retry_attempts", cfg.gateway.retry.attempts);
    cfg.gateway.retry.backoff_base =
        std::chrono::milliseconds(get_or<int>(*gw, "backoff_ms", static_cast<int>(cfg.gateway.retry.backoff_base.count())));
    cfg.gateway.retry.jitter = get_or<bool>(*gw, "jitter", cfg.gateway.retry.jitter);
    cfg.gateway.max_tokens = get_or<int>(*gw, "max_tokens", cfg.gateway.max_tokens);
  }
  if (cfg.gateway.parallelism < 1) bad("gateway.parallelism must be at least 1");
  cfg.episode_parallelism = get_or<int>(doc, "episode_parallelism", 1);
  return cfg;
}

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (!fs::is_regular_file(path)) bad("config file not found: " + path.string());
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    bad(path.string() + ": " + e.what());
  } catch (const Error& e) {
    bad(e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig cfg = parse_config(doc, fs::absolute(path).parent_path());
  cfg.config_path = path;
  return cfg;
}

Workspace::Workspace(RunConfig config) : config_(std::move(config)) {
  fs::create_directories(config_.run_dir);
  GatewayOptions options = config_.gateway;
  options.transcript_path = config_.run_dir / "transcript.jsonl";
  gateway_ = std::make_unique<Gateway>(options);

  for (const auto& [id, spec] : config_.backends) {
    if (spec.kind == "scripted") {
      gateway_->register_backend(id, spec.rules.empty() ? ScriptedBackend::from_json(spec.inline_rules)
                                                        : ScriptedBackend::from_file(spec.rules));
    } else {
      gateway_->register_backend(id, std::make_shared<RemoteBackend>(RemoteBackendConfig::from_env(id, spec.model, spec.url)));
    }
  }

  tasks_ = load_tasks(config_.tasks);

  if (config_.env_kind == "toyshop") {
    catalog_ = std::make_shared<const Catalog>(load_catalog(config_.catalog));
    ToyShopOptions shop;
    shop.page_size = config_.page_size;
    if (config_.max_steps) shop.max_steps = *config_.max_steps;
    const auto catalog = catalog_;
    env_factory_ = [catalog, shop](const Task&) -> std::unique_ptr<Environment> {
      return std::make_unique<ToyShop>(catalog, shop);
    };
  } else {
    const std::string endpoint = config_.endpoint;
    const std::string domain = config_.domain_info;
    const int max_steps = config_.max_steps.value_or(30);
    env_factory_ = [endpoint, domain, max_steps](const Task& task) -> std::unique_ptr<Environment> {
      const bool own = task.binding.kind == EnvBinding::Kind::External;
      const std::string url = own && !task.binding.endpoint.empty() ? task.binding.endpoint : endpoint;
      const std::string info = own && !task.binding.domain_info.empty() ? task.binding.domain_info : domain;
      return std::make_unique<BridgeEnvironment>(std::make_unique<HttpBridgeTransport>(url), info, max_steps);
    };
  }
}

std::vector<Task> Workspace::split(const std::string& tag) const { return filter_by_tag(tasks_, tag); }

std::shared_ptr<ContextSource> Workspace::make_source(const SourceSpec& spec) {
  if (spec.kind == "none") return nullptr;
  if (spec.kind == "model") return std::make_shared<ModelContextSource>(*gateway_, spec.backend);
  if (spec.kind == "self") return std::make_shared<ModelContextSource>(*gateway_, spec.backend, CtxSourceKind::SelfCtx);
  std::shared_ptr<ContextSource> fallback;
  if (!spec.backend.empty()) fallback = std::make_shared<ModelContextSource>(*gateway_, spec.backend);
  return ExemplarContextSource::from_file(spec.path, fallback);
}

std::shared_ptr<ContextSource> Workspace::initial_source() {
  if (!initial_built_) {
    initial_ = make_source(config_.initial_ctx);
    initial_built_ = true;
  }
  return initial_;
}

std::shared_ptr<ContextSource> Workspace::first_sampler() {
  if (!config_.bootstrap_backend.empty()) {
    return std::make_shared<ModelContextSource>(*gateway_, config_.bootstrap_backend);
  }
  return initial_source();
}

std::vector<fs::path> Workspace::manifests() const {
  std::vector<std::pair<int, fs::path>> found;
  if (!fs::is_directory(config_.run_dir)) return {};
  for (const auto& entry : fs::directory_iterator(config_.run_dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || !text::starts_with(name, "iter_")) continue;
    const fs::path manifest = entry.path() / "manifest.json";
    if (!fs::exists(manifest)) continue;
    int index = 0;
    try {
      index = std::stoi(name.substr(5));
    } catch (const std::exception&) {
      continue;
    }
    const json doc = read_json(manifest);
    if (doc.value("status", "") == "ok" && doc.contains("trainer") && !doc["trainer"].is_null()) {
      found.emplace_back(index, manifest);
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

std::shared_ptr<ContextSource> Workspace::latest_source() {
  const auto all = manifests();
  if (all.empty()) return nullptr;
  const TrainerHandle handle = read_json(all.back())["trainer"].get<TrainerHandle>();
  return context_from_handle(handle, *gateway_, initial_source());
}

FlywheelSettings Workspace::flywheel_settings() const {
  FlywheelSettings s;
  s.run_dir = config_.run_dir;
  s.train_tasks = split(config_.train_split);
  s.agent_backend = config_.agent_backend;
  s.ensemble = config_.ensemble;
  s.mine = config_.mine;
  s.trainer = config_.trainer;
  s.iterations = config_.iterations;
  s.episode_parallelism = config_.episode_parallelism;
  s.collect_with_contextualizer = config_.collect_with_contextualizer;
  s.config_hash = config_.hash();
  return s;
}

}  // namespace lensloop
