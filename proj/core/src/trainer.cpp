#include "lensloop/trainer.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>

#include "http_util.hpp"
#include "lensloop/datastore.hpp"
#include "lensloop/error.hpp"
#include "text_util.hpp"

namespace lensloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

TrainerHandle handle_from_reply(const json& reply) {
  if (!reply.is_object() || !reply.contains("backend_id") || !reply["backend_id"].is_string()) {
    throw Error(ErrorCode::AdapterUnavailable, "adapter reply lacks backend_id: " + reply.dump());
  }
  return TrainerHandle{TrainerKind::ExternalSft, reply["backend_id"].get<std::string>(), reply.value("url", "")};
}

json parse_reply(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::AdapterUnavailable, "adapter reply is not JSON: " + body);
  }
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (const char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  return out + "'";
}

TrainerHandle fit_endpoint(const fs::path& dataset, const TrainerSpec& spec) {
  const http::Url url = http::parse_url(spec.adapter_endpoint);
  auto client = http::make_client(url, spec.timeout_seconds);
  const json body{{"dataset_path", fs::absolute(dataset).string()},
                  {"output_dir", fs::absolute(spec.output_dir).string()}};
  auto res = client->Post(url.path.empty() ? "/" : url.path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::AdapterUnavailable, spec.adapter_endpoint + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::AdapterUnavailable, spec.adapter_endpoint + ": HTTP " + std::to_string(res->status));
  }
  return handle_from_reply(parse_reply(res->body));
}

TrainerHandle fit_command(const fs::path& dataset, const TrainerSpec& spec) {
  const fs::path config = spec.output_dir / "sft.json";
  write_json_atomic(config, json{{"dataset_path", fs::absolute(dataset).string()},
                                 {"output_dir", fs::absolute(spec.output_dir).string()}});
  const std::string cmd = spec.adapter_command + " train --config " + shell_quote(fs::absolute(config).string());
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw Error(ErrorCode::AdapterUnavailable, "cannot start: " + cmd);
  std::string output;
  std::array<char, 4096> buf{};
  while (const std::size_t got = std::fread(buf.data(), 1, buf.size(), pipe)) output.append(buf.data(), got);
  const int status = ::pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error(ErrorCode::AdapterUnavailable, "adapter command failed: " + cmd);
  }
  std::string last;
  for (const auto& line : text::split_lines(output)) {
    if (!text::trim(line).empty()) last = std::string(text::trim(line));
  }
  if (last.empty()) throw Error(ErrorCode::AdapterUnavailable, "adapter command printed nothing");
  return handle_from_reply(parse_reply(last));
}

}  // namespace

std::string_view to_string(TrainerKind kind) noexcept {
  return kind == TrainerKind::Exemplar ? "exemplar" : "external_sft";
}

std::optional<TrainerKind> trainer_kind_from_string(std::string_view name) noexcept {
  if (name == "exemplar") return TrainerKind::Exemplar;
  if (name == "external_sft") return TrainerKind::ExternalSft;
  return std::nullopt;
}

void to_json(json& j, const TrainerHandle& h) {
  j = json{{"kind", to_string(h.kind)}, {"artifact_ref", h.artifact_ref}, {"endpoint", h.endpoint}};
}

void from_json(const json& j, TrainerHandle& h) {
  const auto kind = trainer_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::SchemaError, "unknown trainer kind " + j.at("kind").dump());
  h.kind = *kind;
  h.artifact_ref = j.at("artifact_ref").get<std::string>();
  h.endpoint = j.value("endpoint", "");
}

TrainerHandle trainer_fit(std::span<const SftRecord> records, const TrainerSpec& spec) {
  if (records.empty()) throw Error(ErrorCode::EmptyDataset, "no records to train on");
  if (spec.output_dir.empty()) throw Error(ErrorCode::ConfigError, "trainer needs an output directory");
  fs::create_directories(spec.output_dir);

  if (spec.kind == TrainerKind::Exemplar) {
    const fs::path store = spec.output_dir / "exemplars.jsonl";
    fs::remove(store);
    append_records(store, records);
    return TrainerHandle{TrainerKind::Exemplar, store.string(), {}};
  }

  const fs::path dataset = spec.output_dir / "dataset.jsonl";
  fs::remove(dataset);
  append_records(dataset, records);
  if (!spec.adapter_endpoint.empty()) return fit_endpoint(dataset, spec);
  if (!spec.adapter_command.empty()) return fit_command(dataset, spec);
  throw Error(ErrorCode::AdapterUnavailable, "ExternalSft trainer has neither an endpoint nor a command");
}

}  // namespace lensloop
