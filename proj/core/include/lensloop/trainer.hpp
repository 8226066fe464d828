#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "lensloop/records.hpp"

namespace lensloop {

enum class TrainerKind { Exemplar, ExternalSft };

std::string_view to_string(TrainerKind kind) noexcept;
std::optional<TrainerKind> trainer_kind_from_string(std::string_view name) noexcept;

/// Result of a fit. Exemplar: artifact_ref is the exemplar store path.
/// ExternalSft: artifact_ref is the backend id of the fine-tuned model and
/// endpoint its chat-completions base URL.
struct TrainerHandle {
  TrainerKind kind = TrainerKind::Exemplar;
  std::string artifact_ref;
  std::string endpoint;

  bool operator==(const TrainerHandle&) const = default;
};

void to_json(nlohmann::json& j, const TrainerHandle& h);
void from_json(const nlohmann::json& j, TrainerHandle& h);

struct TrainerSpec {
  TrainerKind kind = TrainerKind::Exemplar;
  std::filesystem::path output_dir;
  // ExternalSft: either an HTTP endpoint taking {"dataset_path","output_dir"}
  // or a command run as `<command> train --config <output_dir>/sft.json`.
  // Both answer with {"backend_id","url"} (the command on its last stdout line).
  std::string adapter_endpoint;
  std::string adapter_command;
  int timeout_seconds = 3600;
};

/// Throws EmptyDataset for no records and AdapterUnavailable when the external
/// adapter cannot be reached or answers badly.
TrainerHandle trainer_fit(std::span<const SftRecord> records, const TrainerSpec& spec);

}  // namespace lensloop
