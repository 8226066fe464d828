#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lensloop {

enum class ErrorCode {
  // action-dsl
  EmptyInput,
  UnknownAction,
  MalformedArgs,
  DialectMismatch,
  // environments
  UnknownTask,
  BridgeUnavailable,
  EpisodeClosed,
  // gateway
  BackendUnknown,
  TransportError,
  ResponseEmpty,
  InputTooLarge,
  // contextualizer / agent / reward
  EmptyObservation,
  MissingHint,
  AllUnparsable,
  UnparsableAction,
  JudgeUnparsable,
  EmptyCandidates,
  // flywheel / trainer
  SchemaError,
  NonSuccessfulDemo,
  EmptyDataset,
  AdapterUnavailable,
  // datastore
  IoError,
  SchemaVersionMismatch,
  LockHeld,
  MalformedLine,
  // eval
  EmptyHoldout,
  // configuration
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// The single exception type thrown by the library. `indices` carries line
/// numbers or record indices for errors that report a list (MalformedLine,
/// NonSuccessfulDemo); `raw_text` carries the offending model output for
/// UnparsableAction and JudgeUnparsable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  Error(ErrorCode code, const std::string& message, std::vector<std::size_t> indices);

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

  const std::string& raw_text() const noexcept { return raw_text_; }
  Error& with_raw_text(std::string text) {
    raw_text_ = std::move(text);
    return *this;
  }

 private:
  ErrorCode code_;
  std::vector<std::size_t> indices_;
  std::string raw_text_;
};

}  // namespace lensloop
