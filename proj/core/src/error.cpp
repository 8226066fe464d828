#include "lensloop/error.hpp"

namespace lensloop {

namespace {

std::string format_message(ErrorCode code, const std::string& message) {
  std::string out(to_string(code));
  if (!message.empty()) {
    out += ": ";
    out += message;
  }
  return out;
}

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnknownAction: return "UnknownAction";
    case ErrorCode::MalformedArgs: return "MalformedArgs";
    case ErrorCode::DialectMismatch: return "DialectMismatch";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::BridgeUnavailable: return "BridgeUnavailable";
    case ErrorCode::EpisodeClosed: return "EpisodeClosed";
    case ErrorCode::BackendUnknown: return "BackendUnknown";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::ResponseEmpty: return "ResponseEmpty";
    case ErrorCode::InputTooLarge: return "InputTooLarge";
    case ErrorCode::EmptyObservation: return "EmptyObservation";
    case ErrorCode::MissingHint: return "MissingHint";
    case ErrorCode::AllUnparsable: return "AllUnparsable";
    case ErrorCode::UnparsableAction: return "UnparsableAction";
    case ErrorCode::JudgeUnparsable: return "JudgeUnparsable";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::NonSuccessfulDemo: return "NonSuccessfulDemo";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::AdapterUnavailable: return "AdapterUnavailable";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::LockHeld: return "LockHeld";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::EmptyHoldout: return "EmptyHoldout";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(format_message(code, message)), code_(code) {}

Error::Error(ErrorCode code, const std::string& message, std::vector<std::size_t> indices)
    : std::runtime_error(format_message(code, message)), code_(code), indices_(std::move(indices)) {}

}  // namespace lensloop
