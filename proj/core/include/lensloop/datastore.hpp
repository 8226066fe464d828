#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lensloop/records.hpp"
#include "lensloop/reward.hpp"

namespace lensloop {

inline constexpr int kSchemaVersion = 1;

/// Every store file is line-delimited JSON: a header line
/// {"kind":...,"schema_version":N} followed by one record per line.
enum class StoreKind { SftDataset, Trajectories, Candidates };

std::string_view to_string(StoreKind kind) noexcept;

/// Single-writer lock on `<file>.lock` (advisory flock). Throws LockHeld if
/// another writer, in this or any other process, holds it.
class WriterLock {
 public:
  explicit WriterLock(const std::filesystem::path& file);
  ~WriterLock();
  WriterLock(const WriterLock&) = delete;
  WriterLock& operator=(const WriterLock&) = delete;
  WriterLock(WriterLock&& other) noexcept;
  WriterLock& operator=(WriterLock&& other) noexcept;

  static std::filesystem::path lock_path(const std::filesystem::path& file);

 private:
  int fd_ = -1;
};

/// New files are written to a temp file and renamed into place; existing files
/// are appended with a flush per line. Returns the number of records written.
std::size_t append_records(const std::filesystem::path& path, std::span<const SftRecord> records);
/// Reads every record. Malformed lines are collected and reported together as
/// MalformedLine with their 1-based physical line numbers.
std::vector<SftRecord> load_records(const std::filesystem::path& path);

/// Lazy reader over a dataset file; stops at the first malformed line with
/// MalformedLine({line}).
class RecordReader {
 public:
  explicit RecordReader(const std::filesystem::path& path);
  std::optional<SftRecord> next();
  std::size_t line() const { return line_; }

 private:
  std::ifstream in_;
  std::size_t line_ = 0;
};

std::size_t append_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories);
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

std::size_t append_candidates(const std::filesystem::path& path, std::span<const CandidateRecord> records);
std::vector<CandidateRecord> load_candidates(const std::filesystem::path& path);

/// Pretty-printed JSON written through a temp file and rename.
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace lensloop
