#include "lensloop/datastore.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <functional>

#include "lensloop/error.hpp"
#include "lensloop/serialization.hpp"

namespace lensloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string header_line(StoreKind kind) {
  return json{{"kind", to_string(kind)}, {"schema_version", kSchemaVersion}}.dump();
}

std::string dump_line(const json& doc) {
  try {
    return doc.dump();
  } catch (const json::type_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("record is not valid UTF-8: ") + e.what());
  }
}

void check_header(const std::string& line, StoreKind kind, const fs::path& path) {
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::MalformedLine, path.string() + ": bad header line", {1});
  }
  if (!header.is_object() || !header.contains("kind") || !header.contains("schema_version")) {
    throw Error(ErrorCode::SchemaError, path.string() + ": missing store header");
  }
  if (header["kind"] != to_string(kind)) {
    throw Error(ErrorCode::SchemaError, path.string() + ": expected a " + std::string(to_string(kind)) + " file");
  }
  if (header["schema_version"] != kSchemaVersion) {
    throw Error(ErrorCode::SchemaVersionMismatch, path.string() + ": schema_version " +
                                                      header["schema_version"].dump() + " != " +
                                                      std::to_string(kSchemaVersion));
  }
}

std::size_t append_lines(const fs::path& path, StoreKind kind, const std::vector<std::string>& lines) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  WriterLock lock(path);

  std::error_code ec;
  const bool fresh = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
  if (fresh) {
    const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
      out << header_line(kind) << '\n';
      for (const auto& line : lines) out << line << '\n';
      out.flush();
      if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + " failed: " + ec.message());
    return lines.size();
  }

  {
    std::ifstream in(path, std::ios::binary);
    std::string first;
    if (!in || !std::getline(in, first)) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    check_header(first, kind, path);
  }
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
  for (const auto& line : lines) {
    out << line << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "append failed for " + path.string());
  }
  return lines.size();
}

template <typename T>
std::vector<T> load_all(const fs::path& path, StoreKind kind, const std::function<T(const json&)>& convert) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<T> out;
  std::vector<std::size_t> bad;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1) {
      check_header(line, kind, path);
      continue;
    }
    try {
      out.push_back(convert(json::parse(line)));
    } catch (const std::exception&) {
      bad.push_back(number);
    }
  }
  if (!bad.empty()) {
    std::string list;
    for (const auto n : bad) list += (list.empty() ? "" : ",") + std::to_string(n);
    throw Error(ErrorCode::MalformedLine, path.string() + ": lines " + list, std::move(bad));
  }
  return out;
}

}  // namespace

std::string_view to_string(StoreKind kind) noexcept {
  switch (kind) {
    case StoreKind::SftDataset: return "sft_dataset";
    case StoreKind::Trajectories: return "trajectories";
    case StoreKind::Candidates: return "candidates";
  }
  return "sft_dataset";
}

WriterLock::WriterLock(const fs::path& file) {
  const fs::path lock = lock_path(file);
  fd_ = ::open(lock.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open lock " + lock.string() + ": " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    if (err == EWOULDBLOCK) throw Error(ErrorCode::LockHeld, lock.string() + " is held by another writer");
    throw Error(ErrorCode::IoError, "flock " + lock.string() + ": " + std::strerror(err));
  }
}

WriterLock::~WriterLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

WriterLock::WriterLock(WriterLock&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

WriterLock& WriterLock::operator=(WriterLock&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

fs::path WriterLock::lock_path(const fs::path& file) { return file.string() + ".lock"; }

std::size_t append_records(const fs::path& path, std::span<const SftRecord> records) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(dump_line(json(r)));
  return append_lines(path, StoreKind::SftDataset, lines);
}

std::vector<SftRecord> load_records(const fs::path& path) {
  return load_all<SftRecord>(path, StoreKind::SftDataset, [](const json& j) { return j.get<SftRecord>(); });
}

RecordReader::RecordReader(const fs::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string first;
  if (std::getline(in_, first)) {
    line_ = 1;
    check_header(first, StoreKind::SftDataset, path);
  }
}

std::optional<SftRecord> RecordReader::next() {
  std::string text;
  if (!std::getline(in_, text)) return std::nullopt;
  ++line_;
  try {
    return json::parse(text).get<SftRecord>();
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_), {line_});
  }
}

std::size_t append_trajectories(const fs::path& path, std::span<const Trajectory> trajectories) {
  std::vector<std::string> lines;
  for (const auto& t : trajectories) lines.push_back(dump_line(json(t)));
  return append_lines(path, StoreKind::Trajectories, lines);
}

std::vector<Trajectory> load_trajectories(const fs::path& path) {
  return load_all<Trajectory>(path, StoreKind::Trajectories, [](const json& j) { return j.get<Trajectory>(); });
}

std::size_t append_candidates(const fs::path& path, std::span<const CandidateRecord> records) {
  std::vector<std::string> lines;
  for (const auto& r : records) lines.push_back(dump_line(json(r)));
  return append_lines(path, StoreKind::Candidates, lines);
}

std::vector<CandidateRecord> load_candidates(const fs::path& path) {
  return load_all<CandidateRecord>(path, StoreKind::Candidates,
                                   [](const json& j) { return j.get<CandidateRecord>(); });
}

void write_json_atomic(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << doc.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + " failed: " + ec.message());
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

}  // namespace lensloop
