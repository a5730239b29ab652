#pragma once

#include <filesystem>
#include <string>

namespace fusionlung {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string iso8601_now();

/// Root under which run directories are created; FUSIONLUNG_RUNS_DIR
/// overrides the default ./runs.
std::filesystem::path runs_root();

/// Exclusive ownership of a run directory for the life of the process.
/// Creates `<dir>/.lock` with O_EXCL semantics; a second owner throws.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path lock_path_;
  bool held_ = false;
};

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  uint64_t seed = 0;
  std::string version;
  std::string started;
  std::string finished;
};

void write_run_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fusionlung
