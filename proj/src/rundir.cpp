#include "fusionlung/rundir.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "fusionlung/errors.hpp"

namespace fs = std::filesystem;

namespace fusionlung {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
    throw Error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string iso8601_now() {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

fs::path runs_root() {
  if (const char* env = std::getenv("FUSIONLUNG_RUNS_DIR")) {
    return fs::path(env);
  }
  return fs::path("runs");
}

RunLock::RunLock(const fs::path& run_dir) : lock_path_(run_dir / ".lock") {
  fs::create_directories(run_dir);
  int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw Error("run directory " + run_dir.string() +
                " is locked by another run (remove .lock if stale)");
  }
  auto pid = std::to_string(::getpid());
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  held_ = true;
}

RunLock::~RunLock() {
  if (held_) {
    std::error_code ec;
    fs::remove(lock_path_, ec);
  }
}

void write_run_manifest(const fs::path& run_dir, const RunManifest& m) {
  nlohmann::json j{{"command", m.command}, {"config_path", m.config_path},
                   {"config_hash", m.config_hash}, {"seed", m.seed},
                   {"version", m.version},  {"started", m.started},
                   {"finished", m.finished}};
  std::ofstream out(run_dir / "manifest.json");
  if (!out) throw Error("cannot write manifest in " + run_dir.string());
  out << j.dump(2) << "\n";
}

}  // namespace fusionlung
