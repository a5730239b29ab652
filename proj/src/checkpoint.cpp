#include "fusionlung/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusionlung/errors.hpp"

namespace fusionlung {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'N', 'C', 'K', 'P', 'T', '1'};

enum class Dtype : uint8_t { f32 = 0, f64 = 1, i64 = 2, u8 = 3 };

Dtype dtype_tag(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32:
      return Dtype::f32;
    case torch::kFloat64:
      return Dtype::f64;
    case torch::kInt64:
      return Dtype::i64;
    case torch::kUInt8:
      return Dtype::u8;
    default:
      throw Error("checkpoint: unsupported tensor dtype");
  }
}

torch::ScalarType to_scalar_type(Dtype d) {
  switch (d) {
    case Dtype::f32:
      return torch::kFloat32;
    case Dtype::f64:
      return torch::kFloat64;
    case Dtype::i64:
      return torch::kInt64;
    case Dtype::u8:
      return torch::kUInt8;
  }
  throw Error("checkpoint: bad dtype tag");
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint: truncated file");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  auto n = read_pod<uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error("checkpoint: truncated string");
  return s;
}

nlohmann::json manifest_json(const CheckpointManifest& m) {
  nlohmann::json j{{"config_hash", m.config_hash}, {"epoch", m.epoch},   {"step", m.step},
                   {"seed", m.seed},               {"best_val_iou", m.best_val_iou},
                   {"created", m.created}};
  if (!m.extra.empty()) j["extra"] = nlohmann::json::parse(m.extra);
  return j;
}

CheckpointManifest manifest_from_json(const nlohmann::json& j) {
  CheckpointManifest m;
  m.config_hash = j.value("config_hash", "");
  m.epoch = j.value("epoch", int64_t{0});
  m.step = j.value("step", int64_t{0});
  m.seed = j.value("seed", uint64_t{0});
  m.best_val_iou = j.value("best_val_iou", 0.0);
  m.created = j.value("created", "");
  if (j.contains("extra")) m.extra = j["extra"].dump();
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_string(out, manifest_json(ck.manifest).dump());

  write_pod<uint64_t>(out, ck.tensors.size());
  for (const auto& [name, tensor] : ck.tensors) {
    auto t = tensor.detach().to(torch::kCPU).contiguous();
    write_string(out, name);
    write_pod<uint8_t>(out, static_cast<uint8_t>(dtype_tag(t)));
    write_pod<uint64_t>(out, static_cast<uint64_t>(t.dim()));
    for (int64_t d = 0; d < t.dim(); ++d) write_pod<int64_t>(out, t.size(d));
    uint64_t bytes = t.numel() * t.element_size();
    write_pod<uint64_t>(out, bytes);
    out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
  }
  write_string(out, ck.optimizer_blob);
  if (!out) throw Error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(path.string() + " is not a checkpoint file");
  }
  Checkpoint ck;
  ck.manifest = manifest_from_json(nlohmann::json::parse(read_string(in)));

  auto count = read_pod<uint64_t>(in);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    auto dtype = to_scalar_type(static_cast<Dtype>(read_pod<uint8_t>(in)));
    auto ndim = read_pod<uint64_t>(in);
    std::vector<int64_t> sizes(ndim);
    for (auto& s : sizes) s = read_pod<int64_t>(in);
    auto bytes = read_pod<uint64_t>(in);
    auto t = torch::empty(sizes, torch::TensorOptions().dtype(dtype));
    if (static_cast<uint64_t>(t.numel() * t.element_size()) != bytes) {
      throw Error("checkpoint: tensor byte count mismatch for '" + name + "'");
    }
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
    if (!in) throw Error("checkpoint: truncated tensor '" + name + "'");
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  ck.optimizer_blob = read_string(in);
  return ck;
}

std::map<std::string, torch::Tensor> snapshot_state(const torch::nn::Module& module) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : module.named_parameters()) {
    out.emplace(p.key(), p.value().detach().to(torch::kCPU).contiguous().clone());
  }
  for (const auto& b : module.named_buffers()) {
    out.emplace(b.key(), b.value().detach().to(torch::kCPU).contiguous().clone());
  }
  return out;
}

void restore_state(torch::nn::Module& module,
                   const std::map<std::string, torch::Tensor>& tensors) {
  torch::NoGradGuard guard;
  auto copy_into = [&](const torch::OrderedDict<std::string, torch::Tensor>& dst) {
    for (const auto& item : dst) {
      auto it = tensors.find(item.key());
      if (it == tensors.end()) {
        throw Error("checkpoint is missing tensor '" + item.key() + "'");
      }
      if (it->second.sizes() != item.value().sizes()) {
        throw Error("checkpoint tensor '" + item.key() + "' has the wrong shape");
      }
      item.value().copy_(it->second.to(item.value().dtype()));
    }
  };
  copy_into(module.named_parameters());
  copy_into(module.named_buffers());
}

}  // namespace fusionlung
