#include "conmask/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "conmask/binary_io.hpp"
#include "conmask/error.hpp"

namespace conmask {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'N', 'M', 'A', 'S', 'K', 'C'};

std::string bn_name(std::size_t layer, const char* field) {
  return "fcn." + std::to_string(layer) + ".bn." + field;
}

}  // namespace

const nk::Tensor& Checkpoint::at(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no tensor '" + name + "'");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  bin::put<std::uint32_t>(out, kCheckpointVersion);
  bin::put<std::uint64_t>(out, ckpt.metadata.size());
  out += ckpt.metadata;
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) bin::put<std::uint64_t>(out, d);
    for (double v : t.data()) bin::put_f64(out, v);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  bin::Reader in(bytes, "checkpoint");
  if (in.bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.metadata = in.bytes(in.get<std::uint64_t>("metadata length"), "metadata");
  const auto count = in.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.bytes(in.get<std::uint32_t>("name length"), "tensor name");
    const auto rank = in.get<std::uint32_t>("rank");
    std::vector<std::size_t> shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(in.get<std::uint64_t>("shape"));
      n *= d;
    }
    if (n > in.remaining() / 8) throw DataError("checkpoint truncated in tensor " + name);
    std::vector<double> data(n);
    for (double& v : data) v = in.get_f64("tensor data");
    ckpt.tensors.emplace_back(std::move(name), nk::Tensor(std::move(shape), std::move(data)));
  }
  if (!in.done()) throw DataError("checkpoint has trailing bytes");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

Checkpoint snapshot(ModelParams& params, std::string metadata) {
  Checkpoint ckpt;
  ckpt.metadata = std::move(metadata);
  for (nk::Parameter* p : params.parameters()) ckpt.tensors.emplace_back(p->name, p->value);
  for (std::size_t l = 0; l < kFcnLayers; ++l) {
    const auto& bn = params.fcn.layers[l].bn;
    ckpt.tensors.emplace_back(bn_name(l, "moving_mean"), bn.moving_mean);
    ckpt.tensors.emplace_back(bn_name(l, "moving_var"), bn.moving_var);
    ckpt.tensors.emplace_back(bn_name(l, "initialized"), nk::Tensor::scalar(bn.initialized ? 1.0 : 0.0));
  }
  return ckpt;
}

void restore(ModelParams& params, const Checkpoint& ckpt) {
  auto copy_into = [&](nk::Tensor& dst, const std::string& name) {
    const nk::Tensor& src = ckpt.at(name);
    if (!dst.same_shape(src)) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + src.shape_string() +
                      ", model expects " + dst.shape_string());
    }
    dst = src;
  };
  for (nk::Parameter* p : params.parameters()) copy_into(p->value, p->name);
  for (std::size_t l = 0; l < kFcnLayers; ++l) {
    auto& bn = params.fcn.layers[l].bn;
    copy_into(bn.moving_mean, bn_name(l, "moving_mean"));
    copy_into(bn.moving_var, bn_name(l, "moving_var"));
    bn.initialized = ckpt.at(bn_name(l, "initialized"))[0] != 0.0;
  }
}

void save_checkpoint(ModelParams& params, const std::filesystem::path& path, const std::string& metadata) {
  write_checkpoint(path, snapshot(params, metadata));
}

std::string load_checkpoint(ModelParams& params, const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  restore(params, ckpt);
  return ckpt.metadata;
}

}  // namespace conmask
