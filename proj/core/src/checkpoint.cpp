#include "credfed/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "credfed/errors.hpp"

namespace credfed {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'F', 'D', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ParseError("checkpoint " + path.string() + ": truncated file");
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const auto& c = ckpt.params.config();
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, 0);
  put<std::uint64_t>(os, ckpt.seed);
  put<std::int64_t>(os, ckpt.round);
  for (std::size_t v : {c.num_features, c.embed_dim, c.num_heads, c.ff_hidden, c.head_hidden, c.num_classes})
    put<std::uint64_t>(os, v);
  put<double>(os, c.layer_norm_eps);
  const auto& flat = ckpt.params.flat();
  put<std::uint64_t>(os, flat.size());
  os.write(reinterpret_cast<const char*>(flat.values().data()),
           static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ParseError("checkpoint " + path.string() + ": bad magic");
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  }
  get<std::uint32_t>(is, path);
  const auto seed = get<std::uint64_t>(is, path);
  const auto round = get<std::int64_t>(is, path);
  ModelConfig c;
  c.num_features = get<std::uint64_t>(is, path);
  c.embed_dim = get<std::uint64_t>(is, path);
  c.num_heads = get<std::uint64_t>(is, path);
  c.ff_hidden = get<std::uint64_t>(is, path);
  c.head_hidden = get<std::uint64_t>(is, path);
  c.num_classes = get<std::uint64_t>(is, path);
  c.layer_norm_eps = get<double>(is, path);
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  const auto count = get<std::uint64_t>(is, path);
  if (count != parameter_count(c)) {
    throw ParseError("checkpoint " + path.string() + ": parameter count does not match config");
  }
  std::vector<double> flat(count);
  if (!is.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(count * sizeof(double)))) {
    throw ParseError("checkpoint " + path.string() + ": truncated parameters");
  }
  return Checkpoint{ModelParams(c, ParameterVector(std::move(flat))), seed, round};
}

}  // namespace credfed
