#include "acumen/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "acumen/errors.hpp"

namespace acumen {

namespace {

constexpr char kMagic[4] = {'A', 'C', 'M', 'N'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  params.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_raw(os, kVersion);
  write_raw(os, static_cast<std::uint8_t>(params.shape.kind));
  write_raw(os, static_cast<std::uint8_t>(params.shape.activation));
  write_raw(os, static_cast<std::int32_t>(params.shape.input_dim));
  write_raw(os, static_cast<std::int32_t>(params.shape.output_dim));
  write_raw(os, static_cast<std::uint32_t>(params.shape.hidden.size()));
  for (int w : params.shape.hidden) write_raw(os, static_cast<std::int32_t>(w));
  write_raw(os, static_cast<std::uint64_t>(params.values.size()));
  os.write(reinterpret_cast<const char*>(params.values.data()),
           static_cast<std::streamsize>(params.values.size() * sizeof(double)));
  if (!os) throw Error("failed writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error("not a model checkpoint: " + path);
  const auto version = read_raw<std::uint32_t>(is);
  if (version != kVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version));

  ModelParams p;
  p.shape.kind = static_cast<ModelKind>(read_raw<std::uint8_t>(is));
  p.shape.activation = static_cast<Activation>(read_raw<std::uint8_t>(is));
  p.shape.input_dim = read_raw<std::int32_t>(is);
  p.shape.output_dim = read_raw<std::int32_t>(is);
  const auto n_hidden = read_raw<std::uint32_t>(is);
  p.shape.hidden.resize(n_hidden);
  for (auto& w : p.shape.hidden) w = read_raw<std::int32_t>(is);
  const auto count = read_raw<std::uint64_t>(is);
  p.values.resize(count);
  is.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw Error("truncated checkpoint: " + path);
  p.validate();
  return p;
}

}  // namespace acumen
