#include "dhgat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dhgat/errors.hpp"

namespace dhgat::ad {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw ParseError("checkpoint " + path.string() + ": truncated");
  }
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const Parameter* const> params,
                     std::uint64_t config_hash, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint " + path.string());
  out.write("DHCK", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, config_hash);
  put<std::uint64_t>(out, seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name().size()));
    out.write(p->name().data(), static_cast<std::streamsize>(p->name().size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value().rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value().cols()));
    out.write(reinterpret_cast<const char*>(p->value().data()),
              static_cast<std::streamsize>(p->value().size() * static_cast<Index>(sizeof(double))));
  }
  if (!out) throw ParseError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "DHCK", 4) != 0) {
    throw ParseError("checkpoint " + path.string() + ": bad magic");
  }
  if (auto version = get<std::uint32_t>(in, path); version != 1) {
    throw ParseError("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config_hash = get<std::uint64_t>(in, path);
  ck.seed = get<std::uint64_t>(in, path);
  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw ParseError("checkpoint " + path.string() + ": truncated");
    const auto rows = get<std::uint32_t>(in, path);
    const auto cols = get<std::uint32_t>(in, path);
    Matrix m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
      throw ParseError("checkpoint " + path.string() + ": truncated tensor " + name);
    }
    ck.tensors.emplace(std::move(name), std::move(m));
  }
  return ck;
}

void restore_parameters(const Checkpoint& checkpoint, std::span<Parameter* const> params) {
  for (auto* p : params) {
    auto it = checkpoint.tensors.find(p->name());
    if (it == checkpoint.tensors.end()) throw ValidationError("checkpoint lacks tensor '" + p->name() + "'");
    if (it->second.rows() != p->value().rows() || it->second.cols() != p->value().cols()) {
      throw ShapeError("checkpoint tensor '" + p->name() + "' has a different shape");
    }
    p->value() = it->second;
  }
}

}  // namespace dhgat::ad
