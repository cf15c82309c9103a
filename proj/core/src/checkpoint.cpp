#include "stoa/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace stoa {

namespace {

constexpr char kMagic[5] = {'S', 'T', 'O', 'A', 'W'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  write_u32(os, static_cast<std::uint32_t>(v));
  write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& is) {
  const std::uint64_t lo = read_u32(is);
  const std::uint64_t hi = read_u32(is);
  return lo | (hi << 32);
}

void write_f32_le(std::ostream& os, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  write_u32(os, u);
}

float read_f32_le(std::istream& is) {
  const std::uint32_t u = read_u32(is);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

void open_and_check_header(std::ifstream& is, const std::filesystem::path& path) {
  is.open(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kMagic, 5) != 0)
    throw FormatError("bad checkpoint magic in " + path.string());
  const std::uint32_t version = read_u32(is);
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::string& config_text,
                     const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint: " + path.string());
  os.write(kMagic, 5);
  write_u32(os, kVersion);
  write_u64(os, config_text.size());
  os.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  write_u32(os, static_cast<std::uint32_t>(params.entries().size()));
  for (auto& [name, t] : params.entries()) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.rows()));
    write_u32(os, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j)
        write_f32_le(os, static_cast<float>(t.value()(i, j)));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::string load_checkpoint(ParamStore& params, const std::filesystem::path& path) {
  std::ifstream is;
  open_and_check_header(is, path);
  const std::uint64_t cfg_len = read_u64(is);
  std::string config_text(cfg_len, '\0');
  is.read(config_text.data(), static_cast<std::streamsize>(cfg_len));
  if (!is) throw IoError("checkpoint truncated");
  const std::uint32_t count = read_u32(is);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw IoError("checkpoint truncated");
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    if (!params.contains(name)) throw FormatError("checkpoint has unknown parameter: " + name);
    Tensor t = params.get(name);
    if (t.rows() != static_cast<Eigen::Index>(rows) || t.cols() != static_cast<Eigen::Index>(cols))
      throw FormatError("checkpoint shape mismatch for " + name);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j)
        t.raw_value()(i, j) = static_cast<double>(read_f32_le(is));
  }
  return config_text;
}

std::string read_checkpoint_config(const std::filesystem::path& path) {
  std::ifstream is;
  open_and_check_header(is, path);
  const std::uint64_t cfg_len = read_u64(is);
  std::string config_text(cfg_len, '\0');
  is.read(config_text.data(), static_cast<std::streamsize>(cfg_len));
  if (!is) throw IoError("checkpoint truncated");
  return config_text;
}

}  // namespace stoa
