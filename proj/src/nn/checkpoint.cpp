#include "nwa/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "nwa/io.hpp"

namespace nwa::nn {
namespace {

constexpr std::array<char, 8> kMagic{'N', 'W', 'A', 'C', 'K', 'P', 'T', '1'};

}  // namespace

std::string encode_checkpoint(const CheckpointFile& file) {
  const std::string manifest = file.manifest.dump(2);
  std::string bytes(kMagic.begin(), kMagic.end());
  io::append_u64(bytes, manifest.size());
  bytes += manifest;
  io::append_u64(bytes, static_cast<std::uint64_t>(file.params.size()));
  for (Eigen::Index i = 0; i < file.params.size(); ++i) {
    io::append_u64(bytes, std::bit_cast<std::uint64_t>(file.params[i]));
  }
  return bytes;
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file) {
  io::write_file_atomic(path, encode_checkpoint(file));
}

CheckpointFile decode_checkpoint(std::string_view bytes, const std::string& name) {
  const std::string where = "checkpoint " + name + ": ";
  if (bytes.size() < 16 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw CheckpointError(where + "bad magic, not a checkpoint file");
  }
  std::size_t at = kMagic.size();
  const std::uint64_t manifest_len = io::read_u64(bytes, at);
  if (manifest_len > bytes.size() - at) throw CheckpointError(where + "truncated manifest");
  CheckpointFile file;
  try {
    file.manifest = nlohmann::json::parse(bytes.substr(at, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + "malformed manifest: " + e.what());
  }
  at += manifest_len;
  if (bytes.size() - at < 8) throw CheckpointError(where + "truncated parameter header");
  const std::uint64_t count = io::read_u64(bytes, at);
  if (count * 8 != bytes.size() - at) {
    throw CheckpointError(where + "parameter blob holds " + std::to_string(bytes.size() - at) +
                          " bytes, header promises " + std::to_string(count * 8));
  }
  file.params.resize(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    file.params[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(io::read_u64(bytes, at));
  }
  return file;
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::exception& e) {
    throw CheckpointError(e.what());
  }
  return decode_checkpoint(bytes, path.string());
}

}  // namespace nwa::nn
