#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "json.hpp"

namespace nwa::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// On-disk layout, all integers little-endian:
///
///   bytes 0..7   magic "NWACKPT1"
///   u64          manifest length in bytes
///   ...          manifest, UTF-8 JSON (architecture, seed, step count)
///   u64          parameter count
///   f64[count]   parameters, in the order documented by the manifest
struct CheckpointFile {
  nlohmann::json manifest;
  Eigen::VectorXd params;
};

std::string encode_checkpoint(const CheckpointFile& file);
/// `name` labels error messages.
CheckpointFile decode_checkpoint(std::string_view bytes, const std::string& name);

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile read_checkpoint(const std::filesystem::path& path);

}  // namespace nwa::nn
