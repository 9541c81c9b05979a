#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "motionguide/tensor.hpp"

namespace mg {

using json = nlohmann::json;

// Tensor file format: one JSON header line, then the values as raw
// little-endian doubles in row-major order.
std::string tensor_bytes(const Tensor& t);
Tensor tensor_from_bytes(std::string_view bytes);
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view bytes);
std::string hash_hex(std::string_view bytes);
std::string tensor_hash(const Tensor& t);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

// Named-parameter checkpoint: one tensor file per parameter plus an index
// listing names, shapes, files, content hashes, and free-form metadata.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> params;
  json meta;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Concatenated serialized bytes of named parameters, in order. Used to verify
// that a parameter set was left untouched.
std::string params_bytes(const std::vector<std::pair<std::string, Tensor>>& params);

// Stable text form for doubles ("%.17g"): round-trips exactly and keeps
// emitted reports byte-identical across runs.
std::string format_double(double v);

}  // namespace mg
