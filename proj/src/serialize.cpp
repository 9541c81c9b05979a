#include "motionguide/serialize.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mg {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts are unsupported");

std::string tensor_bytes(const Tensor& t) {
  json header;
  header["shape"] = t.shape();
  header["dtype"] = "f64";
  std::string out = header.dump();
  out.push_back('\n');
  const char* raw = reinterpret_cast<const char*>(t.array().data());
  out.append(raw, static_cast<std::size_t>(t.size()) * sizeof(double));
  return out;
}

Tensor tensor_from_bytes(std::string_view bytes) {
  std::size_t nl = bytes.find('\n');
  if (nl == std::string_view::npos)
    throw std::runtime_error("tensor_from_bytes: missing header line");
  json header = json::parse(bytes.substr(0, nl), nullptr, false);
  if (header.is_discarded() || !header.contains("shape") || !header.contains("dtype"))
    throw std::runtime_error("tensor_from_bytes: malformed header");
  if (header["dtype"] != "f64")
    throw std::runtime_error("tensor_from_bytes: unsupported dtype " +
                             header["dtype"].dump());
  Shape shape = header["shape"].get<Shape>();
  const std::size_t expect = static_cast<std::size_t>(numel(shape)) * sizeof(double);
  std::string_view payload = bytes.substr(nl + 1);
  if (payload.size() != expect)
    throw std::runtime_error("tensor_from_bytes: payload is " + std::to_string(payload.size()) +
                             " bytes, expected " + std::to_string(expect) + " for shape " +
                             shape_str(shape));
  Eigen::ArrayXd values(numel(shape));
  std::memcpy(values.data(), payload.data(), expect);
  Tensor t = Tensor::from(std::move(shape), std::move(values));
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_text(path, tensor_bytes(t));
}

Tensor read_tensor(const std::filesystem::path& path) {
  try {
    return tensor_from_bytes(read_text(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(bytes)));
  return std::string(buf);
}

std::string tensor_hash(const Tensor& t) { return hash_hex(tensor_bytes(t)); }

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("read failed: " + path.string());
  return text;
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

json read_json(const std::filesystem::path& path) {
  json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("malformed JSON: " + path.string());
  return j;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  std::filesystem::create_directories(dir);
  json index;
  index["format"] = 1;
  index["meta"] = ckpt.meta;
  index["params"] = json::array();
  for (const auto& [name, tensor] : ckpt.params) {
    std::string file = name + ".bin";
    std::string bytes = tensor_bytes(tensor);
    write_text(dir / file, bytes);
    index["params"].push_back(
        {{"name", name}, {"shape", tensor.shape()}, {"file", file}, {"hash", hash_hex(bytes)}});
  }
  write_json(dir / "index.json", index);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  json index = read_json(dir / "index.json");
  if (!index.contains("params"))
    throw std::runtime_error("checkpoint index lacks params: " + dir.string());
  Checkpoint ckpt;
  ckpt.meta = index.value("meta", json::object());
  for (const auto& entry : index["params"]) {
    std::string name = entry.at("name").get<std::string>();
    std::string bytes = read_text(dir / entry.at("file").get<std::string>());
    if (entry.contains("hash") && entry["hash"].get<std::string>() != hash_hex(bytes))
      throw std::runtime_error("checkpoint parameter " + name + " is corrupt in " + dir.string());
    Tensor t = tensor_from_bytes(bytes);
    Shape expect = entry.at("shape").get<Shape>();
    if (t.shape() != expect)
      throw std::runtime_error("checkpoint parameter " + name + " has shape " +
                               shape_str(t.shape()) + ", expected " + shape_str(expect));
    ckpt.params.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

std::string params_bytes(const std::vector<std::pair<std::string, Tensor>>& params) {
  std::string out;
  for (const auto& [name, tensor] : params) {
    out += name;
    out.push_back('\0');
    out += tensor_bytes(tensor);
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace mg
