#include "unmix/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "unmix/errors.hpp"

namespace unmix {

namespace {

constexpr uint32_t kVersion = 1;
constexpr char kMagic[4] = {'R', 'M', 'X', 'C'};

void put_u32_le(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t get_u32_le(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

uint64_t get_u64_le(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

TensorF& NamedTensorList::find(const std::string& name) {
  for (auto& [n, t] : items)
    if (n == name) return t;
  throw FormatError("checkpoint: missing tensor '" + name + "'");
}

void save_container(const std::string& path, const nlohmann::json& meta,
                    const NamedTensorList& tensors) {
  nlohmann::json m = meta;
  nlohmann::json tlist = nlohmann::json::array();
  for (const auto& [name, t] : tensors.items) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape();
    tlist.push_back(e);
  }
  m["tensors"] = tlist;
  const std::string meta_str = m.dump();

  std::string out;
  out.append(kMagic, 4);
  put_u32_le(out, kVersion);
  put_u64_le(out, meta_str.size());
  out += meta_str;
  for (const auto& [name, t] : tensors.items) {
    const size_t off = out.size();
    out.resize(off + static_cast<size_t>(t.numel()) * 4);
    std::memcpy(out.data() + off, t.data(), static_cast<size_t>(t.numel()) * 4);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("checkpoint write failed: " + path);
}

std::pair<nlohmann::json, NamedTensorList> load_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const uint8_t* p = reinterpret_cast<const uint8_t*>(bytes.data());
  const size_t size = bytes.size();

  if (size < 16 || std::memcmp(p, kMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic: " + path);
  const uint32_t version = get_u32_le(p + 4);
  if (version != kVersion)
    throw FormatError("checkpoint: incompatible version " + std::to_string(version) +
                      " (expected " + std::to_string(kVersion) + ")");
  const uint64_t meta_len = get_u64_le(p + 8);
  if (16 + meta_len > size) throw FormatError("checkpoint: truncated metadata: " + path);

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(16, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: corrupt metadata: " + std::string(e.what()));
  }
  if (!meta.contains("tensors") || !meta["tensors"].is_array())
    throw FormatError("checkpoint: missing tensor table");

  // Validate the payload length before constructing any tensor: a truncated
  // file must not yield partial state.
  size_t need = 16 + meta_len;
  for (const auto& e : meta["tensors"]) {
    int64_t n = 1;
    for (const auto& d : e.at("shape")) n *= d.get<int64_t>();
    need += static_cast<size_t>(n) * 4;
  }
  if (need != size)
    throw FormatError("checkpoint: truncated payload (" + std::to_string(size) + " of " +
                      std::to_string(need) + " bytes): " + path);

  NamedTensorList tensors;
  size_t off = 16 + meta_len;
  for (const auto& e : meta["tensors"]) {
    std::vector<int64_t> shape;
    for (const auto& d : e.at("shape")) shape.push_back(d.get<int64_t>());
    TensorF t(shape);
    std::memcpy(t.data(), p + off, static_cast<size_t>(t.numel()) * 4);
    off += static_cast<size_t>(t.numel()) * 4;
    tensors.items.emplace_back(e.at("name").get<std::string>(), std::move(t));
  }
  return {std::move(meta), std::move(tensors)};
}

}  // namespace unmix
