#include "unmix/data.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "unmix/config.hpp"
#include "unmix/errors.hpp"
#include "unmix/imageio.hpp"
#include "unmix/toy.hpp"

namespace fs = std::filesystem;

namespace unmix {

namespace {

constexpr uint32_t kIdxImagesMagic = 2051;
constexpr uint32_t kIdxLabelsMagic = 2049;
constexpr int64_t kMnistPad = 2;
constexpr uint16_t kRmxtVersion = 1;

// Seed offsets keep the per-split sampling streams independent.
constexpr uint64_t kTrainStream = 0x747261696e;  // "train"
constexpr uint64_t kValStream = 0x76616c;        // "val"

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + path);
  f.seekg(0, std::ios::end);
  const auto size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  if (size > 0) f.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!f) throw DataError("failed reading file: " + path);
  return bytes;
}

uint32_t read_be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void put_u16_le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v & 0xff));
  out.push_back(uint8_t(v >> 8));
}

void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t((v >> (8 * i)) & 0xff));
}

uint16_t get_u16_le(const uint8_t* p) { return uint16_t(p[0]) | (uint16_t(p[1]) << 8); }
uint32_t get_u32_le(const uint8_t* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

float get_f32_le(const uint8_t* p) {
  const uint32_t bits = get_u32_le(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

void put_f32_le(std::vector<uint8_t>& out, float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32_le(out, bits);
}

}  // namespace

std::string profile_name(Profile p) {
  switch (p) {
    case Profile::MnistDigits: return "mnist";
    case Profile::ShoesBags: return "shoesbags";
    case Profile::Custom: return "custom";
  }
  throw ConfigError("unknown profile value");
}

Profile profile_from_name(const std::string& s) {
  if (s == "mnist") return Profile::MnistDigits;
  if (s == "shoesbags") return Profile::ShoesBags;
  if (s == "custom") return Profile::Custom;
  throw ConfigError("unknown profile '" + s + "' (expected mnist|shoesbags|custom)");
}

void DatasetManifest::validate() const {
  if (n_train < 1 || n_val < 0) throw ConfigError("manifest: n_train must be >= 1, n_val >= 0");
  if (mixing_weight <= 0.0f || mixing_weight >= 1.0f)
    throw ConfigError("manifest: mixing_weight must lie in (0,1)");
  if (height < 1 || width < 1 || channels < 1) throw ConfigError("manifest: bad geometry");
  if (profile == Profile::MnistDigits && (height != 32 || width != 32 || channels != 1))
    throw ConfigError("manifest: mnist profile is 32x32x1");
  if (profile == Profile::ShoesBags && (height != 64 || width != 64 || channels != 3))
    throw ConfigError("manifest: shoesbags profile is 64x64x3");
}

// ---- MNIST IDX ----

std::vector<SourceImage> load_mnist_idx(const std::string& images_path,
                                        const std::string& labels_path) {
  const auto img_bytes = read_file_bytes(images_path);
  const auto lbl_bytes = read_file_bytes(labels_path);

  if (img_bytes.size() < 16) throw FormatError("idx images: file too short: " + images_path);
  if (read_be32(img_bytes.data()) != kIdxImagesMagic)
    throw FormatError("idx images: bad magic (expected 2051): " + images_path);
  const int64_t n = read_be32(img_bytes.data() + 4);
  const int64_t rows = read_be32(img_bytes.data() + 8);
  const int64_t cols = read_be32(img_bytes.data() + 12);
  if (static_cast<int64_t>(img_bytes.size()) != 16 + n * rows * cols)
    throw FormatError("idx images: truncated file (" + std::to_string(img_bytes.size()) +
                      " bytes for " + std::to_string(n) + " images): " + images_path);

  if (lbl_bytes.size() < 8) throw FormatError("idx labels: file too short: " + labels_path);
  if (read_be32(lbl_bytes.data()) != kIdxLabelsMagic)
    throw FormatError("idx labels: bad magic (expected 2049): " + labels_path);
  const int64_t n_lbl = read_be32(lbl_bytes.data() + 4);
  if (static_cast<int64_t>(lbl_bytes.size()) != 8 + n_lbl)
    throw FormatError("idx labels: truncated file: " + labels_path);
  if (n != n_lbl)
    throw FormatError("idx: image/label count mismatch (" + std::to_string(n) + " vs " +
                      std::to_string(n_lbl) + ")");

  const int64_t oh = rows + 2 * kMnistPad, ow = cols + 2 * kMnistPad;
  const std::string stem = fs::path(images_path).filename().string();

  std::vector<SourceImage> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    SourceImage si;
    si.pixels = TensorF({1, oh, ow});
    const uint8_t* src = img_bytes.data() + 16 + i * rows * cols;
    float* dst = si.pixels.data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c)
        dst[(r + kMnistPad) * ow + (c + kMnistPad)] = float(src[r * cols + c]) / 255.0f;
    const uint8_t label = lbl_bytes[static_cast<size_t>(8 + i)];
    if (label > 9) throw FormatError("idx labels: value out of range: " + std::to_string(label));
    si.source_label = label <= 4 ? SourceLabel::SourceX : SourceLabel::SourceB;
    si.origin_id = stem + ":" + std::to_string(i);
    out.push_back(std::move(si));
  }
  return out;
}

// ---- image folders ----

std::vector<SourceImage> load_image_folder(const std::string& path, const DatasetManifest& m,
                                           SourceLabel label, FolderLoadReport* report) {
  if (!fs::is_directory(path)) throw DataError("not a directory: " + path);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file()) files.push_back(e.path().filename().string());
  if (files.empty()) throw DataError("empty image folder: " + path);
  std::sort(files.begin(), files.end());

  std::vector<SourceImage> out;
  for (const auto& name : files) {
    const std::string full = (fs::path(path) / name).string();
    auto img = try_decode_image_chw(full, m.height, m.width, m.channels, m.invert_intensity);
    if (!img) {
      if (report) report->skipped.push_back(full);
      continue;
    }
    SourceImage si;
    si.pixels = std::move(*img);
    si.source_label = label;
    si.origin_id = name;
    out.push_back(std::move(si));
  }
  if (out.empty()) throw DataError("no decodable images in folder: " + path);
  return out;
}

// ---- synthesis ----

namespace {

Mixture mix_pair(const SourceImage& x, const SourceImage& b, float w) {
  check_same_shape(x.pixels, b.pixels, "mix");
  Mixture m;
  m.pixels = TensorF(x.pixels.shape());
  const int64_t n = m.pixels.numel();
  for (int64_t i = 0; i < n; ++i) m.pixels[i] = w * x.pixels[i] + (1.0f - w) * b.pixels[i];
  m.gt_x = x.pixels;
  m.gt_b = b.pixels;
  m.origin_x = x.origin_id;
  m.origin_b = b.origin_id;
  return m;
}

}  // namespace

std::vector<Mixture> synthesize_mixtures(const std::vector<SourceImage>& xs,
                                         const std::vector<SourceImage>& bs,
                                         const DatasetManifest& m, Split split) {
  if (xs.empty() || bs.empty()) throw DataError("synthesize: empty source pool");
  const int64_t count = split == Split::Train ? m.n_train : m.n_val;
  Rng rng(m.seed + (split == Split::Train ? kTrainStream : kValStream));
  const bool with_replacement = m.profile == Profile::MnistDigits;

  std::vector<Mixture> out;
  out.reserve(static_cast<size_t>(count));
  if (with_replacement) {
    for (int64_t i = 0; i < count; ++i) {
      const auto& x = xs[static_cast<size_t>(rng.uniform_int(int64_t(xs.size())))];
      const auto& b = bs[static_cast<size_t>(rng.uniform_int(int64_t(bs.size())))];
      out.push_back(mix_pair(x, b, m.mixing_weight));
    }
  } else {
    if (count > static_cast<int64_t>(std::min(xs.size(), bs.size())))
      throw DataError("synthesize: requested " + std::to_string(count) +
                      " mixtures but only " + std::to_string(std::min(xs.size(), bs.size())) +
                      " unique pairs available without replacement");
    std::vector<int64_t> ix(xs.size()), ib(bs.size());
    std::iota(ix.begin(), ix.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    rng.shuffle(ix);
    rng.shuffle(ib);
    for (int64_t i = 0; i < count; ++i)
      out.push_back(mix_pair(xs[static_cast<size_t>(ix[static_cast<size_t>(i)])],
                             bs[static_cast<size_t>(ib[static_cast<size_t>(i)])],
                             m.mixing_weight));
  }
  return out;
}

// ---- dataset builders ----

Dataset build_mnist_dataset(const DatasetManifest& m) {
  m.validate();
  const fs::path dir = m.source_x;
  auto train_pool = load_mnist_idx((dir / "train-images-idx3-ubyte").string(),
                                   (dir / "train-labels-idx1-ubyte").string());
  auto val_pool = load_mnist_idx((dir / "t10k-images-idx3-ubyte").string(),
                                 (dir / "t10k-labels-idx1-ubyte").string());

  auto partition = [](std::vector<SourceImage>& pool) {
    std::vector<SourceImage> xs, bs;
    for (auto& si : pool)
      (si.source_label == SourceLabel::SourceX ? xs : bs).push_back(std::move(si));
    return std::pair{std::move(xs), std::move(bs)};
  };
  auto [train_x, train_b] = partition(train_pool);
  auto [val_x, val_b] = partition(val_pool);

  if (m.height != train_x.at(0).pixels.dim(1) || m.width != train_x.at(0).pixels.dim(2))
    throw DataError("mnist: image geometry does not match manifest");

  Dataset ds;
  ds.manifest = m;
  ds.train = synthesize_mixtures(train_x, train_b, m, Split::Train);
  ds.val = synthesize_mixtures(val_x, val_b, m, Split::Val);
  return ds;
}

Dataset build_folder_dataset(const DatasetManifest& m, FolderLoadReport* report) {
  m.validate();
  auto xs = load_image_folder(m.source_x, m, SourceLabel::SourceX, report);
  auto bs = load_image_folder(m.source_b, m, SourceLabel::SourceB, report);

  // Disjoint train/val pools: shuffle once, split by position.
  const int64_t need = m.n_train + m.n_val;
  if (need > static_cast<int64_t>(std::min(xs.size(), bs.size())))
    throw DataError("folder dataset: need " + std::to_string(need) +
                    " sources per side, have x=" + std::to_string(xs.size()) +
                    " b=" + std::to_string(bs.size()));
  Rng rng(m.seed);
  rng.shuffle(xs);
  rng.shuffle(bs);
  std::vector<SourceImage> train_x(xs.begin(), xs.begin() + m.n_train);
  std::vector<SourceImage> train_b(bs.begin(), bs.begin() + m.n_train);
  std::vector<SourceImage> val_x(xs.begin() + m.n_train, xs.begin() + need);
  std::vector<SourceImage> val_b(bs.begin() + m.n_train, bs.begin() + need);

  Dataset ds;
  ds.manifest = m;
  ds.train = synthesize_mixtures(train_x, train_b, m, Split::Train);
  ds.val = m.n_val > 0 ? synthesize_mixtures(val_x, val_b, m, Split::Val) : std::vector<Mixture>{};
  return ds;
}

Dataset build_toy_dataset(const DatasetManifest& m) {
  m.validate();
  const int64_t size = m.height;
  if (m.width != size || m.channels != 1)
    throw ConfigError("toy generators are square single-channel");

  auto gen_sources = [&](Split split) {
    const int64_t count = split == Split::Train ? m.n_train : m.n_val;
    Rng rng(m.seed + (split == Split::Train ? kTrainStream : kValStream) + 0x746f79);
    std::pair<std::vector<SourceImage>, std::vector<SourceImage>> pools;
    if (m.generator == "bars8" || m.generator == "bars") {
      pools.first = make_bar_sources(count, size, true, SourceLabel::SourceX, rng);
      pools.second = make_bar_sources(count, size, false, SourceLabel::SourceB, rng);
    } else if (m.generator == "barsdots8" || m.generator == "barsdots") {
      pools.first = make_bar_sources(count, size, true, SourceLabel::SourceX, rng);
      pools.second = make_dot_sources(count, size, SourceLabel::SourceB, rng);
    } else {
      throw ConfigError("unknown generator '" + m.generator + "'");
    }
    // Uniquify origins across splits.
    const char* tag = split == Split::Train ? "train" : "val";
    for (auto& s : pools.first) s.origin_id = std::string(tag) + ":" + s.origin_id;
    for (auto& s : pools.second) s.origin_id = std::string(tag) + ":" + s.origin_id;
    return pools;
  };

  Dataset ds;
  ds.manifest = m;
  auto [tx, tb] = gen_sources(Split::Train);
  ds.train = synthesize_mixtures(tx, tb, m, Split::Train);
  if (m.n_val > 0) {
    auto [vx, vb] = gen_sources(Split::Val);
    ds.val = synthesize_mixtures(vx, vb, m, Split::Val);
  }
  return ds;
}

Dataset build_dataset(const DatasetManifest& m, FolderLoadReport* report) {
  if (m.profile == Profile::MnistDigits) return build_mnist_dataset(m);
  if (!m.generator.empty()) return build_toy_dataset(m);
  return build_folder_dataset(m, report);
}

// ---- pairing / batching ----

std::vector<MixturePair> epoch_pairing(int64_t n, Rng& rng) {
  if (n < 2) throw ConfigError("epoch_pairing: need at least 2 mixtures");
  std::vector<int32_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  std::vector<MixturePair> pairs;
  pairs.reserve(static_cast<size_t>(n / 2));
  for (int64_t i = 0; i + 1 < n; i += 2)
    pairs.push_back({idx[static_cast<size_t>(i)], idx[static_cast<size_t>(i + 1)]});
  return pairs;
}

std::vector<std::vector<MixturePair>> chunk_pairs(const std::vector<MixturePair>& pairs,
                                                  int64_t batch_size) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::vector<MixturePair>> out;
  for (size_t i = 0; i < pairs.size(); i += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(pairs.size(), i + static_cast<size_t>(batch_size));
    out.emplace_back(pairs.begin() + static_cast<int64_t>(i),
                     pairs.begin() + static_cast<int64_t>(end));
  }
  return out;
}

std::vector<std::vector<MixturePair>> batch_pairs(int64_t dataset_size, int64_t batch_size,
                                                  Rng& rng) {
  return chunk_pairs(epoch_pairing(dataset_size, rng), batch_size);
}

TensorF pack_mixtures(const std::vector<Mixture>& ds, const std::vector<int32_t>& indices) {
  if (indices.empty()) throw ConfigError("pack_mixtures: empty batch");
  const auto& shape = ds.at(static_cast<size_t>(indices[0])).pixels.shape();
  TensorF out({static_cast<int64_t>(indices.size()), shape[0], shape[1], shape[2]});
  const int64_t stride = shape[0] * shape[1] * shape[2];
  for (size_t i = 0; i < indices.size(); ++i) {
    const auto& px = ds.at(static_cast<size_t>(indices[i])).pixels;
    check_same_shape(px, ds[static_cast<size_t>(indices[0])].pixels, "pack_mixtures");
    std::copy(px.data(), px.data() + stride, out.data() + static_cast<int64_t>(i) * stride);
  }
  return out;
}

std::pair<TensorF, TensorF> pack_pairs(const std::vector<Mixture>& ds,
                                       const std::vector<MixturePair>& batch) {
  std::vector<int32_t> firsts, seconds;
  for (const auto& p : batch) {
    firsts.push_back(p.first);
    seconds.push_back(p.second);
  }
  return {pack_mixtures(ds, firsts), pack_mixtures(ds, seconds)};
}

// ---- RMXT ----

void write_rmxt(const std::string& path, const std::vector<TensorF>& images_chw) {
  if (images_chw.empty()) throw DataError("write_rmxt: nothing to write");
  const auto& s0 = images_chw[0].shape();
  if (s0.size() != 3) throw DimensionError("write_rmxt: expected CHW images");
  const int64_t c = s0[0], h = s0[1], w = s0[2];
  if (h > 0xffff || w > 0xffff || c > 0xffff) throw DimensionError("write_rmxt: dims exceed u16");

  std::vector<uint8_t> bytes;
  bytes.reserve(16 + images_chw.size() * static_cast<size_t>(c * h * w) * 4);
  bytes.insert(bytes.end(), {'R', 'M', 'X', 'T'});
  put_u16_le(bytes, kRmxtVersion);
  put_u16_le(bytes, uint16_t(h));
  put_u16_le(bytes, uint16_t(w));
  put_u16_le(bytes, uint16_t(c));
  put_u32_le(bytes, uint32_t(images_chw.size()));

  for (const auto& img : images_chw) {
    if (img.shape() != s0) throw DimensionError("write_rmxt: inconsistent image shapes");
    // CHW -> HWC on disk
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t ch = 0; ch < c; ++ch) put_f32_le(bytes, img[(ch * h + y) * w + x]);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed: " + path);
}

std::vector<TensorF> read_rmxt(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 16) throw FormatError("rmxt: file too short: " + path);
  if (std::memcmp(bytes.data(), "RMXT", 4) != 0) throw FormatError("rmxt: bad magic: " + path);
  const uint16_t version = get_u16_le(bytes.data() + 4);
  if (version != kRmxtVersion)
    throw FormatError("rmxt: unsupported version " + std::to_string(version));
  const int64_t h = get_u16_le(bytes.data() + 6);
  const int64_t w = get_u16_le(bytes.data() + 8);
  const int64_t c = get_u16_le(bytes.data() + 10);
  const int64_t count = get_u32_le(bytes.data() + 12);
  const int64_t expect = 16 + count * h * w * c * 4;
  if (static_cast<int64_t>(bytes.size()) != expect)
    throw FormatError("rmxt: truncated file (" + std::to_string(bytes.size()) + " of " +
                      std::to_string(expect) + " bytes): " + path);

  std::vector<TensorF> out;
  out.reserve(static_cast<size_t>(count));
  const uint8_t* p = bytes.data() + 16;
  for (int64_t i = 0; i < count; ++i) {
    TensorF img({c, h, w});
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t ch = 0; ch < c; ++ch) {
          img[(ch * h + y) * w + x] = get_f32_le(p);
          p += 4;
        }
    out.push_back(std::move(img));
  }
  return out;
}

// ---- dataset directory ----

namespace {

const char* kManifestName = "manifest.txt";

void write_split(const fs::path& dir, const std::string& prefix,
                 const std::vector<Mixture>& split) {
  std::vector<TensorF> mix, gtx, gtb;
  std::ostringstream origins;
  for (const auto& m : split) {
    mix.push_back(m.pixels);
    if (m.has_ground_truth()) {
      gtx.push_back(m.gt_x);
      gtb.push_back(m.gt_b);
    }
    origins << m.origin_x << "\t" << m.origin_b << "\n";
  }
  write_rmxt((dir / (prefix + "_mix.rmxt")).string(), mix);
  if (!gtx.empty()) {
    if (gtx.size() != mix.size())
      throw DataError("write_split: partial ground truth in split " + prefix);
    write_rmxt((dir / (prefix + "_gtx.rmxt")).string(), gtx);
    write_rmxt((dir / (prefix + "_gtb.rmxt")).string(), gtb);
  }
  std::ofstream of(dir / (prefix + "_origins.txt"), std::ios::binary | std::ios::trunc);
  of << origins.str();
  if (!of) throw DataError("cannot write origins file");
}

std::vector<Mixture> read_split(const fs::path& dir, const std::string& prefix) {
  const auto mix_path = dir / (prefix + "_mix.rmxt");
  if (!fs::exists(mix_path)) return {};
  auto mix = read_rmxt(mix_path.string());
  std::vector<TensorF> gtx, gtb;
  if (fs::exists(dir / (prefix + "_gtx.rmxt"))) {
    gtx = read_rmxt((dir / (prefix + "_gtx.rmxt")).string());
    gtb = read_rmxt((dir / (prefix + "_gtb.rmxt")).string());
    if (gtx.size() != mix.size() || gtb.size() != mix.size())
      throw FormatError("dataset: ground truth count mismatch in split " + prefix);
  }
  std::vector<std::pair<std::string, std::string>> origins;
  {
    std::ifstream f(dir / (prefix + "_origins.txt"), std::ios::binary);
    std::string line;
    while (std::getline(f, line)) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      origins.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
  }
  std::vector<Mixture> out;
  out.reserve(mix.size());
  for (size_t i = 0; i < mix.size(); ++i) {
    Mixture m;
    m.pixels = std::move(mix[i]);
    if (!gtx.empty()) {
      m.gt_x = std::move(gtx[i]);
      m.gt_b = std::move(gtb[i]);
    }
    if (i < origins.size()) {
      m.origin_x = origins[i].first;
      m.origin_b = origins[i].second;
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

void write_manifest_file(const std::string& path, const DatasetManifest& m) {
  std::ostringstream os;
  os << "version = 1\n";
  os << "profile = " << profile_name(m.profile) << "\n";
  os << "n_train = " << m.n_train << "\n";
  os << "n_val = " << m.n_val << "\n";
  os << "seed = " << m.seed << "\n";
  os << "mixing_weight = " << format_float(m.mixing_weight) << "\n";
  os << "invert_intensity = " << (m.invert_intensity ? 1 : 0) << "\n";
  os << "height = " << m.height << "\n";
  os << "width = " << m.width << "\n";
  os << "channels = " << m.channels << "\n";
  if (!m.generator.empty()) os << "generator = " << m.generator << "\n";
  if (!m.source_x.empty()) os << "source_x = " << m.source_x << "\n";
  if (!m.source_b.empty()) os << "source_b = " << m.source_b << "\n";
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write manifest: " + path);
  f << os.str();
}

DatasetManifest read_manifest_file(const std::string& path) {
  auto kv = parse_kv_file(path);
  static const std::set<std::string> known = {
      "version",   "profile", "n_train",  "n_val",    "seed",     "mixing_weight",
      "invert_intensity", "height",  "width",    "channels", "generator", "source_x", "source_b"};
  for (const auto& [k, v] : kv)
    if (!known.count(k)) throw ConfigError("manifest: unknown key '" + k + "'");
  const int64_t version = kv_int(kv, "version", 1);
  if (version != 1) throw FormatError("manifest: unsupported version " + std::to_string(version));

  DatasetManifest m;
  m.profile = profile_from_name(kv_str(kv, "profile", "custom"));
  m.n_train = kv_int(kv, "n_train", 0);
  m.n_val = kv_int(kv, "n_val", 0);
  m.seed = kv_uint(kv, "seed", 0);
  m.mixing_weight = static_cast<float>(kv_double(kv, "mixing_weight", 0.5));
  m.invert_intensity = kv_bool(kv, "invert_intensity", false);
  m.height = kv_int(kv, "height", 32);
  m.width = kv_int(kv, "width", 32);
  m.channels = kv_int(kv, "channels", 1);
  m.generator = kv_str(kv, "generator", "");
  m.source_x = kv_str(kv, "source_x", "");
  m.source_b = kv_str(kv, "source_b", "");
  return m;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(dir);
  write_manifest_file((fs::path(dir) / kManifestName).string(), ds.manifest);
  write_split(dir, "train", ds.train);
  if (!ds.val.empty()) write_split(dir, "val", ds.val);
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.manifest = read_manifest_file((fs::path(dir) / kManifestName).string());
  ds.train = read_split(dir, "train");
  ds.val = read_split(dir, "val");
  if (ds.train.empty()) throw DataError("dataset has no training mixtures: " + dir);
  return ds;
}

std::string dataset_hash(const std::string& dir) {
  static const char* files[] = {"manifest.txt",     "train_mix.rmxt", "train_gtx.rmxt",
                                "train_gtb.rmxt",   "train_origins.txt", "val_mix.rmxt",
                                "val_gtx.rmxt",     "val_gtb.rmxt",   "val_origins.txt"};
  uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const uint8_t* p, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  for (const char* f : files) {
    const fs::path p = fs::path(dir) / f;
    if (!fs::exists(p)) continue;
    const auto bytes = read_file_bytes(p.string());
    feed(reinterpret_cast<const uint8_t*>(f), std::strlen(f));
    feed(bytes.data(), bytes.size());
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace unmix
