#pragma once

#include <string>
#include <utility>
#include <vector>

#include "unmix/conv.hpp"
#include "unmix/rng.hpp"

namespace unmix {

// Encoder-decoder geometry. `levels` stride-2 blocks take the input down to
// a (h>>levels) bottleneck; channels start at `base_channels` after the first
// encoder conv and double per level, so the penultimate decoder layer is back
// at base_channels.
struct ArchDescriptor {
  int64_t in_h = 32;
  int64_t in_w = 32;
  int64_t in_c = 1;
  int64_t base_channels = 64;
  int64_t levels = 3;

  int64_t enc_channels(int64_t level) const { return base_channels << level; }
  int64_t bottleneck_h() const { return in_h >> levels; }
  int64_t bottleneck_w() const { return in_w >> levels; }

  void validate() const {
    if (levels < 1) throw ConfigError("arch: levels must be >= 1");
    if (base_channels < 1) throw ConfigError("arch: base_channels must be >= 1");
    if ((in_h >> levels) << levels != in_h || (in_w >> levels) << levels != in_w)
      throw ConfigError("arch: input size must be divisible by 2^levels");
    if (bottleneck_h() < 1 || bottleneck_w() < 1)
      throw ConfigError("arch: bottleneck collapsed to zero");
  }

  bool operator==(const ArchDescriptor&) const = default;
};

// Profile presets: bottleneck kept at 4x4 spatial.
inline ArchDescriptor arch_for_input(int64_t h, int64_t w, int64_t c, int64_t base = 64) {
  ArchDescriptor a;
  a.in_h = h;
  a.in_w = w;
  a.in_c = c;
  a.base_channels = base;
  int64_t levels = 0;
  int64_t s = std::min(h, w);
  while (s > 4 && s % 2 == 0) {
    s /= 2;
    ++levels;
  }
  a.levels = std::max<int64_t>(1, levels);
  a.validate();
  return a;
}

namespace netdet {

// DCGAN-family init for the masker. The normalization-free discriminator
// instead uses He scaling (stddev sqrt(2/fan_in)): with 0.02 weights its
// scores would start around 1e-3 against least-squares targets of 1, and the
// adversarial signal would take most of training to become visible.
constexpr double kMaskInitStd = 0.02;

template <typename T>
Var<T> init_weight(std::vector<int64_t> shape, double stddev, Rng& rng) {
  Tensor<T> w(std::move(shape));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.normal(0.0, stddev));
  return make_var(std::move(w), true);
}

inline double he_std(int64_t c_in, int64_t k) {
  return std::sqrt(2.0 / (static_cast<double>(c_in) * k * k));
}

template <typename T>
Var<T> init_bias(int64_t n) {
  return make_var(Tensor<T>({n}), true);
}

}  // namespace netdet

template <typename T>
struct Conv2dLayer {
  Var<T> w, b;
  int64_t stride = 2, pad = 1;

  Conv2dLayer() = default;
  Conv2dLayer(int64_t c_in, int64_t c_out, int64_t k, int64_t stride_, int64_t pad_, double stddev,
              Rng& rng)
      : w(netdet::init_weight<T>({c_out, c_in, k, k}, stddev, rng)),
        b(netdet::init_bias<T>(c_out)),
        stride(stride_),
        pad(pad_) {}

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <typename T>
struct ConvT2dLayer {
  Var<T> w, b;
  int64_t stride = 2, pad = 1;

  ConvT2dLayer() = default;
  ConvT2dLayer(int64_t c_in, int64_t c_out, int64_t k, int64_t stride_, int64_t pad_,
               double stddev, Rng& rng)
      : w(netdet::init_weight<T>({c_in, c_out, k, k}, stddev, rng)),
        b(netdet::init_bias<T>(c_out)),
        stride(stride_),
        pad(pad_) {}

  Var<T> operator()(const Var<T>& x) const { return conv_transpose2d(x, w, b, stride, pad); }
};

template <typename T>
using NamedParams = std::vector<std::pair<std::string, Var<T>>>;

// Masking network M(y): stride-2 conv encoder, mirrored transposed-conv
// decoder, sigmoid head so every mask value lies strictly inside (0,1).
// Normalization-free blocks.
template <typename T>
class MaskNet {
 public:
  MaskNet() = default;

  MaskNet(const ArchDescriptor& arch, Rng& rng) : arch_(arch) {
    arch.validate();
    int64_t c = arch.in_c;
    for (int64_t l = 0; l < arch.levels; ++l) {
      enc_.emplace_back(c, arch.enc_channels(l), 4, 2, 1, netdet::kMaskInitStd, rng);
      c = arch.enc_channels(l);
    }
    for (int64_t l = arch.levels - 1; l >= 0; --l) {
      const int64_t c_out = l == 0 ? arch.in_c : arch.enc_channels(l - 1);
      dec_.emplace_back(c, c_out, 4, 2, 1, netdet::kMaskInitStd, rng);
      c = c_out;
    }
  }

  const ArchDescriptor& arch() const { return arch_; }

  // Returns the mask, same shape as y, values in (0,1).
  Var<T> forward(const Var<T>& y) const {
    check_input(y->value);
    Var<T> h = y;
    for (const auto& layer : enc_) h = leaky_relu(layer(h), T(0.2));
    for (size_t i = 0; i + 1 < dec_.size(); ++i) h = relu(dec_[i](h));
    return sigmoid(dec_.back()(h));
  }

  NamedParams<T> named_parameters() const {
    NamedParams<T> out;
    for (size_t i = 0; i < enc_.size(); ++i) {
      out.emplace_back("enc" + std::to_string(i) + ".w", enc_[i].w);
      out.emplace_back("enc" + std::to_string(i) + ".b", enc_[i].b);
    }
    for (size_t i = 0; i < dec_.size(); ++i) {
      out.emplace_back("dec" + std::to_string(i) + ".w", dec_[i].w);
      out.emplace_back("dec" + std::to_string(i) + ".b", dec_[i].b);
    }
    return out;
  }

  std::vector<Var<T>> parameters() const {
    std::vector<Var<T>> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
  }

  void set_requires_grad(bool rg) const {
    for (auto& p : parameters()) p->requires_grad = rg;
  }

 private:
  void check_input(const Tensor<T>& y) const {
    if (y.rank() != 4 || y.dim(1) != arch_.in_c || y.dim(2) != arch_.in_h ||
        y.dim(3) != arch_.in_w)
      throw DimensionError("mask input " + y.shape_str() + " does not match arch (N," +
                           std::to_string(arch_.in_c) + "," + std::to_string(arch_.in_h) + "," +
                           std::to_string(arch_.in_w) + ")");
  }

  ArchDescriptor arch_;
  std::vector<Conv2dLayer<T>> enc_;
  std::vector<ConvT2dLayer<T>> dec_;
};

// Discriminator D(y): DCGAN-style stride-2 stack ending in a full-bottleneck
// valid conv; unbounded scalar output per image for the least-squares targets.
template <typename T>
class DiscNet {
 public:
  DiscNet() = default;

  DiscNet(const ArchDescriptor& arch, Rng& rng) : arch_(arch) {
    arch.validate();
    int64_t c = arch.in_c;
    for (int64_t l = 0; l < arch.levels; ++l) {
      convs_.emplace_back(c, arch.enc_channels(l), 4, 2, 1, netdet::he_std(c, 4), rng);
      c = arch.enc_channels(l);
    }
    if (arch.bottleneck_h() != arch.bottleneck_w())
      throw ConfigError("disc: non-square bottleneck unsupported");
    const int64_t k = arch.bottleneck_h();
    head_ = Conv2dLayer<T>(c, 1, k, 1, 0, netdet::he_std(c, k), rng);
  }

  const ArchDescriptor& arch() const { return arch_; }

  // (N,C,H,W) -> (N,1,1,1), one real score per image.
  Var<T> forward(const Var<T>& y) const {
    Var<T> h = y;
    for (const auto& layer : convs_) h = leaky_relu(layer(h), T(0.2));
    return head_(h);
  }

  NamedParams<T> named_parameters() const {
    NamedParams<T> out;
    for (size_t i = 0; i < convs_.size(); ++i) {
      out.emplace_back("conv" + std::to_string(i) + ".w", convs_[i].w);
      out.emplace_back("conv" + std::to_string(i) + ".b", convs_[i].b);
    }
    out.emplace_back("head.w", head_.w);
    out.emplace_back("head.b", head_.b);
    return out;
  }

  std::vector<Var<T>> parameters() const {
    std::vector<Var<T>> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
  }

  void set_requires_grad(bool rg) const {
    for (auto& p : parameters()) p->requires_grad = rg;
  }

 private:
  ArchDescriptor arch_;
  std::vector<Conv2dLayer<T>> convs_;
  Conv2dLayer<T> head_;
};

}  // namespace unmix
