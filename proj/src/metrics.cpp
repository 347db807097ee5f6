#include "unmix/metrics.hpp"

#include <cmath>
#include <sstream>

#include "unmix/config.hpp"
#include "unmix/separator.hpp"

namespace unmix {

double psnr(const TensorF& est, const TensorF& ref, double cap) {
  check_same_shape(est, ref, "psnr");
  const int64_t n = est.numel();
  if (n == 0) throw DimensionError("psnr: empty tensors");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = double(est[i]) - double(ref[i]);
    acc += d * d;
  }
  const double mse = acc / double(n);
  if (mse == 0.0) return cap;
  return std::min(cap, 10.0 * std::log10(1.0 / mse));
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

const std::vector<double>& ssim_kernel() {
  static const std::vector<double> k = [] {
    std::vector<double> w(kSsimWindow * kSsimWindow);
    const int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int y = 0; y < kSsimWindow; ++y)
      for (int x = 0; x < kSsimWindow; ++x) {
        const double dy = y - half, dx = x - half;
        const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
        w[y * kSsimWindow + x] = v;
        sum += v;
      }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return k;
}

}  // namespace

double ssim(const TensorF& est, const TensorF& ref) {
  check_same_shape(est, ref, "ssim");
  if (est.rank() != 3) throw DimensionError("ssim: expected CHW tensors");
  const int64_t c = est.dim(0), h = est.dim(1), w = est.dim(2);
  if (h < kSsimWindow || w < kSsimWindow)
    throw ConfigError("ssim: image smaller than the 11x11 window");

  const auto& kern = ssim_kernel();
  double total = 0.0;
  int64_t count = 0;
  for (int64_t ch = 0; ch < c; ++ch) {
    const float* a = est.data() + ch * h * w;
    const float* b = ref.data() + ch * h * w;
    for (int64_t y = 0; y + kSsimWindow <= h; ++y) {
      for (int64_t x = 0; x + kSsimWindow <= w; ++x) {
        double mu_a = 0.0, mu_b = 0.0;
        for (int ky = 0; ky < kSsimWindow; ++ky)
          for (int kx = 0; kx < kSsimWindow; ++kx) {
            const double wgt = kern[ky * kSsimWindow + kx];
            mu_a += wgt * a[(y + ky) * w + (x + kx)];
            mu_b += wgt * b[(y + ky) * w + (x + kx)];
          }
        double var_a = 0.0, var_b = 0.0, cov = 0.0;
        for (int ky = 0; ky < kSsimWindow; ++ky)
          for (int kx = 0; kx < kSsimWindow; ++kx) {
            const double wgt = kern[ky * kSsimWindow + kx];
            const double da = a[(y + ky) * w + (x + kx)] - mu_a;
            const double db = b[(y + ky) * w + (x + kx)] - mu_b;
            var_a += wgt * da * da;
            var_b += wgt * db * db;
            cov += wgt * da * db;
          }
        const double num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
        const double den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
        total += num / den;
        ++count;
      }
    }
  }
  return total / double(count);
}

namespace {

struct PsnrSums {
  double direct_x = 0, direct_b = 0, swapped_x = 0, swapped_b = 0;
};

TensorF weighted(const TensorF& t, float w) {
  TensorF out(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) out[i] = w * t[i];
  return out;
}

}  // namespace

EvalReport evaluate(const SeparateFn& separate_fn, const std::vector<Mixture>& valset,
                    float mixing_weight, bool with_ssim) {
  if (valset.empty()) throw ConfigError("evaluate: empty validation set");
  for (const auto& m : valset)
    if (!m.has_ground_truth()) throw ConfigError("evaluate: mixture without ground truth");

  const int64_t n = static_cast<int64_t>(valset.size());
  PsnrSums sums;
  std::vector<std::pair<TensorF, TensorF>> estimates;
  estimates.reserve(valset.size());
  for (const auto& m : valset) {
    auto [xh, bh] = separate_fn(m.pixels);
    const TensorF rx = weighted(m.gt_x, mixing_weight);
    const TensorF rb = weighted(m.gt_b, 1.0f - mixing_weight);
    sums.direct_x += psnr(xh, rx);
    sums.direct_b += psnr(bh, rb);
    sums.swapped_x += psnr(bh, rx);
    sums.swapped_b += psnr(xh, rb);
    estimates.emplace_back(std::move(xh), std::move(bh));
  }

  const double direct_mean = (sums.direct_x + sums.direct_b) / (2.0 * n);
  const double swapped_mean = (sums.swapped_x + sums.swapped_b) / (2.0 * n);
  const bool swapped = swapped_mean > direct_mean;

  EvalReport r;
  r.n_examples = n;
  r.assignment = swapped ? EvalReport::Assignment::Swapped : EvalReport::Assignment::Direct;
  r.psnr_x = (swapped ? sums.swapped_x : sums.direct_x) / n;
  r.psnr_b = (swapped ? sums.swapped_b : sums.direct_b) / n;
  r.psnr_mean = (r.psnr_x + r.psnr_b) / 2.0;
  r.has_ssim = with_ssim;
  if (with_ssim) {
    double sx = 0, sb = 0;
    for (int64_t i = 0; i < n; ++i) {
      const auto& m = valset[static_cast<size_t>(i)];
      const TensorF rx = weighted(m.gt_x, mixing_weight);
      const TensorF rb = weighted(m.gt_b, 1.0f - mixing_weight);
      const auto& [xh, bh] = estimates[static_cast<size_t>(i)];
      sx += ssim(swapped ? bh : xh, rx);
      sb += ssim(swapped ? xh : bh, rb);
    }
    r.ssim_x = sx / n;
    r.ssim_b = sb / n;
    r.ssim_mean = (r.ssim_x + r.ssim_b) / 2.0;
  }
  return r;
}

EvalReport evaluate(const MaskNet<float>& net, const std::vector<Mixture>& valset,
                    float mixing_weight, bool with_ssim) {
  // Batched forward; per-image results are then scored by the generic path.
  if (valset.empty()) throw ConfigError("evaluate: empty validation set");
  const int64_t batch = 64;
  const auto& shape = valset[0].pixels.shape();
  const int64_t stride = shape[0] * shape[1] * shape[2];

  std::vector<std::pair<TensorF, TensorF>> results(valset.size());
  for (size_t start = 0; start < valset.size(); start += batch) {
    const size_t end = std::min(valset.size(), start + batch);
    TensorF packed({static_cast<int64_t>(end - start), shape[0], shape[1], shape[2]});
    for (size_t i = start; i < end; ++i)
      std::copy(valset[i].pixels.data(), valset[i].pixels.data() + stride,
                packed.data() + static_cast<int64_t>(i - start) * stride);
    auto sep = separate(net, packed);
    for (size_t i = start; i < end; ++i) {
      TensorF xh(shape), bh(shape);
      const int64_t off = static_cast<int64_t>(i - start) * stride;
      std::copy(sep.x_hat.data() + off, sep.x_hat.data() + off + stride, xh.data());
      std::copy(sep.b_hat.data() + off, sep.b_hat.data() + off + stride, bh.data());
      results[i] = {std::move(xh), std::move(bh)};
    }
  }
  size_t cursor = 0;
  return evaluate(
      [&](const TensorF&) { return std::move(results[cursor++]); },
      valset, mixing_weight, with_ssim);
}

EvalReport evaluate_trivial_mask(const std::vector<Mixture>& valset, float mixing_weight,
                                 bool with_ssim) {
  return evaluate(
      [](const TensorF& y) {
        TensorF zeros(y.shape());
        return std::pair<TensorF, TensorF>(TensorF(y), std::move(zeros));
      },
      valset, mixing_weight, with_ssim);
}

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "n_examples = " << r.n_examples << "\n";
  os << "assignment = " << (r.assignment == EvalReport::Assignment::Direct ? "direct" : "swapped")
     << "\n";
  os << "psnr_x = " << format_double(r.psnr_x) << "\n";
  os << "psnr_b = " << format_double(r.psnr_b) << "\n";
  os << "psnr_mean = " << format_double(r.psnr_mean) << "\n";
  if (r.has_ssim) {
    os << "ssim_x = " << format_double(r.ssim_x) << "\n";
    os << "ssim_b = " << format_double(r.ssim_b) << "\n";
    os << "ssim_mean = " << format_double(r.ssim_mean) << "\n";
  }
  return os.str();
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "n_examples,assignment,psnr_x,psnr_b,psnr_mean,ssim_x,ssim_b,ssim_mean\n";
  os << r.n_examples << ","
     << (r.assignment == EvalReport::Assignment::Direct ? "direct" : "swapped") << ","
     << format_double(r.psnr_x) << "," << format_double(r.psnr_b) << ","
     << format_double(r.psnr_mean) << ",";
  if (r.has_ssim)
    os << format_double(r.ssim_x) << "," << format_double(r.ssim_b) << ","
       << format_double(r.ssim_mean);
  else
    os << ",,";
  os << "\n";
  return os.str();
}

}  // namespace unmix
