#pragma once

#include <functional>
#include <string>
#include <vector>

#include "unmix/data.hpp"
#include "unmix/nets.hpp"

namespace unmix {

// Peak signal-to-noise ratio on a [0,1] dynamic range, capped so zero-error
// reconstructions do not blow up aggregates.
double psnr(const TensorF& est, const TensorF& ref, double cap = 100.0);

// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), C1=(0.01)^2,
// C2=(0.03)^2 on unit range; channels averaged. Valid-window positions only.
double ssim(const TensorF& est, const TensorF& ref);

struct EvalReport {
  double psnr_x = 0, psnr_b = 0;
  double ssim_x = 0, ssim_b = 0;
  double psnr_mean = 0, ssim_mean = 0;
  enum class Assignment { Direct, Swapped } assignment = Assignment::Direct;
  int64_t n_examples = 0;
  bool has_ssim = true;
};

// Produces (x_hat, b_hat) for a single CHW mixture.
using SeparateFn = std::function<std::pair<TensorF, TensorF>(const TensorF&)>;

// Scores a separator against ground truth. Estimates are compared with the
// weighted contributions (w*x, (1-w)*b) actually present in the mixture, and
// the x/b assignment is resolved once per dataset by mean PSNR.
// `with_ssim=false` skips SSIM (needed when images are smaller than the
// SSIM window).
EvalReport evaluate(const SeparateFn& separate_fn, const std::vector<Mixture>& valset,
                    float mixing_weight, bool with_ssim = true);

EvalReport evaluate(const MaskNet<float>& net, const std::vector<Mixture>& valset,
                    float mixing_weight, bool with_ssim = true);

// Score of the degenerate all-pass mask (x_hat = y, b_hat = 0).
EvalReport evaluate_trivial_mask(const std::vector<Mixture>& valset, float mixing_weight,
                                 bool with_ssim = true);

std::string report_text(const EvalReport& r);
std::string report_csv(const EvalReport& r);

}  // namespace unmix
