#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "unmix/data.hpp"
#include "unmix/gemm.hpp"
#include "unmix/metrics.hpp"
#include "unmix/remix.hpp"
#include "unmix/separator.hpp"
#include "unmix/toy.hpp"
#include "unmix/trainer.hpp"

namespace py = pybind11;
using namespace unmix;

namespace {

// numpy (H,W,C) or (N,H,W,C) float32 <-> internal NCHW tensors

TensorF nhwc_to_nchw(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
  auto buf = arr.request();
  int64_t n = 1, h, w, c;
  if (buf.ndim == 4) {
    n = buf.shape[0];
    h = buf.shape[1];
    w = buf.shape[2];
    c = buf.shape[3];
  } else if (buf.ndim == 3) {
    h = buf.shape[0];
    w = buf.shape[1];
    c = buf.shape[2];
  } else {
    throw DimensionError("expected (H,W,C) or (N,H,W,C) array");
  }
  TensorF out({n, c, h, w});
  const float* src = static_cast<const float*>(buf.ptr);
  for (int64_t in = 0; in < n; ++in)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t ch = 0; ch < c; ++ch)
          out[((in * c + ch) * h + y) * w + x] = src[((in * h + y) * w + x) * c + ch];
  return out;
}

py::array_t<float> nchw_to_nhwc(const TensorF& t, bool squeeze_batch) {
  const int64_t n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
  py::array_t<float> arr;
  if (squeeze_batch && n == 1)
    arr = py::array_t<float>({h, w, c});
  else
    arr = py::array_t<float>({n, h, w, c});
  float* dst = static_cast<float*>(arr.request().ptr);
  for (int64_t in = 0; in < n; ++in)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t ch = 0; ch < c; ++ch)
          dst[((in * h + y) * w + x) * c + ch] = t[((in * c + ch) * h + y) * w + x];
  return arr;
}

py::array_t<float> chw_image_to_numpy(const TensorF& img) {
  const int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  py::array_t<float> arr({h, w, c});
  float* dst = static_cast<float*>(arr.request().ptr);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t ch = 0; ch < c; ++ch) dst[(y * w + x) * c + ch] = img[(ch * h + y) * w + x];
  return arr;
}

py::dict report_to_dict(const EvalReport& r) {
  py::dict d;
  d["psnr_x"] = r.psnr_x;
  d["psnr_b"] = r.psnr_b;
  d["psnr_mean"] = r.psnr_mean;
  if (r.has_ssim) {
    d["ssim_x"] = r.ssim_x;
    d["ssim_b"] = r.ssim_b;
    d["ssim_mean"] = r.ssim_mean;
  }
  d["assignment"] = r.assignment == EvalReport::Assignment::Direct ? "direct" : "swapped";
  d["n_examples"] = r.n_examples;
  return d;
}

std::vector<Mixture> mixtures_from_numpy(py::array_t<float> mix, py::array_t<float> gt_x,
                                         py::array_t<float> gt_b) {
  TensorF m = nhwc_to_nchw(mix), x = nhwc_to_nchw(gt_x), b = nhwc_to_nchw(gt_b);
  check_same_shape(m, x, "mixtures");
  check_same_shape(m, b, "mixtures");
  const int64_t n = m.dim(0), stride = m.dim(1) * m.dim(2) * m.dim(3);
  std::vector<Mixture> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    auto& mx = out[static_cast<size_t>(i)];
    mx.pixels = TensorF({m.dim(1), m.dim(2), m.dim(3)});
    mx.gt_x = TensorF(mx.pixels.shape());
    mx.gt_b = TensorF(mx.pixels.shape());
    std::copy(m.data() + i * stride, m.data() + (i + 1) * stride, mx.pixels.data());
    std::copy(x.data() + i * stride, x.data() + (i + 1) * stride, mx.gt_x.data());
    std::copy(b.data() + i * stride, b.data() + (i + 1) * stride, mx.gt_b.data());
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adversarial unmix-and-remix source separation";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<DimensionError>(m, "DimensionError");
  py::register_exception<DivergenceError>(m, "DivergenceError");
  py::register_exception<FormatError>(m, "FormatError");

  m.def("set_num_threads", &set_num_threads, py::arg("n"));

  m.def(
      "psnr",
      [](py::array_t<float> est, py::array_t<float> ref) {
        return psnr(nhwc_to_nchw(est), nhwc_to_nchw(ref));
      },
      py::arg("est"), py::arg("ref"), "PSNR in dB on a [0,1] range, capped at 100");

  m.def(
      "ssim",
      [](py::array_t<float> est, py::array_t<float> ref) {
        TensorF a = nhwc_to_nchw(est), b = nhwc_to_nchw(ref);
        TensorF ia({a.dim(1), a.dim(2), a.dim(3)}), ib(ia.shape());
        std::copy(a.data(), a.data() + ia.numel(), ia.data());
        std::copy(b.data(), b.data() + ib.numel(), ib.data());
        return ssim(ia, ib);
      },
      py::arg("est"), py::arg("ref"), "Single-scale SSIM with an 11x11 Gaussian window");

  py::class_<TrainConfig> cfg(m, "TrainConfig");
  cfg.def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("mask_steps_per_disc_step", &TrainConfig::mask_steps_per_disc_step)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("cycle_weight", &TrainConfig::cycle_weight)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
      .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
      .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every);

  py::class_<StepReport>(m, "StepReport")
      .def_readonly("step", &StepReport::step)
      .def_readonly("l_c", &StepReport::l_c)
      .def_readonly("l_m", &StepReport::l_m)
      .def_readonly("l_e", &StepReport::l_e)
      .def_readonly("l_d", &StepReport::l_d)
      .def_readonly("mean_mask", &StepReport::mean_mask)
      .def("__repr__", [](const StepReport& r) { return "<" + metrics_line(r) + ">"; });

  py::class_<Trainer>(m, "Trainer")
      .def(py::init([](int64_t height, int64_t width, int64_t channels, const TrainConfig& cfg,
                       int64_t base_channels) {
             return Trainer(arch_for_input(height, width, channels, base_channels), cfg);
           }),
           py::arg("height"), py::arg("width"), py::arg("channels"),
           py::arg("config") = TrainConfig(), py::arg("base_channels") = 64)
      .def("train_step",
           [](Trainer& t, py::array_t<float> y1, py::array_t<float> y2) {
             return t.train_step(nhwc_to_nchw(y1), nhwc_to_nchw(y2));
           },
           py::arg("y1"), py::arg("y2"),
           "One alternation cycle (4 masker updates + 1 discriminator update by default)")
      .def("supervised_step",
           [](Trainer& t, py::array_t<float> y, py::array_t<float> tx, py::array_t<float> tb) {
             return t.supervised_step(nhwc_to_nchw(y), nhwc_to_nchw(tx), nhwc_to_nchw(tb));
           },
           py::arg("y"), py::arg("target_x"), py::arg("target_b"))
      .def("mask",
           [](const Trainer& t, py::array_t<float> y) {
             TensorF in = nhwc_to_nchw(y);
             const bool squeeze = y.request().ndim == 3;
             return nchw_to_nhwc(mask_forward(t.masker(), in), squeeze);
           },
           py::arg("y"), "Mask M(y), same shape as y, values in (0,1)")
      .def("separate",
           [](const Trainer& t, py::array_t<float> y) {
             TensorF in = nhwc_to_nchw(y);
             const bool squeeze = y.request().ndim == 3;
             auto s = separate(t.masker(), in);
             return py::make_tuple(nchw_to_nhwc(s.x_hat, squeeze),
                                   nchw_to_nhwc(s.b_hat, squeeze),
                                   nchw_to_nhwc(s.mask, squeeze));
           },
           py::arg("y"), "Returns (x_hat, b_hat, mask); x_hat + b_hat == y")
      .def("remix",
           [](const Trainer& t, py::array_t<float> y1, py::array_t<float> y2) {
             const bool squeeze = y1.request().ndim == 3;
             auto rz = remix(t.masker(), nhwc_to_nchw(y1), nhwc_to_nchw(y2));
             return py::make_tuple(nchw_to_nhwc(rz.z1, squeeze), nchw_to_nhwc(rz.z2, squeeze));
           },
           py::arg("y1"), py::arg("y2"), "Flipped remixes (z1, z2); z1+z2 == y1+y2")
      .def("cycle",
           [](const Trainer& t, py::array_t<float> z1, py::array_t<float> z2) {
             const bool squeeze = z1.request().ndim == 3;
             auto cy = cycle(t.masker(), nhwc_to_nchw(z1), nhwc_to_nchw(z2));
             return py::make_tuple(nchw_to_nhwc(cy.y1_bar, squeeze),
                                   nchw_to_nhwc(cy.y2_bar, squeeze));
           },
           py::arg("z1"), py::arg("z2"), "Second unmix-and-remix pass (y1_bar, y2_bar)")
      .def("evaluate",
           [](const Trainer& t, py::array_t<float> mix, py::array_t<float> gt_x,
              py::array_t<float> gt_b, float mixing_weight, bool with_ssim) {
             auto valset = mixtures_from_numpy(mix, gt_x, gt_b);
             return report_to_dict(evaluate(t.masker(), valset, mixing_weight, with_ssim));
           },
           py::arg("mix"), py::arg("gt_x"), py::arg("gt_b"), py::arg("mixing_weight") = 0.5f,
           py::arg("with_ssim") = true)
      .def("save", &Trainer::save, py::arg("path"))
      .def_static("load", &Trainer::load, py::arg("path"))
      .def_property_readonly("step", &Trainer::step)
      .def_property_readonly("epoch", &Trainer::epoch)
      .def_property_readonly("masker_updates", &Trainer::masker_updates)
      .def_property_readonly("disc_updates", &Trainer::disc_updates);

  m.def(
      "synth_toy",
      [](int64_t n_train, int64_t n_val, uint64_t seed, int64_t size,
         const std::string& generator) {
        DatasetManifest man;
        man.profile = Profile::Custom;
        man.generator = generator;
        man.height = man.width = size;
        man.channels = 1;
        man.n_train = n_train;
        man.n_val = n_val;
        man.seed = seed;
        auto ds = build_toy_dataset(man);
        auto split_to_dict = [](const std::vector<Mixture>& split) {
          py::dict d;
          if (split.empty()) return d;
          const auto& shape = split[0].pixels.shape();
          const int64_t n = static_cast<int64_t>(split.size());
          const int64_t stride = shape[0] * shape[1] * shape[2];
          TensorF mix({n, shape[0], shape[1], shape[2]}), gx(mix.shape()), gb(mix.shape());
          for (int64_t i = 0; i < n; ++i) {
            const auto& mx = split[static_cast<size_t>(i)];
            std::copy(mx.pixels.data(), mx.pixels.data() + stride, mix.data() + i * stride);
            std::copy(mx.gt_x.data(), mx.gt_x.data() + stride, gx.data() + i * stride);
            std::copy(mx.gt_b.data(), mx.gt_b.data() + stride, gb.data() + i * stride);
          }
          d["mix"] = nchw_to_nhwc(mix, false);
          d["gt_x"] = nchw_to_nhwc(gx, false);
          d["gt_b"] = nchw_to_nhwc(gb, false);
          return d;
        };
        py::dict out;
        out["train"] = split_to_dict(ds.train);
        out["val"] = split_to_dict(ds.val);
        return out;
      },
      py::arg("n_train"), py::arg("n_val"), py::arg("seed") = 0, py::arg("size") = 8,
      py::arg("generator") = "bars8",
      "Deterministic synthetic bar-mixture dataset as numpy arrays");

  m.def(
      "load_dataset",
      [](const std::string& dir) {
        auto ds = load_dataset(dir);
        auto split_to_dict = [](const std::vector<Mixture>& split) {
          py::dict d;
          if (split.empty()) return d;
          const auto& shape = split[0].pixels.shape();
          const int64_t n = static_cast<int64_t>(split.size());
          const int64_t stride = shape[0] * shape[1] * shape[2];
          const bool gt = split[0].has_ground_truth();
          TensorF mix({n, shape[0], shape[1], shape[2]});
          TensorF gx(gt ? mix.shape() : std::vector<int64_t>{0});
          TensorF gb(gx.shape());
          for (int64_t i = 0; i < n; ++i) {
            const auto& mx = split[static_cast<size_t>(i)];
            std::copy(mx.pixels.data(), mx.pixels.data() + stride, mix.data() + i * stride);
            if (gt) {
              std::copy(mx.gt_x.data(), mx.gt_x.data() + stride, gx.data() + i * stride);
              std::copy(mx.gt_b.data(), mx.gt_b.data() + stride, gb.data() + i * stride);
            }
          }
          d["mix"] = nchw_to_nhwc(mix, false);
          if (gt) {
            d["gt_x"] = nchw_to_nhwc(gx, false);
            d["gt_b"] = nchw_to_nhwc(gb, false);
          }
          return d;
        };
        py::dict out;
        out["train"] = split_to_dict(ds.train);
        out["val"] = split_to_dict(ds.val);
        out["mixing_weight"] = ds.manifest.mixing_weight;
        out["seed"] = ds.manifest.seed;
        return out;
      },
      py::arg("dir"), "Load an RMXT dataset directory written by `unmix synth`");

  m.def("dataset_hash", &dataset_hash, py::arg("dir"));
}
