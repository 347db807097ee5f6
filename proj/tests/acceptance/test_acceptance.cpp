// Acceptance suite: one test case per criterion, each printing a single
// PASS/FAIL line. Criteria 3-5 run real training; the desk-scale MNIST case
// is the long one (tens of minutes to a few hours on CPU).

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "unmix/data.hpp"
#include "unmix/gemm.hpp"
#include "unmix/losses.hpp"
#include "unmix/metrics.hpp"
#include "unmix/toy.hpp"
#include "unmix/trainer.hpp"

using namespace unmix;
namespace fs = std::filesystem;

namespace {

struct Checker {
  bool ok = true;
  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      std::fprintf(stderr, "    failed: %s\n", what.c_str());
    }
  }
};

void verdict(int criterion, const char* name, bool ok) {
  std::printf("[criterion %d] %s: %s\n", criterion, ok ? "PASS" : "FAIL", name);
  std::fflush(stdout);
}

ArchDescriptor toy_arch() {
  ArchDescriptor a;
  a.in_h = a.in_w = 8;
  a.in_c = 1;
  a.base_channels = 64;
  a.levels = 1;
  return a;
}

Dataset toy_bars_dataset(int64_t n_train, int64_t n_val, uint64_t seed) {
  DatasetManifest m;
  m.profile = Profile::Custom;
  m.generator = "bars8";
  m.height = m.width = 8;
  m.channels = 1;
  m.n_train = n_train;
  m.n_val = n_val;
  m.seed = seed;
  return build_toy_dataset(m);
}

double train_toy(Trainer& t, const Dataset& ds, int64_t steps) {
  int64_t done = 0;
  while (done < steps) {
    auto batches =
        batch_pairs(static_cast<int64_t>(ds.train.size()), t.config().batch_size, t.rng());
    for (const auto& batch : batches) {
      if (done >= steps) break;
      auto [y1, y2] = pack_pairs(ds.train, batch);
      t.train_step(y1, y2);
      ++done;
    }
  }
  return evaluate(t.masker(), ds.val, ds.manifest.mixing_weight, false).psnr_mean;
}

float mean_mask_on(const Trainer& t, const Dataset& ds) {
  TensorF batch = pack_mixtures(ds.val, [&] {
    std::vector<int32_t> idx;
    for (int32_t i = 0; i < static_cast<int32_t>(ds.val.size()); ++i) idx.push_back(i);
    return idx;
  }());
  auto mask = mask_forward(t.masker(), batch);
  double acc = 0;
  for (int64_t i = 0; i < mask.numel(); ++i) acc += mask[i];
  return static_cast<float>(acc / double(mask.numel()));
}

}  // namespace

TEST_CASE("criterion 1: algebraic invariant suite") {
  Checker c;
  Rng rng(101);
  ArchDescriptor arch = toy_arch();
  arch.base_channels = 8;  // plenty for invariants, keeps 100 instances quick

  for (int trial = 0; trial < 100; ++trial) {
    MaskNet<float> net(arch, rng);
    TensorF y1({1, 1, 8, 8}), y2({1, 1, 8, 8});
    for (int64_t i = 0; i < y1.numel(); ++i) {
      y1[i] = static_cast<float>(rng.uniform());
      y2[i] = static_cast<float>(rng.uniform());
    }

    // additivity identity
    auto s = separate(net, y1);
    for (int64_t i = 0; i < y1.numel(); ++i)
      c.expect(std::abs(s.x_hat[i] + s.b_hat[i] - y1[i]) <= 1e-6f, "additivity identity");

    // pair-sum conservation through both stages
    auto rz = remix(net, y1, y2);
    auto cy = cycle(net, rz.z1, rz.z2);
    for (int64_t i = 0; i < y1.numel(); ++i) {
      const float sum = y1[i] + y2[i];
      c.expect(std::abs(rz.z1[i] + rz.z2[i] - sum) <= 1e-6f, "z conservation");
      c.expect(std::abs(cy.y1_bar[i] + cy.y2_bar[i] - sum) <= 1e-6f, "y_bar conservation");
    }

    // symmetric-input fixpoint
    auto rz_same = remix(net, y1, y1);
    auto cy_same = cycle(net, rz_same.z1, rz_same.z2);
    for (int64_t i = 0; i < y1.numel(); ++i) {
      c.expect(std::abs(cy_same.y1_bar[i] - y1[i]) <= 1e-6f, "fixpoint y1_bar");
      c.expect(std::abs(cy_same.y2_bar[i] - y1[i]) <= 1e-6f, "fixpoint y2_bar");
    }

    // energy-loss symmetry under m <-> 1-m
    TensorF mask(y1.shape()), maskc(y1.shape());
    for (int64_t i = 0; i < mask.numel(); ++i) {
      mask[i] = static_cast<float>(0.02 + 0.96 * rng.uniform());
      maskc[i] = 1.0f - mask[i];
    }
    const float e1 = energy_equity_loss(y1, mask);
    const float e2 = energy_equity_loss(y1, maskc);
    c.expect(std::abs(e1 - e2) <= 1e-6f, "energy symmetry");
  }

  // per-pixel energy minimizer at m = 0.5
  {
    TensorF y({1, 1, 1, 1});
    y[0] = 0.7f;
    double best_m = -1, best = 1e99;
    for (int i = 1; i < 1000; ++i) {
      TensorF m({1, 1, 1, 1});
      m[0] = static_cast<float>(i / 1000.0);
      const double e = energy_equity_loss(y, m);
      if (e < best) {
        best = e;
        best_m = i / 1000.0;
      }
    }
    c.expect(std::abs(best_m - 0.5) < 1e-9, "energy minimizer at 0.5");
  }

  verdict(1, "algebraic invariants on 100 random instances", c.ok);
  CHECK(c.ok);
}

TEST_CASE("criterion 2: gradient oracle on 4x4 toy networks") {
  Checker c;
  Rng rng(202);
  ArchDescriptor arch;
  arch.in_h = arch.in_w = 4;
  arch.in_c = 1;
  arch.base_channels = 3;
  arch.levels = 1;

  MaskNet<double> masker(arch, rng);
  DiscNet<double> disc(arch, rng);
  Tensor<double> y1({2, 1, 4, 4}), y2({2, 1, 4, 4});
  for (int64_t i = 0; i < y1.numel(); ++i) {
    y1[i] = rng.uniform();
    y2[i] = rng.uniform();
  }
  auto v1 = constant(Tensor<double>(y1)), v2 = constant(Tensor<double>(y2));

  const double h = 1e-4, tol = 1e-3;

  // L_D wrt discriminator parameters (fakes detached)
  {
    masker.set_requires_grad(false);
    auto rz = remix(masker, v1, v2);
    auto z1 = detach(rz.z1), z2 = detach(rz.z2);
    masker.set_requires_grad(true);
    auto r = gradcheck::check([&] { return disc_loss(disc, {v1, v2}, {z1, z2}); },
                              disc.parameters(), h, tol);
    c.expect(r.frac_within >= 0.99, "L_D gradients (max rel err " +
                                        std::to_string(r.max_rel_err) + ")");
  }
  // L_M wrt masker parameters (D frozen)
  {
    disc.set_requires_grad(false);
    auto r = gradcheck::check(
        [&] {
          auto rz = remix(masker, v1, v2);
          return confusion_loss(disc, {rz.z1, rz.z2});
        },
        masker.parameters(), h, tol);
    disc.set_requires_grad(true);
    c.expect(r.frac_within >= 0.99, "L_M gradients (max rel err " +
                                        std::to_string(r.max_rel_err) + ")");
  }
  // L_E wrt masker parameters
  {
    auto r = gradcheck::check(
        [&] {
          auto s1 = separate(masker, v1);
          auto s2 = separate(masker, v2);
          return mul_scalar(
              add(energy_equity_loss(v1, s1.mask), energy_equity_loss(v2, s2.mask)), 0.5);
        },
        masker.parameters(), h, tol);
    c.expect(r.frac_within >= 0.99, "L_E gradients (max rel err " +
                                        std::to_string(r.max_rel_err) + ")");
  }
  // L_C wrt masker parameters
  {
    auto r = gradcheck::check(
        [&] {
          auto rz = remix(masker, v1, v2);
          auto cyc = cycle(masker, rz);
          return cycle_loss(v1, v2, cyc);
        },
        masker.parameters(), h, tol);
    c.expect(r.frac_within >= 0.99, "L_C gradients (max rel err " +
                                        std::to_string(r.max_rel_err) + ")");
  }
  // L_Total wrt masker parameters
  {
    disc.set_requires_grad(false);
    auto r = gradcheck::check(
        [&] {
          auto s1 = separate(masker, v1);
          auto s2 = separate(masker, v2);
          auto rz = remix(s1, s2);
          auto cyc = cycle(masker, rz);
          auto l_m = confusion_loss(disc, {rz.z1, rz.z2});
          auto l_e = mul_scalar(
              add(energy_equity_loss(v1, s1.mask), energy_equity_loss(v2, s2.mask)), 0.5);
          auto l_c = cycle_loss(v1, v2, cyc);
          return add(l_c, add(mul_scalar(l_m, 5.0), mul_scalar(l_e, 5.0)));
        },
        masker.parameters(), h, tol);
    disc.set_requires_grad(true);
    c.expect(r.frac_within >= 0.99, "L_Total gradients (max rel err " +
                                        std::to_string(r.max_rel_err) + ")");
  }

  verdict(2, "analytic vs central-difference gradients (step 1e-4, tol 1e-3)", c.ok);
  CHECK(c.ok);
}

TEST_CASE("criterion 3: toy-problem separation (bars, 500 mixtures, 2000 steps)") {
  Checker c;
  auto ds = toy_bars_dataset(500, 100, 303);

  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.seed = 303;
  Trainer t(toy_arch(), cfg);

  const double psnr = train_toy(t, ds, 2000);
  const float mm = mean_mask_on(t, ds);
  std::printf("    toy separation: permutation-resolved PSNR %.2f dB, mean mask %.3f\n", psnr,
              mm);

  // First verified run of this fixture reached 20.60 dB; pinned with
  // -1 dB slack per the derivation protocol (and never below the 15 dB
  // headline).
  const double pinned = 19.6;
  c.expect(psnr >= 15.0, "PSNR >= 15 dB");
  c.expect(psnr >= pinned, "PSNR >= pinned fixture (19.6 dB)");
  c.expect(mm >= 0.1f && mm <= 0.9f, "mean mask within [0.1, 0.9]");

  verdict(3, "unsupervised toy separation reaches the pinned PSNR with a balanced mask", c.ok);
  CHECK(c.ok);
}

TEST_CASE("criterion 4: ablations reproduce the reported loss roles") {
  Checker c;
  auto ds = toy_bars_dataset(500, 100, 404);

  // full objective reference
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.seed = 404;
  Trainer full(toy_arch(), cfg);
  const double full_psnr = train_toy(full, ds, 2000);

  // beta = 0: energy-equity off -> degenerate mask or failed separation
  TrainConfig no_e = cfg;
  no_e.beta = 0.0f;
  Trainer ablated_e(toy_arch(), no_e);
  const double psnr_no_e = train_toy(ablated_e, ds, 2000);
  const float mm_no_e = mean_mask_on(ablated_e, ds);
  std::printf("    beta=0: PSNR %.2f dB, mean mask %.3f (full run: %.2f dB)\n", psnr_no_e,
              mm_no_e, full_psnr);
  c.expect(mm_no_e < 0.1f || mm_no_e > 0.9f || psnr_no_e < 8.0,
           "removing L_E must collapse the mask or the separation");

  // cycle off: accuracy must not drop by more than 3 dB
  TrainConfig no_c = cfg;
  no_c.cycle_weight = 0.0f;
  Trainer ablated_c(toy_arch(), no_c);
  const double psnr_no_c = train_toy(ablated_c, ds, 2000);
  std::printf("    cycle off: PSNR %.2f dB (full run: %.2f dB)\n", psnr_no_c, full_psnr);
  c.expect(psnr_no_c >= full_psnr - 3.0, "removing L_C costs at most 3 dB");

  verdict(4, "loss ablations (beta=0 fatal, cycle removal benign)", c.ok);
  CHECK(c.ok);
}

TEST_CASE("criterion 5: desk-scale MNIST separation") {
  Checker c;

  const char* env_dir = std::getenv("UNMIX_MNIST_DIR");
  fs::path mnist_dir = env_dir ? fs::path(env_dir) : fs::path(UNMIX_SOURCE_DIR) / "data/mnist";
  if (!fs::exists(mnist_dir / "train-images-idx3-ubyte")) {
    // try the bundled fetch script (npm mirror) before giving up
    const std::string cmd = "python3 " + std::string(UNMIX_SOURCE_DIR) +
                            "/scripts/fetch_mnist.py --out " + mnist_dir.string();
    std::printf("    MNIST IDX files missing; running: %s\n", cmd.c_str());
    std::system(cmd.c_str());
  }
  REQUIRE_MESSAGE(fs::exists(mnist_dir / "train-images-idx3-ubyte"),
                  "MNIST IDX files not found; run scripts/fetch_mnist.py --out data/mnist");

  DatasetManifest m;
  m.profile = Profile::MnistDigits;
  m.height = m.width = 32;
  m.channels = 1;
  m.n_train = 5000;
  m.n_val = 1000;
  m.seed = 505;
  m.source_x = mnist_dir.string();
  Dataset ds = build_mnist_dataset(m);

  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.seed = 505;
  ArchDescriptor arch = arch_for_input(32, 32, 1);
  Trainer unsup(arch, cfg);

  const auto trivial = evaluate_trivial_mask(ds.val, m.mixing_weight, false);
  const auto untrained = evaluate(unsup.masker(), ds.val, m.mixing_weight, false);
  std::printf("    baselines: trivial mask %.2f dB, untrained %.2f dB\n", trivial.psnr_mean,
              untrained.psnr_mean);

  // Train with a periodic eval; stop once the bar is comfortably cleared.
  const int64_t max_epochs = 40;
  double unsup_psnr = 0;
  while (unsup.epoch() < max_epochs) {
    fit_unsupervised(unsup, ds.train, unsup.epoch() + 2);
    unsup_psnr = evaluate(unsup.masker(), ds.val, m.mixing_weight, false).psnr_mean;
    std::printf("    epoch %lld: unsupervised PSNR %.2f dB (masker updates %lld)\n",
                static_cast<long long>(unsup.epoch()), unsup_psnr,
                static_cast<long long>(unsup.masker_updates()));
    std::fflush(stdout);
    if (unsup_psnr >= 16.0) break;
  }
  c.expect(unsup_psnr >= 15.0, "unsupervised PSNR >= 15 dB");
  c.expect(unsup_psnr > untrained.psnr_mean, "beats the untrained model");
  c.expect(unsup_psnr > trivial.psnr_mean, "beats the trivial mask");

  // Supervised upper bound on the same masker-update budget.
  TrainConfig sup_cfg = cfg;
  sup_cfg.mode = TrainConfig::Mode::Supervised;
  sup_cfg.batch_size = 64;
  Trainer sup(arch, sup_cfg);
  while (sup.masker_updates() < unsup.masker_updates())
    fit_supervised(sup, ds.train, m.mixing_weight, sup.epoch() + 1);
  const double sup_psnr = evaluate(sup.masker(), ds.val, m.mixing_weight, false).psnr_mean;
  std::printf("    supervised PSNR %.2f dB on %lld masker updates\n", sup_psnr,
              static_cast<long long>(sup.masker_updates()));
  c.expect(sup_psnr > unsup_psnr, "supervised strictly exceeds unsupervised");

  verdict(5, "desk-scale MNIST (5k/1k): unsupervised >= 15 dB, supervised above it", c.ok);
  CHECK(c.ok);
}

TEST_CASE("criterion 6: determinism contracts") {
  Checker c;
  auto tmp = fs::temp_directory_path() / "unmix_acceptance_det";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  // cmd_synth determinism through the CLI binary
  {
    const std::string base = std::string(UNMIX_CLI_PATH);
    const auto d1 = (tmp / "ds1").string(), d2 = (tmp / "ds2").string();
    const std::string args = " synth --profile toy --n-train 32 --n-val 8 --seed 77 --out ";
    c.expect(std::system((base + args + d1 + " > /dev/null").c_str()) == 0, "synth run 1");
    c.expect(std::system((base + args + d2 + " > /dev/null").c_str()) == 0, "synth run 2");
    c.expect(dataset_hash(d1) == dataset_hash(d2), "cmd_synth hash-identical across runs");
  }

  // checkpoint round trip byte-identical
  {
    auto ds = toy_bars_dataset(16, 4, 606);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.seed = 606;
    Trainer t(toy_arch(), cfg);
    fit_unsupervised(t, ds.train, 1);
    const auto p1 = (tmp / "a.umx").string(), p2 = (tmp / "b.umx").string();
    t.save(p1);
    Trainer::load(p1).save(p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    c.expect(!s1.empty() && s1 == s2, "save -> load -> save byte-identical");
  }

  // resumed training matches uninterrupted training
  {
    auto ds = toy_bars_dataset(32, 8, 707);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.seed = 707;
    Trainer full(toy_arch(), cfg);
    std::vector<float> full_losses;
    fit_unsupervised(full, ds.train, 4,
                     {.on_step = [&](const StepReport& r) { full_losses.push_back(r.l_c); }});

    Trainer part(toy_arch(), cfg);
    std::vector<float> part_losses;
    fit_unsupervised(part, ds.train, 2,
                     {.on_step = [&](const StepReport& r) { part_losses.push_back(r.l_c); }});
    const auto mid = (tmp / "mid.umx").string();
    part.save(mid);
    Trainer resumed = Trainer::load(mid);
    fit_unsupervised(resumed, ds.train, 4,
                     {.on_step = [&](const StepReport& r) { part_losses.push_back(r.l_c); }});
    bool equal = full_losses.size() == part_losses.size();
    if (equal)
      for (size_t i = 0; i < full_losses.size(); ++i) equal &= full_losses[i] == part_losses[i];
    c.expect(equal, "resumed trajectory identical to uninterrupted");
  }

  verdict(6, "synth hash, checkpoint round trip, resume reproducibility", c.ok);
  CHECK(c.ok);
}

TEST_CASE("criterion 7: metric correctness closed forms") {
  Checker c;

  TensorF a = TensorF::full({1, 16, 16}, 0.4f);
  TensorF b(a.shape());
  for (int64_t i = 0; i < b.numel(); ++i) b[i] = a[i] + 0.1f;
  c.expect(std::abs(psnr(a, b) - 20.0) < 1e-5, "PSNR 20 dB at MSE 0.01");
  c.expect(psnr(a, a) == 100.0, "PSNR cap on zero error");
  c.expect(ssim(a, a) == 1.0, "SSIM 1.0 on identity");

  const double mx = double(TensorF::full({1}, 0.2f)[0]);
  const double my = double(TensorF::full({1}, 0.8f)[0]);
  TensorF ca = TensorF::full({1, 16, 16}, 0.2f), cb = TensorF::full({1, 16, 16}, 0.8f);
  const double c1 = 1e-4, c2 = 9e-4;
  const double closed = ((2 * mx * my + c1) * c2) / ((mx * mx + my * my + c1) * c2);
  c.expect(std::abs(ssim(ca, cb) - closed) < 1e-10, "constant-image SSIM closed form to 1e-10");

  verdict(7, "psnr/ssim closed-form examples", c.ok);
  CHECK(c.ok);
}
