#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "unmix/remix.hpp"
#include "unmix/separator.hpp"

using namespace unmix;

namespace {

ArchDescriptor tiny_arch(int64_t size, int64_t channels = 1, int64_t base = 4) {
  ArchDescriptor a;
  a.in_h = size;
  a.in_w = size;
  a.in_c = channels;
  a.base_channels = base;
  a.levels = 1;
  return a;
}

TensorF random_batch(int64_t n, int64_t c, int64_t h, int64_t w, Rng& rng) {
  TensorF t({n, c, h, w});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform());
  return t;
}

}  // namespace

TEST_CASE("mask values lie strictly inside (0,1) and are deterministic") {
  Rng rng(5);
  MaskNet<float> net(tiny_arch(8), rng);
  auto y = random_batch(3, 1, 8, 8, rng);
  auto m1 = mask_forward(net, y);
  auto m2 = mask_forward(net, y);
  REQUIRE(m1.shape() == y.shape());
  for (int64_t i = 0; i < m1.numel(); ++i) {
    CHECK(m1[i] > 0.0f);
    CHECK(m1[i] < 1.0f);
    CHECK(m1[i] == m2[i]);  // no stochastic layers
  }
}

TEST_CASE("additivity identity: x_hat + b_hat == y within 1e-6") {
  Rng rng(6);
  MaskNet<float> net(tiny_arch(8), rng);
  for (int trial = 0; trial < 20; ++trial) {
    auto y = random_batch(2, 1, 8, 8, rng);
    auto s = separate(net, y);
    for (int64_t i = 0; i < y.numel(); ++i)
      CHECK(std::abs(s.x_hat[i] + s.b_hat[i] - y[i]) <= 1e-6f);
  }
}

TEST_CASE("separate: zero input gives zero components regardless of mask") {
  Rng rng(7);
  MaskNet<float> net(tiny_arch(8), rng);
  TensorF y({1, 1, 8, 8});
  auto s = separate(net, y);
  for (int64_t i = 0; i < y.numel(); ++i) {
    CHECK(s.x_hat[i] == 0.0f);
    CHECK(s.b_hat[i] == 0.0f);
  }
}

TEST_CASE("separate arithmetic: y=0.8 with mask 0.25 gives 0.2 / 0.6") {
  // Pointwise contract of the masking parametrization, checked directly.
  const float y = 0.8f, m = 0.25f;
  CHECK(y * m == doctest::Approx(0.2f));
  CHECK(y - y * m == doctest::Approx(0.6f));
  // And the degenerate mask == 1 keeps everything in x_hat.
  CHECK(y * 1.0f == doctest::Approx(y));
  CHECK(y - y * 1.0f == doctest::Approx(0.0f));
}

TEST_CASE("separate rejects shape mismatch") {
  Rng rng(8);
  MaskNet<float> net(tiny_arch(8), rng);
  auto y = random_batch(1, 1, 16, 16, rng);
  CHECK_THROWS_AS(separate(net, y), DimensionError);
}

TEST_CASE("mask head gradient matches central differences on a 4x4 net") {
  Rng rng(9);
  MaskNet<double> net(tiny_arch(4, 1, 3), rng);
  Tensor<double> y({1, 1, 4, 4});
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = rng.uniform();
  auto yv = constant(Tensor<double>(y));
  auto loss = [&] { return mean_all(net.forward(yv)); };
  auto r = gradcheck::check(loss, net.parameters());
  CHECK(r.frac_within >= 0.99);
  CHECK(r.max_rel_err < 1e-3);
}

TEST_CASE("remix of an identical pair is the identity, bitwise") {
  Rng rng(10);
  MaskNet<float> net(tiny_arch(8), rng);
  auto y = random_batch(2, 1, 8, 8, rng);
  auto rz = remix(net, y, y);
  for (int64_t i = 0; i < y.numel(); ++i) {
    CHECK(rz.z1[i] == y[i]);
    CHECK(rz.z2[i] == y[i]);
  }
}

TEST_CASE("pair-sum conservation through remix and cycle") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    MaskNet<float> net(tiny_arch(8), rng);
    auto y1 = random_batch(2, 1, 8, 8, rng);
    auto y2 = random_batch(2, 1, 8, 8, rng);
    auto rz = remix(net, y1, y2);
    auto cy = cycle(net, rz.z1, rz.z2);
    for (int64_t i = 0; i < y1.numel(); ++i) {
      const float sum = y1[i] + y2[i];
      CHECK(std::abs(rz.z1[i] + rz.z2[i] - sum) <= 1e-6f);
      CHECK(std::abs(cy.y1_bar[i] + cy.y2_bar[i] - sum) <= 1e-6f);
    }
  }
}

TEST_CASE("symmetric-input fixpoint: y1 == y2 implies y_bar == y, bitwise") {
  Rng rng(12);
  MaskNet<float> net(tiny_arch(8), rng);
  auto y = random_batch(2, 1, 8, 8, rng);
  auto rz = remix(net, y, y);
  auto cy = cycle(net, rz.z1, rz.z2);
  for (int64_t i = 0; i < y.numel(); ++i) {
    CHECK(cy.y1_bar[i] == y[i]);
    CHECK(cy.y2_bar[i] == y[i]);
  }
}

TEST_CASE("cycle with a constant mask matches scalar hand evaluation on 2x2") {
  // Brute-force oracle: with M(.) == m everywhere, the pipeline reduces to
  // scalar arithmetic per pixel:
  //   z1 = m*y1 + (1-m)*y2          z2 = m*y2 + (1-m)*y1
  //   y1_bar = m*z1 + (1-m)*z2      y2_bar = m*z2 + (1-m)*z1
  // Checked against a graph evaluation with the mask pinned to m.
  const double m = 0.3;
  const double y1v[4] = {0.1, 0.9, 0.4, 0.7};
  const double y2v[4] = {0.8, 0.2, 0.5, 0.05};

  Tensor<double> y1({1, 1, 2, 2}), y2({1, 1, 2, 2});
  for (int i = 0; i < 4; ++i) {
    y1[i] = y1v[i];
    y2[i] = y2v[i];
  }
  auto mask = constant(Tensor<double>::full({1, 1, 2, 2}, m));
  auto vy1 = constant(Tensor<double>(y1)), vy2 = constant(Tensor<double>(y2));

  auto pin = [&](const Var<double>& y) {
    Separation<double> s;
    s.y = y;
    s.mask = mask;
    s.x_hat = mul(y, mask);
    s.b_hat = sub(y, s.x_hat);
    return s;
  };
  auto rz = remix(pin(vy1), pin(vy2));
  auto t1 = pin(rz.z1), t2 = pin(rz.z2);
  Cycled<double> cy;
  cy.y1_bar = add(t1.x_hat, t2.b_hat);
  cy.y2_bar = add(t2.x_hat, t1.b_hat);

  for (int i = 0; i < 4; ++i) {
    const double z1 = m * y1v[i] + (1 - m) * y2v[i];
    const double z2 = m * y2v[i] + (1 - m) * y1v[i];
    const double y1_bar = m * z1 + (1 - m) * z2;
    const double y2_bar = m * z2 + (1 - m) * z1;
    CHECK(rz.z1->value[i] == doctest::Approx(m * y1v[i] + (1 - m) * y2v[i]).epsilon(1e-12));
    CHECK(rz.z2->value[i] == doctest::Approx(z2).epsilon(1e-12));
    CHECK(cy.y1_bar->value[i] == doctest::Approx(y1_bar).epsilon(1e-12));
    CHECK(cy.y2_bar->value[i] == doctest::Approx(y2_bar).epsilon(1e-12));
  }
}

TEST_CASE("remix and cycle are pure: parameters and inputs unchanged") {
  Rng rng(14);
  MaskNet<float> net(tiny_arch(8), rng);
  auto params_before = net.parameters();
  std::vector<TensorF> snapshot;
  for (auto& p : params_before) snapshot.push_back(p->value);

  auto y1 = random_batch(2, 1, 8, 8, rng);
  auto y2 = random_batch(2, 1, 8, 8, rng);
  const TensorF y1_copy = y1, y2_copy = y2;
  auto rz = remix(net, y1, y2);
  auto cy = cycle(net, rz.z1, rz.z2);

  auto params_after = net.parameters();
  for (size_t i = 0; i < params_after.size(); ++i)
    for (int64_t j = 0; j < snapshot[i].numel(); ++j)
      CHECK(params_after[i]->value[j] == snapshot[i][j]);
  for (int64_t i = 0; i < y1.numel(); ++i) {
    CHECK(y1[i] == y1_copy[i]);
    CHECK(y2[i] == y2_copy[i]);
  }
}
