#include "unmix/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "unmix/checkpoint.hpp"
#include "unmix/config.hpp"

namespace unmix {

void TrainConfig::validate() const {
  if (learning_rate < 0) throw ConfigError("learning_rate must be >= 0");
  if (mask_steps_per_disc_step < 1) throw ConfigError("mask_steps_per_disc_step must be >= 1");
  if (alpha < 0 || beta < 0) throw ConfigError("alpha and beta must be non-negative");
  if (cycle_weight < 0) throw ConfigError("cycle_weight must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
}

std::string mode_name(TrainConfig::Mode m) {
  return m == TrainConfig::Mode::Unsupervised ? "unsupervised" : "supervised";
}

TrainConfig::Mode mode_from_name(const std::string& s) {
  if (s == "unsupervised") return TrainConfig::Mode::Unsupervised;
  if (s == "supervised") return TrainConfig::Mode::Supervised;
  throw ConfigError("unknown mode '" + s + "' (expected unsupervised|supervised)");
}

void apply_config(const KeyValueMap& kv, TrainConfig& cfg) {
  static const std::vector<std::string> known = {
      "learning_rate", "mask_steps_per_disc_step",
      "alpha",         "beta",
      "cycle_weight",  "batch_size",
      "epochs",        "seed",
      "adam_beta1",    "adam_beta2",
      "mode",          "checkpoint_every"};
  for (const auto& [k, v] : kv)
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError("unknown config key '" + k + "'");
  cfg.learning_rate = static_cast<float>(kv_double(kv, "learning_rate", cfg.learning_rate));
  cfg.mask_steps_per_disc_step =
      kv_int(kv, "mask_steps_per_disc_step", cfg.mask_steps_per_disc_step);
  cfg.alpha = static_cast<float>(kv_double(kv, "alpha", cfg.alpha));
  cfg.beta = static_cast<float>(kv_double(kv, "beta", cfg.beta));
  cfg.cycle_weight = static_cast<float>(kv_double(kv, "cycle_weight", cfg.cycle_weight));
  cfg.batch_size = kv_int(kv, "batch_size", cfg.batch_size);
  cfg.epochs = kv_int(kv, "epochs", cfg.epochs);
  cfg.seed = kv_uint(kv, "seed", cfg.seed);
  cfg.adam_beta1 = static_cast<float>(kv_double(kv, "adam_beta1", cfg.adam_beta1));
  cfg.adam_beta2 = static_cast<float>(kv_double(kv, "adam_beta2", cfg.adam_beta2));
  cfg.mode = mode_from_name(kv_str(kv, "mode", mode_name(cfg.mode)));
  cfg.checkpoint_every = kv_int(kv, "checkpoint_every", cfg.checkpoint_every);
}

std::string metrics_line(const StepReport& r) {
  std::ostringstream os;
  os << "step=" << r.step << " l_c=" << format_float(r.l_c) << " l_m=" << format_float(r.l_m)
     << " l_e=" << format_float(r.l_e) << " l_d=" << format_float(r.l_d)
     << " mean_mask=" << format_float(r.mean_mask);
  return os.str();
}

namespace {

// Temporarily freezes a parameter set; restores on scope exit even if a
// divergence error unwinds the step.
struct FreezeParams {
  std::vector<Var<float>> params;
  explicit FreezeParams(std::vector<Var<float>> ps) : params(std::move(ps)) {
    for (auto& p : params) p->requires_grad = false;
  }
  ~FreezeParams() {
    for (auto& p : params) p->requires_grad = true;
  }
};

float tensor_mean(const TensorF& t) {
  double acc = 0.0;
  for (int64_t i = 0; i < t.numel(); ++i) acc += t[i];
  return static_cast<float>(acc / double(t.numel()));
}

void check_finite(const char* what, float v, int64_t step) {
  if (!std::isfinite(v))
    throw DivergenceError(std::string(what) + " is not finite at step " + std::to_string(step));
}

}  // namespace

ArchDescriptor disc_arch_for(const ArchDescriptor& mask_arch) {
  ArchDescriptor d = mask_arch;
  while (d.bottleneck_h() > 4 && d.bottleneck_h() % 2 == 0) ++d.levels;
  if (std::min(d.in_h, d.in_w) <= 16 && d.bottleneck_h() > 1 && d.bottleneck_h() % 2 == 0)
    ++d.levels;
  d.validate();
  return d;
}

Trainer::Trainer(const ArchDescriptor& arch, const TrainConfig& cfg)
    : Trainer(arch, disc_arch_for(arch), cfg) {}

Trainer::Trainer(const ArchDescriptor& arch, const ArchDescriptor& disc_arch,
                 const TrainConfig& cfg)
    : arch_(arch), disc_arch_(disc_arch), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  arch_.validate();
  disc_arch_.validate();
  if (disc_arch_.in_h != arch_.in_h || disc_arch_.in_w != arch_.in_w ||
      disc_arch_.in_c != arch_.in_c)
    throw ConfigError("discriminator input geometry must match the masker");
  masker_ = MaskNet<float>(arch_, rng_);
  disc_ = DiscNet<float>(disc_arch_, rng_);
  opt_m_ = Adam<float>(masker_.parameters(), cfg_.learning_rate, cfg_.adam_beta1, cfg_.adam_beta2);
  opt_d_ = Adam<float>(disc_.parameters(), cfg_.learning_rate, cfg_.adam_beta1, cfg_.adam_beta2);
}

StepReport Trainer::train_step(const TensorF& y1t, const TensorF& y2t) {
  if (y1t.numel() == 0 || y2t.numel() == 0) throw ConfigError("train_step: empty batch");
  check_same_shape(y1t, y2t, "train_step");

  auto y1 = constant(TensorF(y1t));
  auto y2 = constant(TensorF(y2t));
  StepReport rep;

  // The paper's sums normalize per image: confusion terms are one scalar per
  // image while energy/cycle accumulate over pixels. Keeping that balance
  // (rather than per-pixel means) is what lets the energy term actually veto
  // the all-pass mask, so the pixel losses enter the objective scaled by the
  // per-image pixel count.
  const float per_image =
      static_cast<float>(y1t.dim(1) * y1t.dim(2) * y1t.dim(3));

  {
    FreezeParams freeze_d(disc_.parameters());
    for (int64_t k = 0; k < cfg_.mask_steps_per_disc_step; ++k) {
      auto s1 = separate(masker_, y1);
      auto s2 = separate(masker_, y2);
      auto rz = remix(s1, s2);
      auto cyc = cycle(masker_, rz);

      auto l_m = confusion_loss(disc_, {rz.z1, rz.z2});
      auto l_e = mul_scalar(
          add(energy_equity_loss(y1, s1.mask), energy_equity_loss(y2, s2.mask)), 0.5f);
      auto l_c = cycle_loss(y1, y2, cyc);
      auto total = add(mul_scalar(l_c, cfg_.cycle_weight * per_image),
                       add(mul_scalar(l_m, cfg_.alpha),
                           mul_scalar(l_e, cfg_.beta * per_image)));

      rep.l_c = l_c->value[0];
      rep.l_m = l_m->value[0];
      rep.l_e = l_e->value[0];
      check_finite("l_c", rep.l_c, step_);
      check_finite("l_m", rep.l_m, step_);
      check_finite("l_e", rep.l_e, step_);
      check_finite("total masker loss", total->value[0], step_);

      opt_m_.zero_grad();
      backward(total);
      opt_m_.step();
      ++masker_updates_;

      if (k == cfg_.mask_steps_per_disc_step - 1)
        rep.mean_mask = 0.5f * (tensor_mean(s1.mask->value) + tensor_mean(s2.mask->value));
    }
  }

  // Discriminator update on fresh remixes from the just-updated masker,
  // detached so no gradient reaches the separator.
  {
    FreezeParams freeze_m(masker_.parameters());
    auto rz = remix(masker_, y1, y2);
    auto l_d = disc_loss(disc_, {y1, y2}, {rz.z1, rz.z2});
    rep.l_d = l_d->value[0];
    check_finite("l_d", rep.l_d, step_);
    opt_d_.zero_grad();
    backward(l_d);
    opt_d_.step();
    ++disc_updates_;
  }

  rep.step = ++step_;
  return rep;
}

float Trainer::supervised_step(const TensorF& y, const TensorF& target_x,
                               const TensorF& target_b) {
  if (y.numel() == 0) throw ConfigError("supervised_step: empty batch");
  check_same_shape(y, target_x, "supervised_step");
  check_same_shape(y, target_b, "supervised_step");

  auto yv = constant(TensorF(y));
  auto s = separate(masker_, yv);
  auto loss = add(mean_all(abs_val(sub(s.x_hat, constant(TensorF(target_x))))),
                  mean_all(abs_val(sub(s.b_hat, constant(TensorF(target_b))))));
  const float l = loss->value[0];
  check_finite("supervised loss", l, step_);
  opt_m_.zero_grad();
  backward(loss);
  opt_m_.step();
  ++masker_updates_;
  ++step_;
  return l;
}

namespace {

nlohmann::json config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["learning_rate"] = c.learning_rate;
  j["mask_steps_per_disc_step"] = c.mask_steps_per_disc_step;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["cycle_weight"] = c.cycle_weight;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["mode"] = mode_name(c.mode);
  j["checkpoint_every"] = c.checkpoint_every;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<float>();
  c.mask_steps_per_disc_step = j.at("mask_steps_per_disc_step").get<int64_t>();
  c.alpha = j.at("alpha").get<float>();
  c.beta = j.at("beta").get<float>();
  c.cycle_weight = j.at("cycle_weight").get<float>();
  c.batch_size = j.at("batch_size").get<int64_t>();
  c.epochs = j.at("epochs").get<int64_t>();
  c.seed = j.at("seed").get<uint64_t>();
  c.adam_beta1 = j.at("adam_beta1").get<float>();
  c.adam_beta2 = j.at("adam_beta2").get<float>();
  c.mode = mode_from_name(j.at("mode").get<std::string>());
  c.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
  return c;
}

nlohmann::json arch_to_json(const ArchDescriptor& a) {
  nlohmann::json j;
  j["h"] = a.in_h;
  j["w"] = a.in_w;
  j["c"] = a.in_c;
  j["base_channels"] = a.base_channels;
  j["levels"] = a.levels;
  return j;
}

ArchDescriptor arch_from_json(const nlohmann::json& j) {
  ArchDescriptor a;
  a.in_h = j.at("h").get<int64_t>();
  a.in_w = j.at("w").get<int64_t>();
  a.in_c = j.at("c").get<int64_t>();
  a.base_channels = j.at("base_channels").get<int64_t>();
  a.levels = j.at("levels").get<int64_t>();
  return a;
}

}  // namespace

void Trainer::save(const std::string& path) const {
  NamedTensorList tensors;
  for (const auto& [name, p] : masker_.named_parameters())
    tensors.items.emplace_back("masker." + name, p->value);
  for (const auto& [name, p] : disc_.named_parameters())
    tensors.items.emplace_back("disc." + name, p->value);

  const auto mnames = masker_.named_parameters();
  for (size_t i = 0; i < mnames.size(); ++i) {
    tensors.items.emplace_back("opt_m." + mnames[i].first + ".m1", opt_m_.moment1(i));
    tensors.items.emplace_back("opt_m." + mnames[i].first + ".m2", opt_m_.moment2(i));
  }
  const auto dnames = disc_.named_parameters();
  for (size_t i = 0; i < dnames.size(); ++i) {
    tensors.items.emplace_back("opt_d." + dnames[i].first + ".m1", opt_d_.moment1(i));
    tensors.items.emplace_back("opt_d." + dnames[i].first + ".m2", opt_d_.moment2(i));
  }

  nlohmann::json meta;
  meta["kind"] = "train_state";
  meta["arch"] = arch_to_json(arch_);
  meta["disc_arch"] = arch_to_json(disc_arch_);
  meta["config"] = config_to_json(cfg_);
  meta["counters"] = {{"step", step_},
                      {"epoch", epoch_},
                      {"masker_updates", masker_updates_},
                      {"disc_updates", disc_updates_},
                      {"adam_t_m", opt_m_.steps()},
                      {"adam_t_d", opt_d_.steps()}};
  meta["rng"] = rng_.state();
  save_container(path, meta, tensors);
}

Trainer Trainer::load(const std::string& path) {
  auto [meta, tensors] = load_container(path);
  if (meta.value("kind", "") != "train_state")
    throw FormatError("checkpoint: not a train_state container");

  Trainer t(arch_from_json(meta.at("arch")), arch_from_json(meta.at("disc_arch")),
            config_from_json(meta.at("config")));

  auto assign = [&tensors](const std::string& name, TensorF& dst) {
    TensorF& src = tensors.find(name);
    check_same_shape(src, dst, "checkpoint tensor");
    dst = src;
  };
  for (auto& [name, p] : t.masker_.named_parameters()) assign("masker." + name, p->value);
  for (auto& [name, p] : t.disc_.named_parameters()) assign("disc." + name, p->value);
  const auto mnames = t.masker_.named_parameters();
  for (size_t i = 0; i < mnames.size(); ++i) {
    assign("opt_m." + mnames[i].first + ".m1", t.opt_m_.moment1(i));
    assign("opt_m." + mnames[i].first + ".m2", t.opt_m_.moment2(i));
  }
  const auto dnames = t.disc_.named_parameters();
  for (size_t i = 0; i < dnames.size(); ++i) {
    assign("opt_d." + dnames[i].first + ".m1", t.opt_d_.moment1(i));
    assign("opt_d." + dnames[i].first + ".m2", t.opt_d_.moment2(i));
  }

  const auto& c = meta.at("counters");
  t.step_ = c.at("step").get<int64_t>();
  t.epoch_ = c.at("epoch").get<int64_t>();
  t.masker_updates_ = c.at("masker_updates").get<int64_t>();
  t.disc_updates_ = c.at("disc_updates").get<int64_t>();
  t.opt_m_.set_steps(c.at("adam_t_m").get<int64_t>());
  t.opt_d_.set_steps(c.at("adam_t_d").get<int64_t>());
  t.rng_.set_state(meta.at("rng").get<std::string>());
  return t;
}

void fit_unsupervised(Trainer& t, const std::vector<Mixture>& train, int64_t target_epochs,
                      const FitCallbacks& cb) {
  if (train.size() < 2) throw ConfigError("fit: need at least 2 training mixtures");
  while (t.epoch() < target_epochs) {
    const auto batches =
        batch_pairs(static_cast<int64_t>(train.size()), t.config().batch_size, t.rng());
    for (const auto& batch : batches) {
      auto [y1, y2] = pack_pairs(train, batch);
      const StepReport rep = t.train_step(y1, y2);
      if (cb.on_step) cb.on_step(rep);
    }
    t.set_epoch(t.epoch() + 1);
    if (cb.on_epoch_end) cb.on_epoch_end(t.epoch(), t);
  }
}

void fit_supervised(Trainer& t, const std::vector<Mixture>& train, float mixing_weight,
                    int64_t target_epochs, const FitCallbacks& cb) {
  if (train.empty()) throw ConfigError("fit: empty training set");
  for (const auto& m : train)
    if (!m.has_ground_truth())
      throw ConfigError("supervised training requires ground truth on every mixture");

  const auto& shape = train[0].pixels.shape();
  const int64_t stride = shape[0] * shape[1] * shape[2];
  const int64_t bs = t.config().batch_size;

  while (t.epoch() < target_epochs) {
    std::vector<int32_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    t.rng().shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(bs)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(bs));
      const int64_t n = static_cast<int64_t>(end - start);
      TensorF y({n, shape[0], shape[1], shape[2]});
      TensorF tx(y.shape()), tb(y.shape());
      for (size_t i = start; i < end; ++i) {
        const auto& m = train[static_cast<size_t>(order[i])];
        const int64_t off = static_cast<int64_t>(i - start) * stride;
        std::copy(m.pixels.data(), m.pixels.data() + stride, y.data() + off);
        for (int64_t j = 0; j < stride; ++j) {
          tx[off + j] = mixing_weight * m.gt_x[j];
          tb[off + j] = (1.0f - mixing_weight) * m.gt_b[j];
        }
      }
      const float loss = t.supervised_step(y, tx, tb);
      if (cb.on_step) {
        StepReport rep;
        rep.step = t.step();
        rep.l_c = loss;
        cb.on_step(rep);
      }
    }
    t.set_epoch(t.epoch() + 1);
    if (cb.on_epoch_end) cb.on_epoch_end(t.epoch(), t);
  }
}

}  // namespace unmix
