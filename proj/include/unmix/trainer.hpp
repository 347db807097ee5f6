#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "unmix/adam.hpp"
#include "unmix/config.hpp"
#include "unmix/data.hpp"
#include "unmix/losses.hpp"
#include "unmix/nets.hpp"

namespace unmix {

struct TrainConfig {
  float learning_rate = 1e-4f;
  int64_t mask_steps_per_disc_step = 4;
  float alpha = 5.0f;
  float beta = 5.0f;
  float cycle_weight = 1.0f;  // 0 disables L_C (ablation knob)
  int64_t batch_size = 64;    // pairs per unsupervised batch
  int64_t epochs = 100;
  uint64_t seed = 1;
  float adam_beta1 = 0.5f;
  float adam_beta2 = 0.999f;
  enum class Mode { Unsupervised, Supervised } mode = Mode::Unsupervised;
  int64_t checkpoint_every = 10;  // epochs

  void validate() const;
};

std::string mode_name(TrainConfig::Mode m);
TrainConfig::Mode mode_from_name(const std::string& s);

// Applies "key = value" overrides; unknown keys are errors.
void apply_config(const KeyValueMap& kv, TrainConfig& cfg);

struct StepReport {
  int64_t step = 0;
  float l_c = 0, l_m = 0, l_e = 0, l_d = 0;
  float mean_mask = 0;
};

std::string metrics_line(const StepReport& r);

// Owns the separator, the discriminator, both optimizers and the training
// RNG; in other words the full training state. Checkpoints round-trip the
// state bit-exactly so a resumed run retraces the uninterrupted one.
// Discriminator depth for a given input geometry: same stride-2 stack as the
// masker encoder, but tiny inputs get one extra level so the score still sees
// enough structure.
ArchDescriptor disc_arch_for(const ArchDescriptor& mask_arch);

class Trainer {
 public:
  Trainer(const ArchDescriptor& arch, const TrainConfig& cfg);
  Trainer(const ArchDescriptor& arch, const ArchDescriptor& disc_arch, const TrainConfig& cfg);

  // One alternation cycle on a batch of mixture pairs packed as NCHW
  // tensors: mask_steps_per_disc_step masker updates, then one
  // discriminator update on fresh detached remixes.
  StepReport train_step(const TensorF& y1, const TensorF& y2);

  // Supervised regression step: mean-L1 of both masked components against
  // the weighted ground-truth contributions.
  float supervised_step(const TensorF& y, const TensorF& target_x, const TensorF& target_b);

  const MaskNet<float>& masker() const { return masker_; }
  const DiscNet<float>& discriminator() const { return disc_; }
  const ArchDescriptor& arch() const { return arch_; }
  const ArchDescriptor& disc_arch() const { return disc_arch_; }
  const TrainConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

  int64_t step() const { return step_; }
  int64_t epoch() const { return epoch_; }
  void set_epoch(int64_t e) { epoch_ = e; }
  int64_t masker_updates() const { return masker_updates_; }
  int64_t disc_updates() const { return disc_updates_; }

  void save(const std::string& path) const;
  static Trainer load(const std::string& path);

 private:
  ArchDescriptor arch_;
  ArchDescriptor disc_arch_;
  TrainConfig cfg_;
  Rng rng_;
  MaskNet<float> masker_;
  DiscNet<float> disc_;
  Adam<float> opt_m_, opt_d_;
  int64_t step_ = 0;
  int64_t epoch_ = 0;
  int64_t masker_updates_ = 0;
  int64_t disc_updates_ = 0;
};

struct FitCallbacks {
  std::function<void(const StepReport&)> on_step;
  std::function<void(int64_t epoch, Trainer&)> on_epoch_end;
};

// Runs unsupervised epochs until trainer.epoch() == target_epochs. Pairing is
// reshuffled per epoch from the trainer RNG, so the schedule is part of the
// checkpointed state.
void fit_unsupervised(Trainer& t, const std::vector<Mixture>& train, int64_t target_epochs,
                      const FitCallbacks& cb = {});

// Supervised counterpart (requires ground truth on every mixture).
void fit_supervised(Trainer& t, const std::vector<Mixture>& train, float mixing_weight,
                    int64_t target_epochs, const FitCallbacks& cb = {});

}  // namespace unmix
