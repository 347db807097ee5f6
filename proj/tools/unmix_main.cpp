// unmix: dataset synthesis, training, separation, evaluation and qualitative
// grids for adversarial unmix-and-remix source separation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "unmix/config.hpp"
#include "unmix/data.hpp"
#include "unmix/errors.hpp"
#include "unmix/gemm.hpp"
#include "unmix/imageio.hpp"
#include "unmix/metrics.hpp"
#include "unmix/trainer.hpp"

namespace fs = std::filesystem;
using namespace unmix;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::optional<uint64_t> seed;
  int threads = 2;
};

// CLI flags override config-file values, which override defaults.
TrainConfig make_train_config(const CommonOpts& common, const KeyValueMap& cli_overrides,
                              const TrainConfig& base = {}) {
  TrainConfig cfg = base;
  if (!common.config_path.empty()) apply_config(parse_kv_file(common.config_path), cfg);
  apply_config(cli_overrides, cfg);
  cfg.validate();
  return cfg;
}

ArchDescriptor arch_from_manifest(const DatasetManifest& m) {
  return arch_for_input(m.height, m.width, m.channels);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path);
  f << text;
}

int run_synth(const CommonOpts& common, const std::string& profile, const std::string& source_x,
              const std::string& source_b, const std::string& generator, int64_t n_train,
              int64_t n_val, bool invert, int64_t size) {
  DatasetManifest m;
  if (!common.config_path.empty()) m = read_manifest_file(common.config_path);

  int64_t default_train = 500, default_val = 100;
  if (profile == "mnist") {
    m.profile = Profile::MnistDigits;
    m.height = m.width = 32;
    m.channels = 1;
    default_train = 25000;
    default_val = 5000;
  } else if (profile == "shoesbags") {
    m.profile = Profile::ShoesBags;
    m.height = m.width = 64;
    m.channels = 3;
    m.invert_intensity = true;
    default_train = 10000;
    default_val = 5000;
  } else if (profile == "toy") {
    m.profile = Profile::Custom;
    if (m.generator.empty()) m.generator = "bars8";
    m.height = m.width = size > 0 ? size : 8;
    m.channels = 1;
  } else if (profile == "custom") {
    m.profile = Profile::Custom;
    if (size > 0) m.height = m.width = size;
  } else {
    throw ConfigError("unknown profile '" + profile + "'");
  }
  if (!source_x.empty()) m.source_x = source_x;
  if (!source_b.empty()) m.source_b = source_b;
  if (!generator.empty()) m.generator = generator;
  m.n_train = n_train > 0 ? n_train : (m.n_train > 0 ? m.n_train : default_train);
  m.n_val = n_val >= 0 ? n_val : (m.n_val > 0 ? m.n_val : default_val);
  if (invert) m.invert_intensity = true;
  if (common.seed) m.seed = *common.seed;
  m.validate();

  FolderLoadReport report;
  Dataset ds = build_dataset(m, &report);
  save_dataset(common.out, ds);
  if (!report.skipped.empty()) {
    std::string log;
    for (const auto& s : report.skipped) log += "skipped undecodable file: " + s + "\n";
    write_text((fs::path(common.out) / "synth.log").string(), log);
    std::cerr << "warning: skipped " << report.skipped.size() << " undecodable files\n";
  }
  std::cout << "train_mixtures=" << ds.train.size() << " val_mixtures=" << ds.val.size() << "\n";
  std::cout << "dataset_hash=" << dataset_hash(common.out) << "\n";
  return 0;
}

int run_train(const CommonOpts& common, const std::string& data_dir,
              const std::string& resume_ckpt, const KeyValueMap& overrides) {
  Dataset ds = load_dataset(data_dir);

  std::optional<Trainer> trainer;
  if (!resume_ckpt.empty()) {
    // The checkpoint carries the config; only the epoch budget and the
    // checkpoint cadence may change mid-run.
    for (const auto& [k, v] : overrides)
      if (k != "epochs" && k != "checkpoint_every")
        throw ConfigError("cannot override '" + k + "' when resuming from a checkpoint");
    if (common.seed) throw ConfigError("cannot change the seed of a resumed run");
    trainer.emplace(Trainer::load(resume_ckpt));
  } else {
    TrainConfig cfg = make_train_config(common, overrides);
    if (common.seed) cfg.seed = *common.seed;
    trainer.emplace(arch_from_manifest(ds.manifest), cfg);
  }
  const TrainConfig cfg = trainer->config();

  int64_t target_epochs = cfg.epochs;
  if (overrides.count("epochs")) target_epochs = kv_int(overrides, "epochs", cfg.epochs);

  fs::create_directories(common.out);
  const auto metrics_path = (fs::path(common.out) / "metrics.log").string();
  std::ofstream metrics(metrics_path, resume_ckpt.empty() ? std::ios::trunc : std::ios::app);
  if (!metrics) throw DataError("cannot write metrics log: " + metrics_path);

  FitCallbacks cb;
  cb.on_step = [&](const StepReport& r) { metrics << metrics_line(r) << "\n"; };
  cb.on_epoch_end = [&](int64_t epoch, Trainer& t) {
    metrics.flush();
    std::cout << "epoch " << epoch << " done (step " << t.step() << ")\n";
    if (epoch % t.config().checkpoint_every == 0 || epoch == target_epochs)
      t.save((fs::path(common.out) / ("ckpt_epoch" + std::to_string(epoch) + ".umx")).string());
  };

  try {
    if (cfg.mode == TrainConfig::Mode::Supervised) {
      for (const auto& m : ds.train)
        if (!m.has_ground_truth())
          throw ConfigError("--mode supervised requires ground truth in the dataset");
      fit_supervised(*trainer, ds.train, ds.manifest.mixing_weight, target_epochs, cb);
    } else {
      fit_unsupervised(*trainer, ds.train, target_epochs, cb);
    }
  } catch (const DivergenceError& e) {
    const auto snap = (fs::path(common.out) / "diagnostic.umx").string();
    trainer->save(snap);
    std::cerr << "divergence: " << e.what() << "\ndiagnostic snapshot: " << snap << "\n";
    return kExitDivergence;
  }

  const auto final_path = (fs::path(common.out) / "final.umx").string();
  trainer->save(final_path);
  std::cout << "final checkpoint: " << final_path << "\n";
  return 0;
}

int run_eval(const CommonOpts& common, const std::string& data_dir, const std::string& ckpt,
             const std::string& split) {
  Dataset ds = load_dataset(data_dir);
  auto trainer = Trainer::load(ckpt);
  if (trainer.arch() != arch_from_manifest(ds.manifest))
    throw ConfigError("checkpoint architecture does not match the dataset profile");

  const auto& set = split == "train" ? ds.train : ds.val;
  if (set.empty()) throw DataError("split '" + split + "' is empty");
  const bool with_ssim = ds.manifest.height >= 11 && ds.manifest.width >= 11;
  auto rep = evaluate(trainer.masker(), set, ds.manifest.mixing_weight, with_ssim);

  fs::create_directories(common.out);
  write_text((fs::path(common.out) / "report.txt").string(), report_text(rep));
  write_text((fs::path(common.out) / "report.csv").string(), report_csv(rep));
  std::cout << report_text(rep);
  return 0;
}

int run_separate(const CommonOpts& common, const std::string& ckpt, const std::string& input) {
  auto trainer = Trainer::load(ckpt);
  const auto& arch = trainer.arch();

  TensorF y;
  if (input.size() > 5 && input.substr(input.size() - 5) == ".rmxt") {
    auto images = read_rmxt(input);
    if (images.empty()) throw DataError("empty rmxt file");
    y = images[0];
  } else {
    auto img = try_decode_image_chw(input, arch.in_h, arch.in_w, arch.in_c, false);
    if (!img) throw DataError("cannot decode image: " + input);
    y = *img;
  }

  TensorF batch({1, arch.in_c, arch.in_h, arch.in_w});
  std::copy(y.data(), y.data() + y.numel(), batch.data());
  auto sep = separate(trainer.masker(), batch);

  fs::create_directories(common.out);
  auto unbatch = [&](const TensorF& t) {
    TensorF img({arch.in_c, arch.in_h, arch.in_w});
    std::copy(t.data(), t.data() + img.numel(), img.data());
    return img;
  };
  write_image_png((fs::path(common.out) / "x_hat.png").string(), unbatch(sep.x_hat));
  write_image_png((fs::path(common.out) / "b_hat.png").string(), unbatch(sep.b_hat));
  write_image_png((fs::path(common.out) / "mask.png").string(), unbatch(sep.mask));
  write_rmxt((fs::path(common.out) / "separation.rmxt").string(),
             {unbatch(sep.x_hat), unbatch(sep.b_hat), unbatch(sep.mask)});
  std::cout << "wrote x_hat.png b_hat.png mask.png separation.rmxt to " << common.out << "\n";
  return 0;
}

// Rows: Mix | Ours-x | Ours-b | GT-x | GT-b. Values are clamped to [0,1]
// only at PNG encoding time.
int run_grid(const CommonOpts& common, const std::string& data_dir, const std::string& ckpt,
             int64_t rows) {
  Dataset ds = load_dataset(data_dir);
  auto trainer = Trainer::load(ckpt);
  if (trainer.arch() != arch_from_manifest(ds.manifest))
    throw ConfigError("checkpoint architecture does not match the dataset profile");

  const auto& set = ds.val.empty() ? ds.train : ds.val;
  for (const auto& m : set)
    if (!m.has_ground_truth()) throw DataError("grid requires ground truth");

  Rng rng(common.seed.value_or(0));
  std::vector<int64_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  rows = std::min<int64_t>(rows, static_cast<int64_t>(set.size()));

  const int64_t c = ds.manifest.channels, h = ds.manifest.height, w = ds.manifest.width;
  const int64_t pad = 2, cols = 5;
  const int64_t gw = cols * w + (cols + 1) * pad, gh = rows * h + (rows + 1) * pad;
  TensorF canvas = TensorF::full({c, gh, gw}, 1.0f);

  auto blit = [&](const TensorF& img, int64_t row, int64_t col) {
    const int64_t oy = pad + row * (h + pad), ox = pad + col * (w + pad);
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
          canvas[(ch * gh + oy + y) * gw + ox + x] = img[(ch * h + y) * w + x];
  };
  auto scaled = [&](const TensorF& img, float s) {
    TensorF out(img.shape());
    for (int64_t i = 0; i < img.numel(); ++i) out[i] = s * img[i];
    return out;
  };

  for (int64_t r = 0; r < rows; ++r) {
    const auto& m = set[static_cast<size_t>(order[static_cast<size_t>(r)])];
    TensorF batch({1, c, h, w});
    std::copy(m.pixels.data(), m.pixels.data() + m.pixels.numel(), batch.data());
    auto sep = separate(trainer.masker(), batch);
    auto unbatch = [&](const TensorF& t) {
      TensorF img({c, h, w});
      std::copy(t.data(), t.data() + img.numel(), img.data());
      return img;
    };
    blit(m.pixels, r, 0);
    blit(unbatch(sep.x_hat), r, 1);
    blit(unbatch(sep.b_hat), r, 2);
    blit(scaled(m.gt_x, ds.manifest.mixing_weight), r, 3);
    blit(scaled(m.gt_b, 1.0f - ds.manifest.mixing_weight), r, 4);
  }

  fs::create_directories(fs::path(common.out).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(common.out).parent_path());
  write_image_png(common.out, canvas);
  std::cout << "grid: " << common.out << " (" << rows << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial unmix-and-remix source separation"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--threads", common.threads, "GEMM thread budget")->capture_default_str();

  std::string profile = "toy", source_x, source_b, generator;
  int64_t n_train = 0, n_val = -1, size = 0;
  bool invert = false;

  auto* synth = app.add_subcommand("synth", "Synthesize a mixture dataset");
  synth->add_option("--profile", profile, "mnist|shoesbags|toy|custom");
  synth->add_option("--data,--source-x", source_x, "raw data dir (mnist idx dir or x folder)");
  synth->add_option("--source-b", source_b, "second source folder");
  synth->add_option("--generator", generator, "synthetic generator (bars8|barsdots8)");
  synth->add_option("--n-train", n_train, "training mixtures");
  synth->add_option("--n-val", n_val, "validation mixtures");
  synth->add_option("--size", size, "square image size for toy/custom");
  synth->add_flag("--invert", invert, "invert intensities");
  synth->add_option("--config", common.config_path, "manifest file to start from");
  synth->add_option("--out", common.out, "output dataset dir")->required();
  uint64_t seed_val = 0;
  auto* seed_opt = synth->add_option("--seed", seed_val, "dataset seed");

  std::string data_dir, checkpoint;
  KeyValueMap overrides;
  auto add_override = [&overrides](const std::string& key) {
    return [&overrides, key](const std::string& v) { overrides[key] = v; };
  };

  auto* train = app.add_subcommand("train", "Train a separator");
  train->add_option("--data", data_dir, "dataset dir")->required();
  train->add_option("--out", common.out, "run output dir")->required();
  train->add_option("--config", common.config_path, "train config file");
  train->add_option("--checkpoint", checkpoint, "resume from checkpoint");
  train->add_option_function<std::string>("--epochs", add_override("epochs"));
  train->add_option_function<std::string>("--batch-size", add_override("batch_size"));
  train->add_option_function<std::string>("--alpha", add_override("alpha"));
  train->add_option_function<std::string>("--beta", add_override("beta"));
  train->add_option_function<std::string>("--lr", add_override("learning_rate"));
  train->add_option_function<std::string>("--mask-steps",
                                          add_override("mask_steps_per_disc_step"));
  train->add_option_function<std::string>("--mode", add_override("mode"));
  train->add_option_function<std::string>("--cycle-weight", add_override("cycle_weight"));
  train->add_option_function<std::string>("--ckpt-every", add_override("checkpoint_every"));
  auto* train_seed = train->add_option("--seed", seed_val, "training seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string split = "val";
  eval->add_option("--data", data_dir, "dataset dir")->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split, "train|val");
  eval->add_option("--out", common.out, "report dir")->required();

  std::string input;
  auto* separate_cmd = app.add_subcommand("separate", "Separate a single image");
  separate_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  separate_cmd->add_option("--input", input, "image (png/jpg) or rmxt")->required();
  separate_cmd->add_option("--out", common.out, "output dir")->required();

  int64_t grid_rows = 8;
  auto* grid = app.add_subcommand("grid", "Qualitative separation grid");
  grid->add_option("--data", data_dir, "dataset dir")->required();
  grid->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  grid->add_option("--n", grid_rows, "rows")->capture_default_str();
  grid->add_option("--out", common.out, "output png")->required();
  auto* grid_seed = grid->add_option("--seed", seed_val, "row sampling seed");

  CLI11_PARSE(app, argc, argv);
  set_num_threads(common.threads);
  if (!seed_opt->empty() || !train_seed->empty() || !grid_seed->empty())
    common.seed = seed_val;

  try {
    if (*synth)
      return run_synth(common, profile, source_x, source_b, generator, n_train, n_val, invert,
                       size);
    if (*train) return run_train(common, data_dir, checkpoint, overrides);
    if (*eval) return run_eval(common, data_dir, checkpoint, split);
    if (*separate_cmd) return run_separate(common, checkpoint, input);
    if (*grid) return run_grid(common, data_dir, checkpoint, grid_rows);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
