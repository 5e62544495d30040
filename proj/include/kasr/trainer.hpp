#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kasr/dataio.hpp"
#include "kasr/nets.hpp"
#include "kasr/objectives.hpp"
#include "kasr/optim.hpp"

namespace kasr {

struct Toggles {
  bool kans = true;       // learned degradation; off = classical fallback
  bool hfso = true;       // edge-weighted term in the SR loss
  bool iterative = true;  // off forces a single round per minibatch
};

struct TrainConfig {
  std::size_t scale = 2;
  double omega = 0.5;
  double beta = 1.0;
  double gamma = 0.5;
  std::size_t n_modules = 2;
  double lr = 1e-4;
  std::size_t batch = 8;
  std::size_t epochs = 50;
  // nullopt: [epochs/2, 3*epochs/4]; an empty list keeps the rate constant.
  std::optional<std::vector<std::size_t>> milestones;
  double lr_decay = 0.5;
  int p = 1;
  std::uint64_t seed = 1;
  std::size_t patch_size = 48;  // HR side; the LR patch is patch_size / scale
  Toggles toggles;

  std::size_t sr_features = 32;
  std::size_t sr_blocks = 4;
  std::size_t kans_hidden = 32;
  std::size_t disc_base = 32;
  double slope = 0.2;
  double clip_norm = 1.0;
  bool augment = true;
  bool detach_hf_mask = false;
  std::size_t checkpoint_every = 0;  // epochs; 0 = final checkpoint only

  // Classical degradation used when toggles.kans is off and no manifest spec is given.
  double fallback_blur_sigma = 1.2;
  double fallback_noise_sigma = 0.0;

  void validate() const;
  LossConfig loss_config() const;
  std::vector<std::size_t> resolved_milestones() const;
  std::size_t rounds() const { return toggles.iterative ? n_modules : 1; }

  std::string to_json() const;
  /// Overlays the keys present in `text` onto `base`; unknown keys are errors.
  static TrainConfig from_json(const std::string& text, TrainConfig base);
  static TrainConfig from_json(const std::string& text);
};

double lr_at(std::size_t epoch, const TrainConfig& cfg);

/// The three networks of one run: degradation phi, SR eta, discriminator d.
struct KasrModels {
  Network phi;
  Network eta;
  Network d;

  static KasrModels create(const TrainConfig& cfg);
  std::vector<const Network*> all() const { return {&phi, &eta, &d}; }
};

struct OptimState {
  AdamState phi, eta, d;
  std::uint64_t skipped = 0;  // non-finite losses or gradients
};

struct StepResult {
  double loss = 0.0;
  Tensor out;  // kans_step: fake LR; sr_step: I_SR after the update
  bool skipped = false;
};

/// Classical degradation applied when the learned one is disabled.
DegradationSpec fallback_spec(const TrainConfig& cfg);

/// Critic update of d, then L_KANS backpropagated into phi only, clipped,
/// Adam. Returns the fake LR produced before the update, detached.
/// With toggles.kans off phi is untouched and the fake LR is
/// degrade_classical(i_input, fallback).
StepResult kans_step(KasrModels& models, const Tensor& i_input, const Tensor& i_lr, const Tensor& i_hr,
                     const TrainConfig& cfg, OptimState& opt, double lr,
                     const std::optional<DegradationSpec>& fallback = std::nullopt);

/// L_SR (or L_REC without HFSO) into eta with the fake LR as a constant;
/// returns I_SR recomputed after the update.
StepResult sr_step(KasrModels& models, const Tensor& fake_lr, const Tensor& i_hr, const TrainConfig& cfg,
                   OptimState& opt, double lr);

enum class StepPhase { Kans, Sr };

/// Emitted around every kans_step / sr_step when an observer is installed.
struct StepEvent {
  std::size_t epoch = 0;
  std::size_t step = 0;   // global minibatch index
  std::size_t round = 0;  // 1-based iterative round
  StepPhase phase = StepPhase::Kans;
  Shape input_shape;      // i_input (kans) or fake LR (sr)
  Shape output_shape;
  std::uint64_t phi_before = 0, phi_after = 0;
  std::uint64_t eta_before = 0, eta_after = 0;
  double loss = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double mean_loss_sr = 0.0;
  double mean_loss_kans = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

std::string metrics_line(const EpochMetrics& m);

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // metrics.csv and checkpoints
  std::function<void(const StepEvent&)> observer;
  std::ostream* log = nullptr;  // per-epoch progress lines
};

struct TrainedArtifacts {
  KasrModels models;
  std::vector<EpochMetrics> metrics;
  std::vector<double> step_loss_sr;  // mean over rounds, one per minibatch
  std::size_t steps = 0;
  std::uint64_t skipped = 0;
  std::vector<std::size_t> heldout;  // dataset indices used for evaluation
  std::optional<std::filesystem::path> final_checkpoint;
};

/// Held-out indices: the last max(1, n/10) pairs when n >= 2, none otherwise.
std::vector<std::size_t> heldout_indices(std::size_t n);

/// Mean PSNR/SSIM of eta over the given pairs, full images, no graph.
std::pair<double, double> evaluate(const Network& eta, const PairDataset& data, const std::vector<std::size_t>& idx);

TrainedArtifacts train(const PairDataset& data, const TrainConfig& cfg, const TrainOptions& opts = {});

void save_checkpoint(const KasrModels& models, const TrainConfig& cfg, const std::filesystem::path& path);

}  // namespace kasr
