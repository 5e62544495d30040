#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "kasr/ops.hpp"
#include "kasr/trainer.hpp"

namespace kasr {

using json = nlohmann::json;

void TrainConfig::validate() const {
  if (scale < 2 || scale > 4) {
    throw ContractError("scale must be one of 2, 3, 4; got " + std::to_string(scale));
  }
  if (n_modules < 1) throw ContractError("n_modules must be at least 1");
  if (!(lr > 0.0)) throw ContractError("lr must be positive");
  if (batch < 1) throw ContractError("batch must be at least 1");
  if (patch_size == 0 || patch_size % scale != 0) {
    throw ContractError("patch_size " + std::to_string(patch_size) + " must be a positive multiple of scale " +
                        std::to_string(scale));
  }
  if (milestones) {
    for (std::size_t i = 1; i < milestones->size(); ++i) {
      if ((*milestones)[i] <= (*milestones)[i - 1]) throw ContractError("milestones must be strictly increasing");
    }
  }
  if (!(lr_decay > 0.0)) throw ContractError("lr_decay must be positive");
  if (!(clip_norm > 0.0)) throw ContractError("clip_norm must be positive");
  if (sr_features == 0 || kans_hidden == 0 || disc_base == 0) throw ContractError("network widths must be positive");
  if (fallback_blur_sigma < 0.0 || fallback_noise_sigma < 0.0) throw ContractError("fallback sigmas must be >= 0");
  loss_config().validate();
}

LossConfig TrainConfig::loss_config() const {
  LossConfig l;
  l.p = p;
  l.omega = omega;
  l.beta = beta;
  l.gamma = gamma;
  l.detach_hf_mask = detach_hf_mask;
  return l;
}

std::vector<std::size_t> TrainConfig::resolved_milestones() const {
  if (milestones) return *milestones;
  std::vector<std::size_t> m;
  const std::size_t a = epochs / 2, b = 3 * epochs / 4;
  if (a > 0) m.push_back(a);
  if (b > a) m.push_back(b);
  return m;
}

std::string TrainConfig::to_json() const {
  json j = {{"scale", scale},
            {"omega", omega},
            {"beta", beta},
            {"gamma", gamma},
            {"n_modules", n_modules},
            {"lr", lr},
            {"batch", batch},
            {"epochs", epochs},
            {"lr_decay", lr_decay},
            {"p", p},
            {"seed", seed},
            {"patch_size", patch_size},
            {"toggles", {{"kans", toggles.kans}, {"hfso", toggles.hfso}, {"iterative", toggles.iterative}}},
            {"sr_features", sr_features},
            {"sr_blocks", sr_blocks},
            {"kans_hidden", kans_hidden},
            {"disc_base", disc_base},
            {"slope", slope},
            {"clip_norm", clip_norm},
            {"augment", augment},
            {"detach_hf_mask", detach_hf_mask},
            {"checkpoint_every", checkpoint_every},
            {"fallback_blur_sigma", fallback_blur_sigma},
            {"fallback_noise_sigma", fallback_noise_sigma}};
  j["milestones"] = milestones ? json(*milestones) : json(nullptr);
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text, TrainConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ContractError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ContractError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "scale") c.scale = v.get<std::size_t>();
      else if (key == "omega") c.omega = v.get<double>();
      else if (key == "beta") c.beta = v.get<double>();
      else if (key == "gamma") c.gamma = v.get<double>();
      else if (key == "n_modules") c.n_modules = v.get<std::size_t>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "batch") c.batch = v.get<std::size_t>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "milestones") {
        if (v.is_null()) c.milestones.reset();
        else c.milestones = v.get<std::vector<std::size_t>>();
      }
      else if (key == "lr_decay") c.lr_decay = v.get<double>();
      else if (key == "p") c.p = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "patch_size") c.patch_size = v.get<std::size_t>();
      else if (key == "toggles") {
        for (const auto& [tk, tv] : v.items()) {
          if (tk == "kans") c.toggles.kans = tv.get<bool>();
          else if (tk == "hfso") c.toggles.hfso = tv.get<bool>();
          else if (tk == "iterative") c.toggles.iterative = tv.get<bool>();
          else throw ContractError("unknown toggle '" + tk + "'");
        }
      }
      else if (key == "sr_features") c.sr_features = v.get<std::size_t>();
      else if (key == "sr_blocks") c.sr_blocks = v.get<std::size_t>();
      else if (key == "kans_hidden") c.kans_hidden = v.get<std::size_t>();
      else if (key == "disc_base") c.disc_base = v.get<std::size_t>();
      else if (key == "slope") c.slope = v.get<double>();
      else if (key == "clip_norm") c.clip_norm = v.get<double>();
      else if (key == "augment") c.augment = v.get<bool>();
      else if (key == "detach_hf_mask") c.detach_hf_mask = v.get<bool>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<std::size_t>();
      else if (key == "fallback_blur_sigma") c.fallback_blur_sigma = v.get<double>();
      else if (key == "fallback_noise_sigma") c.fallback_noise_sigma = v.get<double>();
      else throw ContractError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ContractError(std::string("bad config value: ") + e.what());
  }
  return c;
}

TrainConfig TrainConfig::from_json(const std::string& text) { return from_json(text, TrainConfig{}); }

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  const auto ms = cfg.resolved_milestones();
  const auto passed = std::count_if(ms.begin(), ms.end(), [&](std::size_t m) { return m <= epoch; });
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(passed));
}

KasrModels KasrModels::create(const TrainConfig& cfg) {
  KasrModels m{build_kans_net(cfg.scale, cfg.kans_hidden, cfg.slope),
               build_sr_net(cfg.scale, cfg.sr_features, cfg.sr_blocks, cfg.slope),
               build_discriminator(cfg.disc_base, cfg.slope)};
  init_params(m.phi, derive_seed(cfg.seed, 1));
  init_params(m.eta, derive_seed(cfg.seed, 2));
  init_params(m.d, derive_seed(cfg.seed, 3));
  return m;
}

DegradationSpec fallback_spec(const TrainConfig& cfg) {
  DegradationSpec s;
  s.kernel = blur_kernel_for_sigma(cfg.fallback_blur_sigma);
  s.scale = cfg.scale;
  s.noise_sigma = cfg.fallback_noise_sigma;
  s.rng_seed = cfg.seed;
  return s;
}

namespace {

std::vector<Tensor> params_of(const Network& n) {
  std::vector<Tensor> out;
  for (auto& p : n.parameters()) out.push_back(p.tensor);
  return out;
}

// Clip then Adam; false when the gradient is unusable.
bool update(const Network& net, AdamState& state, double lr, double clip) {
  auto params = params_of(net);
  const double norm = clip_grad_norm(params, clip);
  if (!std::isfinite(norm)) {
    ++state.skipped;
    return false;
  }
  return adam_step(params, state, lr);
}

void expect_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    const char* axis = a.ndim() == 4 && b.ndim() == 4 && a.size(2) == b.size(2) ? "width" : "height";
    throw DimensionError(op, axis, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

struct TrainableScope {
  KasrModels& m;
  ~TrainableScope() {
    m.phi.set_trainable(true);
    m.eta.set_trainable(true);
    m.d.set_trainable(true);
  }
};

}  // namespace

StepResult kans_step(KasrModels& models, const Tensor& i_input, const Tensor& i_lr, const Tensor& i_hr,
                     const TrainConfig& cfg, OptimState& opt, double lr,
                     const std::optional<DegradationSpec>& fallback) {
  const LossConfig lc = cfg.loss_config();
  if (!cfg.toggles.kans) {
    NoGradGuard no_grad;
    const Tensor fake = degrade_classical(i_input, fallback ? *fallback : fallback_spec(cfg));
    expect_same(fake, i_lr, "kans_step");
    return {pnorm_mean(fake, i_lr, lc.p).item(), fake, false};
  }

  TrainableScope restore{models};
  models.phi.set_trainable(true);
  models.eta.set_trainable(false);
  models.d.set_trainable(true);

  const Tensor fake = models.phi(i_input);
  expect_same(fake, i_lr, "kans_step");

  // One critic update on real vs the current (detached) fake.
  models.d.clear_grads();
  const Tensor critic = disc_critic_loss(models.d, i_lr, fake);
  if (std::isfinite(critic.item())) {
    critic.backward();
    if (!update(models.d, opt.d, lr, cfg.clip_norm)) ++opt.skipped;
  } else {
    ++opt.skipped;
  }
  models.d.clear_grads();
  models.d.set_trainable(false);

  const Tensor gen = cfg.gamma != 0.0 ? disc_generator_loss(models.d, fake) : Tensor::scalar(0.0f);
  const Tensor sr = models.eta(fake);
  const Tensor loss = loss_kans(fake, i_lr, sr, i_hr, gen, lc);
  const double value = loss.item();

  models.phi.clear_grads();
  bool skipped = !std::isfinite(value);
  if (!skipped) {
    loss.backward();
    skipped = !update(models.phi, opt.phi, lr, cfg.clip_norm);
  }
  models.phi.clear_grads();
  if (skipped) ++opt.skipped;
  return {value, fake.detach(), skipped};
}

StepResult sr_step(KasrModels& models, const Tensor& fake_lr, const Tensor& i_hr, const TrainConfig& cfg,
                   OptimState& opt, double lr) {
  const LossConfig lc = cfg.loss_config();
  TrainableScope restore{models};
  models.phi.set_trainable(false);
  models.d.set_trainable(false);
  models.eta.set_trainable(true);

  const Tensor input = fake_lr.detach();
  const Tensor sr = models.eta(input);
  expect_same(sr, i_hr, "sr_step");
  const Tensor loss = cfg.toggles.hfso ? loss_sr(sr, i_hr, lc) : loss_rec(sr, i_hr, lc);
  const double value = loss.item();

  models.eta.clear_grads();
  bool skipped = !std::isfinite(value);
  if (!skipped) {
    loss.backward();
    skipped = !update(models.eta, opt.eta, lr, cfg.clip_norm);
  }
  models.eta.clear_grads();
  if (skipped) ++opt.skipped;

  NoGradGuard no_grad;
  return {value, models.eta(input), skipped};
}

std::string metrics_line(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.6f,%.6f", m.epoch, m.lr, m.mean_loss_sr, m.mean_loss_kans,
                m.psnr, m.ssim);
  return buf;
}

std::vector<std::size_t> heldout_indices(std::size_t n) {
  if (n < 2) return {};
  const std::size_t k = std::max<std::size_t>(1, n / 10);
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), n - k);
  return idx;
}

std::pair<double, double> evaluate(const Network& eta, const PairDataset& data, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return {0.0, 0.0};
  NoGradGuard no_grad;
  double p = 0.0, s = 0.0;
  for (std::size_t i : idx) {
    const auto& pair = data.pairs().at(i);
    const Tensor sr = clamp(eta(pair.lr), 0.0f, 1.0f);
    p += psnr(sr, pair.hr);
    s += ssim(sr, pair.hr);
  }
  return {p / static_cast<double>(idx.size()), s / static_cast<double>(idx.size())};
}

void save_checkpoint(const KasrModels& models, const TrainConfig& cfg, const std::filesystem::path& path) {
  save_checkpoint(models.all(), cfg.to_json(), path);
}

namespace {

Tensor stack(const std::vector<Tensor>& items) {
  Shape s = items.front().shape();
  std::vector<float> data;
  data.reserve(items.size() * items.front().numel());
  for (const auto& t : items) {
    if (t.shape() != s) throw DimensionError("stack", "height", shape_str(t.shape()) + " vs " + shape_str(s));
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  s[0] = items.size();
  return Tensor(std::move(s), std::move(data));
}

std::string epoch_file(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%04zu.kasr", epoch);
  return buf;
}

}  // namespace

TrainedArtifacts train(const PairDataset& data, const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  if (data.size() == 0) throw ContractError("train: dataset is empty");
  if (data.scale() != cfg.scale) {
    throw ContractError("train: dataset scale " + std::to_string(data.scale()) + " differs from config scale " +
                        std::to_string(cfg.scale));
  }

  TrainedArtifacts art{KasrModels::create(cfg), {}, {}, 0, 0, heldout_indices(data.size()), std::nullopt};
  std::vector<std::size_t> train_idx;
  {
    const std::set<std::size_t> held(art.heldout.begin(), art.heldout.end());
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!held.count(i)) train_idx.push_back(i);
    }
  }
  const std::vector<std::size_t>& eval_idx = art.heldout.empty() ? train_idx : art.heldout;

  DegradationSpec fallback = fallback_spec(cfg);
  if (const auto manifest = read_manifest(data.root()); manifest && manifest->spec.scale == cfg.scale) {
    fallback = manifest->spec;
  }

  const std::size_t lr_patch = cfg.patch_size / cfg.scale;
  std::ofstream metrics_file;
  if (opts.out_dir) {
    std::filesystem::create_directories(*opts.out_dir);
    metrics_file.open(*opts.out_dir / "metrics.csv", std::ios::trunc);
    if (!metrics_file) throw IoError(IoError::Kind::Unwritable, "cannot write metrics in " + opts.out_dir->string());
  }

  OptimState opt;
  KasrModels& models = art.models;
  const std::size_t rounds = cfg.rounds();
  const std::size_t steps_per_epoch = (train_idx.size() + cfg.batch - 1) / cfg.batch;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, cfg);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x1000 + epoch));
    std::vector<std::size_t> order = train_idx;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }

    double sum_sr = 0.0, sum_kans = 0.0;
    std::size_t skipped_steps = 0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      std::vector<Tensor> lrs, hrs;
      for (std::size_t k = b * cfg.batch; k < std::min(order.size(), (b + 1) * cfg.batch); ++k) {
        const auto& pair = data.pairs()[order[k]];
        if (cfg.augment) {
          AugmentedPair ap = sample_augmented_patch(pair.lr, pair.hr, lr_patch, cfg.scale, rng);
          lrs.push_back(ap.lr);
          hrs.push_back(ap.hr);
        } else {
          PatchPair pp = extract_patches(pair.lr, pair.hr, lr_patch, cfg.scale, rng);
          lrs.push_back(pp.lr);
          hrs.push_back(pp.hr);
        }
      }
      const Tensor i_lr = stack(lrs), i_hr = stack(hrs);
      const std::size_t step = art.steps;

      Tensor i_sr = i_hr;
      double step_sr = 0.0, step_kans = 0.0;
      bool step_skipped = false;
      for (std::size_t n = 1; n <= rounds; ++n) {
        StepEvent ev;
        ev.epoch = epoch;
        ev.step = step;
        ev.round = n;
        if (opts.observer) {
          ev.phi_before = parameter_checksum(models.phi);
          ev.eta_before = parameter_checksum(models.eta);
        }
        DegradationSpec fb = fallback;
        fb.rng_seed = derive_seed(fallback.rng_seed, (step << 8) | n);
        const StepResult k = kans_step(models, i_sr, i_lr, i_hr, cfg, opt, lr, fb);
        if (opts.observer) {
          ev.phase = StepPhase::Kans;
          ev.input_shape = i_sr.shape();
          ev.output_shape = k.out.shape();
          ev.phi_after = parameter_checksum(models.phi);
          ev.eta_after = parameter_checksum(models.eta);
          ev.loss = k.loss;
          opts.observer(ev);
          ev.phi_before = ev.phi_after;
          ev.eta_before = ev.eta_after;
        }
        const StepResult s = sr_step(models, k.out, i_hr, cfg, opt, lr);
        if (opts.observer) {
          ev.phase = StepPhase::Sr;
          ev.input_shape = k.out.shape();
          ev.output_shape = s.out.shape();
          ev.phi_after = parameter_checksum(models.phi);
          ev.eta_after = parameter_checksum(models.eta);
          ev.loss = s.loss;
          opts.observer(ev);
        }
        step_kans += k.loss;
        step_sr += s.loss;
        step_skipped = step_skipped || k.skipped || s.skipped;
        i_sr = s.out;
      }
      step_sr /= static_cast<double>(rounds);
      step_kans /= static_cast<double>(rounds);
      if (step_skipped) ++skipped_steps;
      art.step_loss_sr.push_back(step_sr);
      sum_sr += step_sr;
      sum_kans += step_kans;
      ++art.steps;
    }
    art.skipped = opt.skipped;
    if (skipped_steps * 10 > steps_per_epoch) {
      throw TrainingError("training aborted in epoch " + std::to_string(epoch + 1) + ": " +
                          std::to_string(skipped_steps) + " of " + std::to_string(steps_per_epoch) +
                          " steps hit non-finite losses or gradients");
    }

    EpochMetrics m;
    m.epoch = epoch + 1;
    m.lr = lr;
    m.mean_loss_sr = sum_sr / static_cast<double>(steps_per_epoch);
    m.mean_loss_kans = sum_kans / static_cast<double>(steps_per_epoch);
    std::tie(m.psnr, m.ssim) = evaluate(models.eta, data, eval_idx);
    art.metrics.push_back(m);
    if (metrics_file.is_open()) metrics_file << metrics_line(m) << '\n' << std::flush;
    if (opts.log) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char buf[256];
      std::snprintf(buf, sizeof(buf), "epoch %zu/%zu lr=%.3g L_SR=%.5f L_KANS=%.5f psnr=%.3f ssim=%.4f (%.1fs)",
                    m.epoch, cfg.epochs, lr, m.mean_loss_sr, m.mean_loss_kans, m.psnr, m.ssim, secs);
      *opts.log << buf << std::endl;
    }
    if (opts.out_dir && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(models, cfg, *opts.out_dir / epoch_file(epoch + 1));
    }
  }

  if (opts.out_dir) {
    art.final_checkpoint = *opts.out_dir / "final.kasr";
    save_checkpoint(models, cfg, *art.final_checkpoint);
  }
  return art;
}

}  // namespace kasr
