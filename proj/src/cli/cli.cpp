#include "kasr/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>

#include "kasr/dataio.hpp"
#include "kasr/errors.hpp"
#include "kasr/image_ops.hpp"
#include "kasr/nets.hpp"
#include "kasr/ops.hpp"
#include "kasr/trainer.hpp"
#include "kasr/verify.hpp"

namespace kasr::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::Missing, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw IoError(IoError::Kind::Unwritable, "cannot write " + p.string());
}

// Record of one invocation, stored next to its outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  json config = json::object();
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::object();
  json results = json::object();
  double wall_clock_seconds = 0.0;

  void write(const fs::path& path) const {
    json j = {{"command", command},  {"args", args},       {"tool_version", kToolVersion},
              {"config", config},    {"seed", seed},       {"inputs", inputs},
              {"outputs", outputs},  {"results", results}, {"wall_clock_seconds", wall_clock_seconds}};
    write_text(path, j.dump(2) + "\n");
  }
};

// Trained SR network, or one of the stub models used for checks.
struct SrModel {
  std::optional<Network> net;
  std::string stub;  // "identity" | "bicubic" when net is empty
  std::size_t scale = 1;

  Tensor operator()(const Tensor& x) const {
    NoGradGuard no_grad;
    if (net) return net->forward(x);
    if (stub == "identity") return x;
    return bicubic_resize(x, x.size(2) * scale, x.size(3) * scale);
  }
};

Network find_net(const CheckpointContents& ck, NetKind kind, const fs::path& path) {
  for (const auto& n : ck.nets) {
    if (n.spec().kind == kind) return n;
  }
  throw LoadError(LoadError::Kind::Malformed,
                  path.string() + " holds no " + net_kind_name(kind) + " network");
}

SrModel make_model(const std::string& checkpoint, const std::string& stub, std::size_t scale) {
  SrModel m;
  if (!checkpoint.empty()) {
    m.net = find_net(load_checkpoint(checkpoint), NetKind::Sr, checkpoint);
    m.scale = m.net->scale();
  } else if (stub == "identity") {
    m.stub = stub;
    m.scale = 1;
  } else if (stub == "bicubic") {
    m.stub = stub;
    m.scale = scale;
  } else {
    throw ContractError("need --checkpoint or --stub identity|bicubic");
  }
  return m;
}

Tensor clamp01(const Tensor& t) {
  NoGradGuard no_grad;
  return clamp(t, 0.0f, 1.0f);
}

Tensor quantized(const Tensor& t) {
  std::vector<float> v(t.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(quantize_unit(t.data()[i])) / 255.0f;
  return Tensor(t.shape(), std::move(v));
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::size_t n = 32, hr_size = 64, scale = 2;
  double blur_sigma = 1.2, noise_sigma = 0.01;
  std::uint64_t seed = 7;
  std::string out;
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  DegradationSpec spec;
  spec.kernel = blur_kernel_for_sigma(a.blur_sigma);
  spec.scale = a.scale;
  spec.noise_sigma = a.noise_sigma;
  spec.rng_seed = a.seed;
  spec.validate();
  const DatasetManifest m = synth_dataset(a.n, a.hr_size, spec, a.seed, a.out, a.blur_sigma);

  RunManifest rm;
  rm.command = "synth";
  rm.args = argv;
  rm.config = {{"n", a.n},
               {"hr_size", a.hr_size},
               {"scale", a.scale},
               {"blur_sigma", a.blur_sigma},
               {"noise_sigma", a.noise_sigma},
               {"seed", a.seed}};
  rm.seed = a.seed;
  rm.outputs = {{"dir", a.out}, {"manifest", (fs::path(a.out) / "manifest.json").string()}};
  rm.results = {{"baseline_psnr", m.baseline_psnr}};
  rm.wall_clock_seconds = seconds_since(t0);
  rm.write(fs::path(a.out) / "run_manifest.json");
  out << "wrote " << a.n << " pairs to " << a.out << " (bicubic baseline " << m.baseline_psnr << " dB)\n";
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, out, config;
  std::vector<std::function<void(TrainConfig&)>> overlay;  // flags given on the command line
  CLI::Option* scale_opt = nullptr;
};

template <typename V>
void add_field(CLI::App* sub, TrainArgs& ta, const std::string& flag, V TrainConfig::*member, const std::string& desc) {
  auto v = std::make_shared<V>();
  CLI::Option* o = sub->add_option(flag, *v, desc);
  ta.overlay.push_back([v, o, member](TrainConfig& c) {
    if (o->count() > 0) c.*member = *v;
  });
  if (flag == "--scale") ta.scale_opt = o;
}

void add_switch(CLI::App* sub, TrainArgs& ta, const std::string& flag, const std::string& desc,
                std::function<void(TrainConfig&)> set) {
  CLI::Option* o = sub->add_flag(flag, desc);
  ta.overlay.push_back([o, set = std::move(set)](TrainConfig& c) {
    if (o->count() > 0) set(c);
  });
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  TrainConfig cfg;
  bool scale_given = a.scale_opt && a.scale_opt->count() > 0;
  if (!a.config.empty()) {
    std::string text = read_text(a.config);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ContractError(std::string("config: ") + e.what());
    }
    // A run manifest of an earlier train run works as a config too.
    if (j.is_object() && j.value("command", "") == "train" && j.contains("config")) {
      j = j["config"];
      text = j.dump();
    }
    cfg = TrainConfig::from_json(text, cfg);
    scale_given = scale_given || (j.is_object() && j.contains("scale"));
  }
  for (const auto& f : a.overlay) f(cfg);

  const PairDataset data = PairDataset::load(a.data, scale_given ? std::optional<std::size_t>(cfg.scale) : std::nullopt);
  // Without an explicit scale the dataset decides.
  if (!scale_given) cfg.scale = data.scale();
  cfg.validate();

  TrainOptions opts;
  opts.out_dir = fs::path(a.out);
  opts.log = &out;
  const TrainedArtifacts art = train(data, cfg, opts);

  RunManifest rm;
  rm.command = "train";
  rm.args = argv;
  rm.config = json::parse(cfg.to_json());
  rm.seed = cfg.seed;
  rm.inputs = {{"data", a.data}};
  if (!a.config.empty()) rm.inputs["config"] = a.config;
  rm.outputs = {{"dir", a.out},
                {"metrics", (fs::path(a.out) / "metrics.csv").string()},
                {"checkpoint", art.final_checkpoint ? art.final_checkpoint->string() : ""}};
  rm.results = {{"steps", art.steps}, {"skipped", art.skipped}, {"heldout", art.heldout}};
  if (!art.metrics.empty()) {
    rm.results["final_psnr"] = art.metrics.back().psnr;
    rm.results["final_ssim"] = art.metrics.back().ssim;
  }
  rm.wall_clock_seconds = seconds_since(t0);
  rm.write(fs::path(a.out) / "run_manifest.json");
  out << "trained " << art.steps << " steps; checkpoint "
      << (art.final_checkpoint ? art.final_checkpoint->string() : std::string("-")) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string data, checkpoint, stub, report;
  bool self_ensemble = false;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  const PairDataset data = PairDataset::load(a.data);
  const SrModel model = make_model(a.checkpoint, a.stub, data.scale());
  // A scale-1 model is fed the HR image itself; otherwise the LR image.
  const bool from_hr = model.scale == 1;
  if (!from_hr && model.scale != data.scale()) {
    throw ContractError("model scale " + std::to_string(model.scale) + " does not match dataset scale " +
                        std::to_string(data.scale()));
  }
  const ImageModel fn = [&model](const Tensor& x) { return model(x); };

  std::ostringstream report;
  report.precision(10);
  report << "name,psnr,ssim\n";
  double sum_p = 0, sum_s = 0;
  for (const auto& pair : data.pairs()) {
    const Tensor& in = from_hr ? pair.hr : pair.lr;
    const Tensor sr = clamp01(a.self_ensemble ? self_ensemble(fn, in) : fn(in));
    const double p = psnr(sr, pair.hr), s = ssim(sr, pair.hr);
    sum_p += p;
    sum_s += s;
    report << pair.name << ',' << p << ',' << s << '\n';
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, data.size()));
  report << "mean," << sum_p / n << ',' << sum_s / n << '\n';
  out << report.str();

  if (!a.report.empty()) {
    write_text(a.report, report.str());
    RunManifest rm;
    rm.command = "eval";
    rm.args = argv;
    rm.config = {{"self_ensemble", a.self_ensemble}, {"stub", a.stub}, {"scale", model.scale}};
    rm.inputs = {{"data", a.data}, {"checkpoint", a.checkpoint}};
    rm.outputs = {{"report", a.report}};
    rm.results = {{"mean_psnr", sum_p / n}, {"mean_ssim", sum_s / n}, {"pairs", data.size()}};
    rm.wall_clock_seconds = seconds_since(t0);
    rm.write(a.report + ".manifest.json");
  }
  return kOk;
}

// ---------------------------------------------------------------- sr

struct SrArgs {
  std::string checkpoint, stub, input, output;
  std::size_t scale = 2;
  bool self_ensemble = false;
};

int cmd_sr(const SrArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  const SrModel model = make_model(a.checkpoint, a.stub, a.scale);
  const Tensor lr = load_png(a.input);
  const ImageModel fn = [&model](const Tensor& x) { return model(x); };
  const Tensor sr = clamp01(a.self_ensemble ? self_ensemble(fn, lr) : fn(lr));
  if (fs::path(a.output).has_parent_path()) {
    std::error_code ec;
    fs::create_directories(fs::path(a.output).parent_path(), ec);
  }
  save_png(sr, a.output);

  RunManifest rm;
  rm.command = "sr";
  rm.args = argv;
  rm.config = {{"self_ensemble", a.self_ensemble}, {"stub", a.stub}, {"scale", model.scale}};
  rm.inputs = {{"image", a.input}, {"checkpoint", a.checkpoint}};
  rm.outputs = {{"image", a.output}};
  rm.wall_clock_seconds = seconds_since(t0);
  rm.write(a.output + ".manifest.json");
  out << a.input << " " << lr.size(3) << "x" << lr.size(2) << " -> " << a.output << " " << sr.size(3) << "x"
      << sr.size(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- degrade

struct DegradeArgs {
  std::string checkpoint, stub, input, lr, out;
  std::size_t scale = 2;
  double blur_sigma = 1.2, noise_sigma = 0.0, amplify = 5.0;
  std::uint64_t noise_seed = 0;
};

int cmd_degrade(const DegradeArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  if (!(a.amplify > 0.0) || !std::isfinite(a.amplify)) throw ContractError("--amplify must be positive");
  const Tensor hr = load_png(a.input);
  const Tensor real_lr = load_png(a.lr);

  Tensor fake;
  json cfg = {{"amplify", a.amplify}};
  if (!a.checkpoint.empty()) {
    const Network phi = find_net(load_checkpoint(a.checkpoint), NetKind::Kans, a.checkpoint);
    NoGradGuard no_grad;
    fake = phi.forward(hr);
    cfg["scale"] = phi.scale();
  } else if (a.stub == "classical") {
    DegradationSpec spec;
    spec.kernel = blur_kernel_for_sigma(a.blur_sigma);
    spec.scale = a.scale;
    spec.noise_sigma = a.noise_sigma;
    spec.rng_seed = a.noise_seed;
    spec.validate();
    fake = degrade_classical(hr, spec);
    cfg.update({{"stub", a.stub},
                {"scale", a.scale},
                {"blur_sigma", a.blur_sigma},
                {"noise_sigma", a.noise_sigma},
                {"noise_seed", a.noise_seed}});
  } else {
    throw ContractError("need --checkpoint or --stub classical");
  }
  if (fake.shape() != real_lr.shape()) {
    throw DimensionError("degrade", "spatial",
                         "degraded image is " + std::to_string(fake.size(3)) + "x" + std::to_string(fake.size(2)) +
                             " but the LR image is " + std::to_string(real_lr.size(3)) + "x" +
                             std::to_string(real_lr.size(2)));
  }
  // The difference is taken between the images as stored, i.e. after 8-bit quantization.
  const Tensor fake_q = quantized(clamp01(fake));
  std::vector<float> diff(fake_q.numel());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    const double d = std::abs(static_cast<double>(real_lr.data()[i]) - fake_q.data()[i]) * a.amplify;
    diff[i] = static_cast<float>(std::min(1.0, d));
  }
  const fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  save_png(real_lr, dir / "lr.png");
  save_png(fake_q, dir / "fake_lr.png");
  save_png(Tensor(fake_q.shape(), std::move(diff)), dir / "diff.png");

  RunManifest rm;
  rm.command = "degrade";
  rm.args = argv;
  rm.config = cfg;
  rm.seed = a.noise_seed;
  rm.inputs = {{"hr", a.input}, {"lr", a.lr}, {"checkpoint", a.checkpoint}};
  rm.outputs = {{"lr", (dir / "lr.png").string()},
                {"fake_lr", (dir / "fake_lr.png").string()},
                {"diff", (dir / "diff.png").string()}};
  rm.wall_clock_seconds = seconds_since(t0);
  rm.write(dir / "run_manifest.json");
  out << "wrote lr.png, fake_lr.png, diff.png (x" << a.amplify << ") to " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const verify::Options& o, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  const auto results = verify::run(o, &out);
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (!r.passed) {
      ++failed;
      err << "failed: " << r.suite << "/" << r.op << " " << r.precision << "\n";
    }
  }
  out << results.size() << " checks, " << failed << " failed, " << seconds_since(t0) << " s\n";
  if (results.empty()) {
    err << "no check matches filter '" << o.filter << "'\n";
    return kValidationError;
  }
  return failed == 0 ? kOk : kValidationError;
}

int exit_code_for(const IoError& e) {
  return e.kind() == IoError::Kind::Unwritable ? kRuntimeFailure : kValidationError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"kasr: kernel-adversarial super-resolution toolkit", "kasr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a synthetic HR/LR dataset");
  synth->add_option("--n", sa.n, "number of images")->capture_default_str();
  synth->add_option("--hr-size", sa.hr_size, "HR side length")->capture_default_str();
  synth->add_option("--scale", sa.scale, "downscaling factor (1, 2, 3 or 4)")->capture_default_str();
  synth->add_option("--blur-sigma", sa.blur_sigma, "Gaussian blur sigma")->capture_default_str();
  synth->add_option("--noise-sigma", sa.noise_sigma, "additive noise std")->capture_default_str();
  synth->add_option("--seed", sa.seed, "content and noise seed")->capture_default_str();
  synth->add_option("--out", sa.out, "output directory")->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "train the degradation, SR and discriminator networks");
  tr->add_option("--data", ta.data, "pair directory (HR/, LR/)")->required();
  tr->add_option("--out", ta.out, "output directory")->required();
  tr->add_option("--config", ta.config, "JSON file with TrainConfig fields");
  add_field(tr, ta, "--scale", &TrainConfig::scale, "upscaling factor (default: dataset scale)");
  add_field(tr, ta, "--omega", &TrainConfig::omega, "HFSO weight");
  add_field(tr, ta, "--beta", &TrainConfig::beta, "SR-error weight in L_KANS");
  add_field(tr, ta, "--gamma", &TrainConfig::gamma, "discriminator weight in L_KANS");
  add_field(tr, ta, "--n-modules", &TrainConfig::n_modules, "iterative rounds N");
  add_field(tr, ta, "--lr", &TrainConfig::lr, "learning rate");
  add_field(tr, ta, "--batch", &TrainConfig::batch, "minibatch size");
  add_field(tr, ta, "--epochs", &TrainConfig::epochs, "epochs");
  add_field(tr, ta, "--lr-decay", &TrainConfig::lr_decay, "decay factor at each milestone");
  add_field(tr, ta, "--p", &TrainConfig::p, "1: L1, 2: MSE");
  add_field(tr, ta, "--seed", &TrainConfig::seed, "seed");
  add_field(tr, ta, "--patch-size", &TrainConfig::patch_size, "HR patch side");
  add_field(tr, ta, "--sr-features", &TrainConfig::sr_features, "SR net width");
  add_field(tr, ta, "--sr-blocks", &TrainConfig::sr_blocks, "SR residual blocks");
  add_field(tr, ta, "--kans-hidden", &TrainConfig::kans_hidden, "KANS hidden channels");
  add_field(tr, ta, "--disc-base", &TrainConfig::disc_base, "discriminator base width");
  add_field(tr, ta, "--slope", &TrainConfig::slope, "LeakyReLU slope");
  add_field(tr, ta, "--clip-norm", &TrainConfig::clip_norm, "gradient clipping norm");
  add_field(tr, ta, "--checkpoint-every", &TrainConfig::checkpoint_every, "epochs between checkpoints (0: final only)");
  add_field(tr, ta, "--fallback-blur-sigma", &TrainConfig::fallback_blur_sigma, "classical blur when KANS is off");
  add_field(tr, ta, "--fallback-noise-sigma", &TrainConfig::fallback_noise_sigma, "classical noise when KANS is off");
  {
    auto ms = std::make_shared<std::vector<std::size_t>>();
    CLI::Option* o = tr->add_option("--milestones", *ms, "epochs at which the rate decays");
    ta.overlay.push_back([ms, o](TrainConfig& c) {
      if (o->count() > 0) c.milestones = *ms;
    });
  }
  add_switch(tr, ta, "--constant-lr", "no learning-rate decay", [](TrainConfig& c) { c.milestones.emplace(); });
  add_switch(tr, ta, "--no-kans", "classical degradation instead of KANS", [](TrainConfig& c) { c.toggles.kans = false; });
  add_switch(tr, ta, "--no-hfso", "plain L_REC for the SR net", [](TrainConfig& c) { c.toggles.hfso = false; });
  add_switch(tr, ta, "--no-is", "single round per minibatch", [](TrainConfig& c) { c.toggles.iterative = false; });
  add_switch(tr, ta, "--no-augment", "no flips or rotations", [](TrainConfig& c) { c.augment = false; });
  add_switch(tr, ta, "--detach-hf-mask", "SR edge mask as a constant", [](TrainConfig& c) { c.detach_hf_mask = true; });

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of a model over a pair directory");
  ev->add_option("--data", ea.data, "pair directory")->required();
  auto* ev_ck = ev->add_option("--checkpoint", ea.checkpoint, "trained checkpoint");
  ev->add_option("--stub", ea.stub, "identity (fed HR) or bicubic")
      ->check(CLI::IsMember({"identity", "bicubic"}))
      ->excludes(ev_ck);
  ev->add_flag("--self-ensemble", ea.self_ensemble, "average the 8 dihedral passes");
  ev->add_option("--report", ea.report, "also write the report to this file");

  SrArgs ra;
  auto* sr = app.add_subcommand("sr", "super-resolve one image");
  auto* sr_ck = sr->add_option("--checkpoint", ra.checkpoint, "trained checkpoint");
  sr->add_option("--stub", ra.stub, "bicubic")->check(CLI::IsMember({"identity", "bicubic"}))->excludes(sr_ck);
  sr->add_option("--scale", ra.scale, "stub scale")->capture_default_str();
  sr->add_option("--input", ra.input, "LR PNG")->required();
  sr->add_option("--output", ra.output, "SR PNG")->required();
  sr->add_flag("--self-ensemble", ra.self_ensemble, "average the 8 dihedral passes");

  DegradeArgs da;
  auto* dg = app.add_subcommand("degrade", "learned degradation preview with a difference image");
  auto* dg_ck = dg->add_option("--checkpoint", da.checkpoint, "trained checkpoint (uses phi)");
  dg->add_option("--stub", da.stub, "classical")->check(CLI::IsMember({"classical"}))->excludes(dg_ck);
  dg->add_option("--input", da.input, "HR PNG")->required();
  dg->add_option("--lr", da.lr, "real LR PNG to compare against")->required();
  dg->add_option("--out", da.out, "output directory")->required();
  dg->add_option("--amplify", da.amplify, "difference gain")->capture_default_str();
  dg->add_option("--scale", da.scale, "classical stub scale")->capture_default_str();
  dg->add_option("--blur-sigma", da.blur_sigma, "classical stub blur")->capture_default_str();
  dg->add_option("--noise-sigma", da.noise_sigma, "classical stub noise")->capture_default_str();
  dg->add_option("--noise-seed", da.noise_seed, "classical stub noise seed")->capture_default_str();

  verify::Options vo;
  auto* vf = app.add_subcommand("verify", "gradient, oracle, identity and metric self-checks");
  vf->add_option("--filter", vo.filter, "case-insensitive substring of suite or op");
  vf->add_flag("--inject-fault", vo.inject_conv_fault, "use a conv2d with a wrong backward (negative control)");
  vf->add_option("--seed", vo.seed, "seed")->capture_default_str();
  vf->add_option("--grad-instances", vo.grad_instances, "instances per gradient check")->capture_default_str();
  vf->add_option("--oracle-instances", vo.oracle_instances, "instances per oracle check")->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidationError;
  }

  try {
    if (synth->parsed()) return cmd_synth(sa, args, out);
    if (tr->parsed()) return cmd_train(ta, args, out);
    if (ev->parsed()) return cmd_eval(ea, args, out);
    if (sr->parsed()) return cmd_sr(ra, args, out);
    if (dg->parsed()) return cmd_degrade(da, args, out);
    if (vf->parsed()) return cmd_verify(vo, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kValidationError;
}

int main_entry(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace kasr::cli
