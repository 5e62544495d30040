#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "kasr/errors.hpp"
#include "kasr/ops.hpp"
#include "kasr/trainer.hpp"
#include "test_util.hpp"

using namespace kasr;
using kasr::testing::bitwise_equal;
using kasr::testing::random_tensor;
using kasr::testing::TempDir;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.scale = 2;
  c.sr_features = 8;
  c.sr_blocks = 1;
  c.kans_hidden = 8;
  c.disc_base = 8;
  c.batch = 2;
  c.patch_size = 16;
  c.epochs = 2;
  c.lr = 1e-3;
  return c;
}

struct TinyData {
  TempDir dir{"trainer_data"};
  PairDataset data;
  TinyData() {
    DegradationSpec spec;
    spec.kernel = gaussian_kernel(5, 1.0);
    spec.scale = 2;
    synth_dataset(6, 32, spec, 3, dir.path(), 1.0);
    data = PairDataset::load(dir.path());
  }
};

Layer<float> conv(std::string name, std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t stride,
                  std::size_t pad) {
  Layer<float> l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.in_c = in_c;
  l.out_c = out_c;
  l.kernel = k;
  l.stride = stride;
  l.pad = pad;
  l.weight = Tensor::zeros({out_c, in_c, k, k});
  l.bias = Tensor::zeros({out_c});
  return l;
}

// Per-channel 4x4 stride-2 conv equal to Catmull-Rom bicubic downscaling by 2
// (taps at t = 1.5, 0.5, 0.5, 1.5) away from the clamped border.
Network bicubic_down_stub() {
  const float a[4] = {-1.0f / 16, 9.0f / 16, 9.0f / 16, -1.0f / 16};
  Layer<float> l = conv("down", 3, 3, 4, 2, 1);
  auto w = l.weight.mutable_data();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < 4; ++y) {
      for (std::size_t x = 0; x < 4; ++x) w[((c * 3 + c) * 4 + y) * 4 + x] = a[y] * a[x];
    }
  }
  return Network("kans", NetSpec{NetKind::Kans, 2, 3, 0, 0.2}, {l});
}

// Nearest-neighbour x2 upsampler: 1x1 conv copying each channel 4 times, then depth_to_space.
Network nearest_up_stub() {
  Layer<float> l = conv("copy", 3, 12, 1, 1, 0);
  auto w = l.weight.mutable_data();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t k = 0; k < 4; ++k) w[(c * 4 + k) * 3 + c] = 1.0f;
  }
  Layer<float> shuffle;
  shuffle.kind = LayerKind::DepthToSpace;
  shuffle.name = "shuffle";
  shuffle.block = 2;
  return Network("sr", NetSpec{NetKind::Sr, 2, 3, 0, 0.2}, {l, shuffle});
}

// Random image with a zero one-pixel frame, so border clamping and zero padding agree.
Tensor framed_image(std::size_t size, std::uint64_t seed) {
  Tensor t = random_tensor({1, 3, size, size}, seed);
  auto v = t.mutable_data();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < size; ++i) {
      v[(c * size + 0) * size + i] = v[(c * size + size - 1) * size + i] = 0;
      v[(c * size + i) * size + 0] = v[(c * size + i) * size + size - 1] = 0;
    }
  }
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<Tensor> ps{Tensor::full({3}, 1.5f)};
  AdamState st;
  ASSERT_TRUE(adam_step(ps, {{0.0f, 0.0f, 0.0f}}, st, 0.1));
  for (float v : ps[0].data()) EXPECT_EQ(v, 1.5f);
}

TEST(Adam, FirstStepIsLrTimesSign) {
  std::vector<Tensor> ps{Tensor::zeros({2})};
  AdamState st;
  ASSERT_TRUE(adam_step(ps, {{1.0f, -4.0f}}, st, 0.1));
  // m_hat = g, v_hat = g^2, step = lr g / (|g| + eps)
  EXPECT_NEAR(ps[0].data()[0], -0.1 / (1 + 1e-8), 1e-7);
  EXPECT_NEAR(ps[0].data()[1], 0.1 * 4 / (4 + 1e-8), 1e-7);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, MinimizesQuadratic) {
  Tensor x = Tensor::zeros({1});
  x.set_requires_grad(true);
  std::vector<Tensor> ps{x};
  AdamState st;
  for (int i = 0; i < 200; ++i) {
    x.clear_grad();
    Tensor d = add_scalar(x, -3.0f);
    Tensor l = sum(mul(d, d));
    l.backward();
    ASSERT_TRUE(adam_step(ps, st, 0.1));
  }
  EXPECT_NEAR(x.data()[0], 3.0, 0.1);
}

TEST(Adam, NonFiniteGradientRefused) {
  std::vector<Tensor> ps{Tensor::full({2}, 1.0f)};
  AdamState st;
  EXPECT_FALSE(adam_step(ps, {{1.0f, std::nanf("")}}, st, 0.1));
  EXPECT_EQ(st.skipped, 1u);
  EXPECT_EQ(st.t, 0u);
  for (float v : ps[0].data()) EXPECT_EQ(v, 1.0f);
}

TEST(ClipGradNorm, RescalesJointNorm) {
  Tensor a = Tensor::zeros({1}), b = Tensor::zeros({1});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  a.grad_buffer()[0] = 3.0f;
  b.grad_buffer()[0] = 4.0f;
  std::vector<Tensor> ps{a, b};
  EXPECT_NEAR(clip_grad_norm(ps, 1.0), 5.0, 1e-9);
  EXPECT_NEAR(a.grad()[0], 0.6f, 1e-6);
  EXPECT_NEAR(b.grad()[0], 0.8f, 1e-6);
  EXPECT_NEAR(clip_grad_norm(ps, 10.0), 1.0, 1e-6);
  EXPECT_NEAR(a.grad()[0], 0.6f, 1e-6);
}

TEST(LrSchedule, DefaultMilestones) {
  TrainConfig c;
  c.lr = 1e-4;
  c.epochs = 50;
  EXPECT_EQ(c.resolved_milestones(), (std::vector<std::size_t>{25, 37}));
  EXPECT_DOUBLE_EQ(lr_at(0, c), 1e-4);
  EXPECT_DOUBLE_EQ(lr_at(24, c), 1e-4);
  EXPECT_DOUBLE_EQ(lr_at(25, c), 5e-5);
  EXPECT_DOUBLE_EQ(lr_at(37, c), 2.5e-5);
  EXPECT_DOUBLE_EQ(lr_at(49, c), 2.5e-5);
}

TEST(LrSchedule, ExplicitAndConstant) {
  TrainConfig c;
  c.lr = 1.0;
  c.milestones = std::vector<std::size_t>{};
  EXPECT_DOUBLE_EQ(lr_at(1000, c), 1.0);
  c.milestones = std::vector<std::size_t>{1, 2};
  c.lr_decay = 0.1;
  EXPECT_DOUBLE_EQ(lr_at(0, c), 1.0);
  EXPECT_NEAR(lr_at(2, c), 0.01, 1e-15);
}

TEST(TrainConfig, JsonRoundTrip) {
  TrainConfig c = tiny_config();
  c.beta = 0.3;
  c.milestones = std::vector<std::size_t>{};
  c.toggles.hfso = false;
  c.seed = 99;
  const TrainConfig r = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(r.to_json(), c.to_json());
  EXPECT_TRUE(r.milestones.has_value());
  EXPECT_FALSE(r.toggles.hfso);
}

TEST(TrainConfig, OverlayAndUnknownKeys) {
  const TrainConfig c = TrainConfig::from_json(R"({"lr":0.002,"beta":0.1})");
  EXPECT_DOUBLE_EQ(c.lr, 0.002);
  EXPECT_DOUBLE_EQ(c.beta, 0.1);
  EXPECT_EQ(c.n_modules, TrainConfig{}.n_modules);
  EXPECT_THROW(TrainConfig::from_json(R"({"learning_rate":1})"), ContractError);
  EXPECT_THROW(TrainConfig::from_json(R"({"toggles":{"bogus":true}})"), ContractError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  c.scale = 5;
  EXPECT_THROW(c.validate(), ContractError);
  c = tiny_config();
  c.patch_size = 15;
  EXPECT_THROW(c.validate(), ContractError);
  c = tiny_config();
  c.n_modules = 0;
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(Trainer, HeldoutIndices) {
  EXPECT_TRUE(heldout_indices(1).empty());
  EXPECT_EQ(heldout_indices(2), (std::vector<std::size_t>{1}));
  EXPECT_EQ(heldout_indices(32), (std::vector<std::size_t>{29, 30, 31}));
}

TEST(KansStep, UpdatesOnlyPhiAndDiscriminator) {
  const TrainConfig c = tiny_config();
  KasrModels m = KasrModels::create(c);
  OptimState opt;
  const Tensor hr = random_tensor({2, 3, 16, 16}, 1), lr = random_tensor({2, 3, 8, 8}, 2);
  const auto phi0 = parameter_checksum(m.phi), eta0 = parameter_checksum(m.eta), d0 = parameter_checksum(m.d);
  Tensor expected_fake;
  {
    NoGradGuard g;
    expected_fake = m.phi(hr);
  }
  const StepResult r = kans_step(m, hr, lr, hr, c, opt, 1e-3);
  EXPECT_FALSE(r.skipped);
  EXPECT_TRUE(bitwise_equal(r.out, expected_fake));
  EXPECT_FALSE(r.out.requires_grad());
  EXPECT_NE(parameter_checksum(m.phi), phi0);
  EXPECT_EQ(parameter_checksum(m.eta), eta0);
  EXPECT_NE(parameter_checksum(m.d), d0);
  for (const auto& p : m.phi.parameters()) EXPECT_FALSE(p.tensor.has_grad());
}

TEST(KansStep, ShapeContract) {
  const TrainConfig c = tiny_config();
  KasrModels m = KasrModels::create(c);
  OptimState opt;
  const Tensor hr = random_tensor({1, 3, 16, 16}, 1);
  EXPECT_THROW(kans_step(m, hr, random_tensor({1, 3, 4, 4}, 2), hr, c, opt, 1e-3), DimensionError);
}

TEST(KansStep, DescendsKansLoss) {
  int descended = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig c = tiny_config();
    c.seed = seed;
    KasrModels m = KasrModels::create(c);
    OptimState opt;
    const Tensor hr = random_tensor({2, 3, 16, 16}, 100 + seed), lr = random_tensor({2, 3, 8, 8}, 200 + seed);
    const Network phi_old = m.phi.clone();
    kans_step(m, hr, lr, hr, c, opt, 1e-4);
    auto objective = [&](const Network& phi) {
      NoGradGuard g;
      const Tensor fake = phi(hr);
      return loss_kans(fake, lr, m.eta(fake), hr, disc_generator_loss(m.d, fake), c.loss_config()).item();
    };
    // Both evaluated against the discriminator as updated in this step.
    if (objective(m.phi) < objective(phi_old)) ++descended;
  }
  EXPECT_GE(descended, 19);
}

TEST(KansStep, ExactDegradationStubHasZeroLossAndGradient) {
  TrainConfig c = tiny_config();
  c.beta = 0;
  c.gamma = 0;
  c.p = 2;
  KasrModels m = KasrModels::create(c);
  m.phi = bicubic_down_stub();
  const Tensor hr = framed_image(16, 1);
  const Tensor lr = bicubic_resize(hr, 8, 8);
  {
    // Gradient of the step objective straight from the graph.
    m.phi.set_trainable(true);
    const Tensor fake = m.phi(hr);
    Tensor loss = loss_kans(fake, lr, m.eta(fake), hr, Tensor::scalar(0.0f), c.loss_config());
    EXPECT_LT(loss.item(), 1e-12);
    loss.backward();
    double g2 = 0;
    for (const auto& p : m.phi.parameters()) {
      for (float g : p.tensor.grad()) g2 += static_cast<double>(g) * g;
    }
    EXPECT_LT(std::sqrt(g2), 1e-5);
    m.phi.clear_grads();
  }
  OptimState opt;
  EXPECT_LT(kans_step(m, hr, lr, hr, c, opt, 1e-3).loss, 1e-12);
}

TEST(KansStep, DisabledUsesClassicalFallback) {
  TrainConfig c = tiny_config();
  c.toggles.kans = false;
  KasrModels m = KasrModels::create(c);
  OptimState opt;
  const Tensor hr = random_tensor({1, 3, 16, 16}, 3);
  const Tensor lr = degrade_classical(hr, fallback_spec(c));
  const auto phi0 = parameter_checksum(m.phi), d0 = parameter_checksum(m.d);
  const StepResult r = kans_step(m, hr, lr, hr, c, opt, 1e-3);
  EXPECT_TRUE(bitwise_equal(r.out, lr));
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(parameter_checksum(m.phi), phi0);
  EXPECT_EQ(parameter_checksum(m.d), d0);
}

TEST(SrStep, LossMatchesObjectiveAndOnlyEtaMoves) {
  for (bool hfso : {false, true}) {
    TrainConfig c = tiny_config();
    c.toggles.hfso = hfso;
    KasrModels m = KasrModels::create(c);
    OptimState opt;
    const Tensor fake = random_tensor({2, 3, 8, 8}, 4), hr = random_tensor({2, 3, 16, 16}, 5);
    double expected;
    {
      NoGradGuard g;
      const Tensor sr = m.eta(fake);
      expected = (hfso ? loss_sr(sr, hr, c.loss_config()) : loss_rec(sr, hr, c.loss_config())).item();
    }
    const auto phi0 = parameter_checksum(m.phi), eta0 = parameter_checksum(m.eta), d0 = parameter_checksum(m.d);
    const StepResult r = sr_step(m, fake, hr, c, opt, 1e-3);
    EXPECT_EQ(r.loss, expected);
    EXPECT_EQ(parameter_checksum(m.phi), phi0);
    EXPECT_EQ(parameter_checksum(m.d), d0);
    EXPECT_NE(parameter_checksum(m.eta), eta0);
    NoGradGuard g;
    EXPECT_TRUE(bitwise_equal(r.out, m.eta(fake)));
  }
}

TEST(SrStep, PerfectInverseStubHasZeroLoss) {
  TrainConfig c = tiny_config();
  KasrModels m = KasrModels::create(c);
  m.eta = nearest_up_stub();
  const Tensor hr = Tensor::full({2, 3, 16, 16}, 0.35f);
  const Tensor fake = bicubic_resize(hr, 8, 8);
  OptimState opt;
  const StepResult r = sr_step(m, fake, hr, c, opt, 1e-3);
  EXPECT_LT(r.loss, 1e-6);
}

TEST(SrStep, ProbeParameterGradientMatchesFiniteDifference) {
  Network64 eta = build_sr_net<double>(2, 4, 1);
  init_params(eta, 5);
  LossConfig lc;
  const auto lr = random_tensor<double>({1, 3, 5, 5}, 6), hr = random_tensor<double>({1, 3, 10, 10}, 7);
  auto loss_at = [&]() {
    NoGradGuard g;
    return loss_sr(eta(lr), hr, lc).item();
  };
  loss_sr(eta(lr), hr, lc).backward();
  std::mt19937_64 rng(8);
  for (auto& p : eta.parameters()) {
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p.tensor.numel() - 1)(rng);
    const double analytic = p.tensor.grad()[i];
    auto v = p.tensor.mutable_data();
    const double orig = v[i], h = 1e-6;
    v[i] = orig + h;
    const double up = loss_at();
    v[i] = orig - h;
    const double down = loss_at();
    v[i] = orig;
    const double fd = (up - down) / (2 * h);
    EXPECT_LE(std::abs(fd - analytic), 1e-3 * std::max({std::abs(fd), std::abs(analytic), 1e-6})) << p.name;
  }
}

TEST(SrStep, ShapeContract) {
  const TrainConfig c = tiny_config();
  KasrModels m = KasrModels::create(c);
  OptimState opt;
  EXPECT_THROW(sr_step(m, random_tensor({1, 3, 8, 8}, 1), random_tensor({1, 3, 12, 12}, 2), c, opt, 1e-3),
               DimensionError);
}

TEST(Train, ZeroEpochsWritesInitialCheckpoint) {
  TinyData d;
  TempDir out("train_out");
  TrainConfig c = tiny_config();
  c.epochs = 0;
  TrainOptions o;
  o.out_dir = out.path();
  const TrainedArtifacts a = train(d.data, c, o);
  EXPECT_EQ(a.steps, 0u);
  EXPECT_TRUE(a.metrics.empty());
  ASSERT_TRUE(a.final_checkpoint.has_value());
  const auto ck = load_checkpoint(*a.final_checkpoint);
  const KasrModels fresh = KasrModels::create(c);
  ASSERT_EQ(ck.nets.size(), 3u);
  EXPECT_EQ(parameter_checksum(ck.nets[1]), parameter_checksum(fresh.eta));
}

TEST(Train, ObserverSeesAlternatingIsolatedRounds) {
  TinyData d;
  TrainConfig c = tiny_config();
  c.epochs = 1;
  c.n_modules = 2;
  std::vector<StepEvent> ev;
  TrainOptions o;
  o.observer = [&](const StepEvent& e) { ev.push_back(e); };
  const TrainedArtifacts a = train(d.data, c, o);
  // 6 images: 5 train, 1 held out; batch 2 -> 3 minibatches, 2 rounds, 2 phases.
  ASSERT_EQ(a.heldout, (std::vector<std::size_t>{5}));
  ASSERT_EQ(ev.size(), 3u * 2u * 2u);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const StepEvent& e = ev[i];
    EXPECT_EQ(e.step, i / 4);
    EXPECT_EQ(e.round, (i / 2) % 2 + 1);
    EXPECT_EQ(e.phase, i % 2 == 0 ? StepPhase::Kans : StepPhase::Sr);
    if (e.phase == StepPhase::Kans) {
      EXPECT_EQ(e.eta_before, e.eta_after);
      EXPECT_NE(e.phi_before, e.phi_after);
      EXPECT_EQ(e.input_shape[2], 16u);
      EXPECT_EQ(e.output_shape[2], 8u);
    } else {
      EXPECT_EQ(e.phi_before, e.phi_after);
      EXPECT_NE(e.eta_before, e.eta_after);
      EXPECT_EQ(e.input_shape[2], 8u);
      EXPECT_EQ(e.output_shape[2], 16u);
    }
    if (i > 0) {
      EXPECT_EQ(e.phi_before, ev[i - 1].phi_after);
      EXPECT_EQ(e.eta_before, ev[i - 1].eta_after);
    }
  }
  EXPECT_EQ(a.step_loss_sr.size(), 3u);
}

TEST(Train, SingleModuleEqualsIterativeOff) {
  TinyData d;
  TrainConfig one = tiny_config();
  one.epochs = 1;
  one.n_modules = 1;
  TrainConfig off = one;
  off.n_modules = 3;
  off.toggles.iterative = false;
  const auto a = train(d.data, one), b = train(d.data, off);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(parameter_checksum(*a.models.all()[i]), parameter_checksum(*b.models.all()[i]));
  }
  EXPECT_EQ(a.step_loss_sr, b.step_loss_sr);
}

TEST(Train, DeterministicMetricsAndCheckpoint) {
  TinyData d;
  TempDir o1("run1"), o2("run2");
  TrainConfig c = tiny_config();
  TrainOptions a, b;
  a.out_dir = o1.path();
  b.out_dir = o2.path();
  train(d.data, c, a);
  train(d.data, c, b);
  EXPECT_EQ(slurp(o1 / "metrics.csv"), slurp(o2 / "metrics.csv"));
  EXPECT_EQ(slurp(o1 / "final.kasr"), slurp(o2 / "final.kasr"));
  std::ifstream f(o1 / "metrics.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(f, line)) {
    ++lines;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5) << line;
  }
  EXPECT_EQ(lines, c.epochs);
}

TEST(Train, AblationsRun) {
  TinyData d;
  for (int which = 0; which < 4; ++which) {
    TrainConfig c = tiny_config();
    c.epochs = 1;
    if (which == 0) c.toggles.kans = false;
    if (which == 1) c.toggles.hfso = false;
    if (which == 2) c.toggles.iterative = false;
    if (which == 3) c.augment = false;
    const auto a = train(d.data, c);
    ASSERT_EQ(a.metrics.size(), 1u) << which;
    EXPECT_TRUE(std::isfinite(a.metrics[0].psnr)) << which;
    EXPECT_TRUE(std::isfinite(a.metrics[0].mean_loss_sr)) << which;
  }
}

TEST(Train, ScaleMismatchRejected) {
  TinyData d;
  TrainConfig c = tiny_config();
  c.scale = 3;
  c.patch_size = 18;
  EXPECT_THROW(train(d.data, c), ContractError);
}

TEST(Train, SaveCheckpointEchoesConfig) {
  TempDir out("ck");
  const TrainConfig c = tiny_config();
  const KasrModels m = KasrModels::create(c);
  save_checkpoint(m, c, out / "m.kasr");
  const auto ck = load_checkpoint(out / "m.kasr");
  EXPECT_EQ(TrainConfig::from_json(ck.config_json).to_json(), c.to_json());
}
