// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "kasr/cli.hpp"
#include "kasr/dataio.hpp"
#include "kasr/errors.hpp"
#include "kasr/ops.hpp"
#include "kasr/trainer.hpp"
#include "kasr/verify.hpp"

namespace fs = std::filesystem;
using namespace kasr;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

int failures = 0;

void report(int id, const std::string& title, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto t0 = Clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.notes.push_back(std::string("exception: ") + e.what());
  }
  std::ostringstream line;
  line << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << title << ")";
  line.precision(4);
  line << " [" << since(t0) << " s]";
  for (const auto& n : v.notes) line << "; " << n;
  std::cout << line.str() << std::endl;
  if (!v.pass) ++failures;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Checks a verify suite: everything passes, every required op is present at each
// listed precision with at least `min_instances` instances.
void check_suite(Verdict& v, const std::vector<verify::CheckResult>& results, const std::string& suite,
                 const std::vector<std::string>& required, const std::vector<std::string>& precisions,
                 std::size_t min_instances) {
  std::size_t n = 0, failed = 0;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : results) {
    if (r.suite != suite) continue;
    ++n;
    seen.insert({r.op, r.precision});
    if (!r.passed) {
      ++failed;
      v.require(false, verify::format(r));
    }
    v.require(r.instances >= min_instances, r.op + " ran only " + std::to_string(r.instances) + " instances");
  }
  for (const auto& op : required) {
    for (const auto& p : precisions) v.require(seen.count({op, p}) > 0, "missing check " + op + " " + p);
  }
  v.note(std::to_string(n) + " checks, " + std::to_string(failed) + " failed");
}

fs::path make_workdir() {
  const fs::path p = fs::temp_directory_path() / ("kasr_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TrainConfig smoke_config() {
  // Library defaults except lr and beta; see the README for why.
  TrainConfig c = TrainConfig::from_json(R"({"lr":2e-3,"beta":0.1})");
  c.seed = 7;
  return c;
}

}  // namespace

int main() {
  const fs::path work = make_workdir();
  const fs::path data_dir = work / "synth_x2";
  const fs::path run_a = work / "run_a", run_b = work / "run_b";

  report(1, "gradient suite", [](Verdict& v) {
    verify::Options o;
    o.filter = "gradient";
    o.grad_instances = 20;
    const auto t0 = Clock::now();
    const auto results = verify::run(o);
    const double secs = since(t0);
    check_suite(v, results, "gradient",
                {"conv2d", "maxpool2d", "leaky_relu", "depth_to_space", "add", "sub", "mul", "scalar_mul",
                 "add_scalar", "abs", "square", "sqrt", "sum", "mean", "min_all", "max_all", "clamp",
                 "concat_channels", "sobel_map", "minmax_normalize", "bce_with_logits", "loss_rec", "loss_hfso",
                 "loss_sr", "loss_kans", "disc_critic_loss", "disc_generator_loss"},
                {"f32", "f64"}, 20);
    for (const auto& r : results) {
      if (r.suite != "gradient") continue;
      const double tol = r.precision == "f32" ? 1e-3 : 1e-6;
      v.require(r.tolerance <= tol, r.op + " " + r.precision + " tolerance " + fmt(r.tolerance) + " > " + fmt(tol));
    }
    v.require(secs < 60.0, "runtime " + fmt(secs) + " s >= 60 s");
    v.note("runtime " + fmt(secs) + " s");
  });

  report(2, "oracle equivalence", [](Verdict& v) {
    verify::Options o;
    o.filter = "oracle";
    o.oracle_instances = 10;
    check_suite(v, verify::run(o), "oracle",
                {"conv2d", "maxpool2d", "sobel_map", "degrade_classical", "bicubic_resize", "psnr", "ssim"}, {"f32"},
                10);
  });

  report(3, "loss identities", [](Verdict& v) {
    verify::Options o;
    o.filter = "identity";
    const auto results = verify::run(o);
    check_suite(v, results, "identity",
                {"loss_hfso_self", "loss_sr_omega0", "loss_kans_beta0_gamma0", "loss_kans_affine_beta",
                 "loss_kans_affine_gamma"},
                {"f64"}, 1);
    for (const auto& r : results) {
      if (r.suite == "identity") v.require(r.tolerance <= 1e-9, r.op + " tolerance " + fmt(r.tolerance));
    }
  });

  // The criterion 5 dataset doubles as the synthetic set for criteria 4 and 7.
  const auto synth = run_cli({"synth", "--n", "32", "--hr-size", "64", "--scale", "2", "--blur-sigma", "1.2",
                              "--noise-sigma", "0.01", "--seed", "7", "--out", data_dir.string()});
  if (synth.code != 0) std::cout << "synth failed: " << synth.err;

  report(4, "iterative supervision contract and ablations", [&](Verdict& v) {
    const PairDataset data = PairDataset::load(data_dir);
    TrainConfig c = smoke_config();
    c.epochs = 1;
    c.n_modules = 2;
    std::vector<StepEvent> ev;
    TrainOptions o;
    o.observer = [&](const StepEvent& e) { ev.push_back(e); };
    const TrainedArtifacts art = train(data, c, o);
    const std::size_t hp = c.patch_size, lp = c.patch_size / c.scale;
    v.require(ev.size() == art.steps * 4, "expected 4 events per minibatch, got " + std::to_string(ev.size()));
    std::size_t checked = 0;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const StepEvent& e = ev[i];
      const std::size_t round = (i / 2) % 2 + 1;
      const StepPhase phase = i % 2 == 0 ? StepPhase::Kans : StepPhase::Sr;
      const std::string at = " at event " + std::to_string(i);
      v.require(e.step == i / 4 && e.round == round && e.phase == phase, "sequence" + at);
      if (phase == StepPhase::Kans) {
        v.require(e.eta_before == e.eta_after, "eta changed in kans_step" + at);
        v.require(e.phi_before != e.phi_after, "phi not updated in kans_step" + at);
        v.require(e.input_shape.size() == 4 && e.input_shape[2] == hp && e.input_shape[3] == hp,
                  "i_input not HR dims" + at);
        v.require(e.output_shape[2] == lp && e.output_shape[3] == lp, "fake LR not HR/s dims" + at);
      } else {
        v.require(e.phi_before == e.phi_after, "phi changed in sr_step" + at);
        v.require(e.eta_before != e.eta_after, "eta not updated in sr_step" + at);
        v.require(e.input_shape == ev[i - 1].output_shape, "sr_step input is not the fake LR" + at);
        v.require(e.output_shape == ev[i - 1].input_shape, "I_SR not HR dims" + at);
      }
      if (i > 0) {
        v.require(e.phi_before == ev[i - 1].phi_after && e.eta_before == ev[i - 1].eta_after,
                  "parameters changed between steps" + at);
      }
      ++checked;
    }
    v.note(std::to_string(checked) + " step events");

    // Cumulative ablation models: baseline, +KANS, +HFSO, +iterative supervision.
    const std::vector<std::pair<std::string, Toggles>> ablations = {
        {"#1 baseline", {false, false, false}},
        {"#2 +kans", {true, false, false}},
        {"#3 +hfso", {true, true, false}},
        {"#4 full", {true, true, true}},
    };
    for (const auto& [name, t] : ablations) {
      TrainConfig a = smoke_config();
      a.epochs = 1;
      a.toggles = t;
      const TrainedArtifacts r = train(data, a);
      const bool ok = r.metrics.size() == 1 && std::isfinite(r.metrics[0].psnr) &&
                      std::isfinite(r.metrics[0].mean_loss_sr);
      v.require(ok, "ablation " + name);
      if (ok) v.note(name + " psnr " + fmt(r.metrics[0].psnr));
    }
  });

  report(5, "end-to-end smoke", [&](Verdict& v) {
    const PairDataset data = PairDataset::load(data_dir);
    const TrainConfig c = smoke_config();
    TrainOptions o;
    o.out_dir = run_a;
    const auto t0 = Clock::now();
    const TrainedArtifacts art = train(data, c, o);
    const double secs = since(t0);
    v.require(art.steps == 200, "expected 200 steps, ran " + std::to_string(art.steps));
    v.require(c.toggles.kans && c.toggles.hfso && c.toggles.iterative && c.batch == 8, "not the full model");

    // Held-out PSNR recomputed from the saved checkpoint, against bicubic on the same pairs.
    const CheckpointContents ck = load_checkpoint(run_a / "final.kasr");
    const Network* eta = nullptr;
    for (const auto& n : ck.nets) {
      if (n.spec().kind == NetKind::Sr) eta = &n;
    }
    v.require(eta != nullptr, "no SR net in checkpoint");
    if (!eta) return;
    NoGradGuard g;
    double model = 0, bicubic = 0;
    for (std::size_t i : art.heldout) {
      const auto& p = data.pairs()[i];
      model += psnr(clamp((*eta)(p.lr), 0.0f, 1.0f), p.hr);
      bicubic += psnr(clamp(bicubic_resize(p.lr, 2.0), 0.0f, 1.0f), p.hr);
    }
    const double n = static_cast<double>(art.heldout.size());
    model /= n;
    bicubic /= n;
    v.require(!art.heldout.empty(), "no held-out pairs");
    v.require(model >= bicubic + 0.3, "held-out PSNR " + fmt(model) + " < bicubic " + fmt(bicubic) + " + 0.3");
    v.note("held-out PSNR " + fmt(model) + " dB vs bicubic " + fmt(bicubic) + " dB over " +
           std::to_string(art.heldout.size()) + " images");

    const auto& l = art.step_loss_sr;
    const std::size_t k = std::max<std::size_t>(1, l.size() / 10);
    double first = 0, last = 0;
    for (std::size_t i = 0; i < k; ++i) {
      first += l[i];
      last += l[l.size() - 1 - i];
    }
    first /= static_cast<double>(k);
    last /= static_cast<double>(k);
    v.require(last < first, "L_SR trend: last 10% " + fmt(last) + " >= first 10% " + fmt(first));
    v.note("mean L_SR first 10% " + fmt(first) + ", last 10% " + fmt(last));
    v.require(secs < 600, "runtime " + fmt(secs) + " s >= 600 s");
    v.note("runtime " + fmt(secs) + " s");
  });

  report(6, "determinism", [&](Verdict& v) {
    const PairDataset data = PairDataset::load(data_dir);
    TrainOptions o;
    o.out_dir = run_b;
    train(data, smoke_config(), o);
    for (const char* f : {"final.kasr", "metrics.csv"}) {
      const std::string a = slurp(run_a / f), b = slurp(run_b / f);
      v.require(!a.empty() && a == b, std::string(f) + " differs between runs");
      v.note(std::string(f) + " " + std::to_string(a.size()) + " bytes identical");
    }
  });

  report(7, "self-ensemble", [&](Verdict& v) {
    const auto single = run_cli({"eval", "--data", data_dir.string(), "--stub", "bicubic"});
    const auto ens = run_cli({"eval", "--data", data_dir.string(), "--stub", "bicubic", "--self-ensemble"});
    v.require(single.code == 0 && ens.code == 0, "bicubic eval failed: " + single.err + ens.err);
    const auto a = csv_rows(single.out), b = csv_rows(ens.out);
    v.require(a.size() == 34 && b.size() == 34, "expected header + 32 rows + mean");
    double worst = 0;
    for (std::size_t i = 1; i < std::min(a.size(), b.size()); ++i) {
      for (std::size_t j = 1; j <= 2; ++j) worst = std::max(worst, std::abs(std::stod(a[i][j]) - std::stod(b[i][j])));
    }
    v.require(worst <= 1e-5, "bicubic self-ensemble differs by " + fmt(worst));
    v.note("bicubic max metric difference " + fmt(worst));

    const fs::path rep = work / "ensemble.csv";
    const auto tr = run_cli({"eval", "--data", data_dir.string(), "--checkpoint", (run_a / "final.kasr").string(),
                             "--self-ensemble", "--report", rep.string()});
    v.require(tr.code == 0, "trained self-ensemble eval failed: " + tr.err);
    const auto rows = csv_rows(tr.out);
    v.require(rows.size() == 34 && rows.back().size() == 3 && rows.back()[0] == "mean", "trained report format");
    if (rows.size() == 34) {
      const double mean = std::stod(rows.back()[1]);
      v.require(std::isfinite(mean), "non-finite ensemble PSNR");
      v.note("trained model 8-pass mean PSNR " + fmt(mean) + " dB over all pairs");
    }
    v.require(fs::exists(rep) && fs::exists(rep.string() + ".manifest.json"), "report files");
  });

  report(8, "checkpoint round trip", [&](Verdict& v) {
    const fs::path src = run_a / "final.kasr";
    const std::string bytes = slurp(src);
    const CheckpointContents ck = load_checkpoint(src);
    std::vector<const Network*> nets;
    for (const auto& n : ck.nets) nets.push_back(&n);
    const fs::path copy = work / "resaved.kasr";
    save_checkpoint(nets, ck.config_json, copy);
    v.require(slurp(copy) == bytes, "save(load(f)) is not byte-identical");
    v.require(checkpoint_size(nets, checkpoint_header(nets, ck.config_json).size()) == bytes.size(),
              "size formula");

    auto expect_kind = [&](const std::string& name, const std::string& content, LoadError::Kind kind) {
      const fs::path p = work / name;
      spit(p, content);
      try {
        load_checkpoint(p);
        v.require(false, name + " accepted");
      } catch (const LoadError& e) {
        v.require(e.kind() == kind, name + " rejected as " + LoadError::kind_name(e.kind()));
      }
      const auto r = run_cli({"eval", "--data", data_dir.string(), "--checkpoint", p.string()});
      v.require(r.code == cli::kValidationError, name + ": CLI exit " + std::to_string(r.code));
    };
    std::string bad = bytes;
    bad[0] = 'Q';
    expect_kind("bad_magic.kasr", bad, LoadError::Kind::BadMagic);
    expect_kind("truncated.kasr", bytes.substr(0, bytes.size() - 7), LoadError::Kind::Truncated);
    expect_kind("header_cut.kasr", bytes.substr(0, 10), LoadError::Kind::Truncated);
    bad = bytes;
    bad[4] = 2;
    expect_kind("version.kasr", bad, LoadError::Kind::UnknownVersion);
    bad = bytes;
    bad[12] = '#';  // first header byte
    expect_kind("header_json.kasr", bad, LoadError::Kind::Malformed);
    expect_kind("trailing.kasr", bytes + "xx", LoadError::Kind::Malformed);
    try {
      load_checkpoint(work / "absent.kasr");
      v.require(false, "missing file accepted");
    } catch (const LoadError& e) {
      v.require(e.kind() == LoadError::Kind::Io, "missing file kind");
    }
    v.note(std::to_string(bytes.size()) + "-byte checkpoint, 7 corruption paths");
  });

  std::error_code ec;
  fs::remove_all(work, ec);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
