#include "kasr/verify.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "kasr/image_ops.hpp"
#include "kasr/kernels.hpp"
#include "kasr/nets.hpp"
#include "kasr/objectives.hpp"
#include "kasr/ops.hpp"
#include "kasr/oracle.hpp"

namespace kasr::verify {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename T>
constexpr const char* precision_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename T>
BasicTensor<T> uniform(const Shape& s, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> v(shape_numel(s));
  for (auto& x : v) x = static_cast<T>(u(rng));
  return BasicTensor<T>(s, std::move(v));
}

// Distinct values `spacing` apart in random order, lightly jittered.
template <typename T>
BasicTensor<T> separated(const Shape& s, std::mt19937_64& rng, double spacing, double start) {
  const std::size_t n = shape_numel(s);
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);
  std::uniform_real_distribution<double> jitter(-0.1 * spacing, 0.1 * spacing);
  std::vector<T> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<T>(start + spacing * static_cast<double>(rank[i]) + jitter(rng));
  return BasicTensor<T>(s, std::move(v));
}

template <typename T>
double min_abs(const BasicTensor<T>& t) {
  double m = kInf;
  for (T x : t.data()) m = std::min(m, std::abs(static_cast<double>(x)));
  return m;
}

template <typename T>
double min_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  double m = kInf;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::min(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  }
  return m;
}

// Smallest |a - b| away from the four corners of each plane. Reflect padding
// pins the Sobel magnitude at a corner to the constant sqrt(1e-12), so the
// corners of the edge map and of its normalized mask are flat.
template <typename T>
double off_corner_min_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const std::size_t h = a.size(2), w = a.size(3);
  double out = kInf;
  for (std::size_t p = 0; p < a.size(0) * a.size(1); ++p) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if ((y == 0 || y == h - 1) && (x == 0 || x == w - 1)) continue;
        const std::size_t i = (p * h + y) * w + x;
        out = std::min(out, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
      }
    }
  }
  return out;
}

template <typename T>
double sobel_margin(const BasicTensor<T>& m) {
  return off_corner_min_abs_diff(m, BasicTensor<T>::zeros(m.shape()));
}

// Gap between the largest value and the runner-up, per image.
template <typename T>
double top_gap(const BasicTensor<T>& t) {
  const std::size_t per = t.numel() / t.size(0);
  double gap = kInf;
  for (std::size_t b = 0; b < t.size(0); ++b) {
    std::vector<double> v(t.data().begin() + static_cast<std::ptrdiff_t>(b * per),
                          t.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * per));
    std::sort(v.begin(), v.end());
    if (v.size() > 1) gap = std::min(gap, v[v.size() - 1] - v[v.size() - 2]);
  }
  return gap;
}

// Distance of every LeakyReLU input from zero and every max-pool winner from
// its runner-up along the forward pass of `net` on `x`, divided by the largest
// activation magnitude (a step h moves pre-activations by about h times that).
template <typename T>
double network_margin(const BasicNetwork<T>& net, const BasicTensor<T>& x) {
  NoGradGuard no_grad;
  double margin = kInf, scale = 1.0;
  std::vector<BasicTensor<T>> saved(4);
  BasicTensor<T> h = x;
  for (const auto& l : net.layers()) {
    for (T v : h.data()) scale = std::max(scale, std::abs(static_cast<double>(v)));
    switch (l.kind) {
      case LayerKind::Conv: h = conv2d(h, l.weight, l.bias, l.stride, l.pad); break;
      case LayerKind::LeakyRelu:
        margin = std::min(margin, min_abs(h));
        h = leaky_relu(h, l.slope);
        break;
      case LayerKind::MaxPool: {
        const Shape& s = h.shape();
        for (std::size_t p = 0; p < s[0] * s[1]; ++p) {
          for (std::size_t oy = 0; oy + l.kernel <= s[2]; oy += l.stride) {
            for (std::size_t ox = 0; ox + l.kernel <= s[3]; ox += l.stride) {
              std::vector<double> w;
              for (std::size_t u = 0; u < l.kernel; ++u) {
                for (std::size_t v = 0; v < l.kernel; ++v) w.push_back(h.data()[(p * s[2] + oy + u) * s[3] + ox + v]);
              }
              std::sort(w.begin(), w.end());
              if (w.size() > 1) margin = std::min(margin, w[w.size() - 1] - w[w.size() - 2]);
            }
          }
        }
        h = maxpool2d(h, l.kernel, l.stride);
        break;
      }
      case LayerKind::DepthToSpace: h = depth_to_space(h, l.block); break;
      case LayerKind::SaveSkip: saved.at(l.slot) = h; break;
      case LayerKind::AddSkip: h = add(h, saved.at(l.slot)); break;
    }
  }
  return margin / scale;
}

template <typename T>
std::vector<BasicTensor<T>> network_params(const BasicNetwork<T>& net) {
  std::vector<BasicTensor<T>> out;
  for (const auto& p : net.parameters()) out.push_back(p.tensor);
  return out;
}

template <typename T>
oracle::Image to_image(const BasicTensor<T>& t) {
  oracle::Image im = oracle::make_image(t.size(0), t.size(1), t.size(2), t.size(3));
  for (std::size_t i = 0; i < t.numel(); ++i) im.v[i] = static_cast<double>(t.data()[i]);
  return im;
}

template <typename T>
double max_abs_diff(const BasicTensor<T>& t, const oracle::Image& im) {
  if (t.numel() != im.v.size()) return kInf;
  double m = 0;
  for (std::size_t i = 0; i < t.numel(); ++i) m = std::max(m, std::abs(static_cast<double>(t.data()[i]) - im.v[i]));
  return m;
}

std::vector<double> to_doubles(std::span<const float> s) { return {s.begin(), s.end()}; }

// One gradient case: fills inputs/f/wrt from the generator; false = rejected draw.
template <typename T>
struct GradCase {
  std::string op;
  std::function<bool(std::mt19937_64&, std::vector<BasicTensor<T>>&, TensorFn<T>&, std::vector<std::size_t>&,
                     double)>
      make;
};

template <typename T>
using Conv2dFn = BasicTensor<T> (*)(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, std::size_t,
                                    std::size_t);

template <typename T>
std::vector<GradCase<T>> gradient_cases(bool inject_conv_fault) {
  using B = BasicTensor<T>;
  using Inputs = std::vector<B>;
  using Wrt = std::vector<std::size_t>;
  const bool f32 = sizeof(T) == 4;
  const Conv2dFn<T> conv = inject_conv_fault ? &faulty_conv2d<T> : &conv2d<T>;
  std::vector<GradCase<T>> cases;

  auto unary = [&cases](std::string op, Shape shape, double lo, double hi, std::function<B(const B&)> fn,
                        std::function<bool(const B&, double)> ok = nullptr) {
    cases.push_back({std::move(op), [=](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double h) {
                       in = {uniform<T>(shape, rng, lo, hi)};
                       if (ok && !ok(in[0], h)) return false;
                       f = [fn](const Inputs& x) { return fn(x[0]); };
                       wrt = {0};
                       return true;
                     }});
  };
  auto binary = [&cases](std::string op, Shape shape, std::function<B(const B&, const B&)> fn) {
    cases.push_back({std::move(op), [=](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double) {
                       in = {uniform<T>(shape, rng, -1, 1), uniform<T>(shape, rng, -1, 1)};
                       f = [fn](const Inputs& x) { return fn(x[0], x[1]); };
                       wrt = {0, 1};
                       return true;
                     }});
  };

  cases.push_back({"conv2d", [conv](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double) {
                     std::uniform_int_distribution<std::size_t> small(1, 3), side(4, 6), pick(0, 1);
                     const std::size_t b = small(rng) % 2 + 1, ic = small(rng), oc = small(rng);
                     const std::size_t k = pick(rng) ? 3 : 1, stride = pick(rng) + 1, pad = k == 3 ? pick(rng) : 0;
                     in = {uniform<T>({b, ic, side(rng), side(rng)}, rng, -1, 1),
                           uniform<T>({oc, ic, k, k}, rng, -1, 1), uniform<T>({oc}, rng, -1, 1)};
                     f = [conv, stride, pad](const Inputs& x) { return conv(x[0], x[1], x[2], stride, pad); };
                     wrt = {0, 1, 2};
                     return true;
                   }});
  cases.push_back({"maxpool2d", [](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double) {
                     const bool overlap = rng() % 2;
                     in = {separated<T>({1, 2, overlap ? 5u : 4u, overlap ? 5u : 6u}, rng, 0.05, -1.0)};
                     const std::size_t win = overlap ? 3 : 2, stride = overlap ? 1 : 2;
                     f = [win, stride](const Inputs& x) { return maxpool2d(x[0], win, stride); };
                     wrt = {0};
                     return true;
                   }});
  cases.push_back({"leaky_relu", [](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double h) {
                     in = {uniform<T>({2, 3, 3, 3}, rng, -2, 2)};
                     if (min_abs(in[0]) < 4 * h) return false;
                     const T slope = static_cast<T>(std::uniform_real_distribution<double>(0.05, 0.5)(rng));
                     f = [slope](const Inputs& x) { return leaky_relu(x[0], slope); };
                     wrt = {0};
                     return true;
                   }});
  unary("depth_to_space", {2, 8, 2, 3}, -1, 1, [](const B& x) { return depth_to_space(x, std::size_t{2}); });
  unary("space_to_depth", {1, 2, 4, 6}, -1, 1, [](const B& x) { return space_to_depth(x, std::size_t{2}); });
  binary("add", {2, 3, 2, 2}, [](const B& a, const B& b) { return add(a, b); });
  binary("sub", {2, 3, 2, 2}, [](const B& a, const B& b) { return sub(a, b); });
  binary("mul", {2, 3, 2, 2}, [](const B& a, const B& b) { return mul(a, b); });
  unary("scalar_mul", {2, 3, 2, 2}, -1, 1, [](const B& x) { return scalar_mul(x, T(-1.7)); });
  unary("add_scalar", {2, 3, 2, 2}, -1, 1, [](const B& x) { return add_scalar(x, T(0.3)); });
  unary("abs", {2, 3, 2, 2}, -1, 1, [](const B& x) { return abs(x); },
        [](const B& x, double h) { return min_abs(x) > 4 * h; });
  unary("square", {2, 3, 2, 2}, -1, 1, [](const B& x) { return square(x); });
  unary("sqrt", {2, 3, 2, 2}, 0.2, 2, [](const B& x) { return sqrt(x); });
  unary("sum", {1, 2, 2, 2}, -1, 1, [](const B& x) { return sum(x); });
  unary("mean", {1, 2, 2, 2}, -1, 1, [](const B& x) { return mean(x); });
  cases.push_back({"min_all", [](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double) {
                     in = {separated<T>({1, 2, 2, 3}, rng, 0.1, -0.5)};
                     f = [](const Inputs& x) { return min_all(x[0]); };
                     wrt = {0};
                     return true;
                   }});
  cases.push_back({"max_all", [](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double) {
                     in = {separated<T>({1, 2, 2, 3}, rng, 0.1, -0.5)};
                     f = [](const Inputs& x) { return max_all(x[0]); };
                     wrt = {0};
                     return true;
                   }});
  unary("clamp", {2, 3, 2, 2}, -1, 1, [](const B& x) { return clamp(x, T(-0.4), T(0.5)); },
        [](const B& x, double h) {
          for (T v : x.data()) {
            if (std::abs(v + 0.4) < 4 * h || std::abs(v - 0.5) < 4 * h) return false;
          }
          return true;
        });
  cases.push_back({"concat_channels", [](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double) {
                     in = {uniform<T>({2, 1, 3, 2}, rng, -1, 1), uniform<T>({2, 3, 3, 2}, rng, -1, 1)};
                     f = [](const Inputs& x) { return concat_channels(std::vector<B>{x[0], x[1]}); };
                     wrt = {0, 1};
                     return true;
                   }});
  unary("flip_h", {2, 2, 3, 4}, -1, 1, [](const B& x) { return flip_h(x); });
  unary("flip_v", {2, 2, 3, 4}, -1, 1, [](const B& x) { return flip_v(x); });
  cases.push_back({"rot90", [](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double) {
                     in = {uniform<T>({1, 2, 3, 4}, rng, -1, 1)};
                     const int k = static_cast<int>(rng() % 3) + 1;
                     f = [k](const Inputs& x) { return rot90(x[0], k); };
                     wrt = {0};
                     return true;
                   }});
  unary("reshape", {2, 3, 2, 2}, -1, 1, [](const B& x) { return reshape(x, Shape{4, 6}); });
  unary("sobel_map", {1, 2, 5, 5}, 0, 1, [](const B& x) { return sobel_map(x); },
        [](const B& x, double) {
          NoGradGuard g;
          return sobel_margin(sobel_map(x)) > 0.1;
        });
  cases.push_back({"minmax_normalize", [](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double) {
                     in = {separated<T>({2, 2, 2, 3}, rng, 0.1, 0.0)};
                     f = [](const Inputs& x) { return minmax_normalize(x[0]); };
                     wrt = {0};
                     return true;
                   }});
  cases.push_back({"bce_with_logits", [](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double) {
                     in = {uniform<T>({1, 1, 2, 2}, rng, -3, 3)};
                     const T target = static_cast<T>(std::array<double, 3>{0.0, 1.0, 0.3}[rng() % 3]);
                     f = [target](const Inputs& x) { return bce_with_logits(x[0], target); };
                     wrt = {0};
                     return true;
                   }});

  // Losses. Scalar float outputs carry one rounding of the final value, so the
  // 32-bit instances stay small enough for the per-element gradient to dominate it.
  const Shape small = f32 ? Shape{1, 1, 2, 4} : Shape{2, 3, 3, 3};
  const Shape img = f32 ? Shape{1, 1, 3, 4} : Shape{2, 2, 5, 5};
  for (int p : {1, 2}) {
    cases.push_back({"pnorm_mean_p" + std::to_string(p),
                     [p, small](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double h) {
                       in = {uniform<T>(small, rng, 0, 1), uniform<T>(small, rng, 0, 1)};
                       if (p == 1 && min_abs_diff(in[0], in[1]) < 4 * h) return false;
                       f = [p](const Inputs& x) { return pnorm_mean(x[0], x[1], p); };
                       wrt = {0};
                       return true;
                     }});
  }
  cases.push_back({"loss_rec", [small](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double h) {
                     in = {uniform<T>(small, rng, 0, 1), uniform<T>(small, rng, 0, 1)};
                     if (min_abs_diff(in[0], in[1]) < 4 * h) return false;
                     f = [](const Inputs& x) { return loss_rec(x[0], x[1], LossConfig{}); };
                     wrt = {0};
                     return true;
                   }});
  // Away from every kink of the edge-weighted term: Sobel magnitudes not near
  // zero, a unique maximum in both masks, weighted images not coinciding. The
  // mask minimum always sits on a flat corner.
  auto hfso_ok = [](const B& sr, const B& hr, double h) {
    NoGradGuard g;
    const B ss = sobel_map(sr), sh = sobel_map(hr);
    if (sobel_margin(ss) < 0.1 || top_gap(ss) < 50 * h || top_gap(sh) < 50 * h) return false;
    return off_corner_min_abs_diff(mul(minmax_normalize(ss), sr), mul(minmax_normalize(sh), hr)) > 50 * h;
  };
  cases.push_back({"loss_hfso", [img, hfso_ok](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double h) {
                     in = {uniform<T>(img, rng, 0, 1), uniform<T>(img, rng, 0, 1)};
                     if (!hfso_ok(in[0], in[1], h)) return false;
                     f = [](const Inputs& x) { return loss_hfso(x[0], x[1], LossConfig{}); };
                     wrt = {0};
                     return true;
                   }});
  cases.push_back({"loss_sr", [img, hfso_ok](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double h) {
                     in = {uniform<T>(img, rng, 0, 1), uniform<T>(img, rng, 0, 1)};
                     if (!hfso_ok(in[0], in[1], h) || min_abs_diff(in[0], in[1]) < 4 * h) return false;
                     f = [](const Inputs& x) { return loss_sr(x[0], x[1], LossConfig{}); };
                     wrt = {0};
                     return true;
                   }});
  cases.push_back({"loss_kans", [small](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double h) {
                     in = {uniform<T>(small, rng, 0, 1), uniform<T>(small, rng, 0, 1), uniform<T>(small, rng, 0, 1),
                           uniform<T>(small, rng, 0, 1), uniform<T>({1}, rng, 0.2, 2)};
                     if (min_abs_diff(in[0], in[1]) < 4 * h || min_abs_diff(in[2], in[3]) < 4 * h) return false;
                     LossConfig lc;
                     lc.beta = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
                     lc.gamma = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
                     f = [lc](const Inputs& x) { return loss_kans(x[0], x[1], x[2], x[3], x[4], lc); };
                     wrt = {0, 2, 4};
                     return true;
                   }});
  // Discriminator terms: parameters first, then real, then fake.
  auto disc_case = [&cases](std::string op, bool generator) {
    cases.push_back({std::move(op), [generator](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double h) {
                       auto d = build_discriminator<T>(2);
                       init_params(d, rng());
                       // Larger weights push the logits off the flat region around
                       // log 2, so the gradient clears 32-bit rounding of the loss.
                       for (const auto& l : d.layers()) {
                         if (l.kind != LayerKind::Conv) continue;
                         auto w = l.weight;
                         for (auto& v : w.mutable_data()) v *= T(6);
                       }
                       in = network_params(d);
                       const std::size_t np = in.size();
                       in.push_back(uniform<T>({1, 3, 8, 8}, rng, 0, 1));
                       in.push_back(uniform<T>({1, 3, 8, 8}, rng, 0, 1));
                       if (network_margin(d, in[np]) < 4 * h || network_margin(d, in[np + 1]) < 4 * h) return false;
                       f = [d, np, generator](const Inputs& x) {
                         return generator ? disc_generator_loss(d, x[np + 1]) : disc_critic_loss(d, x[np], x[np + 1]);
                       };
                       wrt.resize(np);
                       std::iota(wrt.begin(), wrt.end(), 0);
                       if (generator) wrt.push_back(np + 1);
                       return true;
                     }});
  };
  disc_case("disc_critic_loss", false);
  disc_case("disc_generator_loss", true);

  // Small composite graphs and the three networks.
  cases.push_back({"conv_leaky_mean", [conv](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt, double h) {
                     in = {uniform<T>({1, 1, 4, 4}, rng, -1, 1), uniform<T>({2, 1, 3, 3}, rng, -1, 1),
                           uniform<T>({2}, rng, -0.5, 0.5)};
                     {
                       NoGradGuard g;
                       if (min_abs(conv(in[0], in[1], in[2], 1, 0)) < 20 * h) return false;
                     }
                     f = [conv](const Inputs& x) { return mean(leaky_relu(conv(x[0], x[1], x[2], 1, 0), T(0.2))); };
                     wrt = {0, 1, 2};
                     return true;
                   }});
  auto net_case = [&cases](std::string op, std::function<BasicNetwork<T>()> build, Shape input) {
    cases.push_back({std::move(op), [build, input](std::mt19937_64& rng, Inputs& in, TensorFn<T>& f, Wrt& wrt,
                                                   double h) {
                       auto net = build();
                       init_params(net, rng());
                       // Non-zero biases so that every parameter is exercised.
                       for (auto& p : net.parameters()) {
                         if (p.tensor.ndim() == 1) {
                           for (auto& b : p.tensor.mutable_data()) {
                             b = static_cast<T>(std::uniform_real_distribution<double>(-0.2, 0.2)(rng));
                           }
                         }
                       }
                       in = network_params(net);
                       const std::size_t np = in.size();
                       in.push_back(uniform<T>(input, rng, 0, 1));
                       if (network_margin(net, in[np]) < 4 * h) return false;
                       f = [net, np](const Inputs& x) { return net.forward(x[np]); };
                       wrt.resize(np + 1);
                       std::iota(wrt.begin(), wrt.end(), 0);
                       return true;
                     }});
  };
  net_case("kans_net", [] { return build_kans_net<T>(2, 2); }, {1, 3, 4, 4});
  net_case("sr_net", [] { return build_sr_net<T>(2, 2, 1); }, {1, 3, 2, 2});
  net_case("discriminator", [] { return build_discriminator<T>(2); }, {1, 3, 8, 8});
  return cases;
}

bool matches(const std::string& filter, const std::string& suite, const std::string& op) {
  if (filter.empty()) return true;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  const std::string f = lower(filter);
  return lower(suite).find(f) != std::string::npos || lower(op).find(f) != std::string::npos;
}

template <typename T>
void gradient_suite(const Options& opts, std::vector<CheckResult>& out) {
  const double step = sizeof(T) == 4 ? 1e-3 : 1e-5;
  const double tol = sizeof(T) == 4 ? 1e-3 : 1e-6;
  std::mt19937_64 rng(opts.seed ^ (sizeof(T) == 4 ? 0x32 : 0x64));
  for (auto& c : gradient_cases<T>(opts.inject_conv_fault)) {
    if (!matches(opts.filter, "gradient", c.op)) continue;
    CheckResult r{"gradient", c.op, precision_name<T>(), true, 0, 0.0, tol, ""};
    for (std::size_t i = 0; i < opts.grad_instances; ++i) {
      std::vector<BasicTensor<T>> inputs;
      TensorFn<T> f;
      std::vector<std::size_t> wrt;
      int attempts = 0;
      while (!c.make(rng, inputs, f, wrt, step)) {
        if (++attempts == 500) break;
      }
      if (attempts == 500) {
        r.passed = false;
        r.detail = "could not draw an instance away from non-differentiable points";
        break;
      }
      const double err = gradient_error(f, inputs, wrt, rng, step);
      ++r.instances;
      if (!(err <= r.worst)) r.worst = err;
      if (!(err < tol)) r.passed = false;
    }
    out.push_back(std::move(r));
  }
}

void oracle_suite(const Options& opts, std::vector<CheckResult>& out) {
  std::mt19937_64 rng(opts.seed ^ 0x0c);
  auto check = [&](const std::string& op, double tol, const std::function<double()>& trial) {
    if (!matches(opts.filter, "oracle", op)) return;
    CheckResult r{"oracle", op, "f32", true, 0, 0.0, tol, ""};
    for (std::size_t i = 0; i < opts.oracle_instances; ++i) {
      const double err = trial();
      ++r.instances;
      if (!(err <= r.worst)) r.worst = err;
      if (!(err <= tol)) r.passed = false;
    }
    out.push_back(std::move(r));
  };
  std::uniform_int_distribution<std::size_t> pick(0, 1);

  check("conv2d", 1e-5, [&] {
    const std::size_t stride = pick(rng) + 1, pad = pick(rng);
    const Tensor x = uniform<float>({2, 3, 8, 8}, rng, -1, 1);
    const Tensor w = uniform<float>({4, 3, 3, 3}, rng, -1, 1);
    const Tensor b = uniform<float>({4}, rng, -1, 1);
    const Tensor y = conv2d(x, w, b, stride, pad);
    return max_abs_diff(y, oracle::conv2d(to_image(x), to_doubles(w.data()), to_doubles(b.data()), 4, 3, 3, stride, pad));
  });
  check("maxpool2d", 0.0, [&] {
    const std::size_t win = pick(rng) + 2;
    const Tensor x = uniform<float>({1, 2, 6, 6}, rng, -1, 1);
    return max_abs_diff(maxpool2d(x, win, win), oracle::maxpool(to_image(x), win, win));
  });
  check("sobel_map", 1e-6, [&] {
    const Tensor x = uniform<float>({1, 1 + pick(rng) * 2, 8, 8}, rng, 0, 1);
    return max_abs_diff(sobel_map(x), oracle::sobel(to_image(x)));
  });
  check("minmax_normalize", 1e-6, [&] {
    const Tensor x = uniform<float>({2, 3, 4, 4}, rng, 0, 5);
    return max_abs_diff(minmax_normalize(x), oracle::minmax(to_image(x)));
  });
  check("degrade_classical", 1e-6, [&] {
    DegradationSpec spec;
    spec.kernel = gaussian_kernel(9, 1.2);
    spec.scale = 2 + pick(rng);
    const Tensor x = uniform<float>({1, 3, 12, 12}, rng, 0, 1);
    return max_abs_diff(degrade_classical(x, spec),
                        oracle::blur_subsample(to_image(x), spec.kernel.values, 9, 9, spec.scale));
  });
  check("degrade_classical_asymmetric", 1e-6, [&] {
    DegradationSpec spec;
    spec.kernel.rows = 3;
    spec.kernel.cols = 5;
    spec.kernel.values.resize(15);
    double s = 0;
    for (auto& v : spec.kernel.values) s += (v = std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    for (auto& v : spec.kernel.values) v /= s;
    spec.scale = 2;
    const Tensor x = uniform<float>({1, 2, 10, 10}, rng, 0, 1);
    return max_abs_diff(degrade_classical(x, spec),
                        oracle::blur_subsample(to_image(x), spec.kernel.values, 3, 5, spec.scale));
  });
  check("bicubic_resize", 1e-5, [&] {
    const Tensor x = uniform<float>({1, 3, 6, 5}, rng, 0, 1);
    const std::size_t oh = std::uniform_int_distribution<std::size_t>(2, 14)(rng);
    const std::size_t ow = std::uniform_int_distribution<std::size_t>(2, 14)(rng);
    return max_abs_diff(bicubic_resize(x, oh, ow), oracle::bicubic(to_image(x), oh, ow));
  });
  check("psnr", 1e-9, [&] {
    const Tensor a = uniform<float>({1, 3, 8, 8}, rng, 0, 1), b = uniform<float>({1, 3, 8, 8}, rng, 0, 1);
    return std::abs(psnr(a, b) - oracle::psnr(to_image(a), to_image(b)));
  });
  check("ssim", 1e-6, [&] {
    const Tensor a = uniform<float>({1, 3, 16, 16}, rng, 0, 1);
    const Tensor noise = uniform<float>({1, 3, 16, 16}, rng, -0.2, 0.2);
    const Tensor b = clamp(add(a, noise), 0.0f, 1.0f);
    return std::abs(ssim(a, b) - oracle::ssim(to_image(a), to_image(b)));
  });
  check("bce_with_logits", 1e-7, [&] {
    const Tensor z = uniform<float>({1, 1, 4, 4}, rng, -8, 8);
    const float t = pick(rng) ? 1.0f : 0.0f;
    return std::abs(static_cast<double>(bce_with_logits(z, t).item()) - oracle::bce_with_logits(to_doubles(z.data()), t));
  });
}

void identity_suite(const Options& opts, std::vector<CheckResult>& out) {
  std::mt19937_64 rng(opts.seed ^ 0x1d);
  auto check = [&](const std::string& op, double tol, const std::function<double()>& trial) {
    if (!matches(opts.filter, "identity", op)) return;
    CheckResult r{"identity", op, "f64", true, 0, 0.0, tol, ""};
    for (std::size_t i = 0; i < opts.oracle_instances; ++i) {
      const double err = trial();
      ++r.instances;
      if (!(err <= r.worst)) r.worst = err;
      if (!(err <= tol)) r.passed = false;
    }
    out.push_back(std::move(r));
  };
  const Shape s{2, 3, 6, 6};
  auto rnd = [&] { return uniform<double>(s, rng, 0, 1); };
  auto weight = [&] { return std::uniform_real_distribution<double>(0.0, 2.0)(rng); };

  check("loss_hfso_self", 0.0, [&] {
    const Tensor64 x = rnd();
    return std::abs(loss_hfso(x, x, LossConfig{}).item());
  });
  check("loss_sr_omega0", 0.0, [&] {
    const Tensor64 a = rnd(), b = rnd();
    LossConfig lc;
    lc.omega = 0.0;
    return std::abs(loss_sr(a, b, lc).item() - loss_rec(a, b, lc).item());
  });
  check("loss_sr_composition", 1e-9, [&] {
    const Tensor64 a = rnd(), b = rnd();
    LossConfig lc;
    lc.omega = weight();
    return std::abs(loss_sr(a, b, lc).item() - (loss_rec(a, b, lc).item() + lc.omega * loss_hfso(a, b, lc).item()));
  });
  check("loss_kans_beta0_gamma0", 0.0, [&] {
    const Tensor64 f = rnd(), r = rnd(), sr = rnd(), hr = rnd();
    LossConfig lc;
    lc.beta = 0.0;
    lc.gamma = 0.0;
    return std::abs(loss_kans(f, r, sr, hr, Tensor64::scalar(0.7), lc).item() - pnorm_mean(f, r, 1).item());
  });
  check("loss_kans_composition", 1e-9, [&] {
    const Tensor64 f = rnd(), r = rnd(), sr = rnd(), hr = rnd(), g = Tensor64::scalar(weight());
    LossConfig lc;
    lc.beta = 1.0;
    lc.gamma = 0.5;
    const double direct = pnorm_mean(f, r, 1).item() - 1.0 * pnorm_mean(sr, hr, 1).item() + 0.5 * g.item();
    return std::abs(loss_kans(f, r, sr, hr, g, lc).item() - direct);
  });
  for (const char* which : {"beta", "gamma"}) {
    check(std::string("loss_kans_affine_") + which, 1e-9, [&, which] {
      const Tensor64 f = rnd(), r = rnd(), sr = rnd(), hr = rnd(), g = Tensor64::scalar(weight());
      const double w1 = weight(), w2 = w1 + 0.1 + weight(), t = std::uniform_real_distribution<double>(-1, 2)(rng);
      auto at = [&](double w) {
        LossConfig lc;
        (std::string(which) == "beta" ? lc.beta : lc.gamma) = w;
        return loss_kans(f, r, sr, hr, g, lc).item();
      };
      const double wm = (1 - t) * w1 + t * w2;
      if (wm < 0) return std::abs(at(w1) - at(w1));
      return std::abs(at(wm) - ((1 - t) * at(w1) + t * at(w2)));
    });
  }
  check("loss_disc_zero_init", 1e-12, [&] {
    auto d = build_discriminator<double>(4);
    for (const auto& l : d.layers()) {
      if (l.kind == LayerKind::Conv) zero_layer(d, l.name);
    }
    const auto [critic, gen] = loss_disc(d, rnd(), rnd());
    return std::max(std::abs(critic.item() - 2 * std::log(2.0)), std::abs(gen.item() - std::log(2.0)));
  });
}

void metric_suite(const Options& opts, std::vector<CheckResult>& out) {
  std::mt19937_64 rng(opts.seed ^ 0x3e);
  auto check = [&](const std::string& op, double tol, const std::function<double()>& trial) {
    if (!matches(opts.filter, "metric", op)) return;
    CheckResult r{"metric", op, "", true, 0, 0.0, tol, ""};
    for (std::size_t i = 0; i < opts.oracle_instances; ++i) {
      const double err = trial();
      ++r.instances;
      if (!(err <= r.worst)) r.worst = err;
      if (!(err <= tol)) r.passed = false;
    }
    out.push_back(std::move(r));
  };
  auto rnd = [&](std::size_t h, std::size_t w) { return uniform<float>({1, 3, h, w}, rng, 0, 1); };

  check("psnr_identical_cap", 0.0, [&] {
    const Tensor a = rnd(8, 8);
    return std::abs(psnr(a, a) - kPsnrCap);
  });
  check("psnr_half_gray", 1e-9, [&] {
    return std::abs(psnr(Tensor::zeros({1, 3, 5, 5}), Tensor::full({1, 3, 5, 5}, 0.5f)) - 10 * std::log10(4.0));
  });
  check("psnr_symmetric", 0.0, [&] {
    const Tensor a = rnd(8, 8), b = rnd(8, 8);
    return std::abs(psnr(a, b) - psnr(b, a));
  });
  check("ssim_identical", 1e-9, [&] {
    const Tensor a = rnd(16, 16);
    return std::abs(ssim(a, a) - 1.0);
  });
  check("ssim_symmetric", 1e-9, [&] {
    const Tensor a = rnd(16, 16), b = rnd(16, 16);
    return std::abs(ssim(a, b) - ssim(b, a));
  });
  check("sobel_nonnegative", 0.0, [&] {
    const Tensor s = sobel_map(uniform<float>({1, 3, 7, 7}, rng, -1, 1));
    return std::max(0.0, -static_cast<double>(*std::min_element(s.data().begin(), s.data().end())));
  });
  check("minmax_range_idempotent", 1e-6, [&] {
    const Tensor m = minmax_normalize(uniform<float>({2, 3, 5, 5}, rng, -3, 3));
    double err = 0;
    for (std::size_t b = 0; b < 2; ++b) {
      const auto first = m.data().begin() + static_cast<std::ptrdiff_t>(b * 75);
      err = std::max(err, std::abs(static_cast<double>(*std::min_element(first, first + 75))));
      err = std::max(err, std::abs(static_cast<double>(*std::max_element(first, first + 75)) - 1.0));
    }
    const Tensor again = minmax_normalize(m);
    for (std::size_t i = 0; i < m.numel(); ++i) err = std::max(err, std::abs(double(again.data()[i]) - m.data()[i]));
    return err;
  });
  check("degrade_identity", 0.0, [&] {
    DegradationSpec spec;
    spec.kernel = Kernel2D::delta(1);
    spec.scale = 1;
    const Tensor a = rnd(6, 6);
    const Tensor d = degrade_classical(a, spec);
    double err = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) err = std::max(err, std::abs(double(d.data()[i]) - a.data()[i]));
    return err;
  });
  check("self_ensemble_bicubic", 1e-5, [&] {
    const Tensor lr = rnd(6, 6);
    const ImageModel up = [](const Tensor& x) { return bicubic_resize(x, x.size(2) * 2, x.size(3) * 2); };
    const Tensor single = up(lr), ens = self_ensemble(up, lr);
    double err = 0;
    for (std::size_t i = 0; i < single.numel(); ++i) err = std::max(err, std::abs(double(ens.data()[i]) - single.data()[i]));
    return err;
  });
}

}  // namespace

template <typename T>
double gradient_error(const TensorFn<T>& f, std::vector<BasicTensor<T>>& inputs, const std::vector<std::size_t>& wrt,
                      std::mt19937_64& rng, double step) {
  for (auto i : wrt) {
    if (!inputs[i].requires_grad()) inputs[i].set_requires_grad(true);
  }
  for (auto& t : inputs) {
    if (t.is_leaf()) t.clear_grad();
  }
  const BasicTensor<T> y = f(inputs);
  std::vector<T> proj(y.numel(), T(1));
  if (y.numel() > 1) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& r : proj) r = static_cast<T>(u(rng));
  }
  const BasicTensor<T> loss = y.numel() == 1 ? y : sum(mul(y, BasicTensor<T>(y.shape(), proj)));
  loss.backward();

  auto value = [&] {
    NoGradGuard no_grad;
    const BasicTensor<T> out = f(inputs);
    double s = 0;
    for (std::size_t k = 0; k < out.numel(); ++k) s += static_cast<double>(proj[k]) * static_cast<double>(out.data()[k]);
    return s;
  };

  double diff2 = 0, fd2 = 0, bp2 = 0;
  for (auto i : wrt) {
    const std::vector<T> analytic = inputs[i].has_grad()
                                        ? std::vector<T>(inputs[i].grad().begin(), inputs[i].grad().end())
                                        : std::vector<T>(inputs[i].numel(), T(0));
    auto data = inputs[i].mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const T orig = data[j];
      const T up = static_cast<T>(orig + step), down = static_cast<T>(orig - step);
      data[j] = up;
      const double lp = value();
      data[j] = down;
      const double lm = value();
      data[j] = orig;
      const double fd = (lp - lm) / (static_cast<double>(up) - static_cast<double>(down));
      const double bp = analytic[j];
      diff2 += (fd - bp) * (fd - bp);
      fd2 += fd * fd;
      bp2 += bp * bp;
    }
  }
  const double denom = std::sqrt(std::max(fd2, bp2));
  return denom == 0.0 ? 0.0 : std::sqrt(diff2) / denom;
}

template <typename T>
BasicTensor<T> faulty_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                             std::size_t stride, std::size_t padding) {
  BasicTensor<T> y;
  {
    NoGradGuard no_grad;
    y = conv2d(input, weight, bias, stride, padding);
  }
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  const auto g = kernels::Conv2dGeometry::make(is[0], is[1], is[2], is[3], ws[0], ws[2], ws[3], stride, padding);
  std::vector<T> out(y.data().begin(), y.data().end());
  return BasicTensor<T>::from_op(y.shape(), std::move(out), OpKind::Custom, {input, weight, bias},
                                 [input, weight, bias, g](std::span<const T> grad) {
                                   std::vector<T> gi(input.numel()), gw(weight.numel()), gb(bias.numel());
                                   kernels::reference::conv2d_backward<T>(g, input.data(), weight.data(), grad, gi,
                                                                          gw, gb);
                                   if (input.requires_grad()) {
                                     auto dst = input.grad_buffer();
                                     for (std::size_t i = 0; i < gi.size(); ++i) dst[i] += gi[i];
                                   }
                                   if (weight.requires_grad()) {
                                     // Bug on purpose: kernel taps reversed.
                                     auto dst = weight.grad_buffer();
                                     const std::size_t taps = g.k_h * g.k_w;
                                     for (std::size_t i = 0; i < gw.size(); ++i) {
                                       const std::size_t base = i - i % taps;
                                       dst[i] += gw[base + taps - 1 - i % taps];
                                     }
                                   }
                                   if (bias.requires_grad()) {
                                     auto dst = bias.grad_buffer();
                                     for (std::size_t i = 0; i < gb.size(); ++i) dst[i] += gb[i];
                                   }
                                 });
}

std::vector<CheckResult> run(const Options& opts, std::ostream* log) {
  std::vector<CheckResult> results;
  auto flush = [&](std::size_t from) {
    if (!log) return;
    for (std::size_t i = from; i < results.size(); ++i) *log << format(results[i]) << '\n';
    log->flush();
  };
  std::size_t mark = 0;
  gradient_suite<float>(opts, results);
  gradient_suite<double>(opts, results);
  flush(mark);
  mark = results.size();
  oracle_suite(opts, results);
  identity_suite(opts, results);
  metric_suite(opts, results);
  flush(mark);
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

std::string format(const CheckResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-4s %-9s %-30s %-4s n=%-3zu worst=%.3e tol=%.1e", r.passed ? "PASS" : "FAIL",
                r.suite.c_str(), r.op.c_str(), r.precision.c_str(), r.instances, r.worst, r.tolerance);
  std::string s = buf;
  if (!r.detail.empty()) s += "  (" + r.detail + ")";
  return s;
}

template double gradient_error<float>(const TensorFn<float>&, std::vector<Tensor>&, const std::vector<std::size_t>&,
                                      std::mt19937_64&, double);
template double gradient_error<double>(const TensorFn<double>&, std::vector<Tensor64>&,
                                       const std::vector<std::size_t>&, std::mt19937_64&, double);
template Tensor faulty_conv2d<float>(const Tensor&, const Tensor&, const Tensor&, std::size_t, std::size_t);
template Tensor64 faulty_conv2d<double>(const Tensor64&, const Tensor64&, const Tensor64&, std::size_t, std::size_t);

}  // namespace kasr::verify
