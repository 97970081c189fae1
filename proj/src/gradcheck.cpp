#include "bvqa/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "bvqa/pretrain_losses.hpp"
#include "bvqa/ranking_losses.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/temporal_head.hpp"

namespace bvqa {

double gradient_relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

double check_gradient(const std::function<Tensor()>& objective, const std::vector<Tensor>& inputs, double h) {
  for (Tensor t : inputs) t.zero_grad();
  GradTape::clear();
  objective().backward();
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : inputs) analytic.push_back(t.grad_or_zeros());

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor t = inputs[k];
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = objective().item();
      data[i] = saved - h;
      const double down = objective().item();
      data[i] = saved;
      worst = std::max(worst, gradient_relative_error(analytic[k][i], (up - down) / (2.0 * h)));
    }
  }
  for (Tensor t : inputs) t.zero_grad();
  return worst;
}

namespace {

struct Case {
  std::function<Tensor()> objective;
  std::vector<Tensor> inputs;
};

using CaseFactory = std::function<Case(Rng&)>;

Tensor uniform_tensor(Rng& rng, Shape shape, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

bool well_separated(std::span<const double> v, double gap) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] - s[i - 1] < gap) return false;
  }
  return true;
}

// Values whose pairwise gaps all exceed `gap`, so no min or sort tie sits
// inside the finite-difference stencil.
std::vector<double> separated_values(Rng& rng, std::size_t n, double lo, double hi, double gap = 1e-3) {
  std::vector<double> v(n);
  do {
    for (double& x : v) x = rng.uniform(lo, hi);
  } while (!well_separated(v, gap));
  return v;
}

// Contracts the op output with fixed random weights so that every entry of
// the Jacobian contributes to the checked gradient.
Case contracted(Rng& rng, std::function<Tensor()> op, std::vector<Tensor> inputs) {
  Shape shape;
  {
    NoGradGuard no_grad;
    shape = op().shape();
  }
  std::vector<double> w(shape_numel(shape));
  for (double& x : w) x = rng.normal();
  const Tensor weights = Tensor::from(shape, std::move(w));
  return {[op = std::move(op), weights] { return sum(op() * weights); }, std::move(inputs)};
}

Case unary(Rng& rng, Tensor (*fn)(const Tensor&), double lo, double hi) {
  Tensor x = uniform_tensor(rng, {2, 3}, lo, hi);
  return contracted(rng, [x, fn] { return fn(x); }, {x});
}

Case binary(Rng& rng, Tensor (*fn)(const Tensor&, const Tensor&)) {
  Tensor a = uniform_tensor(rng, {3, 2}, -2.0, 2.0);
  Tensor b = uniform_tensor(rng, {3, 2}, 0.5, 2.0);
  return contracted(rng, [a, b, fn] { return fn(a, b); }, {a, b});
}

HeadConfig small_head() { return {.input_dim = 6, .reduced_dim = 4, .hidden_size = 3}; }

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

PoolingConfig random_pooling(Rng& rng) {
  static constexpr std::size_t kTaus[] = {1, 3, 12};
  static constexpr double kBetas[] = {0.0, 0.5, 1.0};
  return {kTaus[rng.below(3)], kBetas[rng.below(3)]};
}

std::vector<double> random_targets(Rng& rng, std::size_t n) { return separated_values(rng, n, 1.0, 5.0); }

std::vector<std::pair<std::string, CaseFactory>> suite() {
  std::vector<std::pair<std::string, CaseFactory>> s;
  s.emplace_back("add", [](Rng& r) { return binary(r, &add); });
  s.emplace_back("sub", [](Rng& r) { return binary(r, &sub); });
  s.emplace_back("mul", [](Rng& r) { return binary(r, &mul); });
  s.emplace_back("div", [](Rng& r) { return binary(r, &div); });
  s.emplace_back("scalar_broadcast", [](Rng& r) {
    Tensor a = uniform_tensor(r, {4}, -2.0, 2.0);
    Tensor c = uniform_tensor(r, {1}, 0.5, 2.0);
    return contracted(r, [a, c] { return (a + c) * c - c / (a * a + 1.0) + a / c; }, {a, c});
  });
  s.emplace_back("neg", [](Rng& r) { return unary(r, &neg, -2.0, 2.0); });
  s.emplace_back("exp", [](Rng& r) { return unary(r, &exp, -2.0, 2.0); });
  s.emplace_back("log", [](Rng& r) { return unary(r, &log, 0.5, 3.0); });
  s.emplace_back("sqrt", [](Rng& r) { return unary(r, &sqrt, 0.5, 3.0); });
  s.emplace_back("square", [](Rng& r) { return unary(r, &square, -2.0, 2.0); });
  s.emplace_back("sigmoid", [](Rng& r) { return unary(r, &sigmoid, -4.0, 4.0); });
  s.emplace_back("tanh", [](Rng& r) { return unary(r, &tanh, -3.0, 3.0); });
  s.emplace_back("softplus", [](Rng& r) { return unary(r, &softplus, -4.0, 4.0); });
  s.emplace_back("normal_cdf", [](Rng& r) { return unary(r, &normal_cdf, -3.0, 3.0); });
  s.emplace_back("maximum", [](Rng& r) {
    std::vector<double> v(6);
    for (double& x : v) {
      do {
        x = r.uniform(-1.0, 1.0);
      } while (std::abs(x - 0.1) < 1e-3);
    }
    Tensor x = Tensor::from({6}, v, true);
    return contracted(r, [x] { return maximum(x, 0.1); }, {x});
  });
  s.emplace_back("matmul", [](Rng& r) {
    Tensor a = uniform_tensor(r, {3, 4}, -1.0, 1.0);
    Tensor b = uniform_tensor(r, {4, 2}, -1.0, 1.0);
    return contracted(r, [a, b] { return matmul(a, b); }, {a, b});
  });
  s.emplace_back("linear", [](Rng& r) {
    Tensor x = uniform_tensor(r, {3, 4}, -1.0, 1.0);
    Tensor w = uniform_tensor(r, {4, 2}, -1.0, 1.0);
    Tensor b = uniform_tensor(r, {2}, -1.0, 1.0);
    return contracted(r, [x, w, b] { return linear(x, w, b); }, {x, w, b});
  });
  s.emplace_back("sum", [](Rng& r) {
    Tensor x = uniform_tensor(r, {5}, -1.0, 1.0);
    return contracted(r, [x] { return sum(x) * sum(x); }, {x});
  });
  s.emplace_back("mean", [](Rng& r) {
    Tensor x = uniform_tensor(r, {5}, -1.0, 1.0);
    return contracted(r, [x] { return mean(x) * mean(x); }, {x});
  });
  s.emplace_back("std_dev", [](Rng& r) {
    Tensor x = uniform_tensor(r, {6}, -1.0, 1.0);
    return contracted(r, [x] { return std_dev(x); }, {x});
  });
  s.emplace_back("min", [](Rng& r) {
    Tensor x = Tensor::from({6}, separated_values(r, 6, -1.0, 1.0), true);
    return contracted(r, [x] { return min(x); }, {x});
  });
  s.emplace_back("sum_axis", [](Rng& r) {
    Tensor x = uniform_tensor(r, {3, 4}, -1.0, 1.0);
    return contracted(r, [x] { return concat({sum(x, 0), sum(x, 1)}, 0); }, {x});
  });
  s.emplace_back("mean_axis", [](Rng& r) {
    Tensor x = uniform_tensor(r, {3, 4}, -1.0, 1.0);
    return contracted(r, [x] { return concat({mean(x, 0), mean(x, 1)}, 0); }, {x});
  });
  s.emplace_back("std_dev_axis", [](Rng& r) {
    Tensor x = uniform_tensor(r, {3, 4}, -1.0, 1.0);
    return contracted(r, [x] { return concat({std_dev(x, 0), std_dev(x, 1)}, 0); }, {x});
  });
  s.emplace_back("min_axis", [](Rng& r) {
    Tensor x = Tensor::from({3, 4}, separated_values(r, 12, -1.0, 1.0), true);
    return contracted(r, [x] { return concat({min(x, 0).values, min(x, 1).values}, 0); }, {x});
  });
  s.emplace_back("reshape_slice_row", [](Rng& r) {
    Tensor x = uniform_tensor(r, {4, 3}, -1.0, 1.0);
    return contracted(
        r, [x] { return concat({reshape(slice(x, 1, 3), {6}), reshape(row(x, 3), {3}), stack({element(x, 0), element(x, 5)})}, 0); },
        {x});
  });
  s.emplace_back("concat", [](Rng& r) {
    Tensor a = uniform_tensor(r, {2, 3}, -1.0, 1.0);
    Tensor b = uniform_tensor(r, {2, 2}, -1.0, 1.0);
    Tensor c = uniform_tensor(r, {1, 3}, -1.0, 1.0);
    return contracted(
        r, [a, b, c] { return concat({reshape(concat({a, b}, 1), {10}), reshape(concat({a, c}, 0), {9})}, 0); },
        {a, b, c});
  });

  s.emplace_back("pair_probability", [](Rng& r) {
    Tensor mx = uniform_tensor(r, {4}, 1.0, 5.0);
    Tensor my = uniform_tensor(r, {4}, 1.0, 5.0);
    Tensor sx = uniform_tensor(r, {4}, 0.3, 1.5);
    Tensor sy = uniform_tensor(r, {4}, 0.3, 1.5);
    return contracted(r, [=] { return pair_probability(mx, my, sx, sy); }, {mx, my, sx, sy});
  });
  s.emplace_back("fidelity_loss", [](Rng& r) {
    Tensor p = uniform_tensor(r, {5}, 0.02, 0.98);
    Tensor q = uniform_tensor(r, {5}, 0.02, 0.98);
    return contracted(r, [p, q] { return fidelity_loss(p, q); }, {p, q});
  });
  s.emplace_back("std_hinge_loss", [](Rng& r) {
    const double eta = kDefaultHingeMargin;
    double stx, sty, px, py;
    do {
      stx = r.uniform(0.1, 1.0);
      sty = r.uniform(0.1, 1.0);
      px = r.uniform(0.1, 1.0);
      // Half the draws land near the margin so the active branch is covered.
      py = r.below(2) == 0 ? r.uniform(0.1, 1.0) : px + r.uniform(-0.05, 0.05);
    } while (stx == sty || std::abs(eta - (stx > sty ? 1.0 : -1.0) * (px - py)) < 1e-3);
    Tensor sx = Tensor::scalar(px, true);
    Tensor sy = Tensor::scalar(py, true);
    return Case{[=] { return std_hinge_loss(stx, sty, sx, sy, eta) * 3.0; }, {sx, sy}};
  });
  s.emplace_back("pretrain_batch_loss", [](Rng& r) {
    for (;;) {
      auto model = std::make_shared<MlpQualityModel>(4, std::vector<std::size_t>{5}, r);
      std::vector<PairSample> batch;
      for (int i = 0; i < 3; ++i) {
        std::vector<double> fx(4), fy(4);
        for (double& v : fx) v = r.normal();
        for (double& v : fy) v = r.normal();
        double sx = r.uniform(0.2, 1.0), sy = r.uniform(0.2, 1.0);
        batch.push_back(make_pair_sample("x", "y", fx, fy, r.uniform(1, 5), r.uniform(1, 5), sx, sy));
      }
      // Reject draws that put a hinge on its kink.
      bool smooth = true;
      {
        NoGradGuard no_grad;
        for (const auto& ps : batch) {
          const auto ox = model->forward(Tensor::from({1, 4}, ps.feat_x));
          const auto oy = model->forward(Tensor::from({1, 4}, ps.feat_y));
          const double margin = kDefaultHingeMargin - ps.g * (ox.sigma.item() - oy.sigma.item());
          smooth = smooth && std::abs(margin) > 1e-3;
        }
      }
      if (!smooth) continue;
      return Case{[model, batch] { return pretrain_batch_loss(batch, *model).total; }, tensors_of(model->parameters())};
    }
  });
  s.emplace_back("composite_fidelity_sigmoid_matmul", [](Rng& r) {
    Tensor a = uniform_tensor(r, {3, 4}, -1.0, 1.0);
    Tensor b = uniform_tensor(r, {4, 1}, -1.0, 1.0);
    const Tensor target = Tensor::from({3, 1}, {r.uniform(0.1, 0.9), r.uniform(0.1, 0.9), r.uniform(0.1, 0.9)});
    return Case{[a, b, target] { return sum(fidelity_loss(target, sigmoid(matmul(a, b)))); }, {a, b}};
  });

  s.emplace_back("gru_cell", [](Rng& r) {
    HeadParams hp = HeadParams::random(small_head(), r);
    for (Tensor* b : {&hp.gru.b_r, &hp.gru.b_z, &hp.gru.b_n}) {
      for (double& v : b->mutable_data()) v = r.uniform(-0.5, 0.5);
    }
    Tensor x = uniform_tensor(r, {1, 4}, -1.0, 1.0);
    Tensor h = uniform_tensor(r, {1, 3}, -0.9, 0.9);
    const GruParams g = hp.gru;
    std::vector<Tensor> in = {x, h, g.w_r, g.w_z, g.w_n, g.u_r, g.u_z, g.u_n, g.b_r, g.b_z, g.b_n};
    return contracted(r, [x, h, g] { return gru_cell(x, h, g); }, in);
  });
  s.emplace_back("head_forward", [](Rng& r) {
    HeadParams hp = HeadParams::random(small_head(), r);
    Tensor feats = uniform_tensor(r, {5, 6}, -1.0, 1.0);
    auto in = tensors_of(hp.parameters());
    in.push_back(feats);
    return contracted(r, [hp, feats] { return head_forward(feats, hp); }, in);
  });
  s.emplace_back("hysteresis_pool", [](Rng& r) {
    const std::size_t t = 1 + r.below(16);
    Tensor q = Tensor::from({t}, separated_values(r, t, 0.0, 5.0), true);
    const PoolingConfig cfg = random_pooling(r);
    return contracted(r, [q, cfg] { return hysteresis_pool(q, cfg); }, {q});
  });
  s.emplace_back("video_score", [](Rng& r) {
    Tensor q = uniform_tensor(r, {1 + r.below(10)}, 0.0, 5.0);
    return contracted(r, [q] { return video_score(q); }, {q});
  });
  s.emplace_back("predict_video", [](Rng& r) {
    for (;;) {
      HeadParams hp = HeadParams::random(small_head(), r);
      for (double& v : hp.score_weight.mutable_data()) v *= 4.0;
      Tensor feats = uniform_tensor(r, {6, 6}, -1.0, 1.0);
      std::vector<double> frame;
      {
        NoGradGuard no_grad;
        const Tensor q = head_forward(feats, hp);
        frame.assign(q.data().begin(), q.data().end());
      }
      if (!well_separated(frame, 1e-3)) continue;
      const PoolingConfig cfg = random_pooling(r);
      auto in = tensors_of(hp.parameters());
      in.push_back(feats);
      return Case{[hp, feats, cfg] { return predict_video(feats, hp, cfg) * 10.0; }, in};
    }
  });

  s.emplace_back("logistic_map", [](Rng& r) {
    Tensor q = uniform_tensor(r, {5}, -2.0, 2.0);
    LogisticParams lp = LogisticParams::from_values(
        {r.uniform(0.5, 2.0), r.uniform(-1.0, 1.0), r.uniform(0.5, 3.0), r.uniform(-1.0, 1.0)});
    std::vector<Tensor> in = {q, lp.gamma1, lp.gamma2, lp.gamma3, lp.gamma4};
    return contracted(r, [q, lp] { return logistic_map(q, lp); }, in);
  });
  s.emplace_back("soft_rank", [](Rng& r) {
    const std::size_t n = 2 + r.below(7);
    Tensor sc = Tensor::from({n}, separated_values(r, n, -2.0, 2.0, 1e-2), true);
    const SoftRankConfig cfg{r.uniform(0.2, 2.0)};
    return contracted(r, [sc, cfg] { return soft_rank(sc, cfg); }, {sc});
  });
  s.emplace_back("plcc_loss", [](Rng& r) {
    const std::size_t n = 3 + r.below(6);
    Tensor m = uniform_tensor(r, {n}, -2.0, 2.0);
    const auto targets = random_targets(r, n);
    return Case{[m, targets] { return plcc_loss(m, targets); }, {m}};
  });
  s.emplace_back("srcc_loss", [](Rng& r) {
    const std::size_t n = 3 + r.below(6);
    Tensor sc = Tensor::from({n}, separated_values(r, n, -2.0, 2.0, 1e-2), true);
    const auto targets = random_targets(r, n);
    const SoftRankConfig cfg{r.uniform(0.2, 2.0)};
    return Case{[sc, targets, cfg] { return srcc_loss(sc, targets, cfg); }, {sc}};
  });
  s.emplace_back("mixed_loss", [](Rng& r) {
    const std::size_t n = 3 + r.below(6);
    Tensor sc = Tensor::from({n}, separated_values(r, n, -2.0, 2.0, 1e-2), true);
    const auto targets = random_targets(r, n);
    LogisticParams lp = LogisticParams::from_values(
        {r.uniform(0.5, 2.0), r.uniform(-1.0, 1.0), r.uniform(0.5, 3.0), r.uniform(-1.0, 1.0)});
    const double lambda = r.uniform(0.0, 2.0);
    const SoftRankConfig cfg{r.uniform(0.2, 2.0)};
    std::vector<Tensor> in = {sc, lp.gamma1, lp.gamma2, lp.gamma3, lp.gamma4};
    return Case{[=] { return mixed_loss(sc, targets, lp, lambda, cfg); }, in};
  });
  return s;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options) {
  std::vector<GradCheckResult> results;
  const auto cases = suite();
  for (std::size_t op = 0; op < cases.size(); ++op) {
    const auto& [name, factory] = cases[op];
    Rng rng(options.seed * 1000003ULL + op);
    GradCheckResult res{name, options.cases, 0.0, false};
    for (std::size_t c = 0; c < options.cases; ++c) {
      const Case k = factory(rng);
      res.max_relative_error = std::max(res.max_relative_error, check_gradient(k.objective, k.inputs, options.h));
    }
    res.passed = res.max_relative_error < options.tolerance;
    results.push_back(res);
  }
  return results;
}

}  // namespace bvqa
