// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "bvqa/cli.hpp"
#include "bvqa/coral.hpp"
#include "bvqa/gradcheck.hpp"
#include "bvqa/metrics.hpp"
#include "bvqa/pretrain_losses.hpp"
#include "bvqa/ranking_losses.hpp"
#include "bvqa/temporal_head.hpp"
#include "bvqa/trainer.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace bvqa;
using namespace bvqa::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto results = run_gradcheck({.cases = 100, .seed = 0});
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_op;
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_op = r.op;
    }
  }
  return {all && worst < 1e-4 && secs < 60.0,
          fmt("%zu ops x 100 cases, max rel err %.2e (%s), %.1f s", results.size(), worst, worst_op.c_str(), secs)};
}

Outcome hysteresis_oracle() {
  Rng rng(2024);
  const std::size_t taus[] = {1, 3, 12};
  const double betas[] = {0.0, 0.5, 1.0};
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const std::size_t n = 1 + rng.below(64);
    std::vector<double> q(n);
    for (double& x : q) x = rng.uniform(-4.0, 4.0);
    const std::size_t tau = taus[rng.below(3)];
    const double beta = betas[rng.below(3)];
    const auto expected = naive_hysteresis(q, tau, beta);
    const Tensor pooled = hysteresis_pool(Tensor::vector(q), {tau, beta});
    for (std::size_t t = 0; t < n; ++t) worst = std::max(worst, std::abs(pooled[t] - expected[t]));
    worst = std::max(worst, std::abs(video_score(pooled).item() - naive_mean(expected)));
  }
  const double worked = video_score(hysteresis_pool(Tensor::vector({3, 1}), {12, 0.5})).item();
  return {worst < 1e-10 && std::abs(worked - 2.05960) < 1e-4,
          fmt("1000 sequences max abs diff %.2e; [3,1] -> %.6f", worst, worked)};
}

Outcome soft_rank_limit() {
  Rng rng(7);
  double limit = 0.0, membership = 0.0;
  for (int s = 0; s < 500; ++s) {
    const std::size_t n = 2 + rng.below(50);
    std::vector<double> x(n);
    double v = rng.uniform(-1, 1);
    for (double& e : x) {
      e = v;
      v += 0.1 + rng.uniform(0.0, 0.5);
    }
    rng.shuffle(x);
    const auto hard = hard_rank_descending(x);
    const Tensor sharp = soft_rank(Tensor::vector(x), {1e-3});
    for (std::size_t i = 0; i < n; ++i) limit = std::max(limit, std::abs(sharp[i] - hard[i]));
    for (double eps : {1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0}) {
      const Tensor r = soft_rank(Tensor::vector(x), {eps});
      double total = 0.0;
      for (double e : r.data()) total += e;
      membership = std::max(membership, std::abs(total - n * (n + 1) / 2.0));
    }
  }
  return {limit < 1e-2 && membership < 1e-8,
          fmt("eps=1e-3 max dev %.2e; rank-sum err %.2e over 6 eps", limit, membership)};
}

Outcome logistic_reparam() {
  Rng rng(13);
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    const StandardLogistic b{rng.uniform(-3, 3), rng.uniform(0.05, 3.0) * (rng.below(2) ? 1 : -1),
                             rng.uniform(-5, 5), rng.uniform(-5, 5)};
    std::vector<double> q(100);
    for (double& e : q) e = rng.uniform(-8, 8);
    const Tensor m = logistic_map(Tensor::vector(q), LogisticParams::from_values(b.network_form()));
    for (std::size_t i = 0; i < q.size(); ++i) {
      worst = std::max(worst, std::abs(m[i] - standard_logistic_oracle(q[i], b.beta1, b.beta2, b.beta3, b.beta4)));
    }
  }
  return {worst < 1e-10, fmt("100 parameterizations x 100 inputs, max abs diff %.2e", worst)};
}

Outcome fidelity_grid() {
  auto grid = [](int i) { return std::ldexp(std::round(std::ldexp(i / 100.0, 40)), -40); };
  auto f = [](double p, double q) { return fidelity_loss(Tensor::vector({p}), Tensor::vector({q})).item(); };
  double min_off = INFINITY, max_diag = 0.0, most_negative = 0.0;
  int asymmetric = 0;
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const double p = grid(i), q = grid(j);
      const double v = f(p, q);
      most_negative = std::min(most_negative, v);
      if (i == j) {
        max_diag = std::max(max_diag, std::abs(v));
      } else {
        min_off = std::min(min_off, v);
      }
      if (v != f(1.0 - p, 1.0 - q)) ++asymmetric;
    }
  }
  return {most_negative >= -1e-12 && max_diag <= 1e-12 && min_off > 1e-12 && asymmetric == 0,
          fmt("101x101: min %.1e, diag max %.1e, off-diag min %.2e, asymmetric %d", most_negative, max_diag, min_off,
              asymmetric)};
}

Outcome overfit_capacity() {
  Rng rng(1);
  const auto direction = random_direction(kFusedChannels, rng);
  SyntheticSpec spec;
  spec.videos = 64;
  spec.frames = 32;
  spec.signal_channels = 32;
  spec.signal_amplitude = 0.3;
  const Dataset data = make_synthetic(spec, direction, rng);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 3;
  cfg.early_stop_srcc = 0.95;
  const auto t0 = Clock::now();
  const TrainResult r = finetune(data, data, cfg);
  const double secs = seconds_since(t0);
  const auto& last = r.history.back();
  const double srcc = last.val_srcc.value_or(-1.0);
  return {srcc >= 0.95 && last.epoch <= 200 && secs < 300.0,
          fmt("training SRCC %.4f at epoch %d, %.1f s single-threaded", srcc, last.epoch, secs)};
}

Outcome mixed_alignment() {
  Rng rng(1);
  const auto direction = random_direction(kFusedChannels, rng);
  SyntheticSpec a;
  a.signal_amplitude = 0.2;
  a.database_id = "A";
  a.id_prefix = "t";
  SyntheticSpec b = a;
  b.database_id = "B";
  b.mos_scale = 20.0;
  b.mos_offset = 10.0;
  Dataset train = make_synthetic(a, direction, rng);
  for (auto& v : make_synthetic(b, direction, rng)) train.push_back(std::move(v));
  a.videos = b.videos = 32;
  a.id_prefix = b.id_prefix = "v";
  Dataset val = make_synthetic(a, direction, rng);
  for (auto& v : make_synthetic(b, direction, rng)) val.push_back(std::move(v));

  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.seed = 3;
  const auto t0 = Clock::now();
  const TrainResult r = finetune(train, val, cfg);
  const double secs = seconds_since(t0);
  const EvalReport rep = evaluate(r.best, val);
  const double sa = rep.databases[0].srcc.value_or(-1), sb = rep.databases[1].srcc.value_or(-1);
  const auto ga = r.best.logistic.at("A").values(), gb = r.best.logistic.at("B").values();
  double gap = 0.0;
  for (int k = 0; k < 4; ++k) gap = std::max(gap, std::abs(ga[k] - gb[k]));
  const double scale_a = rep.databases[0].logistic.beta3 - rep.databases[0].logistic.beta4;
  const double scale_b = rep.databases[1].logistic.beta3 - rep.databases[1].logistic.beta4;
  return {sa >= 0.95 && sb >= 0.95 && gap > 1e-6,
          fmt("val SRCC A %.4f B %.4f; gamma A (%.5f, %.5f, %.3f, %.3f) B (%.5f, %.5f, %.3f, %.3f), max diff %.1e; "
              "eval logistic span A %.2f B %.2f; %.1f s",
              sa, sb, ga[0], ga[1], ga[2], ga[3], gb[0], gb[1], gb[2], gb[3], gap, scale_a, scale_b, secs)};
}

Outcome evaluation_oracles() {
  Rng rng(99);
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const std::size_t n = 3 + rng.below(60);
    std::vector<double> x(n), y(n);
    const std::uint64_t levels = 2 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.below(2) ? static_cast<double>(rng.below(levels)) : rng.normal();
      y[i] = static_cast<double>(rng.below(levels)) + (rng.below(2) ? 0.0 : rng.uniform());
    }
    const auto sp = spearman(x, y), pe = pearson(x, y);
    if (!sp || !pe) continue;
    worst = std::max({worst, std::abs(*sp - spearman_oracle(x, y)), std::abs(*pe - pearson_oracle(x, y))});
  }
  double coral_err = 0.0, coral_self = 0.0;
  for (int s = 0; s < 100; ++s) {
    const std::size_t d = 1 + rng.below(10);
    auto rows = [&](std::size_t n) {
      std::vector<std::vector<double>> r(n, std::vector<double>(d));
      for (auto& row : r) {
        for (double& e : row) e = rng.normal() * (1.0 + static_cast<double>(&e - row.data()));
      }
      return r;
    };
    const auto xa = rows(2 + rng.below(30)), xb = rows(2 + rng.below(30));
    auto mat = [d](const std::vector<std::vector<double>>& r) {
      std::vector<double> flat;
      for (const auto& row : r) flat.insert(flat.end(), row.begin(), row.end());
      return Tensor::from({r.size(), d}, flat);
    };
    coral_err = std::max(coral_err, std::abs(coral_distance(mat(xa), mat(xb)) - coral_oracle(xa, xb)));
    coral_self = std::max(coral_self, std::abs(coral_distance(mat(xa), mat(xa))));
  }
  return {worst < 1e-12 && coral_err < 1e-10 && coral_self == 0.0,
          fmt("SRCC/PLCC max diff %.2e over 1000 tied vectors; CORAL max diff %.2e, self %.1e", worst, coral_err,
              coral_self)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "bvqa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  return rc;
}

Outcome determinism() {
  const auto dir = fresh_dir("acceptance_determinism");
  Rng rng(5);
  const auto direction = random_direction(64, rng);
  SyntheticSpec spec;
  spec.videos = 24;
  spec.frames = 8;
  spec.channels = spec.signal_channels = 64;
  spec.signal_amplitude = 0.3;
  spec.database_id = "a";
  const auto train_a = write_dataset(make_synthetic(spec, direction, rng), dir, "a.json");
  spec.database_id = "b";
  spec.mos_scale = 10.0;
  const auto train_b = write_dataset(make_synthetic(spec, direction, rng), dir, "b.json");
  spec.database_id = "a";
  spec.mos_scale = 1.0;
  spec.id_prefix = "val";
  spec.videos = 12;
  const auto val = write_dataset(make_synthetic(spec, direction, rng), dir, "val.json", "val");

  auto train = [&](const std::string& out) {
    return cli({"train", "--train-manifests", train_a.string(), train_b.string(), "--val-manifest", val.string(),
                "--test-manifest", val.string(), "--output-dir", (dir / out).string(), "--batch-size", "8",
                "--epochs", "3", "--reduced-dim", "16", "--hidden-size", "8", "--seed", "11"});
  };
  if (train("r1") != 0 || train("r2") != 0) return {false, "train command failed"};
  int identical = 0, compared = 0;
  for (const char* f : {"history.jsonl", "model.json", "report.json", "test_report.json"}) {
    ++compared;
    identical += slurp(dir / "r1" / f) == slurp(dir / "r2" / f);
  }
  std::string e1, e2, p1, p2;
  const auto model = (dir / "r1" / "model.json").string();
  const bool ok = cli({"eval", "--model", model, "--manifest", val.string()}, &e1) == 0 &&
                  cli({"eval", "--model", model, "--manifest", val.string(), "--threads", "4"}, &e2) == 0 &&
                  cli({"predict", "--model", model, "--manifest", val.string()}, &p1) == 0 &&
                  cli({"predict", "--model", model, "--manifest", val.string(), "--threads", "4"}, &p2) == 0;
  compared += 2;
  identical += ok && e1 == e2;
  identical += ok && p1 == p2;
  return {identical == compared, fmt("%d/%d train/eval/predict outputs byte-identical across reruns", identical,
                                     compared)};
}

}  // namespace

int main() {
  report("gradient suite", gradient_suite);
  report("hysteresis oracle", hysteresis_oracle);
  report("soft-rank limit/membership", soft_rank_limit);
  report("logistic reparameterization", logistic_reparam);
  report("fidelity-loss grid", fidelity_grid);
  report("overfit capacity", overfit_capacity);
  report("mixed-database alignment", mixed_alignment);
  report("evaluation oracle", evaluation_oracles);
  report("determinism", determinism);
  std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
