// Python bindings. Arrays cross the boundary as float64 numpy arrays except
// tensor files, which keep their float32 payload.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "bvqa/cli.hpp"
#include "bvqa/coral.hpp"
#include "bvqa/ensemble.hpp"
#include "bvqa/errors.hpp"
#include "bvqa/fusion.hpp"
#include "bvqa/gradcheck.hpp"
#include "bvqa/metrics.hpp"
#include "bvqa/pretrain_losses.hpp"
#include "bvqa/ranking_losses.hpp"
#include "bvqa/temporal_head.hpp"
#include "bvqa/tensor_file.hpp"

namespace py = pybind11;
using namespace bvqa;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const F64& a, bool requires_grad = false) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  std::vector<double> values(a.data(), a.data() + a.size());
  if (shape.empty()) return Tensor::scalar(values[0], requires_grad);
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

Tensor to_vector(const F64& a, bool requires_grad = false) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
  return to_tensor(a, requires_grad);
}

py::array_t<double> to_numpy(std::span<const double> values, const Shape& shape) {
  std::vector<py::ssize_t> dims(shape.begin(), shape.end());
  py::array_t<double> out(dims);
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

py::array_t<double> to_numpy(const Tensor& t) { return to_numpy(t.data(), t.shape()); }

std::span<const double> span_of(const F64& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

// Scalar loss value and its gradient with respect to `input`.
py::tuple value_and_grad(const Tensor& loss, const Tensor& input) {
  loss.backward();
  return py::make_tuple(loss.item(), to_numpy(input.grad_or_zeros(), input.shape()));
}

py::object optional_to_py(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict report_to_dict(const EvalReport& report) {
  py::list dbs;
  for (const auto& d : report.databases) {
    py::dict item;
    item["database_id"] = d.database_id;
    item["n"] = d.n;
    item["srcc"] = optional_to_py(d.srcc);
    item["plcc"] = optional_to_py(d.plcc);
    item["degenerate"] = d.degenerate;
    item["logistic_used"] = d.logistic_used;
    item["logistic"] = py::make_tuple(d.logistic.beta1, d.logistic.beta2, d.logistic.beta3, d.logistic.beta4);
    dbs.append(item);
  }
  py::dict out;
  out["databases"] = dbs;
  out["weighted_srcc"] = optional_to_py(report.weighted_srcc);
  out["weighted_plcc"] = optional_to_py(report.weighted_plcc);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Blind video quality assessment core";

  auto base = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  (void)base;

  // Tensor files.
  m.def("read_tensor", [](const std::string& path) {
    RawTensor raw = read_tensor_file(path);
    std::vector<py::ssize_t> dims(raw.dims.begin(), raw.dims.end());
    py::array_t<float> out(dims);
    std::copy(raw.values.begin(), raw.values.end(), out.mutable_data());
    return out;
  }, py::arg("path"));
  m.def("write_tensor", [](const std::string& path, const F32& a) {
    RawTensor raw{Shape(a.shape(), a.shape() + a.ndim()), std::vector<float>(a.data(), a.data() + a.size())};
    write_tensor_file(path, raw);
  }, py::arg("path"), py::arg("array"));

  // Features.
  m.def("gap_gsp_pool", [](const F64& activation) { return to_numpy(gap_gsp_pool(to_tensor(activation))); },
        py::arg("activation"), "[T, H, W, C] -> [T, 2C]: spatial mean then spatial standard deviation.");
  m.def("temporal_subsample", [](const F64& seq, std::size_t factor) {
    return to_numpy(temporal_subsample(to_tensor(seq), factor));
  }, py::arg("sequence"), py::arg("factor") = 2);
  m.def("fuse", [](const F64& spatial, const F64& motion) {
    return to_numpy(fuse(to_tensor(spatial), to_tensor(motion)));
  }, py::arg("spatial"), py::arg("motion"));

  // Pre-training losses.
  m.def("pair_probability", py::overload_cast<double, double, double, double>(&pair_probability),
        py::arg("mu_x"), py::arg("mu_y"), py::arg("sigma_x"), py::arg("sigma_y"));
  m.def("fidelity_loss", [](const F64& p_true, const F64& p_pred) {
    NoGradGuard guard;
    return to_numpy(fidelity_loss(to_vector(p_true), to_vector(p_pred)));
  }, py::arg("p_true"), py::arg("p_pred"));

  // Temporal pooling.
  m.def("hysteresis_pool", [](const F64& scores, std::size_t tau, double beta) {
    NoGradGuard guard;
    return to_numpy(hysteresis_pool(to_vector(scores), PoolingConfig{tau, beta}));
  }, py::arg("frame_scores"), py::arg("tau") = 12, py::arg("beta") = 0.5);
  m.def("video_score", [](const F64& scores, std::size_t tau, double beta) {
    NoGradGuard guard;
    return video_score(hysteresis_pool(to_vector(scores), PoolingConfig{tau, beta})).item();
  }, py::arg("frame_scores"), py::arg("tau") = 12, py::arg("beta") = 0.5);

  // Ranking losses.
  m.def("soft_rank", [](const F64& scores, double epsilon) {
    NoGradGuard guard;
    return to_numpy(soft_rank(to_vector(scores), SoftRankConfig{epsilon}));
  }, py::arg("scores"), py::arg("epsilon") = 1.0);
  m.def("hard_rank", [](const F64& values) {
    auto r = hard_rank_descending(span_of(values));
    return to_numpy(r, {r.size()});
  }, py::arg("values"));
  m.def("plcc_loss", [](const F64& mapped, const F64& targets) {
    Tensor x = to_vector(mapped, true);
    return value_and_grad(plcc_loss(x, span_of(targets)), x);
  }, py::arg("mapped_scores"), py::arg("targets"), "Returns (loss, d loss / d mapped_scores).");
  m.def("srcc_loss", [](const F64& scores, const F64& targets, double epsilon) {
    Tensor x = to_vector(scores, true);
    return value_and_grad(srcc_loss(x, span_of(targets), SoftRankConfig{epsilon}), x);
  }, py::arg("scores"), py::arg("targets"), py::arg("epsilon") = 1.0, "Returns (loss, d loss / d scores).");
  m.def("mixed_loss", [](const F64& scores, const F64& targets, std::array<double, 4> gammas, double lambda,
                         double epsilon) {
    Tensor x = to_vector(scores, true);
    return value_and_grad(mixed_loss(x, span_of(targets), LogisticParams::from_values(gammas), lambda,
                                     SoftRankConfig{epsilon}),
                          x);
  }, py::arg("scores"), py::arg("targets"), py::arg("gammas") = std::array<double, 4>{1, 0, 1, 0},
     py::arg("lam") = 1.0, py::arg("epsilon") = 1.0, "Returns (loss, d loss / d scores).");
  m.def("logistic_map", [](const F64& scores, std::array<double, 4> gammas) {
    NoGradGuard guard;
    return to_numpy(logistic_map(to_vector(scores), LogisticParams::from_values(gammas)));
  }, py::arg("scores"), py::arg("gammas"));
  m.def("standard_logistic", [](double q, std::array<double, 4> betas) {
    return StandardLogistic{betas[0], betas[1], betas[2], betas[3]}(q);
  }, py::arg("q"), py::arg("betas"));

  // Evaluation.
  m.def("spearman", [](const F64& a, const F64& b) { return spearman(span_of(a), span_of(b)); });
  m.def("pearson", [](const F64& a, const F64& b) { return pearson(span_of(a), span_of(b)); });
  m.def("evaluate_predictions", [](const F64& predictions, const F64& mos, const std::vector<std::string>& ids) {
    return report_to_dict(evaluate_predictions(span_of(predictions), span_of(mos), ids));
  }, py::arg("predictions"), py::arg("mos"), py::arg("database_ids"));
  m.def("coral_distance", [](const F64& a, const F64& b) { return coral_distance(to_tensor(a), to_tensor(b)); },
        py::arg("features_a"), py::arg("features_b"));
  m.def("ensemble", [](const F64& a, const F64& b, double kappa) {
    auto out = ensemble(span_of(a), span_of(b), kappa);
    return to_numpy(out, {out.size()});
  }, py::arg("scores_a"), py::arg("scores_b"), py::arg("kappa"));

  // Tooling.
  m.def("run_gradcheck", [](std::size_t cases, std::uint64_t seed) {
    py::list out;
    for (const auto& r : run_gradcheck(GradCheckOptions{cases, seed})) {
      py::dict d;
      d["op"] = r.op;
      d["cases"] = r.cases;
      d["max_relative_error"] = r.max_relative_error;
      d["passed"] = r.passed;
      out.append(d);
    }
    return out;
  }, py::arg("cases") = 10, py::arg("seed") = 0);
  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"bvqa"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command line tool in-process. Returns (exit_code, stdout, stderr).");
}
