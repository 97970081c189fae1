#include "bvqa/model.hpp"

#include <fstream>
#include <sstream>

#include "bvqa/errors.hpp"
#include "json.hpp"

namespace bvqa {

using nlohmann::json;

namespace {

constexpr const char* kModelFormat = "bvqa-model";
constexpr int kModelVersion = 1;

json tensor_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
}

Tensor tensor_from_json(const json& j, const std::string& name, const Shape& expected) {
  if (!j.contains(name)) throw DataError("model: missing tensor '" + name + "'");
  const json& t = j.at(name);
  auto shape = t.at("shape").get<Shape>();
  if (shape != expected) {
    throw DataError("model: tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                    shape_str(expected));
  }
  return Tensor::from(std::move(shape), t.at("data").get<std::vector<double>>(), true);
}

}  // namespace

ParamList ModelParams::parameters() const {
  ParamList out = head.parameters();
  for (const auto& [db, lp] : logistic) {
    for (auto& p : lp.parameters("logistic." + db)) out.push_back(std::move(p));
  }
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams m;
  m.head = head.clone();
  m.pooling = pooling;
  for (const auto& [db, lp] : logistic) m.logistic.emplace(db, lp.clone());
  return m;
}

std::string model_to_json(const ModelParams& model) {
  json tensors = json::object();
  for (const auto& p : model.head.parameters()) tensors[p.name] = tensor_json(p.tensor);
  json logistic = json::object();
  for (const auto& [db, lp] : model.logistic) logistic[db] = lp.values();
  const HeadConfig& hc = model.head.config;
  json doc = {{"format", kModelFormat},
              {"version", kModelVersion},
              {"head", {{"input_dim", hc.input_dim}, {"reduced_dim", hc.reduced_dim}, {"hidden_size", hc.hidden_size}}},
              {"pooling", {{"tau", model.pooling.tau}, {"beta", model.pooling.beta}}},
              {"tensors", std::move(tensors)},
              {"logistic", std::move(logistic)}};
  return doc.dump() + "\n";
}

ModelParams model_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("format", "") != kModelFormat) throw DataError("model: not a bvqa model file");
    if (doc.value("version", 0) != kModelVersion) throw DataError("model: unsupported version");
    ModelParams m;
    HeadConfig hc;
    hc.input_dim = doc.at("head").at("input_dim").get<std::size_t>();
    hc.reduced_dim = doc.at("head").at("reduced_dim").get<std::size_t>();
    hc.hidden_size = doc.at("head").at("hidden_size").get<std::size_t>();
    hc.validate();
    m.pooling.tau = doc.at("pooling").at("tau").get<std::size_t>();
    m.pooling.beta = doc.at("pooling").at("beta").get<double>();
    m.pooling.validate();

    const json& t = doc.at("tensors");
    const std::size_t in = hc.input_dim, red = hc.reduced_dim, h = hc.hidden_size;
    HeadParams& hp = m.head;
    hp.config = hc;
    hp.reduce_weight = tensor_from_json(t, "reduce.weight", {in, red});
    hp.reduce_bias = tensor_from_json(t, "reduce.bias", {red});
    hp.gru.w_r = tensor_from_json(t, "gru.w_r", {red, h});
    hp.gru.w_z = tensor_from_json(t, "gru.w_z", {red, h});
    hp.gru.w_n = tensor_from_json(t, "gru.w_n", {red, h});
    hp.gru.u_r = tensor_from_json(t, "gru.u_r", {h, h});
    hp.gru.u_z = tensor_from_json(t, "gru.u_z", {h, h});
    hp.gru.u_n = tensor_from_json(t, "gru.u_n", {h, h});
    hp.gru.b_r = tensor_from_json(t, "gru.b_r", {h});
    hp.gru.b_z = tensor_from_json(t, "gru.b_z", {h});
    hp.gru.b_n = tensor_from_json(t, "gru.b_n", {h});
    hp.score_weight = tensor_from_json(t, "score.weight", {h, 1});
    hp.score_bias = tensor_from_json(t, "score.bias", {1});
    for (const auto& [db, g] : doc.at("logistic").items()) {
      m.logistic.emplace(db, LogisticParams::from_values(g.get<std::array<double, 4>>()));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model: malformed file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModelParams& model) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write model " + path.string());
  f << model_to_json(model);
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open model " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace bvqa
