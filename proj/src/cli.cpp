#include "bvqa/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "bvqa/coral.hpp"
#include "bvqa/ensemble.hpp"
#include "bvqa/errors.hpp"
#include "bvqa/fusion.hpp"
#include "bvqa/gradcheck.hpp"
#include "bvqa/manifest.hpp"
#include "bvqa/metrics.hpp"
#include "bvqa/model.hpp"
#include "bvqa/pretrain.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/scores.hpp"
#include "bvqa/tensor_file.hpp"
#include "bvqa/trainer.hpp"
#include "json.hpp"

namespace bvqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

template <class T>
struct FlagValue {
  using type = T;
};
template <class T>
struct FlagValue<std::optional<T>> {
  using type = T;
};

template <class T>
T from_json(const json& j) {
  return j.get<T>();
}

// Settings that can come from a JSON config file or a command-line flag of
// the same name (underscores become dashes). Flags win.
class Settings {
 public:
  explicit Settings(CLI::App* cmd) : cmd_(cmd) {}

  template <class T>
  void add(const std::string& key, T& target, const std::string& help) {
    using F = typename FlagValue<T>::type;
    auto value = std::make_shared<F>();
    CLI::Option* opt = nullptr;
    if constexpr (std::is_same_v<F, bool>) {
      opt = cmd_->add_flag("--" + dashed(key), *value, help);
    } else {
      opt = cmd_->add_option("--" + dashed(key), *value, help);
    }
    Binding b;
    b.from_json = [&target, key](const json& j) {
      try {
        if constexpr (std::is_same_v<F, T>) {
          target = from_json<T>(j);
        } else if (j.is_null()) {
          target.reset();
        } else {
          target = from_json<F>(j);
        }
      } catch (const json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
      }
    };
    b.to_json = [&target]() -> json {
      if constexpr (std::is_same_v<F, T>) {
        return json(target);
      } else {
        return target ? json(*target) : json(nullptr);
      }
    };
    b.apply_flag = [&target, value, opt] {
      if (opt->count() > 0) target = *value;
    };
    bindings_.emplace(key, std::move(b));
  }

  // Loads the config file (explicit path, else the environment default),
  // then applies flags. A file may hold the keys directly or sections keyed
  // by command name.
  void resolve(const std::string& config_path) {
    std::string path = config_path;
    if (path.empty()) {
      if (const char* env = std::getenv(kConfigEnvVar); env && *env) path = env;
    }
    if (!path.empty()) {
      std::ifstream f(path);
      if (!f) throw ConfigError("cannot open config file " + path);
      json doc;
      try {
        f >> doc;
      } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
      }
      if (!doc.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
      if (auto it = doc.find(cmd_->get_name()); it != doc.end() && it->is_object()) doc = *it;
      for (const auto& [key, value] : doc.items()) {
        auto b = bindings_.find(key);
        if (b == bindings_.end()) throw ConfigError("unknown config key '" + key + "' in " + path);
        b->second.from_json(value);
      }
    }
    for (auto& [_, b] : bindings_) b.apply_flag();
  }

  json effective() const {
    json out = json::object();
    for (const auto& [key, b] : bindings_) out[key] = b.to_json();
    return out;
  }

 private:
  struct Binding {
    std::function<void(const json&)> from_json;
    std::function<json()> to_json;
    std::function<void()> apply_flag;
  };
  CLI::App* cmd_;
  std::map<std::string, Binding> bindings_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("an output directory is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::vector<fs::path> tensor_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == kTensorFileExtension) files.push_back(e.path());
  }
  if (files.empty()) throw ConfigError("no tensor files found in " + dir);
  std::sort(files.begin(), files.end());
  return files;
}

// Rows of one [N x D] file, or of every 2-D file in a directory stacked.
Tensor load_matrix(const std::string& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    files = tensor_files(path);
  } else {
    files.push_back(path);
  }
  std::vector<Tensor> parts;
  for (const auto& f : files) {
    Tensor t = to_tensor(read_tensor_file(f));
    if (t.rank() == 1) t = reshape(t, {1, t.numel()});
    if (t.rank() != 2) throw DataError(f.string() + ": expected a 2-D feature matrix, got " + shape_str(t.shape()));
    parts.push_back(t);
  }
  try {
    return parts.size() == 1 ? parts.front() : concat(parts, 0);
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": feature files disagree in width (" + e.what() + ")");
  }
}

std::vector<std::string> ids_of(const Manifest& m) {
  std::vector<std::string> ids;
  for (const auto& r : m.records) ids.push_back(r.video_id);
  return ids;
}

struct Labels {
  std::vector<double> mos;
  std::vector<std::string> dbs;
};

Labels labels_of(const Manifest& m) {
  Labels l;
  for (const auto& r : m.records) {
    l.mos.push_back(r.mos);
    l.dbs.push_back(r.database_id);
  }
  return l;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << std::fixed << v;
  return s.str();
}

// ---- pool -----------------------------------------------------------------

struct PoolArgs {
  std::string activations, out, stream;
};

int cmd_pool(const PoolArgs& a, std::ostream& out, std::ostream& err) {
  const Stream stream = parse_stream(a.stream);
  if (stream == Stream::kFused) throw ConfigError("pool: --stream must be spatial or motion");
  const auto files = tensor_files(a.activations);
  ensure_dir(a.out);
  std::vector<std::string> failures;
  for (const auto& f : files) {
    const std::string id = f.stem().string();
    try {
      const Tensor act = to_tensor(read_tensor_file(f));
      FeatureSequence seq{id, gap_gsp_pool(act), stream, 1};
      seq.validate();
      write_tensor_file(fs::path(a.out) / f.filename(), to_raw(seq.data));
      out << id << ": " << shape_str(act.shape()) << " -> " << shape_str(seq.data.shape()) << "\n";
    } catch (const DataError& e) {
      failures.push_back(f.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      failures.push_back(f.string() + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    err << "pool: " << failures.size() << " malformed input(s):\n";
    for (const auto& m : failures) err << "  " << m << "\n";
    return kExitData;
  }
  return kExitOk;
}

// ---- fuse -----------------------------------------------------------------

struct FuseArgs {
  std::string spatial, motion, out;
  std::size_t factor = 2;
};

int cmd_fuse(const FuseArgs& a, std::ostream& out, std::ostream& err) {
  const auto spatial = tensor_files(a.spatial);
  ensure_dir(a.out);
  std::vector<std::string> failures;
  for (const auto& f : spatial) {
    const std::string id = f.stem().string();
    const fs::path motion_path = fs::path(a.motion) / f.filename();
    try {
      if (!fs::exists(motion_path)) throw DataError("missing motion features " + motion_path.string());
      FeatureSequence s{id, to_tensor(read_tensor_file(f)), Stream::kSpatial, 1};
      FeatureSequence m{id, to_tensor(read_tensor_file(motion_path)), Stream::kMotion, a.factor};
      const FeatureSequence fused = fuse_streams(s, m, a.factor);
      write_tensor_file(fs::path(a.out) / f.filename(), to_raw(fused.data));
      out << id << ": " << shape_str(fused.data.shape()) << "\n";
    } catch (const DataError& e) {
      failures.push_back(id + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      failures.push_back(id + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    err << "fuse: " << failures.size() << " video(s) failed:\n";
    for (const auto& m : failures) err << "  " << m << "\n";
    return kExitData;
  }
  return kExitOk;
}

// ---- split ----------------------------------------------------------------

struct SplitArgs {
  std::string manifest, out;
  std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& a, std::ostream& out) {
  const Manifest all = load_manifest(a.manifest, false);
  ensure_dir(a.out);
  ManifestSplits splits = split_manifest(all, a.seed);
  const fs::path out_dir = fs::absolute(a.out);
  for (auto* m : {&splits.train, &splits.val, &splits.test}) {
    for (auto& r : m->records) {
      r.fused_feature_path = fs::absolute(all.feature_path(r)).lexically_relative(out_dir).generic_string();
    }
    save_manifest(out_dir / (m->split + ".json"), *m);
    out << m->split << ": " << m->records.size() << " videos\n";
  }
  return kExitOk;
}

// ---- train ----------------------------------------------------------------

struct TrainSettings {
  std::vector<std::string> train_manifests;
  std::string val_manifest;
  std::string test_manifest;
  std::string output_dir;
  TrainConfig cfg;
  double soft_rank_epsilon = SoftRankConfig{}.epsilon;
  std::size_t reduced_dim = kDefaultReducedDim;
  std::size_t hidden_size = kDefaultHiddenSize;
  std::size_t tau = PoolingConfig{}.tau;
  double beta = PoolingConfig{}.beta;
};

void bind_train(Settings& s, TrainSettings& t) {
  s.add("train_manifests", t.train_manifests, "training manifests (one or more databases)");
  s.add("val_manifest", t.val_manifest, "validation manifest");
  s.add("test_manifest", t.test_manifest, "optional test manifest evaluated with the selected model");
  s.add("output_dir", t.output_dir, "output directory");
  s.add("batch_size", t.cfg.batch_size, "videos per list per database");
  s.add("epochs", t.cfg.epochs, "training epochs");
  s.add("lr", t.cfg.lr, "initial learning rate");
  s.add("lr_decay", t.cfg.lr_decay, "learning-rate decay factor");
  s.add("lr_decay_every", t.cfg.lr_decay_every, "epochs between decays");
  s.add("weight_decay", t.cfg.weight_decay, "decoupled weight decay");
  s.add("lambda", t.cfg.lambda, "weight of the SRCC loss");
  s.add("seed", t.cfg.seed, "random seed");
  s.add("reduced_dim", t.reduced_dim, "width after dimension reduction");
  s.add("hidden_size", t.hidden_size, "GRU hidden size");
  s.add("tau", t.tau, "hysteresis memory duration (frames)");
  s.add("beta", t.beta, "hysteresis memory weight");
  s.add("soft_rank_epsilon", t.soft_rank_epsilon, "soft-rank regularization strength");
  s.add("early_stop_srcc", t.cfg.early_stop_srcc, "stop once validation SRCC reaches this value");
  s.add("threads", t.cfg.threads, "threads for validation prediction");
}

Dataset load_all(const std::vector<std::string>& manifests) {
  Dataset out;
  for (const auto& m : manifests) {
    Dataset d = load_dataset(load_manifest(m));
    for (auto& v : d) out.push_back(std::move(v));
  }
  return out;
}

int cmd_train(TrainSettings& t, const json& effective, std::ostream& out) {
  if (t.train_manifests.empty()) throw ConfigError("train: at least one training manifest is required");
  if (t.val_manifest.empty()) throw ConfigError("train: a validation manifest is required");
  t.cfg.pooling = {t.tau, t.beta};
  t.cfg.soft_rank = {t.soft_rank_epsilon};
  ensure_dir(t.output_dir);
  const fs::path dir(t.output_dir);
  write_text(dir / "config.json", effective.dump(2) + "\n");

  const Dataset train = load_all(t.train_manifests);
  const Dataset val = load_all({t.val_manifest});
  if (train.empty()) throw DataError("train: empty training manifest");
  t.cfg.head = {train.front().features.dim(1), t.reduced_dim, t.hidden_size};
  t.cfg.validate();

  std::ofstream history(dir / "history.jsonl", std::ios::trunc | std::ios::binary);
  if (!history) throw DataError("cannot write history");
  const TrainResult result = finetune(train, val, t.cfg, [&](const EpochRecord& r) {
    history << r.to_json_line() << "\n";
    history.flush();
    out << "epoch " << r.epoch << " lr " << r.lr << " loss " << fmt(r.train_loss) << " val_srcc "
        << (r.val_srcc ? fmt(*r.val_srcc) : "null") << " val_plcc " << (r.val_plcc ? fmt(*r.val_plcc) : "null")
        << "\n";
  });
  save_model(dir / "model.json", result.best);
  const EvalReport val_report = evaluate(result.best, val, t.cfg.threads);
  write_text(dir / "report.json", val_report.to_json());
  out << "best epoch " << result.best_epoch << "\n";
  if (!t.test_manifest.empty()) {
    const EvalReport test_report = evaluate(result.best, load_all({t.test_manifest}), t.cfg.threads);
    write_text(dir / "test_report.json", test_report.to_json());
  }
  return kExitOk;
}

// ---- pretrain ---------------------------------------------------------------

struct PretrainSettings {
  std::string pairs;
  std::string output_dir;
  std::vector<std::size_t> hidden_dims{64};
  PretrainConfig cfg;
};

void bind_pretrain(Settings& s, PretrainSettings& p) {
  s.add("pairs", p.pairs, "pair list JSON");
  s.add("output_dir", p.output_dir, "output directory");
  s.add("hidden_dims", p.hidden_dims, "MLP hidden layer widths");
  s.add("epochs", p.cfg.epochs, "training epochs");
  s.add("batch_size", p.cfg.batch_size, "pairs per batch");
  s.add("lr", p.cfg.lr, "initial learning rate");
  s.add("lr_decay", p.cfg.lr_decay, "learning-rate decay factor");
  s.add("lr_decay_every", p.cfg.lr_decay_every, "epochs between decays");
  s.add("weight_decay", p.cfg.weight_decay, "decoupled weight decay");
  s.add("eta", p.cfg.loss.eta, "hinge margin");
  s.add("nu", p.cfg.loss.nu, "hinge weight");
  s.add("seed", p.cfg.seed, "random seed");
}

int cmd_pretrain(PretrainSettings& p, const json& effective, std::ostream& out) {
  if (p.pairs.empty()) throw ConfigError("pretrain: --pairs is required");
  p.cfg.validate();
  ensure_dir(p.output_dir);
  const fs::path dir(p.output_dir);
  write_text(dir / "config.json", effective.dump(2) + "\n");

  const auto records = load_pair_list(p.pairs);
  const auto samples = load_pair_samples(records, fs::path(p.pairs).parent_path());
  if (samples.empty()) throw DataError("pretrain: no usable pairs (all have equal sigmas?)");
  Rng rng(p.cfg.seed);
  MlpQualityModel model(samples.front().feat_x.size(), p.hidden_dims, rng);
  const auto history = pretrain(samples, model, p.cfg);

  std::string lines;
  for (const auto& h : history) {
    lines += json{{"epoch", h.epoch}, {"lr", h.lr}, {"loss", h.loss}, {"fidelity", h.fidelity}, {"hinge", h.hinge}}
                 .dump() +
             "\n";
    out << "epoch " << h.epoch << " lr " << h.lr << " loss " << fmt(h.loss) << " fidelity " << fmt(h.fidelity)
        << " hinge " << fmt(h.hinge) << "\n";
  }
  write_text(dir / "history.jsonl", lines);
  json tensors = json::object();
  for (const auto& prm : model.parameters()) {
    tensors[prm.name] = {{"shape", prm.tensor.shape()},
                         {"data", std::vector<double>(prm.tensor.data().begin(), prm.tensor.data().end())}};
  }
  json doc = {{"format", "bvqa-mlp"},
              {"version", 1},
              {"input_dim", model.input_dim()},
              {"hidden_dims", p.hidden_dims},
              {"tensors", tensors}};
  write_text(dir / "model.json", doc.dump() + "\n");
  return kExitOk;
}

// ---- pairs -------------------------------------------------------------------

struct PairsArgs {
  std::string images, out;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  bool cross_database = false;
};

int cmd_pairs(const PairsArgs& a, std::ostream& out) {
  std::ifstream f(a.images);
  if (!f) throw DataError("cannot open image list " + a.images);
  std::vector<ImageRecord> images;
  try {
    json doc;
    f >> doc;
    for (const auto& j : doc) {
      images.push_back({j.at("id").get<std::string>(), j.at("mu").get<double>(), j.at("sigma").get<double>(),
                        j.value("database_id", std::string()), j.at("feat_path").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw DataError("image list " + a.images + ": " + e.what());
  }
  const auto pairs = sample_pairs(images, a.count, a.seed, !a.cross_database);
  save_pair_list(a.out, pairs);
  out << pairs.size() << " pairs written to " << a.out << "\n";
  return kExitOk;
}

// ---- predict / eval ----------------------------------------------------------

struct ModelRunArgs {
  std::string model, manifest, predictions, out;
  std::size_t threads = 1;
};

std::vector<double> scores_for(const ModelRunArgs& a, const Manifest& m) {
  if (!a.model.empty() && !a.predictions.empty()) throw ConfigError("give either --model or --predictions");
  if (!a.model.empty()) {
    return predict(load_model(a.model), load_dataset(m), a.threads);
  }
  if (!a.predictions.empty()) return align_scores(read_scores(a.predictions), ids_of(m));
  throw ConfigError("one of --model or --predictions is required");
}

int cmd_predict(const ModelRunArgs& a, std::ostream& out) {
  const Manifest m = load_manifest(a.manifest);
  const auto scores = predict(load_model(a.model), load_dataset(m), a.threads);
  std::vector<VideoScore> rows;
  for (std::size_t i = 0; i < scores.size(); ++i) rows.push_back({m.records[i].video_id, scores[i]});
  if (a.out.empty()) {
    out << scores_to_jsonl(rows);
  } else {
    write_scores(a.out, rows);
  }
  return kExitOk;
}

int cmd_eval(const ModelRunArgs& a, std::ostream& out) {
  const Manifest m = load_manifest(a.manifest, !a.model.empty());
  const auto scores = scores_for(a, m);
  const Labels l = labels_of(m);
  const EvalReport report = evaluate_predictions(scores, l.mos, l.dbs);
  const std::string text = report.to_json();
  if (!a.out.empty()) write_text(a.out, text);
  out << text;
  return kExitOk;
}

// ---- coral / ensemble / gradcheck ------------------------------------------------

struct CoralArgs {
  std::string a, b;
};

int cmd_coral(const CoralArgs& c, std::ostream& out) {
  const Tensor a = load_matrix(c.a);
  const Tensor b = load_matrix(c.b);
  const double d = coral_distance(a, b);
  out << json{{"coral", d}, {"dim", a.dim(1)}, {"n_a", a.dim(0)}, {"n_b", b.dim(0)}}.dump() << "\n";
  return kExitOk;
}

struct EnsembleArgs {
  std::string a, b, out, manifest;
  std::optional<double> kappa;
  bool sweep = false;
};

int cmd_ensemble(const EnsembleArgs& e, std::ostream& out) {
  const auto a = read_scores(e.a);
  std::vector<std::string> ids;
  for (const auto& s : a) ids.push_back(s.video_id);
  const auto b = align_scores(read_scores(e.b), ids);
  std::vector<double> va;
  for (const auto& s : a) va.push_back(s.score);

  if (e.sweep) {
    if (e.manifest.empty()) throw ConfigError("ensemble --sweep needs --manifest");
    const Manifest m = load_manifest(e.manifest, false);
    const auto ma = align_scores(a, ids_of(m));
    const auto mb = align_scores(read_scores(e.b), ids_of(m));
    const Labels l = labels_of(m);
    const KappaSweep sweep = sweep_kappa(ma, mb, l.mos, l.dbs);
    json curve = json::array();
    for (const auto& [k, s] : sweep.curve) curve.push_back({k, s});
    const json doc = {{"best_kappa", sweep.best_kappa},
                      {"report", json::parse(sweep.best_report.to_json())},
                      {"curve", curve}};
    if (!e.out.empty()) write_text(e.out, doc.dump(2) + "\n");
    out << doc.dump(2) << "\n";
    return kExitOk;
  }
  if (!e.kappa) throw ConfigError("ensemble needs --kappa or --sweep");
  const auto mixed = ensemble(va, b, *e.kappa);
  std::vector<VideoScore> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) rows.push_back({ids[i], mixed[i]});
  if (e.out.empty()) {
    out << scores_to_jsonl(rows);
  } else {
    write_scores(e.out, rows);
  }
  return kExitOk;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t cases = 100;
  bool json_output = false;
};

int cmd_gradcheck(const GradcheckArgs& g, std::ostream& out) {
  if (g.cases < 1) throw ConfigError("--cases must be >= 1");
  const auto results = run_gradcheck({.cases = g.cases, .seed = g.seed});
  bool ok = true;
  json doc = json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    if (g.json_output) {
      doc.push_back({{"op", r.op}, {"cases", r.cases}, {"max_rel_err", r.max_relative_error}, {"passed", r.passed}});
    } else {
      std::ostringstream line;
      line << std::left << std::setw(36) << r.op << std::scientific << std::setprecision(3) << r.max_relative_error
           << "  " << (r.passed ? "PASS" : "FAIL") << "\n";
      out << line.str();
    }
  }
  if (g.json_output) out << doc.dump(2) << "\n";
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blind video quality assessment: training and evaluation on precomputed features", "bvqa"};
  app.require_subcommand(1);
  std::string config_path;

  PoolArgs pool_args;
  auto* pool = app.add_subcommand("pool", "GAP+GSP pooling of raw activation tensors");
  pool->add_option("--activations", pool_args.activations, "directory of [T x H x W x C] tensor files")->required();
  pool->add_option("--out", pool_args.out, "output directory")->required();
  pool->add_option("--stream", pool_args.stream, "spatial or motion")
      ->required()
      ->check(CLI::IsMember({"spatial", "motion"}));

  FuseArgs fuse_args;
  auto* fuse_cmd = app.add_subcommand("fuse", "subsample the spatial stream and concatenate with motion");
  fuse_cmd->add_option("--spatial", fuse_args.spatial, "directory of [T x 4096] files")->required();
  fuse_cmd->add_option("--motion", fuse_args.motion, "directory of [T/2 x 512] files with matching names")
      ->required();
  fuse_cmd->add_option("--out", fuse_args.out, "output directory")->required();
  fuse_cmd->add_option("--factor", fuse_args.factor, "temporal subsampling factor")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "seeded 60/20/20 train/val/test split of a manifest");
  split->add_option("--manifest", split_args.manifest, "manifest to split")->required();
  split->add_option("--out", split_args.out, "output directory")->required();
  split->add_option("--seed", split_args.seed, "random seed")->capture_default_str();

  TrainSettings train_settings;
  auto* train = app.add_subcommand("train", "fine-tune the temporal head with the mixed loss");
  train->add_option("--config", config_path, std::string("JSON config (default: $") + kConfigEnvVar + ")");
  Settings train_opts(train);
  bind_train(train_opts, train_settings);

  PretrainSettings pretrain_settings;
  auto* pre = app.add_subcommand("pretrain", "pairwise quality-aware pre-training of an MLP frame model");
  pre->add_option("--config", config_path, std::string("JSON config (default: $") + kConfigEnvVar + ")");
  Settings pretrain_opts(pre);
  bind_pretrain(pretrain_opts, pretrain_settings);

  PairsArgs pairs_args;
  auto* pairs = app.add_subcommand("pairs", "sample a pair list from an image list");
  pairs->add_option("--images", pairs_args.images, "JSON array of {id, mu, sigma, database_id, feat_path}")
      ->required();
  pairs->add_option("--count", pairs_args.count, "number of pairs")->required();
  pairs->add_option("--out", pairs_args.out, "output pair list")->required();
  pairs->add_option("--seed", pairs_args.seed, "random seed")->capture_default_str();
  pairs->add_flag("--cross-database", pairs_args.cross_database, "allow pairs across databases");

  ModelRunArgs predict_args;
  auto* pred = app.add_subcommand("predict", "write {video_id, Q_p} JSON lines for a manifest");
  pred->add_option("--model", predict_args.model, "model file")->required();
  pred->add_option("--manifest", predict_args.manifest, "manifest")->required();
  pred->add_option("--out", predict_args.out, "output file (default: stdout)");
  pred->add_option("--threads", predict_args.threads, "worker threads")->capture_default_str();

  ModelRunArgs eval_args;
  auto* eval = app.add_subcommand("eval", "SRCC/PLCC report per database");
  eval->add_option("--manifest", eval_args.manifest, "manifest with MOS labels")->required();
  eval->add_option("--model", eval_args.model, "model file");
  eval->add_option("--predictions", eval_args.predictions, "score file (JSON lines)");
  eval->add_option("--out", eval_args.out, "also write the report here");
  eval->add_option("--threads", eval_args.threads, "worker threads")->capture_default_str();

  CoralArgs coral_args;
  auto* coral = app.add_subcommand("coral", "CORAL distance between two feature sets");
  coral->add_option("--a", coral_args.a, "[N x D] tensor file or directory of them")->required();
  coral->add_option("--b", coral_args.b, "[N x D] tensor file or directory of them")->required();

  EnsembleArgs ens_args;
  auto* ens = app.add_subcommand("ensemble", "convex combination of two score files");
  ens->add_option("--a", ens_args.a, "first score file")->required();
  ens->add_option("--b", ens_args.b, "second score file")->required();
  ens->add_option("--kappa", ens_args.kappa, "weight of the first file")->check(CLI::Range(0.0, 1.0));
  ens->add_flag("--sweep", ens_args.sweep, "search kappa in steps of 0.01 against --manifest");
  ens->add_option("--manifest", ens_args.manifest, "labels for --sweep");
  ens->add_option("--out", ens_args.out, "output file (default: stdout)");

  GradcheckArgs gc_args;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  gc->add_option("--seed", gc_args.seed, "random seed")->capture_default_str();
  gc->add_option("--cases", gc_args.cases, "random cases per op")->capture_default_str();
  gc->add_flag("--json", gc_args.json_output, "print JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*pool) return cmd_pool(pool_args, out, err);
    if (*fuse_cmd) return cmd_fuse(fuse_args, out, err);
    if (*split) return cmd_split(split_args, out);
    if (*train) {
      train_opts.resolve(config_path);
      return cmd_train(train_settings, train_opts.effective(), out);
    }
    if (*pre) {
      pretrain_opts.resolve(config_path);
      return cmd_pretrain(pretrain_settings, pretrain_opts.effective(), out);
    }
    if (*pairs) return cmd_pairs(pairs_args, out);
    if (*pred) return cmd_predict(predict_args, out);
    if (*eval) return cmd_eval(eval_args, out);
    if (*coral) return cmd_coral(coral_args, out);
    if (*ens) return cmd_ensemble(ens_args, out);
    if (*gc) return cmd_gradcheck(gc_args, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitConfig;
}

}  // namespace bvqa
