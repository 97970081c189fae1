#include "bvqa/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bvqa/errors.hpp"
#include "bvqa/rng.hpp"
#include "json.hpp"

namespace bvqa {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw DataError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw DataError(where + ": missing '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(where + ": bad '" + key + "': " + e.what());
  }
}

}  // namespace

std::filesystem::path Manifest::feature_path(const VideoRecord& record) const {
  const std::filesystem::path p(record.fused_feature_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> Manifest::database_ids() const {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (std::find(out.begin(), out.end(), r.database_id) == out.end()) out.push_back(r.database_id);
  }
  return out;
}

Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir, bool check_files) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("manifest: top level must be an object");
  reject_unknown_keys(doc, {"split", "seed", "records"}, "manifest");

  Manifest m;
  m.base_dir = base_dir;
  if (doc.contains("split")) m.split = required<std::string>(doc, "split", "manifest");
  if (doc.contains("seed")) m.seed = required<std::uint64_t>(doc, "seed", "manifest");
  if (!doc.contains("records") || !doc["records"].is_array()) throw DataError("manifest: 'records' must be an array");

  std::set<std::string> seen;
  std::vector<std::string> missing;
  std::size_t index = 0;
  for (const json& r : doc["records"]) {
    const std::string where = "manifest record " + std::to_string(index++);
    if (!r.is_object()) throw DataError(where + ": not an object");
    reject_unknown_keys(r, {"video_id", "mos", "mos_std", "database_id", "fused_feature_path"}, where);
    VideoRecord rec;
    rec.video_id = required<std::string>(r, "video_id", where);
    rec.mos = required<double>(r, "mos", where);
    if (r.contains("mos_std") && !r["mos_std"].is_null()) rec.mos_std = required<double>(r, "mos_std", where);
    rec.database_id = required<std::string>(r, "database_id", where);
    rec.fused_feature_path = required<std::string>(r, "fused_feature_path", where);
    if (!std::isfinite(rec.mos)) throw DataError(where + ": non-finite mos");
    if (!seen.insert(rec.video_id).second) throw DataError("manifest: duplicate video_id '" + rec.video_id + "'");
    m.records.push_back(std::move(rec));
    if (check_files) {
      const auto p = m.feature_path(m.records.back());
      if (!std::filesystem::exists(p)) missing.push_back(p.string());
    }
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "manifest references " << missing.size() << " missing feature file(s):";
    for (const auto& p : missing) os << "\n  " << p;
    throw DataError(os.str());
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path, bool check_files) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_manifest(buf.str(), path.parent_path(), check_files);
}

std::string manifest_to_json(const Manifest& manifest) {
  json records = json::array();
  for (const auto& r : manifest.records) {
    json j = {{"video_id", r.video_id},
              {"mos", r.mos},
              {"database_id", r.database_id},
              {"fused_feature_path", r.fused_feature_path}};
    if (r.mos_std) j["mos_std"] = *r.mos_std;
    records.push_back(std::move(j));
  }
  json doc = {{"split", manifest.split}, {"seed", manifest.seed}, {"records", std::move(records)}};
  return doc.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write manifest " + path.string());
  f << manifest_to_json(manifest);
}

ManifestSplits split_manifest(const Manifest& all, std::uint64_t seed, double train_fraction, double val_fraction) {
  if (train_fraction < 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
    throw ConfigError("split fractions must be non-negative and sum to at most 1");
  }
  std::vector<std::size_t> order(all.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto n = static_cast<double>(order.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * train_fraction));
  const auto n_val = std::min(order.size() - n_train, static_cast<std::size_t>(std::llround(n * val_fraction)));

  ManifestSplits out;
  for (Manifest* m : {&out.train, &out.val, &out.test}) {
    m->seed = seed;
    m->base_dir = all.base_dir;
  }
  out.train.split = "train";
  out.val.split = "val";
  out.test.split = "test";
  for (std::size_t i = 0; i < order.size(); ++i) {
    Manifest& dst = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    dst.records.push_back(all.records[order[i]]);
  }
  return out;
}

}  // namespace bvqa
