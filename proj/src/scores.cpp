#include "bvqa/scores.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "bvqa/errors.hpp"
#include "json.hpp"

namespace bvqa {

using nlohmann::json;

std::string scores_to_jsonl(const std::vector<VideoScore>& scores) {
  std::string out;
  for (const auto& s : scores) {
    out += json{{"video_id", s.video_id}, {"Q_p", s.score}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<VideoScore> parse_scores(const std::string& text, const std::string& origin) {
  std::vector<VideoScore> out;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      VideoScore s{j.at("video_id").get<std::string>(), j.at("Q_p").get<double>()};
      if (!seen.emplace(s.video_id, line_no).second) throw DataError(where + ": duplicate video_id " + s.video_id);
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<VideoScore> read_scores(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open score file " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_scores(buf.str(), path.string());
}

void write_scores(const std::filesystem::path& path, const std::vector<VideoScore>& scores) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw DataError("cannot write score file " + path.string());
  f << scores_to_jsonl(scores);
}

std::vector<double> align_scores(const std::vector<VideoScore>& scores, const std::vector<std::string>& ids) {
  std::map<std::string, double> by_id;
  for (const auto& s : scores) by_id.emplace(s.video_id, s.score);
  std::vector<double> out;
  std::string missing;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      missing += (missing.empty() ? "" : ", ") + id;
    } else {
      out.push_back(it->second);
    }
  }
  if (!missing.empty()) throw DataError("no score for: " + missing);
  return out;
}

}  // namespace bvqa
