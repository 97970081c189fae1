#pragma once

// Video score files: JSON lines {"video_id": ..., "Q_p": ...}.

#include <filesystem>
#include <string>
#include <vector>

namespace bvqa {

struct VideoScore {
  std::string video_id;
  double score = 0.0;
  bool operator==(const VideoScore&) const = default;
};

std::string scores_to_jsonl(const std::vector<VideoScore>& scores);
std::vector<VideoScore> parse_scores(const std::string& text, const std::string& origin = "<memory>");
std::vector<VideoScore> read_scores(const std::filesystem::path& path);
void write_scores(const std::filesystem::path& path, const std::vector<VideoScore>& scores);

// Scores reordered to follow `ids`; throws DataError listing any id without a score.
std::vector<double> align_scores(const std::vector<VideoScore>& scores, const std::vector<std::string>& ids);

}  // namespace bvqa
