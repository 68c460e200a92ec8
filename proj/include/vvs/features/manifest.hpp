#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vvs::features {

// Relevance of a database video to a query, strictest first.
enum class Tier { DSVR, CSVR, ISVR, Unrelated };
// Retrieval task; each admits a nested set of tiers.
enum class Task { DSVR, CSVR, ISVR };

std::string to_string(Tier tier);
std::string to_string(Task task);
Tier parse_tier(const std::string& s);
Task parse_task(const std::string& s);
// DSVR admits {DSVR}; CSVR adds CSVR; ISVR adds ISVR.
bool tier_relevant(Tier tier, Task task);

struct Segment {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
};

inline constexpr const char* kBackgroundSplit = "background";

struct VideoEntry {
  std::string id;
  std::string feature_path;  // relative paths resolve against the manifest directory
  std::size_t duration_frames = 0;
  int topic_id = -1;
  std::string split;  // "train", "val", "eval", "background" or empty
};

struct DatasetManifest {
  std::vector<VideoEntry> videos;
  std::vector<std::string> queries;
  std::map<std::string, std::map<std::string, Tier>> relevance;
  std::map<std::string, std::vector<Segment>> distractor_segments;
  std::filesystem::path base_dir;

  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Checks ids, tiers, segments and (when check_paths) that feature files exist.
  void validate(bool check_paths = true) const;

  const VideoEntry& video(const std::string& id) const;
  std::optional<std::size_t> find(const std::string& id) const;
  std::filesystem::path resolve(const VideoEntry& entry) const;
  std::vector<std::string> split_ids(const std::string& split) const;
  // Queries whose own video belongs to `split` (all queries when split is empty).
  std::vector<std::string> split_queries(const std::string& split) const;
  Tier tier(const std::string& query, const std::string& video) const;
  const std::vector<Segment>& segments(const std::string& id) const;
};

}  // namespace vvs::features
