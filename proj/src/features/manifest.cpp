#include "vvs/features/manifest.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

#include "vvs/error.hpp"

namespace vvs::features {

using nlohmann::json;

std::string to_string(Tier tier) {
  switch (tier) {
    case Tier::DSVR: return "DSVR";
    case Tier::CSVR: return "CSVR";
    case Tier::ISVR: return "ISVR";
    case Tier::Unrelated: return "unrelated";
  }
  return "unrelated";
}

std::string to_string(Task task) {
  switch (task) {
    case Task::DSVR: return "DSVR";
    case Task::CSVR: return "CSVR";
    case Task::ISVR: return "ISVR";
  }
  return "ISVR";
}

Tier parse_tier(const std::string& s) {
  if (s == "DSVR") return Tier::DSVR;
  if (s == "CSVR") return Tier::CSVR;
  if (s == "ISVR") return Tier::ISVR;
  if (s == "unrelated") return Tier::Unrelated;
  throw ManifestError("unknown relevance tier '" + s + "'");
}

Task parse_task(const std::string& s) {
  if (s == "DSVR" || s == "dsvr") return Task::DSVR;
  if (s == "CSVR" || s == "csvr") return Task::CSVR;
  if (s == "ISVR" || s == "isvr") return Task::ISVR;
  throw ConfigError("unknown task '" + s + "' (expected DSVR, CSVR or ISVR)");
}

bool tier_relevant(Tier tier, Task task) {
  switch (task) {
    case Task::DSVR: return tier == Tier::DSVR;
    case Task::CSVR: return tier == Tier::DSVR || tier == Tier::CSVR;
    case Task::ISVR: return tier != Tier::Unrelated;
  }
  return false;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  try {
    const json j = json::parse(in);
    for (const auto& v : j.at("videos")) {
      VideoEntry e;
      e.id = v.at("id").get<std::string>();
      e.feature_path = v.at("feature_path").get<std::string>();
      e.duration_frames = v.at("duration_frames").get<std::size_t>();
      e.topic_id = v.at("topic_id").get<int>();
      e.split = v.value("split", std::string{});
      m.videos.push_back(std::move(e));
    }
    m.queries = j.at("queries").get<std::vector<std::string>>();
    for (const auto& [q, row] : j.at("relevance").items()) {
      for (const auto& [vid, tier] : row.items()) m.relevance[q][vid] = parse_tier(tier.get<std::string>());
    }
    if (j.contains("distractor_segments")) {
      for (const auto& [vid, segs] : j.at("distractor_segments").items()) {
        auto& out = m.distractor_segments[vid];
        for (const auto& s : segs) out.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
      }
    }
  } catch (const json::exception& e) {
    throw ManifestError(path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  json j;
  j["videos"] = json::array();
  for (const auto& v : videos) {
    json e{{"id", v.id}, {"feature_path", v.feature_path}, {"duration_frames", v.duration_frames},
           {"topic_id", v.topic_id}};
    if (!v.split.empty()) e["split"] = v.split;
    j["videos"].push_back(std::move(e));
  }
  j["queries"] = queries;
  j["relevance"] = json::object();
  for (const auto& [q, row] : relevance) {
    for (const auto& [vid, tier] : row) j["relevance"][q][vid] = to_string(tier);
  }
  j["distractor_segments"] = json::object();
  for (const auto& [vid, segs] : distractor_segments) {
    json arr = json::array();
    for (const auto& s : segs) arr.push_back({s.start, s.end});
    j["distractor_segments"][vid] = std::move(arr);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

void DatasetManifest::validate(bool check_paths) const {
  std::set<std::string> ids;
  for (const auto& v : videos) {
    if (v.id.empty()) throw ManifestError("video with empty id");
    if (!ids.insert(v.id).second) throw ManifestError("duplicate video id " + v.id);
    if (v.duration_frames == 0) throw ManifestError("video " + v.id + " has zero duration");
    if (check_paths && !std::filesystem::exists(resolve(v))) {
      throw ManifestError("feature file for " + v.id + " not found: " + resolve(v).string());
    }
  }
  for (const auto& q : queries) {
    if (!ids.count(q)) throw ManifestError("query " + q + " is not a listed video");
  }
  for (const auto& [q, row] : relevance) {
    if (!ids.count(q)) throw ManifestError("relevance row for unknown query " + q);
    for (const auto& [vid, tier] : row) {
      (void)tier;
      if (!ids.count(vid)) throw ManifestError("relevance of " + q + " names unknown video " + vid);
    }
  }
  // Tiers nest by construction: a video carries one tier and tasks admit
  // tier prefixes, so DSVR-relevant is inside CSVR-relevant inside ISVR-relevant.
  for (const auto& [vid, segs] : distractor_segments) {
    const auto idx = find(vid);
    if (!idx) throw ManifestError("distractor segments for unknown video " + vid);
    for (const auto& s : segs) {
      if (s.start >= s.end || s.end > videos[*idx].duration_frames) {
        throw ManifestError("segment [" + std::to_string(s.start) + "," + std::to_string(s.end) + ") out of range for " +
                            vid);
      }
    }
  }
}

std::optional<std::size_t> DatasetManifest::find(const std::string& id) const {
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].id == id) return i;
  }
  return std::nullopt;
}

const VideoEntry& DatasetManifest::video(const std::string& id) const {
  const auto idx = find(id);
  if (!idx) throw ManifestError("unknown video id " + id);
  return videos[*idx];
}

std::filesystem::path DatasetManifest::resolve(const VideoEntry& entry) const {
  std::filesystem::path p(entry.feature_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> DatasetManifest::split_ids(const std::string& split) const {
  std::vector<std::string> out;
  for (const auto& v : videos) {
    if (split.empty() || v.split == split) out.push_back(v.id);
  }
  return out;
}

std::vector<std::string> DatasetManifest::split_queries(const std::string& split) const {
  std::vector<std::string> out;
  for (const auto& q : queries) {
    if (split.empty() || video(q).split == split) out.push_back(q);
  }
  return out;
}

Tier DatasetManifest::tier(const std::string& query, const std::string& video_id) const {
  const auto row = relevance.find(query);
  if (row == relevance.end()) return Tier::Unrelated;
  const auto it = row->second.find(video_id);
  return it == row->second.end() ? Tier::Unrelated : it->second;
}

const std::vector<Segment>& DatasetManifest::segments(const std::string& id) const {
  static const std::vector<Segment> kEmpty;
  const auto it = distractor_segments.find(id);
  return it == distractor_segments.end() ? kEmpty : it->second;
}

}  // namespace vvs::features
