#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vvs::retrieval {

inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr double kUnitTolerance = 1e-3;

struct StoreRecord {
  std::string id;
  std::vector<float> embedding;
};

// Unit-norm video embeddings kept sorted by id.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim = 0) : dim_(dim) {}

  // Throws on duplicate ids, dimension mismatch or a non-unit vector.
  void add(const std::string& id, std::span<const float> embedding);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<StoreRecord>& records() const { return records_; }
  const StoreRecord* find(const std::string& id) const;

  // "VVSE" | version u32 | count u32 | dim u32 | per record { id_len u16 | id | dim f32 }.
  void save(const std::filesystem::path& path) const;
  static EmbeddingStore load(const std::filesystem::path& path);

 private:
  std::size_t dim_;
  std::vector<StoreRecord> records_;
};

struct RankedEntry {
  std::string video_id;
  float score = 0.0f;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;  // score desc, ties by ascending id
};

// Scores every record by cosine similarity with q (both unit-norm). A record
// whose id equals `query_id` is left out. topk == 0 keeps everything.
RankedList search(const EmbeddingStore& store, std::span<const float> q, std::size_t topk = 0,
                  const std::string& query_id = {});

// Same result as search(), scoring contiguous shards on `threads` workers.
RankedList search_parallel(const EmbeddingStore& store, std::span<const float> q, std::size_t topk,
                           const std::string& query_id, std::size_t threads);

// Cosine score used everywhere in ranking: double accumulation, float result.
float score(std::span<const float> a, std::span<const float> b);

}  // namespace vvs::retrieval
