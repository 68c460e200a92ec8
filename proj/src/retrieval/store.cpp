#include "vvs/retrieval/store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "vvs/error.hpp"
#include "vvs/features/binary_io.hpp"

namespace vvs::retrieval {

void EmbeddingStore::add(const std::string& id, std::span<const float> embedding) {
  if (id.empty() || id.size() > 0xFFFF) throw Error("embedding id must be 1..65535 bytes");
  if (dim_ == 0) dim_ = embedding.size();
  if (embedding.size() != dim_ || dim_ == 0) {
    throw DimensionError("embedding for " + id + " has dimension " + std::to_string(embedding.size()) +
                         ", store expects " + std::to_string(dim_));
  }
  double norm = 0.0;
  for (float v : embedding) norm += double(v) * v;
  if (!std::isfinite(norm) || std::fabs(std::sqrt(norm) - 1.0) > kUnitTolerance) {
    throw Error("embedding for " + id + " is not unit-norm (norm " + std::to_string(std::sqrt(norm)) + ")");
  }
  const auto it = std::lower_bound(records_.begin(), records_.end(), id,
                                   [](const StoreRecord& r, const std::string& key) { return r.id < key; });
  if (it != records_.end() && it->id == id) throw Error("duplicate embedding id " + id);
  records_.insert(it, StoreRecord{id, {embedding.begin(), embedding.end()}});
}

const StoreRecord* EmbeddingStore::find(const std::string& id) const {
  const auto it = std::lower_bound(records_.begin(), records_.end(), id,
                                   [](const StoreRecord& r, const std::string& key) { return r.id < key; });
  return it != records_.end() && it->id == id ? &*it : nullptr;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write embedding store " + path.string());
  io::write_magic(out, "VVSE");
  io::write_le<std::uint32_t>(out, kStoreVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(records_.size()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  for (const auto& r : records_) {
    io::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.id.size()));
    out.write(r.id.data(), std::streamsize(r.id.size()));
    io::write_floats(out, r.embedding);
  }
  if (!out) throw Error("failed writing embedding store " + path.string());
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding store " + path.string());
  const std::string src = path.string();
  io::expect_magic(in, "VVSE", src);
  if (io::read_le<std::uint32_t>(in, "version") != kStoreVersion) throw FormatError(src + ": unsupported version");
  const auto count = io::read_le<std::uint32_t>(in, "count");
  const auto dim = io::read_le<std::uint32_t>(in, "dim");
  EmbeddingStore store(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = io::read_le<std::uint16_t>(in, "id length");
    std::string id(len, '\0');
    in.read(id.data(), len);
    if (!in) throw FormatError(src + ": truncated id");
    store.add(id, io::read_floats(in, dim, src.c_str()));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(src + ": trailing bytes");
  return store;
}

float score(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("score: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * b[i];
  return static_cast<float>(acc);
}

namespace {

RankedList finish(const EmbeddingStore& store, const std::vector<float>& scores, std::size_t topk,
                  const std::string& query_id) {
  RankedList out;
  out.query_id = query_id;
  const auto& recs = store.records();
  out.entries.reserve(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].id != query_id) out.entries.push_back({recs[i].id, scores[i]});
  }
  // Records are id-sorted, so a stable sort by score alone breaks ties by id.
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const RankedEntry& a, const RankedEntry& b) { return a.score > b.score; });
  if (topk > 0 && out.entries.size() > topk) out.entries.resize(topk);
  return out;
}

void check_query(const EmbeddingStore& store, std::span<const float> q) {
  if (q.size() != store.dim()) {
    throw DimensionError("query dimension " + std::to_string(q.size()) + " vs store " + std::to_string(store.dim()));
  }
}

}  // namespace

RankedList search(const EmbeddingStore& store, std::span<const float> q, std::size_t topk,
                  const std::string& query_id) {
  check_query(store, q);
  std::vector<float> scores(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) scores[i] = score(q, store.records()[i].embedding);
  return finish(store, scores, topk, query_id);
}

RankedList search_parallel(const EmbeddingStore& store, std::span<const float> q, std::size_t topk,
                           const std::string& query_id, std::size_t threads) {
  check_query(store, q);
  const std::size_t n = store.size();
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, n));
  std::vector<float> scores(n);
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t lo = w * n / threads, hi = (w + 1) * n / threads;
    workers.emplace_back([&, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) scores[i] = score(q, store.records()[i].embedding);
    });
  }
  for (auto& t : workers) t.join();
  return finish(store, scores, topk, query_id);
}

}  // namespace vvs::retrieval
