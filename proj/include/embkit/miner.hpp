#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "embkit/data.hpp"
#include "embkit/error.hpp"
#include "embkit/matrix.hpp"
#include "embkit/model.hpp"

namespace embkit {

// Exact cosine index over unit-norm document embeddings.
struct CorpusIndex {
  std::vector<std::string> doc_ids;
  std::vector<std::string> texts;
  std::vector<std::string> tasks;
  Matrix vectors;  // M x d_out
  std::unordered_map<std::string, std::size_t> row_of;

  std::size_t size() const noexcept { return doc_ids.size(); }

  std::optional<std::size_t> find(const std::string& id) const {
    const auto it = row_of.find(id);
    if (it == row_of.end()) {
      return std::nullopt;
    }
    return it->second;
  }
};

inline CorpusIndex build_index(const ModelParams& model, const std::vector<Document>& documents) {
  if (documents.empty()) {
    throw Error(ErrorCode::InsufficientData, "cannot index an empty document set");
  }
  CorpusIndex index;
  index.vectors = Matrix(documents.size(), model.d_out());
  for (std::size_t i = 0; i < documents.size(); ++i) {
    const auto& d = documents[i];
    if (!index.row_of.emplace(d.id, i).second) {
      throw Error(ErrorCode::DuplicateId, "document id '" + d.id + "' appears twice");
    }
    EmbeddingVector v;
    try {
      v = embed_text(model, tokenize(d.text, model.tokenizer, false));
    } catch (const Error& e) {
      rethrow_with_context(e, "document '" + d.id + "'");
    }
    std::copy(v.values.begin(), v.values.end(), index.vectors.row(i).begin());
    index.doc_ids.push_back(d.id);
    index.texts.push_back(d.text);
    index.tasks.push_back(d.task);
  }
  return index;
}

struct ScoredDoc {
  std::string doc_id;
  double similarity = 0.0;
  std::size_t row = 0;

  friend bool operator==(const ScoredDoc& a, const ScoredDoc& b) {
    return a.doc_id == b.doc_id && a.similarity == b.similarity;
  }
};

// Descending similarity, ties by ascending id.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.similarity != b.similarity) {
    return a.similarity > b.similarity;
  }
  return a.doc_id < b.doc_id;
}

inline std::vector<ScoredDoc> top_k(const CorpusIndex& index, const EmbeddingVector& query, std::size_t k,
                                    const std::optional<std::string>& task_filter = std::nullopt) {
  std::vector<ScoredDoc> scored;
  scored.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (task_filter && index.tasks[i] != *task_filter) {
      continue;
    }
    const double s = std::clamp(dot(query.values, index.vectors.row(i)), -1.0, 1.0);
    scored.push_back({index.doc_ids[i], s, i});
  }
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    ranks_before);
  scored.resize(keep);
  return scored;
}

struct MinedNegative {
  std::string doc_id;
  std::string text;
  std::optional<double> similarity;
  bool padded = false;
};

struct MinedPair {
  TrainingPair pair;
  std::vector<MinedNegative> negatives;

  // Copy of the pair with negative texts filled in, ready for training.
  TrainingPair to_training_pair() const {
    TrainingPair p = pair;
    p.negatives.clear();
    for (const auto& n : negatives) {
      p.negatives.push_back(n.text);
    }
    return p;
  }
};

struct MiningOptions {
  std::size_t num_negatives = 7;
  std::optional<double> margin_filter;  // drop sim > sim_pos - m
  std::size_t buffer = 0;               // 0 means 2K
  std::uint64_t seed = 0;
};

namespace detail {

inline std::size_t locate_positive(const CorpusIndex& index, const TrainingPair& p, std::size_t pair_no) {
  if (!p.pos_id.empty()) {
    if (auto row = index.find(p.pos_id)) {
      return *row;
    }
  } else {
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index.tasks[i] == p.task && index.texts[i] == p.positive) {
        return i;
      }
    }
  }
  throw Error(ErrorCode::PositiveMissingFromIndex,
              "pair " + std::to_string(pair_no) + ": positive not found in the index");
}

inline std::mt19937_64 pair_rng(std::uint64_t seed, std::size_t pair_no) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(pair_no), static_cast<std::uint32_t>(pair_no >> 32)};
  return std::mt19937_64(seq);
}

// Uniform draws without replacement from candidate rows, in draw order.
inline std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> rows, std::size_t count,
                                                         std::mt19937_64& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
    std::swap(rows[i], rows[pick(rng)]);
  }
  rows.resize(count);
  return rows;
}

}  // namespace detail

// Mines K same-task negatives per pair with the given (backbone) model:
// top (K + buffer) search, drop the gold positive and byte-identical copies
// of it, optional margin filter, then pad with seeded uniform draws.
inline std::vector<MinedPair> mine_hard_negatives(const std::vector<TrainingPair>& pairs, const ModelParams& model,
                                                  const CorpusIndex& index, const MiningOptions& opt = {}) {
  const std::size_t k = opt.num_negatives;
  const std::size_t buffer = opt.buffer == 0 ? 2 * k : opt.buffer;
  std::unordered_map<std::string, std::size_t> task_pool;
  for (const auto& t : index.tasks) {
    ++task_pool[t];
  }
  std::vector<MinedPair> out;
  out.reserve(pairs.size());
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const TrainingPair& p = pairs[pi];
    const std::size_t gold = detail::locate_positive(index, p, pi);
    const std::string& task = index.tasks[gold];
    if (task_pool[task] < k + 1) {
      throw Error(ErrorCode::PoolTooSmall, "task '" + task + "' has " + std::to_string(task_pool[task]) +
                                               " documents, need at least " + std::to_string(k + 1));
    }
    EmbeddingVector q;
    try {
      q = embed_text(model, tokenize(p.query, model.tokenizer, true));
    } catch (const Error& e) {
      rethrow_with_context(e, "pair " + std::to_string(pi) + " query");
    }
    const double pos_sim = std::clamp(dot(q.values, index.vectors.row(gold)), -1.0, 1.0);
    const std::string& pos_text = index.texts[gold];

    MinedPair mp;
    mp.pair = p;
    mp.pair.pos_id = index.doc_ids[gold];
    mp.pair.task = task;
    std::unordered_set<std::size_t> used;
    for (const auto& c : top_k(index, q, k + buffer, task)) {
      if (mp.negatives.size() == k) {
        break;
      }
      if (c.row == gold || index.texts[c.row] == pos_text) {
        continue;
      }
      if (opt.margin_filter && c.similarity > pos_sim - *opt.margin_filter) {
        continue;
      }
      mp.negatives.push_back({c.doc_id, index.texts[c.row], c.similarity, false});
      used.insert(c.row);
    }
    if (mp.negatives.size() < k) {
      std::vector<std::size_t> remaining;
      for (std::size_t i = 0; i < index.size(); ++i) {
        if (index.tasks[i] == task && i != gold && index.texts[i] != pos_text && !used.count(i)) {
          remaining.push_back(i);
        }
      }
      const std::size_t need = k - mp.negatives.size();
      if (remaining.size() < need) {
        throw Error(ErrorCode::PoolTooSmall, "pair " + std::to_string(pi) +
                                                 ": not enough distinct same-task documents to pad negatives");
      }
      auto rng = detail::pair_rng(opt.seed, pi);
      for (const std::size_t row : detail::draw_without_replacement(std::move(remaining), need, rng)) {
        const double s = std::clamp(dot(q.values, index.vectors.row(row)), -1.0, 1.0);
        mp.negatives.push_back({index.doc_ids[row], index.texts[row], s, true});
      }
    }
    out.push_back(std::move(mp));
  }
  return out;
}

// Vanilla baseline: K uniform same-task draws without replacement, gold excluded.
inline std::vector<MinedPair> random_negatives(const std::vector<TrainingPair>& pairs, const std::vector<Document>& pool,
                                               std::size_t k, std::uint64_t seed) {
  std::vector<MinedPair> out;
  out.reserve(pairs.size());
  std::unordered_map<std::string, std::vector<std::size_t>> by_task;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    by_task[pool[i].task].push_back(i);
  }
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const TrainingPair& p = pairs[pi];
    const auto& rows = by_task[p.task];
    if (rows.size() < k + 1) {
      throw Error(ErrorCode::PoolTooSmall, "task '" + p.task + "' has " + std::to_string(rows.size()) +
                                               " documents, need at least " + std::to_string(k + 1));
    }
    std::vector<std::size_t> candidates;
    for (const std::size_t r : rows) {
      const bool is_gold = p.pos_id.empty() ? pool[r].text == p.positive : pool[r].id == p.pos_id;
      if (!is_gold) {
        candidates.push_back(r);
      }
    }
    if (candidates.size() < k) {
      throw Error(ErrorCode::PoolTooSmall, "pair " + std::to_string(pi) + ": too few non-positive documents");
    }
    auto rng = detail::pair_rng(seed, pi);
    MinedPair mp;
    mp.pair = p;
    for (const std::size_t r : detail::draw_without_replacement(std::move(candidates), k, rng)) {
      mp.negatives.push_back({pool[r].id, pool[r].text, std::nullopt, false});
    }
    out.push_back(std::move(mp));
  }
  return out;
}

inline nlohmann::json mined_pair_to_json(const MinedPair& mp) {
  std::vector<std::string> negs;
  for (const auto& n : mp.negatives) {
    negs.push_back(n.text);
  }
  return {{"query", mp.pair.query}, {"pos", mp.pair.positive}, {"negs", negs},
          {"task", mp.pair.task}, {"lang", mp.pair.lang}};
}

inline void write_mined_pairs(const std::filesystem::path& path, const std::vector<MinedPair>& mined) {
  std::vector<nlohmann::json> rows;
  rows.reserve(mined.size());
  for (const auto& mp : mined) {
    rows.push_back(mined_pair_to_json(mp));
  }
  write_lines(path, rows);
}

inline std::vector<TrainingPair> to_training_pairs(const std::vector<MinedPair>& mined) {
  std::vector<TrainingPair> out;
  out.reserve(mined.size());
  for (const auto& mp : mined) {
    out.push_back(mp.to_training_pair());
  }
  return out;
}

}  // namespace embkit
