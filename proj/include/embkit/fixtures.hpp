#pragma once

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "embkit/data.hpp"
#include "embkit/eval.hpp"

namespace embkit::fixtures {

// Synthetic corpora with a known relevance structure, used by the tests and
// the experiment demos. Words are opaque tokens such as "c3q17".

struct Fixture {
  std::vector<TrainingPair> train;
  std::vector<Document> pool;  // positives of the training pairs, one id each
  RetrievalTask eval;
};

namespace detail {

inline std::string draw_words(const std::vector<std::string>& vocab, std::size_t count, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += ' ';
    out += vocab[pick(rng)];
  }
  return out;
}

inline std::string draw_distinct(std::vector<std::string> vocab, std::size_t count, std::mt19937_64& rng) {
  std::shuffle(vocab.begin(), vocab.end(), rng);
  std::string out;
  for (std::size_t i = 0; i < count && i < vocab.size(); ++i) {
    if (i) out += ' ';
    out += vocab[i];
  }
  return out;
}

inline std::vector<std::string> make_vocab(const std::string& prefix, std::size_t n) {
  std::vector<std::string> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back(prefix + std::to_string(i));
  }
  return v;
}

inline std::string concat(const std::string& a, const std::string& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return a + " " + b;
}

}  // namespace detail

struct ClusterSpec {
  std::string prefix = "";  // namespaces vocab and ids, e.g. a language tag
  std::string task = "clusters";
  std::string lang = "xx";
  std::size_t clusters = 10;
  std::size_t query_vocab = 30;
  std::size_t doc_vocab = 30;
  std::size_t query_len = 6;
  std::size_t doc_len = 12;
  std::size_t train_pairs = 200;
  std::size_t eval_queries_per_cluster = 5;
  std::size_t eval_docs_per_cluster = 10;
};

// Queries and documents of a cluster draw from disjoint vocabularies, so an
// untrained encoder has nothing to match on; every eval doc of a cluster is
// relevant (grade 1) to every eval query of that cluster.
inline Fixture cluster_fixture(const ClusterSpec& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::string>> qv, dv;
  for (std::size_t c = 0; c < s.clusters; ++c) {
    const std::string base = s.prefix + "c" + std::to_string(c);
    qv.push_back(detail::make_vocab(base + "q", s.query_vocab));
    dv.push_back(detail::make_vocab(base + "d", s.doc_vocab));
  }
  Fixture f;
  for (std::size_t i = 0; i < s.train_pairs; ++i) {
    const std::size_t c = i % s.clusters;
    TrainingPair p;
    p.query = detail::draw_words(qv[c], s.query_len, rng);
    p.positive = detail::draw_words(dv[c], s.doc_len, rng);
    p.task = s.task;
    p.lang = s.lang;
    p.pos_id = s.prefix + "train-" + std::to_string(i);
    f.pool.push_back({p.pos_id, p.positive, p.task, p.lang});
    f.train.push_back(std::move(p));
  }
  f.eval.name = s.prefix + s.task + "-eval";
  f.eval.language = s.lang;
  for (std::size_t c = 0; c < s.clusters; ++c) {
    std::vector<std::string> docs;
    for (std::size_t d = 0; d < s.eval_docs_per_cluster; ++d) {
      const std::string id = "c" + std::to_string(c) + "-d" + std::to_string(d);
      f.eval.corpus[id] = detail::draw_words(dv[c], s.doc_len, rng);
      docs.push_back(id);
    }
    for (std::size_t q = 0; q < s.eval_queries_per_cluster; ++q) {
      const std::string id = "c" + std::to_string(c) + "-q" + std::to_string(q);
      f.eval.queries[id] = detail::draw_words(qv[c], s.query_len, rng);
      for (const auto& d : docs) {
        f.eval.qrels[id][d] = 1;
      }
    }
  }
  return f;
}

inline ClusterSpec separable_spec() {
  ClusterSpec s;
  s.task = "separable";
  s.clusters = 40;
  s.query_vocab = 8;
  s.doc_vocab = 8;
  s.query_len = 4;
  s.doc_len = 8;
  s.train_pairs = 200;
  s.eval_queries_per_cluster = 2;
  s.eval_docs_per_cluster = 5;
  return s;
}

// 200 pairs over 40 disjoint-vocabulary clusters.
inline Fixture separable_fixture(std::uint64_t seed = 7) { return cluster_fixture(separable_spec(), seed); }

struct DistractorSpec {
  std::string task = "distractor";
  std::string lang = "xx";
  std::size_t topics = 25;
  std::size_t subtopics = 8;
  std::size_t topic_vocab = 3;
  std::size_t sub_vocab = 3;
  std::size_t query_topic_words = 3;
  std::size_t query_sub_words = 3;
  std::size_t doc_topic_words = 3;
  std::size_t doc_sub_words = 3;
  std::size_t noise_vocab = 2000;
  std::size_t noise_words = 2;
  std::size_t eval_docs_per_subtopic = 2;
};

// Topics share a vocabulary between queries and documents; relevance is at
// the subtopic level, whose query and document words are disjoint. Same-topic
// documents are therefore near-duplicates for an untrained encoder: the hard
// negatives a backbone miner finds. One training pair per subtopic.
inline Fixture distractor_fixture(const DistractorSpec& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto noise = detail::make_vocab("n", s.noise_vocab);
  Fixture f;
  f.eval.name = s.task + "-eval";
  f.eval.language = s.lang;
  for (std::size_t t = 0; t < s.topics; ++t) {
    const std::string tb = "t" + std::to_string(t);
    const auto topic = detail::make_vocab(tb + "w", s.topic_vocab);
    for (std::size_t u = 0; u < s.subtopics; ++u) {
      const std::string ub = tb + "u" + std::to_string(u);
      const auto qv = detail::make_vocab(ub + "q", s.sub_vocab);
      const auto dv = detail::make_vocab(ub + "d", s.sub_vocab);
      auto query = [&] {
        return detail::concat(detail::concat(detail::draw_distinct(topic, s.query_topic_words, rng),
                                             detail::draw_distinct(qv, s.query_sub_words, rng)),
                              detail::draw_words(noise, s.noise_words, rng));
      };
      auto doc = [&] {
        return detail::concat(detail::concat(detail::draw_distinct(topic, s.doc_topic_words, rng),
                                             detail::draw_distinct(dv, s.doc_sub_words, rng)),
                              detail::draw_words(noise, s.noise_words, rng));
      };
      TrainingPair p;
      p.query = query();
      p.positive = doc();
      p.task = s.task;
      p.lang = s.lang;
      p.pos_id = ub + "-train";
      f.pool.push_back({p.pos_id, p.positive, p.task, p.lang});
      f.train.push_back(std::move(p));

      const std::string qid = ub + "-q";
      f.eval.queries[qid] = query();
      for (std::size_t d = 0; d < s.eval_docs_per_subtopic; ++d) {
        const std::string did = ub + "-d" + std::to_string(d);
        f.eval.corpus[did] = doc();
        f.eval.qrels[qid][did] = 1;
      }
    }
  }
  return f;
}

inline Fixture distractor_fixture(std::uint64_t seed = 11) { return distractor_fixture(DistractorSpec{}, seed); }

// Larger vocabularies than the separable fixture so that retrieval quality
// keeps improving as more pairs cover more of the vocabulary.
inline ClusterSpec scale_spec() {
  ClusterSpec s;
  s.task = "scale";
  s.clusters = 40;
  s.query_vocab = 16;
  s.doc_vocab = 16;
  s.query_len = 4;
  s.doc_len = 8;
  s.train_pairs = 400;
  s.eval_queries_per_cluster = 2;
  s.eval_docs_per_cluster = 5;
  return s;
}

inline Fixture scale_fixture(std::uint64_t seed = 13) { return cluster_fixture(scale_spec(), seed); }

// Two languages with disjoint vocabularies; eval task per language.
inline std::vector<Fixture> bilingual_fixture(std::uint64_t seed = 17, std::size_t pairs_per_language = 100) {
  std::vector<Fixture> out;
  std::uint64_t k = 0;
  for (const char* lang : {"en", "fr"}) {
    ClusterSpec s;
    s.prefix = std::string(lang) + "-";
    s.lang = lang;
    s.task = "retrieval";
    s.clusters = 5;
    s.train_pairs = pairs_per_language;
    out.push_back(cluster_fixture(s, seed + 1000 * k++));
  }
  return out;
}

}  // namespace embkit::fixtures
