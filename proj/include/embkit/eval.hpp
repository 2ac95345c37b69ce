#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "embkit/data.hpp"
#include "embkit/error.hpp"
#include "embkit/model.hpp"

namespace embkit {

using Qrels = std::map<std::string, int>;  // doc id -> grade >= 1

struct RetrievalTask {
  std::string name;
  std::string language;
  std::map<std::string, std::string> queries;
  std::map<std::string, std::string> corpus;
  std::map<std::string, Qrels> qrels;  // query id -> judgments

  std::size_t num_qrels() const {
    std::size_t n = 0;
    for (const auto& [q, j] : qrels) {
      n += j.size();
    }
    return n;
  }

  void validate() const {
    for (const auto& [qid, judged] : qrels) {
      if (!queries.count(qid)) {
        throw Error(ErrorCode::DanglingReference, "qrels query id '" + qid + "' not in queries");
      }
      for (const auto& [did, grade] : judged) {
        if (!corpus.count(did)) {
          throw Error(ErrorCode::DanglingReference, "qrels doc id '" + did + "' not in corpus");
        }
        if (grade < 1) {
          throw Error(ErrorCode::NonPositiveGrade,
                      "grade " + std::to_string(grade) + " for (" + qid + ", " + did + ")");
        }
      }
    }
  }
};

namespace detail {

inline std::map<std::string, std::string> read_id_text(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  for_each_jsonl(path, [&](const nlohmann::json& j) {
    auto id = j.at("id").get<std::string>();
    if (!out.emplace(id, j.at("text").get<std::string>()).second) {
      throw Error(ErrorCode::DuplicateId, path.filename().string() + ": id '" + id + "' repeated");
    }
  });
  return out;
}

}  // namespace detail

// Bundle layout: queries.jsonl {"id","text"}, corpus.jsonl {"id","text"},
// qrels.tsv (query_id TAB doc_id TAB grade). An optional task.json may
// carry {"name","language"}; otherwise the directory name is used.
inline RetrievalTask load_task(const std::filesystem::path& dir) {
  for (const char* f : {"queries.jsonl", "corpus.jsonl", "qrels.tsv"}) {
    if (!std::filesystem::exists(dir / f)) {
      throw Error(ErrorCode::MissingFile, (dir / f).string());
    }
  }
  RetrievalTask t;
  t.name = dir.filename().string();
  if (t.name.empty()) {
    t.name = dir.parent_path().filename().string();
  }
  if (std::filesystem::exists(dir / "task.json")) {
    std::ifstream in(dir / "task.json");
    try {
      const auto meta = nlohmann::json::parse(in);
      t.name = meta.value("name", t.name);
      t.language = meta.value("language", t.language);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "task.json: " + std::string(e.what()));
    }
  }
  t.queries = detail::read_id_text(dir / "queries.jsonl");
  t.corpus = detail::read_id_text(dir / "corpus.jsonl");

  std::ifstream in(dir / "qrels.tsv");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) {
      cols.push_back(col);
    }
    if (cols.size() != 3) {
      throw Error(ErrorCode::ParseError, "qrels.tsv:" + std::to_string(lineno) + ": expected 3 columns");
    }
    int grade = 0;
    try {
      std::size_t used = 0;
      grade = std::stoi(cols[2], &used);
      if (used != cols[2].size()) {
        throw std::invalid_argument("trailing characters");
      }
    } catch (const std::exception&) {
      if (lineno == 1) {
        continue;  // header row
      }
      throw Error(ErrorCode::ParseError, "qrels.tsv:" + std::to_string(lineno) + ": bad grade '" + cols[2] + "'");
    }
    if (grade < 1) {
      throw Error(ErrorCode::NonPositiveGrade, "qrels.tsv:" + std::to_string(lineno) + ": grade " + cols[2]);
    }
    t.qrels[cols[0]][cols[1]] = grade;
  }
  t.validate();
  return t;
}

inline void save_task(const RetrievalTask& t, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<nlohmann::json> rows;
  for (const auto& [id, text] : t.queries) {
    rows.push_back({{"id", id}, {"text", text}});
  }
  write_lines(dir / "queries.jsonl", rows);
  rows.clear();
  for (const auto& [id, text] : t.corpus) {
    rows.push_back({{"id", id}, {"text", text}});
  }
  write_lines(dir / "corpus.jsonl", rows);
  std::ofstream q(dir / "qrels.tsv", std::ios::binary | std::ios::trunc);
  for (const auto& [qid, judged] : t.qrels) {
    for (const auto& [did, grade] : judged) {
      q << qid << '\t' << did << '\t' << grade << '\n';
    }
  }
  std::ofstream meta(dir / "task.json", std::ios::binary | std::ios::trunc);
  meta << nlohmann::json{{"name", t.name}, {"language", t.language}}.dump() << '\n';
}

namespace detail {

inline void require_unique(const std::vector<std::string>& ranked) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ranked) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::DuplicateInRanking, "doc '" + id + "' ranked twice");
    }
  }
}

}  // namespace detail

// Gain 2^grade - 1, discount log2(rank + 1); unjudged docs gain nothing.
inline double ndcg_at_k(const std::vector<std::string>& ranked, const Qrels& judged, std::size_t k = 10) {
  detail::require_unique(ranked);
  if (judged.empty() || k == 0) {
    return 0.0;
  }
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    const auto it = judged.find(ranked[i]);
    if (it != judged.end()) {
      dcg += (std::exp2(static_cast<double>(it->second)) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  std::vector<int> grades;
  for (const auto& [doc, g] : judged) {
    grades.push_back(g);
  }
  std::sort(grades.begin(), grades.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
    idcg += (std::exp2(static_cast<double>(grades[i])) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

inline double recall_at_k(const std::vector<std::string>& ranked, const Qrels& judged, std::size_t k) {
  detail::require_unique(ranked);
  if (judged.empty()) {
    return 0.0;
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    hits += judged.count(ranked[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(judged.size());
}

struct TaskMetrics {
  double ndcg_at_10 = 0.0;
  std::map<std::size_t, double> recall;  // k -> recall@k
  std::size_t num_queries = 0;
};

struct MetricReport {
  std::map<std::string, TaskMetrics> per_task;
  std::map<std::string, double> aggregates;  // group -> mean ndcg@10
};

// Full ranking of the corpus for one query: cosine descending, ties by
// ascending doc id.
inline std::vector<std::string> rank_corpus(const EmbeddingVector& query,
                                            const std::vector<std::pair<std::string, EmbeddingVector>>& docs) {
  std::vector<std::pair<double, const std::string*>> scored;
  scored.reserve(docs.size());
  for (const auto& [id, v] : docs) {
    scored.emplace_back(cosine_sim(query, v), &id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) {
      return a.first > b.first;
    }
    return *a.second < *b.second;
  });
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (const auto& s : scored) {
    out.push_back(*s.second);
  }
  return out;
}

inline TaskMetrics evaluate_model(const ModelParams& model, const RetrievalTask& task,
                                  const std::vector<std::size_t>& k_list = {10, 100}) {
  std::vector<std::pair<std::string, EmbeddingVector>> docs;
  docs.reserve(task.corpus.size());
  for (const auto& [id, text] : task.corpus) {
    try {
      docs.emplace_back(id, embed_text(model, text, false));
    } catch (const Error& e) {
      rethrow_with_context(e, task.name + " doc '" + id + "'");
    }
  }
  TaskMetrics m;
  for (const std::size_t k : k_list) {
    m.recall[k] = 0.0;
  }
  for (const auto& [qid, judged] : task.qrels) {
    if (judged.empty()) {
      continue;
    }
    EmbeddingVector q;
    try {
      q = embed_text(model, task.queries.at(qid), true);
    } catch (const Error& e) {
      rethrow_with_context(e, task.name + " query '" + qid + "'");
    }
    const auto ranked = rank_corpus(q, docs);
    m.ndcg_at_10 += ndcg_at_k(ranked, judged, 10);
    for (const std::size_t k : k_list) {
      m.recall[k] += recall_at_k(ranked, judged, k);
    }
    ++m.num_queries;
  }
  if (m.num_queries > 0) {
    const double n = static_cast<double>(m.num_queries);
    m.ndcg_at_10 /= n;
    for (auto& [k, r] : m.recall) {
      r /= n;
    }
  }
  return m;
}

using Grouping = std::map<std::string, std::vector<std::string>>;  // group -> task names

inline MetricReport aggregate(const std::map<std::string, TaskMetrics>& per_task, const Grouping& grouping) {
  MetricReport r;
  r.per_task = per_task;
  for (const auto& [group, members] : grouping) {
    if (members.empty()) {
      throw Error(ErrorCode::EmptyGroup, "group '" + group + "' has no tasks");
    }
    double sum = 0.0;
    for (const auto& name : members) {
      const auto it = per_task.find(name);
      if (it == per_task.end()) {
        throw Error(ErrorCode::DanglingReference, "group '" + group + "' names unknown task '" + name + "'");
      }
      sum += it->second.ndcg_at_10;
    }
    r.aggregates[group] = sum / static_cast<double>(members.size());
  }
  return r;
}

inline nlohmann::json report_to_json(const MetricReport& r) {
  nlohmann::json per_task = nlohmann::json::object();
  for (const auto& [name, m] : r.per_task) {
    nlohmann::json entry = {{"ndcg@10", m.ndcg_at_10}, {"num_queries", m.num_queries}};
    for (const auto& [k, v] : m.recall) {
      entry["recall@" + std::to_string(k)] = v;
    }
    per_task[name] = entry;
  }
  nlohmann::json aggregates = nlohmann::json::object();
  for (const auto& [g, v] : r.aggregates) {
    aggregates[g] = v;
  }
  return {{"per_task", per_task}, {"aggregates", aggregates}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  for (const auto& [name, entry] : j.at("per_task").items()) {
    TaskMetrics m;
    m.ndcg_at_10 = entry.at("ndcg@10").get<double>();
    m.num_queries = entry.value("num_queries", std::size_t{0});
    for (const auto& [key, v] : entry.items()) {
      if (key.rfind("recall@", 0) == 0) {
        m.recall[std::stoul(key.substr(7))] = v.get<double>();
      }
    }
    r.per_task[name] = m;
  }
  for (const auto& [g, v] : j.at("aggregates").items()) {
    r.aggregates[g] = v.get<double>();
  }
  return r;
}

inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

// Markdown table in the layout of a benchmark comparison: group means first,
// then one "- task" row per task; scores are percentages.
inline std::string report_to_markdown(const MetricReport& r) {
  std::ostringstream out;
  out << "| Task | nDCG@10 | Recall@10 | Recall@100 |\n";
  out << "|---|---:|---:|---:|\n";
  for (const auto& [g, v] : r.aggregates) {
    out << "| Mean (" << g << ") | " << format_score(v) << " | | |\n";
  }
  auto recall = [](const TaskMetrics& m, std::size_t k) {
    const auto it = m.recall.find(k);
    return it == m.recall.end() ? std::string() : format_score(it->second);
  };
  for (const auto& [name, m] : r.per_task) {
    out << "| - " << name << " | " << format_score(m.ndcg_at_10) << " | " << recall(m, 10) << " | "
        << recall(m, 100) << " |\n";
  }
  return out.str();
}

}  // namespace embkit
