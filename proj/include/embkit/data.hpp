#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "embkit/error.hpp"

namespace embkit {

// One contrastive training example. pos_id is optional; when empty the
// positive is located in a corpus by its text.
struct TrainingPair {
  std::string query;
  std::string positive;
  std::vector<std::string> negatives;
  std::string task;
  std::string lang;
  std::string pos_id;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

// Document as stored in a mining pool or a raw corpus.
struct Document {
  std::string id;
  std::string text;
  std::string task;
  std::string lang;
};

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      fn(j);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline std::string first_string_of(const nlohmann::json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (j.contains(k) && j[k].is_string()) {
      return j[k].get<std::string>();
    }
  }
  return {};
}

// Accepts both mined-pair records {"query","pos","negs","task","lang"} and
// synthetic-pair records {"query","document","language","source_doc_id","task"}.
inline TrainingPair pair_from_json(const nlohmann::json& j) {
  TrainingPair p;
  p.query = j.at("query").get<std::string>();
  p.positive = first_string_of(j, {"pos", "document", "positive"});
  p.task = first_string_of(j, {"task"});
  p.lang = first_string_of(j, {"lang", "language"});
  p.pos_id = first_string_of(j, {"pos_id", "source_doc_id"});
  if (j.contains("negs")) {
    p.negatives = j.at("negs").get<std::vector<std::string>>();
  }
  return p;
}

inline std::vector<TrainingPair> read_pairs(const std::filesystem::path& path) {
  std::vector<TrainingPair> pairs;
  for_each_jsonl(path, [&](const nlohmann::json& j) { pairs.push_back(pair_from_json(j)); });
  return pairs;
}

inline std::vector<Document> read_documents(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_jsonl(path, [&](const nlohmann::json& j) {
    Document d;
    d.id = j.at("id").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.task = first_string_of(j, {"task"});
    d.lang = first_string_of(j, {"lang", "language"});
    docs.push_back(std::move(d));
  });
  return docs;
}

inline void write_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  for (const auto& r : rows) {
    out << r.dump() << '\n';
  }
}

inline void write_pairs(const std::filesystem::path& path, const std::vector<TrainingPair>& pairs) {
  std::vector<nlohmann::json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    nlohmann::json j = {{"query", p.query}, {"pos", p.positive}, {"negs", p.negatives},
                        {"task", p.task}, {"lang", p.lang}};
    if (!p.pos_id.empty()) {
      j["pos_id"] = p.pos_id;
    }
    rows.push_back(std::move(j));
  }
  write_lines(path, rows);
}

inline void write_documents(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::vector<nlohmann::json> rows;
  rows.reserve(docs.size());
  for (const auto& d : docs) {
    rows.push_back({{"id", d.id}, {"text", d.text}, {"task", d.task}, {"lang", d.lang}});
  }
  write_lines(path, rows);
}

}  // namespace embkit
