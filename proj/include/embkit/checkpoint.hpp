#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "embkit/error.hpp"
#include "embkit/model.hpp"

namespace embkit {

// Layout: "EMBKIT1\n", one JSON header line, then little-endian float32
// tensors in the order listed under "tensors".
inline constexpr std::string_view kCheckpointMagic = "EMBKIT1\n";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void append_f32_le(std::string& out, const Matrix& m) {
  const std::size_t start = out.size();
  out.resize(start + m.size() * 4);
  char* dst = out.data() + start;
  for (const double v : m.data()) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) {
      *dst++ = static_cast<char>((bits >> (8 * b)) & 0xFFu);
    }
  }
}

inline void read_f32_le(const char* src, Matrix& m) {
  for (double& v : m.data()) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[b])) << (8 * b);
    }
    src += 4;
    v = static_cast<double>(std::bit_cast<float>(bits));
  }
}

}  // namespace detail

inline nlohmann::json tokenizer_to_json(const TokenizerConfig& t) {
  return {{"hash_buckets", t.hash_buckets},
          {"lowercase", t.lowercase},
          {"max_query_tokens", t.max_query_tokens},
          {"max_doc_tokens", t.max_doc_tokens}};
}

inline TokenizerConfig tokenizer_from_json(const nlohmann::json& j) {
  TokenizerConfig t;
  t.hash_buckets = j.value("hash_buckets", t.hash_buckets);
  t.lowercase = j.value("lowercase", t.lowercase);
  t.max_query_tokens = j.value("max_query_tokens", t.max_query_tokens);
  t.max_doc_tokens = j.value("max_doc_tokens", t.max_doc_tokens);
  t.validate();
  return t;
}

inline std::string serialize_checkpoint(const ModelParams& params) {
  params.check_invariants();
  nlohmann::json tensors = nlohmann::json::array();
  auto describe = [&](const char* name, const Matrix& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  };
  describe("embed", params.embed);
  describe("proj", params.proj);
  if (params.has_adapter()) {
    describe("lora_A", params.lora_A);
    describe("lora_B", params.lora_B);
  }
  const nlohmann::json header = {
      {"format_version", kCheckpointVersion},
      {"d_embed", params.d_embed()},
      {"d_out", params.d_out()},
      {"lora_rank", params.lora_rank},
      {"lora_scale", params.lora_scale},
      {"tokenizer", tokenizer_to_json(params.tokenizer)},
      {"tensors", tensors},
  };
  std::string out(kCheckpointMagic);
  out += header.dump();
  out += '\n';
  detail::append_f32_le(out, params.embed);
  detail::append_f32_le(out, params.proj);
  if (params.has_adapter()) {
    detail::append_f32_le(out, params.lora_A);
    detail::append_f32_le(out, params.lora_B);
  }
  return out;
}

inline ModelParams deserialize_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw Error(ErrorCode::BadMagic, "checkpoint does not start with EMBKIT1");
  }
  bytes.remove_prefix(kCheckpointMagic.size());
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) {
    throw Error(ErrorCode::TruncatedFile, "checkpoint header line is not terminated");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format_version", -1) != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "checkpoint format_version " + header.value("format_version", nlohmann::json(nullptr)).dump());
  }
  bytes.remove_prefix(nl + 1);

  ModelParams p;
  try {
    p.tokenizer = tokenizer_from_json(header.at("tokenizer"));
    p.lora_rank = header.at("lora_rank").get<std::size_t>();
    p.lora_scale = header.at("lora_scale").get<double>();
    std::size_t expected = 0;
    for (const auto& t : header.at("tensors")) {
      expected += t.at("rows").get<std::size_t>() * t.at("cols").get<std::size_t>() * 4;
    }
    if (expected != bytes.size()) {
      throw Error(ErrorCode::TruncatedFile, "payload has " + std::to_string(bytes.size()) +
                                                " bytes, header declares " + std::to_string(expected));
    }
    const char* cursor = bytes.data();
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      Matrix m(t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>());
      detail::read_f32_le(cursor, m);
      cursor += m.size() * 4;
      if (name == "embed") {
        p.embed = std::move(m);
      } else if (name == "proj") {
        p.proj = std::move(m);
      } else if (name == "lora_A") {
        p.lora_A = std::move(m);
      } else if (name == "lora_B") {
        p.lora_B = std::move(m);
      } else {
        throw Error(ErrorCode::ParseError, "unknown tensor " + name);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint header: ") + e.what());
  }
  if (p.d_embed() != header.value("d_embed", std::size_t{0}) ||
      p.d_out() != header.value("d_out", std::size_t{0})) {
    throw Error(ErrorCode::ShapeMismatch, "tensor shapes disagree with header dims");
  }
  p.check_invariants();
  return p;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::IoError, "short write to " + path.string());
  }
}

inline void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_checkpoint(params));
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

// Rounds every parameter to the nearest float32, i.e. what a save/load cycle yields.
inline ModelParams round_to_storage(ModelParams p) {
  for (Matrix* m : {&p.embed, &p.proj, &p.lora_A, &p.lora_B}) {
    for (double& v : m->data()) {
      v = static_cast<double>(static_cast<float>(v));
    }
  }
  return p;
}

}  // namespace embkit
