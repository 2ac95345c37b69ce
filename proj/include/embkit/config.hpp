#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "embkit/checkpoint.hpp"
#include "embkit/error.hpp"
#include "embkit/loss.hpp"
#include "embkit/model.hpp"
#include "embkit/trainer.hpp"

namespace embkit {

// JSON <-> config structs. Missing keys keep their defaults.

inline LossConfig loss_config_from_json(const nlohmann::json& j) {
  LossConfig c;
  if (j.contains("variant")) {
    c.variant = loss_variant_from_string(j.at("variant").get<std::string>());
  }
  c.temperature = j.value("temperature", c.temperature);
  c.num_negatives = j.value("num_negatives", c.num_negatives);
  return c;
}

inline nlohmann::json loss_config_to_json(const LossConfig& c) {
  return {{"variant", to_string(c.variant)}, {"temperature", c.temperature}, {"num_negatives", c.num_negatives}};
}

inline TrainerConfig trainer_config_from_json(const nlohmann::json& j) {
  TrainerConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.total_steps = j.value("total_steps", c.total_steps);
    c.seed = j.value("seed", c.seed);
    c.adapter_only = j.value("adapter_only", c.adapter_only);
    if (j.contains("loss")) {
      c.loss = loss_config_from_json(j.at("loss"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("trainer config: ") + e.what());
  }
  return c;
}

inline nlohmann::json trainer_config_to_json(const TrainerConfig& c) {
  return {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}, {"warmup_steps", c.warmup_steps},
          {"total_steps", c.total_steps}, {"seed", c.seed}, {"adapter_only", c.adapter_only},
          {"loss", loss_config_to_json(c.loss)}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.tokenizer.hash_buckets = j.value("hash_buckets", c.tokenizer.hash_buckets);
    c.tokenizer.lowercase = j.value("lowercase", c.tokenizer.lowercase);
    c.tokenizer.max_query_tokens = j.value("max_query_tokens", c.tokenizer.max_query_tokens);
    c.tokenizer.max_doc_tokens = j.value("max_doc_tokens", c.tokenizer.max_doc_tokens);
    c.d_embed = j.value("d_embed", c.d_embed);
    c.d_out = j.value("d_out", c.d_out);
    c.lora_rank = j.value("lora_rank", c.lora_rank);
    c.lora_scale = j.value("lora_scale", c.lora_scale);
    c.embed_init_std = j.value("embed_init_std", c.embed_init_std);
    c.lora_init_std = j.value("lora_init_std", c.lora_init_std);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("model config: ") + e.what());
  }
  return c;
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"hash_buckets", c.tokenizer.hash_buckets},
          {"lowercase", c.tokenizer.lowercase},
          {"max_query_tokens", c.tokenizer.max_query_tokens},
          {"max_doc_tokens", c.tokenizer.max_doc_tokens},
          {"d_embed", c.d_embed},
          {"d_out", c.d_out},
          {"lora_rank", c.lora_rank},
          {"lora_scale", c.lora_scale},
          {"embed_init_std", c.embed_init_std},
          {"lora_init_std", c.lora_init_std}};
}

inline std::filesystem::path resolve_path(const std::filesystem::path& base_dir, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

// A "model" block either names a checkpoint or describes a fresh random init
// with "init_seed". Both live in 32-bit storage precision.
inline ModelParams model_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (j.contains("checkpoint")) {
    return load_checkpoint(resolve_path(base_dir, j.at("checkpoint").get<std::string>()));
  }
  return round_to_storage(init_model(model_config_from_json(j), j.value("init_seed", std::uint64_t{0})));
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace embkit
