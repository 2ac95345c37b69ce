#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "embkit/error.hpp"
#include "embkit/matrix.hpp"
#include "embkit/tokenizer.hpp"

namespace embkit {

inline constexpr double kDegenerateNormThreshold = 1e-12;

struct ModelConfig {
  TokenizerConfig tokenizer;
  std::size_t d_embed = 64;
  std::size_t d_out = 64;
  std::size_t lora_rank = 8;
  double lora_scale = 16.0;
  double embed_init_std = 0.01;
  double lora_init_std = 0.02;

  void validate() const {
    tokenizer.validate();
    if (d_embed == 0) {
      throw Error(ErrorCode::InvalidConfig, "d_embed must be positive");
    }
    if (d_out < 2) {
      throw Error(ErrorCode::InvalidConfig, "d_out must be >= 2");
    }
  }
};

// Hashing embedding-bag bi-encoder:
//   h = normalize(proj^T x + (alpha / r) * B (A x)),  x = mean of embed rows.
// proj is stored [d_embed x d_out], lora_A [r x d_embed], lora_B [d_out x r].
struct ModelParams {
  TokenizerConfig tokenizer;
  Matrix embed;
  Matrix proj;
  Matrix lora_A;
  Matrix lora_B;
  std::size_t lora_rank = 0;
  double lora_scale = 16.0;

  std::size_t d_embed() const noexcept { return embed.cols(); }
  std::size_t d_out() const noexcept { return proj.cols(); }
  bool has_adapter() const noexcept { return lora_rank > 0; }
  double adapter_multiplier() const noexcept {
    return has_adapter() ? lora_scale / static_cast<double>(lora_rank) : 0.0;
  }

  void check_invariants() const {
    if (embed.rows() != tokenizer.hash_buckets || proj.rows() != embed.cols()) {
      throw Error(ErrorCode::ShapeMismatch, "embed/proj shapes disagree with config");
    }
    if (proj.cols() < 2) {
      throw Error(ErrorCode::ShapeMismatch, "d_out must be >= 2");
    }
    if (has_adapter()) {
      if (lora_A.rows() != lora_rank || lora_A.cols() != d_embed() ||
          lora_B.rows() != d_out() || lora_B.cols() != lora_rank) {
        throw Error(ErrorCode::ShapeMismatch, "adapter factor shapes disagree with rank");
      }
    } else if (!lora_A.empty() || !lora_B.empty()) {
      throw Error(ErrorCode::ShapeMismatch, "adapter factors present with rank 0");
    }
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  p.tokenizer = cfg.tokenizer;
  p.lora_rank = cfg.lora_rank;
  p.lora_scale = cfg.lora_scale;
  p.embed = Matrix(cfg.tokenizer.hash_buckets, cfg.d_embed);
  p.proj = Matrix(cfg.d_embed, cfg.d_out);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (double& v : p.embed.data()) {
    v = cfg.embed_init_std * unit(rng);
  }
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(cfg.d_embed));
  for (double& v : p.proj.data()) {
    v = proj_std * unit(rng);
  }
  if (cfg.lora_rank > 0) {
    p.lora_A = Matrix(cfg.lora_rank, cfg.d_embed);
    p.lora_B = Matrix(cfg.d_out, cfg.lora_rank, 0.0);
    for (double& v : p.lora_A.data()) {
      v = cfg.lora_init_std * unit(rng);
    }
  }
  return p;
}

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  std::span<const double> span() const noexcept { return values; }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Intermediate values of one forward pass, kept for the backward pass.
struct ForwardCache {
  TokenIds ids;
  std::vector<double> pooled;   // x, length d_embed
  std::vector<double> hidden;   // A x, length r (empty without adapter)
  std::vector<double> pre;      // z, length d_out
  double norm = 0.0;
  EmbeddingVector out;          // z / |z|
};

inline ForwardCache forward(const ModelParams& params, const TokenIds& ids) {
  if (ids.empty()) {
    throw Error(ErrorCode::EmptyInput, "cannot embed an empty token sequence");
  }
  const std::size_t de = params.d_embed();
  const std::size_t dout = params.d_out();
  ForwardCache c;
  c.ids = ids;
  c.pooled.assign(de, 0.0);
  for (const std::size_t id : ids) {
    if (id >= params.embed.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "token id outside hash bucket range");
    }
    const auto row = params.embed.row(id);
    for (std::size_t j = 0; j < de; ++j) {
      c.pooled[j] += row[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(ids.size());
  for (double& v : c.pooled) {
    v *= inv_n;
  }

  c.pre.assign(dout, 0.0);
  for (std::size_t j = 0; j < de; ++j) {
    const double xj = c.pooled[j];
    const auto prow = params.proj.row(j);
    for (std::size_t k = 0; k < dout; ++k) {
      c.pre[k] += xj * prow[k];
    }
  }
  if (params.has_adapter()) {
    const std::size_t r = params.lora_rank;
    c.hidden.assign(r, 0.0);
    for (std::size_t a = 0; a < r; ++a) {
      c.hidden[a] = dot(params.lora_A.row(a), c.pooled);
    }
    const double s = params.adapter_multiplier();
    for (std::size_t k = 0; k < dout; ++k) {
      c.pre[k] += s * dot(params.lora_B.row(k), c.hidden);
    }
  }

  double sq = 0.0;
  for (const double v : c.pre) {
    sq += v * v;
  }
  c.norm = std::sqrt(sq);
  if (!(c.norm >= kDegenerateNormThreshold)) {
    throw Error(ErrorCode::DegenerateNorm, "pre-normalization norm below 1e-12");
  }
  c.out.values.resize(dout);
  for (std::size_t k = 0; k < dout; ++k) {
    c.out.values[k] = c.pre[k] / c.norm;
  }
  return c;
}

inline EmbeddingVector embed_text(const ModelParams& params, const TokenIds& ids) {
  return forward(params, ids).out;
}

inline EmbeddingVector embed_text(const ModelParams& params, std::string_view text, bool is_query) {
  return embed_text(params, tokenize(text, params.tokenizer, is_query));
}

inline double cosine_sim(const EmbeddingVector& a, const EmbeddingVector& b) {
  return std::clamp(dot(a.values, b.values), -1.0, 1.0);
}

// Row-sparse gradient for the embedding table; rows appear in first-touch order.
class SparseRows {
 public:
  SparseRows() = default;
  explicit SparseRows(std::size_t cols) : cols_(cols) {}

  std::span<double> row(std::size_t id) {
    auto [it, inserted] = slot_.try_emplace(id, ids_.size());
    if (inserted) {
      ids_.push_back(id);
      values_.resize(values_.size() + cols_, 0.0);
    }
    return {values_.data() + it->second * cols_, cols_};
  }
  std::span<const double> row_at(std::size_t slot) const {
    return {values_.data() + slot * cols_, cols_};
  }
  const std::vector<std::size_t>& ids() const noexcept { return ids_; }
  std::size_t cols() const noexcept { return cols_; }
  bool contains(std::size_t id) const { return slot_.count(id) != 0; }
  double get(std::size_t id, std::size_t col) const {
    const auto it = slot_.find(id);
    return it == slot_.end() ? 0.0 : values_[it->second * cols_ + col];
  }

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> ids_;
  std::unordered_map<std::size_t, std::size_t> slot_;
  std::vector<double> values_;
};

struct ParamGrads {
  SparseRows embed;
  Matrix proj;
  Matrix lora_A;
  Matrix lora_B;
  // Set in adapter-only mode: embed/proj gradients are still computed but
  // the optimizer must leave those tensors alone.
  bool base_frozen = false;
};

inline ParamGrads zero_grads(const ModelParams& params, bool adapter_only = false) {
  ParamGrads g;
  g.embed = SparseRows(params.d_embed());
  g.proj = Matrix(params.proj.rows(), params.proj.cols());
  if (params.has_adapter()) {
    g.lora_A = Matrix(params.lora_A.rows(), params.lora_A.cols());
    g.lora_B = Matrix(params.lora_B.rows(), params.lora_B.cols());
  }
  g.base_frozen = adapter_only;
  return g;
}

// Accumulates dL/dparams for one sequence given dL/dh (upstream, length d_out).
inline void accumulate_backward(const ModelParams& params, const ForwardCache& c,
                                std::span<const double> upstream, ParamGrads& g) {
  const std::size_t de = params.d_embed();
  const std::size_t dout = params.d_out();
  if (upstream.size() != dout || c.pre.size() != dout || c.pooled.size() != de) {
    throw Error(ErrorCode::ShapeMismatch, "upstream gradient length differs from d_out");
  }
  const auto& h = c.out.values;
  const double hg = dot(h, upstream);
  std::vector<double> dz(dout);
  for (std::size_t k = 0; k < dout; ++k) {
    dz[k] = (upstream[k] - h[k] * hg) / c.norm;
  }

  std::vector<double> dx(de, 0.0);
  for (std::size_t j = 0; j < de; ++j) {
    const double xj = c.pooled[j];
    auto grow = g.proj.row(j);
    const auto prow = params.proj.row(j);
    double acc = 0.0;
    for (std::size_t k = 0; k < dout; ++k) {
      grow[k] += xj * dz[k];
      acc += prow[k] * dz[k];
    }
    dx[j] = acc;
  }

  if (params.has_adapter()) {
    const std::size_t r = params.lora_rank;
    const double s = params.adapter_multiplier();
    std::vector<double> t(r, 0.0);  // s * B^T dz
    for (std::size_t k = 0; k < dout; ++k) {
      const auto brow = params.lora_B.row(k);
      auto gbrow = g.lora_B.row(k);
      for (std::size_t a = 0; a < r; ++a) {
        gbrow[a] += s * dz[k] * c.hidden[a];
        t[a] += s * brow[a] * dz[k];
      }
    }
    for (std::size_t a = 0; a < r; ++a) {
      const auto arow = params.lora_A.row(a);
      auto garow = g.lora_A.row(a);
      for (std::size_t j = 0; j < de; ++j) {
        garow[j] += t[a] * c.pooled[j];
        dx[j] += arow[j] * t[a];
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(c.ids.size());
  for (const std::size_t id : c.ids) {
    auto erow = g.embed.row(id);
    for (std::size_t j = 0; j < de; ++j) {
      erow[j] += dx[j] * inv_n;
    }
  }
}

inline ParamGrads backward_batch(const ModelParams& params, const std::vector<ForwardCache>& caches,
                                 const std::vector<std::vector<double>>& upstream,
                                 bool adapter_only = false) {
  if (caches.size() != upstream.size()) {
    throw Error(ErrorCode::ShapeMismatch, "batch size differs from upstream gradient count");
  }
  ParamGrads g = zero_grads(params, adapter_only);
  for (std::size_t i = 0; i < caches.size(); ++i) {
    accumulate_backward(params, caches[i], upstream[i], g);
  }
  return g;
}

inline ParamGrads backward_batch(const ModelParams& params, const std::vector<TokenIds>& batch,
                                 const std::vector<std::vector<double>>& upstream,
                                 bool adapter_only = false) {
  if (batch.size() != upstream.size()) {
    throw Error(ErrorCode::ShapeMismatch, "batch size differs from upstream gradient count");
  }
  std::vector<ForwardCache> caches;
  caches.reserve(batch.size());
  for (const auto& ids : batch) {
    caches.push_back(forward(params, ids));
  }
  return backward_batch(params, caches, upstream, adapter_only);
}

}  // namespace embkit
