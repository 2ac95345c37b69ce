#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embkit/error.hpp"
#include "embkit/matrix.hpp"

namespace embkit {

enum class LossVariant { InBatch, HardNegatives, Combined };

inline std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::InBatch: return "in_batch";
    case LossVariant::HardNegatives: return "hard_negatives";
    case LossVariant::Combined: return "combined";
  }
  return "unknown";
}

inline LossVariant loss_variant_from_string(const std::string& s) {
  if (s == "in_batch" || s == "InBatch") return LossVariant::InBatch;
  if (s == "hard_negatives" || s == "HardNegatives") return LossVariant::HardNegatives;
  if (s == "combined" || s == "Combined") return LossVariant::Combined;
  throw Error(ErrorCode::InvalidConfig, "unknown loss variant '" + s + "'");
}

struct LossConfig {
  double temperature = 0.02;
  std::size_t num_negatives = 7;
  LossVariant variant = LossVariant::HardNegatives;

  void validate() const {
    if (!(temperature > 0.0)) {
      throw Error(ErrorCode::TemperatureNonPositive, "temperature must be > 0");
    }
    if (variant == LossVariant::HardNegatives && num_negatives < 1) {
      throw Error(ErrorCode::InvalidConfig, "hard-negative loss needs at least one negative");
    }
  }
};

// Similarities for a mini-batch of N queries.
//   pos[i]        = sim(q_i, d_i+)
//   neg(i, j)     = sim(q_i, d_ij-),   N x K
//   inbatch(i, j) = sim(q_i, d_j+),    N x N, diagonal holds the own positive
struct SimilarityBlock {
  std::vector<double> pos;
  Matrix neg;
  std::optional<Matrix> inbatch;

  std::size_t batch_size() const noexcept { return pos.size(); }
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> d_pos;  // N
  Matrix d_neg;               // N x K
  Matrix d_inbatch;           // N x N, or empty
};

namespace detail {

inline void check_temperature(double tau) {
  if (!(tau > 0.0)) {
    throw Error(ErrorCode::TemperatureNonPositive, "temperature must be > 0");
  }
}

// -log softmax(logits)[0] with logits[0] the positive. Writes the softmax
// probabilities into probs (same length as the logits).
inline double row_nll(std::span<const double> logits, std::span<double> probs) {
  double m = logits[0];
  for (const double l : logits) {
    m = std::max(m, l);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    probs[j] = std::exp(logits[j] - m);
    sum += probs[j];
  }
  const double lse = m + std::log(sum);
  for (std::size_t j = 0; j < logits.size(); ++j) {
    probs[j] /= sum;
  }
  return lse - logits[0];
}

struct RowLayout {
  bool mined = false;
  bool inbatch = false;
};

// Every variant is the same per-row softmax, only the candidate list differs:
// [positive, mined negatives in column order, other in-batch positives in column order].
inline LossResult contrastive_rows(const SimilarityBlock& b, double tau, RowLayout layout) {
  check_temperature(tau);
  const std::size_t n = layout.inbatch ? b.inbatch->rows() : b.pos.size();
  const std::size_t k = layout.mined ? b.neg.cols() : 0;
  if (n == 0) {
    throw Error(ErrorCode::ShapeMismatch, "empty batch");
  }
  LossResult r;
  r.d_pos.assign(b.pos.size(), 0.0);
  r.d_neg = Matrix(b.neg.rows(), b.neg.cols());
  if (layout.inbatch) {
    r.d_inbatch = Matrix(n, n);
  }
  const std::size_t width = 1 + k + (layout.inbatch ? n - 1 : 0);
  std::vector<double> logits(width);
  std::vector<double> probs(width);
  const double scale = 1.0 / (static_cast<double>(n) * tau);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t w = 0;
    logits[w++] = (layout.inbatch ? (*b.inbatch)(i, i) : b.pos[i]) / tau;
    for (std::size_t j = 0; j < k; ++j) {
      logits[w++] = b.neg(i, j) / tau;
    }
    if (layout.inbatch) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) {
          logits[w++] = (*b.inbatch)(i, j) / tau;
        }
      }
    }
    total += row_nll(logits, probs);

    w = 0;
    const double d_positive = (probs[w++] - 1.0) * scale;
    if (layout.inbatch) {
      r.d_inbatch(i, i) = d_positive;
    } else {
      r.d_pos[i] = d_positive;
    }
    for (std::size_t j = 0; j < k; ++j) {
      r.d_neg(i, j) = probs[w++] * scale;
    }
    if (layout.inbatch) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) {
          r.d_inbatch(i, j) = probs[w++] * scale;
        }
      }
    }
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

}  // namespace detail

// Softmax over the positive and K explicit negatives.
inline LossResult hard_negative_loss(const SimilarityBlock& block, const LossConfig& cfg) {
  detail::check_temperature(cfg.temperature);
  if (block.pos.empty() || block.neg.rows() != block.pos.size() || block.neg.cols() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "hard-negative loss needs neg of shape N x K, K >= 1");
  }
  return detail::contrastive_rows(block, cfg.temperature, {.mined = true, .inbatch = false});
}

// Vanilla variant: each row's own positive on the diagonal, other rows'
// positives as negatives.
inline LossResult in_batch_loss(const SimilarityBlock& block, const LossConfig& cfg) {
  detail::check_temperature(cfg.temperature);
  if (!block.inbatch) {
    throw Error(ErrorCode::ShapeMismatch, "in-batch loss needs the N x N similarity matrix");
  }
  if (block.inbatch->rows() != block.inbatch->cols()) {
    throw Error(ErrorCode::NotSquare, "in-batch similarity matrix must be square");
  }
  return detail::contrastive_rows(block, cfg.temperature, {.mined = false, .inbatch = true});
}

// Denominator holds the positive, the K mined negatives and the N-1 other
// in-batch positives. K = 0 reduces to in_batch_loss, N = 1 to hard_negative_loss.
inline LossResult combined_loss(const SimilarityBlock& block, const LossConfig& cfg) {
  detail::check_temperature(cfg.temperature);
  if (!block.inbatch) {
    throw Error(ErrorCode::ShapeMismatch, "combined loss needs the N x N similarity matrix");
  }
  if (block.inbatch->rows() != block.inbatch->cols()) {
    throw Error(ErrorCode::NotSquare, "in-batch similarity matrix must be square");
  }
  const std::size_t n = block.inbatch->rows();
  if (block.neg.rows() != n && !(block.neg.cols() == 0)) {
    throw Error(ErrorCode::ShapeMismatch, "neg rows differ from batch size");
  }
  return detail::contrastive_rows(block, cfg.temperature, {.mined = block.neg.cols() > 0, .inbatch = true});
}

inline LossResult contrastive_loss(const SimilarityBlock& block, const LossConfig& cfg) {
  switch (cfg.variant) {
    case LossVariant::InBatch: return in_batch_loss(block, cfg);
    case LossVariant::HardNegatives: return hard_negative_loss(block, cfg);
    case LossVariant::Combined: return combined_loss(block, cfg);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown loss variant");
}

}  // namespace embkit
