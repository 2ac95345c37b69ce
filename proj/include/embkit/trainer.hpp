#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "embkit/data.hpp"
#include "embkit/error.hpp"
#include "embkit/loss.hpp"
#include "embkit/model.hpp"
#include "embkit/optim.hpp"

namespace embkit {

// Defaults for the toy encoder.
struct TrainerConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 1000;
  std::uint64_t seed = 0;
  LossConfig loss;
  bool adapter_only = false;

  Schedule schedule() const { return {learning_rate, warmup_steps, total_steps}; }

  void validate() const {
    if (batch_size == 0) {
      throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
    }
    if (!(learning_rate > 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "learning_rate must be positive");
    }
    if (warmup_steps > total_steps) {
      throw Error(ErrorCode::InvalidConfig, "warmup_steps exceeds total_steps");
    }
    if (loss.variant == LossVariant::InBatch && batch_size < 2) {
      throw Error(ErrorCode::InvalidConfig, "in-batch loss needs batch_size >= 2");
    }
    loss.validate();
  }
};

struct StepLog {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  ModelParams model;
  std::vector<StepLog> log;
};

struct EncodedPair {
  TokenIds query;
  TokenIds positive;
  std::vector<TokenIds> negatives;
};

inline EncodedPair encode_pair(const TrainingPair& p, const TokenizerConfig& tok, std::size_t k) {
  EncodedPair e;
  e.query = tokenize(p.query, tok, true);
  e.positive = tokenize(p.positive, tok, false);
  for (std::size_t j = 0; j < k; ++j) {
    e.negatives.push_back(tokenize(p.negatives[j], tok, false));
  }
  return e;
}

struct BatchLoss {
  double loss = 0.0;
  ParamGrads grads;
};

inline bool uses_mined_negatives(LossVariant v) {
  return v == LossVariant::HardNegatives || v == LossVariant::Combined;
}

// Full forward + backward for one mini-batch: embed queries, positives and
// negatives, build the similarity block, apply the loss, and push dL/dsim
// back through the encoder.
inline BatchLoss batch_loss_and_grads(const ModelParams& params, std::span<const EncodedPair* const> batch,
                                      const LossConfig& loss_cfg, bool adapter_only = false) {
  const std::size_t n = batch.size();
  if (n == 0) {
    throw Error(ErrorCode::ShapeMismatch, "empty batch");
  }
  const bool mined = uses_mined_negatives(loss_cfg.variant);
  const bool inbatch = loss_cfg.variant != LossVariant::HardNegatives;
  const std::size_t k = mined ? loss_cfg.num_negatives : 0;

  std::vector<ForwardCache> q(n), d(n);
  std::vector<std::vector<ForwardCache>> neg(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = forward(params, batch[i]->query);
    d[i] = forward(params, batch[i]->positive);
    if (batch[i]->negatives.size() < k) {
      throw Error(ErrorCode::ShapeMismatch, "pair carries fewer than K negatives");
    }
    for (std::size_t j = 0; j < k; ++j) {
      neg[i].push_back(forward(params, batch[i]->negatives[j]));
    }
  }

  SimilarityBlock block;
  block.pos.resize(n);
  block.neg = Matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    block.pos[i] = dot(q[i].out.values, d[i].out.values);
    for (std::size_t j = 0; j < k; ++j) {
      block.neg(i, j) = dot(q[i].out.values, neg[i][j].out.values);
    }
  }
  if (inbatch) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        m(i, j) = i == j ? block.pos[i] : dot(q[i].out.values, d[j].out.values);
      }
    }
    block.inbatch = std::move(m);
  }

  LossConfig cfg = loss_cfg;
  const LossResult lr = contrastive_loss(block, cfg);

  const std::size_t dout = params.d_out();
  std::vector<std::vector<double>> gq(n, std::vector<double>(dout, 0.0));
  std::vector<std::vector<double>> gd(n, std::vector<double>(dout, 0.0));
  auto axpy = [](std::vector<double>& y, double a, const std::vector<double>& x) {
    for (std::size_t t = 0; t < y.size(); ++t) {
      y[t] += a * x[t];
    }
  };
  ParamGrads grads = zero_grads(params, adapter_only);
  for (std::size_t i = 0; i < n; ++i) {
    if (!inbatch) {
      axpy(gq[i], lr.d_pos[i], d[i].out.values);
      axpy(gd[i], lr.d_pos[i], q[i].out.values);
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double g = lr.d_neg(i, j);
      axpy(gq[i], g, neg[i][j].out.values);
      std::vector<double> gn(dout, 0.0);
      axpy(gn, g, q[i].out.values);
      accumulate_backward(params, neg[i][j], gn, grads);
    }
    if (inbatch) {
      for (std::size_t j = 0; j < n; ++j) {
        const double g = lr.d_inbatch(i, j);
        axpy(gq[i], g, d[j].out.values);
        axpy(gd[j], g, q[i].out.values);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    accumulate_backward(params, q[i], gq[i], grads);
    accumulate_backward(params, d[i], gd[i], grads);
  }
  return {lr.loss, std::move(grads)};
}

// Seeded per-epoch shuffling; batches are contiguous slices of the
// permutation, the incomplete tail of an epoch is dropped unless the whole
// dataset is smaller than one batch.
inline TrainResult train(ModelParams model, const std::vector<TrainingPair>& pairs, const TrainerConfig& cfg) {
  cfg.validate();
  if (cfg.adapter_only && !model.has_adapter()) {
    throw Error(ErrorCode::InvalidConfig, "adapter_only training needs a model with lora_rank > 0");
  }
  TrainResult result;
  if (cfg.total_steps == 0) {
    result.model = std::move(model);
    return result;
  }
  if (pairs.empty()) {
    throw Error(ErrorCode::InsufficientData, "no training pairs");
  }
  const std::size_t k = uses_mined_negatives(cfg.loss.variant) ? cfg.loss.num_negatives : 0;
  std::vector<EncodedPair> encoded;
  encoded.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].negatives.size() < k) {
      throw Error(ErrorCode::InsufficientData,
                  "pair " + std::to_string(i) + " has " + std::to_string(pairs[i].negatives.size()) +
                      " negatives, loss needs " + std::to_string(k));
    }
    encoded.push_back(encode_pair(pairs[i], model.tokenizer, k));
  }
  const std::size_t batch = std::min(cfg.batch_size, encoded.size());
  if (cfg.loss.variant == LossVariant::InBatch && batch < 2) {
    throw Error(ErrorCode::InsufficientData, "in-batch loss needs at least 2 pairs");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(encoded.size());
  std::size_t cursor = order.size();
  AdamState state = make_adam_state(model);
  const Schedule sched = cfg.schedule();
  std::vector<const EncodedPair*> slice(batch);
  result.log.reserve(cfg.total_steps);

  for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
    if (cursor + batch > order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    for (std::size_t b = 0; b < batch; ++b) {
      slice[b] = &encoded[order[cursor + b]];
    }
    cursor += batch;
    try {
      const double lr = lr_at(step, sched);
      BatchLoss bl = batch_loss_and_grads(model, slice, cfg.loss, cfg.adapter_only);
      adam_step(model, bl.grads, state, lr);
      result.log.push_back({step, lr, bl.loss});
    } catch (const Error& e) {
      rethrow_with_context(e, "step " + std::to_string(step));
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace embkit
