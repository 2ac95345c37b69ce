#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "embkit/embkit.hpp"

namespace embkit::testing {

// Small model with every tensor randomized (including lora_B) so that all
// gradient paths are exercised.
inline ModelParams random_params(std::size_t buckets, std::size_t d_embed, std::size_t d_out, std::size_t rank,
                                 std::uint64_t seed) {
  ModelConfig cfg;
  cfg.tokenizer.hash_buckets = buckets;
  cfg.d_embed = d_embed;
  cfg.d_out = d_out;
  cfg.lora_rank = rank;
  cfg.embed_init_std = 0.5;
  cfg.lora_init_std = 0.3;
  ModelParams p = init_model(cfg, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> n(0.0, 0.3);
  for (double& v : p.lora_B.data()) {
    v = n(rng);
  }
  return p;
}

inline TokenIds random_ids(std::size_t buckets, std::size_t max_len, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> tok(0, buckets - 1);
  TokenIds ids(len(rng));
  for (auto& t : ids) {
    t = tok(rng);
  }
  return ids;
}

inline EncodedPair random_encoded_pair(std::size_t buckets, std::size_t k, std::mt19937_64& rng) {
  EncodedPair e;
  e.query = random_ids(buckets, 4, rng);
  e.positive = random_ids(buckets, 6, rng);
  for (std::size_t j = 0; j < k; ++j) {
    e.negatives.push_back(random_ids(buckets, 6, rng));
  }
  return e;
}

inline std::vector<const EncodedPair*> pointers(const std::vector<EncodedPair>& v) {
  std::vector<const EncodedPair*> out;
  for (const auto& e : v) {
    out.push_back(&e);
  }
  return out;
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

// Compares analytic gradients of the batch loss with central differences
// over every parameter. Relative error is |a - f| / max(|a|, |f|, floor),
// floor = max(abs_floor, floor_fraction * largest |gradient entry|): entries
// far below the gradient scale are pure roundoff in a difference quotient.
inline GradCheck check_gradients(ModelParams p, const std::vector<EncodedPair>& batch, const LossConfig& cfg,
                                 double step = 3e-4, double floor_fraction = 1e-6,
                                 double abs_floor = 1e-6) {
  const auto ptrs = pointers(batch);
  const BatchLoss analytic = batch_loss_and_grads(p, ptrs, cfg);
  double scale = 0.0;
  for (const std::size_t id : analytic.grads.embed.ids()) {
    for (std::size_t j = 0; j < p.embed.cols(); ++j) {
      scale = std::max(scale, std::abs(analytic.grads.embed.get(id, j)));
    }
  }
  for (const Matrix* m : {&analytic.grads.proj, &analytic.grads.lora_A, &analytic.grads.lora_B}) {
    for (const double v : m->data()) {
      scale = std::max(scale, std::abs(v));
    }
  }
  const double floor = std::max(abs_floor, floor_fraction * scale);
  auto loss_at = [&](double& slot, double delta) {
    const double saved = slot;
    slot = saved + delta;
    const double l = batch_loss_and_grads(p, ptrs, cfg).loss;
    slot = saved;
    return l;
  };
  GradCheck out;
  auto compare = [&](double& slot, double a) {
    // Richardson-extrapolated central difference, O(step^4).
    const double wide = (loss_at(slot, step) - loss_at(slot, -step)) / (2.0 * step);
    const double narrow = (loss_at(slot, step / 2) - loss_at(slot, -step / 2)) / step;
    const double f = (4.0 * narrow - wide) / 3.0;
    const double rel = std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor});
    out.max_rel = std::max(out.max_rel, rel);
    ++out.checked;
  };
  for (std::size_t id = 0; id < p.embed.rows(); ++id) {
    for (std::size_t j = 0; j < p.embed.cols(); ++j) {
      compare(p.embed(id, j), analytic.grads.embed.get(id, j));
    }
  }
  for (std::size_t i = 0; i < p.proj.data().size(); ++i) {
    compare(p.proj.data()[i], analytic.grads.proj.data()[i]);
  }
  for (std::size_t i = 0; i < p.lora_A.data().size(); ++i) {
    compare(p.lora_A.data()[i], analytic.grads.lora_A.data()[i]);
  }
  for (std::size_t i = 0; i < p.lora_B.data().size(); ++i) {
    compare(p.lora_B.data()[i], analytic.grads.lora_B.data()[i]);
  }
  return out;
}

// d = 2 identity model where "north" embeds to e1 and "east" to e2; every
// other bucket is zero.
inline ModelParams compass_model() {
  ModelParams p;
  p.tokenizer.hash_buckets = 64;
  p.embed = Matrix(64, 2);
  p.proj = Matrix(2, 2);
  p.proj(0, 0) = 1.0;
  p.proj(1, 1) = 1.0;
  const auto north = tokenize("north", p.tokenizer, false).at(0);
  const auto east = tokenize("east", p.tokenizer, false).at(0);
  if (north == east) {
    throw std::logic_error("compass words collide");
  }
  p.embed(north, 0) = 1.0;
  p.embed(east, 1) = 1.0;
  return p;
}

inline std::filesystem::path data_dir() { return EMBKIT_TEST_DATA; }

// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("embkit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace embkit::testing
