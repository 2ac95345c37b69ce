#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "embkit/error.hpp"
#include "embkit/model.hpp"

namespace embkit {

struct Schedule {
  double learning_rate = 1e-3;
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 1000;
};

// Linear warmup from 0 to the peak over [0, warmup], then linear decay to 0
// at total_steps.
inline double lr_at(std::size_t step, const Schedule& s) {
  if (step > s.total_steps) {
    throw Error(ErrorCode::StepOutOfRange,
                "step " + std::to_string(step) + " beyond total_steps " + std::to_string(s.total_steps));
  }
  if (s.warmup_steps > s.total_steps) {
    throw Error(ErrorCode::InvalidConfig, "warmup_steps exceeds total_steps");
  }
  if (step < s.warmup_steps) {
    return s.learning_rate * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  }
  if (step == s.warmup_steps) {
    return s.learning_rate;
  }
  const double remaining = static_cast<double>(s.total_steps - step);
  return s.learning_rate * remaining / static_cast<double>(s.total_steps - s.warmup_steps);
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Matrix m_embed, v_embed;
  std::vector<bool> embed_touched;
  std::vector<std::size_t> embed_rows;  // rows with non-zero moments
  Matrix m_proj, v_proj;
  Matrix m_A, v_A;
  Matrix m_B, v_B;
  std::size_t step = 0;
};

inline AdamState make_adam_state(const ModelParams& p) {
  AdamState s;
  s.m_embed = Matrix(p.embed.rows(), p.embed.cols());
  s.v_embed = Matrix(p.embed.rows(), p.embed.cols());
  s.embed_touched.assign(p.embed.rows(), false);
  s.m_proj = Matrix(p.proj.rows(), p.proj.cols());
  s.v_proj = Matrix(p.proj.rows(), p.proj.cols());
  s.m_A = Matrix(p.lora_A.rows(), p.lora_A.cols());
  s.v_A = Matrix(p.lora_A.rows(), p.lora_A.cols());
  s.m_B = Matrix(p.lora_B.rows(), p.lora_B.cols());
  s.v_B = Matrix(p.lora_B.rows(), p.lora_B.cols());
  return s;
}

namespace detail {

inline void require_finite(std::span<const double> values, const char* name) {
  for (const double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteGradient, std::string("non-finite gradient in ") + name);
    }
  }
}

struct AdamCoeffs {
  double lr, b1, b2, eps, c1, c2;
};

inline void adam_update(std::span<double> param, std::span<double> m, std::span<double> v,
                        std::span<const double> g, const AdamCoeffs& k) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double gi = g.empty() ? 0.0 : g[i];
    m[i] = k.b1 * m[i] + (1.0 - k.b1) * gi;
    v[i] = k.b2 * v[i] + (1.0 - k.b2) * gi * gi;
    const double m_hat = m[i] / k.c1;
    const double v_hat = v[i] / k.c2;
    param[i] -= k.lr * m_hat / (std::sqrt(v_hat) + k.eps);
  }
}

}  // namespace detail

// One Adam step with bias correction. Rows of the embedding table whose
// moments are still zero and that receive no gradient are skipped: their
// update is exactly zero.
inline void adam_step(ModelParams& p, const ParamGrads& g, AdamState& s, double lr,
                      const AdamConfig& cfg = {}) {
  // Validate everything before touching any tensor.
  for (std::size_t slot = 0; slot < g.embed.ids().size(); ++slot) {
    detail::require_finite(g.embed.row_at(slot), "embed");
  }
  detail::require_finite(g.proj.data(), "proj");
  detail::require_finite(g.lora_A.data(), "lora_A");
  detail::require_finite(g.lora_B.data(), "lora_B");

  s.step += 1;
  const double t = static_cast<double>(s.step);
  const detail::AdamCoeffs k{lr, cfg.beta1, cfg.beta2, cfg.eps,
                             1.0 - std::pow(cfg.beta1, t), 1.0 - std::pow(cfg.beta2, t)};

  if (!g.base_frozen) {
    for (std::size_t slot = 0; slot < g.embed.ids().size(); ++slot) {
      const std::size_t id = g.embed.ids()[slot];
      const auto row = g.embed.row_at(slot);
      bool nonzero = false;
      for (const double x : row) {
        nonzero = nonzero || x != 0.0;
      }
      if (nonzero && !s.embed_touched[id]) {
        s.embed_touched[id] = true;
        s.embed_rows.push_back(id);
      }
    }
    for (const std::size_t id : s.embed_rows) {
      std::vector<double> grow(p.embed.cols(), 0.0);
      if (g.embed.contains(id)) {
        for (std::size_t j = 0; j < grow.size(); ++j) {
          grow[j] = g.embed.get(id, j);
        }
      }
      detail::adam_update(p.embed.row(id), s.m_embed.row(id), s.v_embed.row(id), grow, k);
    }
    detail::adam_update(p.proj.data(), s.m_proj.data(), s.v_proj.data(), g.proj.data(), k);
  }
  if (p.has_adapter()) {
    detail::adam_update(p.lora_A.data(), s.m_A.data(), s.v_A.data(), g.lora_A.data(), k);
    detail::adam_update(p.lora_B.data(), s.m_B.data(), s.v_B.data(), g.lora_B.data(), k);
  }
}

}  // namespace embkit
