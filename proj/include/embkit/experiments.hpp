#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "embkit/checkpoint.hpp"
#include "embkit/config.hpp"
#include "embkit/data.hpp"
#include "embkit/error.hpp"
#include "embkit/eval.hpp"
#include "embkit/trainer.hpp"

namespace embkit {

// Writes per-run checkpoints and step logs below a run directory.
struct RunRecorder {
  std::filesystem::path dir;
  bool save_checkpoints = true;

  static std::string run_name(const std::string& label, std::uint64_t seed) {
    return label + "_seed" + std::to_string(seed);
  }
  std::filesystem::path checkpoint_path(const std::string& label, std::uint64_t seed) const {
    return dir / "checkpoints" / (run_name(label, seed) + ".ckpt");
  }
  std::filesystem::path log_path(const std::string& label, std::uint64_t seed) const {
    return dir / "logs" / (run_name(label, seed) + ".json");
  }

  void record(const std::string& label, std::uint64_t seed, const TrainResult& r) const {
    if (save_checkpoints) {
      save_checkpoint(r.model, checkpoint_path(label, seed));
    }
    write_file_bytes(log_path(label, seed), step_log_json(r.log).dump() + "\n");
  }

  static nlohmann::json step_log_json(const std::vector<StepLog>& log) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : log) {
      a.push_back({{"step", s.step}, {"lr", s.lr}, {"loss", s.loss}});
    }
    return a;
  }
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one value
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) {
    return r;
  }
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (const double x : xs) {
      ss += (x - r.mean) * (x - r.mean);
    }
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

inline std::map<std::string, TaskMetrics> evaluate_tasks(const ModelParams& model, const std::vector<RetrievalTask>& tasks) {
  std::map<std::string, TaskMetrics> out;
  for (const auto& t : tasks) {
    out[t.name] = evaluate_model(model, t);
  }
  return out;
}

inline double mean_ndcg(const ModelParams& model, const std::vector<RetrievalTask>& tasks) {
  if (tasks.empty()) {
    throw Error(ErrorCode::InvalidConfig, "no evaluation tasks");
  }
  double s = 0.0;
  for (const auto& t : tasks) {
    s += evaluate_model(model, t).ndcg_at_10;
  }
  return s / static_cast<double>(tasks.size());
}

inline std::string csv_number(double v) {
  std::ostringstream o;
  o.precision(6);
  o << std::fixed << v;
  return o.str();
}

inline void require_seeds(const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) {
    throw Error(ErrorCode::InvalidConfig, "at least one repetition seed is required");
  }
}

// ---------------------------------------------------------------- scale sweep

struct ScaleSweepSpec {
  ModelParams init;
  TrainerConfig trainer;
  std::vector<TrainingPair> pool;
  std::vector<std::size_t> sizes;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<RetrievalTask> eval_tasks;
};

struct ScalePoint {
  std::size_t train_size = 0;
  double mean_ndcg = 0.0;
  double std_ndcg = 0.0;
  std::vector<double> per_seed;
};

// For seed s the training subsets are nested prefixes of one seeded
// permutation of the pool; every run starts from the same init.
inline std::vector<ScalePoint> run_scale_sweep(const ScaleSweepSpec& spec, const RunRecorder* recorder = nullptr) {
  require_seeds(spec.seeds);
  if (spec.sizes.empty()) {
    throw Error(ErrorCode::InsufficientData, "scale sweep needs at least one size");
  }
  for (std::size_t i = 0; i < spec.sizes.size(); ++i) {
    if (spec.sizes[i] == 0) {
      throw Error(ErrorCode::InsufficientData, "training size 0");
    }
    if (i > 0 && spec.sizes[i] <= spec.sizes[i - 1]) {
      throw Error(ErrorCode::InvalidConfig, "sizes must be strictly ascending");
    }
    if (spec.sizes[i] > spec.pool.size()) {
      throw Error(ErrorCode::InsufficientData, "size " + std::to_string(spec.sizes[i]) + " exceeds the " +
                                                   std::to_string(spec.pool.size()) + " available pairs");
    }
  }
  std::vector<ScalePoint> points;
  for (const std::size_t size : spec.sizes) {
    ScalePoint pt;
    pt.train_size = size;
    for (const std::uint64_t seed : spec.seeds) {
      std::vector<std::size_t> order(spec.pool.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(seed);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<TrainingPair> subset;
      subset.reserve(size);
      for (std::size_t i = 0; i < size; ++i) {
        subset.push_back(spec.pool[order[i]]);
      }
      TrainerConfig cfg = spec.trainer;
      cfg.seed = seed;
      const TrainResult r = train(spec.init, subset, cfg);
      if (recorder) {
        recorder->record("size" + std::to_string(size), seed, r);
      }
      pt.per_seed.push_back(mean_ndcg(r.model, spec.eval_tasks));
    }
    const auto ms = mean_std(pt.per_seed);
    pt.mean_ndcg = ms.mean;
    pt.std_ndcg = ms.std;
    points.push_back(std::move(pt));
  }
  return points;
}

inline std::string scale_sweep_csv(const std::vector<ScalePoint>& points) {
  std::string out = "train_size,mean_ndcg@10,std\n";
  for (const auto& p : points) {
    out += std::to_string(p.train_size) + "," + csv_number(p.mean_ndcg) + "," + csv_number(p.std_ndcg) + "\n";
  }
  return out;
}

// ------------------------------------------------------- negative comparison

struct NegativeArm {
  std::string label;
  std::vector<TrainingPair> pairs;
  LossConfig loss;
};

struct NegativeComparisonSpec {
  ModelParams init;
  TrainerConfig trainer;  // loss is taken from each arm
  std::vector<NegativeArm> arms;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<RetrievalTask> eval_tasks;
};

struct ArmResult {
  std::string label;
  double mean_ndcg = 0.0;
  double std_ndcg = 0.0;
  std::vector<double> per_seed;
};

// Arms share init, schedule and seeds; they differ only in their pairs'
// negatives and the loss that consumes them.
inline std::vector<ArmResult> run_negative_comparison(const NegativeComparisonSpec& spec,
                                                      const RunRecorder* recorder = nullptr) {
  require_seeds(spec.seeds);
  if (spec.arms.empty()) {
    throw Error(ErrorCode::InsufficientData, "no strategies to compare");
  }
  std::vector<ArmResult> out;
  for (const auto& arm : spec.arms) {
    if (arm.pairs.empty()) {
      throw Error(ErrorCode::InsufficientData, "strategy '" + arm.label + "' has no training pairs");
    }
    ArmResult res;
    res.label = arm.label;
    for (const std::uint64_t seed : spec.seeds) {
      TrainerConfig cfg = spec.trainer;
      cfg.seed = seed;
      cfg.loss = arm.loss;
      const TrainResult r = train(spec.init, arm.pairs, cfg);
      if (recorder) {
        recorder->record(arm.label, seed, r);
      }
      res.per_seed.push_back(mean_ndcg(r.model, spec.eval_tasks));
    }
    const auto ms = mean_std(res.per_seed);
    res.mean_ndcg = ms.mean;
    res.std_ndcg = ms.std;
    out.push_back(std::move(res));
  }
  return out;
}

inline std::string negative_comparison_csv(const std::vector<ArmResult>& arms) {
  std::string out = "strategy,mean_ndcg@10,std\n";
  for (const auto& a : arms) {
    out += a.label + "," + csv_number(a.mean_ndcg) + "," + csv_number(a.std_ndcg) + "\n";
  }
  return out;
}

// ----------------------------------------------------------- mixture study

struct MixtureSource {
  std::string name;
  std::vector<TrainingPair> pairs;
};

struct Mixture {
  std::string label;
  std::vector<std::pair<std::string, double>> weights;  // source name -> weight
  std::size_t size = 0;
};

// Largest-remainder rounding of weight shares to integer counts summing to size.
inline std::vector<std::size_t> mixture_counts(const Mixture& m) {
  double total = 0.0;
  for (const auto& [name, w] : m.weights) {
    if (!(w >= 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "negative weight for source '" + name + "'");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "mixture '" + m.label + "' has no positive weight");
  }
  std::vector<std::size_t> counts(m.weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    const double exact = static_cast<double>(m.size) * m.weights[i].second / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < m.size; ++r, ++assigned) {
    ++counts[remainders[r % remainders.size()].second];
  }
  return counts;
}

// Takes the leading count_i pairs of each source and interleaves them by a
// stratified round-robin: the next slot goes to the source furthest behind
// its quota.
// Stratified round-robin: each source's pairs are spread evenly over the
// output in proportion to its count.
inline std::vector<TrainingPair> interleave_mixture(const std::vector<MixtureSource>& sources, const Mixture& m) {
  const auto counts = mixture_counts(m);
  std::vector<const MixtureSource*> chosen;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    const auto& name = m.weights[i].first;
    const auto it = std::find_if(sources.begin(), sources.end(), [&](const auto& s) { return s.name == name; });
    if (it == sources.end()) {
      throw Error(ErrorCode::EmptySource, "mixture '" + m.label + "' names unknown source '" + name + "'");
    }
    if (counts[i] > 0 && it->pairs.empty()) {
      throw Error(ErrorCode::EmptySource, "source '" + name + "' has no pairs");
    }
    if (counts[i] > it->pairs.size()) {
      throw Error(ErrorCode::InsufficientData, "source '" + name + "' has " + std::to_string(it->pairs.size()) +
                                                   " pairs, mixture needs " + std::to_string(counts[i]));
    }
    chosen.push_back(&*it);
  }
  std::vector<TrainingPair> out;
  out.reserve(m.size);
  std::vector<std::size_t> taken(counts.size(), 0);
  for (std::size_t slot = 0; slot < m.size; ++slot) {
    std::size_t best = counts.size();
    double best_key = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (taken[i] >= counts[i]) {
        continue;
      }
      const double key = (static_cast<double>(taken[i]) + 0.5) / static_cast<double>(counts[i]);
      if (best == counts.size() || key < best_key) {
        best = i;
        best_key = key;
      }
    }
    out.push_back(chosen[best]->pairs[taken[best]++]);
  }
  return out;
}

inline std::vector<TrainingPair> build_mixture(const std::vector<MixtureSource>& sources, const Mixture& m,
                                               std::uint64_t seed) {
  auto out = interleave_mixture(sources, m);
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

struct MixtureStudySpec {
  ModelParams init;
  TrainerConfig trainer;
  std::vector<MixtureSource> sources;
  std::vector<Mixture> mixtures;
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t mixture_seed = 0;
  std::vector<RetrievalTask> eval_tasks;
  Grouping grouping;
};

struct MixtureResult {
  std::string label;
  std::map<std::string, double> group_means;  // averaged over seeds
  std::vector<MetricReport> per_seed;
};

inline std::vector<MixtureResult> run_mixture_experiment(const MixtureStudySpec& spec,
                                                         const RunRecorder* recorder = nullptr) {
  require_seeds(spec.seeds);
  for (const auto& s : spec.sources) {
    if (s.pairs.empty()) {
      throw Error(ErrorCode::EmptySource, "source '" + s.name + "' has no pairs");
    }
  }
  std::vector<MixtureResult> out;
  for (const auto& m : spec.mixtures) {
    const auto pairs = build_mixture(spec.sources, m, spec.mixture_seed);
    MixtureResult res;
    res.label = m.label;
    for (const std::uint64_t seed : spec.seeds) {
      TrainerConfig cfg = spec.trainer;
      cfg.seed = seed;
      const TrainResult r = train(spec.init, pairs, cfg);
      if (recorder) {
        recorder->record(m.label, seed, r);
      }
      res.per_seed.push_back(aggregate(evaluate_tasks(r.model, spec.eval_tasks), spec.grouping));
    }
    for (const auto& [group, members] : spec.grouping) {
      std::vector<double> vals;
      for (const auto& rep : res.per_seed) {
        vals.push_back(rep.aggregates.at(group));
      }
      res.group_means[group] = mean_std(vals).mean;
    }
    out.push_back(std::move(res));
  }
  return out;
}

inline std::string mixture_csv(const std::vector<MixtureResult>& rows, const Grouping& grouping) {
  std::string out = "mixture";
  for (const auto& [g, members] : grouping) {
    out += "," + g;
  }
  out += "\n";
  for (const auto& r : rows) {
    out += r.label;
    for (const auto& [g, members] : grouping) {
      out += "," + csv_number(r.group_means.at(g));
    }
    out += "\n";
  }
  return out;
}

}  // namespace embkit
