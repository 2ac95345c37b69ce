#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "embkit/checkpoint.hpp"
#include "embkit/config.hpp"
#include "embkit/data.hpp"
#include "embkit/datagen.hpp"
#include "embkit/error.hpp"
#include "embkit/eval.hpp"
#include "embkit/experiments.hpp"
#include "embkit/fixtures.hpp"
#include "embkit/manifest.hpp"
#include "embkit/miner.hpp"
#include "embkit/trainer.hpp"

namespace embkit::cli {

namespace fs = std::filesystem;

// Exit codes are a stable contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

using Args = std::vector<std::string>;

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Parses args (without the program/subcommand names). Returns an exit code
// when parsing ended the command (help or error).
inline std::optional<int> parse(CLI::App& app, const Args& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitFatal;
  }
  return std::nullopt;
}

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitFatal;
}

inline std::string join_args(const std::string& name, const Args& args) {
  std::string s = "embkit " + name;
  for (const auto& a : args) {
    s += " " + a;
  }
  return s;
}

}  // namespace detail

// generate --corpus PATH --languages CSV --per-lang N --out PATH [--mock] [--seed S]
inline int cmd_generate(const Args& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Generate synthetic query-document pairs", "embkit generate"};
  std::string corpus, languages, out_path, gen_config, mock_reject;
  std::size_t per_lang = 0;
  std::uint64_t seed = 0;
  bool mock = false;
  DatasetOptions opt;
  app.add_option("--corpus", corpus, "input corpus JSONL {id,text,lang}")->required();
  app.add_option("--languages", languages, "comma-separated ISO-639 codes")->required();
  app.add_option("--per-lang", per_lang, "pairs to generate per language")->required();
  app.add_option("--out", out_path, "output JSONL path")->required();
  app.add_flag("--mock", mock, "use the offline deterministic client");
  app.add_option("--mock-reject", mock_reject, "languages the mock client rejects (comma-separated)");
  app.add_option("--seed", seed, "sampling seed");
  app.add_option("--gen-config", gen_config, "JSON with endpoint/model for the HTTP client");
  app.add_option("--min-len", opt.min_len, "minimum whitespace tokens per document");
  app.add_option("--max-len", opt.max_len, "maximum whitespace tokens per document");
  app.add_option("--max-in-flight", opt.max_in_flight, "concurrent generation requests");
  if (auto code = detail::parse(app, args, out, err)) {
    return *code;
  }
  return detail::guarded(err, [&] {
    detail::Stopwatch clock;
    opt.seed = seed;
    std::unique_ptr<GenerationClient> client;
    if (mock) {
      const auto rejected = detail::split_csv(mock_reject);
      client = std::make_unique<MockGenerationClient>(std::set<std::string>(rejected.begin(), rejected.end()));
    } else {
      HttpClientConfig hc = gen_config.empty() ? HttpClientConfig::from_json(nlohmann::json::object())
                                               : HttpClientConfig::from_json(read_json_file(gen_config));
      client = std::make_unique<HttpGenerationClient>(hc);
    }
    const auto langs = detail::split_csv(languages);
    if (langs.empty()) {
      throw Error(ErrorCode::InvalidConfig, "--languages is empty");
    }
    const DatasetResult result = build_synthetic_dataset(fs::path(corpus), langs, per_lang, *client, opt);
    const fs::path out_file(out_path);
    const fs::path stats_file = out_path + ".stats.json";
    write_synthetic_dataset(result, out_file, stats_file);

    RunManifest m;
    m.command = detail::join_args("generate", args);
    m.config_hash = config_hash({{"languages", langs}, {"per_lang", per_lang}, {"seed", seed}, {"mock", mock},
                                 {"min_len", opt.min_len}, {"max_len", opt.max_len}});
    m.seed = seed;
    m.add_input(corpus);
    m.add_output(out_file);
    m.add_output(stats_file);
    m.wall_time_seconds = clock.seconds();
    write_manifest(m, out_path + ".manifest.json");

    for (const auto& [lang, s] : result.stats) {
      if (s.error) {
        err << "language " << lang << " failed: " << *s.error << "\n";
      }
    }
    return result.complete() ? kExitOk : kExitPartial;
  });
}

// mine --pairs PATH --out PATH [--model CKPT] [--corpus PATH] [--k 7] [--margin M] [--strategy hard|random]
inline int cmd_mine(const Args& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Attach negatives to training pairs", "embkit mine"};
  std::string pairs_path, out_path, model_path, corpus_path, strategy = "hard";
  std::size_t k = 7;
  std::optional<double> margin;
  std::uint64_t seed = 0;
  app.add_option("--pairs", pairs_path, "training pairs JSONL")->required();
  app.add_option("--out", out_path, "output mined-pairs JSONL")->required();
  app.add_option("--model", model_path, "backbone checkpoint used for mining");
  app.add_option("--corpus", corpus_path, "document pool JSONL {id,text,task}; default: the pairs' positives");
  app.add_option("--k", k, "negatives per pair");
  app.add_option("--margin", margin, "drop candidates with sim > sim(pos) - margin");
  app.add_option("--strategy", strategy, "hard or random")->check(CLI::IsMember({"hard", "random"}));
  app.add_option("--seed", seed, "seed for padding / random draws");
  if (auto code = detail::parse(app, args, out, err)) {
    return *code;
  }
  return detail::guarded(err, [&] {
    detail::Stopwatch clock;
    auto pairs = read_pairs(pairs_path);
    std::vector<Document> pool;
    if (!corpus_path.empty()) {
      pool = read_documents(corpus_path);
    } else {
      std::map<std::pair<std::string, std::string>, std::string> seen;  // (task, text) -> id
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto& p = pairs[i];
        auto [it, inserted] = seen.try_emplace({p.task, p.positive}, p.pos_id.empty() ? "pos-" + std::to_string(i) : p.pos_id);
        if (inserted) {
          pool.push_back({it->second, p.positive, p.task, p.lang});
        }
        p.pos_id = it->second;
      }
    }
    std::vector<MinedPair> mined;
    if (strategy == "hard") {
      if (model_path.empty()) {
        throw Error(ErrorCode::InvalidConfig, "--model is required for --strategy hard");
      }
      const ModelParams model = load_checkpoint(model_path);
      const CorpusIndex index = build_index(model, pool);
      mined = mine_hard_negatives(pairs, model, index, {.num_negatives = k, .margin_filter = margin, .buffer = 0, .seed = seed});
    } else {
      mined = random_negatives(pairs, pool, k, seed);
    }
    write_mined_pairs(out_path, mined);

    RunManifest m;
    m.command = detail::join_args("mine", args);
    nlohmann::json cfg = {{"k", k}, {"strategy", strategy}, {"seed", seed}};
    if (margin) cfg["margin"] = *margin;
    m.config_hash = config_hash(cfg);
    m.seed = seed;
    m.add_input(pairs_path);
    if (!model_path.empty()) m.add_input(model_path);
    if (!corpus_path.empty()) m.add_input(corpus_path);
    m.add_output(out_path);
    m.wall_time_seconds = clock.seconds();
    write_manifest(m, out_path + ".manifest.json");
    return kExitOk;
  });
}

// train --pairs PATH --out DIR [--model CKPT] [--config JSON] [--total-steps N] [--seed S]
inline int cmd_train(const Args& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Contrastive training", "embkit train"};
  std::string pairs_path, out_dir, model_path, config_path;
  std::optional<std::size_t> total_steps;
  std::optional<std::uint64_t> seed;
  app.add_option("--pairs", pairs_path, "training pairs JSONL")->required();
  app.add_option("--out", out_dir, "output run directory")->required();
  app.add_option("--model", model_path, "initial checkpoint (default: fresh init from config)");
  app.add_option("--config", config_path, "JSON with \"trainer\" and optional \"model\" blocks");
  app.add_option("--total-steps", total_steps, "override trainer.total_steps");
  app.add_option("--seed", seed, "override trainer.seed");
  if (auto code = detail::parse(app, args, out, err)) {
    return *code;
  }
  return detail::guarded(err, [&] {
    detail::Stopwatch clock;
    nlohmann::json cfg = config_path.empty() ? nlohmann::json::object() : read_json_file(config_path);
    const fs::path base = config_path.empty() ? fs::path(".") : fs::path(config_path).parent_path();
    TrainerConfig tc = trainer_config_from_json(cfg.value("trainer", nlohmann::json::object()));
    if (total_steps) {
      tc.total_steps = *total_steps;
      tc.warmup_steps = std::min(tc.warmup_steps, tc.total_steps);
    }
    if (seed) tc.seed = *seed;
    const ModelParams init = !model_path.empty() ? load_checkpoint(model_path)
                                                 : model_from_json(cfg.value("model", nlohmann::json::object()), base);
    const auto pairs = read_pairs(pairs_path);
    const TrainResult r = train(init, pairs, tc);

    const fs::path dir(out_dir);
    save_checkpoint(r.model, dir / "model.ckpt");
    write_file_bytes(dir / "steps.json", RunRecorder::step_log_json(r.log).dump() + "\n");
    RunManifest m;
    m.command = detail::join_args("train", args);
    m.config_hash = config_hash(trainer_config_to_json(tc));
    m.seed = tc.seed;
    m.add_input(pairs_path);
    if (!model_path.empty()) m.add_input(model_path);
    if (!config_path.empty()) m.add_input(config_path);
    m.add_output(dir / "model.ckpt");
    m.add_output(dir / "steps.json");
    m.wall_time_seconds = clock.seconds();
    write_manifest(m, dir / "manifest.json");
    if (!r.log.empty()) {
      out << "trained " << r.log.size() << " steps, final loss " << r.log.back().loss << "\n";
    }
    return kExitOk;
  });
}

namespace detail {

// "--group NAME=task1,task2"
inline Grouping parse_groups(const std::vector<std::string>& specs, const std::vector<RetrievalTask>& tasks) {
  Grouping g;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::InvalidConfig, "group spec must be NAME=task1,task2: " + s);
    }
    g[s.substr(0, eq)] = split_csv(s.substr(eq + 1));
  }
  if (g.empty()) {
    for (const auto& t : tasks) {
      g["all"].push_back(t.name);
    }
  }
  return g;
}

}  // namespace detail

// eval --model CKPT --task-dir DIR [--task-dir DIR ...] --out DIR [--group NAME=t1,t2 ...]
inline int cmd_eval(const Args& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Evaluate a checkpoint on retrieval task bundles", "embkit eval"};
  std::string model_path, out_dir;
  std::vector<std::string> task_dirs, groups;
  app.add_option("--model", model_path, "checkpoint")->required();
  app.add_option("--task-dir", task_dirs, "task bundle directory (repeatable)")->required();
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--group", groups, "NAME=task1,task2 aggregate group (repeatable); default: all");
  if (auto code = detail::parse(app, args, out, err)) {
    return *code;
  }
  return detail::guarded(err, [&] {
    detail::Stopwatch clock;
    const ModelParams model = load_checkpoint(model_path);
    std::vector<RetrievalTask> tasks;
    for (const auto& d : task_dirs) {
      tasks.push_back(load_task(d));
    }
    const Grouping grouping = detail::parse_groups(groups, tasks);
    const MetricReport report = aggregate(evaluate_tasks(model, tasks), grouping);
    const std::string md = report_to_markdown(report);
    const fs::path dir(out_dir);
    write_file_bytes(dir / "metrics.json", report_to_json(report).dump(2) + "\n");
    write_file_bytes(dir / "metrics.md", md);
    RunManifest m;
    m.command = detail::join_args("eval", args);
    nlohmann::json gj = nlohmann::json::object();
    for (const auto& [name, members] : grouping) gj[name] = members;
    m.config_hash = config_hash({{"groups", gj}});
    m.add_input(model_path);
    for (const auto& d : task_dirs) {
      for (const char* f : {"queries.jsonl", "corpus.jsonl", "qrels.tsv"}) {
        m.add_input(fs::path(d) / f);
      }
    }
    m.add_output(dir / "metrics.json");
    m.add_output(dir / "metrics.md");
    m.wall_time_seconds = clock.seconds();
    write_manifest(m, dir / "manifest.json");
    out << md;
    return kExitOk;
  });
}

namespace detail {

inline std::vector<std::uint64_t> seeds_from(const nlohmann::json& cfg, std::vector<std::uint64_t> fallback) {
  if (!cfg.contains("seeds")) {
    return fallback;
  }
  return cfg.at("seeds").get<std::vector<std::uint64_t>>();
}

inline std::vector<RetrievalTask> eval_tasks_from(const nlohmann::json& cfg, const fs::path& base, Grouping* grouping) {
  std::vector<RetrievalTask> tasks;
  for (const auto& e : cfg.at("eval_tasks")) {
    const std::string dir = e.is_string() ? e.get<std::string>() : e.at("dir").get<std::string>();
    tasks.push_back(load_task(resolve_path(base, dir)));
    if (grouping && e.is_object() && e.contains("groups")) {
      for (const auto& g : e.at("groups")) {
        (*grouping)[g.get<std::string>()].push_back(tasks.back().name);
      }
    }
  }
  if (tasks.empty()) {
    throw Error(ErrorCode::InvalidConfig, "eval_tasks is empty");
  }
  if (grouping && grouping->empty()) {
    for (const auto& t : tasks) {
      (*grouping)["all"].push_back(t.name);
    }
  }
  return tasks;
}

}  // namespace detail

// sweep --config JSON --out DIR : runs one experiment (kind = scale_sweep,
// negative_comparison or mixture_study) into DIR/<config hash>/.
inline int cmd_sweep(const Args& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Run an experiment from a declarative config", "embkit sweep"};
  std::string config_path, out_dir;
  app.add_option("--config", config_path, "experiment config JSON")->required();
  app.add_option("--out", out_dir, "parent directory for run directories")->required();
  if (auto code = detail::parse(app, args, out, err)) {
    return *code;
  }
  return detail::guarded(err, [&] {
    detail::Stopwatch clock;
    const nlohmann::json cfg = read_json_file(config_path);
    const fs::path base = fs::path(config_path).parent_path();
    const std::string kind = cfg.value("kind", std::string());
    const std::string hash = config_hash(cfg);
    const fs::path run_dir = fs::path(out_dir) / hash;
    const RunRecorder recorder{run_dir, cfg.value("save_checkpoints", true)};

    const ModelParams init = model_from_json(cfg.value("model", nlohmann::json::object()), base);
    const TrainerConfig trainer = trainer_config_from_json(cfg.value("trainer", nlohmann::json::object()));
    std::string csv;
    nlohmann::json aggregates = nlohmann::json::object();
    RunManifest m;

    if (kind == "scale_sweep") {
      ScaleSweepSpec spec;
      spec.init = init;
      spec.trainer = trainer;
      spec.sizes = cfg.value("sizes", std::vector<std::size_t>{});
      if (spec.sizes.empty()) {
        throw Error(ErrorCode::InsufficientData, "sizes list is empty");
      }
      spec.seeds = detail::seeds_from(cfg, spec.seeds);
      const fs::path pool = resolve_path(base, cfg.at("pool").get<std::string>());
      spec.pool = read_pairs(pool);
      m.add_input(pool);
      spec.eval_tasks = detail::eval_tasks_from(cfg, base, nullptr);
      const auto points = run_scale_sweep(spec, &recorder);
      csv = scale_sweep_csv(points);
      for (const auto& p : points) {
        aggregates["n=" + std::to_string(p.train_size)] = p.mean_ndcg;
      }
    } else if (kind == "negative_comparison") {
      NegativeComparisonSpec spec;
      spec.init = init;
      spec.trainer = trainer;
      spec.seeds = detail::seeds_from(cfg, spec.seeds);
      for (const auto& a : cfg.at("arms")) {
        NegativeArm arm;
        arm.label = a.at("label").get<std::string>();
        const fs::path p = resolve_path(base, a.at("pairs").get<std::string>());
        if (!fs::exists(p)) {
          throw Error(ErrorCode::InsufficientData, "pairs file for strategy '" + arm.label + "' not found: " + p.string());
        }
        arm.pairs = read_pairs(p);
        m.add_input(p);
        arm.loss = a.contains("loss") ? loss_config_from_json(a.at("loss")) : trainer.loss;
        spec.arms.push_back(std::move(arm));
      }
      spec.eval_tasks = detail::eval_tasks_from(cfg, base, nullptr);
      const auto arms = run_negative_comparison(spec, &recorder);
      csv = negative_comparison_csv(arms);
      for (const auto& a : arms) {
        aggregates[a.label] = a.mean_ndcg;
      }
    } else if (kind == "mixture_study") {
      MixtureStudySpec spec;
      spec.init = init;
      spec.trainer = trainer;
      spec.seeds = detail::seeds_from(cfg, spec.seeds);
      spec.mixture_seed = cfg.value("mixture_seed", std::uint64_t{0});
      for (const auto& s : cfg.at("sources")) {
        const fs::path p = resolve_path(base, s.at("path").get<std::string>());
        spec.sources.push_back({s.at("name").get<std::string>(), read_pairs(p)});
        m.add_input(p);
      }
      for (const auto& mj : cfg.at("mixtures")) {
        Mixture mix;
        mix.label = mj.at("label").get<std::string>();
        for (const auto& [name, w] : mj.at("weights").items()) {
          mix.weights.emplace_back(name, w.get<double>());
        }
        mix.size = mj.at("size").get<std::size_t>();
        spec.mixtures.push_back(std::move(mix));
      }
      spec.eval_tasks = detail::eval_tasks_from(cfg, base, &spec.grouping);
      const auto rows = run_mixture_experiment(spec, &recorder);
      csv = mixture_csv(rows, spec.grouping);
      for (const auto& r : rows) {
        for (const auto& [g, v] : r.group_means) {
          aggregates[r.label + "/" + g] = v;
        }
      }
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown experiment kind '" + kind + "'");
    }

    write_file_bytes(run_dir / "results.csv", csv);
    write_file_bytes(run_dir / "metrics.json",
                     nlohmann::json{{"kind", kind}, {"aggregates", aggregates}, {"per_task", nlohmann::json::object()}}.dump(2) + "\n");
    write_file_bytes(run_dir / "config.json", cfg.dump(2) + "\n");
    m.command = detail::join_args("sweep", args);
    m.config_hash = hash;
    m.add_input(config_path);
    m.add_output(run_dir / "results.csv");
    m.add_output(run_dir / "metrics.json");
    m.wall_time_seconds = clock.seconds();
    write_manifest(m, run_dir / "manifest.json");
    out << csv;
    err << "run directory: " << run_dir.string() << "\n";
    return kExitOk;
  });
}

// report RUN_DIR... --out DIR : merges the runs' metrics.json aggregates.
inline int cmd_report(const Args& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Merge metric JSON from run directories into one table", "embkit report"};
  std::vector<std::string> run_dirs;
  std::string out_dir;
  app.add_option("runs", run_dirs, "run directories containing metrics.json");
  app.add_option("--out", out_dir, "output directory for report.csv / report.md");
  if (auto code = detail::parse(app, args, out, err)) {
    return *code;
  }
  return detail::guarded(err, [&] {
    std::vector<std::pair<std::string, std::map<std::string, double>>> rows;
    std::set<std::string> columns;
    for (const auto& d : run_dirs) {
      const fs::path f = fs::path(d) / "metrics.json";
      if (!fs::exists(f)) {
        err << "warning: no metrics.json in " << d << "\n";
        continue;
      }
      const auto j = read_json_file(f);
      std::map<std::string, double> vals;
      for (const auto& [g, v] : j.at("aggregates").items()) {
        vals[g] = v.get<double>();
        columns.insert(g);
      }
      fs::path name = fs::path(d);
      if (name.filename().empty()) name = name.parent_path();
      rows.emplace_back(name.filename().string(), std::move(vals));
    }
    if (rows.empty()) {
      throw Error(ErrorCode::NoRunsFound, "none of the given directories contains metrics.json");
    }
    std::string csv = "run";
    std::string md = "| Run |";
    std::string rule = "|---|";
    for (const auto& c : columns) {
      csv += "," + c;
      md += " " + c + " |";
      rule += "---:|";
    }
    csv += "\n";
    md += "\n" + rule + "\n";
    for (const auto& [name, vals] : rows) {
      csv += name;
      md += "| " + name + " |";
      for (const auto& c : columns) {
        const auto it = vals.find(c);
        csv += ",";
        if (it != vals.end()) {
          csv += csv_number(it->second);
          md += " " + format_score(it->second);
        }
        md += " |";
      }
      csv += "\n";
      md += "\n";
    }
    if (!out_dir.empty()) {
      write_file_bytes(fs::path(out_dir) / "report.csv", csv);
      write_file_bytes(fs::path(out_dir) / "report.md", md);
    }
    out << md;
    return kExitOk;
  });
}

// fixture --kind separable|distractor|scale|bilingual --out DIR : writes a
// synthetic dataset with its eval bundle(s) for trying the pipeline.
inline int cmd_fixture(const Args& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Write a synthetic fixture dataset", "embkit fixture"};
  std::string kind, out_dir;
  std::uint64_t seed = 0;
  app.add_option("--kind", kind, "fixture kind")
      ->required()
      ->check(CLI::IsMember({"separable", "distractor", "scale", "bilingual"}));
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", seed, "fixture seed (default: the kind's built-in seed)");
  if (auto code = detail::parse(app, args, out, err)) {
    return *code;
  }
  return detail::guarded(err, [&] {
    const fs::path dir(out_dir);
    auto emit = [&](const fixtures::Fixture& f, const std::string& stem) {
      write_pairs(dir / (stem + "pairs.jsonl"), f.train);
      write_documents(dir / (stem + "pool.jsonl"), f.pool);
      save_task(f.eval, dir / (stem + "task"));
    };
    if (kind == "separable") {
      emit(seed ? fixtures::separable_fixture(seed) : fixtures::separable_fixture(), "");
    } else if (kind == "distractor") {
      emit(seed ? fixtures::distractor_fixture(seed) : fixtures::distractor_fixture(), "");
    } else if (kind == "scale") {
      emit(seed ? fixtures::scale_fixture(seed) : fixtures::scale_fixture(), "");
    } else {
      const auto both = seed ? fixtures::bilingual_fixture(seed) : fixtures::bilingual_fixture();
      emit(both[0], "en_");
      emit(both[1], "fr_");
    }
    out << "wrote " << kind << " fixture to " << dir.string() << "\n";
    return kExitOk;
  });
}

inline std::string usage() {
  return "usage: embkit <command> [flags]\n"
         "commands:\n"
         "  generate  synthetic query generation from a document corpus\n"
         "  mine      attach hard (or random) negatives to training pairs\n"
         "  train     contrastive training\n"
         "  eval      nDCG@10 / recall evaluation on task bundles\n"
         "  sweep     run a scale / negative-strategy / mixture experiment\n"
         "  report    merge run metrics into one comparison table\n"
         "  fixture   write a synthetic fixture dataset\n"
         "run 'embkit <command> --help' for flags\n";
}

inline int dispatch(const Args& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (argv.empty()) {
    err << usage();
    return kExitFatal;
  }
  const std::string cmd = argv[0];
  const Args rest(argv.begin() + 1, argv.end());
  if (cmd == "generate") return cmd_generate(rest, out, err);
  if (cmd == "mine") return cmd_mine(rest, out, err);
  if (cmd == "train") return cmd_train(rest, out, err);
  if (cmd == "eval") return cmd_eval(rest, out, err);
  if (cmd == "sweep") return cmd_sweep(rest, out, err);
  if (cmd == "report") return cmd_report(rest, out, err);
  if (cmd == "fixture") return cmd_fixture(rest, out, err);
  if (cmd == "--help" || cmd == "-h" || cmd == "help") {
    out << usage();
    return kExitOk;
  }
  err << "unknown command '" << cmd << "'\n" << usage();
  return kExitFatal;
}

}  // namespace embkit::cli
