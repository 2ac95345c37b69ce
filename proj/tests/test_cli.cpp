#include <gtest/gtest.h>

#include <sstream>

#include "embkit/cli.hpp"
#include "test_support.hpp"

using namespace embkit;
using embkit::testing::data_dir;
using embkit::testing::scratch_dir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const cli::Args& argv) {
  std::ostringstream out, err;
  const int code = cli::dispatch(argv, out, err);
  return {code, out.str(), err.str()};
}

void write_corpus(const fs::path& path, const std::map<std::string, std::size_t>& docs_per_lang, std::size_t tokens = 120) {
  std::vector<Document> docs;
  for (const auto& [lang, n] : docs_per_lang) {
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      for (std::size_t t = 0; t < tokens; ++t) text += (t ? " " : "") + lang + "w" + std::to_string(i * 31 + t);
      docs.push_back({lang + std::to_string(i), text, "", lang});
    }
  }
  write_documents(path, docs);
}

nlohmann::json without_wall_time(const fs::path& manifest) {
  auto j = read_json_file(manifest);
  j.erase("wall_time_seconds");
  return j;
}

std::set<fs::path> files_under(const fs::path& dir) {
  std::set<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), dir));
  }
  return out;
}

}  // namespace

TEST(Cli, UsageAndUnknownCommands) {
  EXPECT_EQ(run({}).code, 1);
  const auto help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("generate"), std::string::npos);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"train", "--help"}).code, 0);
}

TEST(Cli, MissingRequiredFlagPrintsUsage) {
  const auto r = run({"generate", "--languages", "fr", "--per-lang", "2", "--out", "x.jsonl", "--mock"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--corpus"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, UnknownFlagIsFatal) {
  const auto r = run({"eval", "--model", "m", "--task-dir", "t", "--out", "o", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
}

TEST(Cli, GoldenEvalTable) {
  const auto dir = scratch_dir("cli_eval");
  save_checkpoint(embkit::testing::compass_model(), dir / "compass.ckpt");
  const auto r = run({"eval", "--model", (dir / "compass.ckpt").string(), "--task-dir",
                      (data_dir() / "tasks/compass").string(), "--task-dir", (data_dir() / "tasks/tie").string(),
                      "--out", (dir / "out").string(), "--group", "all=compass,tie", "--group", "en=compass"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, read_file_bytes(data_dir() / "golden/eval_table.md"));
  EXPECT_EQ(read_file_bytes(dir / "out/metrics.md"), r.out);
  const auto metrics = read_json_file(dir / "out/metrics.json");
  EXPECT_NEAR(metrics.at("aggregates").at("en").get<double>(), 0.6484, 1e-4);
  EXPECT_NO_THROW(read_and_verify_manifest(dir / "out/manifest.json"));
}

TEST(Cli, GenerateMockWritesPairsAndStats) {
  const auto dir = scratch_dir("cli_gen");
  write_corpus(dir / "corpus.jsonl", {{"fr", 6}, {"de", 6}});
  const auto r = run({"generate", "--corpus", (dir / "corpus.jsonl").string(), "--languages", "fr,de", "--per-lang",
                      "4", "--out", (dir / "pairs.jsonl").string(), "--mock", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pairs = read_pairs(dir / "pairs.jsonl");
  EXPECT_EQ(pairs.size(), 8u);
  for (const auto& p : pairs) EXPECT_EQ(p.query.back(), '?');
  const auto stats = read_json_file(dir / "pairs.jsonl.stats.json");
  EXPECT_EQ(stats.at("fr").at("accepted"), 4);
  EXPECT_NO_THROW(read_and_verify_manifest(dir / "pairs.jsonl.manifest.json"));
}

TEST(Cli, GeneratePartialWhenLanguageHasNoDocuments) {
  const auto dir = scratch_dir("cli_gen_partial");
  write_corpus(dir / "corpus.jsonl", {{"fr", 3}});
  const auto r = run({"generate", "--corpus", (dir / "corpus.jsonl").string(), "--languages", "fr,sw", "--per-lang",
                      "3", "--out", (dir / "pairs.jsonl").string(), "--mock"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("sw"), std::string::npos);
  const auto stats = read_json_file(dir / "pairs.jsonl.stats.json");
  EXPECT_TRUE(stats.at("sw").contains("error"));
  EXPECT_EQ(stats.at("sw").at("accepted"), 0);
  EXPECT_EQ(stats.at("fr").at("accepted"), 3);
  EXPECT_EQ(read_pairs(dir / "pairs.jsonl").size(), 3u);
}

TEST(Cli, GenerateMockRejectionDropsLanguagePairs) {
  const auto dir = scratch_dir("cli_gen_reject");
  write_corpus(dir / "corpus.jsonl", {{"fr", 4}, {"it", 4}});
  const auto r = run({"generate", "--corpus", (dir / "corpus.jsonl").string(), "--languages", "fr,it", "--per-lang",
                      "4", "--out", (dir / "pairs.jsonl").string(), "--mock", "--mock-reject", "it"});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto stats = read_json_file(dir / "pairs.jsonl.stats.json");
  EXPECT_EQ(stats.at("it").at("rejected"), 4);
  for (const auto& p : read_pairs(dir / "pairs.jsonl")) EXPECT_EQ(p.lang, "fr");
}

TEST(Cli, GenerateIsIdempotent) {
  const auto dir = scratch_dir("cli_gen_idem");
  write_corpus(dir / "corpus.jsonl", {{"ja", 12}});
  const cli::Args args{"generate", "--corpus", (dir / "corpus.jsonl").string(), "--languages", "ja", "--per-lang", "5",
                       "--out", (dir / "pairs.jsonl").string(), "--mock", "--seed", "8", "--max-in-flight", "3"};
  ASSERT_EQ(run(args).code, 0);
  const auto pairs = read_file_bytes(dir / "pairs.jsonl");
  const auto stats = read_file_bytes(dir / "pairs.jsonl.stats.json");
  const auto manifest = without_wall_time(dir / "pairs.jsonl.manifest.json");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(read_file_bytes(dir / "pairs.jsonl"), pairs);
  EXPECT_EQ(read_file_bytes(dir / "pairs.jsonl.stats.json"), stats);
  EXPECT_EQ(without_wall_time(dir / "pairs.jsonl.manifest.json"), manifest);
}

TEST(Cli, TrainZeroStepsCopiesCheckpoint) {
  const auto dir = scratch_dir("cli_train0");
  ASSERT_EQ(run({"fixture", "--kind", "separable", "--out", (dir / "fx").string()}).code, 0);
  ModelConfig mc;
  mc.tokenizer.hash_buckets = 512;
  mc.d_embed = 8;
  mc.d_out = 8;
  mc.lora_rank = 2;
  save_checkpoint(round_to_storage(init_model(mc, 4)), dir / "init.ckpt");
  const auto r = run({"train", "--pairs", (dir / "fx/pairs.jsonl").string(), "--model", (dir / "init.ckpt").string(),
                      "--out", (dir / "run").string(), "--total-steps", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file_bytes(dir / "run/model.ckpt"), read_file_bytes(dir / "init.ckpt"));
  EXPECT_EQ(read_json_file(dir / "run/steps.json"), nlohmann::json::array());
}

TEST(Cli, TrainIsIdempotentAndStaysInsideOut) {
  const auto dir = scratch_dir("cli_train");
  ASSERT_EQ(run({"fixture", "--kind", "separable", "--out", (dir / "fx").string()}).code, 0);
  const nlohmann::json cfg = {
      {"model", {{"hash_buckets", 2048}, {"d_embed", 16}, {"d_out", 16}, {"lora_rank", 2}, {"init_seed", 5}}},
      {"trainer",
       {{"batch_size", 8}, {"learning_rate", 0.05}, {"warmup_steps", 2}, {"total_steps", 20}, {"loss", {{"variant", "in_batch"}}}}}};
  write_file_bytes(dir / "train.json", cfg.dump());
  const cli::Args args{"train", "--pairs", (dir / "fx/pairs.jsonl").string(), "--config", (dir / "train.json").string(),
                       "--out", (dir / "run").string(), "--seed", "2"};
  const auto first = run(args);
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(first.out.rfind("trained 20 steps", 0), 0u);
  EXPECT_EQ(files_under(dir / "run"), (std::set<fs::path>{"model.ckpt", "steps.json", "manifest.json"}));
  const auto ckpt = read_file_bytes(dir / "run/model.ckpt");
  const auto steps = read_file_bytes(dir / "run/steps.json");
  const auto manifest = without_wall_time(dir / "run/manifest.json");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(read_file_bytes(dir / "run/model.ckpt"), ckpt);
  EXPECT_EQ(read_file_bytes(dir / "run/steps.json"), steps);
  EXPECT_EQ(without_wall_time(dir / "run/manifest.json"), manifest);
  EXPECT_NO_THROW(read_and_verify_manifest(dir / "run/manifest.json"));
}

TEST(Cli, ManifestDetectsTampering) {
  const auto dir = scratch_dir("cli_manifest");
  ASSERT_EQ(run({"fixture", "--kind", "separable", "--out", (dir / "fx").string()}).code, 0);
  ASSERT_EQ(run({"mine", "--pairs", (dir / "fx/pairs.jsonl").string(), "--out", (dir / "mined.jsonl").string(),
                 "--strategy", "random", "--k", "3", "--seed", "1"})
                .code,
            0);
  const auto m = read_and_verify_manifest(dir / "mined.jsonl.manifest.json");
  ASSERT_EQ(m.outputs.size(), 1u);
  EXPECT_EQ(m.outputs[0].sha256, sha256_hex(read_file_bytes(dir / "mined.jsonl")));
  EXPECT_EQ(m.config_hash.size(), 16u);
  write_file_bytes(dir / "mined.jsonl", "{}\n");
  EXPECT_THROW(read_and_verify_manifest(dir / "mined.jsonl.manifest.json"), Error);
}

TEST(Cli, MineHardThenTrainCombined) {
  const auto dir = scratch_dir("cli_mine");
  ASSERT_EQ(run({"fixture", "--kind", "distractor", "--out", (dir / "fx").string()}).code, 0);
  ModelConfig mc;
  mc.tokenizer.hash_buckets = 4096;
  mc.d_embed = 16;
  mc.d_out = 16;
  mc.lora_rank = 0;
  save_checkpoint(round_to_storage(init_model(mc, 1)), dir / "base.ckpt");
  EXPECT_EQ(run({"mine", "--pairs", (dir / "fx/pairs.jsonl").string(), "--out", (dir / "x.jsonl").string()}).code, 1);
  const auto r = run({"mine", "--pairs", (dir / "fx/pairs.jsonl").string(), "--corpus", (dir / "fx/pool.jsonl").string(),
                      "--model", (dir / "base.ckpt").string(), "--out", (dir / "mined.jsonl").string(), "--k", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t rows = 0;
  for_each_jsonl(dir / "mined.jsonl", [&](const nlohmann::json& j) {
    ++rows;
    EXPECT_EQ(j.at("negs").size(), 4u);
    for (const auto& n : j.at("negs")) EXPECT_NE(n, j.at("pos"));
  });
  EXPECT_EQ(rows, 200u);
  write_file_bytes(dir / "train.json",
                   nlohmann::json{{"trainer",
                                   {{"batch_size", 8},
                                    {"total_steps", 5},
                                    {"warmup_steps", 1},
                                    {"loss", {{"variant", "combined"}, {"num_negatives", 4}}}}}}
                       .dump());
  const auto t = run({"train", "--pairs", (dir / "mined.jsonl").string(), "--model", (dir / "base.ckpt").string(),
                      "--config", (dir / "train.json").string(), "--out", (dir / "run").string()});
  EXPECT_EQ(t.code, 0) << t.err;
}

TEST(Cli, SweepEmptySizesIsFatal) {
  const auto dir = scratch_dir("cli_sweep_empty");
  write_file_bytes(dir / "cfg.json", R"({"kind":"scale_sweep","sizes":[]})");
  const auto r = run({"sweep", "--config", (dir / "cfg.json").string(), "--out", (dir / "runs").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("InsufficientData"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "runs"));
}

TEST(Cli, ReportMergesRuns) {
  const auto dir = scratch_dir("cli_report");
  write_file_bytes(dir / "a/metrics.json", R"({"aggregates":{"all":0.5,"en":0.25}})");
  write_file_bytes(dir / "b/metrics.json", R"({"aggregates":{"fr":0.125}})");
  fs::create_directories(dir / "empty");

  const auto one = run({"report", (dir / "a").string(), "--out", (dir / "r1").string()});
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_EQ(read_file_bytes(dir / "r1/report.csv"), "run,all,en\na,0.500000,0.250000\n");

  const auto both = run({"report", (dir / "a").string(), (dir / "b").string(), (dir / "empty").string(), "--out",
                         (dir / "r2").string()});
  ASSERT_EQ(both.code, 0);
  EXPECT_EQ(read_file_bytes(dir / "r2/report.csv"), "run,all,en,fr\na,0.500000,0.250000,\nb,,,0.125000\n");
  EXPECT_EQ(both.out, "| Run | all | en | fr |\n|---|---:|---:|---:|\n| a | 50.00 | 25.00 | |\n| b | | | 12.50 |\n");
  EXPECT_EQ(read_file_bytes(dir / "r2/report.md"), both.out);
  EXPECT_NE(both.err.find("empty"), std::string::npos);

  const auto none = run({"report", (dir / "empty").string()});
  EXPECT_EQ(none.code, 1);
  EXPECT_NE(none.err.find("NoRunsFound"), std::string::npos);
}

TEST(Cli, FixtureKinds) {
  const auto dir = scratch_dir("cli_fixture");
  ASSERT_EQ(run({"fixture", "--kind", "bilingual", "--out", dir.string()}).code, 0);
  EXPECT_EQ(load_task(dir / "fr_task").language, "fr");
  EXPECT_EQ(read_pairs(dir / "en_pairs.jsonl").size(), 100u);
  EXPECT_EQ(run({"fixture", "--kind", "nope", "--out", dir.string()}).code, 1);
}
