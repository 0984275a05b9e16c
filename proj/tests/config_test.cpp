// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include "forge/cli.hpp"
#include "support.hpp"

namespace forge {
namespace {

using testing::file_lines;
using testing::TempDir;
using testing::write_file;

const char* kScoreConfig = R"(# scoring only
mode = "scripted"
fixtures = "FIXTURES"
workers = 2

[backend.judge_b]
model = "judge-model"   # trailing comment

[roles]
judge = "judge_b"
infer = "judge_b"
)";

std::string score_config(const TempDir& dir) {
  std::string text = kScoreConfig;
  auto fixtures = (dir / "fx.jsonl").string();
  write_file(fixtures, "");
  text.replace(text.find("FIXTURES"), 8, fixtures);
  return text;
}

int cli(std::vector<std::string> args, std::string* out = nullptr, std::string* err = nullptr) {
  std::ostringstream o, e;
  int rc = run_cli(args, o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return rc;
}

TEST(ConfigText, ValuesCommentsAndSections) {
  auto kv = parse_config_text("a = \"x # not a comment\"  # comment\nb = 2.5\n[s]\nc = true\nd = \"q\\\"uote\"\n");
  EXPECT_EQ(std::get<std::string>(kv.at("a")), "x # not a comment");
  EXPECT_EQ(std::get<double>(kv.at("b")), 2.5);
  EXPECT_EQ(std::get<bool>(kv.at("s.c")), true);
  EXPECT_EQ(std::get<std::string>(kv.at("s.d")), "q\"uote");
}

TEST(ConfigText, ErrorsCarryLines) {
  for (auto [text, line] : std::vector<std::pair<std::string, std::size_t>>{
           {"a = 1\nb\n", 2}, {"[s\n", 1}, {"a = \"open\n", 1}, {"\n\na = 1x\n", 3}, {"= 1", 1}}) {
    try {
      parse_config_text(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
      EXPECT_EQ(e.line(), line) << text;
    }
  }
}

TEST(Config, BackendsRolesAndDefaults) {
  auto c = config_from_text(
      "seed = 7\n[backend.gpt-x]\nbase_url = \"https://h/v1\"\nmodel = \"m\"\n[roles]\nprobe.0 = \"gpt-x\"\njudge = \"gpt-x\"\n");
  EXPECT_EQ(c.mode, RunMode::Live);
  EXPECT_EQ(c.seed, 7);
  EXPECT_EQ(c.quota_per_type, 3);
  EXPECT_EQ(c.max_steps, 11);
  EXPECT_EQ(c.backends.at("gpt-x").api_key_env, "REWATCH_API_KEY_GPT_X");
  EXPECT_EQ(c.roles.at(ModelRole::probe(0)), "gpt-x");
  EXPECT_THROW(config_from_text("[roles]\noracle = \"x\"\n"), Error);
  EXPECT_THROW(config_from_text("mode = \"dream\"\n"), Error);
  EXPECT_THROW(config_from_text("workers = \"four\"\n"), Error);
  EXPECT_THROW(config_from_text("[backend.x]\ncolour = \"red\"\n"), Error);
}

std::string validation_error(const std::string& text, Command cmd) {
  try {
    validate_config(config_from_text(text), cmd);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
    return e.what();
  }
  return "";
}

TEST(Config, Validation) {
  const std::string base = "mode = \"replay\"\nfixtures = \"f\"\n[backend.b]\nmodel = \"m\"\n[roles]\njudge = \"b\"\ninfer = \"b\"\n";
  EXPECT_EQ(validation_error(base, Command::Score), "");
  EXPECT_NE(validation_error(base, Command::CoT).find("'reasoner'"), std::string::npos);
  EXPECT_NE(validation_error(base + "reasoner = \"b\"\nconvert = \"b\"\n", Command::CoT).find("seed"), std::string::npos);
  EXPECT_NE(validation_error(base + "sum = \"nope\"\n", Command::Score).find("undefined backend"), std::string::npos);
  EXPECT_NE(validation_error(base + "probe.1 = \"b\"\n", Command::Score).find("probe"), std::string::npos);
  EXPECT_NE(validation_error("mode = \"scripted\"\n" + base.substr(base.find('[')), Command::Score).find("fixtures"),
            std::string::npos);
  EXPECT_NE(validation_error("mode = \"live\"\n" + base.substr(base.find('[')), Command::Score).find("base_url"),
            std::string::npos);
  EXPECT_NE(validation_error("theta_text = 0\n" + base, Command::Score).find("thresholds"), std::string::npos);
  EXPECT_EQ(validation_error("", Command::Stats), "");
}

TEST(Config, DigestIgnoresWorkersModeAndPaths) {
  auto a = config_from_text("seed = 1\nworkers = 1\nmode = \"replay\"\nfixtures = \"a\"\n");
  auto b = config_from_text("seed = 1\nworkers = 8\nmode = \"live\"\nfixtures = \"b\"\n");
  auto c = config_from_text("seed = 2\n");
  EXPECT_EQ(config_digest(a, Command::QA), config_digest(b, Command::QA));
  EXPECT_NE(config_digest(a, Command::QA), config_digest(c, Command::QA));
  EXPECT_NE(config_digest(a, Command::QA), config_digest(a, Command::CoT));
}

TEST(Cli, MissingRoleExitsTwoBeforeAnyBackendIsBuilt) {
  TempDir dir;
  // fixtures file does not exist: building a gateway would fail with Io (exit 1)
  write_file(dir / "c.toml", "mode = \"scripted\"\nfixtures = \"/nonexistent/fx.jsonl\"\nseed = 1\n");
  write_file(dir / "qa.jsonl", "");
  write_file(dir / "captions.jsonl", "");
  std::string err;
  int rc = cli({"cot", "--config", (dir / "c.toml").string(), "--qa", (dir / "qa.jsonl").string(), "--captions",
                (dir / "captions.jsonl").string(), "--out", (dir / "cot.jsonl").string()},
               nullptr, &err);
  EXPECT_EQ(rc, kExitConfigError);
  EXPECT_NE(err.find("role 'reasoner' is not mapped"), std::string::npos) << err;
  EXPECT_FALSE(std::filesystem::exists(dir / "cot.jsonl"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}), kExitConfigError);
  EXPECT_EQ(cli({"dance"}), kExitConfigError);
  EXPECT_EQ(cli({"score", "--samples", "x"}), kExitConfigError);
  EXPECT_EQ(cli({"--help"}), kExitOk);
  TempDir dir;
  write_file(dir / "bad.toml", "[roles\n");
  std::string err;
  EXPECT_EQ(cli({"score", "--config", (dir / "bad.toml").string(), "--samples", "s", "--out", "o"}, nullptr, &err),
            kExitConfigError);
  EXPECT_NE(err.find("line 1"), std::string::npos) << err;
}

TEST(Cli, ScoreRecordsMalformedSamplesInBand) {
  TempDir dir;
  write_file(dir / "c.toml", score_config(dir));
  write_file(dir / "samples.jsonl",
             "{\"id\":\"ok\",\"question\":\"q\",\"response_text\":\"no tags\",\"gt_answer\":\"a\","
             "\"caption_events\":[{\"t_s\":1,\"text\":\"x\"}]}\n"
             "{\"id\":\"bad\",\"question\":3}\n"
             "not json\n");
  std::string err;
  int rc = cli({"score", "--config", (dir / "c.toml").string(), "--samples", (dir / "samples.jsonl").string(),
                "--out", (dir / "scored.jsonl").string()},
               nullptr, &err);
  EXPECT_EQ(rc, kExitOk) << err;
  auto lines = file_lines(dir / "scored.jsonl");
  ASSERT_EQ(lines.size(), 3u);
  auto ok = json::parse(lines[0]);
  EXPECT_EQ(ok["id"], "ok");
  EXPECT_EQ(ok["r_total"], 0.0);
  EXPECT_FALSE(ok.contains("error"));
  auto bad = json::parse(lines[1]);
  EXPECT_EQ(bad["id"], "bad");
  EXPECT_NE(bad["error"].get<std::string>().find("malformed sample"), std::string::npos);
  EXPECT_EQ(json::parse(lines[2])["id"], "line-3");
}

TEST(Cli, FlagsOverrideTheFile) {
  TempDir dir;
  write_file(dir / "c.toml", score_config(dir));
  std::string err;
  // --mode live makes the judge backend need a base_url
  EXPECT_EQ(cli({"score", "--config", (dir / "c.toml").string(), "--mode", "live", "--samples", "s", "--out", "o"},
                nullptr, &err),
            kExitConfigError);
  EXPECT_NE(err.find("base_url"), std::string::npos) << err;
}

TEST(Cli, StageErrorsExitOne) {
  TempDir dir;
  write_file(dir / "c.toml", score_config(dir));
  EXPECT_EQ(cli({"score", "--config", (dir / "c.toml").string(), "--samples", (dir / "missing.jsonl").string(),
                 "--out", (dir / "o.jsonl").string()}),
            kExitStageError);
}

TEST(Cli, StatsTableAndJson) {
  TempDir dir;
  write_file(dir / "videos.jsonl", "{\"id\":\"v\",\"media\":\"m\",\"duration_s\":100,\"source\":\"web\"}\n");
  std::string out;
  EXPECT_EQ(cli({"stats", "--data", dir.path().string()}, &out), kExitOk);
  EXPECT_NE(out.find("Total Videos                      1"), std::string::npos) << out;
  EXPECT_EQ(cli({"stats", "--data", dir.path().string(), "--json", "--out", (dir / "s.json").string()}, &out),
            kExitOk);
  EXPECT_EQ(json::parse(out)["videos"]["by_duration"]["short"], 1);
  EXPECT_EQ(json::parse(file_lines(dir / "s.json")[0]), json::parse(out));
}

}  // namespace
}  // namespace forge
