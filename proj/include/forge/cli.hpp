// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

// The `forge` command line: caption | qa | cot | score | reward-serve | stats | export-sft.
//
// Exit status: 0 when the command finished and wrote its output (individual
// item failures are logged and recorded in-band), 1 on a stage-fatal error,
// 2 on an invalid configuration or command line.

#pragma once

#include <CLI11.hpp>
#include <signal.h>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "forge/pipeline.hpp"
#include "forge/runtime.hpp"
#include "forge/service.hpp"
#include "forge/sft.hpp"
#include "forge/stats.hpp"

namespace forge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitStageError = 1;
inline constexpr int kExitConfigError = 2;

namespace detail {

struct CliFlags {
  std::string config;
  std::string mode;
  std::string fixtures;
  int workers = 0;
  std::int64_t seed = 0;
  bool resume = false;

  std::string manifest, captions, qa, samples, data, out;
  std::string summaries_out, rejected_out, trajectories_out;
  double theta_text = 1.0, theta_sum = 1.0;
  int quota_per_type = 0;
  int max_steps = 0;
  std::string observer;
  bool gt_check = true;
  bool full_breakdown = false;
  std::string host;
  int port = 0;
  int max_inflight = 0;
  bool stats_json = false;
};

inline bool given(const CLI::App& app, const char* flag) {
  const auto* opt = app.get_option_no_throw(flag);
  return opt != nullptr && opt->count() > 0;
}

template <class T>
void override_if(const CLI::App& app, const char* flag, T& target, const T& value) {
  if (given(app, flag)) target = value;
}

inline ForgeConfig resolve_config(const CLI::App& sub, const CliFlags& f) {
  ForgeConfig c = f.config.empty() ? ForgeConfig{} : load_config(f.config);
  if (given(sub, "--mode")) {
    auto m = parse_run_mode(f.mode);
    if (!m) throw Error(ErrorCode::ConfigInvalid, "unknown mode '" + f.mode + "'");
    c.mode = *m;
  }
  override_if(sub, "--fixtures", c.fixtures, f.fixtures);
  override_if(sub, "--workers", c.workers, f.workers);
  if (given(sub, "--seed")) c.seed = f.seed;
  override_if(sub, "--theta-text", c.theta_text, f.theta_text);
  override_if(sub, "--theta-sum", c.theta_sum, f.theta_sum);
  override_if(sub, "--quota-per-type", c.quota_per_type, f.quota_per_type);
  override_if(sub, "--max-steps", c.max_steps, f.max_steps);
  if (given(sub, "--observer"))
    c.observer = f.observer == "model" ? ObserverMode::ModelBacked : ObserverMode::Deterministic;
  override_if(sub, "--gt-check", c.gt_check, f.gt_check);
  if (given(sub, "--full-breakdown")) c.full_breakdown = true;
  override_if(sub, "--host", c.host, f.host);
  override_if(sub, "--port", c.port, f.port);
  override_if(sub, "--max-inflight", c.max_inflight, f.max_inflight);
  return c;
}

inline StageOptions stage_options(const ForgeConfig& c, Command cmd, bool resume) {
  StageOptions o;
  o.workers = c.workers;
  o.seed = c.seed;
  o.resume = resume;
  o.config_digest = config_digest(c, cmd);
  return o;
}

inline int serve(const ForgeConfig& initial, const std::string& config_path, std::ostream& err) {
  auto options_of = [](const ForgeConfig& c) {
    ServiceOptions o;
    o.max_inflight = c.max_inflight;
    o.item_timeout_s = c.item_timeout_s;
    o.score.full_breakdown = c.full_breakdown;
    return o;
  };
  auto store_of = [](const ForgeConfig& c) {
    return c.caption_store.empty() ? RewardService::CaptionStore{} : load_caption_store(c.caption_store);
  };

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGHUP);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  RewardService service(std::shared_ptr<Gateway>(build_gateway(initial)), options_of(initial),
                        store_of(initial));
  int port = service.start(initial.host, initial.port);
  err << json{{"event", "listening"}, {"host", initial.host}, {"port", port}}.dump() << std::endl;
  for (;;) {
    int sig = 0;
    sigwait(&signals, &sig);
    if (sig != SIGHUP) break;
    if (config_path.empty()) continue;
    try {
      auto c = load_config(config_path);
      validate_config(c, Command::Serve);
      service.reload(std::shared_ptr<Gateway>(build_gateway(c)), options_of(c), store_of(c));
      err << json{{"event", "reloaded"}, {"config", config_path}}.dump() << std::endl;
    } catch (const std::exception& e) {
      err << json{{"event", "reload_failed"}, {"error", e.what()}}.dump() << std::endl;
    }
  }
  service.stop();
  return kExitOk;
}

}  // namespace detail

/// Runs one `forge` invocation; `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"forge: video reasoning data synthesis and O&R reward scoring", "forge"};
  app.require_subcommand(1);
  detail::CliFlags f;

  auto common = [&](CLI::App* sub, bool generative) {
    sub->add_option("--config", f.config, "config file")->check(CLI::ExistingFile);
    sub->add_option("--mode", f.mode, "live | scripted | record | replay")
        ->check(CLI::IsMember({"live", "scripted", "record", "replay"}));
    sub->add_option("--fixtures", f.fixtures, "fixture file for scripted/record/replay modes");
    sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    if (generative) {
      sub->add_option("--seed", f.seed, "sampling seed");
      sub->add_flag("--resume", f.resume, "continue an interrupted run");
    }
  };

  auto* caption = app.add_subcommand("caption", "segment and caption videos");
  common(caption, true);
  caption->add_option("--manifest", f.manifest, "video manifest JSONL")->required();
  caption->add_option("--out", f.out, "caption JSONL")->required();

  auto* qa = app.add_subcommand("qa", "generate, filter and rewrite question/answer pairs");
  common(qa, true);
  qa->add_option("--captions", f.captions, "caption JSONL")->required();
  qa->add_option("--out", f.out, "QA JSONL")->required();
  qa->add_option("--summaries-out", f.summaries_out, "summary JSONL (default: beside --out)");
  qa->add_option("--rejected-out", f.rejected_out, "rejected pairs JSONL (default: beside --out)");
  qa->add_option("--theta-text", f.theta_text, "text-bias threshold");
  qa->add_option("--theta-sum", f.theta_sum, "summary-bias threshold");
  qa->add_option("--quota-per-type", f.quota_per_type, "questions per type and video");

  auto* cot = app.add_subcommand("cot", "synthesize chains of thought");
  common(cot, true);
  cot->add_option("--qa", f.qa, "QA JSONL")->required();
  cot->add_option("--captions", f.captions, "caption JSONL")->required();
  cot->add_option("--out", f.out, "CoT JSONL")->required();
  cot->add_option("--trajectories-out", f.trajectories_out, "trajectory JSONL (default: beside --out)");
  cot->add_option("--max-steps", f.max_steps, "action budget per trajectory");
  cot->add_option("--observer", f.observer, "deterministic | model")
      ->check(CLI::IsMember({"deterministic", "model"}));
  cot->add_option("--gt-check", f.gt_check, "keep only traces whose answer matches the reference");

  auto* score = app.add_subcommand("score", "compute O&R rewards for samples");
  common(score, false);
  score->add_option("--samples", f.samples, "sample JSONL")->required();
  score->add_option("--out", f.out, "scored JSONL")->required();
  score->add_flag("--full-breakdown", f.full_breakdown, "compute r_obs and r_rea even when r_acc = 0");

  auto* serve = app.add_subcommand("reward-serve", "serve O&R scoring over HTTP");
  common(serve, false);
  serve->add_option("--host", f.host, "bind address");
  serve->add_option("--port", f.port, "port");
  serve->add_option("--max-inflight", f.max_inflight, "samples scored concurrently")
      ->check(CLI::PositiveNumber);
  serve->add_flag("--full-breakdown", f.full_breakdown, "compute r_obs and r_rea even when r_acc = 0");

  auto* stats = app.add_subcommand("stats", "dataset statistics");
  stats->add_option("--data", f.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  stats->add_option("--out", f.out, "also write the report as JSON to this file");
  stats->add_flag("--json", f.stats_json, "print JSON instead of the table");

  auto* sft = app.add_subcommand("export-sft", "export SFT examples");
  sft->add_option("--data", f.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  sft->add_option("--out", f.out, "SFT JSONL")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfigError;
  }

  auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  Command cmd = name == "caption"        ? Command::Caption
                : name == "qa"           ? Command::QA
                : name == "cot"          ? Command::CoT
                : name == "score"        ? Command::Score
                : name == "reward-serve" ? Command::Serve
                : name == "stats"        ? Command::Stats
                                         : Command::ExportSft;

  ForgeConfig config;
  try {
    config = detail::resolve_config(*sub, f);
    validate_config(config, cmd);
  } catch (const Error& e) {
    err << "forge: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (cmd == Command::Stats) {
      auto report = compute_statistics(DataPaths::in(f.data));
      if (!f.out.empty()) write_records(f.out, {to_json(report)});
      if (f.stats_json) out << to_json(report).dump(2) << '\n';
      else out << render_stats_table(report);
      return kExitOk;
    }
    if (cmd == Command::ExportSft) {
      auto n = export_sft(DataPaths::in(f.data), f.out);
      err << "forge: export-sft: " << n << " examples\n";
      return kExitOk;
    }
    if (cmd == Command::Serve) return detail::serve(config, f.config, err);

    auto gateway = build_gateway(config);
    auto options = detail::stage_options(config, cmd, f.resume);
    options.log = [&err](const json& line) { err << line.dump() << '\n'; };
    StageSummary summary;
    switch (cmd) {
      case Command::Caption:
        summary = run_caption_stage(*gateway, f.manifest, f.out, options);
        break;
      case Command::QA: {
        auto paths = QAStagePaths::beside(f.out);
        if (!f.summaries_out.empty()) paths.summaries = f.summaries_out;
        if (!f.rejected_out.empty()) paths.rejected = f.rejected_out;
        summary = run_qa_stage(*gateway, f.captions, paths,
                               {config.theta_text, config.theta_sum, config.quota_per_type}, options);
        break;
      }
      case Command::CoT: {
        auto paths = CoTStagePaths::beside(f.out);
        if (!f.trajectories_out.empty()) paths.trajectories = f.trajectories_out;
        summary = run_cot_stage(*gateway, f.qa, f.captions, paths,
                                {config.max_steps, config.observer, config.gt_check}, options);
        break;
      }
      case Command::Score: {
        ScoreOptions so;
        so.full_breakdown = config.full_breakdown;
        summary = run_score_stage(*gateway, f.samples, f.out, so, options);
        break;
      }
      default: break;
    }
    err << "forge: " << summary.describe() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "forge: " << e.what() << '\n';
    return e.code() == ErrorCode::ConfigInvalid ? kExitConfigError : kExitStageError;
  } catch (const std::exception& e) {
    err << "forge: " << e.what() << '\n';
    return kExitStageError;
  }
}

}  // namespace forge
