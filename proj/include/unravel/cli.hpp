#pragma once

// Command-line front end. run_cli is the whole program; tools/unravel.cpp
// only binds it to the process streams.
//
// Exit codes: 0 success, 2 usage or input error, 3 analysis error
// (insufficient data), 4 internal numeric error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "unravel/core_model.hpp"
#include "unravel/errors.hpp"
#include "unravel/eval.hpp"
#include "unravel/ingest.hpp"
#include "unravel/recommend.hpp"
#include "unravel/report.hpp"

namespace unravel {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitAnalysis = 3, kExitNumeric = 4 };

namespace detail {

class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error("io", message) {}
};

template <typename Loader>
auto load_path(const std::string& path, std::istream& stdin_stream, Loader loader) {
  if (path == "-") return loader(stdin_stream);
  std::ifstream file(path, std::ios::binary);
  if (!file) throw InputError("cannot open " + path);
  return loader(file);
}

inline int exit_code_for(const Error& e) {
  if (e.kind() == "analysis") return kExitAnalysis;
  if (e.kind() == "numeric") return kExitNumeric;
  return kExitInput;
}

inline void emit_error(std::ostream& err, std::string_view kind, int code, std::string_view message) {
  err << "error: kind=" << kind << " exit=" << code << " message="
      << nlohmann::json(std::string(message)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
}

// Options shared by split and redraw.
struct AnalysisOptions {
  std::string facts;
  std::string changes;
  std::string target;
  std::string mode = "transitive";
  int q_max = 3;
  int min_cluster_size = 2;
  int top = 10;
  std::uint64_t seed = 0;
  std::optional<Timestamp> since;
  std::string format = "table";
  unsigned threads = 1;
};

inline void add_analysis_options(CLI::App* cmd, AnalysisOptions& o) {
  cmd->add_option("facts", o.facts, "Facts document (JSON)")->required();
  cmd->add_option("changes", o.changes, "Change document (JSON)")->required();
  cmd->add_option("target", o.target, "Repository-relative path of the target file")->required();
  cmd->add_option("--mode", o.mode, "Dependency mode: direct|transitive|cochange|union")
      ->check(CLI::IsMember({"direct", "transitive", "cochange", "union"}))
      ->capture_default_str();
  cmd->add_option("--qmax", o.q_max, "Number of parameter guesses")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--min-cluster-size", o.min_cluster_size, "Smallest recommendation kept")
      ->check(CLI::Range(2, 1 << 30))
      ->capture_default_str();
  cmd->add_option("--top", o.top, "Recommendations shown")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--seed", o.seed, "Seed for randomized steps")->capture_default_str();
  cmd->add_option("--since", o.since, "Ignore commits before this unix timestamp");
  cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"table", "json"}))->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

inline AnalysisConfig to_config(const AnalysisOptions& o) {
  AnalysisConfig config;
  config.dependency_mode = *parse_dependency_mode(o.mode);
  config.q_max = o.q_max;
  config.min_cluster_size = o.min_cluster_size;
  config.seed = o.seed;
  config.since = o.since;
  config.threads = o.threads;
  return config;
}

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ArgumentError("not a number list: " + text);
    out.push_back(v);
  }
  if (out.empty()) throw ArgumentError("empty list");
  return out;
}

// "1-10" or "1,2,5".
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  const auto dash = text.find('-');
  if (dash != std::string::npos) {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    try {
      lo = std::stoull(text.substr(0, dash));
      hi = std::stoull(text.substr(dash + 1));
    } catch (const std::exception&) {
      throw ArgumentError("bad seed range: " + text);
    }
    if (hi < lo) throw ArgumentError("bad seed range: " + text);
    std::vector<std::uint64_t> out;
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::vector<std::uint64_t> out;
  for (double v : parse_list(text)) {
    if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) throw ArgumentError("bad seed: " + text);
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err,
                   bool color = false) {
  CLI::App app{"Recommends how to decompose large, frequently changed source files", std::string(kToolName)};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  int detect_top = 10;
  std::string detect_facts, detect_changes, detect_format = "table";
  std::optional<Timestamp> detect_since;
  auto* detect = app.add_subcommand("detect", "Rank files by fan-in and change activity");
  detect->add_option("facts", detect_facts, "Facts document (JSON)")->required();
  detect->add_option("changes", detect_changes, "Change document (JSON)")->required();
  detect->add_option("--top", detect_top, "Candidates shown")->check(CLI::PositiveNumber)->capture_default_str();
  detect->add_option("--since", detect_since, "Ignore commits before this unix timestamp");
  detect->add_option("--format", detect_format, "Output format")
      ->check(CLI::IsMember({"table", "json"}))
      ->capture_default_str();

  detail::AnalysisOptions split_opts;
  auto* split = app.add_subcommand("split", "Recommend extracting groups of functions that share dependents");
  detail::add_analysis_options(split, split_opts);

  detail::AnalysisOptions redraw_opts;
  auto* redraw = app.add_subcommand("redraw", "Recommend co-changing groups across the target's interface");
  detail::add_analysis_options(redraw, redraw_opts);

  std::string mine_log, mine_spans;
  auto* mine = app.add_subcommand("mine", "Build a change document from a raw log stream and span table");
  mine->add_option("log", mine_log, "Raw log stream, or - for standard input")->required();
  mine->add_option("spans", mine_spans, "Span document (JSON)")->required();

  std::string eval_kind = "split", eval_noise = "0,0.05", eval_seeds = "1-10", eval_format = "table";
  PlantedSpec eval_spec;
  detail::AnalysisOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Sweep planted fixtures and report recovery (ARI)");
  eval->add_option("--kind", eval_kind, "split or redraw")->check(CLI::IsMember({"split", "redraw"}))->capture_default_str();
  eval->add_option("--responsibilities", eval_spec.n_responsibilities)->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--funcs", eval_spec.funcs_per_responsibility)->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--clients", eval_spec.clients_per_responsibility)->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--commits", eval_spec.n_commits_per_responsibility)->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--noise", eval_noise, "Comma-separated noise rates")->capture_default_str();
  eval->add_option("--seeds", eval_seeds, "Seed range a-b or comma list")->capture_default_str();
  eval->add_option("--mode", eval_opts.mode)
      ->check(CLI::IsMember({"direct", "transitive", "cochange", "union"}))
      ->capture_default_str();
  eval->add_option("--qmax", eval_opts.q_max)->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--format", eval_format)->check(CLI::IsMember({"table", "json"}))->capture_default_str();

  std::vector<const char*> argv{kToolName.data()};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    detail::emit_error(err, "usage", kExitInput, e.what());
    return kExitInput;
  }

  try {
    if (detect->parsed()) {
      const auto db = detail::load_path(detect_facts, in, [](std::istream& s) { return load_facts(s); });
      const auto history = detail::load_path(detect_changes, in, [](std::istream& s) { return load_changes(s); });
      const auto candidates = detect_large_active(file_activity_stats(db, history, detect_since), detect_top);
      out << (detect_format == "json" ? render_detect_json(candidates, detect_top, detect_since)
                                      : render_detect_table(candidates, color));
      return kExitOk;
    }
    for (auto [cmd, opts] : {std::pair{split, &split_opts}, std::pair{redraw, &redraw_opts}}) {
      if (!cmd->parsed()) continue;
      const auto db = detail::load_path(opts->facts, in, [](std::istream& s) { return load_facts(s); });
      const auto history = detail::load_path(opts->changes, in, [](std::istream& s) { return load_changes(s); });
      const auto config = detail::to_config(*opts);
      const FileRef target{normalize_path(opts->target)};
      const auto report = cmd == split ? ensemble_split(db, history, target, config)
                                       : ensemble_redraw(db, history, target, config);
      out << (opts->format == "json" ? render_report_json(report, db, opts->top)
                                     : render_report_table(report, db, opts->top, color));
      return kExitOk;
    }
    if (mine->parsed()) {
      const auto spans = detail::load_path(mine_spans, in, [](std::istream& s) { return load_spans(s); });
      const auto parsed = detail::load_path(mine_log, in, [](std::istream& s) { return parse_git_log_stream(s); });
      out << changes_to_json(build_change_history(parsed, spans)).dump(2) << '\n';
      return kExitOk;
    }
    if (eval->parsed()) {
      std::vector<PlantedSpec> specs;
      for (double noise : detail::parse_list(eval_noise)) {
        for (auto seed : detail::parse_seeds(eval_seeds)) {
          auto spec = eval_spec;
          spec.noise_rate = noise;
          spec.seed = seed;
          spec.validate();
          specs.push_back(spec);
        }
      }
      const auto kind = eval_kind == "split" ? RecommendationKind::Split : RecommendationKind::Redraw;
      const auto rows = eval_sweep(specs, kind, detail::to_config(eval_opts));
      out << (eval_format == "json" ? render_sweep_json(rows) : render_sweep_table(rows, color));
      return kExitOk;
    }
  } catch (const Error& e) {
    const int code = detail::exit_code_for(e);
    detail::emit_error(err, e.kind(), code, e.what());
    return code;
  } catch (const std::exception& e) {
    detail::emit_error(err, "internal", kExitNumeric, e.what());
    return kExitNumeric;
  }
  return kExitInput;
}

}  // namespace unravel
