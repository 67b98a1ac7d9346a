#pragma once

// Rendering of analysis results as JSON report documents and plain-text
// tables. Output is a pure function of its inputs: fields are emitted in a
// fixed order and reals use fixed notation with 6 fractional digits.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "unravel/core_model.hpp"
#include "unravel/eval.hpp"
#include "unravel/recommend.hpp"

namespace unravel {

inline constexpr std::string_view kToolName = "unravel";
inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string fixed6(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, 6);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

inline std::string shortest(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

namespace detail {

// Minimal pretty-printing JSON emitter with caller-controlled number text.
class JsonWriter {
 public:
  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(std::string_view name) {
    separate();
    out_ += quote(name);
    out_ += ": ";
    after_key_ = true;
    return *this;
  }

  JsonWriter& string(std::string_view text) { return raw(quote(text)); }
  JsonWriter& integer(std::int64_t value) { return raw(std::to_string(value)); }
  JsonWriter& real(double value) { return raw(fixed6(value)); }
  JsonWriter& boolean(bool value) { return raw(value ? "true" : "false"); }
  JsonWriter& null() { return raw("null"); }

  JsonWriter& raw(std::string_view text) {
    if (!after_key_) separate();
    after_key_ = false;
    out_ += text;
    return *this;
  }

  template <typename Range>
  JsonWriter& strings(const Range& items) {
    begin_array();
    for (const auto& item : items) string(item);
    return end_array();
  }

  template <typename Range>
  JsonWriter& integers(const Range& items) {
    begin_array();
    for (auto item : items) integer(item);
    return end_array();
  }

  std::string str() const { return out_ + "\n"; }

 private:
  static std::string quote(std::string_view text) {
    return nlohmann::json(std::string(text)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  }

  void separate() {
    if (stack_.empty()) return;
    if (stack_.back()) out_ += ',';
    stack_.back() = true;
    out_ += '\n';
    out_.append(stack_.size() * 2, ' ');
  }

  JsonWriter& open(char c) {
    if (!after_key_) separate();
    after_key_ = false;
    out_ += c;
    stack_.push_back(false);
    return *this;
  }

  JsonWriter& close(char c) {
    const bool had_items = stack_.back();
    stack_.pop_back();
    if (had_items) {
      out_ += '\n';
      out_.append(stack_.size() * 2, ' ');
    }
    out_ += c;
    return *this;
  }

  std::string out_;
  std::vector<bool> stack_;  // per open container: has it emitted an item yet
  bool after_key_ = false;
};

inline void write_header(JsonWriter& w, std::string_view command) {
  w.key("tool").string(kToolName);
  w.key("version").string(kToolVersion);
  w.key("command").string(command);
}

inline void write_since(JsonWriter& w, std::optional<Timestamp> since) {
  w.key("since");
  if (since) {
    w.integer(*since);
  } else {
    w.null();
  }
}

struct MemberGroup {
  std::string file;
  std::string side;
  std::vector<FunctionId> functions;
};

// Members grouped by file, target side first, files and functions sorted.
inline std::vector<MemberGroup> group_members(const Recommendation& rec, const FactsDb& db) {
  std::vector<MemberGroup> out;
  for (const auto* side : {&rec.target_members, &rec.client_members}) {
    std::map<std::string, std::vector<FunctionId>> by_file;
    for (const auto& id : *side) {
      const auto* fn = db.find(id);
      by_file[fn != nullptr ? fn->file.path : std::string("?")].push_back(id);
    }
    for (auto& [file, ids] : by_file) {
      std::sort(ids.begin(), ids.end());
      out.push_back({file, side == &rec.target_members ? "target" : "client", std::move(ids)});
    }
  }
  return out;
}

inline std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += sep;
    out += item;
  }
  return out;
}

inline std::string join_ints(const std::vector<int>& items, std::string_view sep) {
  std::vector<std::string> text;
  for (int i : items) text.push_back(std::to_string(i));
  return join(text, sep);
}

// Bold header text when styling is enabled.
inline std::string style(std::string_view text, bool color) {
  if (!color) return std::string(text);
  return "\x1b[1m" + std::string(text) + "\x1b[0m";
}

}  // namespace detail

inline std::string render_report_json(const RankedReport& report, const FactsDb& db, int top) {
  detail::JsonWriter w;
  w.begin_object();
  detail::write_header(w, to_string(report.kind));
  w.key("config").begin_object();
  w.key("mode").string(to_string(report.config.dependency_mode));
  w.key("q_max").integer(report.config.q_max);
  w.key("min_cluster_size").integer(report.config.min_cluster_size);
  w.key("seed").raw(std::to_string(report.config.seed));
  w.key("eig_tolerance").raw(shortest(report.config.eig_tolerance));
  w.key("kmeans_max_iter").integer(report.config.kmeans_max_iter);
  detail::write_since(w, report.config.since);
  w.key("top").integer(top);
  w.end_object();
  w.key("target").string(report.target_file.path);
  w.key("guesses").integers(report.guesses);
  w.key("recommendations").begin_array();
  const auto shown = std::min<std::size_t>(report.recommendations.size(), static_cast<std::size_t>(top));
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& rec = report.recommendations[i];
    w.begin_object();
    w.key("rank").integer(static_cast<std::int64_t>(i + 1));
    w.key("kind").string(to_string(rec.kind));
    w.key("multiplicity").integer(rec.multiplicity);
    w.key("avg_change_freq").real(rec.avg_change_freq);
    w.key("source_params").integers(rec.source_params);
    w.key("single_side").boolean(rec.single_side);
    w.key("members").begin_array();
    for (const auto& group : detail::group_members(rec, db)) {
      w.begin_object();
      w.key("file").string(group.file);
      w.key("side").string(group.side);
      w.key("functions").strings(group.functions);
      w.end_object();
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.key("total_recommendations").integer(static_cast<std::int64_t>(report.recommendations.size()));
  w.key("diagnostics").strings(report.diagnostics);
  w.end_object();
  return w.str();
}

inline std::string render_report_table(const RankedReport& report, const FactsDb& db, int top, bool color) {
  std::ostringstream out;
  out << detail::style(std::string(kToolName) + " " + std::string(to_string(report.kind)), color) << "  target "
      << report.target_file.path << "  mode " << to_string(report.config.dependency_mode) << "  q_max "
      << report.config.q_max << "  guesses [" << detail::join_ints(report.guesses, ",") << "]\n";
  const auto shown = std::min<std::size_t>(report.recommendations.size(), static_cast<std::size_t>(top));
  if (shown == 0) out << "(no recommendations)\n";
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& rec = report.recommendations[i];
    out << '\n'
        << detail::style("#" + std::to_string(i + 1), color) << "  multiplicity " << rec.multiplicity
        << "  avg_change_freq " << fixed6(rec.avg_change_freq) << "  params [" << detail::join_ints(rec.source_params, ",")
        << "]" << (rec.single_side ? "  single-side" : "") << '\n';
    for (const auto& group : detail::group_members(rec, db)) {
      out << "  " << group.side << ' ' << group.file << '\n';
      for (const auto& f : group.functions) out << "    " << f << '\n';
    }
  }
  if (report.recommendations.size() > shown) {
    out << "\n(" << report.recommendations.size() - shown << " more not shown)\n";
  }
  for (const auto& d : report.diagnostics) out << "note: " << d << '\n';
  return out.str();
}

inline std::string render_detect_json(const std::vector<FileActivityStats>& candidates, int top,
                                      std::optional<Timestamp> since) {
  detail::JsonWriter w;
  w.begin_object();
  detail::write_header(w, "detect");
  w.key("config").begin_object();
  w.key("top").integer(top);
  detail::write_since(w, since);
  w.end_object();
  w.key("candidates").begin_array();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    w.begin_object();
    w.key("rank").integer(static_cast<std::int64_t>(i + 1));
    w.key("file").string(c.file.path);
    w.key("fanin_files").integer(static_cast<std::int64_t>(c.fanin_files));
    w.key("commit_count").integer(static_cast<std::int64_t>(c.commit_count));
    w.key("fanin_rank").integer(c.fanin_rank);
    w.key("change_rank").integer(c.change_rank);
    w.key("score").integer(std::max(c.fanin_rank, c.change_rank));
    w.end_object();
  }
  w.end_array();
  w.key("diagnostics").begin_array().end_array();
  w.end_object();
  return w.str();
}

inline std::string render_detect_table(const std::vector<FileActivityStats>& candidates, bool color) {
  std::ostringstream out;
  out << detail::style("rank  score  fanin_rank  change_rank  fanin_files  commits  file", color) << '\n';
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    char line[160];
    std::snprintf(line, sizeof line, "%4zu  %5d  %10d  %11d  %11zu  %7zu  ", i + 1, std::max(c.fanin_rank, c.change_rank),
                  c.fanin_rank, c.change_rank, c.fanin_files, c.commit_count);
    out << line << c.file.path << '\n';
  }
  return out.str();
}

inline std::string render_sweep_json(const std::vector<SweepRow>& rows) {
  detail::JsonWriter w;
  w.begin_object();
  detail::write_header(w, "eval");
  w.key("rows").begin_array();
  for (const auto& r : rows) {
    w.begin_object();
    w.key("kind").string(to_string(r.kind));
    w.key("responsibilities").integer(r.spec.n_responsibilities);
    w.key("funcs_per_responsibility").integer(r.spec.funcs_per_responsibility);
    w.key("clients_per_responsibility").integer(r.spec.clients_per_responsibility);
    w.key("commits_per_responsibility").integer(r.spec.n_commits_per_responsibility);
    w.key("noise_rate").real(r.spec.noise_rate);
    w.key("seed").raw(std::to_string(r.spec.seed));
    w.key("ari").real(r.ari);
    w.key("exact_groups").integer(r.exact_groups);
    w.key("error");
    if (r.error.empty()) {
      w.null();
    } else {
      w.string(r.error);
    }
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

inline std::string render_sweep_table(const std::vector<SweepRow>& rows, bool color) {
  std::ostringstream out;
  out << detail::style("kind    resp  funcs  clients  commits  noise     seed  ari       exact", color) << '\n';
  std::map<double, std::pair<double, int>> by_noise;
  for (const auto& r : rows) {
    char line[200];
    std::snprintf(line, sizeof line, "%-6s  %4d  %5d  %7d  %7d  %s  %4llu  %s  %5d", std::string(to_string(r.kind)).c_str(),
                  r.spec.n_responsibilities, r.spec.funcs_per_responsibility, r.spec.clients_per_responsibility,
                  r.spec.n_commits_per_responsibility, fixed6(r.spec.noise_rate).c_str(),
                  static_cast<unsigned long long>(r.spec.seed), fixed6(r.ari).c_str(), r.exact_groups);
    out << line;
    if (!r.error.empty()) out << "  (" << r.error << ')';
    out << '\n';
    auto& agg = by_noise[r.spec.noise_rate];
    agg.first += r.ari;
    ++agg.second;
  }
  for (const auto& [noise, agg] : by_noise) {
    out << "mean ari at noise " << fixed6(noise) << ": " << fixed6(agg.first / agg.second) << " over " << agg.second
        << " runs\n";
  }
  return out.str();
}

}  // namespace unravel
