#pragma once

// Loading of facts, change and span documents, plus the raw version-control
// log reader that attributes diff hunks to functions.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "unravel/core_model.hpp"
#include "unravel/errors.hpp"

namespace unravel {

struct FunctionSpan {
  FunctionId id;
  int start_line = 1;
  int end_line = 1;

  bool operator==(const FunctionSpan&) const = default;
};

// (commit id, file path) -> spans of the file's post-image at that commit.
// Spans within an entry are sorted by start line and do not overlap.
using SpanTable = std::map<std::pair<CommitId, std::string>, std::vector<FunctionSpan>>;

struct DiffHunk {
  std::string file;
  int new_start = 1;
  int new_count = 1;  // 0 for a pure deletion at new_start

  bool operator==(const DiffHunk&) const = default;
};

struct ParsedCommit {
  CommitId id;
  Timestamp timestamp = 0;
  std::vector<DiffHunk> hunks;

  bool operator==(const ParsedCommit&) const = default;
};

namespace detail {

inline std::string read_all(std::istream& in) {
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

inline nlohmann::json parse_json(std::istream& in) {
  const std::string text = read_all(in);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann reports the byte *after* the offending character.
    auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("malformed JSON document", line, column);
  }
}

inline const nlohmann::json& member(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing \"" + key + "\"", 0);
  return *it;
}

inline std::string string_member(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = member(obj, key, where);
  if (!v.is_string()) throw ParseError(where + "." + key + ": expected string", 0);
  return v.get<std::string>();
}

inline std::int64_t integer_member(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = member(obj, key, where);
  if (!v.is_number_integer()) throw ParseError(where + "." + key + ": expected integer", 0);
  return v.get<std::int64_t>();
}

inline const nlohmann::json& array_member(const nlohmann::json& obj, const char* key, const std::string& where,
                                          bool optional) {
  static const nlohmann::json empty = nlohmann::json::array();
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (optional) return empty;
    throw ParseError(where + ": missing \"" + key + "\"", 0);
  }
  if (!it->is_array()) throw ParseError(where + "." + key + ": expected array", 0);
  return *it;
}

inline std::vector<std::string> string_array(const nlohmann::json& arr, const std::string& where) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) throw ParseError(where + "[" + std::to_string(i) + "]: expected string", 0);
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

inline void require_object(const nlohmann::json& doc, const char* what) {
  if (!doc.is_object()) throw ParseError(std::string(what) + ": top level must be an object", 0);
}

}  // namespace detail

// Facts document: {"functions": [{"id", "file", "name", "start_line", "end_line"}],
//                  "calls": [{"caller", "callee"}]}. Line fields may be absent or null.
inline FactsDb load_facts(std::istream& in) {
  const auto doc = detail::parse_json(in);
  detail::require_object(doc, "facts document");

  std::vector<FunctionRef> functions;
  const auto& fns = detail::array_member(doc, "functions", "facts", true);
  for (std::size_t i = 0; i < fns.size(); ++i) {
    const std::string where = "functions[" + std::to_string(i) + "]";
    const auto& f = fns[i];
    if (!f.is_object()) throw ParseError(where + ": expected object", 0);
    FunctionRef ref;
    ref.id = detail::string_member(f, "id", where);
    ref.file = FileRef{normalize_path(detail::string_member(f, "file", where))};
    ref.qualified_name = f.contains("name") ? detail::string_member(f, "name", where) : ref.id;
    const bool has_start = f.contains("start_line") && !f["start_line"].is_null();
    const bool has_end = f.contains("end_line") && !f["end_line"].is_null();
    if (has_start != has_end) throw ParseError(where + ": start_line and end_line must appear together", 0);
    if (has_start) {
      ref.span = LineSpan{static_cast<int>(detail::integer_member(f, "start_line", where)),
                          static_cast<int>(detail::integer_member(f, "end_line", where))};
    }
    functions.push_back(std::move(ref));
  }

  std::vector<CallEdge> calls;
  const auto& edges = detail::array_member(doc, "calls", "facts", true);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string where = "calls[" + std::to_string(i) + "]";
    if (!edges[i].is_object()) throw ParseError(where + ": expected object", 0);
    calls.push_back({detail::string_member(edges[i], "caller", where), detail::string_member(edges[i], "callee", where)});
  }

  FactsDb db(std::move(functions), std::move(calls));
  require_valid(db);
  return db;
}

// Change document: {"commits": [{"id", "timestamp", "touched_functions", "touched_files",
//                                 "fallback_files"?}]}.
inline ChangeHistory load_changes(std::istream& in) {
  const auto doc = detail::parse_json(in);
  detail::require_object(doc, "change document");

  std::vector<CommitRecord> commits;
  const auto& arr = detail::array_member(doc, "commits", "changes", true);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "commits[" + std::to_string(i) + "]";
    const auto& c = arr[i];
    if (!c.is_object()) throw ParseError(where + ": expected object", 0);
    CommitRecord rec;
    rec.id = detail::string_member(c, "id", where);
    rec.timestamp = detail::integer_member(c, "timestamp", where);
    rec.touched_functions =
        detail::string_array(detail::array_member(c, "touched_functions", where, true), where + ".touched_functions");
    for (auto& p : detail::string_array(detail::array_member(c, "touched_files", where, true), where + ".touched_files")) {
      rec.touched_files.push_back(normalize_path(p));
    }
    for (auto& p :
         detail::string_array(detail::array_member(c, "fallback_files", where, true), where + ".fallback_files")) {
      rec.fallback_files.push_back(normalize_path(p));
    }
    commits.push_back(std::move(rec));
  }
  return ChangeHistory(std::move(commits));
}

// Span document: {"spans": [{"commit", "file", "functions": [{"id", "start", "end"}]}]}.
inline SpanTable load_spans(std::istream& in) {
  const auto doc = detail::parse_json(in);
  detail::require_object(doc, "span document");

  SpanTable table;
  std::vector<std::string> problems;
  const auto& arr = detail::array_member(doc, "spans", "spans", true);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "spans[" + std::to_string(i) + "]";
    const auto& entry = arr[i];
    if (!entry.is_object()) throw ParseError(where + ": expected object", 0);
    auto key = std::make_pair(detail::string_member(entry, "commit", where),
                              normalize_path(detail::string_member(entry, "file", where)));
    auto& spans = table[key];
    const auto& fns = detail::array_member(entry, "functions", where, false);
    for (std::size_t j = 0; j < fns.size(); ++j) {
      const std::string fwhere = where + ".functions[" + std::to_string(j) + "]";
      FunctionSpan span{detail::string_member(fns[j], "id", fwhere),
                        static_cast<int>(detail::integer_member(fns[j], "start", fwhere)),
                        static_cast<int>(detail::integer_member(fns[j], "end", fwhere))};
      if (span.start_line < 1 || span.start_line > span.end_line) problems.push_back("invalid span: " + span.id);
      spans.push_back(std::move(span));
    }
  }
  for (auto& [key, spans] : table) {
    std::sort(spans.begin(), spans.end(),
              [](const auto& a, const auto& b) { return std::tie(a.start_line, a.id) < std::tie(b.start_line, b.id); });
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i].start_line <= spans[i - 1].end_line) {
        problems.push_back("overlapping spans in " + key.first + ":" + key.second + ": " + spans[i - 1].id + ", " +
                           spans[i].id);
      }
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return table;
}

inline nlohmann::ordered_json facts_to_json(const FactsDb& db) {
  nlohmann::ordered_json doc;
  doc["functions"] = nlohmann::ordered_json::array();
  for (const auto& f : db.functions()) {
    nlohmann::ordered_json item{{"id", f.id}, {"file", f.file.path}, {"name", f.qualified_name}};
    if (f.span) {
      item["start_line"] = f.span->start_line;
      item["end_line"] = f.span->end_line;
    }
    doc["functions"].push_back(std::move(item));
  }
  doc["calls"] = nlohmann::ordered_json::array();
  for (const auto& e : db.calls()) doc["calls"].push_back({{"caller", e.caller}, {"callee", e.callee}});
  return doc;
}

inline nlohmann::ordered_json changes_to_json(const ChangeHistory& history) {
  nlohmann::ordered_json doc;
  doc["commits"] = nlohmann::ordered_json::array();
  for (const auto& c : history.commits()) {
    nlohmann::ordered_json item{{"id", c.id},
                                {"timestamp", c.timestamp},
                                {"touched_functions", c.touched_functions},
                                {"touched_files", c.touched_files}};
    if (c.flagged()) item["fallback_files"] = c.fallback_files;
    doc["commits"].push_back(std::move(item));
  }
  return doc;
}

namespace detail {

inline bool parse_int(std::string_view text, std::int64_t& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

// "<s>" or "<s>,<c>"; count defaults to 1.
inline bool parse_range(std::string_view text, std::int64_t& start, std::int64_t& count) {
  const auto comma = text.find(',');
  count = 1;
  if (comma == std::string_view::npos) return parse_int(text, start) && start >= 0;
  return parse_int(text.substr(0, comma), start) && parse_int(text.substr(comma + 1), count) && start >= 0 &&
         count >= 0;
}

struct HunkHeader {
  std::int64_t old_start, old_count, new_start, new_count;
};

inline HunkHeader parse_hunk_header(std::string_view line, std::size_t line_no) {
  // @@ -<s>[,<c>] +<s>[,<c>] @@[ section heading]
  std::string_view rest = line.substr(2);
  auto fail = [&](const char* what) -> HunkHeader { throw ParseError(std::string("truncated hunk header: ") + what, line_no); };
  if (!rest.starts_with(" -")) return fail("missing old range");
  rest.remove_prefix(2);
  const auto sp = rest.find(' ');
  if (sp == std::string_view::npos) return fail("missing new range");
  HunkHeader h{};
  if (!parse_range(rest.substr(0, sp), h.old_start, h.old_count)) return fail("bad old range");
  rest.remove_prefix(sp + 1);
  if (!rest.starts_with('+')) return fail("missing new range");
  rest.remove_prefix(1);
  const auto sp2 = rest.find(' ');
  if (sp2 == std::string_view::npos) return fail("missing closing @@");
  if (!parse_range(rest.substr(0, sp2), h.new_start, h.new_count)) return fail("bad new range");
  if (!rest.substr(sp2 + 1).starts_with("@@")) return fail("missing closing @@");
  return h;
}

inline std::string diff_path(std::string_view raw) {
  const auto tab = raw.find('\t');
  if (tab != std::string_view::npos) raw = raw.substr(0, tab);
  if (raw == "/dev/null") return std::string(raw);
  if (raw.starts_with("a/") || raw.starts_with("b/")) raw.remove_prefix(2);
  return normalize_path(raw);
}

inline bool is_extended_header(std::string_view line) {
  static constexpr std::string_view prefixes[] = {
      "diff ",         "index ",        "new file mode",   "deleted file mode", "old mode",
      "new mode",      "similarity index", "dissimilarity index", "rename from", "rename to",
      "copy from",     "copy to",
  };
  return std::any_of(std::begin(prefixes), std::end(prefixes), [&](auto p) { return line.starts_with(p); });
}

}  // namespace detail

// Reads the raw log format: per commit a `commit <id> <unix-timestamp>` line
// followed by zero-context unified diff output. Hunks keep stream order.
// Binary file sections are skipped. A deletion hunk anchored before line 1
// ("+0,0") is recorded at new_start 1.
inline std::vector<ParsedCommit> parse_git_log_stream(std::istream& in) {
  std::vector<ParsedCommit> commits;
  std::string raw_line;
  std::size_t line_no = 0;

  std::string old_path;
  std::string current_file;
  bool in_binary_patch = false;
  std::int64_t pending_old = 0;
  std::int64_t pending_new = 0;
  std::size_t hunk_line = 0;

  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string_view line = raw_line;
    if (line.ends_with('\r')) line.remove_suffix(1);

    if (pending_old > 0 || pending_new > 0) {
      if (line.starts_with('-') && pending_old > 0) {
        --pending_old;
        continue;
      }
      if (line.starts_with('+') && pending_new > 0) {
        --pending_new;
        continue;
      }
      if (line.starts_with('\\')) continue;
      throw ParseError("truncated hunk started at line " + std::to_string(hunk_line), line_no);
    }

    if (line.starts_with("commit ")) {
      std::istringstream fields{std::string(line)};
      std::string keyword, id, ts, extra;
      std::int64_t timestamp = 0;
      if (!(fields >> keyword >> id >> ts) || (fields >> extra) || !detail::parse_int(ts, timestamp)) {
        throw ParseError("malformed commit header, expected `commit <id> <unix-timestamp>`", line_no);
      }
      commits.push_back({id, timestamp, {}});
      old_path.clear();
      current_file.clear();
      in_binary_patch = false;
      continue;
    }
    if (commits.empty()) {
      if (line.empty()) continue;
      throw ParseError("expected `commit <id> <unix-timestamp>` header", line_no);
    }
    if (line.starts_with("diff ")) {
      old_path.clear();
      current_file.clear();
      in_binary_patch = false;
      continue;
    }
    if (in_binary_patch) continue;
    if (line.starts_with("GIT binary patch")) {
      in_binary_patch = true;
      current_file.clear();
      continue;
    }
    if (line.starts_with("Binary files ")) {
      current_file.clear();
      continue;
    }
    if (line.starts_with("--- ")) {
      old_path = detail::diff_path(line.substr(4));
      continue;
    }
    if (line.starts_with("+++ ")) {
      current_file = detail::diff_path(line.substr(4));
      if (current_file == "/dev/null") current_file = old_path;
      continue;
    }
    if (line.starts_with("@@")) {
      const auto h = detail::parse_hunk_header(line, line_no);
      if (current_file.empty() || current_file == "/dev/null") {
        throw ParseError("hunk without a file header", line_no);
      }
      commits.back().hunks.push_back(
          {current_file, static_cast<int>(std::max<std::int64_t>(h.new_start, 1)), static_cast<int>(h.new_count)});
      pending_old = h.old_count;
      pending_new = h.new_count;
      hunk_line = line_no;
      continue;
    }
    if (line.empty() || line.starts_with('\\') || detail::is_extended_header(line)) continue;
    throw ParseError("unrecognized line in diff output", line_no);
  }
  if (pending_old > 0 || pending_new > 0) {
    throw ParseError("truncated hunk started at line " + std::to_string(hunk_line), line_no);
  }
  return commits;
}

struct Attribution {
  std::set<FunctionId> functions;
  std::set<std::string> fallback_files;  // files without a span entry for the commit
};

// A function is touched when its span intersects
// [new_start, new_start + max(new_count, 1) - 1] of a hunk in its file.
inline Attribution attribute_hunks_to_functions(const std::vector<DiffHunk>& hunks, const SpanTable& spans,
                                                const CommitId& commit) {
  Attribution out;
  for (const auto& hunk : hunks) {
    auto it = spans.find({commit, hunk.file});
    if (it == spans.end()) {
      out.fallback_files.insert(hunk.file);
      continue;
    }
    const int lo = hunk.new_start;
    const int hi = hunk.new_start + std::max(hunk.new_count, 1) - 1;
    const auto& table = it->second;
    // Non-overlapping and sorted by start, so end lines are sorted as well.
    auto first = std::lower_bound(table.begin(), table.end(), lo,
                                  [](const FunctionSpan& s, int line) { return s.end_line < line; });
    for (; first != table.end() && first->start_line <= hi; ++first) out.functions.insert(first->id);
  }
  return out;
}

inline ChangeHistory build_change_history(const std::vector<ParsedCommit>& parsed, const SpanTable& spans) {
  std::vector<CommitRecord> records;
  records.reserve(parsed.size());
  for (const auto& commit : parsed) {
    auto attribution = attribute_hunks_to_functions(commit.hunks, spans, commit.id);
    CommitRecord rec;
    rec.id = commit.id;
    rec.timestamp = commit.timestamp;
    rec.touched_functions.assign(attribution.functions.begin(), attribution.functions.end());
    for (const auto& h : commit.hunks) rec.touched_files.push_back(h.file);
    rec.fallback_files.assign(attribution.fallback_files.begin(), attribution.fallback_files.end());
    records.push_back(std::move(rec));
  }
  return ChangeHistory(std::move(records));
}

}  // namespace unravel
