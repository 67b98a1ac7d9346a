#pragma once

// Shared domain types: functions, files, call facts, change history,
// similarity matrices, recommendations and analysis configuration.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "unravel/errors.hpp"

namespace unravel {

// Opaque identifier supplied by the facts producer, e.g. "path#qualified_name".
// The engine compares ids but never parses them.
using FunctionId = std::string;
using CommitId = std::string;
using Timestamp = std::int64_t;  // seconds since epoch, UTC

// Repository-relative path with forward slashes.
inline std::string normalize_path(std::string_view raw) {
  std::string path(raw);
  std::replace(path.begin(), path.end(), '\\', '/');
  while (path.starts_with("./")) path.erase(0, 2);
  return path;
}

struct FileRef {
  std::string path;

  auto operator<=>(const FileRef&) const = default;
};

struct LineSpan {
  int start_line = 1;
  int end_line = 1;

  bool operator==(const LineSpan&) const = default;
};

struct FunctionRef {
  FunctionId id;
  FileRef file;
  std::string qualified_name;
  std::optional<LineSpan> span;

  bool operator==(const FunctionRef&) const = default;
};

struct CallEdge {
  FunctionId caller;
  FunctionId callee;

  auto operator<=>(const CallEdge&) const = default;
};

// Immutable snapshot of functions, files and function-level call edges.
//
// Construction never throws on invariant violations so that validate_facts
// can report them; lookups skip dangling edges. Functions are kept sorted by
// id, calls sorted and deduplicated, files sorted and unique.
class FactsDb {
 public:
  FactsDb() = default;

  FactsDb(std::vector<FunctionRef> functions, std::vector<CallEdge> calls,
          std::vector<FileRef> extra_files = {})
      : functions_(std::move(functions)), calls_(std::move(calls)) {
    std::stable_sort(functions_.begin(), functions_.end(),
                     [](const FunctionRef& a, const FunctionRef& b) { return a.id < b.id; });
    std::sort(calls_.begin(), calls_.end());
    calls_.erase(std::unique(calls_.begin(), calls_.end()), calls_.end());

    for (const auto& f : functions_) extra_files.push_back(f.file);
    std::sort(extra_files.begin(), extra_files.end());
    extra_files.erase(std::unique(extra_files.begin(), extra_files.end()), extra_files.end());
    files_ = std::move(extra_files);

    callers_.resize(functions_.size());
    for (std::size_t i = 0; i < functions_.size(); ++i) {
      index_.emplace(functions_[i].id, i);  // first occurrence wins
      by_file_[functions_[i].file.path].push_back(functions_[i].id);
    }
    for (const auto& edge : calls_) {
      auto callee = index_.find(edge.callee);
      if (callee == index_.end() || !index_.contains(edge.caller)) continue;
      callers_[callee->second].push_back(edge.caller);
    }
  }

  const std::vector<FunctionRef>& functions() const { return functions_; }
  const std::vector<FileRef>& files() const { return files_; }
  const std::vector<CallEdge>& calls() const { return calls_; }

  const FunctionRef* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &functions_[it->second];
  }

  bool has_file(std::string_view path) const {
    return std::binary_search(files_.begin(), files_.end(), FileRef{std::string(path)});
  }

  // Direct callers of `id`, sorted by id. Empty for unknown ids.
  std::span<const FunctionId> callers_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return {};
    return callers_[it->second];
  }

  // Functions declared in `path`, sorted by id.
  std::span<const FunctionId> functions_in(std::string_view path) const {
    auto it = by_file_.find(std::string(path));
    if (it == by_file_.end()) return {};
    return it->second;
  }

  friend bool operator==(const FactsDb& a, const FactsDb& b) {
    return a.functions_ == b.functions_ && a.calls_ == b.calls_ && a.files_ == b.files_;
  }

 private:
  std::vector<FunctionRef> functions_;
  std::vector<CallEdge> calls_;
  std::vector<FileRef> files_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, std::vector<FunctionId>> by_file_;
  std::vector<std::vector<FunctionId>> callers_;  // sorted because calls_ is
};

enum class ViolationKind {
  DuplicateFunctionId,
  EmptyFunctionId,
  EmptyFilePath,
  InvalidSpan,
  DanglingEdge,
  SelfEdge,
};

inline std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::DuplicateFunctionId: return "duplicate-function-id";
    case ViolationKind::EmptyFunctionId: return "empty-function-id";
    case ViolationKind::EmptyFilePath: return "empty-file-path";
    case ViolationKind::InvalidSpan: return "invalid-span";
    case ViolationKind::DanglingEdge: return "dangling-edge";
    case ViolationKind::SelfEdge: return "self-edge";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string subject;  // offending id, path, or "caller -> callee"

  std::string describe() const { return std::string(to_string(kind)) + ": " + subject; }
  bool operator==(const Violation&) const = default;
};

inline std::vector<Violation> validate_facts(const FactsDb& db) {
  std::vector<Violation> report;
  const auto& fns = db.functions();
  for (std::size_t i = 0; i < fns.size(); ++i) {
    const auto& f = fns[i];
    if (f.id.empty()) report.push_back({ViolationKind::EmptyFunctionId, f.qualified_name});
    if (i > 0 && fns[i - 1].id == f.id && (i < 2 || fns[i - 2].id != f.id)) {
      report.push_back({ViolationKind::DuplicateFunctionId, f.id});
    }
    if (f.file.path.empty()) report.push_back({ViolationKind::EmptyFilePath, f.id});
    if (f.span && (f.span->start_line < 1 || f.span->start_line > f.span->end_line)) {
      report.push_back({ViolationKind::InvalidSpan, f.id});
    }
  }
  for (const auto& edge : db.calls()) {
    for (const auto* end : {&edge.caller, &edge.callee}) {
      if (db.find(*end) == nullptr) report.push_back({ViolationKind::DanglingEdge, *end});
    }
    if (edge.caller == edge.callee) report.push_back({ViolationKind::SelfEdge, edge.caller});
  }
  return report;
}

inline void require_valid(const FactsDb& db) {
  auto report = validate_facts(db);
  if (report.empty()) return;
  std::vector<std::string> lines;
  for (const auto& v : report) lines.push_back(v.describe());
  throw ValidationError(std::move(lines));
}

struct CommitRecord {
  CommitId id;
  Timestamp timestamp = 0;
  std::vector<FunctionId> touched_functions;  // sorted, unique
  std::vector<std::string> touched_files;     // sorted, unique
  // Files whose hunks could not be attributed to functions (no span entry).
  std::vector<std::string> fallback_files;

  bool flagged() const { return !fallback_files.empty(); }
  bool operator==(const CommitRecord&) const = default;
};

namespace detail {
template <typename T>
void sort_unique(std::vector<T>& items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
}
}  // namespace detail

// Commits ordered by (timestamp, id). Throws ValidationError on duplicate ids.
class ChangeHistory {
 public:
  ChangeHistory() = default;

  explicit ChangeHistory(std::vector<CommitRecord> commits) : commits_(std::move(commits)) {
    for (auto& c : commits_) {
      detail::sort_unique(c.touched_functions);
      detail::sort_unique(c.touched_files);
      detail::sort_unique(c.fallback_files);
    }
    std::sort(commits_.begin(), commits_.end(), [](const auto& a, const auto& b) {
      return std::tie(a.timestamp, a.id) < std::tie(b.timestamp, b.id);
    });

    std::vector<std::string> duplicates;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < commits_.size(); ++i) {
      if (!seen.emplace(commits_[i].id, i).second) duplicates.push_back("duplicate-commit-id: " + commits_[i].id);
      for (const auto& f : commits_[i].touched_functions) by_function_[f].push_back(i);
      for (const auto& p : commits_[i].touched_files) by_file_[p].push_back(i);
    }
    if (!duplicates.empty()) {
      detail::sort_unique(duplicates);
      throw ValidationError(std::move(duplicates));
    }
  }

  const std::vector<CommitRecord>& commits() const { return commits_; }
  std::size_t size() const { return commits_.size(); }

  // Indices into commits() of the commits touching a function, ascending.
  std::span<const std::size_t> commits_touching_function(std::string_view id) const {
    auto it = by_function_.find(std::string(id));
    if (it == by_function_.end()) return {};
    return it->second;
  }

  std::span<const std::size_t> commits_touching_file(std::string_view path) const {
    auto it = by_file_.find(std::string(path));
    if (it == by_file_.end()) return {};
    return it->second;
  }

  friend bool operator==(const ChangeHistory& a, const ChangeHistory& b) { return a.commits_ == b.commits_; }

 private:
  std::vector<CommitRecord> commits_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_function_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_file_;
};

// Function ids mentioned by the history but unknown to the facts, sorted.
inline std::vector<FunctionId> reconcile(const ChangeHistory& history, const FactsDb& db) {
  std::vector<FunctionId> unknown;
  for (const auto& c : history.commits()) {
    for (const auto& f : c.touched_functions) {
      if (db.find(f) == nullptr) unknown.push_back(f);
    }
  }
  detail::sort_unique(unknown);
  return unknown;
}

// Square affinity matrix over target functions. Symmetric, entries in [0, 1],
// zero diagonal; construction throws ValidationError otherwise.
class SimilarityMatrix {
 public:
  SimilarityMatrix(std::vector<FunctionId> labels, Eigen::MatrixXd entries)
      : labels_(std::move(labels)), entries_(std::move(entries)) {
    const auto n = static_cast<Eigen::Index>(labels_.size());
    if (entries_.rows() != n || entries_.cols() != n) {
      throw ValidationError({"similarity matrix shape does not match label count"});
    }
    std::vector<std::string> problems;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (entries_(i, i) != 0.0) problems.push_back("non-zero diagonal at " + labels_[i]);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = entries_(i, j);
        if (!(v >= 0.0 && v <= 1.0)) {
          problems.push_back("entry out of range at (" + labels_[i] + ", " + labels_[j] + ")");
        } else if (j > i && v != entries_(j, i)) {
          problems.push_back("asymmetric entry at (" + labels_[i] + ", " + labels_[j] + ")");
        }
      }
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
  }

  const std::vector<FunctionId>& labels() const { return labels_; }
  const Eigen::MatrixXd& entries() const { return entries_; }
  std::size_t size() const { return labels_.size(); }

  // True when every entry is zero: no dependent information at all.
  bool no_signal() const { return entries_.size() == 0 || entries_.isZero(0.0); }

  friend bool operator==(const SimilarityMatrix& a, const SimilarityMatrix& b) {
    return a.labels_ == b.labels_ && a.entries_.rows() == b.entries_.rows() && a.entries_ == b.entries_;
  }

 private:
  std::vector<FunctionId> labels_;
  Eigen::MatrixXd entries_;
};

// Rows are target functions, columns are client functions.
class RectSimilarityMatrix {
 public:
  RectSimilarityMatrix(std::vector<FunctionId> row_labels, std::vector<FunctionId> col_labels,
                       Eigen::MatrixXd entries)
      : row_labels_(std::move(row_labels)), col_labels_(std::move(col_labels)), entries_(std::move(entries)) {
    if (entries_.rows() != static_cast<Eigen::Index>(row_labels_.size()) ||
        entries_.cols() != static_cast<Eigen::Index>(col_labels_.size())) {
      throw ValidationError({"rectangular similarity shape does not match label counts"});
    }
    std::vector<std::string> problems;
    for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
      for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
        const double v = entries_(i, j);
        if (!(v >= 0.0 && v <= 1.0)) {
          problems.push_back("entry out of range at (" + row_labels_[i] + ", " + col_labels_[j] + ")");
        }
      }
    }
    auto rows = row_labels_;
    auto cols = col_labels_;
    std::sort(rows.begin(), rows.end());
    std::sort(cols.begin(), cols.end());
    std::vector<FunctionId> shared;
    std::set_intersection(rows.begin(), rows.end(), cols.begin(), cols.end(), std::back_inserter(shared));
    for (const auto& id : shared) problems.push_back("label on both sides: " + id);
    if (!problems.empty()) throw ValidationError(std::move(problems));
  }

  const std::vector<FunctionId>& row_labels() const { return row_labels_; }
  const std::vector<FunctionId>& col_labels() const { return col_labels_; }
  const Eigen::MatrixXd& entries() const { return entries_; }

 private:
  std::vector<FunctionId> row_labels_;
  std::vector<FunctionId> col_labels_;
  Eigen::MatrixXd entries_;
};

enum class RecommendationKind { Split, Redraw };

inline std::string_view to_string(RecommendationKind kind) {
  return kind == RecommendationKind::Split ? "split" : "redraw";
}

struct Recommendation {
  RecommendationKind kind = RecommendationKind::Split;
  std::vector<FunctionId> target_members;  // sorted
  std::vector<FunctionId> client_members;  // sorted; empty for Split
  int multiplicity = 1;
  double avg_change_freq = 0.0;
  std::vector<int> source_params;  // cluster counts that produced this set
  // Redraw co-cluster holding functions from only one side of the interface.
  bool single_side = false;

  std::size_t size() const { return target_members.size() + client_members.size(); }

  // All members sorted; used for the lexicographic ranking tie-break.
  std::vector<FunctionId> all_members() const {
    std::vector<FunctionId> all = target_members;
    all.insert(all.end(), client_members.begin(), client_members.end());
    std::sort(all.begin(), all.end());
    return all;
  }

  bool operator==(const Recommendation&) const = default;
};

enum class DependencyMode { Direct, TransitiveWithinTarget, CoChange, Union };

inline std::string_view to_string(DependencyMode mode) {
  switch (mode) {
    case DependencyMode::Direct: return "direct";
    case DependencyMode::TransitiveWithinTarget: return "transitive";
    case DependencyMode::CoChange: return "cochange";
    case DependencyMode::Union: return "union";
  }
  return "unknown";
}

inline std::optional<DependencyMode> parse_dependency_mode(std::string_view text) {
  for (auto mode : {DependencyMode::Direct, DependencyMode::TransitiveWithinTarget, DependencyMode::CoChange,
                    DependencyMode::Union}) {
    if (to_string(mode) == text) return mode;
  }
  return std::nullopt;
}

struct AnalysisConfig {
  DependencyMode dependency_mode = DependencyMode::TransitiveWithinTarget;
  int q_max = 3;
  int min_cluster_size = 2;
  std::uint64_t seed = 0;
  double eig_tolerance = 1e-9;
  int kmeans_max_iter = 300;
  std::optional<Timestamp> since;
  // Worker threads for similarity construction. Results do not depend on it.
  unsigned threads = 1;

  void validate() const {
    if (q_max < 1) throw ConfigError("q_max must be >= 1");
    if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be >= 2");
    if (!(eig_tolerance > 0.0)) throw ConfigError("eig_tolerance must be positive");
    if (kmeans_max_iter < 1) throw ConfigError("kmeans_max_iter must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }
};

}  // namespace unravel
