#pragma once

// Dependent sets d(t), co-change sets c(f), and the two Jaccard similarity
// matrices: square over target functions (splitting) and rectangular over
// target x client functions (redrawing).

#include <algorithm>
#include <cstddef>
#include <deque>
#include <optional>
#include <ranges>
#include <set>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "unravel/core_model.hpp"
#include "unravel/errors.hpp"

namespace unravel {

struct DependentSet {
  FunctionId function;
  DependencyMode mode = DependencyMode::TransitiveWithinTarget;
  std::vector<FileRef> members;  // sorted, never the target file
};

struct CoChangeSet {
  FunctionId function;
  std::vector<CommitId> members;  // sorted
};

// |a ∩ b| / |a ∪ b| over two sorted, duplicate-free ranges. Two empty sets
// have similarity 0.
template <std::ranges::input_range A, std::ranges::input_range B>
double jaccard(const A& a, const B& b) {
  std::size_t shared = 0;
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  auto ia = std::ranges::begin(a);
  auto ib = std::ranges::begin(b);
  const auto ea = std::ranges::end(a);
  const auto eb = std::ranges::end(b);
  while (ia != ea && ib != eb) {
    if (*ia < *ib) {
      ++ia;
      ++size_a;
    } else if (*ib < *ia) {
      ++ib;
      ++size_b;
    } else {
      ++ia;
      ++ib;
      ++shared;
      ++size_a;
      ++size_b;
    }
  }
  for (; ia != ea; ++ia) ++size_a;
  for (; ib != eb; ++ib) ++size_b;
  const std::size_t together = size_a + size_b - shared;
  return together == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(together);
}

namespace detail {

// Runs body(i) for i in [0, n). Each index is owned by exactly one worker, so
// callers that write only slot i get results identical to a sequential run.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  const std::size_t workers = std::min<std::size_t>(threads == 0 ? 1 : threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
}

inline bool in_window(Timestamp ts, std::optional<Timestamp> since) { return !since || ts >= *since; }

// Indices of commits touching f, restricted to the window.
inline std::vector<std::size_t> commit_indices(const ChangeHistory& history, std::string_view f,
                                               std::optional<Timestamp> since) {
  std::vector<std::size_t> out;
  for (auto idx : history.commits_touching_function(f)) {
    if (in_window(history.commits()[idx].timestamp, since)) out.push_back(idx);
  }
  return out;
}

inline std::span<const FunctionId> require_target(const FactsDb& db, const FileRef& target_file) {
  auto fns = db.functions_in(target_file.path);
  if (fns.empty()) throw ArgumentError("unknown target file: " + target_file.path);
  return fns;
}

}  // namespace detail

inline CoChangeSet cochange_set(const ChangeHistory& history, const FunctionId& f,
                                std::optional<Timestamp> since = std::nullopt) {
  CoChangeSet out{f, {}};
  for (auto idx : detail::commit_indices(history, f, since)) out.members.push_back(history.commits()[idx].id);
  std::sort(out.members.begin(), out.members.end());
  return out;
}

// Files that use target function t under the given dependency mode.
inline DependentSet dependent_set(const FactsDb& db, const ChangeHistory* history, const FileRef& target_file,
                                  const FunctionId& t, DependencyMode mode,
                                  std::optional<Timestamp> since = std::nullopt) {
  const auto* fn = db.find(t);
  if (fn == nullptr || fn->file != target_file) {
    throw ArgumentError("function " + t + " is not in target file " + target_file.path);
  }
  if ((mode == DependencyMode::CoChange || mode == DependencyMode::Union) && history == nullptr) {
    throw ConfigError(std::string("dependency mode ") + std::string(to_string(mode)) + " requires change history");
  }

  std::set<FileRef> files;
  auto add_caller_file = [&](const FunctionId& caller) {
    const auto* c = db.find(caller);
    if (c != nullptr && c->file != target_file) files.insert(c->file);
  };

  if (mode == DependencyMode::Direct) {
    for (const auto& caller : db.callers_of(t)) add_caller_file(caller);
  }
  if (mode == DependencyMode::TransitiveWithinTarget || mode == DependencyMode::Union) {
    // Reverse walk from t; only functions of the target file may be intermediates.
    std::unordered_set<FunctionId> visited{t};
    std::deque<FunctionId> frontier{t};
    while (!frontier.empty()) {
      const FunctionId node = std::move(frontier.front());
      frontier.pop_front();
      for (const auto& caller : db.callers_of(node)) {
        const auto* c = db.find(caller);
        if (c->file != target_file) {
          files.insert(c->file);
        } else if (visited.insert(caller).second) {
          frontier.push_back(caller);
        }
      }
    }
  }
  if (mode == DependencyMode::CoChange || mode == DependencyMode::Union) {
    for (auto idx : detail::commit_indices(*history, t, since)) {
      for (const auto& other : history->commits()[idx].touched_functions) {
        if (other != t) add_caller_file(other);
      }
    }
  }
  return {t, mode, {files.begin(), files.end()}};
}

// S_s over the target file's functions (sorted by id): pairwise Jaccard of
// dependent sets, zero diagonal.
inline SimilarityMatrix split_similarity(const FactsDb& db, const ChangeHistory* history, const FileRef& target_file,
                                         const AnalysisConfig& config) {
  config.validate();
  const auto fns = detail::require_target(db, target_file);
  if (fns.size() < 2) throw AnalysisError("target too small: " + target_file.path + " has fewer than 2 functions");

  const std::size_t n = fns.size();
  std::vector<FunctionId> labels(fns.begin(), fns.end());
  std::vector<DependentSet> deps(n);
  detail::parallel_for(n, config.threads, [&](std::size_t i) {
    deps[i] = dependent_set(db, history, target_file, labels[i], config.dependency_mode, config.since);
  });

  Eigen::MatrixXd entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  detail::parallel_for(n, config.threads, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = jaccard(deps[i].members, deps[j].members);
    }
  });
  entries.triangularView<Eigen::StrictlyLower>() = entries.transpose();
  return SimilarityMatrix(std::move(labels), std::move(entries));
}

// S_r: rows are target functions with a non-empty commit set; columns are
// functions of dependent files whose commit set meets some target function's.
inline RectSimilarityMatrix redraw_similarity(const FactsDb& db, const ChangeHistory& history,
                                              const FileRef& target_file, const AnalysisConfig& config) {
  config.validate();
  const auto fns = detail::require_target(db, target_file);
  if (fns.size() < 2) throw AnalysisError("target too small: " + target_file.path + " has fewer than 2 functions");

  std::set<FileRef> dependents;
  for (const auto& t : fns) {
    auto d = dependent_set(db, &history, target_file, t, config.dependency_mode, config.since);
    dependents.insert(d.members.begin(), d.members.end());
  }

  std::vector<FunctionId> rows;
  std::vector<std::vector<std::size_t>> row_sets;
  std::vector<bool> target_commit;
  target_commit.resize(history.size(), false);
  for (const auto& t : fns) {
    auto commits = detail::commit_indices(history, t, config.since);
    if (commits.empty()) continue;
    for (auto c : commits) target_commit[c] = true;
    rows.push_back(t);
    row_sets.push_back(std::move(commits));
  }

  std::vector<FunctionId> cols;
  std::vector<std::vector<std::size_t>> col_sets;
  for (const auto& file : dependents) {
    for (const auto& d : db.functions_in(file.path)) {
      auto commits = detail::commit_indices(history, d, config.since);
      if (std::none_of(commits.begin(), commits.end(), [&](std::size_t c) { return target_commit[c]; })) continue;
      cols.push_back(d);
      col_sets.push_back(std::move(commits));
    }
  }
  // Sort columns by id while keeping their commit sets aligned.
  std::vector<std::size_t> order(cols.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cols[a] < cols[b]; });
  std::vector<FunctionId> sorted_cols;
  std::vector<std::vector<std::size_t>> sorted_sets;
  for (auto i : order) {
    sorted_cols.push_back(std::move(cols[i]));
    sorted_sets.push_back(std::move(col_sets[i]));
  }

  if (rows.size() < 2 || sorted_cols.size() < 2) {
    throw AnalysisError("insufficient history: " + std::to_string(rows.size()) + " eligible target functions, " +
                        std::to_string(sorted_cols.size()) + " eligible client functions");
  }

  Eigen::MatrixXd entries(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(sorted_cols.size()));
  detail::parallel_for(rows.size(), config.threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < sorted_cols.size(); ++j) {
      entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = jaccard(row_sets[i], sorted_sets[j]);
    }
  });
  return RectSimilarityMatrix(std::move(rows), std::move(sorted_cols), std::move(entries));
}

}  // namespace unravel
