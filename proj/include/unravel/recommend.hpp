#pragma once

// Ensemble loops for interface splitting and interface redrawing, ranking of
// the resulting recommendation multiset, and the large-active file detector.

#include <algorithm>
#include <map>
#include <optional>
#include <ranges>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "unravel/cocluster.hpp"
#include "unravel/core_model.hpp"
#include "unravel/errors.hpp"
#include "unravel/similarity.hpp"
#include "unravel/spectral.hpp"

namespace unravel {

// One cluster produced by one parameter run, before aggregation.
struct ClusterCandidate {
  std::vector<FunctionId> target_members;
  std::vector<FunctionId> client_members;
  int theta = 0;
};

struct RankedReport {
  FileRef target_file;
  RecommendationKind kind = RecommendationKind::Split;
  std::vector<Recommendation> recommendations;
  AnalysisConfig config;
  std::vector<int> guesses;              // θ_1..θ_q actually run
  std::vector<std::string> diagnostics;  // sorted, human-readable
};

// Mean of |c(f)| over the members; unknown functions count 0.
template <std::ranges::input_range Members>
double avg_change_frequency(const Members& members, const ChangeHistory& history,
                            std::optional<Timestamp> since = std::nullopt) {
  std::size_t count = 0;
  std::size_t total = 0;
  for (const auto& f : members) {
    ++count;
    total += detail::commit_indices(history, f, since).size();
  }
  return count == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(count);
}

// Strict ranking order: multiplicity desc, average change frequency desc,
// then the sorted member sequence ascending.
inline bool ranks_before(const Recommendation& a, const Recommendation& b) {
  if (a.multiplicity != b.multiplicity) return a.multiplicity > b.multiplicity;
  if (a.avg_change_freq != b.avg_change_freq) return a.avg_change_freq > b.avg_change_freq;
  return a.all_members() < b.all_members();
}

// Collapses identical member sets (both sides) into one recommendation whose
// multiplicity is the occurrence count, then sorts by ranks_before.
inline std::vector<Recommendation> rank_recommendations(RecommendationKind kind,
                                                        const std::vector<ClusterCandidate>& multiset,
                                                        const ChangeHistory& history,
                                                        std::optional<Timestamp> since = std::nullopt) {
  std::map<std::pair<std::vector<FunctionId>, std::vector<FunctionId>>, Recommendation> merged;
  for (const auto& c : multiset) {
    auto key = std::make_pair(c.target_members, c.client_members);
    std::sort(key.first.begin(), key.first.end());
    std::sort(key.second.begin(), key.second.end());
    auto [it, fresh] = merged.try_emplace(key);
    auto& rec = it->second;
    if (fresh) {
      rec.kind = kind;
      rec.target_members = key.first;
      rec.client_members = key.second;
      rec.multiplicity = 0;
      rec.avg_change_freq = avg_change_frequency(rec.all_members(), history, since);
      rec.single_side = kind == RecommendationKind::Redraw && (rec.target_members.empty() || rec.client_members.empty());
    }
    ++rec.multiplicity;
    rec.source_params.push_back(c.theta);
  }
  std::vector<Recommendation> out;
  out.reserve(merged.size());
  for (auto& [key, rec] : merged) out.push_back(std::move(rec));
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

namespace detail {

inline bool keep_candidate(const ClusterCandidate& c, std::size_t target_size, const AnalysisConfig& config) {
  const auto size = c.target_members.size() + c.client_members.size();
  if (size < static_cast<std::size_t>(config.min_cluster_size)) return false;
  return !(c.client_members.empty() && c.target_members.size() == target_size);
}

inline void finish_report(RankedReport& report, const std::vector<ClusterCandidate>& multiset,
                          const ChangeHistory& history) {
  report.recommendations = rank_recommendations(report.kind, multiset, history, report.config.since);
  const auto flagged = std::count_if(history.commits().begin(), history.commits().end(),
                                     [](const CommitRecord& c) { return c.flagged(); });
  if (flagged > 0) {
    report.diagnostics.push_back("file-level fallback attribution in " + std::to_string(flagged) + " commits");
  }
  if (report.recommendations.empty()) report.diagnostics.push_back("no recommendations survived filtering");
  for (const auto& rec : report.recommendations) {
    if (rec.single_side) {
      report.diagnostics.push_back("single-side co-cluster: " + rec.all_members().front() + " (+" +
                                   std::to_string(rec.size() - 1) + ")");
    }
  }
  std::sort(report.diagnostics.begin(), report.diagnostics.end());
}

}  // namespace detail

// Interface splitting: cluster target functions by shared dependents under
// every guessed cluster count and rank the pooled clusters.
inline RankedReport ensemble_split(const FactsDb& db, const ChangeHistory& history, const FileRef& target_file,
                                   const AnalysisConfig& config) {
  config.validate();
  const auto fns = detail::require_target(db, target_file);
  if (fns.size() < 3) {
    throw AnalysisError("target too small for model selection: " + target_file.path + " has " +
                        std::to_string(fns.size()) + " functions");
  }
  RankedReport report{target_file, RecommendationKind::Split, {}, config, {}, {}};

  const auto s = split_similarity(db, &history, target_file, config);
  const auto lap = normalized_laplacian(s);
  for (const auto& id : lap.isolated) report.diagnostics.push_back("isolated function: " + id);

  const auto n = lap.kept.size();
  if (n < 3) throw AnalysisError("target too small for model selection: " + std::to_string(n) + " connected functions");
  const auto spectrum = eig_smallest(lap.laplacian, static_cast<int>(n), config.eig_tolerance);
  std::vector<double> eigenvalues(spectrum.eigenvalues.data(), spectrum.eigenvalues.data() + n);
  report.guesses = spectral_gap_guesses(eigenvalues, config.q_max, n, config.eig_tolerance);
  if (report.guesses.empty()) report.diagnostics.push_back("no spectral gap: similarity has no cluster structure");

  std::vector<ClusterCandidate> multiset;
  for (int theta : report.guesses) {
    const auto partition = detail::ncut_from_spectrum(s, lap, spectrum, theta, config);
    for (auto& members : partition.clusters()) {
      ClusterCandidate c{std::move(members), {}, theta};
      if (detail::keep_candidate(c, fns.size(), config)) multiset.push_back(std::move(c));
    }
  }
  detail::finish_report(report, multiset, history);
  return report;
}

// Interface redrawing: co-cluster target and client functions by shared
// commits under every guessed cluster count and rank the pooled co-clusters.
inline RankedReport ensemble_redraw(const FactsDb& db, const ChangeHistory& history, const FileRef& target_file,
                                    const AnalysisConfig& config) {
  config.validate();
  const auto fns = detail::require_target(db, target_file);
  RankedReport report{target_file, RecommendationKind::Redraw, {}, config, {}, {}};

  const auto s = redraw_similarity(db, history, target_file, config);
  const auto b = normalized_biadjacency(s);
  for (const auto& id : b.dropped) report.diagnostics.push_back("dropped all-zero row/column: " + id);

  const auto n_min = static_cast<std::size_t>(std::min(b.normalized.rows(), b.normalized.cols()));
  if (n_min < 2) throw AnalysisError("insufficient history: fewer than 2 co-changing rows or columns");
  const auto spectrum = svd_largest(b.normalized, static_cast<int>(n_min));
  detail::require_structure(spectrum.values, config.eig_tolerance);
  std::vector<double> values(spectrum.values.data(), spectrum.values.data() + n_min);
  report.guesses = singular_gap_guesses(values, config.q_max, n_min, config.eig_tolerance);
  if (report.guesses.empty()) report.diagnostics.push_back("no singular gap: co-change has no cluster structure");

  std::vector<ClusterCandidate> multiset;
  for (int theta : report.guesses) {
    const auto partition = detail::cocluster_from_biadjacency(s, b, theta, config);
    for (auto& cluster : partition.clusters()) {
      ClusterCandidate c{std::move(cluster.rows), std::move(cluster.cols), theta};
      if (detail::keep_candidate(c, fns.size(), config)) multiset.push_back(std::move(c));
    }
  }
  detail::finish_report(report, multiset, history);
  return report;
}

struct FileActivityStats {
  FileRef file;
  std::size_t fanin_files = 0;
  std::size_t commit_count = 0;
  int fanin_rank = 0;   // dense, 1 = highest fan-in
  int change_rank = 0;  // dense, 1 = most commits

  bool operator==(const FileActivityStats&) const = default;
};

namespace detail {

inline void dense_rank(std::vector<FileActivityStats>& stats, std::size_t FileActivityStats::*metric,
                       int FileActivityStats::*rank) {
  std::vector<std::size_t> values;
  for (const auto& s : stats) values.push_back(s.*metric);
  std::sort(values.begin(), values.end(), std::greater<>());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  for (auto& s : stats) {
    auto pos = std::lower_bound(values.begin(), values.end(), s.*metric, std::greater<>());
    s.*rank = static_cast<int>(pos - values.begin()) + 1;
  }
}

}  // namespace detail

// Fills fan-in, commit counts and dense ranks. Stats may come from
// file_activity_stats or be assembled directly.
inline void assign_activity_ranks(std::vector<FileActivityStats>& stats) {
  detail::dense_rank(stats, &FileActivityStats::fanin_files, &FileActivityStats::fanin_rank);
  detail::dense_rank(stats, &FileActivityStats::commit_count, &FileActivityStats::change_rank);
}

// Per file of the facts: distinct other files holding a direct caller of one
// of its functions, and commits touching it. Ordered by path.
inline std::vector<FileActivityStats> file_activity_stats(const FactsDb& db, const ChangeHistory& history,
                                                          std::optional<Timestamp> since = std::nullopt) {
  std::vector<FileActivityStats> stats;
  for (const auto& file : db.files()) {
    std::set<std::string> clients;
    for (const auto& f : db.functions_in(file.path)) {
      for (const auto& caller : db.callers_of(f)) {
        const auto* c = db.find(caller);
        if (c->file != file) clients.insert(c->file.path);
      }
    }
    std::size_t commits = 0;
    for (auto idx : history.commits_touching_file(file.path)) {
      if (detail::in_window(history.commits()[idx].timestamp, since)) ++commits;
    }
    stats.push_back({file, clients.size(), commits, 0, 0});
  }
  assign_activity_ranks(stats);
  return stats;
}

// Candidates ordered by max(fanin_rank, change_rank), then fanin_rank, then path.
inline std::vector<FileActivityStats> detect_large_active(std::vector<FileActivityStats> stats, int top_n) {
  if (top_n < 1) throw ArgumentError("top_n must be >= 1");
  std::sort(stats.begin(), stats.end(), [](const auto& a, const auto& b) {
    return std::make_tuple(std::max(a.fanin_rank, a.change_rank), a.fanin_rank, a.file.path) <
           std::make_tuple(std::max(b.fanin_rank, b.change_rank), b.fanin_rank, b.file.path);
  });
  if (stats.size() > static_cast<std::size_t>(top_n)) stats.resize(static_cast<std::size_t>(top_n));
  return stats;
}

}  // namespace unravel
