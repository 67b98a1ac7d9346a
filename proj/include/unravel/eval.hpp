#pragma once

// Synthetic ground truth: a target file with planted responsibilities, each
// used by its own client files and changed by its own commits, plus the
// scoring used to check that the ensembles recover the plant.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "unravel/core_model.hpp"
#include "unravel/errors.hpp"
#include "unravel/ingest.hpp"
#include "unravel/recommend.hpp"

namespace unravel {

// A grouping of labels: every label appears in exactly one group.
using Grouping = std::vector<std::vector<FunctionId>>;

struct PlantedSpec {
  int n_responsibilities = 4;
  int funcs_per_responsibility = 5;
  int clients_per_responsibility = 6;
  int n_commits_per_responsibility = 10;
  double noise_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_responsibilities < 1 || funcs_per_responsibility < 1 || clients_per_responsibility < 1 ||
        n_commits_per_responsibility < 1) {
      throw ArgumentError("planted spec counts must be >= 1");
    }
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ArgumentError("noise_rate must lie in [0, 1]");
  }
};

struct PlantedData {
  FactsDb facts;
  ChangeHistory history;
  FileRef target_file;
  Grouping split_truth;   // target functions per responsibility
  Grouping redraw_truth;  // target and client functions per responsibility
  SpanTable spans;        // spans of every touched file at every commit
};

namespace detail {

// Fixed mappings from raw 64-bit draws so fixtures are identical on every
// standard library.
class PlantRng {
 public:
  explicit PlantRng(std::uint64_t seed) : engine_(seed) {}

  bool chance(double p) { return static_cast<double>(engine_() >> 11) * 0x1.0p-53 < p; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
};

inline std::string pad(int value, int width = 2) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

// A uniformly chosen member of a group other than `own`.
inline const FunctionId& cross_pick(const Grouping& groups, int own, PlantRng& rng) {
  const auto others = groups.size() - 1;
  auto g = rng.below(others);
  if (g >= static_cast<std::size_t>(own)) ++g;
  return groups[g][rng.below(groups[g].size())];
}

}  // namespace detail

inline PlantedData generate_planted(const PlantedSpec& spec) {
  spec.validate();
  detail::PlantRng rng(spec.seed);
  PlantedData out;
  out.target_file = FileRef{"src/Hub.cpp"};

  std::vector<FunctionRef> functions;
  Grouping targets(static_cast<std::size_t>(spec.n_responsibilities));
  Grouping clients(static_cast<std::size_t>(spec.n_responsibilities));
  int line = 1;
  for (int r = 0; r < spec.n_responsibilities; ++r) {
    for (int f = 0; f < spec.funcs_per_responsibility; ++f) {
      const std::string name = "r" + detail::pad(r) + "_f" + detail::pad(f);
      FunctionRef fn{out.target_file.path + "#" + name, out.target_file, "Hub::" + name, LineSpan{line, line + 7}};
      line += 10;
      targets[static_cast<std::size_t>(r)].push_back(fn.id);
      functions.push_back(std::move(fn));
    }
    for (int c = 0; c < spec.clients_per_responsibility; ++c) {
      const std::string path = "clients/r" + detail::pad(r) + "/Client" + detail::pad(c) + ".cpp";
      FunctionRef fn{path + "#use", FileRef{path}, "Client" + detail::pad(c) + "::use", LineSpan{1, 20}};
      clients[static_cast<std::size_t>(r)].push_back(fn.id);
      functions.push_back(std::move(fn));
    }
  }

  const bool can_mix = spec.n_responsibilities > 1;
  std::vector<CallEdge> calls;
  for (int r = 0; r < spec.n_responsibilities; ++r) {
    for (const auto& client : clients[static_cast<std::size_t>(r)]) {
      for (const auto& t : targets[static_cast<std::size_t>(r)]) {
        calls.push_back({client, t});
        if (can_mix && rng.chance(spec.noise_rate)) calls.push_back({client, detail::cross_pick(targets, r, rng)});
      }
    }
  }

  std::map<FunctionId, const FunctionRef*> by_id;
  for (const auto& f : functions) by_id[f.id] = &f;

  std::vector<CommitRecord> commits;
  const Timestamp base = 1'600'000'000;
  for (int j = 0; j < spec.n_commits_per_responsibility; ++j) {
    for (int r = 0; r < spec.n_responsibilities; ++r) {
      CommitRecord rec;
      rec.id = "k" + detail::pad(r) + "_" + detail::pad(j, 3);
      rec.timestamp = base + static_cast<Timestamp>(j * spec.n_responsibilities + r) * 3600;
      for (const auto* side : {&targets, &clients}) {
        for (const auto& f : (*side)[static_cast<std::size_t>(r)]) {
          rec.touched_functions.push_back(f);
          if (can_mix && rng.chance(spec.noise_rate)) rec.touched_functions.push_back(detail::cross_pick(*side, r, rng));
        }
      }
      for (const auto& f : rec.touched_functions) {
        const auto* fn = by_id.at(f);
        rec.touched_files.push_back(fn->file.path);
        auto& spans = out.spans[{rec.id, fn->file.path}];
        FunctionSpan span{fn->id, fn->span->start_line, fn->span->end_line};
        if (std::find(spans.begin(), spans.end(), span) == spans.end()) spans.push_back(span);
      }
      commits.push_back(std::move(rec));
    }
  }
  for (auto& [key, spans] : out.spans) {
    std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) { return a.start_line < b.start_line; });
  }

  out.facts = FactsDb(std::move(functions), std::move(calls));
  out.history = ChangeHistory(std::move(commits));
  out.split_truth = targets;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    auto group = targets[r];
    group.insert(group.end(), clients[r].begin(), clients[r].end());
    std::sort(group.begin(), group.end());
    out.redraw_truth.push_back(std::move(group));
  }
  return out;
}

// Renders parsed commits in the raw log format: zero-context hunks whose body
// lines are placeholders. Parsing the result yields the input structure.
inline std::string render_git_log(const std::vector<ParsedCommit>& commits) {
  std::ostringstream out;
  for (const auto& commit : commits) {
    out << "commit " << commit.id << ' ' << commit.timestamp << '\n';
    std::string current;
    for (const auto& h : commit.hunks) {
      if (h.file != current) {
        current = h.file;
        out << "diff --git a/" << current << " b/" << current << '\n';
        out << "--- a/" << current << '\n';
        out << "+++ b/" << current << '\n';
      }
      if (h.new_count == 0) {
        out << "@@ -" << h.new_start << ",1 +" << h.new_start << ",0 @@\n-removed\n";
      } else {
        out << "@@ -" << h.new_start << ",0 +" << h.new_start << ',' << h.new_count << " @@\n";
        for (int i = 0; i < h.new_count; ++i) out << "+line " << i << '\n';
      }
    }
  }
  return out.str();
}

namespace detail {

inline std::map<FunctionId, std::size_t> group_index(const Grouping& g, const char* which) {
  std::map<FunctionId, std::size_t> index;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (const auto& label : g[i]) {
      if (!index.emplace(label, i).second) throw ArgumentError(std::string(which) + " lists " + label + " twice");
    }
  }
  return index;
}

inline double pairs(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace detail

// Hubert-Arabie adjusted Rand index from the pair-counting contingency table.
// When the expected and maximum index coincide (both groupings trivial) the
// result is 1 for identical groupings and 0 otherwise.
inline double adjusted_rand_index(const Grouping& a, const Grouping& b) {
  const auto ia = detail::group_index(a, "first grouping");
  const auto ib = detail::group_index(b, "second grouping");
  if (ia.size() != ib.size() ||
      !std::equal(ia.begin(), ia.end(), ib.begin(), [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw ArgumentError("groupings cover different label universes");
  }
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> rows;
  std::map<std::size_t, double> cols;
  for (const auto& [label, ga] : ia) {
    const auto gb = ib.at(label);
    table[{ga, gb}] += 1.0;
    rows[ga] += 1.0;
    cols[gb] += 1.0;
  }
  double index = 0.0;
  for (const auto& [cell, n] : table) index += detail::pairs(n);
  double sum_a = 0.0;
  for (const auto& [g, n] : rows) sum_a += detail::pairs(n);
  double sum_b = 0.0;
  for (const auto& [g, n] : cols) sum_b += detail::pairs(n);
  const double total = detail::pairs(static_cast<double>(ia.size()));
  const double expected = total == 0.0 ? 0.0 : sum_a * sum_b / total;
  const double maximum = 0.5 * (sum_a + sum_b);
  if (maximum == expected) return index == maximum ? 1.0 : 0.0;
  return (index - expected) / (maximum - expected);
}

inline Grouping to_grouping(const Partition& p) {
  Grouping out;
  for (auto& c : p.clusters()) {
    if (!c.empty()) out.push_back(std::move(c));
  }
  return out;
}

struct RecoveryReport {
  double ari = 0.0;
  std::vector<bool> exact;  // per planted group: some recommendation equals it
};

// Best-match grouping: recommendations are taken in rank order, each kept
// only if disjoint from those already kept; labels left over become
// singletons. Members outside the truth universe are ignored.
inline Grouping best_match_grouping(const std::vector<Recommendation>& recommendations, const Grouping& truth) {
  std::set<FunctionId> universe;
  for (const auto& g : truth) universe.insert(g.begin(), g.end());
  std::set<FunctionId> taken;
  Grouping out;
  for (const auto& rec : recommendations) {
    std::vector<FunctionId> members;
    for (const auto& m : rec.all_members()) {
      if (universe.contains(m)) members.push_back(m);
    }
    if (members.empty() ||
        std::any_of(members.begin(), members.end(), [&](const auto& m) { return taken.contains(m); })) {
      continue;
    }
    taken.insert(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  for (const auto& label : universe) {
    if (!taken.contains(label)) out.push_back({label});
  }
  return out;
}

inline RecoveryReport recovery_report(const std::vector<Recommendation>& recommendations, const Grouping& truth) {
  RecoveryReport out;
  if (recommendations.empty()) {
    out.exact.assign(truth.size(), false);
    return out;
  }
  out.ari = adjusted_rand_index(best_match_grouping(recommendations, truth), truth);
  for (const auto& group : truth) {
    auto sorted = group;
    std::sort(sorted.begin(), sorted.end());
    out.exact.push_back(std::any_of(recommendations.begin(), recommendations.end(),
                                    [&](const Recommendation& r) { return r.all_members() == sorted; }));
  }
  return out;
}

struct SweepRow {
  PlantedSpec spec;
  RecommendationKind kind = RecommendationKind::Split;
  double ari = 0.0;
  int exact_groups = 0;
  std::string error;  // analysis failure message, empty on success
};

// Runs one ensemble per spec and scores it against the plant. Analysis
// failures are recorded with ARI 0.
inline std::vector<SweepRow> eval_sweep(const std::vector<PlantedSpec>& specs, RecommendationKind kind,
                                        const AnalysisConfig& config) {
  std::vector<SweepRow> rows;
  for (const auto& spec : specs) {
    SweepRow row{spec, kind, 0.0, 0, {}};
    const auto data = generate_planted(spec);
    try {
      const auto report = kind == RecommendationKind::Split
                              ? ensemble_split(data.facts, data.history, data.target_file, config)
                              : ensemble_redraw(data.facts, data.history, data.target_file, config);
      const auto& truth = kind == RecommendationKind::Split ? data.split_truth : data.redraw_truth;
      const auto rec = recovery_report(report.recommendations, truth);
      row.ari = rec.ari;
      row.exact_groups = static_cast<int>(std::count(rec.exact.begin(), rec.exact.end(), true));
    } catch (const AnalysisError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace unravel
