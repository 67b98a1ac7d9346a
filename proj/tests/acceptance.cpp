// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"
#include "unravel/cli.hpp"
#include "unravel/unravel.hpp"

using namespace unravel;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<int> labels_of(const Grouping& g, const std::vector<FunctionId>& universe) {
  std::map<FunctionId, int> at;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (const auto& f : g[i]) at[f] = static_cast<int>(i);
  }
  std::vector<int> out;
  for (const auto& f : universe) out.push_back(at.at(f));
  return out;
}

// ARI by pair counting over the best-match grouping.
double oracle_best_match_ari(const std::vector<Recommendation>& recs, const Grouping& truth) {
  std::vector<FunctionId> universe;
  for (const auto& g : truth) universe.insert(universe.end(), g.begin(), g.end());
  std::sort(universe.begin(), universe.end());
  if (recs.empty()) return 0.0;
  return oracle::ari(labels_of(best_match_grouping(recs, truth), universe), labels_of(truth, universe));
}

std::set<std::set<FunctionId>> top_sets(const std::vector<Recommendation>& recs, std::size_t n) {
  std::set<std::set<FunctionId>> out;
  for (std::size_t i = 0; i < std::min(n, recs.size()); ++i) {
    const auto all = recs[i].all_members();
    out.insert({all.begin(), all.end()});
  }
  return out;
}

Outcome planted_split_recovery() {
  const auto start = std::chrono::steady_clock::now();
  const auto data = generate_planted({4, 5, 6, 10, 0.0, 42});
  const auto report = ensemble_split(data.facts, data.history, data.target_file, AnalysisConfig{});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool top4 = report.recommendations.size() >= 4 &&
                    top_sets(report.recommendations, 4) == oracle::as_sets(data.split_truth);
  const double ari = oracle_best_match_ari(report.recommendations, data.split_truth);
  return {top4 && ari == 1.0 && seconds < 5.0,
          std::to_string(report.recommendations.size()) + " recommendations, top-4 exact=" + (top4 ? "yes" : "no") +
              ", ARI=" + num(ari) + ", " + num(seconds) + " s"};
}

Outcome planted_split_under_noise() {
  double total = 0;
  std::string each;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = generate_planted({4, 5, 6, 10, 0.05, seed});
    double ari = 0.0;
    try {
      const auto report = ensemble_split(data.facts, data.history, data.target_file, AnalysisConfig{});
      ari = oracle_best_match_ari(report.recommendations, data.split_truth);
    } catch (const AnalysisError&) {
    }
    total += ari;
    each += (each.empty() ? "" : " ") + num(ari);
  }
  const double mean = total / 10.0;
  return {mean >= 0.8, "mean ARI=" + num(mean) + " (threshold 0.8; per seed: " + each + ")"};
}

Outcome planted_redraw_recovery() {
  const auto data = generate_planted({3, 4, 3, 10, 0.0, 42});
  const auto report = ensemble_redraw(data.facts, data.history, data.target_file, AnalysisConfig{});
  bool both_sides = report.recommendations.size() >= 3;
  for (std::size_t i = 0; both_sides && i < 3; ++i) {
    const auto& rec = report.recommendations[i];
    both_sides = !rec.target_members.empty() && !rec.client_members.empty();
  }
  const bool exact = top_sets(report.recommendations, 3) == oracle::as_sets(data.redraw_truth);
  return {both_sides && exact, std::to_string(report.recommendations.size()) + " recommendations, top-3 exact=" +
                                   (exact ? "yes" : "no")};
}

Outcome spectral_components() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> weight(0.6, 1.0);
  std::string detail;
  bool ok = true;
  for (int m = 2; m <= 4; ++m) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<int> sizes;
      int n = 0;
      for (int c = 0; c < m; ++c) {
        sizes.push_back(2 + static_cast<int>(rng() % 4));
        n += sizes.back();
      }
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
      std::vector<FunctionId> labels;
      std::set<std::set<FunctionId>> components;
      int at = 0;
      for (int c = 0; c < m; ++c) {
        std::set<FunctionId> comp;
        for (int i = at; i < at + sizes[static_cast<std::size_t>(c)]; ++i) {
          comp.insert("n" + std::to_string(100 + i));
          for (int j = i + 1; j < at + sizes[static_cast<std::size_t>(c)]; ++j) a(i, j) = a(j, i) = weight(rng);
        }
        components.insert(comp);
        at += sizes[static_cast<std::size_t>(c)];
      }
      // Shuffle label positions so components are not contiguous.
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Eigen::MatrixXd pa(n, n);
      for (int i = 0; i < n; ++i) {
        labels.push_back("n" + std::to_string(100 + perm[static_cast<std::size_t>(i)]));
        for (int j = 0; j < n; ++j) pa(i, j) = a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
      }
      const SimilarityMatrix s(labels, pa);
      const auto lap = normalized_laplacian(s);
      const auto spectrum = eig_smallest(lap.laplacian, n);
      int zeros = 0;
      for (int i = 0; i < n; ++i) zeros += std::abs(spectrum.eigenvalues(i)) <= 1e-9;
      const std::vector<double> lambda(spectrum.eigenvalues.data(), spectrum.eigenvalues.data() + n);
      const auto guesses = spectral_gap_guesses(lambda, 3, static_cast<std::size_t>(n));
      const auto partition = ncut_partition(s, m, AnalysisConfig{});
      const bool good = zeros == m && !guesses.empty() && guesses[0] == m &&
                        oracle::as_sets(partition.clusters()) == components;
      if (!good) {
        ok = false;
        detail += " m=" + std::to_string(m) + " trial " + std::to_string(trial) + ": zeros=" + std::to_string(zeros) +
                  " theta1=" + (guesses.empty() ? std::string("none") : std::to_string(guesses[0]));
      }
    }
  }
  return {ok, ok ? "15 affinity matrices, m in {2,3,4}: multiplicity, theta_1 and components exact" : detail};
}

Outcome numeric_residuals() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  double worst_eig = 0.0;
  double worst_svd = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 40);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    }
    a = (0.5 * (a + a.transpose())).eval();
    const auto s = eig_smallest(a, n);
    for (int c = 0; c < n; ++c) {
      worst_eig = std::max(worst_eig, (a * s.eigenvectors.col(c) - s.eigenvalues(c) * s.eigenvectors.col(c)).norm());
    }
  }
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 1 + static_cast<int>(rng() % 40);
    const int c = 1 + static_cast<int>(rng() % 40);
    Eigen::MatrixXd a(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) a(i, j) = g(rng);
    }
    const int m = std::min(r, c);
    const auto s = svd_largest(a, m);
    for (int k = 0; k < m; ++k) {
      worst_svd = std::max(worst_svd, (a * s.right.col(k) - s.values(k) * s.left.col(k)).norm());
      worst_svd = std::max(worst_svd, (a.transpose() * s.left.col(k) - s.values(k) * s.right.col(k)).norm());
    }
  }
  return {worst_eig <= 1e-7 && worst_svd <= 1e-7,
          "max eigen residual " + num(worst_eig) + ", max singular residual " + num(worst_svd)};
}

Outcome jaccard_properties() {
  std::mt19937_64 rng(11);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::set<int> a, b;
    const int universe = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < static_cast<int>(rng() % 12); ++i) a.insert(static_cast<int>(rng() % universe));
    if (trial % 5 == 0) {
      b = a;
    } else {
      for (int i = 0; i < static_cast<int>(rng() % 12); ++i) b.insert(static_cast<int>(rng() % universe));
    }
    const std::vector<int> va(a.begin(), a.end()), vb(b.begin(), b.end());
    const double ab = jaccard(va, vb);
    const double ba = jaccard(vb, va);
    std::vector<int> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    const bool ok = ab == ba && ab >= 0.0 && ab <= 1.0 && (ab == 1.0) == (a == b && !a.empty()) &&
                    (!both.empty() || ab == 0.0) && ab == oracle::jaccard(a, b);
    failures += !ok;
  }
  const std::vector<int> empty;
  failures += jaccard(empty, empty) != 0.0;
  return {failures == 0, "1000 random pairs, " + std::to_string(failures) + " violations"};
}

Outcome ranking_law() {
  std::mt19937_64 rng(13);
  const std::vector<FunctionId> pool{"a", "b", "c", "d", "e", "f", "g"};
  int inversions = 0;
  int collapse_errors = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CommitRecord> commits;
    for (int k = 0; k < 6; ++k) {
      CommitRecord rec{"k" + std::to_string(k), k, {}, {}, {}};
      for (const auto& f : pool) {
        if (rng() % 2) rec.touched_functions.push_back(f);
      }
      commits.push_back(rec);
    }
    const ChangeHistory history(commits);
    std::vector<ClusterCandidate> multiset;
    std::map<std::set<FunctionId>, int> count;
    const int size = static_cast<int>(rng() % 15);
    for (int i = 0; i < size; ++i) {
      std::set<FunctionId> members{pool[rng() % pool.size()]};
      for (const auto& f : pool) {
        if (rng() % 4 == 0) members.insert(f);
      }
      std::vector<FunctionId> v(members.begin(), members.end());
      std::shuffle(v.begin(), v.end(), rng);
      multiset.push_back({v, {}, 2});
      ++count[members];
    }
    const auto ranked = rank_recommendations(RecommendationKind::Split, multiset, history);
    collapse_errors += ranked.size() != count.size();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      const std::set<FunctionId> key(ranked[i].target_members.begin(), ranked[i].target_members.end());
      collapse_errors += ranked[i].multiplicity != count[key];
      if (i + 1 == ranked.size()) continue;
      const auto& x = ranked[i];
      const auto& y = ranked[i + 1];
      const bool ordered = x.multiplicity > y.multiplicity ||
                           (x.multiplicity == y.multiplicity &&
                            (x.avg_change_freq > y.avg_change_freq ||
                             (x.avg_change_freq == y.avg_change_freq && x.all_members() < y.all_members())));
      inversions += !ordered;
    }
  }
  return {inversions == 0 && collapse_errors == 0, "200 multisets, " + std::to_string(inversions) + " inversions, " +
                                                       std::to_string(collapse_errors) + " collapse errors"};
}

Outcome diff_attribution() {
  const std::string dir = UNRAVEL_TEST_DATA "/attribution/";
  std::ifstream log(dir + "log.diff"), span_doc(dir + "spans.json"), expected_doc(dir + "expected.json");
  const auto parsed = parse_git_log_stream(log);
  const auto spans = load_spans(span_doc);
  const auto expected = nlohmann::json::parse(expected_doc);
  std::size_t hunks = 0;
  int mismatches = 0;
  for (const auto& c : parsed) {
    hunks += c.hunks.size();
    const auto got = attribute_hunks_to_functions(c.hunks, spans, c.id);
    const auto& want = expected["commits"][c.id];
    mismatches += got.functions != want["functions"].get<std::set<std::string>>();
    mismatches += got.fallback_files != want["fallback_files"].get<std::set<std::string>>();
  }
  const bool ok = hunks == expected["hunk_count"].get<std::size_t>() && parsed.size() == expected["commits"].size() &&
                  mismatches == 0;
  return {ok, std::to_string(hunks) + " hunks, " + std::to_string(mismatches) + " mismatched touch sets"};
}

std::string run_cli_capture(const std::vector<std::string>& args) {
  std::istringstream in;
  std::ostringstream out, err;
  if (run_cli(args, in, out, err) != 0) return "exit error: " + err.str();
  return out.str();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome end_to_end_determinism() {
  const std::string dir = UNRAVEL_TEST_DATA "/fixture/";
  int mismatches = 0;
  for (const std::string kind : {"split", "redraw"}) {
    const auto golden = slurp(dir + "golden_" + kind + ".json");
    for (const std::string threads : {"1", "1", "4", "8"}) {
      mismatches += run_cli_capture({kind, dir + "facts.json", dir + "changes.json", "src/app/Utils.java", "--format",
                                     "json", "--threads", threads}) != golden;
    }
  }
  return {mismatches == 0, "8 runs (split/redraw x threads 1,1,4,8), " + std::to_string(mismatches) +
                               " differ from the golden reports"};
}

Outcome detector_ordering() {
  std::vector<FileActivityStats> stats{{FileRef{"A.java"}, 243, 271, 0, 0},
                                       {FileRef{"B.java"}, 300, 5, 0, 0},
                                       {FileRef{"C.java"}, 4, 400, 0, 0}};
  assign_activity_ranks(stats);
  const auto ranked = detect_large_active(stats, 10);
  const bool ranks = stats[0].fanin_rank == 2 && stats[0].change_rank == 2 && stats[1].fanin_rank == 1 &&
                     stats[1].change_rank == 3 && stats[2].fanin_rank == 3 && stats[2].change_rank == 1;
  std::string order;
  for (const auto& s : ranked) order += (order.empty() ? "" : ",") + s.file.path;
  return {ranks && order == "A.java,B.java,C.java", "order " + order};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"planted split recovery (4x5, seed 42)", planted_split_recovery},
      {"planted split recovery under noise 0.05, seeds 1..10", planted_split_under_noise},
      {"planted redraw recovery (3 groups)", planted_redraw_recovery},
      {"spectral correctness on disconnected components", spectral_components},
      {"eigen and singular residuals", numeric_residuals},
      {"jaccard properties", jaccard_properties},
      {"ranking law", ranking_law},
      {"diff attribution fixture", diff_attribution},
      {"end-to-end determinism", end_to_end_determinism},
      {"large-active detector ordering", detector_ordering},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2zu  %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
