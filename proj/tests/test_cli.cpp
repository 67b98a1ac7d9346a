#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "unravel/cli.hpp"

namespace unravel {
namespace {

const std::string kData = UNRAVEL_TEST_DATA;
const std::string kFacts = kData + "/fixture/facts.json";
const std::string kChanges = kData + "/fixture/changes.json";
const std::string kTarget = "src/app/Utils.java";

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

TEST(Cli, DetectTableAndJson) {
  const auto table = run({"detect", kFacts, kChanges});
  ASSERT_EQ(table.code, 0) << table.err;
  EXPECT_NE(table.out.find(kTarget), std::string::npos);
  const auto json = run({"detect", kFacts, kChanges, "--format", "json", "--top", "2"});
  ASSERT_EQ(json.code, 0) << json.err;
  const auto doc = nlohmann::json::parse(json.out);
  EXPECT_EQ(doc["command"], "detect");
  ASSERT_EQ(doc["candidates"].size(), 2u);
  EXPECT_EQ(doc["candidates"][0]["file"], kTarget);
  EXPECT_EQ(doc["candidates"][0]["fanin_rank"], 1);
}

TEST(Cli, MissingFileIsInputError) {
  const auto r = run({"detect", kData + "/nope.json", kChanges});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(r.err.rfind("error: kind=io exit=2 message=", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"split", kFacts}).code, 2);
  EXPECT_EQ(run({"split", kFacts, kChanges, kTarget, "--format", "xml"}).code, 2);
  EXPECT_EQ(run({"split", kFacts, kChanges, kTarget, "--qmax", "0"}).code, 2);
}

TEST(Cli, UnknownTargetIsInputError) {
  const auto r = run({"split", kFacts, kChanges, "src/Missing.java"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("kind=argument"), std::string::npos);
}

TEST(Cli, SplitMatchesGoldenReport) {
  const auto r = run({"split", kFacts, kChanges, kTarget, "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, slurp(kData + "/fixture/golden_split.json"));
}

TEST(Cli, RedrawMatchesGoldenReport) {
  const auto r = run({"redraw", kFacts, kChanges, kTarget, "--format", "json", "--threads", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, slurp(kData + "/fixture/golden_redraw.json"));
}

TEST(Cli, QmaxOneRunsASingleClustering) {
  const auto r = run({"split", kFacts, kChanges, kTarget, "--format", "json", "--qmax", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["guesses"].size(), 1u);
  for (const auto& rec : doc["recommendations"]) EXPECT_EQ(rec["multiplicity"], 1);
}

TEST(Cli, TopOneKeepsTheBestCoCluster) {
  const auto r = run({"redraw", kFacts, kChanges, kTarget, "--format", "json", "--top", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  const auto full = nlohmann::json::parse(slurp(kData + "/fixture/golden_redraw.json"));
  ASSERT_EQ(doc["recommendations"].size(), 1u);
  EXPECT_EQ(doc["recommendations"][0], full["recommendations"][0]);
  EXPECT_EQ(doc["total_recommendations"], full["total_recommendations"]);
}

TEST(Cli, ThinHistoryExitsWithAnalysisCode) {
  const std::string one_commit = R"({"commits": [{"id": "c1", "timestamp": 1,
      "touched_functions": ["src/app/Utils.java#formatDate", "src/ui/DateView.java#onBind"],
      "touched_files": ["src/app/Utils.java", "src/ui/DateView.java"]}]})";
  const auto r = run({"redraw", kFacts, "-", kTarget}, one_commit);
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("insufficient history"), std::string::npos);
}

TEST(Cli, MalformedDocumentIsParseError) {
  const auto r = run({"split", "-", kChanges, kTarget}, "{\"functions\": [");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("kind=parse"), std::string::npos);
}

TEST(Cli, MineFromPathAndStdinAgree) {
  const std::string spans = kData + "/attribution/spans.json";
  const auto from_path = run({"mine", kData + "/attribution/log.diff", spans});
  ASSERT_EQ(from_path.code, 0) << from_path.err;
  EXPECT_EQ(from_path.out, slurp(kData + "/attribution/changes.json"));
  const auto from_stdin = run({"mine", "-", spans}, slurp(kData + "/attribution/log.diff"));
  EXPECT_EQ(from_stdin.out, from_path.out);
  const auto doc = nlohmann::json::parse(from_path.out);
  EXPECT_EQ(doc["commits"][0]["fallback_files"], nlohmann::json::array({"src/C.x"}));
}

TEST(Cli, MinedHistoryFeedsAnalyses) {
  const auto r = run({"mine", "-", kData + "/attribution/spans.json"}, "commit x 1\ncommit y oops\n");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST(Cli, EvalSweepTableAndJson) {
  const auto json = run({"eval", "--responsibilities", "3", "--funcs", "3", "--clients", "2", "--commits", "4",
                         "--noise", "0", "--seeds", "1-2", "--format", "json"});
  ASSERT_EQ(json.code, 0) << json.err;
  const auto doc = nlohmann::json::parse(json.out);
  ASSERT_EQ(doc["rows"].size(), 2u);
  for (const auto& row : doc["rows"]) EXPECT_EQ(row["ari"], 1.0);
  const auto table = run({"eval", "--kind", "redraw", "--responsibilities", "3", "--noise", "0", "--seeds", "1"});
  ASSERT_EQ(table.code, 0) << table.err;
  EXPECT_NE(table.out.find("redraw"), std::string::npos);
  EXPECT_EQ(run({"eval", "--seeds", "5-1"}).code, 2);
  EXPECT_EQ(run({"eval", "--noise", "2"}).code, 2);
}

TEST(Cli, VersionFlag) {
  const auto r = run({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("0.1.0"), std::string::npos);
}

}  // namespace
}  // namespace unravel
