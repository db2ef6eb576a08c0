#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "eced/cli.hpp"
#include "eced/harness.hpp"

using namespace eced;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(dispatch({}), kExitUsage);
    EXPECT_EQ(dispatch({"frobnicate"}), kExitUsage);
    EXPECT_EQ(dispatch({"run", "--scenario", "three-cause", "--delta", "1.5"}), kExitUsage);
    EXPECT_EQ(dispatch({"run", "--scenario", "three-cause", "--policies", "eced,oracle"}), kExitUsage);
    EXPECT_EQ(dispatch({"run", "--scenario", "three-cause", "--n", "4"}), kExitUsage);
    EXPECT_EQ(dispatch({"run", "--scenario", "three-cause", "--budget", "0"}), kExitUsage);
    EXPECT_EQ(dispatch({"run", "--scenario", "three-cause", "--bogus-flag"}), kExitUsage);
    EXPECT_EQ(dispatch({"run"}), kExitUsage);
    EXPECT_EQ(dispatch({"diag", "--scenario", "random", "--checks", "lemma9"}), kExitUsage);
    EXPECT_EQ(dispatch({"serve"}), kExitUsage);
}

TEST(Cli, HelpForEverySubcommand) {
    for (const char* sub : {"gen", "run", "diag", "serve"}) EXPECT_EQ(dispatch({sub, "--help"}), kExitOk) << sub;
    EXPECT_EQ(dispatch({"--help"}), kExitOk);
}

TEST(Cli, RuntimeErrors) {
    EXPECT_EQ(dispatch({"run", "--instance", "/nonexistent/instance.json"}), kExitRuntime);
    EXPECT_EQ(dispatch({"gen", "--scenario", "random", "--n", "2", "--t", "3"}), kExitRuntime);
}

TEST(Cli, AdversarialRunWritesResults) {
    const auto dir = fresh_dir("eced_cli_adversarial");
    ASSERT_EQ(dispatch({"run", "--scenario", "gbs-adversarial", "--n", "8", "--policies", "eced,gbs", "--delta", "0",
                        "--budget", "8", "--trials", "1000", "--seed", "7", "--out", dir.string()}),
              kExitOk);
    const auto summary = nlohmann::json::parse(read_file(dir / "summary.json"));
    EXPECT_EQ(summary["policies"][0]["policy"], "eced");
    EXPECT_EQ(summary["policies"][0]["mean_cost"], 1.0);
    const auto curves = read_results_csv((dir / "results.csv").string());
    ASSERT_EQ(curves.size(), 2u);
    EXPECT_EQ(curves[0].mean_map_err.size(), 8u);
    std::filesystem::remove_all(dir);
}

TEST(Cli, RepeatRunsAreByteIdentical) {
    const auto a = fresh_dir("eced_cli_det_a");
    const auto b = fresh_dir("eced_cli_det_b");
    const std::vector<std::string> base{"run", "--scenario", "random", "--n", "12", "--t", "3", "--m", "10",
                                        "--noise", "0.1", "--policies", "eced,ig,random", "--trials", "50",
                                        "--seed", "5", "--out"};
    auto args_a = base;
    args_a.push_back(a.string());
    auto args_b = base;
    args_b.push_back(b.string());
    args_b.insert(args_b.end(), {"--parallelism", "2"});
    ASSERT_EQ(dispatch(args_a), kExitOk);
    ASSERT_EQ(dispatch(args_b), kExitOk);
    for (const char* f : {"results.csv", "traces.jsonl", "summary.json"}) {
        EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
        EXPECT_FALSE(read_file(a / f).empty()) << f;
    }
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST(Cli, DiagPropertyRun) {
    EXPECT_EQ(dispatch({"diag", "--scenario", "random", "--n", "10", "--checks", "lemma1,stocmap", "--samples", "1000",
                        "--seed", "3"}),
              kExitOk);
    EXPECT_EQ(dispatch({"diag", "--scenario", "random", "--n", "10", "--checks", "ratio,faux", "--samples", "200"}),
              kExitOk);
}

TEST(Cli, GenThenRunFromInstanceFile) {
    const auto dir = fresh_dir("eced_cli_gen");
    std::filesystem::create_directories(dir);
    const auto path = (dir / "hunt.json").string();
    ASSERT_EQ(dispatch({"gen", "--scenario", "treasure-hunt", "--s", "2", "--out", path}), kExitOk);
    EXPECT_EQ(dispatch({"run", "--instance", path, "--policies", "eced", "--delta", "0", "--trials", "20"}), kExitOk);
    EXPECT_EQ(dispatch({"run", "--instance", path, "--s", "2"}), kExitUsage);

    const auto config = (dir / "config.json").string();
    std::ofstream(config) << R"({"scenario": "three-cause"})";
    EXPECT_EQ(dispatch({"run", "--config", config, "--trials", "10"}), kExitOk);
    std::filesystem::remove_all(dir);
}
