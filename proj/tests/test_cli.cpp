#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "quack_cli_test";

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(QUACK_CLI) + " " + args + " >" +
                            (kWork / "stdout.txt").string() + " 2>" + (kWork / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t data_rows(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n == 0 ? 0 : n - 1;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        write(kWork / "fast.cfg", "n_init = 5\nn_query = 3\nrestarts = 2\n");
    }
    void TearDown() override { fs::remove_all(kWork); }
    std::string out(const std::string& name) const { return (kWork / name).string(); }
};

}  // namespace

TEST_F(Cli, GenerateDefaultAndAblationLengths) {
    ASSERT_EQ(run("generate --out " + out("g1")), 0);
    EXPECT_EQ(data_rows(kWork / "g1" / "series.csv"), 240u);
    const auto stats = nlohmann::json::parse(slurp(kWork / "g1" / "series_stats.json"));
    EXPECT_GT(stats.at("sd").get<double>(), 0.0);

    write(kWork / "ablation.cfg", "n_steps = 480\n");
    ASSERT_EQ(run("generate --config " + out("ablation.cfg") + " --out " + out("g2")), 0);
    EXPECT_EQ(data_rows(kWork / "g2" / "series.csv"), 480u);
}

TEST_F(Cli, GenerateIsByteIdenticalPerSeed) {
    ASSERT_EQ(run("generate --seed-data 7 --out " + out("a")), 0);
    ASSERT_EQ(run("generate --seed-data 7 --out " + out("b")), 0);
    ASSERT_EQ(run("generate --seed-data 8 --out " + out("c")), 0);
    EXPECT_EQ(slurp(kWork / "a" / "series.csv"), slurp(kWork / "b" / "series.csv"));
    EXPECT_NE(slurp(kWork / "a" / "series.csv"), slurp(kWork / "c" / "series.csv"));
}

TEST_F(Cli, EnvironmentOverridesConfigAndFlagsOverrideEnvironment) {
    write(kWork / "long.cfg", "n_steps = 300\n");
    ASSERT_EQ(run("generate --config " + out("long.cfg") + " --out " + out("e1"), "QUACK_N_STEPS=120"), 0);
    EXPECT_EQ(data_rows(kWork / "e1" / "series.csv"), 120u);
    ASSERT_EQ(run("generate --seed-data 3 --out " + out("e2"), "QUACK_SEED_DATA=4"), 0);
    ASSERT_EQ(run("generate --seed-data 3 --out " + out("e3")), 0);
    EXPECT_EQ(slurp(kWork / "e2" / "series.csv"), slurp(kWork / "e3" / "series.csv"));
}

TEST_F(Cli, TunePredictLandscape) {
    const std::string common = " --config " + out("fast.cfg") + " --out " + out("run");
    ASSERT_EQ(run("tune --kernel iqp" + common), 0) << slurp(kWork / "stderr.txt");
    const auto tuned = nlohmann::json::parse(slurp(kWork / "run" / "tuned_iqp.json"));
    const double alpha = tuned.at("theta").at("alpha").get<double>();
    EXPECT_GE(alpha, 0.0);
    EXPECT_LE(alpha, 1.0);
    std::ifstream trace(kWork / "run" / "trace_iqp.jsonl");
    std::string line;
    std::size_t trials = 0;
    while (std::getline(trace, line)) ++trials;
    EXPECT_EQ(trials, 8u);

    ASSERT_EQ(run("predict --kernel iqp" + common), 0) << slurp(kWork / "stderr.txt");
    EXPECT_EQ(data_rows(kWork / "run" / "predictions_iqp.csv"), 60u);
    const auto rec = nlohmann::json::parse(slurp(kWork / "run" / "run_iqp.json"));
    EXPECT_EQ(rec.at("posteriors").size(), 60u);

    ASSERT_EQ(run("landscape" + common), 0) << slurp(kWork / "stderr.txt");
    EXPECT_EQ(data_rows(kWork / "run" / "landscape.csv"), 61u * 61u);
}

TEST_F(Cli, CompareWritesTable) {
    ASSERT_EQ(run("compare --matern-all --config " + out("fast.cfg") + " --out " + out("cmp")), 0)
        << slurp(kWork / "stderr.txt");
    EXPECT_EQ(data_rows(kWork / "cmp" / "comparison.csv"), 5u);
    EXPECT_EQ(data_rows(kWork / "cmp" / "comparison_flags.csv"), 5u);
    for (const char* label : {"matern12", "matern32", "matern52"}) EXPECT_TRUE(fs::exists(kWork / "cmp" / ("tuned_" + std::string(label) + ".json")));
}

TEST_F(Cli, AblateSubset) {
    write(kWork / "abl.cfg", "n_init = 4\nn_query = 2\nrestarts = 2\nablation_qubits = 5, 6\nablation_steps = 200\n");
    ASSERT_EQ(run("ablate --config " + out("abl.cfg") + " --out " + out("abl")), 0) << slurp(kWork / "stderr.txt");
    EXPECT_EQ(data_rows(kWork / "abl" / "ablation.csv"), 2u);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("tune --kernel spectral --out " + out("x")), 2);
    EXPECT_EQ(run("generate --config " + out("missing.cfg")), 2);
    write(kWork / "bad.cfg", "colour = blue\n");
    EXPECT_EQ(run("generate --config " + out("bad.cfg")), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run(""), 2);
    write(kWork / "bad.csv", "1\n2\nabc\n");
    write(kWork / "csv.cfg", "series_csv = " + out("bad.csv") + "\n");
    EXPECT_EQ(run("generate --config " + out("csv.cfg") + " --out " + out("y")), 3);
    EXPECT_NE(slurp(kWork / "stderr.txt").find("bad.csv:3"), std::string::npos);
    EXPECT_EQ(run("predict --kernel rbf --out " + out("empty")), 2);
    write(kWork / "qubits.cfg", "window = 6\nqubit_ceiling = 5\nlandscape_alpha = 0.3\n");
    EXPECT_EQ(run("landscape --config " + out("qubits.cfg") + " --out " + out("z")), 2);
    EXPECT_EQ(run("--help"), 0);
}
