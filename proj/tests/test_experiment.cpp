#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "quack/config.hpp"
#include "quack/experiment.hpp"

using namespace quack;
namespace ex = quack::experiment;
namespace fs = std::filesystem;
using config::ExperimentConfig;

namespace {

ExperimentConfig small_budget() {
    ExperimentConfig c;
    c.n_init = 6;
    c.n_query = 4;
    c.restarts = 4;
    return c;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("quack_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Config, DefaultsDescribeReferenceExperiment) {
    const ExperimentConfig c;
    EXPECT_EQ(c.gen.n_steps, 240u);
    EXPECT_EQ(c.window, 5u);
    EXPECT_EQ(c.train_overlap, 2u);
    EXPECT_EQ(c.n_init, 25u);
    EXPECT_EQ(c.n_query, 25u);
    EXPECT_EQ(c.ablation_steps, 480u);
    EXPECT_EQ(c.ablation_overlap, 4u);
    EXPECT_EQ(c.ablation_qubits, (std::vector<std::size_t>{5, 6, 7, 8, 9, 10}));
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesKeyValueText) {
    ExperimentConfig c;
    std::istringstream in(
        "# reference run\n"
        "n_steps = 480   # longer\n"
        "\n"
        "kernel = RBF\n"
        "alpha_upper = 0.8\n"
        "matern_all = true\n"
        "ablation_qubits = 5, 7\n"
        "seed_data=11\n");
    config::apply_text(c, in);
    EXPECT_EQ(c.gen.n_steps, 480u);
    EXPECT_EQ(c.kernel, kernels::Kind::RBF);
    EXPECT_EQ(c.alpha.upper, 0.8);
    EXPECT_TRUE(c.matern_all);
    EXPECT_EQ(c.ablation_qubits, (std::vector<std::size_t>{5, 7}));
    EXPECT_EQ(c.seed_data(), 11u);
}

TEST(Config, ErrorsNameTheLine) {
    ExperimentConfig c;
    std::istringstream unknown("window = 5\nbandwidth = 0.3\n");
    try {
        config::apply_text(c, unknown, "exp.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("exp.cfg:2"), std::string::npos) << e.what();
        EXPECT_EQ(e.exit_code(), 2);
    }
    std::istringstream bad_number("n_init = many\n");
    EXPECT_THROW(config::apply_text(c, bad_number), ConfigError);
    std::istringstream no_equals("window 5\n");
    EXPECT_THROW(config::apply_text(c, no_equals), ConfigError);
    EXPECT_THROW(config::apply_file(c, "/nonexistent/exp.cfg"), ConfigError);
}

TEST(Config, EnvironmentOverrides) {
    ExperimentConfig c;
    ::setenv("QUACK_N_QUERY", "7", 1);
    ::setenv("QUACK_NOISE_UPPER", "0.5", 1);
    config::apply_env(c);
    ::unsetenv("QUACK_N_QUERY");
    ::unsetenv("QUACK_NOISE_UPPER");
    EXPECT_EQ(c.n_query, 7u);
    EXPECT_EQ(c.noise.upper, 0.5);
    ::setenv("QUACK_WINDOW", "-3", 1);
    EXPECT_THROW(config::apply_env(c), ConfigError);
    ::unsetenv("QUACK_WINDOW");
}

TEST(Config, ValidationRejectsBadValues) {
    ExperimentConfig c;
    c.train_overlap = 5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.alpha.upper = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.n_query = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.matern_nu = 2.0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Experiment, IqpThetaLayout) {
    const ExperimentConfig c;
    const auto base = ex::base_model(c, kernels::Kind::IQP);
    const auto space = ex::search_space(c, base);
    ASSERT_EQ(space.size(), 3u);
    EXPECT_EQ(space.dims()[0].name, "alpha");
    EXPECT_EQ(space.dims()[1].name, "noise_var");
    EXPECT_EQ(space.dims()[2].name, "mean");
    Eigen::VectorXd theta(3);
    theta << 0.243, 0.350, 0.503;
    const auto hp = ex::unpack(base, theta);
    EXPECT_EQ(hp.kernel.get("alpha"), 0.243);
    EXPECT_EQ(hp.noise_var, 0.350);
    EXPECT_EQ(hp.mean, 0.503);
    EXPECT_EQ(ex::search_space(c, ex::base_model(c, kernels::Kind::Periodic)).size(), 4u);
}

TEST(Experiment, PredictionBand) {
    const ExperimentConfig c;
    const auto split = ex::prepare_split(c, ex::prepare_series(c));
    const gpr::GprHyperparams hp{0.1, 0.3, kernels::KernelModel::iqp(0.25)};
    const auto r = ex::predict_test(hp, split);
    ASSERT_EQ(r.points.size(), split.test.size());
    for (const auto& p : r.points) {
        EXPECT_NEAR(p.predictive_var, p.latent_var + 0.3, 1e-15);
        EXPECT_NEAR(p.upper95 - p.mean, 1.959964 * std::sqrt(p.predictive_var), 1e-6);
        EXPECT_NEAR(p.upper95 - p.mean, ex::kZ95 * std::sqrt(p.predictive_var), 1e-9);
        EXPECT_NEAR(p.mean - p.lower95, ex::kZ95 * std::sqrt(p.predictive_var), 1e-9);
    }
}

TEST(Experiment, NoiselessSinusoidInsideBand) {
    ExperimentConfig c = small_budget();
    c.gen.slope = 0.0;
    c.gen.sine2.amplitude = 0.0;
    c.gen.noise_sd = 0.0;
    const auto split = ex::prepare_split(c, ex::prepare_series(c));
    const auto rec = ex::run_kernel(c, ex::base_model(c, kernels::Kind::RBF), split);
    for (const auto& p : rec.prediction.points) {
        EXPECT_GE(p.target, p.lower95) << "t=" << p.time;
        EXPECT_LE(p.target, p.upper95) << "t=" << p.time;
    }
}

TEST(Experiment, RunRecordIsRecomputable) {
    const ExperimentConfig c = small_budget();
    const auto dir = scratch("record");
    const auto split = ex::prepare_split(c, ex::prepare_series(c));
    const auto rec = ex::run_kernel(c, ex::base_model(c, kernels::Kind::IQP), split, dir);

    const auto doc = nlohmann::json::parse(slurp(dir / "run_iqp.json"));
    const auto& post = doc.at("posteriors");
    ASSERT_EQ(post.size(), split.test.size());
    std::vector<double> mean, var, target;
    for (const auto& p : post) {
        mean.push_back(p.at("mean").get<double>());
        var.push_back(p.at("predictive_var").get<double>());
        target.push_back(p.at("target").get<double>());
    }
    const auto e = metrics::evaluate(mean, var, target);
    const auto& stored = doc.at("evaluation");
    for (const auto& [key, value] : {std::pair{"smape", e.smape}, {"wape", e.wape}, {"mape", e.mape}, {"rmse", e.rmse},
                                     {"mae", e.mae}, {"mse", e.mse}, {"mcrps", e.mcrps}, {"ll_mean", e.ll_mean},
                                     {"ll_total", e.ll_total}})
        EXPECT_NEAR(stored.at(key).get<double>(), value, 1e-12) << key;

    // trace on disk: one JSON line per trial, Sobol phase first
    std::ifstream trace(dir / "trace_iqp.jsonl");
    std::string line;
    std::size_t n = 0;
    while (std::getline(trace, line)) {
        const auto t = nlohmann::json::parse(line);
        EXPECT_EQ(t.at("phase").get<std::string>(), n < c.n_init ? "sobol" : "query");
        EXPECT_TRUE(t.at("theta").contains("alpha"));
        ++n;
    }
    EXPECT_EQ(n, c.n_init + c.n_query);

    const auto tuned = nlohmann::ordered_json::parse(slurp(dir / "tuned_iqp.json"));
    const auto hp = ex::hyperparams_from_json(c, tuned);
    EXPECT_EQ(hp.kernel.get("alpha"), rec.hp.kernel.get("alpha"));
    EXPECT_EQ(hp.noise_var, rec.hp.noise_var);
    EXPECT_EQ(hp.mean, rec.hp.mean);
    fs::remove_all(dir);
}

TEST(Experiment, CompareShapeFlagsAndDeterminism) {
    ExperimentConfig c = small_budget();
    const auto a_dir = scratch("compare_a");
    const auto b_dir = scratch("compare_b");
    const auto rows = ex::compare(c, a_dir);
    ex::compare(c, b_dir);
    ASSERT_EQ(rows.size(), 5u);
    const auto flags = ex::rank_flags(rows);
    for (std::size_t col = 0; col < ex::kMetricColumns.size(); ++col) {
        const bool higher = col == 7;
        std::size_t best = rows.size();
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (flags[i][col] == "best") best = i;
        ASSERT_LT(best, rows.size());
        for (const auto& r : rows) {
            if (!r.evaluation) continue;
            if (higher) {
                EXPECT_GE(rows[best].metric(col), r.metric(col));
            } else {
                EXPECT_LE(rows[best].metric(col), r.metric(col));
            }
        }
    }
    std::istringstream table(slurp(a_dir / "comparison.csv"));
    std::string header;
    std::getline(table, header);
    EXPECT_EQ(header, "kernel,smape,wape,mape,rmse,mae,mse,mcrps,ll,error");

    for (const auto& entry : fs::directory_iterator(a_dir)) {
        const auto name = entry.path().filename().string();
        const auto other = b_dir / name;
        ASSERT_TRUE(fs::exists(other)) << name;
        if (name.starts_with("run_")) {
            auto ja = nlohmann::ordered_json::parse(slurp(entry.path()));
            auto jb = nlohmann::ordered_json::parse(slurp(other));
            ja.erase("timings");
            jb.erase("timings");
            EXPECT_EQ(ja.dump(), jb.dump()) << name;
        } else if (name.starts_with("trace_")) {
            std::istringstream sa(slurp(entry.path())), sb(slurp(other));
            std::string la, lb;
            while (std::getline(sa, la) && std::getline(sb, lb)) {
                auto ta = nlohmann::ordered_json::parse(la);
                auto tb = nlohmann::ordered_json::parse(lb);
                ta.erase("elapsed_seconds");
                tb.erase("elapsed_seconds");
                EXPECT_EQ(ta.dump(), tb.dump()) << name;
            }
        } else {
            EXPECT_EQ(slurp(entry.path()), slurp(other)) << name;
        }
    }
    fs::remove_all(a_dir);
    fs::remove_all(b_dir);
}

TEST(Experiment, MaternAllKeepsBestByLikelihood) {
    ExperimentConfig c = small_budget();
    c.matern_all = true;
    const auto rows = ex::compare(c);
    const auto split = ex::prepare_split(c, ex::prepare_series(c));
    double best = -1e300;
    for (auto nu : {kernels::MaternNu::Half, kernels::MaternNu::ThreeHalves, kernels::MaternNu::FiveHalves})
        best = std::max(best, ex::run_kernel(c, ex::base_model(c, kernels::Kind::Matern, nu), split).evaluation.ll_total);
    ASSERT_TRUE(rows[2].evaluation);
    EXPECT_EQ(rows[2].kernel, "matern");
    EXPECT_EQ(rows[2].evaluation->ll_total, best);
}

TEST(Experiment, RankFlagsSkipFailedRows) {
    std::vector<ex::ComparisonRow> rows(3);
    rows[0].kernel = "a";
    rows[1].kernel = "b";
    rows[2].kernel = "c";
    metrics::Evaluation good, worse;
    good.mae = 0.1;
    good.ll_total = -5.0;
    worse.mae = 0.2;
    worse.ll_total = -10.0;
    rows[0].evaluation = worse;
    rows[2].evaluation = good;
    rows[1].error = "failed";
    const auto f = ex::rank_flags(rows);
    EXPECT_EQ(f[2][4], "best");
    EXPECT_EQ(f[0][4], "second");
    EXPECT_EQ(f[1][4], "");
    EXPECT_EQ(f[2][7], "best");
    EXPECT_NE(ex::comparison_csv(rows).find("b,,,,,,,,,failed"), std::string::npos);
}

TEST(Landscape, CentreSymmetryAndDecay) {
    const ExperimentConfig c;
    const auto series = ex::prepare_series(c);
    const std::size_t n = 61;
    const auto pts = ex::landscape(series, 5, 0.25, n);
    ASSERT_EQ(pts.size(), n * n);
    auto at = [&](std::size_t i, std::size_t j) { return pts[i * n + j]; };
    EXPECT_EQ(at(30, 30).x1, 0.0);
    EXPECT_EQ(at(30, 30).x2, 0.0);
    EXPECT_NEAR(at(30, 30).value, 1.0, 1e-12);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(at(i, j).value, at(j, i).value, 1e-10);

    const qkernel::IqpParams p{0.25, 5};
    auto along = [&](double r, int axis) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(5);
        x[axis] = r;
        return qkernel::kernel(Eigen::VectorXd::Zero(5), x, p);
    };
    for (int axis : {0, 1})
        for (double sign : {-1.0, 1.0}) EXPECT_GT(along(0.5 * sign, axis), along(2.0 * sign, axis));

    const auto [lo, hi] = std::minmax_element(series.values.begin(), series.values.end());
    EXPECT_LE(pts.front().x1, *lo);
    EXPECT_GE(pts.back().x1, *hi);
}

TEST(Ablation, RowsPerQubitCount) {
    ExperimentConfig c = small_budget();
    c.ablation_qubits = {5, 6};
    const auto dir = scratch("ablate");
    const auto rows = ex::ablate(c, dir);
    ASSERT_EQ(rows.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(rows[i].qubits, c.ablation_qubits[i]);
        ASSERT_TRUE(rows[i].evaluation) << rows[i].error;
        EXPECT_TRUE(std::isfinite(rows[i].evaluation->ll_total));
        EXPECT_TRUE(std::isfinite(rows[i].evaluation->mae));
        EXPECT_TRUE(fs::exists(dir / ("qubits_" + std::to_string(c.ablation_qubits[i])) / "run_iqp.json"));
    }
    EXPECT_TRUE(fs::exists(dir / "ablation.csv"));
    const auto cfg6 = ex::ablation_config(c, 6);
    EXPECT_EQ(cfg6.window, 6u);
    EXPECT_EQ(cfg6.gen.n_steps, 480u);
    EXPECT_EQ(cfg6.train_overlap, 4u);
    fs::remove_all(dir);
}

TEST(Series, ExportRoundTrips) {
    const ExperimentConfig c;
    const auto s = ex::prepare_series(c);
    std::istringstream in(ex::series_csv(s));
    const auto back = timeseries::parse_csv(in);
    EXPECT_EQ(back.values, s.values);
}
