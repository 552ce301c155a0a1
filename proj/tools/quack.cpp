// quack: quantum-kernel Gaussian process forecasting experiments.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "quack/config.hpp"
#include "quack/error.hpp"
#include "quack/experiment.hpp"

namespace fs = std::filesystem;
namespace ex = quack::experiment;
using quack::config::ExperimentConfig;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string kernel;
    std::optional<std::uint64_t> seed_data;
    std::optional<std::uint64_t> seed_bo;
    std::string out;
    bool matern_all = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_kernel) {
    cmd->add_option("--config", f.config_path, "key = value configuration file");
    if (with_kernel) cmd->add_option("--kernel", f.kernel, "iqp | rbf | matern | rq | periodic");
    cmd->add_option("--seed-data", f.seed_data, "seed of the synthetic series noise");
    cmd->add_option("--seed-bo", f.seed_bo, "seed of the tuner's Sobol designs");
    cmd->add_option("--out", f.out, "output directory");
}

// defaults < config file < QUACK_* environment < command-line flags
ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) quack::config::apply_file(cfg, f.config_path);
    quack::config::apply_env(cfg);
    if (!f.kernel.empty()) cfg.kernel = quack::kernels::parse_kind(f.kernel);
    if (f.seed_data) cfg.gen.seed = *f.seed_data;
    if (f.seed_bo) cfg.seed_bo = *f.seed_bo;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.matern_all) cfg.matern_all = true;
    cfg.validate();
    return cfg;
}

void cmd_generate(const ExperimentConfig& cfg) {
    const auto series = ex::prepare_series(cfg);
    const fs::path out = cfg.out_dir;
    ex::write_text(out / "series.csv", ex::series_csv(series));
    ex::write_text(out / "series_stats.json", ex::series_stats_json(cfg, series).dump(2) + "\n");
    std::cout << "wrote " << series.size() << " steps to " << (out / "series.csv").string() << '\n';
}

void cmd_tune(const ExperimentConfig& cfg) {
    const auto series = ex::prepare_series(cfg);
    const auto split = ex::prepare_split(cfg, series);
    const auto base = ex::base_model(cfg, cfg.kernel);
    const fs::path out = cfg.out_dir;
    const auto res = ex::tune_kernel(cfg, base, split.train, out / ("trace_" + base.label() + ".jsonl"));
    ex::write_text(out / ("tuned_" + base.label() + ".json"),
                   ex::tuned_json(base, res.best, res.trace.best_value).dump(2) + "\n");
    std::cout << base.label() << ": best MLL " << ex::format_double(res.trace.best_value) << " after "
              << res.trace.trials.size() << " evaluations\n";
}

void cmd_predict(const ExperimentConfig& cfg) {
    const auto series = ex::prepare_series(cfg);
    const auto split = ex::prepare_split(cfg, series);
    const auto label = ex::base_model(cfg, cfg.kernel).label();
    const fs::path out = cfg.out_dir;
    const fs::path tuned = out / ("tuned_" + label + ".json");
    std::ifstream in(tuned);
    if (!in) throw quack::ConfigError("no tuned model at " + tuned.string() + "; run `quack tune` first");
    const auto doc = nlohmann::ordered_json::parse(in);

    ex::RunRecord rec;
    rec.label = label;
    rec.hp = ex::hyperparams_from_json(cfg, doc);
    rec.prediction = ex::predict_test(rec.hp, split);
    rec.evaluation = ex::evaluate(rec.prediction.points);
    ex::write_text(out / ("predictions_" + label + ".csv"), ex::predictions_csv(rec.prediction.points));
    ex::write_text(out / ("run_" + label + ".json"), ex::run_record_json(cfg, rec).dump(2) + "\n");
    std::cout << label << ": " << rec.prediction.points.size() << " test points, MAE "
              << ex::format_double(rec.evaluation.mae) << ", LL " << ex::format_double(rec.evaluation.ll_total) << '\n';
}

void cmd_compare(const ExperimentConfig& cfg) {
    const auto rows = ex::compare(cfg, fs::path(cfg.out_dir));
    std::cout << ex::comparison_csv(rows);
}

void cmd_landscape(const ExperimentConfig& cfg) {
    double alpha = cfg.landscape_alpha;
    const fs::path out = cfg.out_dir;
    if (alpha < 0.0) {
        const fs::path tuned = out / "tuned_iqp.json";
        std::ifstream in(tuned);
        if (!in)
            throw quack::ConfigError("set landscape_alpha or run `quack tune --kernel iqp` first (" + tuned.string() + ")");
        alpha = nlohmann::ordered_json::parse(in).at("theta").at("alpha").get<double>();
    }
    const auto series = ex::prepare_series(cfg);
    const auto pts = ex::landscape(series, cfg.window, alpha, cfg.landscape_points, cfg.qubit_ceiling);
    ex::write_text(out / "landscape.csv", ex::landscape_csv(pts));
    std::cout << "wrote " << pts.size() << " landscape points (alpha " << ex::format_double(alpha) << ")\n";
}

void cmd_ablate(const ExperimentConfig& cfg) {
    const auto rows = ex::ablate(cfg, fs::path(cfg.out_dir));
    for (const auto& r : rows) {
        std::cout << "qubits " << r.qubits << ": ";
        if (r.evaluation) {
            std::cout << "LL " << ex::format_double(r.evaluation->ll_total) << ", MAE "
                      << ex::format_double(r.evaluation->mae) << '\n';
        } else {
            std::cout << "failed: " << r.error << '\n';
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum-kernel Gaussian process forecasting"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto* gen = app.add_subcommand("generate", "write the standardized synthetic series");
    auto* tune = app.add_subcommand("tune", "tune one kernel's hyperparameters by Bayesian optimization");
    auto* predict = app.add_subcommand("predict", "forecast the test range with a tuned kernel");
    auto* compare = app.add_subcommand("compare", "tune, predict and score all five kernels");
    auto* land = app.add_subcommand("landscape", "fidelity of grid points against the origin");
    auto* ablate = app.add_subcommand("ablate", "retune and score the IQP model across qubit counts");
    add_common(gen, flags, false);
    add_common(tune, flags, true);
    add_common(predict, flags, true);
    add_common(compare, flags, false);
    compare->add_flag("--matern-all", flags.matern_all, "run Matern with nu = 1/2, 3/2, 5/2 and keep the best");
    add_common(land, flags, false);
    add_common(ablate, flags, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const auto cfg = resolve(flags);
        if (gen->parsed()) cmd_generate(cfg);
        else if (tune->parsed()) cmd_tune(cfg);
        else if (predict->parsed()) cmd_predict(cfg);
        else if (compare->parsed()) cmd_compare(cfg);
        else if (land->parsed()) cmd_landscape(cfg);
        else if (ablate->parsed()) cmd_ablate(cfg);
    } catch (const quack::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed JSON: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
