// Command-line front end: dataset generation, training, evaluation, and the
// synthetic-benchmark reproduction grids. All behavior is driven by the flat
// key-value config; --set flags override file keys.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asac/checkpoint.hpp"
#include "asac/config.hpp"
#include "asac/csv.hpp"
#include "asac/experiment.hpp"

namespace {

constexpr const char* kOutputDirEnv = "ASAC_OUTPUT_DIR";

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string output_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
    auto* opt = cmd->add_option("--config,-c", args.config_path, "flat key-value config file");
    if (config_required) opt->required();
    cmd->add_option("--set,-s", args.sets, "override a config key, e.g. --set training.lambda=0.1")
        ->expected(-1);
    cmd->add_option("--output,-o", args.output_dir,
                    "output directory (default: $" + std::string(kOutputDirEnv) + ")");
}

asac::KeyValues overrides_from(const CommonArgs& args) {
    asac::KeyValues kv;
    for (const std::string& s : args.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw asac::ConfigError("--set expects key=value, got '" + s + "'");
        kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
    return kv;
}

asac::KeyValues load_config(const CommonArgs& args) {
    asac::KeyValues kv;
    if (!args.config_path.empty()) kv = asac::KeyValues::parse_file(args.config_path);
    kv.merge(overrides_from(args));
    return kv;
}

std::string resolve_output_dir(const CommonArgs& args, const std::string& fallback) {
    if (!args.output_dir.empty()) return args.output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return fallback;
}

int cmd_generate(const CommonArgs& args) {
    asac::KeyValues kv = load_config(args);
    std::string out = kv.get_string("output.csv", "");
    asac::ExperimentConfig cfg = asac::experiment_from_config(kv);
    if (!cfg.synthetic()) throw asac::ConfigError("generate: data.source must be synthetic");
    if (out.empty()) {
        std::string dir = resolve_output_dir(args, ".");
        std::filesystem::create_directories(dir);
        out = dir + "/dataset.csv";
    }
    auto data = asac::build_dataset(cfg);
    asac::export_csv(out, data);
    std::cout << "wrote " << data.size() << " episodes to " << out << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    asac::KeyValues kv = load_config(args);
    std::string outdir = resolve_output_dir(args, "asac_run");
    kv.set("output.dir", outdir);
    asac::ExperimentConfig cfg = asac::experiment_from_config(kv);
    asac::Report report = asac::run_experiment(cfg);
    std::cout << "run complete in " << report.wall_seconds << " s\n";
    for (const auto& [name, v] : report.metric_mean)
        std::cout << "  " << name << " = " << v << " (std " << report.metric_std.at(name) << ")\n";
    std::cout << "artifacts in " << outdir << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& selector_path, const std::string& predictor_path) {
    asac::KeyValues kv = load_config(args);
    asac::ExperimentConfig cfg = asac::experiment_from_config(kv);
    asac::SelectorModel selector = asac::load_selector(selector_path);
    asac::PredictorModel predictor = asac::load_predictor(predictor_path);

    auto data = asac::build_dataset(cfg);
    asac::CostModel cm = asac::make_cost_model(cfg, data.front().dim());
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto trajs = asac::evaluation_rollouts(selector, predictor, data, idx, cm, cfg, 0);

    auto metrics = asac::compute_metrics(trajs, predictor.task, cfg.metrics);
    auto rates = asac::measurement_rates(trajs);

    std::string outdir = resolve_output_dir(args, "");
    nlohmann::json doc;
    doc["metrics"] = metrics;
    doc["measurement_rates"] = rates;
    doc["config"] = cfg.config_echo;
    if (!outdir.empty()) {
        std::filesystem::create_directories(outdir);
        std::ofstream out(outdir + "/report.json");
        out << doc.dump(2) << '\n';
        std::ofstream rc(outdir + "/rates.csv");
        rc << "feature,rate\n";
        for (std::size_t i = 0; i < rates.size(); ++i)
            rc << 'x' << (i + 1) << ',' << asac::fmt_double(rates[i]) << '\n';
    }
    std::cout << doc.dump(2) << "\n";
    return 0;
}

int cmd_reproduce(const CommonArgs& args, const std::string& table, std::uint64_t seed) {
    asac::KeyValues overrides = load_config(args);
    std::string outdir = resolve_output_dir(args, "asac_" + table);
    if (table == "table1") {
        auto result = asac::reproduce_table1(seed, outdir, &overrides);
        std::cout << "table1: " << result.costs.size() << " cost levels, rates in " << outdir
                  << "/rates.csv\n";
    } else if (table == "table2") {
        auto result = asac::reproduce_table2(seed, outdir, &overrides);
        std::cout << "table2: " << result.cells.size() << " grid cells, rates in " << outdir
                  << "/rates.csv\n";
    } else if (table == "table3") {
        auto result = asac::reproduce_table3(seed, outdir, &overrides);
        std::cout << "table3: " << result.cells.size() << " eta levels, rates in " << outdir
                  << "/rates.csv\n";
    } else {
        throw asac::ConfigError("reproduce: unknown table '" + table + "' (expected table1|table2|table3)");
    }
    return 0;
}

int cmd_report(const std::string& report_path) {
    std::ifstream in(report_path);
    if (!in) throw asac::Error("report: cannot open '" + report_path + "'");
    nlohmann::json doc;
    in >> doc;
    std::cout << "seed: " << doc.value("seed", 0) << "\n";
    if (doc.contains("metrics"))
        for (const auto& [name, v] : doc["metrics"].items()) {
            if (v.is_object())
                std::cout << name << ": " << v.value("mean", 0.0) << " (std " << v.value("std", 0.0) << ")\n";
            else
                std::cout << name << ": " << v.get<double>() << "\n";
        }
    if (doc.contains("measurement_rates") && doc["measurement_rates"].contains("test")) {
        std::cout << "test measurement rates:";
        for (const auto& r : doc["measurement_rates"]["test"]) std::cout << ' ' << r.get<double>();
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ASAC: joint selector/predictor training for cost-aware active sensing"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, repro_args;
    std::string selector_path, predictor_path, table, report_path;
    std::uint64_t seed = 0;

    CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset as CSV");
    add_common(generate, gen_args, true);

    CLI::App* train = app.add_subcommand("train", "train a selector/predictor pair and report metrics");
    add_common(train, train_args, true);

    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate saved checkpoints on a dataset");
    add_common(evaluate, eval_args, true);
    evaluate->add_option("--selector", selector_path, "selector checkpoint")->required();
    evaluate->add_option("--predictor", predictor_path, "predictor checkpoint")->required();

    CLI::App* reproduce = app.add_subcommand("reproduce", "rerun a synthetic benchmark table grid");
    reproduce->add_option("table", table, "table1 | table2 | table3")->required();
    reproduce->add_option("--seed", seed, "run seed")->required();
    add_common(reproduce, repro_args, false);

    CLI::App* report = app.add_subcommand("report", "summarize a report.json");
    report->add_option("path", report_path, "path to report.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(gen_args);
        if (train->parsed()) return cmd_train(train_args);
        if (evaluate->parsed()) return cmd_evaluate(eval_args, selector_path, predictor_path);
        if (reproduce->parsed()) return cmd_reproduce(repro_args, table, seed);
        if (report->parsed()) return cmd_report(report_path);
    } catch (const asac::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
