// levylab run --config <path> --out <dir> [--seed <u64>] [--format csv|json] [--jobs <n>]
// levylab list
// levylab describe <scenario-id>
//
// Exit codes: 0 success, 2 config error, 3 experiment failure, 4 I/O.

#include "experiments.hpp"

#include "levylab/parallel.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace levylab;
using namespace levylab::cli;

namespace {

constexpr int kOk = 0, kConfig = 2, kExperiment = 3, kIo = 4;

Json manifest_entry(const Scenario& s) {
    return {{"id", s.id}, {"description", s.description}, {"experiments", s.experiments}};
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed for " + path.string());
}

Json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path);
    try {
        return Json::parse(is);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

int run(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
        const std::string& format, int jobs) {
    RunConfig cfg = parse_config(read_json(config_path));
    if (seed) cfg.seed = *seed;

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

    const std::size_t n = cfg.scenarios.size();
    std::vector<ScenarioResult> results(n);
    std::vector<std::string> config_errors(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        try {
            results[i] = run_scenario(cfg.scenarios[i], cfg.seed, 1);
        } catch (const ConfigError& e) {
            config_errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        if (!config_errors[i].empty()) throw ConfigError(cfg.scenarios[i].id + ": " + config_errors[i]);

    Json manifest = {{"schema_version", kSchemaVersion}, {"seed", cfg.seed}, {"reports", Json::array()}};
    bool failed = false;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& id = cfg.scenarios[i].id;
        const auto& report = results[i].report;
        Json entry = {{"id", id}, {"status", report.at("status")}, {"files", Json::array()}};
        write_file(fs::path(out_dir) / (id + ".json"), report.dump(2) + "\n");
        entry["files"].push_back(id + ".json");
        if (format == "csv") {
            for (const auto& [suffix, text] : report_tables(report)) {
                const auto name = id + "_" + suffix + ".csv";
                write_file(fs::path(out_dir) / name, text);
                entry["files"].push_back(name);
            }
        }
        for (const auto& f : results[i].failures) std::cerr << id << ": " << f << "\n";
        failed = failed || !results[i].failures.empty();
        manifest["reports"].push_back(entry);
    }
    write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    return failed ? kExperiment : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Levy-driven SDE regularity experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, format = "json";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    auto* run_cmd = app.add_subcommand("run", "run the scenarios of a config file");
    run_cmd->add_option("--config", config_path, "config JSON")->required();
    run_cmd->add_option("--out", out_dir, "output directory")->required();
    run_cmd->add_option("--seed", seed, "run seed (overrides the config)");
    run_cmd->add_option("--format", format, "csv adds one CSV per table next to the JSON report")
        ->check(CLI::IsMember({"csv", "json"}));
    run_cmd->add_option("--jobs", jobs, "scenarios run in parallel")->check(CLI::PositiveNumber);

    auto* list_cmd = app.add_subcommand("list", "print the builtin scenario manifest");

    std::string id;
    auto* describe_cmd = app.add_subcommand("describe", "print the resolved config of a builtin scenario");
    describe_cmd->add_option("id", id)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*run_cmd) return run(config_path, out_dir, seed, format, jobs);
        if (*list_cmd) {
            Json m = Json::array();
            for (const auto& s : builtin_scenarios()) m.push_back(manifest_entry(s));
            std::cout << m.dump(2) << "\n";
            return kOk;
        }
        if (*describe_cmd) {
            std::cout << to_json(builtin_scenario(id)).dump(2) << "\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const Error& e) {
        std::cerr << "experiment failure: " << e.what() << "\n";
        return kExperiment;
    }
    return kOk;
}
