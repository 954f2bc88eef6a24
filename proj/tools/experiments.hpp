#pragma once

// Experiment runners shared by the CLI and the acceptance binary. Each one
// returns a JSON section and appends the invariants it saw fail.

#include "scenario.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace levylab::cli {

struct Context {
    const Scenario& scenario;
    LevyMeasure measure;
    DriftField drift;
    CutoffScheme scheme;
    Vector x0;
    std::uint64_t seed = 0;  // scenario seed; experiments derive their own from it
    int jobs = 1;
    std::vector<std::string> failures;
    // classifications shared between experiments of one scenario
    std::map<std::string, IndexClass> indices;
    std::optional<bool> wide_cone;

    Context(const Scenario& s, std::uint64_t scenario_seed, int jobs);
    void fail(const std::string& kind, const std::string& what) { failures.push_back(kind + ": " + what); }
};

/// Index classification by name: "rho_<r>" or "theta" (cached in ctx).
IndexClass index_class(Context& ctx, const std::string& name);

Json run_experiment(Context& ctx, const std::string& kind);

/// seed = derive_seed(run_seed, id); the report carries "generated_at", which
/// is the only field that differs between identical runs.
struct ScenarioResult {
    Json report;
    std::vector<std::string> failures;
};

ScenarioResult run_scenario(const Scenario& s, std::uint64_t run_seed, int jobs);

/// Report without "generated_at", for determinism checks.
Json strip_timestamp(Json report);

/// One CSV per table of a report: (file stem suffix, contents).
std::vector<std::pair<std::string, std::string>> report_tables(const Json& report);

}  // namespace levylab::cli
