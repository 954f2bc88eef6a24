#pragma once

// Scenario configs: parsing with unknown-key rejection, the builtin
// scenarios, and the objects (measure, drift, cutoff) they resolve to.

#include "levylab/drift.hpp"
#include "levylab/levy_measure.hpp"
#include "levylab/point_measure.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace levylab::cli {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct Budgets {
    std::size_t samples = 100000;   // endpoint samples per t (density, char probe, stationary)
    std::size_t replicas = 1000;    // configurations (admissibility, malliavin)
    int directions = 256;           // direction lattice for indices / wide cone
    int eps_points = 40;
    double step = 1e-3;             // RK4 step
};

struct Scenario {
    std::string id;
    std::string description;
    Json measure;
    Json drift;
    Json cutoff;  // resolved: eps_cut, mode, compensation
    std::vector<double> x0;
    std::vector<double> t_list;
    std::vector<std::string> experiments;
    Budgets budgets;
    Json options = Json::object();  // per experiment kind
    Json expect = Json::object();
};

const std::vector<std::string>& experiment_kinds();

/// Throws ConfigError on a missing or malformed field, an unknown key, or an
/// unresolvable spec. A "builtin" key starts from that scenario and lets the
/// remaining keys replace whole fields; "id" then defaults to the builtin id.
Scenario parse_scenario(const Json& j);

/// Top-level config: {"schema_version": 1, "seed": u64?, "scenarios": [...]}.
struct RunConfig {
    std::uint64_t seed = 1;
    std::vector<Scenario> scenarios;
};

RunConfig parse_config(const Json& j);

Json to_json(const Scenario& s);

std::vector<Scenario> builtin_scenarios();
/// Throws ConfigError for an unknown id.
Scenario builtin_scenario(const std::string& id);

/// Missing optional fields take their defaults.
LevyMeasure make_measure(const Json& spec);
DriftField make_drift(const Json& spec);
CutoffScheme make_scheme(const Scenario& s, const LevyMeasure& measure);
Vector initial_state(const Scenario& s);

/// Exact value of every order index and of the lower index, for measures
/// that have one: w / ln(gamma) for geometric atoms of weight w.
std::optional<double> closed_form_index(const Json& measure_spec);

/// Option `key` of experiment `kind`, or `fallback` when absent.
template <typename T>
T option(const Scenario& s, const std::string& kind, const std::string& key, const T& fallback) {
    if (!s.options.contains(kind) || !s.options[kind].contains(key)) return fallback;
    return s.options[kind][key].get<T>();
}

}  // namespace levylab::cli
