#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace levylab::cli {

namespace {

// Object reader that remembers which keys were read, so leftovers can be
// reported as unknown.
class Obj {
public:
    Obj(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const Json& raw(const std::string& key) {
        if (!has(key)) throw ConfigError(where_ + ": missing '" + key + "'");
        return j_.at(key);
    }

    template <typename T>
    T get(const std::string& key) {
        const Json& v = raw(key);
        try {
            return v.get<T>();
        } catch (const Json::exception&) {
            throw ConfigError(where_ + ": '" + key + "' has the wrong type");
        }
    }

    template <typename T>
    T get(const std::string& key, const T& fallback) {
        return has(key) ? get<T>(key) : fallback;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

double positive(double v, const std::string& what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be positive and finite");
    return v;
}

Json number_or_inf(double v) { return std::isinf(v) ? Json("inf") : Json(v); }

double read_extended(Obj& o, const std::string& key, double fallback) {
    if (!o.has(key)) return fallback;
    const Json& v = o.raw(key);
    if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number or \"inf\"");
    return v.get<double>();
}

// Fills defaults so the report shows exactly what was run.
Json normalize_measure(const Json& j, const std::string& where) {
    Obj o(j, where);
    const auto type = o.get<std::string>("type");
    Json out = {{"type", type}};
    if (type == "zero") {
        out["dim"] = o.get<int>("dim", 1);
    } else if (type == "geometric") {
        out["gamma"] = positive(o.get<double>("gamma"), where + ".gamma");
        if (out["gamma"].get<double>() <= 1.0) throw ConfigError(where + ".gamma must exceed 1");
        out["n_max"] = o.get<int>("n_max", 60);
        out["weight"] = positive(o.get<double>("weight", 1.0), where + ".weight");
    } else if (type == "factorial" || type == "factorial_weighted" || type == "parabola") {
        out["n_max"] = o.get<int>("n_max", 60);
    } else if (type == "atoms") {
        Json atoms = Json::array();
        for (const auto& a : o.raw("atoms")) {
            Obj ao(a, where + ".atoms[]");
            const auto loc = ao.get<std::vector<double>>("location");
            const double w = positive(ao.get<double>("weight"), where + ".atoms[].weight");
            ao.finish();
            atoms.push_back({{"location", loc}, {"weight", w}});
        }
        if (atoms.empty()) throw ConfigError(where + ".atoms is empty");
        out["atoms"] = atoms;
    } else if (type == "stable") {
        out["dim"] = o.get<int>("dim", 1);
        out["alpha"] = o.get<double>("alpha");
        const double alpha = out["alpha"];
        if (!(alpha > 0.0 && alpha < 2.0)) throw ConfigError(where + ".alpha must lie in (0, 2)");
        out["c"] = positive(o.get<double>("c", 1.0), where + ".c");
        out["lambda"] = o.get<double>("lambda", 0.0);
        out["rho_min"] = o.get<double>("rho_min", 0.0);
        out["rho_max"] = number_or_inf(read_extended(o, "rho_max", std::numeric_limits<double>::infinity()));
        const auto ang = o.get<std::string>("angular", out["dim"] == 1 ? "symmetric" : "uniform");
        if (ang != "symmetric" && ang != "one_sided" && ang != "uniform")
            throw ConfigError(where + ".angular must be symmetric, one_sided or uniform");
        if (out["dim"] != 1 && ang != "uniform") throw ConfigError(where + ": only uniform angular law for dim > 1");
        out["angular"] = ang;
        out["directions"] = o.get<int>("directions", 512);
    } else if (type == "mixture") {
        Json comps = Json::array();
        for (const auto& c : o.raw("components")) {
            Obj co(c, where + ".components[]");
            const double w = positive(co.get<double>("weight"), where + ".components[].weight");
            Json m = normalize_measure(co.raw("measure"), where + ".components[].measure");
            co.finish();
            comps.push_back({{"weight", w}, {"measure", m}});
        }
        if (comps.empty()) throw ConfigError(where + ".components is empty");
        out["components"] = comps;
    } else {
        throw ConfigError(where + ": unknown measure type '" + type + "'");
    }
    o.finish();
    return out;
}

Json normalize_drift(const Json& j, const std::string& where) {
    Obj o(j, where);
    const auto type = o.get<std::string>("type");
    Json out = {{"type", type}};
    if (type == "zero" || type == "neg_identity") {
        out["dim"] = o.get<int>("dim", 1);
    } else if (type == "linear") {
        out["matrix"] = o.get<std::vector<std::vector<double>>>("matrix");
    } else if (type == "polynomial") {
        out["coefficients"] = o.get<std::vector<double>>("coefficients");
    } else {
        throw ConfigError(where + ": unknown drift type '" + type + "'");
    }
    o.finish();
    return out;
}

const std::map<std::string, std::set<std::string>>& option_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"indices", {"r_list", "apertures"}},
        {"wide_cone", {"aperture"}},
        {"admissibility", {}},
        {"derivative_check", {"configs"}},
        {"malliavin", {"B", "gamma", "beta"}},
        {"density_sweep", {}},
        {"char_probe", {"n_lo", "n_hi", "process", "direction"}},
        {"stationary", {"burn_in"}},
        {"regime", {"k_list", "r_list", "aperture", "stationary"}},
        {"tv_continuity", {"deltas", "bins"}},
    };
    return keys;
}

const std::set<std::string> kExpectKeys = {"regime", "band", "wide_cone", "index", "char_increasing",
                                           "trend", "stationary_trend", "stationary_mean"};

void apply_fields(Scenario& s, Obj& o) {
    const std::string where = "scenario '" + s.id + "'";
    if (o.has("description")) s.description = o.get<std::string>("description");
    if (o.has("measure")) s.measure = normalize_measure(o.raw("measure"), where + ".measure");
    if (o.has("drift")) s.drift = normalize_drift(o.raw("drift"), where + ".drift");
    if (o.has("cutoff")) s.cutoff = o.raw("cutoff");
    if (o.has("x0")) s.x0 = o.get<std::vector<double>>("x0");
    if (o.has("t_list")) s.t_list = o.get<std::vector<double>>("t_list");
    if (o.has("experiments")) s.experiments = o.get<std::vector<std::string>>("experiments");
    if (o.has("budgets")) {
        Obj b(o.raw("budgets"), where + ".budgets");
        s.budgets.samples = b.get<std::size_t>("samples", s.budgets.samples);
        s.budgets.replicas = b.get<std::size_t>("replicas", s.budgets.replicas);
        s.budgets.directions = b.get<int>("directions", s.budgets.directions);
        s.budgets.eps_points = b.get<int>("eps_points", s.budgets.eps_points);
        s.budgets.step = b.get<double>("step", s.budgets.step);
        b.finish();
    }
    if (o.has("options")) {
        const Json& opts = o.raw("options");
        if (!opts.is_object()) throw ConfigError(where + ".options: expected an object");
        for (const auto& [kind, block] : opts.items()) {
            auto it = option_keys().find(kind);
            if (it == option_keys().end()) throw ConfigError(where + ".options: unknown experiment '" + kind + "'");
            if (!block.is_object()) throw ConfigError(where + ".options." + kind + ": expected an object");
            for (const auto& [k, v] : block.items())
                if (!it->second.count(k)) throw ConfigError(where + ".options." + kind + ": unknown key '" + k + "'");
            s.options[kind] = block;
        }
    }
    if (o.has("expect")) {
        const Json& e = o.raw("expect");
        if (!e.is_object()) throw ConfigError(where + ".expect: expected an object");
        for (const auto& [k, v] : e.items())
            if (!kExpectKeys.count(k)) throw ConfigError(where + ".expect: unknown key '" + k + "'");
        s.expect = e;
    }
}

void resolve(Scenario& s) {
    const std::string where = "scenario '" + s.id + "'";
    if (s.measure.is_null()) throw ConfigError(where + ": missing 'measure'");
    if (s.drift.is_null()) throw ConfigError(where + ": missing 'drift'");
    LevyMeasure measure;
    DriftField drift = DriftField::zero(1);
    try {
        measure = make_measure(s.measure);
        drift = make_drift(s.drift);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
    if (measure.dim() != drift.dim()) throw ConfigError(where + ": measure and drift dimensions differ");
    if (s.x0.empty()) s.x0.assign(static_cast<std::size_t>(measure.dim()), 0.0);
    if (static_cast<int>(s.x0.size()) != measure.dim()) throw ConfigError(where + ": x0 has the wrong dimension");
    if (s.t_list.empty()) s.t_list = {1.0};
    for (double t : s.t_list) positive(t, where + ": every t");
    for (const auto& e : s.experiments) {
        const auto& kinds = experiment_kinds();
        if (std::find(kinds.begin(), kinds.end(), e) == kinds.end())
            throw ConfigError(where + ": unknown experiment '" + e + "'");
    }
    if (s.budgets.samples < 100) throw ConfigError(where + ": budgets.samples must be >= 100");
    positive(s.budgets.step, where + ": budgets.step");

    Json cut = s.cutoff.is_null() ? Json::object() : s.cutoff;
    Obj c(cut, where + ".cutoff");
    Json out;
    try {
        out["eps_cut"] = c.has("eps_cut") ? positive(c.get<double>("eps_cut"), where + ".cutoff.eps_cut")
                                          : default_eps_cut(measure);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(where + ".cutoff: " + e.what());
    }
    out["mode"] = c.get<std::string>("mode", "drop");
    out["compensation"] = c.get<std::string>("compensation", "levy_khintchine");
    c.finish();
    if (out["mode"] != "drop" && out["mode"] != "gaussian_match")
        throw ConfigError(where + ".cutoff.mode must be drop or gaussian_match");
    if (out["compensation"] != "levy_khintchine" && out["compensation"] != "none")
        throw ConfigError(where + ".cutoff.compensation must be levy_khintchine or none");
    s.cutoff = out;
}

Scenario make(std::string id, std::string description, Json measure, Json drift, Json cutoff,
              std::vector<double> t_list, std::vector<std::string> experiments, Json options, Json expect) {
    Scenario s;
    s.id = std::move(id);
    s.description = std::move(description);
    s.measure = normalize_measure(measure, s.id);
    s.drift = normalize_drift(drift, s.id);
    s.cutoff = std::move(cutoff);
    s.t_list = std::move(t_list);
    s.experiments = std::move(experiments);
    s.options = std::move(options);
    s.expect = std::move(expect);
    resolve(s);
    return s;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds = {"indices",      "wide_cone",  "admissibility", "derivative_check",
                                                   "malliavin",    "density_sweep", "char_probe", "stationary",
                                                   "regime",       "tv_continuity"};
    return kinds;
}

Scenario parse_scenario(const Json& j) {
    Obj o(j, "scenario");
    Scenario s;
    if (o.has("builtin")) s = builtin_scenario(o.get<std::string>("builtin"));
    s.id = o.has("builtin") ? o.get<std::string>("id", s.id) : o.get<std::string>("id");
    if (s.id.empty()) throw ConfigError("scenario id is empty");
    apply_fields(s, o);
    o.finish();
    resolve(s);
    return s;
}

RunConfig parse_config(const Json& j) {
    Obj o(j, "config");
    const int version = o.get<int>("schema_version");
    if (version != kSchemaVersion)
        throw ConfigError("schema_version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kSchemaVersion) + ")");
    RunConfig rc;
    rc.seed = o.get<std::uint64_t>("seed", 1);
    const Json& list = o.raw("scenarios");
    if (!list.is_array()) throw ConfigError("config.scenarios: expected an array");
    std::set<std::string> ids;
    for (const auto& sj : list) {
        rc.scenarios.push_back(parse_scenario(sj));
        if (!ids.insert(rc.scenarios.back().id).second)
            throw ConfigError("duplicate scenario id '" + rc.scenarios.back().id + "'");
    }
    o.finish();
    return rc;
}

Json to_json(const Scenario& s) {
    return {{"id", s.id},
            {"description", s.description},
            {"measure", s.measure},
            {"drift", s.drift},
            {"cutoff", s.cutoff},
            {"x0", s.x0},
            {"t_list", s.t_list},
            {"experiments", s.experiments},
            {"budgets",
             {{"samples", s.budgets.samples},
              {"replicas", s.budgets.replicas},
              {"directions", s.budgets.directions},
              {"eps_points", s.budgets.eps_points},
              {"step", s.budgets.step}}},
            {"options", s.options},
            {"expect", s.expect}};
}

std::vector<Scenario> builtin_scenarios() {
    const double e = std::exp(1.0);
    std::vector<Scenario> out;
    out.push_back(make("example-2.1",
                       "parabola atoms (1/k!, 1/k!^2) in R^2: singular Fourier transform of U^1, wide cone fails",
                       {{"type", "parabola"}}, {{"type", "neg_identity"}, {"dim", 2}}, {{"eps_cut", 1e-9}}, {1.0},
                       {"indices", "wide_cone", "char_probe"},
                       {{"indices", {{"r_list", {2}}}},
                        {"char_probe", {{"n_lo", 4}, {"n_hi", 7}, {"process", "noise"}, {"direction", {1.0, 0.0}}}}},
                       {{"wide_cone", false}, {"char_increasing", true}}));
    out.push_back(make("example-2.2", "atoms at e^{-n} with NegIdentity drift: gradual hypoellipticity",
                       {{"type", "geometric"}, {"gamma", e}}, {{"type", "neg_identity"}}, {{"eps_cut", std::exp(-20.5)}},
                       {0.5, 8.0}, {"indices", "wide_cone", "regime", "density_sweep", "admissibility"},
                       {{"indices", {{"r_list", {1, 2}}}}},
                       {{"regime", "III.b"},
                        {"band", {1.0, 6.3279}},
                        {"index", {{"rho_2", "Finite"}, {"theta", "Finite"}}},
                        {"trend", {"unbounded-like", "bounded-like"}}}));
    out.back().budgets.samples = 1000000;
    out.push_back(make("example-2.3", "atoms 1/n! with weight n: singular noise, smooth solution",
                       {{"type", "factorial_weighted"}}, {{"type", "neg_identity"}},
                       {{"eps_cut", 0.999 / 479001600.0}}, {1.0}, {"indices", "regime", "char_probe"},
                       {{"indices", {{"r_list", {1, 2, 4}}}},
                        {"char_probe", {{"n_lo", 4}, {"n_hi", 7}, {"process", "noise"}}}},
                       {{"regime", "III.a"},
                        {"index", {{"rho_1", "Infinite"}, {"rho_2", "Infinite"}, {"rho_4", "Infinite"}}},
                        {"char_increasing", true}}));
    out.push_back(make("stable-alpha", "symmetric 1-stable noise with NegIdentity drift",
                       {{"type", "stable"}, {"alpha", 1.0}}, {{"type", "neg_identity"}}, {{"eps_cut", 1e-2}}, {1.0},
                       {"indices", "wide_cone", "regime"}, {{"indices", {{"r_list", {2}}}}},
                       {{"regime", "III.a"}, {"wide_cone", true}, {"index", {{"rho_2", "Infinite"}}}}));
    out.push_back(make("ou-jump", "Ornstein-Uhlenbeck process driven by a rate-1 Poisson process with unit jumps",
                       {{"type", "atoms"}, {"atoms", {{{"location", {1.0}}, {"weight", 1.0}}}}},
                       {{"type", "neg_identity"}}, {{"eps_cut", 0.5}, {"compensation", "none"}}, {2.0},
                       {"regime", "derivative_check", "stationary", "admissibility"}, Json::object(),
                       {{"regime", "III.c"}, {"stationary_mean", 1.0}}));
    out.back().budgets.samples = 10000;
    out.push_back(make("stationary-smooth", "tempered 1-stable noise with dissipative NegIdentity drift",
                       {{"type", "stable"}, {"alpha", 1.0}, {"lambda", 1.0}}, {{"type", "neg_identity"}},
                       {{"eps_cut", 0.05}}, {1.0}, {"wide_cone", "regime", "stationary", "tv_continuity"},
                       {{"regime", {{"stationary", true}}}},
                       {{"regime", "II"}, {"wide_cone", true}, {"stationary_trend", "bounded-like"}}));
    return out;
}

std::optional<double> closed_form_index(const Json& measure_spec) {
    if (measure_spec.at("type") == "geometric")
        return measure_spec.at("weight").get<double>() / std::log(measure_spec.at("gamma").get<double>());
    return std::nullopt;
}

Scenario builtin_scenario(const std::string& id) {
    for (auto& s : builtin_scenarios())
        if (s.id == id) return s;
    throw ConfigError("unknown builtin scenario '" + id + "'");
}

namespace {

LevyMeasure build_measure(const Json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "zero") return LevyMeasure::zero(j.at("dim"));
    if (type == "geometric")
        return LevyMeasure(AtomicSequence::geometric(j.at("gamma"), j.at("n_max"), j.at("weight")));
    if (type == "factorial") return LevyMeasure(AtomicSequence::factorial(j.at("n_max")));
    if (type == "factorial_weighted") return LevyMeasure(AtomicSequence::factorial_weighted(j.at("n_max")));
    if (type == "parabola") return LevyMeasure(AtomicSequence::parabola(j.at("n_max")));
    if (type == "atoms") {
        std::vector<Atom> atoms;
        for (const auto& a : j.at("atoms")) {
            const auto loc = a.at("location").get<std::vector<double>>();
            Atom atom;
            atom.location = Eigen::Map<const Eigen::VectorXd>(loc.data(), static_cast<Eigen::Index>(loc.size()));
            atom.weight = a.at("weight");
            atoms.push_back(atom);
        }
        const auto dim = atoms.front().location.size();
        for (const auto& a : atoms)
            if (a.location.size() != dim) throw ConfigError("atoms of mixed dimension");
        return LevyMeasure(AtomicSequence::table(atoms));
    }
    if (type == "stable") {
        const int dim = j.at("dim");
        const Json& rm = j.at("rho_max");
        const double rho_max = rm.is_string() ? std::numeric_limits<double>::infinity() : rm.get<double>();
        RadialDensity rd;
        rd.dim = dim;
        rd.profile = RadialProfile::power_law(j.at("c"), j.at("alpha"), j.at("lambda"), j.at("rho_min"), rho_max);
        const auto ang = j.at("angular").get<std::string>();
        rd.angular = ang == "symmetric"   ? AngularMeasure::symmetric_1d()
                     : ang == "one_sided" ? AngularMeasure::one_sided_1d()
                                          : AngularMeasure::uniform(dim, 1.0, j.at("directions"));
        return LevyMeasure(rd);
    }
    if (type == "mixture") {
        Mixture mix;
        for (const auto& c : j.at("components")) mix.components.emplace_back(c.at("weight"), build_measure(c.at("measure")));
        return LevyMeasure(mix);
    }
    throw ConfigError("unknown measure type '" + type + "'");
}

DriftField build_drift(const Json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "zero") return DriftField::zero(j.at("dim"));
    if (type == "neg_identity") return DriftField::neg_identity(j.at("dim"));
    if (type == "linear") {
        const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
        const auto n = static_cast<int>(rows.size());
        check_dim(n);
        Matrix A(n, n);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(rows[i].size()) != n) throw ConfigError("drift matrix must be square");
            for (int k = 0; k < n; ++k) A(i, k) = rows[i][k];
        }
        return DriftField::linear(A);
    }
    if (type == "polynomial") return DriftField::polynomial_1d(j.at("coefficients").get<std::vector<double>>());
    throw ConfigError("unknown drift type '" + type + "'");
}

}  // namespace

LevyMeasure make_measure(const Json& spec) { return build_measure(normalize_measure(spec, "measure")); }

DriftField make_drift(const Json& spec) { return build_drift(normalize_drift(spec, "drift")); }

CutoffScheme make_scheme(const Scenario& s, const LevyMeasure& measure) {
    return CutoffScheme::make(measure, s.cutoff.at("eps_cut"),
                              s.cutoff.at("mode") == "drop" ? SmallJumpMode::Drop : SmallJumpMode::GaussianMatch,
                              s.cutoff.at("compensation") == "none" ? Compensation::None
                                                                    : Compensation::LevyKhintchine);
}

Vector initial_state(const Scenario& s) {
    Vector x(static_cast<Eigen::Index>(s.x0.size()));
    for (std::size_t i = 0; i < s.x0.size(); ++i) x(static_cast<Eigen::Index>(i)) = s.x0[i];
    return x;
}

}  // namespace levylab::cli
