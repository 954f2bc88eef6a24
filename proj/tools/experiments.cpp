#include "experiments.hpp"

#include "levylab/diagnostics.hpp"
#include "levylab/rng.hpp"
#include "levylab/sde.hpp"
#include "levylab/variations.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <limits>
#include <sstream>

namespace levylab::cli {

namespace {

Json vec(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

// JSON has no infinity; thresholds use the string "inf".
Json num(double v) {
    if (std::isinf(v)) return v > 0 ? Json("inf") : Json("-inf");
    if (std::isnan(v)) return Json(nullptr);
    return Json(v);
}

Json index_json(const IndexClass& c) {
    return {{"kind", to_string(c.kind)},
            {"value", num(c.value)},
            {"uncertainty", num(c.uncertainty)},
            {"slope", num(c.slope)},
            {"aperture_stable", c.aperture_stable}};
}

Json trend_json(const TrendRow& row) {
    Json j = {{"t", row.t}, {"verdict", to_string(row.verdict)}};
    j["bandwidths"] = row.bandwidths;
    j["max_density"] = row.max_density;
    return j;
}

EndpointOptions endpoint_options(const Context& ctx) {
    EndpointOptions o;
    o.step = ctx.scenario.budgets.step;
    o.jobs = ctx.jobs;
    return o;
}

std::uint64_t seed_for(const Context& ctx, const std::string& label) { return derive_seed(ctx.seed, label); }

Integrator integrator_for(const Context& ctx) {
    return ctx.drift.is_linear() && ctx.scheme.mode == SmallJumpMode::Drop ? Integrator::ExactLinear
                                                                           : Integrator::RK4;
}

// ---------------------------------------------------------------------------

Json indices(Context& ctx) {
    const auto& s = ctx.scenario;
    const auto r_list = option<std::vector<int>>(s, "indices", "r_list", {1, 2});
    const auto apertures = option<std::vector<double>>(s, "indices", "apertures", {0.5, 0.25, 0.1});
    const auto eps = default_eps_list(ctx.measure, s.budgets.eps_points);
    Json out = {{"eps", eps}, {"apertures", apertures}, {"directions", s.budgets.directions}};
    for (int r : r_list) {
        const auto c = classify_order_index(ctx.measure, r, eps, apertures, s.budgets.directions);
        ctx.indices["rho_" + std::to_string(r)] = c;
        Json j = index_json(c);
        j["profile"] = order_index_profile(ctx.measure, r, apertures.back(), eps, s.budgets.directions).values;
        out["rho_" + std::to_string(r)] = j;
    }
    const auto th = classify_lower_index(ctx.measure, eps, s.budgets.directions);
    ctx.indices["theta"] = th;
    Json j = index_json(th);
    j["profile"] = lower_index_profile(ctx.measure, eps, s.budgets.directions).values;
    out["theta"] = j;
    return out;
}

Json wide_cone(Context& ctx) {
    const double aperture = option<double>(ctx.scenario, "wide_cone", "aperture", 0.5);
    const auto rep = wide_cone_check(ctx.measure, aperture, ctx.scenario.budgets.directions);
    ctx.wide_cone = rep.holds;
    std::size_t divergent = 0;
    for (const auto& d : rep.directions) divergent += d.divergent ? 1 : 0;
    Json out = {{"aperture", aperture},
                {"holds", rep.holds},
                {"floors", rep.floors},
                {"directions", rep.directions.size()},
                {"divergent_directions", divergent}};
    out["witness"] = rep.witness ? vec(*rep.witness) : Json(nullptr);
    if (rep.witness) {
        for (const auto& d : rep.directions)
            if ((d.axis - *rep.witness).norm() == 0.0) out["witness_masses"] = d.masses;
    }
    return out;
}

Json regime(Context& ctx) {
    const auto& s = ctx.scenario;
    const auto k_list = option<std::vector<int>>(s, "regime", "k_list", {0, 1});
    const auto r_list = option<std::vector<int>>(s, "regime", "r_list", {1, 2});
    const double aperture = option<double>(s, "regime", "aperture", 0.5);

    RegimeInputs in;
    in.m = ctx.measure.dim();
    in.k = k_list.empty() ? 0 : k_list.front();
    in.stationary = option<bool>(s, "regime", "stationary", false);
    Json kr = Json::object();
    for (int r : r_list) {
        const auto cert = k_r_certificate(ctx.drift, r, aperture);
        kr[std::to_string(r)] = {{"pass", cert.pass}, {"D", cert.D}, {"warnings", cert.warnings}};
        if (cert.pass) in.kr_pass.push_back(r);
    }
    Json idx = Json::object();
    in.theta = index_class(ctx, "theta");
    idx["theta"] = index_json(in.theta);
    std::vector<int> keys;
    if (in.m == 1) keys.push_back(1);
    for (int r : in.kr_pass) keys.push_back(2 * r);
    for (int key : keys) {
        const auto name = "rho_" + std::to_string(key);
        in.rho[key] = index_class(ctx, name);
        idx[name] = index_json(in.rho[key]);
    }
    // Thresholds are only as good as the index values; use the exact value
    // when the measure has one, after checking the estimate agrees with it.
    const auto exact = closed_form_index(s.measure);
    auto pin = [&](IndexClass& c, const std::string& name) {
        if (!exact || c.kind != IndexClass::Kind::Finite) return;
        if (std::abs(c.value - *exact) > 0.05 * *exact)
            ctx.fail("regime", name + " estimate " + std::to_string(c.value) + " is more than 5% from " +
                                   std::to_string(*exact));
        c.value = *exact;
        c.uncertainty = 0.0;
    };
    pin(in.theta, "theta");
    for (auto& [key, c] : in.rho) pin(c, "rho_" + std::to_string(key));
    if (!ctx.wide_cone) wide_cone(ctx);
    in.wide_cone = *ctx.wide_cone;
    in.dissipative = dissipativity_check(ctx.drift, 1.0).holds;

    const auto rep = regularity_report(s.id, in, k_list, {2, 4});
    Json out = {{"k_r", kr},
                {"indices", idx},
                {"closed_form_index", exact ? Json(*exact) : Json(nullptr)},
                {"wide_cone", in.wide_cone},
                {"dissipative", in.dissipative},
                {"stationary", in.stationary},
                {"k", in.k}};
    Json ts = Json::object(), ti = Json::object(), cb = Json::object();
    for (const auto& [k, v] : rep.t_smooth) ts[std::to_string(k)] = num(v);
    for (const auto& [r, v] : rep.t_irregular) ti[std::to_string(r)] = num(v);
    for (const auto& [k, v] : rep.cb_lower) cb[std::to_string(k)] = num(v);
    out["thresholds"] = {{"t_smooth", ts}, {"t_irregular", ti}, {"cb_lower", cb}};
    if (rep.regime) {
        out["regime"] = to_string(rep.regime->regime);
        out["reason"] = rep.regime->reason;
        out["band"] = rep.regime->band ? Json{num(rep.regime->band->first), num(rep.regime->band->second)}
                                       : Json(nullptr);
    } else {
        out["regime"] = nullptr;
        out["error"] = rep.regime_error;
    }
    return out;
}

Json density_sweep(Context& ctx) {
    const auto& s = ctx.scenario;
    Json rows = Json::array();
    for (std::size_t i = 0; i < s.t_list.size(); ++i) {
        const double t = s.t_list[i];
        const auto xs = sample_endpoints(ctx.drift, ctx.measure, ctx.scheme, ctx.x0, t,
                                         seed_for(ctx, "density_sweep/" + std::to_string(i)), s.budgets.samples,
                                         endpoint_options(ctx));
        rows.push_back(trend_json(sup_density_trend(xs, t)));
    }
    return {{"samples", s.budgets.samples}, {"rows", rows}};
}

Json char_probe(Context& ctx) {
    const auto& s = ctx.scenario;
    const int n_lo = option<int>(s, "char_probe", "n_lo", 4);
    const int n_hi = option<int>(s, "char_probe", "n_hi", 7);
    const auto process = option<std::string>(s, "char_probe", "process", "noise");
    if (process != "noise" && process != "solution")
        throw ConfigError("char_probe.process must be noise or solution");
    const int m = ctx.measure.dim();
    std::vector<double> dir(static_cast<std::size_t>(m), 0.0);
    dir[0] = 1.0;
    dir = option<std::vector<double>>(s, "char_probe", "direction", dir);
    if (static_cast<int>(dir.size()) != m) throw ConfigError("char_probe.direction has the wrong dimension");
    Vector v(m);
    for (int i = 0; i < m; ++i) v(i) = dir[static_cast<std::size_t>(i)];

    const double t = s.t_list.front();
    const DriftField a = process == "noise" ? DriftField::zero(m) : ctx.drift;
    const Vector x0 = process == "noise" ? Vector(Vector::Zero(m)) : ctx.x0;
    const auto xs = sample_endpoints(a, ctx.measure, ctx.scheme, x0, t, seed_for(ctx, "char_probe"),
                                     s.budgets.samples, endpoint_options(ctx));
    const auto probe = char_function_probe(xs, v, factorial_frequencies(n_lo, n_hi));
    Json rows = Json::array();
    bool increasing = true;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const auto& p = probe[i];
        rows.push_back({{"N", n_lo + static_cast<int>(i)},
                        {"z", p.z},
                        {"modulus", p.modulus},
                        {"se", p.se},
                        {"re", p.re},
                        {"im", p.im}});
        if (i > 0 && !(p.modulus > probe[i - 1].modulus)) increasing = false;
    }
    return {{"t", t}, {"process", process}, {"direction", dir}, {"samples", s.budgets.samples},
            {"rows", rows}, {"increasing", increasing}};
}

Json stationary(Context& ctx) {
    const auto& s = ctx.scenario;
    std::optional<double> burn;
    if (s.options.contains("stationary") && s.options["stationary"].contains("burn_in"))
        burn = s.options["stationary"]["burn_in"].get<double>();
    const auto st = stationary_sample(ctx.drift, ctx.measure, ctx.scheme, s.budgets.samples,
                                      seed_for(ctx, "stationary"), burn, endpoint_options(ctx));
    const int m = ctx.measure.dim();
    Vector mean = Vector::Zero(m), sq = Vector::Zero(m);
    for (const auto& x : st.samples) {
        mean += x;
        sq += x.cwiseProduct(x);
    }
    const double n = static_cast<double>(st.samples.size());
    mean /= n;
    Vector se(m);
    for (int i = 0; i < m; ++i) se(i) = std::sqrt(std::max(sq(i) / n - mean(i) * mean(i), 0.0) / n);
    return {{"burn_in", st.burn_in},
            {"warnings", st.warnings},
            {"samples", st.samples.size()},
            {"mean", vec(mean)},
            {"se", vec(se)},
            {"trend", trend_json(sup_density_trend(st.samples, st.burn_in))}};
}

Json tv_continuity(Context& ctx) {
    const auto& s = ctx.scenario;
    const auto deltas = option<std::vector<double>>(s, "tv_continuity", "deltas", {0.5, 0.1, 0.02});
    const int bins = option<int>(s, "tv_continuity", "bins", 100);
    const double t = s.t_list.front();
    const auto seed = seed_for(ctx, "tv_continuity");
    // common random numbers: every start point reuses the same configurations
    const auto base = sample_endpoints(ctx.drift, ctx.measure, ctx.scheme, ctx.x0, t, seed, s.budgets.samples,
                                       endpoint_options(ctx));
    std::vector<double> first(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) first[i] = base[i](0);
    std::vector<double> sorted = first;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted[sorted.size() / 1000], hi = sorted[sorted.size() - 1 - sorted.size() / 1000];
    const double pad = 0.1 * (hi - lo) + deltas.front();
    DensityOptions opt;
    opt.kind = DensityKind::Histogram;
    opt.bins = bins;
    opt.lo = Vector::Constant(1, lo - pad);
    opt.hi = Vector::Constant(1, hi + pad);
    const auto ref = density_estimate(first, opt);
    Json rows = Json::array();
    for (double d : deltas) {
        Vector x = ctx.x0;
        x(0) += d;
        const auto moved = sample_endpoints(ctx.drift, ctx.measure, ctx.scheme, x, t, seed, s.budgets.samples,
                                            endpoint_options(ctx));
        std::vector<double> m(moved.size());
        for (std::size_t i = 0; i < moved.size(); ++i) m[i] = moved[i](0);
        const double tv = tv_distance(ref, density_estimate(m, opt));
        if (!(tv >= 0.0 && tv <= 1.0)) ctx.fail("tv_continuity", "TV outside [0, 1]");
        rows.push_back({{"delta", d}, {"tv", tv}});
    }
    return {{"t", t}, {"bins", bins}, {"range", {lo - pad, hi + pad}}, {"rows", rows}};
}

// E phi(T_h nu) = E p_h phi(nu) for three functionals and two (h, Gamma) pairs.
Json admissibility(Context& ctx) {
    const auto& s = ctx.scenario;
    const double t = s.t_list.front();
    const double eps = ctx.scheme.eps_cut;
    const ConfigurationSampler sampler(ctx.measure, eps);
    struct Pair {
        std::string name;
        TimeStretch h;
        double band_lo;
        double pi_gamma;
    };
    std::vector<Pair> pairs = {
        {"sine(0,t,1) x |u|>=eps", TimeStretch::sine_bump(0.0, t, 1.0), eps, 0.0},
        {"sine(t/4,3t/4,1/2) x |u|>=sqrt(eps)", TimeStretch::sine_bump(0.25 * t, 0.75 * t, 0.5), std::sqrt(eps), 0.0},
    };
    for (auto& p : pairs) p.pi_gamma = mass_above(ctx.measure, p.band_lo);

    using Functional = std::function<double(const PointConfiguration&)>;
    const std::vector<std::pair<std::string, Functional>> phis = {
        {"sum sin(tau)",
         [](const PointConfiguration& c) {
             double v = 0.0;
             for (const auto& e : c.events) v += std::sin(e.tau);
             return v;
         }},
        {"count tau < t/3",
         [t](const PointConfiguration& c) {
             double v = 0.0;
             for (const auto& e : c.events) v += e.tau < t / 3.0 ? 1.0 : 0.0;
             return v;
         }},
        {"sum e^{-(t-tau)} u_1",
         [t](const PointConfiguration& c) {
             double v = 0.0;
             for (const auto& e : c.events) v += std::exp(-(t - e.tau)) * e.u(0);
             return v;
         }},
    };

    const std::size_t n = s.budgets.replicas;
    const auto seed = seed_for(ctx, "admissibility");
    Json rows = Json::array();
    for (const auto& p : pairs) {
        const StretchFlow forward(p.h, 1.0), backward(p.h, -1.0);
        const MarkSet gamma = norm_band(p.band_lo, std::numeric_limits<double>::infinity());
        std::vector<double> sum_l(phis.size()), sum_r(phis.size()), sum_d(phis.size()), sum_d2(phis.size()),
            sum_l2(phis.size()), sum_r2(phis.size());
        double sum_p = 0.0, sum_p2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = sampler.sample(0.0, t, seed, i);
            const auto moved = transform_configuration(c, backward, gamma);
            const double w = admissibility_density(c, forward, gamma, p.pi_gamma);
            sum_p += w;
            sum_p2 += w * w;
            for (std::size_t f = 0; f < phis.size(); ++f) {
                const double l = phis[f].second(moved), r = w * phis[f].second(c);
                sum_l[f] += l;
                sum_r[f] += r;
                sum_l2[f] += l * l;
                sum_r2[f] += r * r;
                sum_d[f] += l - r;
                sum_d2[f] += (l - r) * (l - r);
            }
        }
        const double nn = static_cast<double>(n);
        const double p_mean = sum_p / nn;
        const double p_se = std::sqrt(std::max(sum_p2 / nn - p_mean * p_mean, 0.0) / nn);
        Json fr = Json::array();
        for (std::size_t f = 0; f < phis.size(); ++f) {
            const double d = sum_d[f] / nn;
            // paired difference: both sides are evaluated on the same configuration
            const double se = std::sqrt(std::max(sum_d2[f] / nn - d * d, 0.0) / nn);
            const bool ok = std::abs(d) <= 4.0 * se;
            if (!ok) ctx.fail("admissibility", p.name + " / " + phis[f].first + " differs by more than 4 SE");
            fr.push_back({{"functional", phis[f].first},
                          {"lhs", sum_l[f] / nn},
                          {"rhs", sum_r[f] / nn},
                          {"difference", d},
                          {"se", se},
                          {"pass", ok}});
        }
        const bool p_ok = std::abs(p_mean - 1.0) <= 4.0 * p_se;
        if (!p_ok) ctx.fail("admissibility", p.name + ": E[p] differs from 1 by more than 4 SE");
        rows.push_back({{"pair", p.name},
                        {"pi_gamma", p.pi_gamma},
                        {"mean_p", p_mean},
                        {"se_p", p_se},
                        {"p_pass", p_ok},
                        {"functionals", fr}});
    }
    return {{"t", t}, {"replicas", n}, {"pairs", rows}};
}

// FD of X(t) along T_{eps h} against the derivative process, on configurations with >= 1 jump.
Json derivative_check(Context& ctx) {
    const auto& s = ctx.scenario;
    const auto count = option<int>(s, "derivative_check", "configs", 20);
    const double t = s.t_list.front();
    const auto h = TimeStretch::sine_bump(0.0, t, 1.0);
    const MarkSet gamma = all_marks();
    const ConfigurationSampler sampler(ctx.measure, ctx.scheme.eps_cut);
    const auto method = integrator_for(ctx);
    const auto seed = seed_for(ctx, "derivative_check");
    const double step = s.budgets.step;

    Json rows = Json::array();
    int found = 0, skipped = 0;
    for (std::uint64_t r = 0; found < count && r < 1000 * static_cast<std::uint64_t>(count); ++r) {
        const auto c = sampler.sample(0.0, t, seed, r);
        if (c.events.empty()) {
            ++skipped;
            continue;
        }
        ++found;
        auto path = solve_path(ctx.drift, c, ctx.scheme, ctx.x0, step, method);
        stochastic_exponent(path, ctx.drift);
        const Vector Y = derivative_process(path, ctx.drift, h, gamma);
        const ConfigFunctional X_end = [&](const PointConfiguration& cfg) {
            return solve_path(ctx.drift, cfg, ctx.scheme, ctx.x0, step, method).end_state();
        };
        Json row = {{"replica", r}, {"events", c.events.size()}, {"Y", vec(Y)}};
        try {
            const auto fd = finite_diff_derivative(X_end, c, h, gamma, {1e-2, 1e-3, 1e-4}, 1e-4);
            const double rel = (fd.richardson - Y).norm() / std::max(Y.norm(), 1e-12);
            const bool ok = fd.slope >= 0.8 && fd.slope <= 1.2 && rel <= 1e-4;
            if (!ok)
                ctx.fail("derivative_check", "replica " + std::to_string(r) + ": slope " + std::to_string(fd.slope) +
                                                 ", relative error " + std::to_string(rel));
            row["richardson"] = vec(fd.richardson);
            row["central"] = vec(fd.central.back());
            row["slope"] = num(fd.slope);
            row["relative_error"] = rel;
            row["pass"] = ok;
        } catch (const NonConvergent& e) {
            ctx.fail("derivative_check", "replica " + std::to_string(r) + ": " + e.what());
            row["error"] = e.what();
            row["pass"] = false;
        }
        rows.push_back(row);
    }
    if (found < count) ctx.fail("derivative_check", "too few configurations with a jump");
    return {{"t", t},
            {"integrator", to_string(method)},
            {"stretch", h.describe()},
            {"skipped_empty", skipped},
            {"rows", rows}};
}

Json malliavin(Context& ctx) {
    const auto& s = ctx.scenario;
    const double t = s.t_list.front();
    const double B = option<double>(s, "malliavin", "B", 64.0);
    const double g = option<double>(s, "malliavin", "gamma", 0.25);
    const double beta = option<double>(s, "malliavin", "beta", 0.1 * t);
    const DifferentialGrid grid(ctx.measure, t, B, g, beta, ctx.scheme.eps_cut);
    const ConfigurationSampler sampler(ctx.measure, ctx.scheme.eps_cut);
    const auto method = integrator_for(ctx);
    const auto seed = seed_for(ctx, "malliavin");
    const DriftField zero = DriftField::zero(ctx.measure.dim());

    std::size_t used = 0, skipped = 0, nondegenerate = 0;
    double zero_sigma = 0.0, min_lambda = std::numeric_limits<double>::infinity();
    std::vector<double> lambdas;
    for (std::uint64_t r = 0; used < s.budgets.replicas && r < 100 * s.budgets.replicas; ++r) {
        const auto c = sampler.sample(0.0, t, seed, r);
        if (c.events.empty()) {
            ++skipped;
            continue;
        }
        ++used;
        auto path = solve_path(ctx.drift, c, ctx.scheme, ctx.x0, s.budgets.step, method);
        stochastic_exponent(path, ctx.drift);
        const auto gd = malliavin_matrix(path, ctx.drift, grid);
        nondegenerate += gd.nondegenerate ? 1 : 0;
        min_lambda = std::min(min_lambda, gd.lambda_min);
        lambdas.push_back(gd.lambda_min);
        if (used <= 10) {
            auto zp = solve_path(zero, c, ctx.scheme, ctx.x0, s.budgets.step, Integrator::ExactLinear);
            stochastic_exponent(zp, zero);
            zero_sigma = std::max(zero_sigma, malliavin_matrix(zp, zero, grid).sigma.cwiseAbs().maxCoeff());
        }
    }
    const double fraction = used ? static_cast<double>(nondegenerate) / static_cast<double>(used) : 0.0;
    if (zero_sigma != 0.0) ctx.fail("malliavin", "zero drift gave a nonzero Malliavin matrix");
    if (fraction < 0.99) ctx.fail("malliavin", "nondegenerate fraction " + std::to_string(fraction) + " < 0.99");
    std::sort(lambdas.begin(), lambdas.end());
    return {{"t", t},
            {"grid", {{"B", B}, {"gamma", g}, {"beta", beta}, {"annuli", grid.annuli().size()},
                      {"summed_bound", grid.summed_bound()}}},
            {"replicas", used},
            {"skipped_without_jumps", skipped},
            {"nondegenerate_fraction", fraction},
            {"lambda_min_quantiles",
             lambdas.empty() ? Json(nullptr)
                             : Json{lambdas.front(), lambdas[lambdas.size() / 100], lambdas[lambdas.size() / 2]}},
            {"zero_drift_sigma_max", zero_sigma}};
}

void check_expectations(Context& ctx, const Json& report) {
    const Json& e = ctx.scenario.expect;
    const Json& ex = report.at("experiments");
    // expectations on experiments the scenario does not run are skipped
    auto need = [&](const std::string& kind) -> const Json* {
        if (!ex.contains(kind)) return nullptr;
        if (ex.at(kind).contains("error")) {
            ctx.fail("expect", "needs a successful '" + kind + "' experiment");
            return nullptr;
        }
        return &ex.at(kind);
    };
    if (e.contains("regime")) {
        if (const Json* r = need("regime")) {
            if (r->at("regime") != e["regime"])
                ctx.fail("expect", "regime " + r->at("regime").dump() + ", expected " + e["regime"].dump());
        }
    }
    if (e.contains("band")) {
        if (const Json* r = need("regime")) {
            const Json& b = r->at("band");
            if (b.is_null() || !b[0].is_number() || !b[1].is_number() ||
                std::abs(b[0].get<double>() - e["band"][0].get<double>()) > 1e-4 ||
                std::abs(b[1].get<double>() - e["band"][1].get<double>()) > 1e-4)
                ctx.fail("expect", "band " + b.dump() + ", expected " + e["band"].dump());
        }
    }
    if (e.contains("wide_cone")) {
        if (const Json* w = need("wide_cone")) {
            if (w->at("holds") != e["wide_cone"]) ctx.fail("expect", "wide cone verdict differs");
        }
    }
    if (e.contains("index") && (ex.contains("indices") || ex.contains("regime"))) {
        for (const auto& [name, kind] : e["index"].items()) {
            const std::string got = to_string(index_class(ctx, name).kind);
            if (got != kind.get<std::string>()) ctx.fail("expect", name + " classified " + got);
        }
    }
    if (e.contains("char_increasing")) {
        if (const Json* c = need("char_probe")) {
            if (c->at("increasing") != e["char_increasing"]) ctx.fail("expect", "char probe monotonicity differs");
        }
    }
    if (e.contains("trend")) {
        if (const Json* d = need("density_sweep")) {
            const auto& rows = d->at("rows");
            for (std::size_t i = 0; i < rows.size() && i < e["trend"].size(); ++i)
                if (rows[i].at("verdict") != e["trend"][i])
                    ctx.fail("expect", "trend at t = " + rows[i].at("t").dump() + " is " +
                                           rows[i].at("verdict").dump());
        }
    }
    if (e.contains("stationary_trend")) {
        if (const Json* st = need("stationary")) {
            if (st->at("trend").at("verdict") != e["stationary_trend"])
                ctx.fail("expect", "stationary trend is " + st->at("trend").at("verdict").dump());
        }
    }
    if (e.contains("stationary_mean")) {
        if (const Json* st = need("stationary")) {
            const double mean = st->at("mean")[0], se = st->at("se")[0];
            if (std::abs(mean - e["stationary_mean"].get<double>()) > 4.0 * se)
                ctx.fail("expect", "stationary mean " + std::to_string(mean) + " is more than 4 SE off");
        }
    }
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace

Context::Context(const Scenario& s, std::uint64_t scenario_seed, int jobs_)
    : scenario(s),
      measure(make_measure(s.measure)),
      drift(make_drift(s.drift)),
      scheme(make_scheme(s, measure)),
      x0(initial_state(s)),
      seed(scenario_seed),
      jobs(jobs_) {}

IndexClass index_class(Context& ctx, const std::string& name) {
    if (auto it = ctx.indices.find(name); it != ctx.indices.end()) return it->second;
    const auto& s = ctx.scenario;
    const auto eps = default_eps_list(ctx.measure, s.budgets.eps_points);
    IndexClass c;
    if (name == "theta") {
        c = classify_lower_index(ctx.measure, eps, s.budgets.directions);
    } else if (name.rfind("rho_", 0) == 0) {
        const int r = std::stoi(name.substr(4));
        const auto apertures = option<std::vector<double>>(s, "indices", "apertures", {0.5, 0.25, 0.1});
        c = classify_order_index(ctx.measure, r, eps, apertures, s.budgets.directions);
    } else {
        throw ConfigError("unknown index name '" + name + "'");
    }
    ctx.indices[name] = c;
    return c;
}

Json run_experiment(Context& ctx, const std::string& kind) {
    if (kind == "indices") return indices(ctx);
    if (kind == "wide_cone") return wide_cone(ctx);
    if (kind == "regime") return regime(ctx);
    if (kind == "density_sweep") return density_sweep(ctx);
    if (kind == "char_probe") return char_probe(ctx);
    if (kind == "stationary") return stationary(ctx);
    if (kind == "tv_continuity") return tv_continuity(ctx);
    if (kind == "admissibility") return admissibility(ctx);
    if (kind == "derivative_check") return derivative_check(ctx);
    if (kind == "malliavin") return malliavin(ctx);
    throw ConfigError("unknown experiment '" + kind + "'");
}

ScenarioResult run_scenario(const Scenario& s, std::uint64_t run_seed, int jobs) {
    const auto seed = derive_seed(run_seed, s.id);
    Context ctx(s, seed, jobs);
    Json report = {{"schema_version", kSchemaVersion},
                   {"scenario", s.id},
                   {"run_seed", run_seed},
                   {"seed", seed},
                   {"generated_at", utc_now()},
                   {"config", to_json(s)},
                   {"metadata",
                    {{"time_stretch_space", "half-line H0; stationary runs start at 0 and read X after the burn-in"},
                     {"eps_cut", ctx.scheme.eps_cut},
                     {"retained_rate", ConfigurationSampler(ctx.measure, ctx.scheme.eps_cut).rate()}}}};
    Json experiments = Json::object();
    for (const auto& kind : s.experiments) {
        try {
            experiments[kind] = run_experiment(ctx, kind);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            experiments[kind] = {{"error", e.what()}, {"code", e.code()}};
            ctx.fail(kind, e.what());
        }
    }
    report["experiments"] = experiments;
    try {
        check_expectations(ctx, report);
    } catch (const Error& e) {
        ctx.fail("expect", e.what());
    }
    report["failures"] = ctx.failures;
    report["status"] = ctx.failures.empty() ? "ok" : "failed";
    return {report, ctx.failures};
}

Json strip_timestamp(Json report) {
    report.erase("generated_at");
    return report;
}

std::vector<std::pair<std::string, std::string>> report_tables(const Json& report) {
    std::vector<std::pair<std::string, std::string>> out;
    const Json& ex = report.at("experiments");
    auto csv_num = [](const Json& v) {
        if (v.is_number()) {
            std::ostringstream os;
            os << std::setprecision(17) << v.get<double>();
            return os.str();
        }
        return v.is_string() ? v.get<std::string>() : v.dump();
    };
    if (ex.contains("indices") && !ex["indices"].contains("error")) {
        std::ostringstream os;
        os << "index,eps,value\n";
        const auto& eps = ex["indices"]["eps"];
        for (const auto& [name, j] : ex["indices"].items()) {
            if (!j.is_object() || !j.contains("profile")) continue;
            for (std::size_t i = 0; i < j["profile"].size(); ++i)
                os << name << ',' << csv_num(eps[i]) << ',' << csv_num(j["profile"][i]) << '\n';
        }
        out.emplace_back("indices", os.str());
    }
    if (ex.contains("density_sweep") && !ex["density_sweep"].contains("error")) {
        std::ostringstream os;
        os << "t,bandwidth,max_density,verdict\n";
        for (const auto& r : ex["density_sweep"]["rows"])
            for (std::size_t i = 0; i < r["bandwidths"].size(); ++i)
                os << csv_num(r["t"]) << ',' << csv_num(r["bandwidths"][i]) << ',' << csv_num(r["max_density"][i])
                   << ',' << r["verdict"].get<std::string>() << '\n';
        out.emplace_back("density_sweep", os.str());
    }
    if (ex.contains("char_probe") && !ex["char_probe"].contains("error")) {
        std::ostringstream os;
        os << "N,z,modulus,se\n";
        for (const auto& r : ex["char_probe"]["rows"])
            os << r["N"] << ',' << csv_num(r["z"]) << ',' << csv_num(r["modulus"]) << ',' << csv_num(r["se"]) << '\n';
        out.emplace_back("char_probe", os.str());
    }
    if (ex.contains("tv_continuity") && !ex["tv_continuity"].contains("error")) {
        std::ostringstream os;
        os << "delta,tv\n";
        for (const auto& r : ex["tv_continuity"]["rows"]) os << csv_num(r["delta"]) << ',' << csv_num(r["tv"]) << '\n';
        out.emplace_back("tv_continuity", os.str());
    }
    if (ex.contains("admissibility") && !ex["admissibility"].contains("error")) {
        std::ostringstream os;
        os << "pair,functional,lhs,rhs,difference,se,pass\n";
        for (const auto& p : ex["admissibility"]["pairs"])
            for (const auto& f : p["functionals"])
                os << '"' << p["pair"].get<std::string>() << "\",\"" << f["functional"].get<std::string>() << "\","
                   << csv_num(f["lhs"]) << ',' << csv_num(f["rhs"]) << ',' << csv_num(f["difference"]) << ','
                   << csv_num(f["se"]) << ',' << (f["pass"].get<bool>() ? 1 : 0) << '\n';
        out.emplace_back("admissibility", os.str());
    }
    if (ex.contains("derivative_check") && !ex["derivative_check"].contains("error")) {
        std::ostringstream os;
        os << "replica,events,Y1,richardson1,slope,relative_error\n";
        for (const auto& r : ex["derivative_check"]["rows"]) {
            if (r.contains("error")) continue;
            os << r["replica"] << ',' << r["events"] << ',' << csv_num(r["Y"][0]) << ',' << csv_num(r["richardson"][0])
               << ',' << csv_num(r["slope"]) << ',' << csv_num(r["relative_error"]) << '\n';
        }
        out.emplace_back("derivative_check", os.str());
    }
    return out;
}

}  // namespace levylab::cli
