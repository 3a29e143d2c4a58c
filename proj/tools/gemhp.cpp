// gemhp command-line front end.

#include "gemhp/config.hpp"
#include "gemhp/diagnostics.hpp"
#include "gemhp/error.hpp"
#include "gemhp/estimation.hpp"
#include "gemhp/parallel.hpp"
#include "gemhp/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gemhp;

namespace {

constexpr std::string_view kRunSchema = "gemhp/run-v1";

[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorKind::InvalidInput, "config: " + what); }

void only_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) bad_config(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) bad_config(where + ": unknown field '" + key + "'");
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        bad_config(where + "." + key + " has the wrong type");
    }
}

json vec(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
    return a;
}

json named(const ModelSpec& spec, const Vector& v) {
    json o = json::object();
    for (int j = 0; j < spec.n_params(); ++j) o[spec.parameters[static_cast<std::size_t>(j)].name] = v(j);
    return o;
}

class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) : path_(dir / ".gemhp.lock") {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) {
            throw Error(ErrorKind::InvalidInput,
                        "output directory '" + dir.string() + "' is locked by another run (" + path_.string() + ")");
        }
        std::fclose(f);
    }
    ~OutputLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
};

struct Context {
    std::string command;
    fs::path base;
    fs::path output;
    json config;
    ModelSpec spec;
    ThetaVector theta;
    std::uint64_t seed{0};
    int workers{1};
    bool allow_unstable{false};
    std::string hash;
    std::vector<std::string> written;

    [[nodiscard]] fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : base / path;
    }

    [[nodiscard]] json block() const { return config.contains(command) ? config.at(command) : json::object(); }

    [[nodiscard]] json stamp() const { return {{"seed", seed}, {"config_hash", hash}, {"command", command}}; }

    void write(const std::string& name, const std::string& content) {
        const fs::path p = output / name;
        std::ofstream os(p, std::ios::binary);
        if (!os) throw Error(ErrorKind::InvalidInput, "cannot write '" + p.string() + "'");
        os << content;
        if (!os) throw Error(ErrorKind::InvalidInput, "failed writing '" + p.string() + "'");
        written.push_back(name);
    }

    void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

    [[nodiscard]] EventStream load_stream(const json& blk, const std::string& where) const {
        if (!blk.contains("stream") || !blk.at("stream").is_string()) bad_config(where + ".stream is required");
        const fs::path p = resolve(blk.at("stream").get<std::string>());
        if (!fs::exists(p)) throw Error(ErrorKind::InvalidInput, "stream file '" + p.string() + "' does not exist");
        EventStream s = read_stream_file(p.string());
        if (s.d != spec.d) {
            throw Error(ErrorKind::InvalidInput, "stream '" + p.string() + "' has d = " + std::to_string(s.d) +
                                                     " but the model has d = " + std::to_string(spec.d));
        }
        s.validate(spec.marks);
        return s;
    }
};

ThetaVector parse_theta(const json& j, const ModelSpec& spec, ThetaVector base, const std::string& where) {
    if (!j.is_object()) bad_config(where + " must map parameter names to numbers");
    for (const auto& [key, value] : j.items()) {
        const int idx = spec.parameter_index(key);
        if (idx < 0) bad_config(where + ": unknown parameter '" + key + "'");
        if (!value.is_number()) bad_config(where + "." + key + " must be a number");
        base(idx) = value.get<double>();
    }
    return base;
}

Mark parse_mark(const json& j, const std::string& where) {
    if (j.is_number()) return Mark{j.get<double>()};
    if (!j.is_array()) bad_config(where + " must be a number or an array");
    Mark x;
    for (const auto& v : j) {
        if (!v.is_number()) bad_config(where + " must hold numbers");
        x.push_back(v.get<double>());
    }
    return x;
}

json stability_json(const StabilityReport& r) {
    json j = {{"ok", r.ok},
              {"rho_bound", r.rho_bound},
              {"phi_bar", mat(r.phi_bar)},
              {"sup_certified", r.sup_certified},
              {"note", r.note}};
    j["kappa"] = r.kappa.size() ? vec(r.kappa) : json(nullptr);
    return j;
}

json fit_json(const FitResult& f, const ModelSpec& spec, double level) {
    json j = {{"theta_hat", named(spec, f.theta_hat)},
              {"l_value", f.l_value},
              {"gamma_T", mat(f.gamma_T)},
              {"cov_available", f.cov_available},
              {"n_events", f.n_events},
              {"horizon", f.horizon},
              {"converged", f.converged},
              {"n_restarts_used", f.n_restarts_used},
              {"simplex_diameter", f.simplex_diameter},
              {"projected_score_norm", f.score_norm},
              {"evaluations", f.evaluations},
              {"hessian_asymmetry", f.hessian_asymmetry},
              {"warnings", f.warnings}};
    j["cov_hat"] = f.cov_available ? mat(f.cov_hat) : json(nullptr);
    if (auto cis = wald_cis(f, level)) {
        json c = json::object();
        for (int i = 0; i < spec.n_params(); ++i) {
            const auto& w = (*cis)[static_cast<std::size_t>(i)];
            c[spec.parameters[static_cast<std::size_t>(i)].name] = {{"lower", w.lower}, {"upper", w.upper}};
        }
        j["wald_intervals"] = {{"level", level}, {"intervals", c}};
    } else {
        j["wald_intervals"] = nullptr;
    }
    return j;
}

std::string fit_table(const FitResult& f, const ModelSpec& spec, double level) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %16s %16s %16s %16s\n", "parameter", "estimate", "std err", "lower", "upper");
    out += buf;
    const auto cis = wald_cis(f, level);
    for (int i = 0; i < spec.n_params(); ++i) {
        const double se = f.cov_available ? std::sqrt(f.cov_hat(i, i)) : std::nan("");
        const double lo = cis ? (*cis)[static_cast<std::size_t>(i)].lower : std::nan("");
        const double hi = cis ? (*cis)[static_cast<std::size_t>(i)].upper : std::nan("");
        std::snprintf(buf, sizeof buf, "%-16s %16.8g %16.6g %16.8g %16.8g\n",
                      spec.parameters[static_cast<std::size_t>(i)].name.c_str(), f.theta_hat(i), se, lo, hi);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "log-likelihood %.12g   events %zu   converged %s\n", f.l_value, f.n_events,
                  f.converged ? "yes" : "no");
    out += buf;
    return out;
}

FitOptions fit_options(const Context& ctx, const json& blk, const std::string& where) {
    FitOptions fo;
    fo.seed = ctx.seed;
    fo.workers = ctx.workers;
    fo.n_starts = get_or<int>(blk, "starts", 8, where);
    fo.coarse_tol = get_or<double>(blk, "coarse_tol", fo.coarse_tol, where);
    if (blk.contains("init")) fo.init = parse_theta(blk.at("init"), ctx.spec, ctx.spec.initial(), where + ".init");
    return fo;
}

int cmd_simulate(Context& ctx) {
    const json blk = ctx.block();
    only_keys(blk, "simulate", {"horizon", "replications", "warmup", "x0", "max_events"});
    if (!blk.contains("horizon")) bad_config("simulate.horizon is required");
    SimulationOptions so;
    so.horizon = get_or<double>(blk, "horizon", 0.0, "simulate");
    so.seed = ctx.seed;
    so.warmup = get_or<double>(blk, "warmup", -1.0, "simulate");
    so.max_events = get_or<std::uint64_t>(blk, "max_events", so.max_events, "simulate");
    so.allow_unstable = true;
    if (blk.contains("x0")) so.x0 = parse_mark(blk.at("x0"), "simulate.x0");
    const int reps = get_or<int>(blk, "replications", 1, "simulate");
    if (reps < 1) bad_config("simulate.replications must be >= 1");

    const Mark x0 = so.x0.empty() ? ctx.spec.default_mark() : so.x0;
    const StabilityReport stab = check_stability_L3(ctx.spec, ctx.theta, stability_probe(ctx.spec, x0));
    if (!stab.ok && !ctx.allow_unstable) {
        std::cerr << stability_json(stab).dump(2) << "\n";
        throw Error(ErrorKind::Domain, "model fails the stability check (rho_bound = " +
                                           std::to_string(stab.rho_bound) + "); rerun with --allow-unstable to override");
    }
    std::vector<EventStream> streams(static_cast<std::size_t>(reps));
    parallel_for(streams.size(), ctx.workers, [&](std::size_t r) {
        SimulationOptions o = so;
        o.stream = r;
        streams[r] = simulate(ctx.spec, ctx.theta, o);
        streams[r].config_hash = ctx.hash;
    });
    json files = json::array();
    for (std::size_t r = 0; r < streams.size(); ++r) {
        const std::string name = "stream_" + std::to_string(r) + ".jsonl";
        std::ostringstream os;
        write_stream(os, streams[r], ctx.spec.marks);
        ctx.write(name, os.str());
        files.push_back({{"file", name}, {"rng_stream", r}, {"events", streams[r].size()}});
    }
    json out = ctx.stamp();
    out["theta"] = named(ctx.spec, ctx.theta);
    out["horizon"] = so.horizon;
    out["warmup"] = so.warmup < 0.0 ? 0.1 * so.horizon : so.warmup;
    out["streams"] = files;
    out["stability"] = stability_json(stab);
    ctx.write_json("simulate.json", out);
    return 0;
}

int cmd_fit(Context& ctx) {
    const json blk = ctx.block();
    only_keys(blk, "fit", {"stream", "starts", "init", "level", "coarse_tol"});
    const EventStream stream = ctx.load_stream(blk, "fit");
    const double level = get_or<double>(blk, "level", 0.95, "fit");
    const FitResult fit = fit_qmle(stream, ctx.spec, fit_options(ctx, blk, "fit"));
    json out = ctx.stamp();
    out["fit"] = fit_json(fit, ctx.spec, level);
    ctx.write_json("fit.json", out);
    ctx.write("fit.txt", fit_table(fit, ctx.spec, level));
    std::cout << fit_table(fit, ctx.spec, level);
    return 0;
}

int cmd_bayes(Context& ctx) {
    const json blk = ctx.block();
    only_keys(blk, "bayes", {"stream", "draws", "burn_in", "thin", "priors", "ess_floor", "init"});
    const EventStream stream = ctx.load_stream(blk, "bayes");
    McmcOptions mo;
    mo.seed = ctx.seed;
    mo.draws = get_or<int>(blk, "draws", mo.draws, "bayes");
    mo.burn_in = get_or<int>(blk, "burn_in", mo.burn_in, "bayes");
    mo.thin = get_or<int>(blk, "thin", mo.thin, "bayes");
    mo.ess_floor = get_or<double>(blk, "ess_floor", mo.ess_floor, "bayes");
    mo.init = blk.contains("init") ? parse_theta(blk.at("init"), ctx.spec, ctx.theta, "bayes.init") : ctx.theta;
    std::vector<Prior> priors(static_cast<std::size_t>(ctx.spec.n_params()), Prior::uniform());
    if (blk.contains("priors")) {
        const json& pj = blk.at("priors");
        if (!pj.is_object()) bad_config("bayes.priors must map parameter names to priors");
        for (const auto& [name, p] : pj.items()) {
            const int idx = ctx.spec.parameter_index(name);
            if (idx < 0) bad_config("bayes.priors: unknown parameter '" + name + "'");
            only_keys(p, "bayes.priors." + name, {"type", "mean", "sd"});
            const std::string type = get_or<std::string>(p, "type", "uniform", "bayes.priors." + name);
            if (type == "uniform") {
                priors[static_cast<std::size_t>(idx)] = Prior::uniform();
            } else if (type == "truncated-normal") {
                priors[static_cast<std::size_t>(idx)] =
                    Prior::truncated_normal(get_or<double>(p, "mean", 0.0, name), get_or<double>(p, "sd", 1.0, name));
            } else {
                bad_config("bayes.priors." + name + ": type must be uniform or truncated-normal");
            }
        }
    }
    const PosteriorResult post = fit_qbe(stream, ctx.spec, priors, mo);
    json out = ctx.stamp();
    json ci = json::object();
    for (int j = 0; j < ctx.spec.n_params(); ++j) {
        ci[ctx.spec.parameters[static_cast<std::size_t>(j)].name] = {post.credible(j, 0), post.credible(j, 1)};
    }
    out["posterior"] = {{"theta_tilde", named(ctx.spec, post.theta_tilde)},
                        {"posterior_sd", named(ctx.spec, post.posterior_sd)},
                        {"ess", named(ctx.spec, post.ess)},
                        {"mc_std_err", named(ctx.spec, post.mc_std_err)},
                        {"credible_95", ci},
                        {"acceptance_rate", post.acceptance_rate},
                        {"ess_ok", post.ess_ok},
                        {"mixing_failure", post.mixing_failure},
                        {"draws", post.draws},
                        {"warnings", post.warnings}};
    ctx.write_json("bayes.json", out);
    return post.mixing_failure ? 1 : 0;
}

int cmd_diagnose(Context& ctx) {
    const json blk = ctx.block();
    only_keys(blk, "diagnose", {"stream", "grid_step", "max_lag", "lan", "fit_first", "starts"});
    const EventStream stream = ctx.load_stream(blk, "diagnose");
    ThetaVector theta = ctx.theta;
    json out = ctx.stamp();
    std::optional<Matrix> gamma;
    if (get_or<bool>(blk, "fit_first", false, "diagnose")) {
        const FitResult fit = fit_qmle(stream, ctx.spec, fit_options(ctx, blk, "diagnose"));
        theta = fit.theta_hat;
        gamma = fit.gamma_T;
        out["fit"] = fit_json(fit, ctx.spec, 0.95);
    }
    out["theta"] = named(ctx.spec, theta);

    const ResidualReport res = rescaled_residuals(stream, ctx.spec, theta);
    json comps = json::array();
    std::string table = "component  events        KS   p-value   lag1-acf  note\n";
    char buf[256];
    for (const auto& c : res.components) {
        comps.push_back({{"component", c.component},
                         {"events", c.residuals.size()},
                         {"ks", c.ks},
                         {"p_value", c.p_value},
                         {"lag1_acf", c.lag1_acf},
                         {"skipped", c.skipped},
                         {"pass_1pct", !c.skipped && c.p_value >= 0.01},
                         {"note", c.note}});
        std::snprintf(buf, sizeof buf, "%9d %7zu %9.5f %9.5f %10.5f  %s\n", c.component, c.residuals.size(), c.ks,
                      c.p_value, c.lag1_acf, c.note.c_str());
        table += buf;
        std::string dat = "# index residual\n";
        for (std::size_t i = 0; i < c.residuals.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%zu %.17g\n", i, c.residuals[i]);
            dat += buf;
        }
        ctx.write("residuals_" + std::to_string(c.component) + ".dat", dat);
    }
    out["residuals"] = comps;

    const double step = get_or<double>(blk, "grid_step", 1.0, "diagnose");
    const int max_lag = get_or<int>(blk, "max_lag", 50, "diagnose");
    const MixingReport mix = mixing_probe(stream, ctx.spec, theta, step, max_lag);
    out["mixing"] = {{"degenerate", mix.degenerate}, {"grid_step", mix.grid_step}, {"acf", mix.acf},
                     {"lags_fitted", mix.lags_fitted}, {"decay_rate", mix.decay_rate},
                     {"r_squared", mix.r_squared}, {"note", mix.note}};
    std::string acf = "# lag acf\n";
    for (std::size_t k = 0; k < mix.acf.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", (static_cast<double>(k) + 1.0) * step, mix.acf[k]);
        acf += buf;
    }
    ctx.write("mixing_acf.dat", acf);
    std::snprintf(buf, sizeof buf, "mixing: decay rate %.6g (R^2 %.4f, %d lags)%s\n", mix.decay_rate, mix.r_squared,
                  mix.lags_fitted, mix.degenerate ? " [degenerate]" : "");
    table += buf;

    const json lan_cfg = blk.contains("lan") ? blk.at("lan") : json(false);
    if (!lan_cfg.is_boolean() || lan_cfg.get<bool>()) {
        json lc = lan_cfg.is_object() ? lan_cfg : json::object();
        only_keys(lc, "diagnose.lan", {"directions", "radii"});
        Rng rng(ctx.seed, 0x4c414eULL);
        const auto dirs = random_directions(ctx.spec.n_params(), get_or<int>(lc, "directions", 3, "diagnose.lan"), rng);
        const auto radii = get_or<std::vector<double>>(lc, "radii", {}, "diagnose.lan");
        const LanReport lan = lan_profile(stream, ctx.spec, theta, dirs, radii, gamma);
        json dj = json::array();
        for (const auto& d : lan.directions) {
            dj.push_back({{"direction", vec(d.direction)}, {"radii", d.radii}, {"log_z", d.log_z},
                          {"fitted_curvature", d.c2}, {"predicted_curvature", d.predicted},
                          {"relative_error", d.relative_error}, {"dropped", d.dropped}});
            std::snprintf(buf, sizeof buf, "LAN: fitted %.6g vs -1/2 d'Gd %.6g (rel err %.4f)\n", d.c2, d.predicted,
                          d.relative_error);
            table += buf;
        }
        out["lan"] = {{"gamma_T", mat(lan.gamma)}, {"directions", dj}};
    }
    ctx.write_json("diagnose.json", out);
    ctx.write("diagnose.txt", table);
    std::cout << table;
    return 0;
}

int cmd_stability(Context& ctx) {
    const json blk = ctx.block();
    only_keys(blk, "stability", {"probe"});
    std::vector<Mark> probe = stability_probe(ctx.spec, ctx.spec.default_mark());
    if (blk.contains("probe")) {
        probe.clear();
        for (const auto& m : blk.at("probe")) probe.push_back(parse_mark(m, "stability.probe"));
        for (const auto& m : probe) ctx.spec.marks.validate(m);
    }
    const StabilityReport r = check_stability_L3(ctx.spec, ctx.theta, probe);
    json out = ctx.stamp();
    out["theta"] = named(ctx.spec, ctx.theta);
    out["stability"] = stability_json(r);
    try {
        const DriftReport d = check_queue_reactive_drift(ctx.spec, ctx.theta);
        out["drift"] = {{"ok", d.ok}, {"nu_limit", d.nu_limit}, {"nu_market", d.nu_market},
                        {"nu_cancel", d.nu_cancel}, {"x0", d.threshold}, {"note", d.note}};
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Unsupported) throw;
        out["drift"] = nullptr;
    }
    ctx.write_json("stability.json", out);
    std::printf("stability: %s, rho_bound = %.12g\n", r.ok ? "ok" : "NOT ok", r.rho_bound);
    return 0;
}

int cmd_mcstudy(Context& ctx) {
    const json blk = ctx.block();
    only_keys(blk, "mcstudy", {"horizons", "replications", "starts", "init_at_truth", "level", "reference_samples",
                               "warmup_fraction", "coarse_tol"});
    StudyOptions so;
    so.seed = ctx.seed;
    so.workers = ctx.workers;
    so.horizons = get_or<std::vector<double>>(blk, "horizons", so.horizons, "mcstudy");
    so.replications = get_or<int>(blk, "replications", so.replications, "mcstudy");
    so.init_at_truth = get_or<bool>(blk, "init_at_truth", false, "mcstudy");
    so.level = get_or<double>(blk, "level", so.level, "mcstudy");
    so.reference_samples = get_or<long>(blk, "reference_samples", so.reference_samples, "mcstudy");
    so.warmup_fraction = get_or<double>(blk, "warmup_fraction", so.warmup_fraction, "mcstudy");
    so.allow_unstable = ctx.allow_unstable;
    so.fit.n_starts = get_or<int>(blk, "starts", so.fit.n_starts, "mcstudy");
    so.fit.coarse_tol = get_or<double>(blk, "coarse_tol", so.fit.coarse_tol, "mcstudy");
    const StudyReport rep = mc_moment_study(ctx.spec, ctx.theta, so);

    json out = ctx.stamp();
    out["theta_star"] = named(ctx.spec, ctx.theta);
    json hs = json::array();
    bool flagged = false;
    for (const auto& h : rep.horizons) {
        flagged = flagged || h.failure_flag;
        json moments = json::array();
        for (const auto& m : h.moments) {
            moments.push_back({{"name", m.name}, {"empirical", m.empirical}, {"std_err", m.std_err},
                               {"reference", m.reference}, {"reference_std_err", m.reference_std_err}});
        }
        json reps = json::array();
        for (const auto& r : h.replications) {
            json rj = {{"index", r.index}, {"ok", r.ok}};
            if (r.ok) {
                rj["theta_hat"] = vec(r.theta_hat);
                rj["events"] = r.n_events;
                rj["converged"] = r.converged;
                rj["l_hat"] = r.l_hat;
                rj["l_true"] = r.l_true;
            } else {
                rj["error"] = r.error;
            }
            reps.push_back(rj);
        }
        hs.push_back({{"horizon", h.horizon}, {"n_ok", h.n_ok}, {"n_failed", h.n_failed},
                      {"failure_flag", h.failure_flag}, {"mean_s", vec(h.mean_s)}, {"se_mean_s", vec(h.se_mean_s)},
                      {"cov_s", mat(h.cov_s)}, {"gamma_bar", mat(h.gamma_bar)}, {"moments", moments},
                      {"coverage", vec(h.coverage)}, {"coverage_n", h.coverage_n},
                      {"dominance_violations", h.dominance_violations}, {"replications", reps}});
    }
    out["horizons"] = hs;
    ctx.write_json("mcstudy.json", out);
    const std::string table = format_study_table(rep, ctx.spec);
    ctx.write("mcstudy.txt", table);
    std::cout << table;
    return flagged ? 1 : 0;
}

Context load_context(const std::string& command, const std::string& config_path, std::optional<std::uint64_t> seed,
                     std::optional<int> workers, bool allow_unstable) {
    Context ctx;
    ctx.command = command;
    const fs::path cfg(config_path);
    if (!fs::exists(cfg)) throw Error(ErrorKind::InvalidInput, "config file '" + config_path + "' does not exist");
    ctx.base = fs::absolute(cfg).parent_path();
    const std::string text = read_text_file(config_path);
    try {
        ctx.config = json::parse(text);
    } catch (const json::parse_error& e) {
        bad_config(std::string("not valid JSON: ") + e.what());
    }
    only_keys(ctx.config, "document",
              {"schema", "model", "output", "seed", "workers", "theta", "simulate", "fit", "bayes", "diagnose",
               "stability", "mcstudy"});
    if (get_or<std::string>(ctx.config, "schema", "", "document") != kRunSchema) {
        bad_config("schema must be \"" + std::string(kRunSchema) + "\"");
    }
    if (!ctx.config.contains("model") || !ctx.config.at("model").is_string()) bad_config("model path is required");
    const fs::path model_path = ctx.resolve(ctx.config.at("model").get<std::string>());
    if (!fs::exists(model_path)) {
        throw Error(ErrorKind::InvalidInput, "model file '" + model_path.string() + "' does not exist");
    }
    const std::string model_text = read_text_file(model_path.string());
    ctx.spec = load_model(model_path.string());
    ctx.theta = ctx.spec.initial();
    if (ctx.config.contains("theta")) ctx.theta = parse_theta(ctx.config.at("theta"), ctx.spec, ctx.theta, "theta");
    if (!ctx.spec.in_box(ctx.theta)) throw Error(ErrorKind::Domain, "theta lies outside the parameter box");
    ctx.seed = seed ? *seed : get_or<std::uint64_t>(ctx.config, "seed", 0, "document");
    ctx.workers = workers ? *workers : get_or<int>(ctx.config, "workers", 1, "document");
    if (ctx.workers < 1) bad_config("workers must be >= 1");
    ctx.allow_unstable = allow_unstable;
    ctx.hash = hex64(fnv1a64(model_text, fnv1a64(text)));
    ctx.output = ctx.resolve(get_or<std::string>(ctx.config, "output", "out", "document"));
    std::error_code ec;
    fs::create_directories(ctx.output, ec);
    if (ec || !fs::is_directory(ctx.output)) {
        throw Error(ErrorKind::InvalidInput, "cannot create output directory '" + ctx.output.string() + "'");
    }
    return ctx;
}

std::string timestamp() {
    const std::time_t t = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

int run(const std::string& command, const std::string& config_path, std::optional<std::uint64_t> seed,
        std::optional<int> workers, bool allow_unstable) {
    Context ctx = load_context(command, config_path, seed, workers, allow_unstable);
    OutputLock lock(ctx.output);
    const std::string started = timestamp();
    const auto t0 = std::chrono::steady_clock::now();
    int code = 0;
    if (command == "simulate") code = cmd_simulate(ctx);
    else if (command == "fit") code = cmd_fit(ctx);
    else if (command == "bayes") code = cmd_bayes(ctx);
    else if (command == "diagnose") code = cmd_diagnose(ctx);
    else if (command == "stability") code = cmd_stability(ctx);
    else if (command == "mcstudy") code = cmd_mcstudy(ctx);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest = ctx.stamp();
    manifest["started"] = started;
    manifest["wall_seconds"] = wall;
    manifest["workers"] = ctx.workers;
    manifest["theta"] = named(ctx.spec, ctx.theta);
    manifest["files"] = ctx.written;
    manifest["exit_code"] = code;
    ctx.write_json("manifest_" + command + ".json", manifest);
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation, estimation and diagnostics for marked Hawkes processes with matrix-exponential kernels"};
    app.require_subcommand(1, 1);
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool allow_unstable = false;
    for (const char* name : {"simulate", "fit", "bayes", "diagnose", "stability", "mcstudy"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "run configuration (JSON, schema gemhp/run-v1)")->required();
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--allow-unstable", allow_unstable, "proceed even when the stability check fails");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, config, seed, workers, allow_unstable);
    } catch (const Error& e) {
        std::cerr << "gemhp " << command << ": " << e.what() << "\n";
        return e.is_input_error() ? 2 : 1;
    } catch (const json::exception& e) {
        std::cerr << "gemhp " << command << ": config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "gemhp " << command << ": " << e.what() << "\n";
        return 1;
    }
}
