#include "gemhp/simulator.hpp"

#include "gemhp/error.hpp"

#include <algorithm>
#include <cmath>

namespace gemhp {

namespace {

constexpr double kIntegrityTol = 1e-9;
constexpr int kGridPoints = 32;

double clamp_excitation(double v, int alpha) {
    if (v < -kIntegrityTol) {
        throw Error(ErrorKind::NumericalIntegrity, "excitation of component " + std::to_string(alpha) +
                                                       " is negative (" + std::to_string(v) + ")");
    }
    return std::max(0.0, v);
}

} // namespace

MarkovState MarkovState::zero(const Model& model, Mark x0, double t) {
    model.mark_space().validate(x0);
    return MarkovState{std::vector<double>(model.state_size(), 0.0), std::move(x0), t};
}

Eigen::Map<const Matrix> pair_state(const Model& model, const MarkovState& s, int alpha, int beta) {
    for (const auto& p : model.pairs()) {
        if (p.alpha == alpha && p.beta == beta) return {s.eps.data() + p.offset, p.m, p.m};
    }
    throw Error(ErrorKind::InvalidInput, "no kernel for pair (" + std::to_string(alpha) + ", " +
                                             std::to_string(beta) + ")");
}

std::vector<double> intensity_at(const Model& model, const MarkovState& state, double dt) {
    if (!(dt >= 0.0)) throw Error(ErrorKind::InvalidInput, "intensity_at needs dt >= 0");
    std::vector<double> eps = state.eps;
    Model::Workspace ws(model);
    model.decay(eps, dt, ws);
    std::vector<double> out(static_cast<std::size_t>(model.d()));
    model.excitation(eps, out);
    for (int a = 0; a < model.d(); ++a) {
        out[a] = model.link().apply(model.baseline(a, state.x), clamp_excitation(out[a], a));
    }
    return out;
}

MarkovState apply_jump(const Model& model, const MarkovState& state, double dt, int label, const Mark& y) {
    if (label < 0 || label >= model.d()) throw Error(ErrorKind::InvalidInput, "jump label out of range");
    MarkovState next = state;
    Model::Workspace ws(model);
    model.decay(next.eps, dt, ws);
    model.jump(next.eps, label, y);
    next.x = y;
    next.t = state.t + dt;
    return next;
}

Thinner::Thinner(const Model& model)
    : model_(model), ws_(model), cur_(model.state_size()), tmp_(model.state_size()),
      exc_(static_cast<std::size_t>(model.d())), mu_(static_cast<std::size_t>(model.d())) {
    for (const auto& p : model.pairs()) {
        const auto& k = *model.kernel(p.alpha, p.beta);
        a_fro_.push_back(k.a().norm());
        b_norm2_.push_back(numerics::norm2(k.b()));
        b_growth_.push_back(std::max(0.0, numerics::log_norm(-k.b())));
    }
}

double Thinner::total_intensity(std::span<const double> eps, const Mark& x, std::vector<double>* per) {
    model_.excitation(eps, exc_);
    double total = 0.0;
    for (int a = 0; a < model_.d(); ++a) {
        const double mu = model_.link().apply(model_.baseline(a, x), clamp_excitation(exc_[a], a));
        if (per) (*per)[a] = mu;
        total += mu;
    }
    return total;
}

NextEvent Thinner::next(const MarkovState& state, Rng& rng) {
    cur_ = state.eps;
    double elapsed = 0.0;
    const auto pairs = model_.pairs();
    for (;;) {
        // Envelope over [elapsed, elapsed + w] from the state `cur_`.
        const double mu0 = total_intensity(cur_, state.x, nullptr);
        const double w = mu0 > 0.0 ? std::min(1.0 / mu0, 1.0) : 1.0;
        double grid_max = mu0;
        tmp_ = cur_;
        const double step = w / (kGridPoints - 1);
        for (int k = 1; k < kGridPoints; ++k) {
            model_.decay(tmp_, step, ws_);
            grid_max = std::max(grid_max, total_intensity(tmp_, state.x, nullptr));
        }
        double lipschitz = 0.0;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto& p = pairs[i];
            double eps_fro = 0.0;
            for (int j = 0; j < p.m * p.m; ++j) eps_fro += cur_[p.offset + j] * cur_[p.offset + j];
            lipschitz += a_fro_[i] * b_norm2_[i] * std::exp(b_growth_[i] * w) * std::sqrt(eps_fro);
        }
        const double bound = grid_max + lipschitz * w / kGridPoints;
        if (!(bound > 0.0)) {
            throw Error(ErrorKind::Domain, "total intensity is zero: no further events can occur");
        }
        double pos = 0.0;
        for (;;) {
            pos += rng.exponential(bound);
            if (pos > w) break;
            ++proposals_;
            tmp_ = cur_;
            model_.decay(tmp_, pos, ws_);
            const double mu = total_intensity(tmp_, state.x, &mu_);
            if (mu > bound * (1.0 + 1e-12)) {
                throw Error(ErrorKind::Internal, "thinning envelope violated: intensity " + std::to_string(mu) +
                                                     " above bound " + std::to_string(bound));
            }
            if (rng.uniform() * bound <= mu) {
                NextEvent ev;
                ev.dt = elapsed + pos;
                ev.label = static_cast<int>(rng.categorical(mu_));
                ev.mark = model_.mark_kernel(ev.label).sample(state.x, rng);
                return ev;
            }
        }
        model_.decay(cur_, w, ws_);
        elapsed += w;
    }
}

NextEvent next_event(const Model& model, const MarkovState& state, Rng& rng) {
    Thinner thinner(model);
    return thinner.next(state, rng);
}

std::vector<Mark> stability_probe(const ModelSpec& spec, const Mark& x0) {
    if (!spec.probe.empty()) return spec.probe;
    return {x0.empty() ? spec.default_mark() : x0};
}

EventStream simulate(const ModelSpec& spec, const ThetaVector& theta, const SimulationOptions& opts) {
    if (!(opts.horizon > 0.0) || !std::isfinite(opts.horizon)) {
        throw Error(ErrorKind::InvalidInput, "simulation horizon must be finite and > 0");
    }
    const Model model(spec, theta);
    const Mark x0 = opts.x0.empty() ? spec.default_mark() : opts.x0;
    if (!opts.allow_unstable) {
        const auto report = check_stability_L3(spec, theta, stability_probe(spec, x0));
        if (!report.ok) {
            throw Error(ErrorKind::Domain, "stability check failed (rho_bound = " + std::to_string(report.rho_bound) +
                                               "); pass allow_unstable to simulate anyway");
        }
    }
    const double warmup = opts.warmup < 0.0 ? 0.1 * opts.horizon : opts.warmup;
    const double end = warmup + opts.horizon;

    Rng rng(opts.seed, opts.stream);
    Thinner thinner(model);
    Model::Workspace ws(model);
    MarkovState state = MarkovState::zero(model, x0);

    EventStream out;
    out.horizon = opts.horizon;
    out.d = model.d();
    out.x0 = x0;
    out.seed = opts.seed;
    std::uint64_t n = 0;
    for (;;) {
        const NextEvent ev = thinner.next(state, rng);
        const double t = state.t + ev.dt;
        if (t > end) break;
        if (++n > opts.max_events) {
            throw Error(ErrorKind::Explosion, "event cap of " + std::to_string(opts.max_events) + " exceeded");
        }
        model.decay(state.eps, ev.dt, ws);
        model.jump(state.eps, ev.label, ev.mark);
        if (t > warmup) {
            out.records.push_back(EventRecord{t - warmup, ev.label, ev.mark});
        } else {
            out.x0 = ev.mark;
        }
        state.x = ev.mark;
        state.t = t;
    }
    return out;
}

} // namespace gemhp
