#include "gemhp/likelihood.hpp"

#include "gemhp/error.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace gemhp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Trace {
    std::vector<double>* lambda{nullptr}; // lambda^{k_i}(T_i-)
    Matrix* path{nullptr};                // cumulative compensators
};

void check_compatible(const EventStream& stream, const Model& model) {
    if (!model.is_linear()) {
        throw Error(ErrorKind::Unsupported, "likelihood is only available for linear intensities");
    }
    if (stream.d != model.d()) {
        throw Error(ErrorKind::InvalidInput, "stream has d = " + std::to_string(stream.d) + ", model has d = " +
                                                 std::to_string(model.d()));
    }
    stream.validate(model.mark_space());
}

LikelihoodBreakdown run(const EventStream& stream, const Model& model, Trace trace) {
    const int d = model.d();
    const auto du = static_cast<std::size_t>(d);
    std::vector<double> state(model.state_size(), 0.0);
    std::vector<double> integral(du, 0.0);
    std::vector<double> exc(du, 0.0);
    std::vector<numerics::CompensatedSum> lambda_sum(du);
    numerics::CompensatedSum log_sum;
    numerics::CompensatedSum mark_sum;
    Model::Workspace ws(model);
    LikelihoodBreakdown out;
    // compensated sums turn -inf into NaN, so zeros are tracked separately
    bool zero_lambda = false, zero_mark = false;

    const auto flag = [&](const std::string& why) {
        if (out.finite) out.flag = why;
        out.finite = false;
    };
    const auto segment = [&](double dt, const Mark& x) {
        std::fill(integral.begin(), integral.end(), 0.0);
        model.decay(state, dt, ws, integral);
        for (std::size_t a = 0; a < du; ++a) {
            lambda_sum[a].add(model.baseline(static_cast<int>(a), x) * dt + integral[a]);
        }
    };

    if (trace.lambda) trace.lambda->resize(stream.size());
    if (trace.path) trace.path->resize(static_cast<Eigen::Index>(stream.size()) + 1, d);

    Mark x = stream.x0;
    double t_prev = 0.0;
    for (std::size_t i = 0; i < stream.records.size(); ++i) {
        const EventRecord& ev = stream.records[i];
        segment(ev.t - t_prev, x);
        model.excitation(state, exc);
        const double e = exc[static_cast<std::size_t>(ev.k)];
        if (e < -1e-9) {
            throw Error(ErrorKind::NumericalIntegrity, "negative excitation at event " + std::to_string(i));
        }
        const double lambda = model.baseline(ev.k, x) + std::max(0.0, e);
        if (trace.lambda) (*trace.lambda)[i] = lambda;
        if (trace.path) {
            for (int a = 0; a < d; ++a) (*trace.path)(static_cast<Eigen::Index>(i), a) = lambda_sum[a].value();
        }
        if (lambda > 0.0) {
            log_sum.add(std::log(lambda));
        } else {
            zero_lambda = true;
            flag("zero intensity at event " + std::to_string(i));
        }
        const double lm = model.mark_kernel(ev.k).log_density(x, ev.x);
        if (lm > kNegInf) {
            mark_sum.add(lm);
        } else {
            zero_mark = true;
            flag("zero mark density at event " + std::to_string(i));
        }
        model.jump(state, ev.k, ev.x);
        x = ev.x;
        t_prev = ev.t;
    }
    segment(stream.horizon - t_prev, x);

    out.compensators.resize(du);
    numerics::CompensatedSum comp_total;
    for (std::size_t a = 0; a < du; ++a) {
        out.compensators[a] = lambda_sum[a].value();
        comp_total.add(out.compensators[a]);
        if (trace.path) (*trace.path)(static_cast<Eigen::Index>(stream.size()), static_cast<Eigen::Index>(a)) =
            out.compensators[a];
    }
    out.ground = zero_lambda ? kNegInf : log_sum.value() - comp_total.value();
    out.mark = zero_mark ? kNegInf : mark_sum.value();
    out.total = out.ground + out.mark;
    if (!std::isfinite(out.total)) flag(out.flag.empty() ? "non-finite likelihood" : out.flag);
    return out;
}

} // namespace

LikelihoodBreakdown log_likelihood(const EventStream& stream, const Model& model) {
    check_compatible(stream, model);
    return run(stream, model, {});
}

LikelihoodBreakdown log_likelihood(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta) {
    return log_likelihood(stream, Model(spec, theta));
}

Matrix compensator_path(const EventStream& stream, const Model& model) {
    check_compatible(stream, model);
    Matrix path;
    run(stream, model, Trace{nullptr, &path});
    return path;
}

std::vector<double> event_intensities(const EventStream& stream, const Model& model) {
    check_compatible(stream, model);
    std::vector<double> lambda;
    run(stream, model, Trace{&lambda, nullptr});
    return lambda;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

double log_likelihood_value(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta) {
    try {
        const Model model(spec, theta, false);
        const auto b = run(stream, model, {});
        return b.finite ? b.total : kNaN;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidKernel || e.kind() == ErrorKind::Domain) return kNaN;
        throw;
    }
}

namespace {

double loglik_at(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta) {
    return log_likelihood_value(stream, spec, theta);
}

struct Sweep {
    std::vector<double> lambda;
    std::vector<double> comp;
};

std::optional<Sweep> sweep_at(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta) {
    try {
        const Model model(spec, theta, false);
        Sweep s;
        s.comp = run(stream, model, Trace{&s.lambda, nullptr}).compensators;
        return s;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidKernel || e.kind() == ErrorKind::Domain) return std::nullopt;
        throw;
    }
}

/// Exact derivative along a coordinate on which every intensity is affine.
double linear_derivative(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta,
                         const Sweep& base, int j) {
    const double delta = 0.5 * std::max(1.0, std::abs(theta(j)));
    for (double sign : {1.0, -1.0}) {
        ThetaVector shifted = theta;
        shifted(j) += sign * delta;
        const auto moved = sweep_at(stream, spec, shifted);
        if (!moved) continue;
        const double step = shifted(j) - theta(j);
        numerics::CompensatedSum s;
        for (std::size_t i = 0; i < base.lambda.size(); ++i) {
            s.add((moved->lambda[i] - base.lambda[i]) / (step * base.lambda[i]));
        }
        for (std::size_t a = 0; a < base.comp.size(); ++a) s.add(-(moved->comp[a] - base.comp[a]) / step);
        return s.value();
    }
    return kNaN;
}

struct Differences {
    double value;
    double residual;
    bool one_sided;
};

Differences richardson(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta, double l0,
                       int j) {
    const double h = std::max(1e-6, 1e-7 * std::abs(theta(j)));
    const double lo = spec.parameters[j].lower;
    const double hi = spec.parameters[j].upper;
    const auto l_at = [&](double offset) {
        ThetaVector t = theta;
        t(j) += offset;
        return loglik_at(stream, spec, t);
    };
    if (theta(j) - 2 * h >= lo && theta(j) + 2 * h <= hi) {
        const double d1 = (l_at(h) - l_at(-h)) / (2 * h);
        const double d2 = (l_at(h / 2) - l_at(-h / 2)) / h;
        const double r = (4 * d2 - d1) / 3;
        return {r, std::abs(d1 - d2) / std::max(std::abs(r), 1.0), false};
    }
    const double dir = (theta(j) + 2 * h <= hi) ? 1.0 : -1.0;
    const double d1 = (l_at(dir * h) - l0) / (dir * h);
    const double d2 = (l_at(dir * h / 2) - l0) / (dir * h / 2);
    const double r = 2 * d2 - d1;
    return {r, std::abs(d1 - d2) / std::max(std::abs(r), 1.0), true};
}

} // namespace

ScoreResult score(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta) {
    const Model model(spec, theta);
    check_compatible(stream, model);
    const int n = spec.n_params();
    const auto linear = spec.linear_parameters();
    ScoreResult out;
    out.grad = Vector::Zero(n);
    out.residual = Vector::Zero(n);
    out.exact.assign(static_cast<std::size_t>(n), false);
    out.one_sided.assign(static_cast<std::size_t>(n), false);

    std::optional<Sweep> base;
    double l0 = kNaN;
    for (int j = 0; j < n; ++j) {
        if (linear[static_cast<std::size_t>(j)]) {
            if (!base) base = sweep_at(stream, spec, theta);
            bool positive = base.has_value();
            if (positive) {
                for (double v : base->lambda) positive = positive && v > 0.0;
            }
            if (positive) {
                out.grad(j) = linear_derivative(stream, spec, theta, *base, j);
                out.exact[static_cast<std::size_t>(j)] = true;
                continue;
            }
        }
        if (std::isnan(l0)) l0 = loglik_at(stream, spec, theta);
        const Differences r = richardson(stream, spec, theta, l0, j);
        out.grad(j) = r.value;
        out.residual(j) = r.residual;
        out.one_sided[static_cast<std::size_t>(j)] = r.one_sided;
        out.boundary_warning = out.boundary_warning || r.one_sided;
    }
    return out;
}

FisherResult observed_fisher(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta) {
    const int n = spec.n_params();
    FisherResult out;
    out.hessian = Matrix::Zero(n, n);
    std::optional<Vector> g0;
    for (int j = 0; j < n; ++j) {
        const double k = std::max(1e-4, 1e-4 * std::abs(theta(j)));
        // The inner score needs its own margin of 2h on top of k.
        const double margin = k + 4 * std::max(1e-6, 1e-7 * (std::abs(theta(j)) + k));
        const double lo = spec.parameters[j].lower;
        const double hi = spec.parameters[j].upper;
        const auto grad_at = [&](double offset) {
            ThetaVector t = theta;
            t(j) += offset;
            return score(stream, spec, t).grad;
        };
        if (theta(j) - margin >= lo && theta(j) + margin <= hi) {
            out.hessian.col(j) = (grad_at(k) - grad_at(-k)) / (2 * k);
        } else {
            if (!g0) g0 = score(stream, spec, theta).grad;
            const double dir = (theta(j) + margin <= hi) ? 1.0 : -1.0;
            out.hessian.col(j) = (grad_at(dir * k) - *g0) / (dir * k);
            out.boundary_warning = true;
        }
    }
    const double norm = out.hessian.cwiseAbs().rowwise().sum().maxCoeff();
    const double skew = (out.hessian - out.hessian.transpose()).cwiseAbs().rowwise().sum().maxCoeff();
    out.asymmetry = norm > 0.0 ? skew / norm : 0.0;
    const Matrix sym = 0.5 * (out.hessian + out.hessian.transpose());
    out.gamma = -sym / stream.horizon;
    return out;
}

} // namespace gemhp
