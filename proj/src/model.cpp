#include "gemhp/model.hpp"

#include "gemhp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace gemhp {

const char* to_string(FunctionForm f) noexcept {
    switch (f) {
    case FunctionForm::Constant: return "constant";
    case FunctionForm::Affine: return "affine";
    case FunctionForm::Quadratic: return "quadratic";
    case FunctionForm::Log1p: return "log1p";
    case FunctionForm::Table: return "table";
    case FunctionForm::Proportional: return "proportional";
    }
    return "?";
}

FunctionForm function_form_from_string(std::string_view s) {
    for (auto f : {FunctionForm::Constant, FunctionForm::Affine, FunctionForm::Quadratic, FunctionForm::Log1p,
                   FunctionForm::Table, FunctionForm::Proportional}) {
        if (s == to_string(f)) return f;
    }
    throw Error(ErrorKind::InvalidInput, "unknown function form '" + std::string(s) + "'");
}

namespace {

std::size_t arity(FunctionForm f) {
    switch (f) {
    case FunctionForm::Constant: return 1;
    case FunctionForm::Affine: return 2;
    case FunctionForm::Quadratic: return 3;
    case FunctionForm::Log1p: return 2;
    case FunctionForm::Table: return 0; // any positive length
    case FunctionForm::Proportional: return 2;
    }
    return 0;
}

} // namespace

double MarkFunction::operator()(const Mark& x) const {
    switch (form) {
    case FunctionForm::Constant: return coef[0];
    case FunctionForm::Affine: return coef[0] + coef[1] * mark_norm(x);
    case FunctionForm::Quadratic: {
        const double n = mark_norm(x);
        return coef[0] + n * (coef[1] + n * coef[2]);
    }
    case FunctionForm::Log1p: return coef[0] + coef[1] * std::log1p(mark_norm(x));
    case FunctionForm::Table: {
        const auto idx = static_cast<std::size_t>(mark_norm(x));
        return coef[std::min(idx, coef.size() - 1)];
    }
    case FunctionForm::Proportional: {
        const double n = mark_norm(x);
        return coef[0] * n + (n == 0.0 ? coef[1] : 0.0);
    }
    }
    return 0.0;
}

double MarkFunction::infimum(const MarkSpace& space) const {
    switch (form) {
    case FunctionForm::Constant:
    case FunctionForm::Affine:
    case FunctionForm::Quadratic:
    case FunctionForm::Log1p: return coef[0];
    case FunctionForm::Table: return *std::min_element(coef.begin(), coef.end());
    case FunctionForm::Proportional: return space.is_discrete() ? std::min(coef[0], coef[1]) : 0.0;
    }
    return 0.0;
}

MarkFunction MarkFunctionTemplate::resolve(const ThetaVector& theta) const {
    MarkFunction f;
    f.form = form;
    f.coef.resize(coef.size());
    for (std::size_t i = 0; i < coef.size(); ++i) {
        f.coef[i] = coef[i].at(theta);
        if (!(f.coef[i] >= 0.0) || !std::isfinite(f.coef[i])) {
            throw Error(ErrorKind::InvalidKernel, std::string(to_string(form)) + " function coefficient " +
                                                      std::to_string(i) + " must be finite and >= 0");
        }
    }
    return f;
}

CanonicalTerm TermTemplate::resolve(const ThetaVector& theta) const {
    CanonicalTerm t;
    t.poly.reserve(poly.size());
    for (const auto& s : poly) t.poly.push_back(s.at(theta));
    t.cos_weight = cos_weight.at(theta);
    t.sin_weight = sin_weight.at(theta);
    t.frequency = frequency.at(theta);
    t.decay = decay.at(theta);
    return t;
}

MarkKernel MarkKernelTemplate::resolve(const ThetaVector& theta, const MarkSpace& space) const {
    switch (family) {
    case MarkFamily::IidGaussian: return MarkKernel::iid_gaussian(mean.at(theta), sd.at(theta), space.dim);
    case MarkFamily::GaussianAr1:
        return MarkKernel::gaussian_ar1(mean.at(theta), coef.at(theta), sd.at(theta), space.dim);
    case MarkFamily::IidCategorical: {
        std::vector<double> w;
        w.reserve(weights.size());
        for (const auto& s : weights) w.push_back(s.at(theta));
        return MarkKernel::iid_categorical(std::move(w));
    }
    case MarkFamily::QueueReactiveDirac: return MarkKernel::queue_reactive(step);
    case MarkFamily::Custom: return MarkKernel::custom(custom);
    }
    throw Error(ErrorKind::Internal, "unknown mark family");
}

double Link::apply(double baseline, double excitation) const noexcept {
    if (kind == Kind::Linear) return baseline + excitation;
    return baseline + cap * std::tanh(excitation / cap);
}

ThetaVector ModelSpec::lower() const {
    ThetaVector v(n_params());
    for (int i = 0; i < n_params(); ++i) v(i) = parameters[i].lower;
    return v;
}

ThetaVector ModelSpec::upper() const {
    ThetaVector v(n_params());
    for (int i = 0; i < n_params(); ++i) v(i) = parameters[i].upper;
    return v;
}

ThetaVector ModelSpec::initial() const {
    ThetaVector v(n_params());
    for (int i = 0; i < n_params(); ++i) v(i) = parameters[i].value;
    return v;
}

bool ModelSpec::in_box(const ThetaVector& theta) const {
    if (theta.size() != n_params()) return false;
    for (int i = 0; i < n_params(); ++i) {
        if (!(theta(i) >= parameters[i].lower && theta(i) <= parameters[i].upper)) return false;
    }
    return true;
}

int ModelSpec::parameter_index(std::string_view name) const {
    for (int i = 0; i < n_params(); ++i) {
        if (parameters[i].name == name) return i;
    }
    return -1;
}

Mark ModelSpec::default_mark() const {
    if (!x0.empty()) return x0;
    return Mark(static_cast<std::size_t>(marks.dim), 0.0);
}

namespace {

void check_slot(const Slot& s, int n, const char* where) {
    if (s.is_param() && s.index >= n) {
        throw Error(ErrorKind::InvalidInput, std::string(where) + ": parameter index out of range");
    }
    if (!s.is_param() && !std::isfinite(s.constant)) {
        throw Error(ErrorKind::InvalidInput, std::string(where) + ": non-finite constant");
    }
}

void check_function(const MarkFunctionTemplate& f, int n, const MarkSpace& space, const char* where) {
    const std::size_t k = arity(f.form);
    if ((k == 0 && f.coef.empty()) || (k != 0 && f.coef.size() != k)) {
        throw Error(ErrorKind::InvalidInput, std::string(where) + ": " + to_string(f.form) + " takes " +
                                                 (k == 0 ? std::string("at least one") : std::to_string(k)) +
                                                 " coefficient(s)");
    }
    if ((f.form == FunctionForm::Table || f.form == FunctionForm::Proportional) && !space.is_discrete()) {
        throw Error(ErrorKind::InvalidInput, std::string(where) + ": " + to_string(f.form) +
                                                 " form requires integer marks");
    }
    for (const auto& s : f.coef) check_slot(s, n, where);
}

template <class F>
void for_each_slot(const ModelSpec& spec, F&& f) {
    // f(slot, context) with context: 0 baseline, 1 + 2p boost of kernel p,
    // 2 + 2p polynomial of kernel p, -1 anything else.
    for (const auto& b : spec.baselines) {
        for (const auto& s : b.coef) f(s, 0);
    }
    for (std::size_t p = 0; p < spec.kernels.size(); ++p) {
        const auto& k = spec.kernels[p];
        for (const auto& s : k.boost.coef) f(s, static_cast<int>(1 + 2 * p));
        for (const auto& t : k.terms) {
            for (const auto& s : t.poly) f(s, static_cast<int>(2 + 2 * p));
            f(t.cos_weight, -1);
            f(t.sin_weight, -1);
            f(t.frequency, -1);
            f(t.decay, -1);
        }
    }
    for (const auto& m : spec.mark_kernels) {
        f(m.mean, -1);
        f(m.coef, -1);
        f(m.sd, -1);
        for (const auto& s : m.weights) f(s, -1);
    }
}

} // namespace

void ModelSpec::validate() const {
    const int n = n_params();
    if (d < 1) throw Error(ErrorKind::InvalidInput, "model needs at least one component");
    std::set<std::string_view> names;
    for (const auto& p : parameters) {
        if (p.name.empty() || !names.insert(p.name).second) {
            throw Error(ErrorKind::InvalidInput, "parameter names must be non-empty and unique ('" + p.name + "')");
        }
        if (!std::isfinite(p.lower) || !std::isfinite(p.upper) || !(p.lower < p.upper)) {
            throw Error(ErrorKind::InvalidInput, "parameter '" + p.name + "' needs finite lower < upper");
        }
        if (!(p.value >= p.lower && p.value <= p.upper)) {
            throw Error(ErrorKind::InvalidInput, "parameter '" + p.name + "' value outside its bounds");
        }
    }
    if (static_cast<int>(baselines.size()) != d) {
        throw Error(ErrorKind::InvalidInput, "need one baseline per component");
    }
    if (static_cast<int>(mark_kernels.size()) != d) {
        throw Error(ErrorKind::InvalidInput, "need one mark kernel per component");
    }
    for (const auto& b : baselines) check_function(b, n, marks, "baseline");
    std::set<std::pair<int, int>> seen;
    for (const auto& k : kernels) {
        if (k.target < 0 || k.target >= d || k.source < 0 || k.source >= d) {
            throw Error(ErrorKind::InvalidInput, "kernel target/source out of range");
        }
        if (!seen.insert({k.target, k.source}).second) {
            throw Error(ErrorKind::InvalidInput, "duplicate kernel for pair (" + std::to_string(k.target) + ", " +
                                                     std::to_string(k.source) + ")");
        }
        if (k.terms.empty()) throw Error(ErrorKind::InvalidInput, "kernel needs at least one term");
        for (const auto& t : k.terms) {
            if (t.poly.empty()) throw Error(ErrorKind::InvalidInput, "kernel term needs a polynomial");
            for (const auto& s : t.poly) check_slot(s, n, "kernel poly");
            check_slot(t.cos_weight, n, "kernel c");
            check_slot(t.sin_weight, n, "kernel d");
            check_slot(t.frequency, n, "kernel xi");
            check_slot(t.decay, n, "kernel r");
        }
        check_function(k.boost, n, marks, "boost");
    }
    for (const auto& m : mark_kernels) {
        switch (m.family) {
        case MarkFamily::IidGaussian:
        case MarkFamily::GaussianAr1:
            if (marks.kind != MarkSpace::Kind::Continuous) {
                throw Error(ErrorKind::InvalidInput, std::string(to_string(m.family)) + " needs continuous marks");
            }
            break;
        case MarkFamily::IidCategorical:
            if (marks.kind != MarkSpace::Kind::Categorical ||
                static_cast<int>(m.weights.size()) != marks.levels) {
                throw Error(ErrorKind::InvalidInput, "iid-categorical needs categorical marks with one weight per level");
            }
            break;
        case MarkFamily::QueueReactiveDirac:
            if (marks.kind != MarkSpace::Kind::DiscreteInteger) {
                throw Error(ErrorKind::InvalidInput, "queue-reactive-dirac needs discrete integer marks");
            }
            if (m.step != 1 && m.step != -1) throw Error(ErrorKind::InvalidInput, "queue-reactive step must be +/-1");
            break;
        case MarkFamily::Custom:
            if (!m.custom.sample || !m.custom.log_density) {
                throw Error(ErrorKind::InvalidInput, "custom mark kernel needs sampler and density");
            }
            break;
        }
        check_slot(m.mean, n, "marks mean");
        check_slot(m.coef, n, "marks coef");
        check_slot(m.sd, n, "marks sd");
        for (const auto& s : m.weights) check_slot(s, n, "marks weights");
    }
    if (!(floors.r_min > 0.0) || !(floors.phi_min >= 0.0) || !(floors.g_min >= 0.0)) {
        throw Error(ErrorKind::InvalidInput, "floors must satisfy r_min > 0, phi_min >= 0, g_min >= 0");
    }
    if (link.kind == Link::Kind::Saturating && !(link.cap > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "saturating link needs cap > 0");
    }
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for_each_slot(*this, [&](const Slot& s, int) {
        if (s.is_param()) used[static_cast<std::size_t>(s.index)] = true;
    });
    for (int i = 0; i < n; ++i) {
        if (!used[static_cast<std::size_t>(i)]) {
            throw Error(ErrorKind::InvalidInput, "parameter '" + parameters[i].name + "' is never used");
        }
    }
    if (!x0.empty()) marks.validate(x0);
    for (const auto& x : probe) marks.validate(x);
}

std::vector<bool> ModelSpec::linear_parameters() const {
    const auto n = static_cast<std::size_t>(n_params());
    std::vector<bool> nonlinear(n, link.kind != Link::Kind::Linear);
    std::vector<std::set<int>> contexts(n);
    for_each_slot(*this, [&](const Slot& s, int ctx) {
        if (!s.is_param()) return;
        const auto i = static_cast<std::size_t>(s.index);
        if (ctx < 0) {
            nonlinear[i] = true;
        } else {
            contexts[i].insert(ctx);
        }
    });
    std::vector<bool> linear(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (nonlinear[i]) continue;
        bool ok = true;
        // Boost and polynomial of the same kernel multiply each other.
        for (int ctx : contexts[i]) {
            if (ctx >= 1 && ctx % 2 == 1 && contexts[i].count(ctx + 1)) ok = false;
        }
        linear[i] = ok;
    }
    return linear;
}

Model::Model(const ModelSpec& spec, const ThetaVector& theta, bool check_box)
    : d_(spec.d), theta_(theta), marks_(spec.marks), link_(spec.link) {
    spec.validate();
    if (theta.size() != spec.n_params()) {
        throw Error(ErrorKind::Domain, "theta has " + std::to_string(theta.size()) + " coordinates, model expects " +
                                           std::to_string(spec.n_params()));
    }
    if (!theta.allFinite()) throw Error(ErrorKind::Domain, "theta has non-finite coordinates");
    if (check_box && !spec.in_box(theta)) {
        throw Error(ErrorKind::Domain, "theta outside the parameter box");
    }
    const auto dd = static_cast<std::size_t>(d_) * static_cast<std::size_t>(d_);
    kernels_.assign(dd, std::nullopt);
    boosts_.assign(dd, MarkFunction{FunctionForm::Constant, {0.0}});
    baselines_.reserve(static_cast<std::size_t>(d_));
    for (int a = 0; a < d_; ++a) {
        MarkFunction f = spec.baselines[a].resolve(theta);
        if (f.infimum(marks_) < spec.floors.phi_min) {
            throw Error(ErrorKind::InvalidKernel, "baseline of component " + std::to_string(a) +
                                                      " falls below the floor phi_min");
        }
        baselines_.push_back(std::move(f));
    }
    for (const auto& kt : spec.kernels) {
        std::vector<CanonicalTerm> terms;
        terms.reserve(kt.terms.size());
        for (const auto& tt : kt.terms) {
            CanonicalTerm t = tt.resolve(theta);
            validate_term(t);
            if (t.decay < spec.floors.r_min) {
                throw Error(ErrorKind::InvalidKernel, "decay rate " + std::to_string(t.decay) +
                                                          " below floor r_min = " + std::to_string(spec.floors.r_min));
            }
            terms.push_back(std::move(t));
        }
        check_nonnegative(terms);
        const auto idx = static_cast<std::size_t>(kt.target * d_ + kt.source);
        kernels_[idx] = build_matexp(terms);
        MarkFunction g = kt.boost.resolve(theta);
        if (g.infimum(marks_) < spec.floors.g_min) {
            throw Error(ErrorKind::InvalidKernel, "boost of pair (" + std::to_string(kt.target) + ", " +
                                                      std::to_string(kt.source) + ") falls below the floor g_min");
        }
        boosts_[idx] = std::move(g);
    }
    mark_kernels_.reserve(static_cast<std::size_t>(d_));
    for (const auto& mk : spec.mark_kernels) mark_kernels_.push_back(mk.resolve(theta, marks_));

    for (int a = 0; a < d_; ++a) {
        for (int b = 0; b < d_; ++b) {
            const auto& k = kernel(a, b);
            if (!k) continue;
            const int m = static_cast<int>(k->dim());
            int group = -1;
            for (std::size_t g = 0; g < group_b_.size(); ++g) {
                if (group_b_[g].rows() == m && group_b_[g] == k->b()) {
                    group = static_cast<int>(g);
                    break;
                }
            }
            if (group < 0) {
                group = static_cast<int>(group_b_.size());
                group_b_.push_back(k->b());
            }
            pairs_.push_back(Pair{a, b, m, state_size_, group});
            state_size_ += static_cast<std::size_t>(m) * static_cast<std::size_t>(m);
        }
    }
}

Model::Workspace::Workspace(const Model& model)
    : dt_(model.group_b_.size(), std::numeric_limits<double>::quiet_NaN()), decay_(model.group_b_.size()) {}

void Model::decay(std::span<double> state, double dt, Workspace& ws, std::span<double> integral) const {
    if (dt == 0.0) return;
    for (std::size_t g = 0; g < group_b_.size(); ++g) {
        if (ws.dt_[g] != dt) {
            const Matrix& b = group_b_[g];
            if (b.rows() == 1) {
                ws.decay_[g].resize(1, 1);
                ws.decay_[g](0, 0) = std::exp(-dt * b(0, 0));
            } else {
                ws.decay_[g] = numerics::mat_exp(-dt * b);
            }
            ws.dt_[g] = dt;
        }
    }
    for (const Pair& p : pairs_) {
        double* e = state.data() + p.offset;
        const Matrix& decay = ws.decay_[static_cast<std::size_t>(p.group)];
        const Matrix& c = kernel(p.alpha, p.beta)->resolvent_weight();
        if (p.m == 1) {
            const double before = e[0];
            const double after = decay(0, 0) * before;
            if (!integral.empty()) integral[p.alpha] += c(0, 0) * (before - after);
            e[0] = after;
        } else {
            Eigen::Map<Matrix> eps(e, p.m, p.m);
            ws.scratch_.resize(p.m, p.m);
            ws.scratch_.noalias() = decay * eps;
            if (!integral.empty()) integral[p.alpha] += c.cwiseProduct(eps - ws.scratch_).sum();
            eps = ws.scratch_;
        }
    }
}

void Model::excitation(std::span<const double> state, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (const Pair& p : pairs_) {
        const double* e = state.data() + p.offset;
        const Matrix& a = kernel(p.alpha, p.beta)->a();
        if (p.m == 1) {
            out[p.alpha] += a(0, 0) * e[0];
        } else {
            out[p.alpha] += a.cwiseProduct(Eigen::Map<const Matrix>(e, p.m, p.m)).sum();
        }
    }
}

void Model::jump(std::span<double> state, int beta, const Mark& y) const {
    for (const Pair& p : pairs_) {
        if (p.beta != beta) continue;
        const double g = boost(p.alpha, p.beta, y);
        double* e = state.data() + p.offset;
        for (int i = 0; i < p.m; ++i) e[i * p.m + i] += g;
    }
}

std::vector<std::optional<MatExpKernel>> intensity_weights(const ModelSpec& spec, const ThetaVector& theta) {
    const Model model(spec, theta);
    std::vector<std::optional<MatExpKernel>> out;
    out.reserve(static_cast<std::size_t>(spec.d * spec.d));
    for (int a = 0; a < spec.d; ++a) {
        for (int b = 0; b < spec.d; ++b) out.push_back(model.kernel(a, b));
    }
    return out;
}

namespace {

constexpr int kMonteCarloSamples = 100'000;
constexpr std::uint64_t kMonteCarloSeed = 0x6a09e667f3bcc908ULL;

struct Expectation {
    double value;
    double std_err;
};

Expectation monte_carlo(const MarkFunction& g, const MarkKernel& q, const Mark& x) {
    Rng rng(kMonteCarloSeed);
    numerics::CompensatedSum s1;
    numerics::CompensatedSum s2;
    for (int i = 0; i < kMonteCarloSamples; ++i) {
        const double v = g(q.sample(x, rng));
        s1.add(v);
        s2.add(v * v);
    }
    const double n = kMonteCarloSamples;
    const double mean = s1.value() / n;
    const double var = std::max(0.0, s2.value() / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

Expectation gaussian_expectation(const MarkFunction& g, double center, double sd) {
    const auto integrand = [&](double y) {
        const double z = (y - center) / sd;
        return g(Mark{y}) * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
    };
    const double lo = center - 12.0 * sd;
    const double hi = center + 12.0 * sd;
    numerics::QuadratureOptions opts;
    opts.tol = 1e-11;
    // |y| has a kink at 0; integrate the two smooth pieces separately.
    if (lo < 0.0 && hi > 0.0) {
        return {numerics::adaptive_quadrature(integrand, lo, 0.0, opts) +
                    numerics::adaptive_quadrature(integrand, 0.0, hi, opts),
                0.0};
    }
    return {numerics::adaptive_quadrature(integrand, lo, hi, opts), 0.0};
}

Expectation boost_expectation(const MarkFunction& g, const MarkKernel& q, const Mark& x) {
    if (g.form == FunctionForm::Constant) return {g.coef[0], 0.0};
    switch (q.family()) {
    case MarkFamily::QueueReactiveDirac: return {g(q.dirac_target(x)), 0.0};
    case MarkFamily::IidCategorical: {
        double s = 0.0;
        const auto& p = q.probabilities();
        for (std::size_t k = 0; k < p.size(); ++k) s += p[k] * g(Mark{static_cast<double>(k)});
        return {s, 0.0};
    }
    case MarkFamily::IidGaussian:
    case MarkFamily::GaussianAr1: {
        if (q.dim() != 1) return monte_carlo(g, q, x);
        double center = q.mean();
        if (q.family() == MarkFamily::GaussianAr1) {
            center += q.coef() * ((x.empty() ? q.mean() : x.front()) - q.mean());
        }
        return gaussian_expectation(g, center, q.sd());
    }
    case MarkFamily::Custom: return monte_carlo(g, q, x);
    }
    return {0.0, 0.0};
}

} // namespace

BoostExpectation expected_boost_G(const ModelSpec& spec, const ThetaVector& theta, const Mark& x) {
    spec.marks.validate(x);
    const Model model(spec, theta);
    BoostExpectation out{Matrix::Zero(spec.d, spec.d), Matrix::Zero(spec.d, spec.d)};
    for (int a = 0; a < spec.d; ++a) {
        for (int b = 0; b < spec.d; ++b) {
            if (!model.kernel(a, b)) continue;
            const Expectation e = boost_expectation(model.boost_function(a, b), model.mark_kernel(b), x);
            if (!std::isfinite(e.value)) {
                throw Error(ErrorKind::Divergence, "expected boost is not finite for pair (" + std::to_string(a) +
                                                       ", " + std::to_string(b) + ")");
            }
            out.g(a, b) = e.value;
            out.std_err(a, b) = e.std_err;
        }
    }
    return out;
}

namespace {

Matrix phi_from(const Model& model, const Matrix& g) {
    Matrix phi = Matrix::Zero(model.d(), model.d());
    for (int a = 0; a < model.d(); ++a) {
        for (int b = 0; b < model.d(); ++b) {
            if (const auto& k = model.kernel(a, b)) phi(a, b) = kernel_l1(*k) * g(a, b);
        }
    }
    return phi;
}

} // namespace

Matrix excitation_matrix_phi(const ModelSpec& spec, const ThetaVector& theta, const Mark& x) {
    const Model model(spec, theta);
    return phi_from(model, expected_boost_G(spec, theta, x).g);
}

StabilityReport check_stability_L3(const ModelSpec& spec, const ThetaVector& theta, std::span<const Mark> probe) {
    if (probe.empty()) throw Error(ErrorKind::InvalidInput, "stability check needs a nonempty probe set");
    const Model model(spec, theta);
    bool iid = true;
    for (int b = 0; b < spec.d; ++b) iid = iid && model.mark_kernel(b).independent_of_x();
    bool constant_boosts = true;
    for (const auto& p : model.pairs()) {
        constant_boosts = constant_boosts && model.boost_function(p.alpha, p.beta).form == FunctionForm::Constant;
    }
    StabilityReport report;
    report.sup_certified = iid || constant_boosts;
    const std::size_t n_probe = iid ? 1 : probe.size();
    report.phi_bar = Matrix::Zero(spec.d, spec.d);
    for (std::size_t i = 0; i < n_probe; ++i) {
        const Matrix phi = phi_from(model, expected_boost_G(spec, theta, probe[i]).g);
        report.phi_bar = report.phi_bar.cwiseMax(phi);
    }
    report.rho_bound = numerics::spectral_radius(report.phi_bar);
    report.ok = report.rho_bound < 1.0;
    if (report.ok) {
        // A tiny positive perturbation makes the Perron vector strictly
        // positive when Phi_bar is reducible; kappa then certifies
        // Phi_bar^T kappa <= rho(Phi_bar + delta) kappa.
        const double delta = 1e-9 * std::max(1.0, report.phi_bar.maxCoeff());
        const Matrix perturbed =
            report.phi_bar.transpose() + Matrix::Constant(spec.d, spec.d, delta);
        report.kappa = numerics::perron_vector(perturbed);
    }
    report.note = report.sup_certified ? "Phi(x) constant in x: sup certified"
                                       : "verified on probe set (" + std::to_string(probe.size()) + " marks)";
    return report;
}

DriftReport check_queue_reactive_drift(const ModelSpec& spec, const ThetaVector& theta) {
    const auto unsupported = [](const std::string& why) {
        return Error(ErrorKind::Unsupported, "queue-reactive drift check: " + why);
    };
    if (spec.d != 3) throw unsupported("needs exactly 3 components");
    int limit = -1;
    std::vector<int> downs;
    for (int a = 0; a < 3; ++a) {
        const auto& mk = spec.mark_kernels[a];
        if (mk.family != MarkFamily::QueueReactiveDirac) throw unsupported("all mark kernels must be queue-reactive-dirac");
        if (mk.step == 1) {
            if (limit >= 0) throw unsupported("needs exactly one +1 component");
            limit = a;
        } else {
            downs.push_back(a);
        }
    }
    if (limit < 0 || downs.size() != 2) throw unsupported("needs one +1 and two -1 components");
    int cancel = -1;
    int market = -1;
    for (int a : downs) {
        if (spec.baselines[a].form == FunctionForm::Proportional) {
            cancel = a;
        } else {
            market = a;
        }
    }
    if (cancel < 0 || market < 0) throw unsupported("needs exactly one -1 component with a proportional baseline");
    if (spec.baselines[limit].form != FunctionForm::Constant) throw unsupported("limit baseline must be constant");
    const MarkFunction limit_f = spec.baselines[limit].resolve(theta);
    const MarkFunction market_f = spec.baselines[market].resolve(theta);
    const MarkFunction cancel_f = spec.baselines[cancel].resolve(theta);
    DriftReport r;
    r.nu_limit = limit_f.coef[0];
    switch (market_f.form) {
    case FunctionForm::Constant: r.nu_market = market_f.coef[0]; break;
    case FunctionForm::Table: r.nu_market = market_f.coef.back(); break;
    default: throw unsupported("market baseline must be constant or a table");
    }
    r.nu_cancel = cancel_f.coef[0];
    r.ok = r.nu_cancel > 0.0;
    if (r.ok) {
        r.threshold = std::max(0L, static_cast<long>(std::ceil((r.nu_limit - r.nu_market) / r.nu_cancel)));
        r.note = "u_X(x) = -nu_L + nu_M + nu_C x > 0 beyond x0";
    } else {
        r.note = "nu_C = 0: no restoring force on the queue";
    }
    return r;
}

} // namespace gemhp
