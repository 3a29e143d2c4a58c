#include "gemhp/estimation.hpp"

#include "gemhp/error.hpp"
#include "gemhp/parallel.hpp"
#include "gemhp/simulator.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace gemhp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kLhsStream = 0x4c48535354415254ULL;
constexpr std::uint64_t kReferenceStream = 0x5245464552454e43ULL;

void check_stream(const EventStream& stream, const ModelSpec& spec) {
    spec.validate();
    if (spec.link.kind != Link::Kind::Linear) {
        throw Error(ErrorKind::Unsupported, "estimation is only available for linear intensities");
    }
    if (stream.d != spec.d) {
        throw Error(ErrorKind::InvalidInput, "stream has d = " + std::to_string(stream.d) + ", model has d = " +
                                                 std::to_string(spec.d));
    }
    stream.validate(spec.marks);
}

optimize::Box box_of(const ModelSpec& spec) { return {spec.lower(), spec.upper()}; }

std::optional<Matrix> spd_inverse(const Matrix& m) {
    if (!m.allFinite()) return std::nullopt;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0)) return std::nullopt;
    return Matrix(es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose());
}

} // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidInput, "normal quantile needs p in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

FitResult fit_qmle(const EventStream& stream, const ModelSpec& spec, const FitOptions& opts) {
    check_stream(stream, spec);
    if (stream.records.empty()) throw Error(ErrorKind::InvalidInput, "cannot fit an empty stream");
    const optimize::Box box = box_of(spec);
    const Vector width = box.width();
    FitResult res;
    res.n_events = stream.size();
    res.horizon = stream.horizon;

    std::vector<Vector> starts;
    if (opts.init) {
        if (opts.init->size() != spec.n_params()) {
            throw Error(ErrorKind::InvalidInput, "init has the wrong number of coordinates");
        }
        Vector x = *opts.init;
        if (!spec.in_box(x)) {
            res.warnings.push_back("init outside the parameter box; projected into its interior");
            for (Eigen::Index j = 0; j < x.size(); ++j) {
                x(j) = std::clamp(x(j), box.lower(j) + 0.01 * width(j), box.upper(j) - 0.01 * width(j));
            }
        }
        starts.push_back(x);
    } else {
        if (opts.n_starts < 1) throw Error(ErrorKind::InvalidInput, "need at least one start");
        Rng rng(opts.seed, kLhsStream);
        const Matrix pts = optimize::latin_hypercube(opts.n_starts, box, rng);
        for (Eigen::Index i = 0; i < pts.cols(); ++i) starts.emplace_back(pts.col(i));
    }

    const optimize::Objective neg_l = [&](const Vector& th) {
        const double l = log_likelihood_value(stream, spec, th);
        return std::isfinite(l) ? -l : kInf;
    };

    std::vector<optimize::Result> coarse(starts.size());
    optimize::NelderMeadOptions coarse_opts = opts.simplex;
    coarse_opts.diameter_tol = std::max(opts.coarse_tol, opts.simplex.diameter_tol);
    parallel_for(starts.size(), opts.workers,
                 [&](std::size_t i) { coarse[i] = optimize::nelder_mead(neg_l, starts[i], box, coarse_opts); });
    std::size_t best = coarse.size();
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        res.evaluations += coarse[i].evaluations;
        if (!std::isfinite(coarse[i].f)) continue;
        ++res.n_restarts_used;
        if (best == coarse.size() || coarse[i].f < coarse[best].f) best = i;
    }
    if (best == coarse.size()) {
        throw Error(ErrorKind::EstimationFailed, "likelihood is non-finite at every start (" +
                                                     std::to_string(starts.size()) + " starts)");
    }

    optimize::NelderMeadOptions fine_opts = opts.simplex;
    fine_opts.initial_step = std::min(opts.simplex.initial_step, 10.0 * coarse_opts.diameter_tol /
                                                                      std::max(1e-300, width.minCoeff()));
    fine_opts.initial_step = std::max(fine_opts.initial_step, 1e-6);
    const optimize::Result fine = optimize::nelder_mead(neg_l, coarse[best].x, box, fine_opts);
    res.evaluations += fine.evaluations;
    res.simplex_diameter = fine.diameter;

    const optimize::Gradient neg_score = [&](const Vector& th) -> Vector { return -score(stream, spec, th).grad; };
    Matrix h0;
    {
        const FisherResult f0 = observed_fisher(stream, spec, fine.x);
        if (auto inv = spd_inverse(stream.horizon * f0.gamma)) h0 = *inv;
    }
    const optimize::Result polished = optimize::bfgs_box(neg_l, neg_score, fine.x, box, h0, opts.polish);
    res.evaluations += polished.evaluations;
    const bool take_polish = std::isfinite(polished.f) && polished.f <= fine.f;
    res.theta_hat = take_polish ? polished.x : fine.x;
    res.l_value = -(take_polish ? polished.f : fine.f);

    const Vector g = score(stream, spec, res.theta_hat).grad;
    res.score_norm = optimize::projected_gradient(-g, res.theta_hat, box).cwiseAbs().maxCoeff();
    res.converged = fine.converged && res.score_norm < opts.polish.gradient_tol;
    if (!res.converged) {
        res.warnings.push_back("not converged: simplex diameter " + std::to_string(fine.diameter) +
                               ", projected score " + std::to_string(res.score_norm));
    }

    const FisherResult fisher = observed_fisher(stream, spec, res.theta_hat);
    res.gamma_T = fisher.gamma;
    res.hessian_asymmetry = fisher.asymmetry;
    if (fisher.boundary_warning) res.warnings.push_back("estimate within finite-difference reach of the box");
    if (auto inv = spd_inverse(stream.horizon * res.gamma_T)) {
        res.cov_hat = *inv;
        res.cov_available = true;
    } else {
        res.cov_hat = Matrix::Constant(spec.n_params(), spec.n_params(), std::numeric_limits<double>::quiet_NaN());
        res.warnings.push_back("observed Fisher matrix not positive definite; covariance unavailable");
    }
    return res;
}

std::optional<std::vector<WaldInterval>> wald_cis(const FitResult& fit, double level) {
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::InvalidInput, "confidence level must be in (0, 1)");
    if (!fit.cov_available) return std::nullopt;
    const double z = normal_quantile(0.5 + level / 2.0);
    std::vector<WaldInterval> out;
    for (Eigen::Index j = 0; j < fit.theta_hat.size(); ++j) {
        const double hw = z * std::sqrt(fit.cov_hat(j, j));
        out.push_back({fit.theta_hat(j) - hw, fit.theta_hat(j) + hw, hw});
    }
    return out;
}

double Prior::log_density(double v) const {
    switch (kind) {
    case Kind::Uniform: return 0.0;
    case Kind::TruncatedNormal: {
        const double z = (v - mean) / sd;
        return -0.5 * z * z;
    }
    case Kind::Custom: {
        const double p = density(v);
        return p > 0.0 ? std::log(p) : -kInf;
    }
    }
    return -kInf;
}

void validate_priors(const ModelSpec& spec, const std::vector<Prior>& priors) {
    if (static_cast<int>(priors.size()) != spec.n_params()) {
        throw Error(ErrorKind::InvalidInput, "need one prior per parameter");
    }
    for (int j = 0; j < spec.n_params(); ++j) {
        const Prior& p = priors[static_cast<std::size_t>(j)];
        const auto& info = spec.parameters[static_cast<std::size_t>(j)];
        if (p.kind == Prior::Kind::TruncatedNormal && (!(p.sd > 0.0) || !std::isfinite(p.mean))) {
            throw Error(ErrorKind::InvalidInput, "prior for '" + info.name + "' needs sd > 0");
        }
        if (p.kind == Prior::Kind::Custom && !p.density) {
            throw Error(ErrorKind::InvalidInput, "custom prior for '" + info.name + "' has no density");
        }
        constexpr int kGrid = 1001;
        for (int i = 0; i < kGrid; ++i) {
            const double v = info.lower + (info.upper - info.lower) * i / (kGrid - 1);
            const double lp = p.log_density(v);
            if (!std::isfinite(lp) || std::exp(lp) <= 0.0) {
                throw Error(ErrorKind::InvalidInput, "prior for '" + info.name + "' is not bounded away from 0 on [" +
                                                         std::to_string(info.lower) + ", " +
                                                         std::to_string(info.upper) + "]");
            }
        }
    }
}

namespace {

double reflect(double v, double lo, double hi) {
    const double w = hi - lo;
    double u = std::fmod(v - lo, 2.0 * w);
    if (u < 0.0) u += 2.0 * w;
    return lo + (u <= w ? u : 2.0 * w - u);
}

double quantile_sorted(const std::vector<double>& s, double p) {
    const double h = (static_cast<double>(s.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

} // namespace

double effective_sample_size(std::span<const double> chain) {
    const std::size_t n = chain.size();
    if (n < 4) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : chain) mean += v;
    mean /= static_cast<double>(n);
    const auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) s += (chain[i] - mean) * (chain[i + lag] - mean);
        return s / static_cast<double>(n);
    };
    const double c0 = autocov(0);
    if (!(c0 > 0.0)) return static_cast<double>(n);
    // Sum of Geyer pair sums, kept positive and non-increasing.
    double sum = 0.0;
    double prev_pair = kInf;
    const std::size_t max_lag = std::min<std::size_t>(n - 2, 10'000);
    for (std::size_t k = 0; 2 * k + 1 <= max_lag; ++k) {
        double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        sum += pair;
        prev_pair = pair;
    }
    const double tau = std::max(1.0, 2.0 * sum - 1.0);
    return static_cast<double>(n) / tau;
}

PosteriorResult fit_qbe(const EventStream& stream, const ModelSpec& spec, const std::vector<Prior>& priors,
                        const McmcOptions& opts) {
    check_stream(stream, spec);
    validate_priors(spec, priors);
    if (opts.draws < 10 || opts.burn_in < 0 || opts.thin < 1) {
        throw Error(ErrorKind::InvalidInput, "mcmc needs draws >= 10, burn_in >= 0, thin >= 1");
    }
    const int n = spec.n_params();
    const optimize::Box box = box_of(spec);
    const Vector width = box.width();
    const auto log_post = [&](const Vector& th) {
        const double l = log_likelihood_value(stream, spec, th);
        if (!std::isfinite(l)) return -kInf;
        double lp = l;
        for (int j = 0; j < n; ++j) lp += priors[static_cast<std::size_t>(j)].log_density(th(j));
        return lp;
    };

    PosteriorResult res;
    Vector x = opts.init ? *opts.init : spec.initial();
    if (x.size() != n) throw Error(ErrorKind::InvalidInput, "mcmc init has the wrong number of coordinates");
    if (!spec.in_box(x)) {
        res.warnings.push_back("init outside the parameter box; projected");
        x = box.project(x);
    }
    double lx = log_post(x);
    if (!std::isfinite(lx)) throw Error(ErrorKind::EstimationFailed, "posterior density is zero at the chain start");

    Matrix cov = opts.proposal_cov ? *opts.proposal_cov : Matrix((width / 100.0).array().square().matrix().asDiagonal());
    if (cov.rows() != n || cov.cols() != n) throw Error(ErrorKind::InvalidInput, "proposal covariance has wrong shape");
    double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(n)));
    const Matrix jitter = (1e-10 * width.array().square()).matrix().asDiagonal();
    Eigen::LLT<Matrix> chol(cov + jitter);
    if (chol.info() != Eigen::Success) throw Error(ErrorKind::InvalidInput, "proposal covariance not positive definite");
    Matrix l_factor = chol.matrixL();

    Rng rng(opts.seed);
    std::vector<Vector> burn;
    burn.reserve(static_cast<std::size_t>(opts.burn_in));
    const int total = opts.burn_in + opts.draws * opts.thin;
    std::vector<std::vector<double>> samples(static_cast<std::size_t>(n));
    long accepted_post = 0;
    long proposed_post = 0;
    Vector z(n);
    for (int it = 0; it < total; ++it) {
        for (int j = 0; j < n; ++j) z(j) = rng.normal();
        Vector y = x + std::exp(log_scale) * (l_factor * z);
        for (int j = 0; j < n; ++j) y(j) = reflect(y(j), box.lower(j), box.upper(j));
        const double ly = log_post(y);
        const bool accept = std::isfinite(ly) && std::log(rng.uniform()) < ly - lx;
        if (accept) {
            x = y;
            lx = ly;
        }
        if (it < opts.burn_in) {
            const double gain = 1.0 / std::pow(static_cast<double>(it) + 10.0, 0.6);
            log_scale += gain * ((accept ? 1.0 : 0.0) - opts.target_acceptance);
            burn.push_back(x);
            if (it >= 999 && (it + 1) % 250 == 0) {
                const std::size_t from = burn.size() / 2;
                const auto m = static_cast<double>(burn.size() - from);
                Vector mu = Vector::Zero(n);
                for (std::size_t i = from; i < burn.size(); ++i) mu += burn[i];
                mu /= m;
                Matrix c = Matrix::Zero(n, n);
                for (std::size_t i = from; i < burn.size(); ++i) c += (burn[i] - mu) * (burn[i] - mu).transpose();
                c /= m;
                Eigen::LLT<Matrix> lc(c + jitter);
                if (lc.info() == Eigen::Success && c.diagonal().minCoeff() > 0.0) l_factor = lc.matrixL();
            }
            continue;
        }
        ++proposed_post;
        accepted_post += accept;
        if ((it - opts.burn_in) % opts.thin == 0) {
            for (int j = 0; j < n; ++j) samples[static_cast<std::size_t>(j)].push_back(x(j));
        }
    }

    res.draws = static_cast<int>(samples.front().size());
    res.acceptance_rate = static_cast<double>(accepted_post) / static_cast<double>(std::max(1L, proposed_post));
    res.mixing_failure = res.acceptance_rate < 0.01;
    if (res.mixing_failure) res.warnings.push_back("chain stuck: acceptance below 0.01 after adaptation");
    res.theta_tilde.resize(n);
    res.posterior_sd.resize(n);
    res.ess.resize(n);
    res.mc_std_err.resize(n);
    res.credible.resize(n, 2);
    for (int j = 0; j < n; ++j) {
        auto& s = samples[static_cast<std::size_t>(j)];
        numerics::CompensatedSum acc;
        for (double v : s) acc.add(v);
        const double mean = acc.value() / static_cast<double>(s.size());
        double var = 0.0;
        for (double v : s) var += (v - mean) * (v - mean);
        var /= static_cast<double>(s.size() - 1);
        res.theta_tilde(j) = mean;
        res.posterior_sd(j) = std::sqrt(var);
        res.ess(j) = effective_sample_size(s);
        res.mc_std_err(j) = res.posterior_sd(j) / std::sqrt(res.ess(j));
        std::vector<double> sorted = s;
        std::sort(sorted.begin(), sorted.end());
        res.credible(j, 0) = quantile_sorted(sorted, 0.025);
        res.credible(j, 1) = quantile_sorted(sorted, 0.975);
    }
    res.ess_ok = res.ess.minCoeff() >= opts.ess_floor;
    if (!res.ess_ok) res.warnings.push_back("effective sample size below floor");
    return res;
}

ThetaVector posterior_mean_quadrature(const EventStream& stream, const ModelSpec& spec,
                                      const std::vector<Prior>& priors, int points_per_axis) {
    check_stream(stream, spec);
    validate_priors(spec, priors);
    const int n = spec.n_params();
    if (n < 1 || n > 2) throw Error(ErrorKind::Unsupported, "quadrature posterior needs 1 or 2 parameters");
    if (points_per_axis < 2) throw Error(ErrorKind::InvalidInput, "quadrature needs at least 2 points per axis");
    const Vector lo = spec.lower();
    const Vector hi = spec.upper();
    const auto node = [&](int j, long i) { return lo(j) + (hi(j) - lo(j)) * (static_cast<double>(i) + 0.5) / points_per_axis; };
    const long total = n == 1 ? points_per_axis : static_cast<long>(points_per_axis) * points_per_axis;
    std::vector<double> logw(static_cast<std::size_t>(total));
    std::vector<Vector> pts(static_cast<std::size_t>(total), Vector(n));
    double max_lw = -kInf;
    for (long k = 0; k < total; ++k) {
        Vector& th = pts[static_cast<std::size_t>(k)];
        th(0) = node(0, k % points_per_axis);
        if (n == 2) th(1) = node(1, k / points_per_axis);
        double lw = log_likelihood_value(stream, spec, th);
        if (!std::isfinite(lw)) lw = -kInf;
        for (int j = 0; j < n; ++j) lw += priors[static_cast<std::size_t>(j)].log_density(th(j));
        logw[static_cast<std::size_t>(k)] = lw;
        max_lw = std::max(max_lw, lw);
    }
    if (!std::isfinite(max_lw)) throw Error(ErrorKind::EstimationFailed, "posterior vanishes on the whole grid");
    numerics::CompensatedSum z;
    std::vector<numerics::CompensatedSum> m(static_cast<std::size_t>(n));
    for (long k = 0; k < total; ++k) {
        const double w = std::exp(logw[static_cast<std::size_t>(k)] - max_lw);
        z.add(w);
        for (int j = 0; j < n; ++j) m[static_cast<std::size_t>(j)].add(w * pts[static_cast<std::size_t>(k)](j));
    }
    ThetaVector mean(n);
    for (int j = 0; j < n; ++j) mean(j) = m[static_cast<std::size_t>(j)].value() / z.value();
    return mean;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finaliser
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct MeanSe {
    double mean;
    double se;
};

MeanSe mean_se(const std::vector<double>& v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    const double var = v.size() > 1 ? s2 / static_cast<double>(v.size() - 1) : 0.0;
    return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

void summarise(HorizonSummary& h, const ModelSpec& spec, const StudyOptions& opts, int horizon_index) {
    const int n = spec.n_params();
    std::vector<const ReplicationOutcome*> ok;
    for (const auto& r : h.replications) {
        if (r.ok) ok.push_back(&r);
    }
    h.n_ok = static_cast<int>(ok.size());
    h.n_failed = static_cast<int>(h.replications.size()) - h.n_ok;
    h.failure_flag = h.n_failed > 0.05 * static_cast<double>(h.replications.size());
    h.mean_s = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
    h.se_mean_s = h.mean_s;
    h.cov_s = Matrix::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
    h.coverage = Vector::Zero(n);
    if (ok.empty()) return;

    const auto m = static_cast<double>(ok.size());
    h.mean_s = Vector::Zero(n);
    for (auto* r : ok) h.mean_s += r->s;
    h.mean_s /= m;
    h.cov_s = Matrix::Zero(n, n);
    for (auto* r : ok) h.cov_s += (r->s - h.mean_s) * (r->s - h.mean_s).transpose();
    h.cov_s /= std::max(1.0, m - 1.0);
    h.se_mean_s = (h.cov_s.diagonal() / m).cwiseSqrt();

    h.gamma_bar = Matrix::Zero(n, n);
    int n_gamma = 0;
    for (auto* r : ok) {
        if (!r->cov_ok) continue;
        h.gamma_bar += r->gamma;
        ++n_gamma;
        for (int j = 0; j < n; ++j) {
            if (std::abs(r->s(j)) / std::sqrt(h.horizon) <= r->wald_half_width(j)) {
                h.coverage(j) += 1.0;
            }
        }
    }
    h.coverage_n = n_gamma;
    if (n_gamma > 0) {
        h.gamma_bar /= n_gamma;
        h.coverage /= n_gamma;
    }
    for (auto* r : ok) h.dominance_violations += (r->l_hat < r->l_true - 1e-6);

    // Empirical E[u(S)].
    std::vector<std::pair<std::string, std::function<double(const Vector&)>>> funcs;
    for (int j = 0; j < n; ++j) {
        const std::string name = spec.parameters[static_cast<std::size_t>(j)].name;
        funcs.emplace_back("S[" + name + "]", [j](const Vector& s) { return s(j); });
    }
    funcs.emplace_back("|S|^2", [](const Vector& s) { return s.squaredNorm(); });
    for (int j = 0; j < n; ++j) {
        const std::string name = spec.parameters[static_cast<std::size_t>(j)].name;
        funcs.emplace_back("S[" + name + "]^4", [j](const Vector& s) { return std::pow(s(j), 4); });
    }

    std::vector<std::vector<double>> ref_values(funcs.size());
    Eigen::LLT<Matrix> llt(h.gamma_bar);
    const bool have_ref = n_gamma > 0 && llt.info() == Eigen::Success;
    if (have_ref) {
        // Gamma^{-1/2} xi in law: solve L^T z = xi with Gamma = L L^T.
        const Matrix lt = llt.matrixU();
        Rng rng(opts.seed, kReferenceStream + static_cast<std::uint64_t>(horizon_index));
        Vector xi(n);
        for (auto& v : ref_values) v.reserve(static_cast<std::size_t>(opts.reference_samples));
        for (long i = 0; i < opts.reference_samples; ++i) {
            for (int j = 0; j < n; ++j) xi(j) = rng.normal();
            const Vector zz = lt.triangularView<Eigen::Upper>().solve(xi);
            for (std::size_t f = 0; f < funcs.size(); ++f) ref_values[f].push_back(funcs[f].second(zz));
        }
    }
    for (std::size_t f = 0; f < funcs.size(); ++f) {
        std::vector<double> emp;
        emp.reserve(ok.size());
        for (auto* r : ok) emp.push_back(funcs[f].second(r->s));
        const MeanSe e = mean_se(emp);
        const MeanSe ref = have_ref ? mean_se(ref_values[f])
                                    : MeanSe{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        h.moments.push_back({funcs[f].first, e.mean, e.se, ref.mean, ref.se});
    }
}

} // namespace

StudyReport mc_moment_study(const ModelSpec& spec, const ThetaVector& theta_star, const StudyOptions& opts) {
    spec.validate();
    if (opts.horizons.empty() || opts.replications < 1) {
        throw Error(ErrorKind::InvalidInput, "study needs at least one horizon and one replication");
    }
    for (double t : opts.horizons) {
        if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorKind::InvalidInput, "study horizons must be > 0");
    }
    if (!opts.allow_unstable) {
        const auto report = check_stability_L3(spec, theta_star, stability_probe(spec, spec.default_mark()));
        if (!report.ok) {
            throw Error(ErrorKind::Domain, "stability check failed at the true parameter (rho_bound = " +
                                               std::to_string(report.rho_bound) + ")");
        }
    }
    const double z = normal_quantile(0.5 + opts.level / 2.0);
    StudyReport report;
    report.theta_star = theta_star;
    report.seed = opts.seed;
    for (std::size_t hi = 0; hi < opts.horizons.size(); ++hi) {
        HorizonSummary h;
        h.horizon = opts.horizons[hi];
        h.replications.resize(static_cast<std::size_t>(opts.replications));
        parallel_for(h.replications.size(), opts.workers, [&](std::size_t r) {
            ReplicationOutcome& out = h.replications[r];
            out.index = static_cast<int>(r);
            const std::uint64_t stream_id = (static_cast<std::uint64_t>(hi) << 32) | r;
            try {
                SimulationOptions so;
                so.horizon = h.horizon;
                so.seed = opts.seed;
                so.stream = stream_id;
                so.warmup = opts.warmup_fraction * h.horizon;
                so.allow_unstable = true;
                const EventStream stream = simulate(spec, theta_star, so);
                out.n_events = stream.size();
                FitOptions fo = opts.fit;
                fo.workers = 1;
                fo.seed = mix_seed(opts.seed, stream_id);
                if (opts.init_at_truth) fo.init = theta_star;
                const FitResult fit = fit_qmle(stream, spec, fo);
                out.theta_hat = fit.theta_hat;
                out.s = std::sqrt(h.horizon) * (fit.theta_hat - theta_star);
                out.gamma = fit.gamma_T;
                out.cov_ok = fit.cov_available;
                out.wald_half_width = z * fit.cov_hat.diagonal().cwiseSqrt();
                out.l_hat = fit.l_value;
                out.l_true = log_likelihood(stream, spec, theta_star).total;
                out.converged = fit.converged;
                out.ok = true;
            } catch (const Error& e) {
                out.ok = false;
                out.error = e.what();
            }
        });
        summarise(h, spec, opts, static_cast<int>(hi));
        report.horizons.push_back(std::move(h));
    }
    return report;
}

std::string format_study_table(const StudyReport& report, const ModelSpec& spec) {
    std::ostringstream os;
    char buf[256];
    for (const auto& h : report.horizons) {
        std::snprintf(buf, sizeof buf, "T = %g   replications ok %d, failed %d%s\n", h.horizon, h.n_ok, h.n_failed,
                      h.failure_flag ? "   [FLAG: > 5% failed]" : "");
        os << buf;
        std::snprintf(buf, sizeof buf, "  %-18s %14s %12s %14s %12s\n", "statistic", "empirical", "std err",
                      "reference", "ref std err");
        os << buf;
        for (const auto& m : h.moments) {
            std::snprintf(buf, sizeof buf, "  %-18s %14.6g %12.4g %14.6g %12.4g\n", m.name.c_str(), m.empirical,
                          m.std_err, m.reference, m.reference_std_err);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "  %-18s %14s\n", "coverage", "");
        os << buf;
        for (int j = 0; j < spec.n_params(); ++j) {
            std::snprintf(buf, sizeof buf, "    %-16s %14.4f  (n = %d)\n",
                          spec.parameters[static_cast<std::size_t>(j)].name.c_str(),
                          h.coverage_n > 0 ? h.coverage(j) : std::numeric_limits<double>::quiet_NaN(), h.coverage_n);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "  argmax dominance violations: %d\n", h.dominance_violations);
        os << buf;
    }
    return os.str();
}

} // namespace gemhp
