#include "gemhp/diagnostics.hpp"

#include "gemhp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gemhp {

double ks_statistic_exp1(std::span<const double> sample) {
    if (sample.empty()) throw Error(ErrorKind::InvalidInput, "KS statistic of an empty sample");
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    const auto n = static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = -std::expm1(-std::max(0.0, s[i]));
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double kolmogorov_pvalue(double d, std::size_t n) {
    if (n == 0) throw Error(ErrorKind::InvalidInput, "KS p-value needs n >= 1");
    const double lambda = std::sqrt(static_cast<double>(n)) * d;
    if (lambda < 1e-3) return 1.0;
    if (lambda < 1.18) {
        // Theta-function form converges fast for small lambda.
        const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
        double s = 0.0;
        for (int k = 1; k < 50; k += 2) s += std::pow(y, k * k);
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
        p += term;
        if (std::abs(term) < 1e-17) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

double autocorrelation(std::span<const double> x, std::size_t lag) {
    const std::size_t n = x.size();
    if (lag >= n) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    double ck = 0.0;
    for (std::size_t i = 0; i < n; ++i) c0 += (x[i] - mean) * (x[i] - mean);
    for (std::size_t i = 0; i + lag < n; ++i) ck += (x[i] - mean) * (x[i + lag] - mean);
    return c0 > 0.0 ? ck / c0 : 0.0;
}

ResidualReport rescaled_residuals(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta) {
    const Model model(spec, theta);
    const Matrix path = compensator_path(stream, model);
    ResidualReport report;
    for (int a = 0; a < spec.d; ++a) {
        ComponentResiduals c;
        c.component = a;
        double prev = 0.0;
        for (std::size_t i = 0; i < stream.size(); ++i) {
            if (stream.records[i].k != a) continue;
            const double cur = path(static_cast<Eigen::Index>(i), a);
            c.residuals.push_back(cur - prev);
            prev = cur;
        }
        if (c.residuals.size() < 20) {
            c.skipped = true;
            c.note = "fewer than 20 events (" + std::to_string(c.residuals.size()) + ")";
        } else {
            c.ks = ks_statistic_exp1(c.residuals);
            c.p_value = kolmogorov_pvalue(c.ks, c.residuals.size());
            c.lag1_acf = autocorrelation(c.residuals, 1);
        }
        report.components.push_back(std::move(c));
    }
    return report;
}

std::vector<double> excitation_feature(const EventStream& stream, const Model& model, double grid_step) {
    if (!(grid_step > 0.0)) throw Error(ErrorKind::InvalidInput, "grid step must be > 0");
    stream.validate(model.mark_space());
    const auto n_grid = static_cast<std::size_t>(std::floor(stream.horizon / grid_step)) + 1;
    std::vector<double> state(model.state_size(), 0.0);
    std::vector<double> exc(static_cast<std::size_t>(model.d()));
    Model::Workspace ws(model);
    std::vector<double> out;
    out.reserve(n_grid);
    double t = 0.0;
    std::size_t next_ev = 0;
    for (std::size_t k = 0; k < n_grid; ++k) {
        const double tg = static_cast<double>(k) * grid_step;
        // Events at exactly the grid time count as already happened.
        while (next_ev < stream.size() && stream.records[next_ev].t <= tg) {
            const auto& ev = stream.records[next_ev++];
            model.decay(state, ev.t - t, ws);
            model.jump(state, ev.k, ev.x);
            t = ev.t;
        }
        model.decay(state, tg - t, ws);
        t = tg;
        model.excitation(state, exc);
        double f = 0.0;
        for (double v : exc) f += v;
        out.push_back(f);
    }
    return out;
}

MixingReport mixing_probe(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta,
                          double grid_step, int max_lag) {
    if (max_lag < 2) throw Error(ErrorKind::InvalidInput, "mixing probe needs max_lag >= 2");
    const Model model(spec, theta);
    const std::vector<double> feature = excitation_feature(stream, model, grid_step);
    MixingReport r;
    r.grid_step = grid_step;
    double mean = 0.0;
    for (double v : feature) mean += v;
    mean /= static_cast<double>(feature.size());
    double var = 0.0;
    for (double v : feature) var += (v - mean) * (v - mean);
    var /= static_cast<double>(feature.size());
    if (!(var > 1e-300) || feature.size() < static_cast<std::size_t>(max_lag) + 2) {
        r.degenerate = true;
        r.note = var > 1e-300 ? "too few grid points" : "feature has zero variance";
        return r;
    }
    for (int k = 1; k <= max_lag; ++k) r.acf.push_back(autocorrelation(feature, static_cast<std::size_t>(k)));
    std::vector<double> xs;
    std::vector<double> ys;
    for (int k = 0; k < max_lag && std::abs(r.acf[static_cast<std::size_t>(k)]) > 0.02; ++k) {
        xs.push_back((k + 1) * grid_step);
        ys.push_back(std::log(std::abs(r.acf[static_cast<std::size_t>(k)])));
    }
    r.lags_fitted = static_cast<int>(xs.size());
    if (xs.size() < 2) {
        r.note = "autocorrelation below 0.02 by lag 2; decay faster than the grid resolves";
        return r;
    }
    const auto m = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    const double cxx = sxx - sx * sx / m;
    const double cxy = sxy - sx * sy / m;
    const double cyy = syy - sy * sy / m;
    const double slope = cxy / cxx;
    r.decay_rate = -slope;
    r.r_squared = cyy > 0.0 ? (cxy * cxy) / (cxx * cyy) : 1.0;
    return r;
}

namespace {

/// Least-squares quadratic c0 + c1 r + c2 r^2.
Eigen::Vector3d fit_quadratic(const std::vector<double>& r, const std::vector<double>& y) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(r.size()), 3);
    Eigen::VectorXd v(static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        x(k, 0) = 1.0;
        x(k, 1) = r[i];
        x(k, 2) = r[i] * r[i];
        v(k) = y[i];
    }
    return x.colPivHouseholderQr().solve(v);
}

} // namespace

LanReport lan_profile(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta_hat,
                      const std::vector<Vector>& directions, const std::vector<double>& radii,
                      const std::optional<Matrix>& gamma) {
    const Model model(spec, theta_hat);
    const double l0 = log_likelihood(stream, model).total;
    if (!std::isfinite(l0)) throw Error(ErrorKind::Domain, "likelihood is not finite at the centre point");
    LanReport report;
    report.gamma = gamma ? *gamma : observed_fisher(stream, spec, theta_hat).gamma;
    const double root_t = std::sqrt(stream.horizon);
    for (const Vector& raw : directions) {
        if (raw.size() != spec.n_params() || !(raw.norm() > 0.0)) {
            throw Error(ErrorKind::InvalidInput, "LAN directions must be non-zero with one entry per parameter");
        }
        LanDirection dir;
        dir.direction = raw.normalized();
        const double curvature = dir.direction.dot(report.gamma * dir.direction);
        dir.predicted = -0.5 * curvature;
        std::vector<double> grid = radii;
        if (grid.empty()) {
            const double span = curvature > 0.0 ? 2.0 / std::sqrt(curvature) : 1.0;
            for (int i = -4; i <= 4; ++i) grid.push_back(span * i / 4.0);
        }
        for (double r : grid) {
            const ThetaVector th = theta_hat + (r / root_t) * dir.direction;
            if (!spec.in_box(th)) {
                ++dir.dropped;
                continue;
            }
            double lz = 0.0;
            if (r != 0.0) {
                const double l = log_likelihood_value(stream, spec, th);
                if (!std::isfinite(l)) {
                    ++dir.dropped;
                    continue;
                }
                lz = l - l0;
            }
            dir.radii.push_back(r);
            dir.log_z.push_back(lz);
        }
        if (dir.radii.size() >= 3) {
            const Eigen::Vector3d c = fit_quadratic(dir.radii, dir.log_z);
            dir.c0 = c(0);
            dir.c1 = c(1);
            dir.c2 = c(2);
            dir.relative_error = std::abs(dir.c2 - dir.predicted) / std::max(std::abs(dir.predicted), 1e-300);
        } else {
            dir.relative_error = std::numeric_limits<double>::quiet_NaN();
        }
        report.directions.push_back(std::move(dir));
    }
    return report;
}

std::vector<Vector> random_directions(int n, int count, Rng& rng) {
    std::vector<Vector> out;
    for (int i = 0; i < count; ++i) {
        Vector v(n);
        do {
            for (int j = 0; j < n; ++j) v(j) = rng.normal();
        } while (!(v.norm() > 1e-12));
        out.push_back(v.normalized());
    }
    return out;
}

} // namespace gemhp
