#include "gemhp/optimize.hpp"

#include "gemhp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gemhp::optimize {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe(double v) { return std::isfinite(v) ? v : kInf; }

} // namespace

Result nelder_mead(const Objective& f, const Vector& x0, const Box& box, const NelderMeadOptions& opts) {
    const Eigen::Index n = x0.size();
    Result res;
    const auto eval = [&](const Vector& x) {
        ++res.evaluations;
        return safe(f(x));
    };

    std::vector<Vector> pts(static_cast<std::size_t>(n + 1), box.project(x0));
    const Vector width = box.width();
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector& p = pts[static_cast<std::size_t>(j + 1)];
        const double step = opts.initial_step * width(j);
        // Step away from the nearer bound so the vertex stays distinct.
        p(j) += (p(j) + step <= box.upper(j)) ? step : -step;
        p = box.project(p);
    }
    std::vector<double> fv(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) fv[i] = eval(pts[i]);

    std::vector<std::size_t> order(pts.size());
    const auto diameter = [&] {
        double dmax = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            dmax = std::max(dmax, (pts[order[i]] - pts[order[0]]).cwiseAbs().maxCoeff());
        }
        return dmax;
    };

    for (;;) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        res.diameter = diameter();
        if (res.diameter < opts.diameter_tol) {
            res.converged = true;
            break;
        }
        if (res.evaluations >= opts.max_evaluations) break;
        ++res.iterations;

        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];
        Vector centroid = Vector::Zero(n);
        for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += pts[order[i]];
        centroid /= static_cast<double>(n);

        const Vector xr = box.project(centroid + (centroid - pts[worst]));
        const double fr = eval(xr);
        if (fr < fv[best]) {
            const Vector xe = box.project(centroid + 2.0 * (centroid - pts[worst]));
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                fv[worst] = fe;
            } else {
                pts[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            pts[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        const Vector xc = outside ? Vector(box.project(centroid + 0.5 * (xr - centroid)))
                                  : Vector(box.project(centroid + 0.5 * (pts[worst] - centroid)));
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[worst])) {
            pts[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 1; i < order.size(); ++i) {
            const std::size_t k = order[i];
            pts[k] = box.project(pts[best] + 0.5 * (pts[k] - pts[best]));
            fv[k] = eval(pts[k]);
        }
    }
    res.x = pts[order.front()];
    res.f = fv[order.front()];
    return res;
}

Vector projected_gradient(const Vector& g, const Vector& x, const Box& box) {
    Vector pg = g;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
        if ((x(j) <= box.lower(j) && g(j) > 0.0) || (x(j) >= box.upper(j) && g(j) < 0.0)) pg(j) = 0.0;
    }
    return pg;
}

Result bfgs_box(const Objective& f, const Gradient& grad, const Vector& x0, const Box& box,
                const Matrix& inverse_hessian, const BfgsOptions& opts) {
    const Eigen::Index n = x0.size();
    Result res;
    Vector x = box.project(x0);
    double fx = safe(f(x));
    ++res.evaluations;
    Vector g = grad(x);
    Matrix h = Matrix::Identity(n, n);
    if (inverse_hessian.rows() == n && inverse_hessian.cols() == n && inverse_hessian.allFinite() &&
        Eigen::LLT<Matrix>(inverse_hessian).info() == Eigen::Success) {
        h = inverse_hessian;
    }
    for (;;) {
        if (!g.allFinite()) break;
        const Vector pg = projected_gradient(g, x, box);
        res.gradient_norm = pg.cwiseAbs().maxCoeff();
        if (res.gradient_norm < opts.gradient_tol) {
            res.converged = true;
            break;
        }
        if (res.iterations >= opts.max_iterations) break;
        ++res.iterations;

        // Restrict the quasi-Newton step to the free coordinates.
        Vector dir = Vector::Zero(n);
        std::vector<Eigen::Index> free;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (pg(j) != 0.0) free.push_back(j);
        }
        for (Eigen::Index a : free) {
            for (Eigen::Index b : free) dir(a) -= h(a, b) * g(b);
        }
        if (dir.dot(g) >= 0.0) {
            h = Matrix::Identity(n, n);
            dir = -pg;
        }
        double alpha = 1.0;
        Vector xn = x;
        double fn = kInf;
        bool accepted = false;
        for (int k = 0; k < 60; ++k, alpha *= 0.5) {
            xn = box.project(x + alpha * dir);
            fn = safe(f(xn));
            ++res.evaluations;
            if (fn <= fx + 1e-4 * g.dot(xn - x)) {
                accepted = true;
                break;
            }
        }
        if (!accepted || (xn - x).cwiseAbs().maxCoeff() == 0.0) break;
        const Vector gn = grad(xn);
        const Vector s = xn - x;
        const Vector y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Matrix v = Matrix::Identity(n, n) - rho * s * y.transpose();
            h = v * h * v.transpose() + rho * s * s.transpose();
        }
        x = xn;
        fx = fn;
        g = gn;
    }
    res.x = x;
    res.f = fx;
    return res;
}

Matrix latin_hypercube(int count, const Box& box, Rng& rng) {
    if (count < 1) throw Error(ErrorKind::InvalidInput, "latin hypercube needs at least one point");
    const Eigen::Index n = box.lower.size();
    Matrix pts(n, count);
    std::vector<int> perm(static_cast<std::size_t>(count));
    for (Eigen::Index j = 0; j < n; ++j) {
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = count - 1; i > 0; --i) {
            const auto k = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
        }
        for (int i = 0; i < count; ++i) {
            const double u = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / count;
            pts(j, i) = box.lower(j) + u * (box.upper(j) - box.lower(j));
        }
    }
    return pts;
}

} // namespace gemhp::optimize
