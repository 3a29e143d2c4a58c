#include "gemhp/kernels.hpp"

#include "gemhp/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gemhp {

double CanonicalTerm::value(double s) const {
    double p = 0.0;
    for (auto it = poly.rbegin(); it != poly.rend(); ++it) {
        p = p * s + *it;
    }
    const double osc = 1.0 + cos_weight * std::cos(frequency * s) + sin_weight * std::sin(frequency * s);
    return p * osc * std::exp(-decay * s);
}

void validate_term(const CanonicalTerm& term) {
    if (!(term.decay > 0.0) || !std::isfinite(term.decay)) {
        throw Error(ErrorKind::InvalidKernel, "canonical term decay r must be > 0, got " + std::to_string(term.decay));
    }
    if (!(term.frequency >= 0.0) || !std::isfinite(term.frequency)) {
        throw Error(ErrorKind::InvalidKernel, "canonical term frequency must be >= 0");
    }
    if (term.poly.empty()) {
        throw Error(ErrorKind::InvalidKernel, "canonical term needs at least one polynomial coefficient");
    }
    bool nonzero = false;
    for (double a : term.poly) {
        if (!std::isfinite(a)) throw Error(ErrorKind::InvalidKernel, "non-finite polynomial coefficient");
        nonzero = nonzero || a != 0.0;
    }
    if (!std::isfinite(term.cos_weight) || !std::isfinite(term.sin_weight)) {
        throw Error(ErrorKind::InvalidKernel, "non-finite trigonometric weight");
    }
    if (!nonzero) {
        throw Error(ErrorKind::InvalidKernel, "canonical term is identically zero");
    }
}

MatExpKernel::MatExpKernel(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
    numerics::require_square_finite(a_, "kernel A");
    numerics::require_square_finite(b_, "kernel B");
    if (a_.rows() != b_.rows()) {
        throw Error(ErrorKind::InvalidKernel, "kernel A and B dimensions differ");
    }
    decay_floor_ = numerics::min_eig_real_part(b_);
    if (!(decay_floor_ > 0.0)) {
        throw Error(ErrorKind::InvalidKernel,
                    "kernel B must have eigenvalues with positive real parts (min = " +
                        std::to_string(decay_floor_) + ")");
    }
    c_ = b_.transpose().partialPivLu().solve(a_);
}

MatExpKernel build_matexp(const CanonicalTerm& term) {
    validate_term(term);
    const auto n = static_cast<Eigen::Index>(term.poly.size()); // p + 1
    Matrix pi = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        pi(k, k) = term.decay;
        if (k > 0) pi(k, k - 1) = -static_cast<double>(k);
    }
    const Eigen::Map<const Vector> poly(term.poly.data(), n);
    if (!term.has_trig()) {
        // Only the first column of A carries weight: b = e_1. With xi = 0 the
        // oscillating factor is the constant 1 + c.
        const double scale = term.frequency == 0.0 ? 1.0 + term.cos_weight : 1.0;
        Matrix a = Matrix::Zero(n, n);
        a.col(0) = scale * poly;
        return MatExpKernel(std::move(a), std::move(pi));
    }
    const Eigen::Index m = 3 * n;
    Matrix b = Matrix::Zero(m, m);
    b.block(0, 0, n, n) = pi;
    b.block(n, n, n, n) = pi;
    b.block(2 * n, 2 * n, n, n) = pi;
    b.block(n, 2 * n, n, n) = term.frequency * Matrix::Identity(n, n);
    b.block(2 * n, n, n, n) = -term.frequency * Matrix::Identity(n, n);
    Vector av(m);
    av << poly, term.cos_weight * poly, term.sin_weight * poly;
    Vector bv = Vector::Zero(m);
    bv(0) = 1.0;
    bv(n) = 1.0;
    return MatExpKernel(av * bv.transpose(), std::move(b));
}

MatExpKernel direct_sum(std::span<const MatExpKernel> parts) {
    if (parts.empty()) {
        throw Error(ErrorKind::InvalidKernel, "direct_sum of zero kernels");
    }
    if (parts.size() == 1) return parts.front();
    Eigen::Index m = 0;
    for (const auto& p : parts) m += p.dim();
    Matrix a = Matrix::Zero(m, m);
    Matrix b = Matrix::Zero(m, m);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        a.block(off, off, p.dim(), p.dim()) = p.a();
        b.block(off, off, p.dim(), p.dim()) = p.b();
        off += p.dim();
    }
    return MatExpKernel(std::move(a), std::move(b));
}

MatExpKernel build_matexp(std::span<const CanonicalTerm> terms) {
    std::vector<MatExpKernel> parts;
    parts.reserve(terms.size());
    for (const auto& t : terms) parts.push_back(build_matexp(t));
    return direct_sum(parts);
}

double eval_kernel(const MatExpKernel& k, double s) {
    if (!(s >= 0.0)) throw Error(ErrorKind::Domain, "eval_kernel: s must be >= 0");
    if (k.dim() == 1) return k.a()(0, 0) * std::exp(-s * k.b()(0, 0));
    return numerics::inner(k.a(), numerics::mat_exp(-s * k.b()));
}

double kernel_l1(const MatExpKernel& k) {
    return k.resolvent_weight().trace();
}

Matrix decay_state(const MatExpKernel& k, const Matrix& eps, double dt) {
    if (eps.rows() != k.dim() || eps.cols() != k.dim()) {
        throw Error(ErrorKind::InvalidInput, "decay_state: state dimension mismatch");
    }
    if (!(dt >= 0.0)) throw Error(ErrorKind::Domain, "decay_state: dt must be >= 0");
    if (dt == 0.0) return eps;
    return numerics::mat_exp(-dt * k.b()) * eps;
}

double partial_integral(const MatExpKernel& k, const Matrix& eps, double dt) {
    if (dt == 0.0) return 0.0;
    const Matrix decayed = decay_state(k, eps, dt);
    return numerics::inner(k.resolvent_weight(), eps - decayed);
}

namespace {

bool provably_nonnegative(const CanonicalTerm& t) {
    const bool poly_ok = std::all_of(t.poly.begin(), t.poly.end(), [](double a) { return a >= 0.0; });
    const bool osc_ok = t.frequency == 0.0 ? 1.0 + t.cos_weight >= 0.0
                                           : std::hypot(t.cos_weight, t.sin_weight) <= 1.0;
    return poly_ok && osc_ok;
}

double envelope(std::span<const CanonicalTerm> terms, double s) {
    double e = 0.0;
    for (const auto& t : terms) {
        double p = 0.0;
        for (auto it = t.poly.rbegin(); it != t.poly.rend(); ++it) p = p * s + std::abs(*it);
        const double osc = 1.0 + std::abs(t.cos_weight) + std::abs(t.sin_weight);
        e += p * osc * std::exp(-t.decay * s);
    }
    return e;
}

} // namespace

void check_nonnegative(std::span<const CanonicalTerm> terms, double tolerance) {
    if (terms.empty()) return;
    for (const auto& t : terms) validate_term(t);
    if (std::all_of(terms.begin(), terms.end(), provably_nonnegative)) return;

    double r_min = terms.front().decay;
    double monotone_from = 0.0; // envelope is decreasing beyond this point
    for (const auto& t : terms) {
        r_min = std::min(r_min, t.decay);
        monotone_from = std::max(monotone_from, static_cast<double>(t.poly.size() - 1) / t.decay);
    }
    const auto sum_at = [&](double s) {
        double v = 0.0;
        for (const auto& t : terms) v += t.value(s);
        return v;
    };
    constexpr int kGrid = 512;
    double lo = 0.0;
    double hi = 40.0 / r_min;
    for (int extension = 0; extension < 16; ++extension) {
        for (int i = 0; i < kGrid; ++i) {
            const double s = lo + (hi - lo) * i / (kGrid - 1);
            const double v = sum_at(s);
            if (v < -tolerance) {
                throw Error(ErrorKind::InvalidKernel,
                            "kernel takes negative value " + std::to_string(v) + " at s = " + std::to_string(s));
            }
        }
        if (hi >= monotone_from && envelope(terms, hi) <= tolerance) return;
        lo = hi;
        hi *= 2.0;
    }
    throw Error(ErrorKind::InvalidKernel, "kernel nonnegativity could not be certified on the tail");
}

} // namespace gemhp
