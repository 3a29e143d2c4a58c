#pragma once

#include "gemhp/numerics.hpp"

#include <span>
#include <vector>

namespace gemhp {

/// One term u(s) = P(s) (1 + c cos(xi s) + d sin(xi s)) exp(-r s), with
/// P(s) = sum_k poly[k] s^k.
struct CanonicalTerm {
    std::vector<double> poly;
    double cos_weight{0.0};
    double sin_weight{0.0};
    double frequency{0.0};
    double decay{1.0};

    /// Direct scalar evaluation, independent of the matrix form.
    [[nodiscard]] double value(double s) const;

    [[nodiscard]] bool has_trig() const noexcept {
        return frequency != 0.0 && (cos_weight != 0.0 || sin_weight != 0.0);
    }
};

/// Throws InvalidKernel unless r > 0, xi >= 0, and some coefficient is non-zero.
void validate_term(const CanonicalTerm& term);

/// Temporal kernel h(s) = <A | exp(-s B)>, with every eigenvalue of B in the
/// open right half plane.
class MatExpKernel {
public:
    /// Validates shapes and min_eig_real_part(B) > 0.
    MatExpKernel(Matrix a, Matrix b);

    [[nodiscard]] const Matrix& a() const noexcept { return a_; }
    [[nodiscard]] const Matrix& b() const noexcept { return b_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return a_.rows(); }

    /// B^{-T} A, so that <A | B^{-1} X> = <C | X>.
    [[nodiscard]] const Matrix& resolvent_weight() const noexcept { return c_; }

    /// Smallest real part over the spectrum of B.
    [[nodiscard]] double decay_floor() const noexcept { return decay_floor_; }

private:
    Matrix a_;
    Matrix b_;
    Matrix c_;
    double decay_floor_;
};

/// (A_u, B_u) with <A_u | exp(-s B_u)> = u(s). Dimension 3p+3, reduced to the
/// (p+1) polynomial block when the trigonometric part vanishes.
[[nodiscard]] MatExpKernel build_matexp(const CanonicalTerm& term);

/// Block-diagonal direct sum: evaluates to the sum of the component kernels.
[[nodiscard]] MatExpKernel direct_sum(std::span<const MatExpKernel> parts);

/// Convenience: build_matexp on every term followed by direct_sum.
[[nodiscard]] MatExpKernel build_matexp(std::span<const CanonicalTerm> terms);

[[nodiscard]] double eval_kernel(const MatExpKernel& k, double s);

/// Integral over [0, inf) of the kernel, <A | B^{-1}>.
[[nodiscard]] double kernel_l1(const MatExpKernel& k);

/// exp(-dt B) eps.
[[nodiscard]] Matrix decay_state(const MatExpKernel& k, const Matrix& eps, double dt);

/// Integral over [0, dt] of <A | exp(-s B) eps> = <A | B^{-1}(I - exp(-dt B)) eps>.
[[nodiscard]] double partial_integral(const MatExpKernel& k, const Matrix& eps, double dt);

/// Nonnegativity check for a sum of canonical terms: 512-point grid over
/// [0, 40/r_min] plus a tail envelope beyond it. Throws InvalidKernel on failure.
void check_nonnegative(std::span<const CanonicalTerm> terms, double tolerance = 1e-12);

} // namespace gemhp
