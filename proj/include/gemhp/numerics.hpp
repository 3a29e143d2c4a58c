#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>

namespace gemhp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numerics {

inline constexpr Eigen::Index kMaxDim = 256;

/// Throws InvalidInput unless `m` is square, 1 <= dim <= kMaxDim, and finite.
void require_square_finite(const Matrix& m, const char* what);

/// exp(M) by scaling and squaring with the degree-13 Padé approximant.
[[nodiscard]] Matrix mat_exp(const Matrix& m);

/// Eigenvalues via balancing followed by Hessenberg reduction and shifted QR.
[[nodiscard]] Eigen::VectorXcd eigenvalues(const Matrix& m);

[[nodiscard]] double spectral_radius(const Matrix& m);
[[nodiscard]] double min_eig_real_part(const Matrix& m);

/// Logarithmic 2-norm: largest eigenvalue of (M + M^T)/2.
/// Guarantees |exp(tM) v| <= exp(t * log_norm(M)) |v| for t >= 0.
[[nodiscard]] double log_norm(const Matrix& m);

/// Largest singular value.
[[nodiscard]] double norm2(const Matrix& m);

/// Frobenius inner product <A|B> = sum_ij A_ij B_ij.
[[nodiscard]] inline double inner(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

struct QuadratureOptions {
    double tol{1e-10};
    int max_depth{60};
    long max_evaluations{20'000'000};
};

/// Adaptive Simpson on [a, b]. Throws AccuracyError (with best estimate) when
/// the depth or evaluation budget is exhausted before `tol` is met.
[[nodiscard]] double adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                                         const QuadratureOptions& opts = {});

/// Right Perron eigenvector of a nonnegative matrix, normalised to unit 1-norm.
[[nodiscard]] Vector perron_vector(const Matrix& m);

/// Neumaier compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_{0.0};
    double comp_{0.0};
};

} // namespace numerics
} // namespace gemhp
