#include "gemhp/numerics.hpp"

#include "gemhp/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace gemhp {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::InvalidKernel: return "invalid kernel";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Accuracy: return "accuracy error";
    case ErrorKind::NumericalIntegrity: return "numerical integrity error";
    case ErrorKind::Explosion: return "explosion";
    case ErrorKind::EstimationFailed: return "estimation failed";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Internal: return "internal error";
    }
    return "error";
}

namespace numerics {

void require_square_finite(const Matrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() < 1) {
        throw Error(ErrorKind::InvalidInput, std::string(what) + ": matrix must be square and non-empty");
    }
    if (m.rows() > kMaxDim) {
        throw Error(ErrorKind::InvalidInput,
                    std::string(what) + ": dimension " + std::to_string(m.rows()) + " exceeds cap 256");
    }
    if (!m.allFinite()) {
        throw Error(ErrorKind::InvalidInput, std::string(what) + ": non-finite entries");
    }
}

namespace {

// Higham (2005) degree-13 Padé coefficients.
constexpr double kPade13[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                              1187353796428800.0,  129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,       1323241920.0,
                              40840800.0,          960960.0,            16380.0,
                              182.0,               1.0};
constexpr double kTheta13 = 5.371920351148152;

// Parlett-Reinsch balancing with powers of two; a similarity transform, so the
// spectrum is unchanged while the conditioning of the eigenproblem improves.
Matrix balance(Matrix a) {
    const Eigen::Index n = a.rows();
    constexpr double radix = 2.0;
    bool converged = false;
    for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
        converged = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double c = 0.0;
            double r = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            const double s = c + r;
            double f = 1.0;
            double g = r / radix;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                converged = false;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
    return a;
}

} // namespace

Matrix mat_exp(const Matrix& m) {
    require_square_finite(m, "mat_exp");
    const Eigen::Index n = m.rows();
    if (n == 1) {
        return Matrix::Constant(1, 1, std::exp(m(0, 0)));
    }
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > kTheta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    }
    const Matrix a = m / std::ldexp(1.0, squarings);
    const Matrix id = Matrix::Identity(n, n);
    const Matrix a2 = a * a;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;
    const double* b = kPade13;
    const Matrix u_inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
    const Matrix u = a * (a6 * u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    const Matrix v_inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
    const Matrix v = a6 * v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) {
        r = r * r;
    }
    return r;
}

Eigen::VectorXcd eigenvalues(const Matrix& m) {
    require_square_finite(m, "eigenvalues");
    if (m.rows() == 1) {
        return Eigen::VectorXcd::Constant(1, std::complex<double>(m(0, 0), 0.0));
    }
    Eigen::EigenSolver<Matrix> solver(balance(m), /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorKind::NumericalIntegrity, "eigenvalues: QR iteration did not converge");
    }
    return solver.eigenvalues();
}

double spectral_radius(const Matrix& m) {
    return eigenvalues(m).cwiseAbs().maxCoeff();
}

double min_eig_real_part(const Matrix& m) {
    return eigenvalues(m).real().minCoeff();
}

double log_norm(const Matrix& m) {
    require_square_finite(m, "log_norm");
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().maxCoeff();
}

double norm2(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

namespace {

struct SimpsonState {
    const std::function<double(double)>* f;
    long evaluations{0};
    long max_evaluations{0};
    int max_depth{0};
    bool exhausted{false};
};

double simpson_step(SimpsonState& st, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = (*st.f)(lm);
    const double frm = (*st.f)(rm);
    st.evaluations += 2;
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    if (depth >= st.max_depth || st.evaluations >= st.max_evaluations || m <= a || b <= m) {
        st.exhausted = true;
        return left + right + delta / 15.0;
    }
    return simpson_step(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           simpson_step(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

} // namespace

double adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts) {
    if (!(a <= b) || !std::isfinite(a) || !std::isfinite(b)) {
        throw Error(ErrorKind::InvalidInput, "adaptive_quadrature: need finite a <= b");
    }
    if (a == b) return 0.0;
    SimpsonState st{&f, 0, opts.max_evaluations, opts.max_depth, false};
    // A few initial panels guard against symmetric cancellation on the first split.
    constexpr int kPanels = 8;
    const double h = (b - a) / kPanels;
    CompensatedSum total;
    double x0 = a;
    double f0 = f(a);
    for (int k = 0; k < kPanels; ++k) {
        const double x1 = (k + 1 == kPanels) ? b : a + (k + 1) * h;
        const double xm = 0.5 * (x0 + x1);
        const double fm = f(xm);
        const double f1 = f(x1);
        st.evaluations += 2;
        const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        total.add(simpson_step(st, x0, x1, f0, fm, f1, whole, opts.tol / kPanels, 1));
        x0 = x1;
        f0 = f1;
    }
    const double result = total.value();
    if (!std::isfinite(result)) {
        throw Error(ErrorKind::InvalidInput, "adaptive_quadrature: integrand not finite on [a, b]");
    }
    if (st.exhausted) {
        throw AccuracyError("adaptive_quadrature: subdivision budget exhausted", result);
    }
    return result;
}

Vector perron_vector(const Matrix& m) {
    require_square_finite(m, "perron_vector");
    const Eigen::Index n = m.rows();
    if (n == 1) return Vector::Ones(1);
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/true);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorKind::NumericalIntegrity, "perron_vector: QR iteration did not converge");
    }
    const Eigen::VectorXcd vals = solver.eigenvalues();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
        if (vals(i).real() > vals(best).real()) best = i;
    }
    Vector v = solver.eigenvectors().col(best).real();
    if (v.sum() < 0.0) v = -v;
    v = v.cwiseMax(0.0);
    const double s = v.sum();
    if (!(s > 0.0)) {
        throw Error(ErrorKind::NumericalIntegrity, "perron_vector: degenerate eigenvector");
    }
    return v / s;
}

} // namespace numerics
} // namespace gemhp
