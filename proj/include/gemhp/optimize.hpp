#pragma once

#include "gemhp/numerics.hpp"
#include "gemhp/rng.hpp"

#include <functional>

namespace gemhp::optimize {

struct Box {
    Vector lower;
    Vector upper;

    [[nodiscard]] Vector project(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
    [[nodiscard]] Vector width() const { return upper - lower; }
};

using Objective = std::function<double(const Vector&)>;
using Gradient = std::function<Vector(const Vector&)>;

struct NelderMeadOptions {
    /// Stop once max_i |x_i - x_best|_inf over the simplex falls below this.
    double diameter_tol{1e-8};
    long max_evaluations{20'000};
    /// Initial edge length per coordinate, as a fraction of the box width.
    double initial_step{0.1};
};

struct Result {
    Vector x;
    double f{0.0};
    long evaluations{0};
    int iterations{0};
    bool converged{false};
    double diameter{0.0};
    double gradient_norm{0.0};
};

/// Minimises f over the box. Trial points are projected onto the box and
/// non-finite values count as +inf.
[[nodiscard]] Result nelder_mead(const Objective& f, const Vector& x0, const Box& box,
                                 const NelderMeadOptions& opts = {});

struct BfgsOptions {
    double gradient_tol{1e-5};
    int max_iterations{100};
};

/// Projected quasi-Newton minimisation: coordinates pinned at a bound with
/// the gradient pointing outward are frozen, the rest take BFGS steps with a
/// backtracking Armijo search along the projected path. `inverse_hessian`
/// seeds the BFGS matrix (identity when empty or not positive definite).
[[nodiscard]] Result bfgs_box(const Objective& f, const Gradient& grad, const Vector& x0, const Box& box,
                              const Matrix& inverse_hessian = {}, const BfgsOptions& opts = {});

/// Gradient with components zeroed where a bound blocks descent.
[[nodiscard]] Vector projected_gradient(const Vector& g, const Vector& x, const Box& box);

/// `count` Latin-hypercube points (columns) strictly inside the box.
[[nodiscard]] Matrix latin_hypercube(int count, const Box& box, Rng& rng);

} // namespace gemhp::optimize
