#pragma once

#include "gemhp/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gemhp {

/// A mark value. Continuous marks carry `dim` coordinates; discrete and
/// categorical marks carry one integer-valued coordinate.
using Mark = std::vector<double>;

/// |x| = sum_i |x_i|.
[[nodiscard]] double mark_norm(const Mark& x) noexcept;

struct MarkSpace {
    enum class Kind { Continuous, DiscreteInteger, Categorical };

    Kind kind{Kind::Categorical};
    int dim{1};
    int levels{1};

    static MarkSpace continuous(int dim);
    static MarkSpace discrete();
    static MarkSpace categorical(int levels);

    [[nodiscard]] bool is_discrete() const noexcept { return kind != Kind::Continuous; }
    /// Throws InvalidInput when `x` does not belong to the space.
    void validate(const Mark& x) const;
    [[nodiscard]] std::string describe() const;
};

enum class MarkFamily { IidGaussian, IidCategorical, GaussianAr1, QueueReactiveDirac, Custom };

[[nodiscard]] const char* to_string(MarkFamily f) noexcept;

struct CustomMarkKernel {
    std::function<Mark(const Mark& x, Rng& rng)> sample;
    /// Log density with respect to the reference measure of the mark space.
    std::function<double(const Mark& x, const Mark& y)> log_density;
    bool independent_of_x{false};
};

/// Transition kernel Q_beta(x, dy) = p_beta(x, y) rho(dy) for the mark drawn at
/// an event of one component.
class MarkKernel {
public:
    static MarkKernel iid_gaussian(double mean, double sd, int dim = 1);
    static MarkKernel iid_categorical(std::vector<double> weights);
    /// y = mean + coef (x - mean) + sd * N(0, I), coordinatewise.
    static MarkKernel gaussian_ar1(double mean, double coef, double sd, int dim = 1);
    /// Dirac at x + step, floored at 0 (step is +1 or -1).
    static MarkKernel queue_reactive(int step);
    static MarkKernel custom(CustomMarkKernel k);

    [[nodiscard]] Mark sample(const Mark& x, Rng& rng) const;
    /// -inf where the density vanishes.
    [[nodiscard]] double log_density(const Mark& x, const Mark& y) const;

    [[nodiscard]] MarkFamily family() const noexcept { return family_; }
    [[nodiscard]] bool independent_of_x() const noexcept;

    [[nodiscard]] double mean() const noexcept { return mean_; }
    [[nodiscard]] double coef() const noexcept { return coef_; }
    [[nodiscard]] double sd() const noexcept { return sd_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int step() const noexcept { return step_; }
    /// Normalised probabilities for the categorical family.
    [[nodiscard]] const std::vector<double>& probabilities() const noexcept { return probs_; }

    /// Deterministic successor for the Dirac family.
    [[nodiscard]] Mark dirac_target(const Mark& x) const;

private:
    MarkFamily family_{MarkFamily::IidCategorical};
    double mean_{0.0};
    double coef_{0.0};
    double sd_{1.0};
    int dim_{1};
    int step_{0};
    std::vector<double> probs_{1.0};
    std::vector<double> log_probs_{0.0};
    CustomMarkKernel custom_;
};

} // namespace gemhp
