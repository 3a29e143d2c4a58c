#pragma once

#include "gemhp/kernels.hpp"
#include "gemhp/marks.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gemhp {

using ThetaVector = Vector;

/// A model coefficient: either a fixed number or one coordinate of theta.
struct Slot {
    int index{-1};
    double constant{0.0};

    static Slot fixed(double v) { return Slot{-1, v}; }
    static Slot param(int i) { return Slot{i, 0.0}; }

    [[nodiscard]] bool is_param() const noexcept { return index >= 0; }
    [[nodiscard]] double at(const ThetaVector& theta) const { return is_param() ? theta(index) : constant; }
};

/// Closed family of nonnegative mark functions used for boosts and baselines.
/// Coefficients are all required to be >= 0.
///   constant      c0
///   affine        c0 + c1 |x|
///   quadratic     c0 + c1 |x| + c2 |x|^2
///   log1p         c0 + c1 log(1 + |x|)
///   table         c[min(x, n - 1)]           (integer marks only)
///   proportional  c0 |x| + c1 1{x = 0}       (integer marks only)
enum class FunctionForm { Constant, Affine, Quadratic, Log1p, Table, Proportional };

[[nodiscard]] const char* to_string(FunctionForm f) noexcept;
[[nodiscard]] FunctionForm function_form_from_string(std::string_view s);

struct MarkFunction {
    FunctionForm form{FunctionForm::Constant};
    std::vector<double> coef{1.0};

    [[nodiscard]] double operator()(const Mark& x) const;
    /// Infimum over the mark space.
    [[nodiscard]] double infimum(const MarkSpace& space) const;
};

struct MarkFunctionTemplate {
    FunctionForm form{FunctionForm::Constant};
    std::vector<Slot> coef{Slot::fixed(1.0)};

    [[nodiscard]] MarkFunction resolve(const ThetaVector& theta) const;
};

struct TermTemplate {
    std::vector<Slot> poly;
    Slot cos_weight{Slot::fixed(0.0)};
    Slot sin_weight{Slot::fixed(0.0)};
    Slot frequency{Slot::fixed(0.0)};
    Slot decay{Slot::fixed(1.0)};

    [[nodiscard]] CanonicalTerm resolve(const ThetaVector& theta) const;
};

/// Kernel h_{target,source}(s, x) = sum_terms u(s) * boost(x).
struct KernelTemplate {
    int target{0};
    int source{0};
    std::vector<TermTemplate> terms;
    MarkFunctionTemplate boost;
};

struct MarkKernelTemplate {
    MarkFamily family{MarkFamily::IidCategorical};
    Slot mean{Slot::fixed(0.0)};
    Slot coef{Slot::fixed(0.0)};
    Slot sd{Slot::fixed(1.0)};
    std::vector<Slot> weights{Slot::fixed(1.0)};
    int step{1};
    CustomMarkKernel custom;

    [[nodiscard]] MarkKernel resolve(const ThetaVector& theta, const MarkSpace& space) const;
};

struct ParameterInfo {
    std::string name;
    double lower{0.0};
    double upper{1.0};
    double value{0.5};
};

struct Floors {
    double r_min{1e-3};
    double phi_min{1e-8};
    double g_min{1e-8};
};

/// phi_alpha(u, x) = nu_alpha(x) + L(sum_beta u_beta) with L the identity
/// (linear) or cap * tanh(. / cap) (saturating, sublinear).
struct Link {
    enum class Kind { Linear, Saturating };
    Kind kind{Kind::Linear};
    double cap{1.0};

    [[nodiscard]] double apply(double baseline, double excitation) const noexcept;
};

/// Parametrised GEMHP: kernel, boost, baseline and mark templates over the box Theta.
struct ModelSpec {
    int d{1};
    std::vector<ParameterInfo> parameters;
    MarkSpace marks{MarkSpace::categorical(1)};
    std::vector<MarkFunctionTemplate> baselines;
    std::vector<KernelTemplate> kernels;
    std::vector<MarkKernelTemplate> mark_kernels;
    Link link;
    Floors floors;
    /// Mark probe grid for the stability check.
    std::vector<Mark> probe;
    /// Default initial mark.
    Mark x0;

    /// Structural validation; throws InvalidInput.
    void validate() const;

    [[nodiscard]] int n_params() const noexcept { return static_cast<int>(parameters.size()); }
    [[nodiscard]] ThetaVector lower() const;
    [[nodiscard]] ThetaVector upper() const;
    [[nodiscard]] ThetaVector initial() const;
    [[nodiscard]] bool in_box(const ThetaVector& theta) const;
    [[nodiscard]] int parameter_index(std::string_view name) const;
    [[nodiscard]] Mark default_mark() const;

    /// Parameters on which every intensity is affine and the mark law does not
    /// depend: baseline and boost coefficients, polynomial kernel coefficients.
    [[nodiscard]] std::vector<bool> linear_parameters() const;
};

/// A ModelSpec instantiated at one theta. Immutable.
class Model {
public:
    /// Throws Domain when theta leaves Theta (unless check_box is false) and
    /// InvalidKernel on negative kernels, decay below r_min, or floor violations.
    Model(const ModelSpec& spec, const ThetaVector& theta, bool check_box = true);

    [[nodiscard]] int d() const noexcept { return d_; }
    [[nodiscard]] const MarkSpace& mark_space() const noexcept { return marks_; }
    [[nodiscard]] const ThetaVector& theta() const noexcept { return theta_; }
    [[nodiscard]] const Link& link() const noexcept { return link_; }
    [[nodiscard]] bool is_linear() const noexcept { return link_.kind == Link::Kind::Linear; }

    [[nodiscard]] const std::optional<MatExpKernel>& kernel(int alpha, int beta) const {
        return kernels_[static_cast<std::size_t>(alpha * d_ + beta)];
    }
    [[nodiscard]] const MarkFunction& boost_function(int alpha, int beta) const {
        return boosts_[static_cast<std::size_t>(alpha * d_ + beta)];
    }
    [[nodiscard]] double baseline(int alpha, const Mark& x) const { return baselines_[alpha](x); }
    [[nodiscard]] const MarkFunction& baseline_function(int alpha) const { return baselines_[alpha]; }
    [[nodiscard]] double boost(int alpha, int beta, const Mark& y) const { return boost_function(alpha, beta)(y); }
    [[nodiscard]] const MarkKernel& mark_kernel(int beta) const { return mark_kernels_[beta]; }

    /// Flat excitation state layout: pair p stores its m x m matrix
    /// column-major at [offset, offset + m*m).
    struct Pair {
        int alpha;
        int beta;
        int m;
        std::size_t offset;
        int group; // pairs sharing an identical B share a group
    };
    [[nodiscard]] std::span<const Pair> pairs() const noexcept { return pairs_; }
    [[nodiscard]] std::size_t state_size() const noexcept { return state_size_; }

    /// Per-group cache of exp(-dt B), keyed by the exact dt.
    class Workspace {
    public:
        explicit Workspace(const Model& model);

    private:
        friend class Model;
        std::vector<double> dt_;
        std::vector<Matrix> decay_;
        Matrix scratch_;
    };

    /// state <- exp(-dt B) state for every pair. When `integral` is non-empty
    /// (size d) it accumulates int_0^dt <A | exp(-sB) eps> ds per target.
    void decay(std::span<double> state, double dt, Workspace& ws, std::span<double> integral = {}) const;
    /// Per-target excitation sum_beta <A | eps_{alpha beta}> (size d output).
    void excitation(std::span<const double> state, std::span<double> out) const;
    /// eps_{alpha beta} += g_{alpha beta}(y) I for every alpha.
    void jump(std::span<double> state, int beta, const Mark& y) const;

private:
    int d_;
    ThetaVector theta_;
    MarkSpace marks_;
    Link link_;
    std::vector<std::optional<MatExpKernel>> kernels_;
    std::vector<MarkFunction> boosts_;
    std::vector<MarkFunction> baselines_;
    std::vector<MarkKernel> mark_kernels_;
    std::vector<Pair> pairs_;
    std::vector<Matrix> group_b_;
    std::size_t state_size_{0};
};

/// All d^2 temporal kernels at theta (absent pairs are empty).
[[nodiscard]] std::vector<std::optional<MatExpKernel>> intensity_weights(const ModelSpec& spec,
                                                                         const ThetaVector& theta);

struct BoostExpectation {
    Matrix g;        // G_{alpha beta}(x)
    Matrix std_err;  // zero where computed in closed form or by quadrature
};

/// G_{alpha beta}(x) = int g_{alpha beta}(y) Q_beta(x, dy).
[[nodiscard]] BoostExpectation expected_boost_G(const ModelSpec& spec, const ThetaVector& theta, const Mark& x);

/// Phi_{alpha beta}(x) = <A | B^{-1}> G_{alpha beta}(x).
[[nodiscard]] Matrix excitation_matrix_phi(const ModelSpec& spec, const ThetaVector& theta, const Mark& x);

struct StabilityReport {
    bool ok{false};
    double rho_bound{0.0};
    Vector kappa;
    Matrix phi_bar;
    /// True when Phi(x) is provably constant in x, so the probe sup is the true sup.
    bool sup_certified{false};
    std::string note;
};

[[nodiscard]] StabilityReport check_stability_L3(const ModelSpec& spec, const ThetaVector& theta,
                                                 std::span<const Mark> probe);

struct DriftReport {
    bool ok{false};
    double nu_limit{0.0};
    double nu_market{0.0};
    double nu_cancel{0.0};
    long threshold{0};
    std::string note;
};

/// Drift check of the queue-reactive mark dynamics: requires the built-in
/// queue-reactive family (one +1 component, two -1 components, the cancel
/// component with a proportional baseline). Throws Unsupported otherwise.
[[nodiscard]] DriftReport check_queue_reactive_drift(const ModelSpec& spec, const ThetaVector& theta);

} // namespace gemhp
