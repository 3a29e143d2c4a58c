#pragma once

#include "gemhp/likelihood.hpp"
#include "gemhp/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gemhp {

/// sup |F_n(x) - (1 - e^{-x})| over the sample.
[[nodiscard]] double ks_statistic_exp1(std::span<const double> sample);

/// Asymptotic Kolmogorov tail probability P(sqrt(n) D_n > sqrt(n) d).
[[nodiscard]] double kolmogorov_pvalue(double d, std::size_t n);

/// Lag-k sample autocorrelation (biased normalisation).
[[nodiscard]] double autocorrelation(std::span<const double> x, std::size_t lag);

struct ComponentResiduals {
    int component{0};
    std::vector<double> residuals;
    double ks{0.0};
    double p_value{1.0};
    double lag1_acf{0.0};
    bool skipped{false};
    std::string note;
};

struct ResidualReport {
    std::vector<ComponentResiduals> components;
};

/// Time-rescaled residuals Lambda^a(T_i) - Lambda^a(T_{i-1}) per component,
/// with KS against Exponential(1). Components with fewer than 20 events are
/// skipped.
[[nodiscard]] ResidualReport rescaled_residuals(const EventStream& stream, const ModelSpec& spec,
                                                const ThetaVector& theta);

struct MixingReport {
    bool degenerate{false};
    double grid_step{0.0};
    std::vector<double> acf; // acf[k] at lag (k + 1) * grid_step
    int lags_fitted{0};
    double decay_rate{0.0};
    double r_squared{0.0};
    std::string note;
};

/// Autocorrelation decay of sum_{alpha beta} <A | eps(t)> sampled every
/// grid_step. The log-linear fit uses the leading lags with |acf| > 0.02.
[[nodiscard]] MixingReport mixing_probe(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta,
                                        double grid_step, int max_lag);

/// The excitation feature on the grid t_k = k * grid_step, k = 0..floor(T / step).
[[nodiscard]] std::vector<double> excitation_feature(const EventStream& stream, const Model& model, double grid_step);

struct LanDirection {
    Vector direction;
    std::vector<double> radii;
    std::vector<double> log_z;
    /// log Z ~ c0 + c1 r + c2 r^2 along the direction.
    double c0{0.0};
    double c1{0.0};
    double c2{0.0};
    double predicted{0.0}; // -1/2 d^T Gamma_T d
    double relative_error{0.0};
    int dropped{0};
};

struct LanReport {
    Matrix gamma;
    std::vector<LanDirection> directions;
};

/// log Z_T(u) = l_T(theta + u / sqrt(T)) - l_T(theta) on u = r d. Points
/// leaving the box are dropped. Directions are normalised; when `radii` is
/// empty each direction gets nine points spanning +/- 2 / sqrt(d^T Gamma d).
[[nodiscard]] LanReport lan_profile(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta_hat,
                                    const std::vector<Vector>& directions, const std::vector<double>& radii = {},
                                    const std::optional<Matrix>& gamma = std::nullopt);

/// `count` uniformly random unit vectors in R^n.
[[nodiscard]] std::vector<Vector> random_directions(int n, int count, Rng& rng);

} // namespace gemhp
