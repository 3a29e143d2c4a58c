#pragma once

#include "gemhp/likelihood.hpp"
#include "gemhp/optimize.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gemhp {

struct FitOptions {
    /// Latin-hypercube starts when no init is given.
    int n_starts{8};
    std::uint64_t seed{0};
    /// Single start; projected into the interior of the box when outside.
    std::optional<ThetaVector> init;
    int workers{1};
    /// Per-start simplex tolerance before the best start is refined.
    double coarse_tol{1e-4};
    optimize::NelderMeadOptions simplex{};
    optimize::BfgsOptions polish{};
};

struct FitResult {
    ThetaVector theta_hat;
    double l_value{0.0};
    Matrix gamma_T;
    /// (T gamma_T)^{-1}; only meaningful when cov_available.
    Matrix cov_hat;
    bool cov_available{false};
    std::size_t n_events{0};
    double horizon{0.0};
    bool converged{false};
    int n_restarts_used{0};
    double simplex_diameter{0.0};
    double score_norm{0.0};
    long evaluations{0};
    double hessian_asymmetry{0.0};
    std::vector<std::string> warnings;
};

/// QMLE over the parameter box. Throws EstimationFailed when every start
/// yields a non-finite likelihood.
[[nodiscard]] FitResult fit_qmle(const EventStream& stream, const ModelSpec& spec, const FitOptions& opts = {});

struct WaldInterval {
    double lower;
    double upper;
    double half_width;
};

/// theta_hat_j -/+ z sqrt(cov_jj); nullopt when the covariance is unavailable.
[[nodiscard]] std::optional<std::vector<WaldInterval>> wald_cis(const FitResult& fit, double level);

/// Standard normal quantile.
[[nodiscard]] double normal_quantile(double p);

/// Per-coordinate prior density on [lower, upper], up to a constant.
struct Prior {
    enum class Kind { Uniform, TruncatedNormal, Custom };
    Kind kind{Kind::Uniform};
    double mean{0.0};
    double sd{1.0};
    std::function<double(double)> density;

    [[nodiscard]] double log_density(double v) const;
    static Prior uniform() { return {}; }
    static Prior truncated_normal(double mean, double sd) { return {Kind::TruncatedNormal, mean, sd, {}}; }
    static Prior custom(std::function<double(double)> f) { return {Kind::Custom, 0.0, 1.0, std::move(f)}; }
};

/// Throws InvalidInput unless each prior is finite and bounded away from 0
/// on its coordinate's interval (checked on 1001 points).
void validate_priors(const ModelSpec& spec, const std::vector<Prior>& priors);

struct McmcOptions {
    int draws{20'000};
    int burn_in{5'000};
    int thin{1};
    std::uint64_t seed{0};
    double target_acceptance{0.234};
    std::optional<ThetaVector> init;
    /// Starting proposal covariance; defaults to diag((width / 100)^2).
    std::optional<Matrix> proposal_cov;
    double ess_floor{200.0};
};

struct PosteriorResult {
    ThetaVector theta_tilde;
    Vector posterior_sd;
    Vector ess;
    /// sd / sqrt(ess) per coordinate.
    Vector mc_std_err;
    Matrix credible; // n x 2: 2.5% and 97.5% quantiles
    double acceptance_rate{0.0};
    bool ess_ok{true};
    bool mixing_failure{false};
    int draws{0};
    std::vector<std::string> warnings;
};

/// QBE by random-walk Metropolis with reflection at the box; the proposal is
/// adapted during burn-in only.
[[nodiscard]] PosteriorResult fit_qbe(const EventStream& stream, const ModelSpec& spec,
                                      const std::vector<Prior>& priors, const McmcOptions& opts = {});

/// Posterior mean by tensor-grid quadrature (midpoint rule); n <= 2 only.
[[nodiscard]] ThetaVector posterior_mean_quadrature(const EventStream& stream, const ModelSpec& spec,
                                                    const std::vector<Prior>& priors, int points_per_axis);

/// Geyer initial-monotone-sequence effective sample size.
[[nodiscard]] double effective_sample_size(std::span<const double> chain);

struct StudyOptions {
    std::vector<double> horizons{500.0, 2000.0};
    int replications{200};
    std::uint64_t seed{0};
    int workers{1};
    FitOptions fit{};
    /// Fraction of each horizon simulated and discarded before recording.
    double warmup_fraction{0.1};
    long reference_samples{1'000'000};
    double level{0.95};
    bool allow_unstable{false};
    /// Start each fit at the truth instead of multi-start (faster studies).
    bool init_at_truth{false};
};

struct ReplicationOutcome {
    int index{0};
    bool ok{false};
    std::string error;
    std::size_t n_events{0};
    ThetaVector theta_hat;
    Vector s; // sqrt(T) (theta_hat - theta*)
    Matrix gamma;
    bool cov_ok{false};
    Vector wald_half_width;
    double l_hat{0.0};
    double l_true{0.0};
    bool converged{false};
};

struct MomentRow {
    std::string name;
    double empirical{0.0};
    double std_err{0.0};
    double reference{0.0};
    double reference_std_err{0.0};
};

struct HorizonSummary {
    double horizon{0.0};
    int n_ok{0};
    int n_failed{0};
    /// More than 5% of replications failed.
    bool failure_flag{false};
    Vector mean_s;
    Vector se_mean_s;
    Matrix cov_s;
    Matrix gamma_bar;
    std::vector<MomentRow> moments;
    Vector coverage;
    int coverage_n{0};
    int dominance_violations{0};
    std::vector<ReplicationOutcome> replications;
};

struct StudyReport {
    ThetaVector theta_star;
    std::uint64_t seed{0};
    std::vector<HorizonSummary> horizons;
};

/// Simulation stream for replication r at horizon index h: (h << 32) | r.
[[nodiscard]] StudyReport mc_moment_study(const ModelSpec& spec, const ThetaVector& theta_star,
                                          const StudyOptions& opts);

/// Aligned-column table of a study.
[[nodiscard]] std::string format_study_table(const StudyReport& report, const ModelSpec& spec);

} // namespace gemhp
