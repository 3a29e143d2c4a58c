#pragma once

#include "gemhp/model.hpp"
#include "gemhp/stream.hpp"

#include <string>
#include <vector>

namespace gemhp {

struct LikelihoodBreakdown {
    double total{0.0};
    double ground{0.0};
    double mark{0.0};
    std::vector<double> compensators;
    /// False when some term was -inf or NaN; `flag` says which.
    bool finite{true};
    std::string flag;
};

/// Quasi-log-likelihood of a stream. Linear links only (Unsupported
/// otherwise); dimension mismatches throw InvalidInput. Non-finite values are
/// returned flagged, not thrown.
[[nodiscard]] LikelihoodBreakdown log_likelihood(const EventStream& stream, const Model& model);
[[nodiscard]] LikelihoodBreakdown log_likelihood(const EventStream& stream, const ModelSpec& spec,
                                                 const ThetaVector& theta);

/// l_T at theta with the box check skipped; NaN when the model is invalid at
/// theta or the likelihood is not finite. The stream is not re-validated.
[[nodiscard]] double log_likelihood_value(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta);

/// Cumulative compensators Lambda^alpha(T_i) at every event (row i) and at
/// the horizon (last row).
[[nodiscard]] Matrix compensator_path(const EventStream& stream, const Model& model);

/// Intensities lambda^{k_i}(T_i-) at every event.
[[nodiscard]] std::vector<double> event_intensities(const EventStream& stream, const Model& model);

struct ScoreResult {
    Vector grad;
    /// Per coordinate: |D(h) - D(h/2)| / max(|R|, 1) with R the extrapolated
    /// value; 0 for coordinates differentiated exactly.
    Vector residual;
    std::vector<bool> exact;
    std::vector<bool> one_sided;
    /// Set when some coordinate used one-sided differences.
    bool boundary_warning{false};
};

/// Gradient of l_T. Coordinates entering every intensity affinely are
/// differentiated exactly; the rest by central differences with step
/// max(1e-6, 1e-7 |theta_j|) and one Richardson step, one-sided within 2h of
/// the box.
[[nodiscard]] ScoreResult score(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta);

struct FisherResult {
    Matrix gamma;          // -H_sym / T
    Matrix hessian;        // raw, before symmetrisation
    double asymmetry{0.0}; // |H - H^T|_inf / |H|_inf
    bool boundary_warning{false};
};

[[nodiscard]] FisherResult observed_fisher(const EventStream& stream, const ModelSpec& spec, const ThetaVector& theta);

} // namespace gemhp
