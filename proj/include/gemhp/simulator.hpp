#pragma once

#include "gemhp/model.hpp"
#include "gemhp/rng.hpp"
#include "gemhp/stream.hpp"

#include <cstdint>
#include <vector>

namespace gemhp {

/// Z = (eps, X) at time t, with eps stored pre-decay at the last event.
struct MarkovState {
    std::vector<double> eps; // layout given by Model::pairs()
    Mark x;
    double t{0.0};

    [[nodiscard]] static MarkovState zero(const Model& model, Mark x0, double t = 0.0);
};

/// View of eps_{alpha beta}; throws InvalidInput when the pair has no kernel.
[[nodiscard]] Eigen::Map<const Matrix> pair_state(const Model& model, const MarkovState& s, int alpha, int beta);

/// mu^alpha(dt, z) for every alpha. Throws NumericalIntegrity when an
/// excitation inner product is below -1e-9; smaller negatives clamp to 0.
[[nodiscard]] std::vector<double> intensity_at(const Model& model, const MarkovState& state, double dt);

/// Decay every block by dt, add g_{alpha beta}(y) I on the blocks of source
/// `label`, set x = y and advance t.
[[nodiscard]] MarkovState apply_jump(const Model& model, const MarkovState& state, double dt, int label,
                                     const Mark& y);

struct NextEvent {
    double dt{0.0};
    int label{0};
    Mark mark;
};

/// Precomputed per-pair constants for the thinning envelope.
class Thinner {
public:
    explicit Thinner(const Model& model);

    /// Draws the next event from `state` by thinning. Throws Internal if the
    /// intensity ever exceeds the certified envelope.
    [[nodiscard]] NextEvent next(const MarkovState& state, Rng& rng);

    [[nodiscard]] std::uint64_t proposals() const noexcept { return proposals_; }

private:
    [[nodiscard]] double total_intensity(std::span<const double> eps, const Mark& x, std::vector<double>* per) ;

    const Model& model_;
    Model::Workspace ws_;
    std::vector<double> a_fro_;
    std::vector<double> b_norm2_;
    std::vector<double> b_growth_; // max(0, log_norm(-B))
    std::vector<double> cur_, tmp_, exc_, mu_;
    std::uint64_t proposals_{0};
};

[[nodiscard]] NextEvent next_event(const Model& model, const MarkovState& state, Rng& rng);

struct SimulationOptions {
    double horizon{1.0};
    std::uint64_t seed{0};
    std::uint64_t stream{0};
    /// Empty means the model's default mark.
    Mark x0;
    /// Negative means 10% of the horizon.
    double warmup{-1.0};
    std::uint64_t max_events{100'000'000ULL};
    /// Skip the stability gate.
    bool allow_unstable{false};
};

/// Throws Domain when the stability check fails (unless allowed) and
/// Explosion when the event cap is hit. Events during warmup are dropped
/// and the clock restarts at the end of warmup.
[[nodiscard]] EventStream simulate(const ModelSpec& spec, const ThetaVector& theta, const SimulationOptions& opts);

/// Probe marks used by the stability gate: the spec's probe, else x0.
[[nodiscard]] std::vector<Mark> stability_probe(const ModelSpec& spec, const Mark& x0);

} // namespace gemhp
