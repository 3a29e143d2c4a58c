#include "gemhp/marks.hpp"

#include "gemhp/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace gemhp {

double mark_norm(const Mark& x) noexcept {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
}

MarkSpace MarkSpace::continuous(int dim) {
    if (dim < 1) throw Error(ErrorKind::InvalidInput, "continuous mark space needs dim >= 1");
    return MarkSpace{Kind::Continuous, dim, 0};
}

MarkSpace MarkSpace::discrete() { return MarkSpace{Kind::DiscreteInteger, 1, 0}; }

MarkSpace MarkSpace::categorical(int levels) {
    if (levels < 1) throw Error(ErrorKind::InvalidInput, "categorical mark space needs levels >= 1");
    return MarkSpace{Kind::Categorical, 1, levels};
}

void MarkSpace::validate(const Mark& x) const {
    if (static_cast<int>(x.size()) != dim) {
        throw Error(ErrorKind::InvalidInput, "mark has " + std::to_string(x.size()) + " coordinates, expected " +
                                                 std::to_string(dim) + " for " + describe());
    }
    for (double v : x) {
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "non-finite mark");
    }
    if (kind == Kind::Continuous) return;
    const double v = x.front();
    if (v != std::floor(v)) throw Error(ErrorKind::InvalidInput, "discrete mark must be an integer");
    if (kind == Kind::Categorical && (v < 0 || v >= levels)) {
        throw Error(ErrorKind::InvalidInput, "categorical mark " + std::to_string(static_cast<long>(v)) +
                                                 " outside [0, " + std::to_string(levels) + ")");
    }
}

std::string MarkSpace::describe() const {
    switch (kind) {
    case Kind::Continuous: return "continuous(" + std::to_string(dim) + ")";
    case Kind::DiscreteInteger: return "discrete";
    case Kind::Categorical: return "categorical(" + std::to_string(levels) + ")";
    }
    return "?";
}

const char* to_string(MarkFamily f) noexcept {
    switch (f) {
    case MarkFamily::IidGaussian: return "iid-gaussian";
    case MarkFamily::IidCategorical: return "iid-categorical";
    case MarkFamily::GaussianAr1: return "gaussian-ar1";
    case MarkFamily::QueueReactiveDirac: return "queue-reactive-dirac";
    case MarkFamily::Custom: return "custom";
    }
    return "?";
}

MarkKernel MarkKernel::iid_gaussian(double mean, double sd, int dim) {
    if (!(sd > 0.0)) throw Error(ErrorKind::InvalidInput, "iid-gaussian marks need sd > 0");
    MarkKernel k;
    k.family_ = MarkFamily::IidGaussian;
    k.mean_ = mean;
    k.sd_ = sd;
    k.dim_ = dim;
    return k;
}

MarkKernel MarkKernel::iid_categorical(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw Error(ErrorKind::InvalidInput, "categorical mark weights must be finite and >= 0");
        }
        total += w;
    }
    if (weights.empty() || !(total > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "categorical mark weights must have positive sum");
    }
    MarkKernel k;
    k.family_ = MarkFamily::IidCategorical;
    k.probs_ = std::move(weights);
    k.log_probs_.resize(k.probs_.size());
    for (std::size_t i = 0; i < k.probs_.size(); ++i) {
        k.probs_[i] /= total;
        k.log_probs_[i] = std::log(k.probs_[i]);
    }
    return k;
}

MarkKernel MarkKernel::gaussian_ar1(double mean, double coef, double sd, int dim) {
    if (!(sd > 0.0)) throw Error(ErrorKind::InvalidInput, "gaussian-ar1 marks need sd > 0");
    MarkKernel k;
    k.family_ = MarkFamily::GaussianAr1;
    k.mean_ = mean;
    k.coef_ = coef;
    k.sd_ = sd;
    k.dim_ = dim;
    return k;
}

MarkKernel MarkKernel::queue_reactive(int step) {
    if (step != 1 && step != -1) throw Error(ErrorKind::InvalidInput, "queue-reactive step must be +1 or -1");
    MarkKernel k;
    k.family_ = MarkFamily::QueueReactiveDirac;
    k.step_ = step;
    return k;
}

MarkKernel MarkKernel::custom(CustomMarkKernel c) {
    if (!c.sample || !c.log_density) {
        throw Error(ErrorKind::InvalidInput, "custom mark kernel needs both sampler and density");
    }
    MarkKernel k;
    k.family_ = MarkFamily::Custom;
    k.custom_ = std::move(c);
    return k;
}

bool MarkKernel::independent_of_x() const noexcept {
    switch (family_) {
    case MarkFamily::IidGaussian:
    case MarkFamily::IidCategorical: return true;
    case MarkFamily::GaussianAr1: return coef_ == 0.0;
    case MarkFamily::QueueReactiveDirac: return false;
    case MarkFamily::Custom: return custom_.independent_of_x;
    }
    return false;
}

Mark MarkKernel::dirac_target(const Mark& x) const {
    const double v = x.empty() ? 0.0 : x.front();
    return Mark{std::max(0.0, v + step_)};
}

Mark MarkKernel::sample(const Mark& x, Rng& rng) const {
    switch (family_) {
    case MarkFamily::IidGaussian: {
        Mark y(dim_);
        for (auto& v : y) v = mean_ + sd_ * rng.normal();
        return y;
    }
    case MarkFamily::IidCategorical:
        return Mark{static_cast<double>(rng.categorical(probs_))};
    case MarkFamily::GaussianAr1: {
        Mark y(dim_);
        for (int i = 0; i < dim_; ++i) {
            const double prev = i < static_cast<int>(x.size()) ? x[i] : mean_;
            y[i] = mean_ + coef_ * (prev - mean_) + sd_ * rng.normal();
        }
        return y;
    }
    case MarkFamily::QueueReactiveDirac:
        return dirac_target(x);
    case MarkFamily::Custom:
        return custom_.sample(x, rng);
    }
    return {};
}

double MarkKernel::log_density(const Mark& x, const Mark& y) const {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    const double log_norm_const = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd_);
    switch (family_) {
    case MarkFamily::IidGaussian: {
        double l = 0.0;
        for (double v : y) {
            const double z = (v - mean_) / sd_;
            l += log_norm_const - 0.5 * z * z;
        }
        return l;
    }
    case MarkFamily::IidCategorical: {
        const double v = y.empty() ? -1.0 : y.front();
        if (v < 0 || v >= static_cast<double>(probs_.size())) return kNegInf;
        return log_probs_[static_cast<std::size_t>(v)];
    }
    case MarkFamily::GaussianAr1: {
        double l = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double prev = i < x.size() ? x[i] : mean_;
            const double z = (y[i] - mean_ - coef_ * (prev - mean_)) / sd_;
            l += log_norm_const - 0.5 * z * z;
        }
        return l;
    }
    case MarkFamily::QueueReactiveDirac:
        return (!y.empty() && y.front() == dirac_target(x).front()) ? 0.0 : kNegInf;
    case MarkFamily::Custom:
        return custom_.log_density(x, y);
    }
    return kNegInf;
}

} // namespace gemhp
