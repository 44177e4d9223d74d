#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace rofsl {

/// Flat vector of model parameters. Models, client updates, gradients and
/// aggregates all live in this space.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
    ParamVector(std::initializer_list<double> values) : values_(values) {}

    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    const std::vector<double>& raw() const { return values_; }

    auto begin() { return values_.begin(); }
    auto end() { return values_.end(); }
    auto begin() const { return values_.begin(); }
    auto end() const { return values_.end(); }

    bool operator==(const ParamVector&) const = default;

private:
    std::vector<double> values_;
};

double dot(const ParamVector& a, const ParamVector& b);
double norm(const ParamVector& a);
double squared_norm(const ParamVector& a);

/// Cosine similarity in [-1, 1]. Returns -1 when either operand has norm
/// below kZeroNormTolerance so vanishing updates never look aligned.
double cos_sim(const ParamVector& a, const ParamVector& b);

/// min(1, tau / |a|) * a. Throws ConfigError unless tau > 0.
ParamVector clip_norm(const ParamVector& a, double tau);

/// alpha * x + y
ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y);

/// y += alpha * x, in place.
void axpy_inplace(double alpha, const ParamVector& x, ParamVector& y);

ParamVector scale(double alpha, const ParamVector& x);
ParamVector subtract(const ParamVector& a, const ParamVector& b);
ParamVector add(const ParamVector& a, const ParamVector& b);

bool all_finite(const ParamVector& a);

inline constexpr double kZeroNormTolerance = 1e-12;

}  // namespace rofsl
