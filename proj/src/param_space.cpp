#include "rofsl/param_space.hpp"

#include <cmath>
#include <string>

#include "rofsl/errors.hpp"

namespace rofsl {
namespace {

void require_same_dim(const ParamVector& a, const ParamVector& b, const char* op) {
    if (a.size() != b.size()) {
        throw DimensionError(std::string(op) + ": dimension mismatch (" + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()) + ")");
    }
}

}  // namespace

// Reductions run sequentially in index order so results are reproducible.
double dot(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double squared_norm(const ParamVector& a) {
    double s = 0.0;
    for (double v : a) {
        s += v * v;
    }
    return s;
}

double norm(const ParamVector& a) { return std::sqrt(squared_norm(a)); }

double cos_sim(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "cos_sim");
    const double na = norm(a);
    const double nb = norm(b);
    if (na < kZeroNormTolerance || nb < kZeroNormTolerance) {
        return -1.0;
    }
    const double c = dot(a, b) / (na * nb);
    if (c > 1.0) return 1.0;
    if (c < -1.0) return -1.0;
    return c;
}

ParamVector clip_norm(const ParamVector& a, double tau) {
    if (!(tau > 0.0)) {
        throw ConfigError("clip_norm: tau must be > 0, got " + std::to_string(tau));
    }
    const double n = norm(a);
    if (n <= tau) {
        return a;
    }
    ParamVector out = scale(tau / n, a);
    // Rounding can leave the result a hair above tau; one more pass fixes it
    // and makes the operation idempotent.
    while (norm(out) > tau) {
        out = scale(std::nextafter(tau / norm(out), 0.0), out);
    }
    return out;
}

ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y) {
    require_same_dim(x, y, "axpy");
    ParamVector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        out[i] = alpha * x[i] + y[i];
    }
    return out;
}

void axpy_inplace(double alpha, const ParamVector& x, ParamVector& y) {
    require_same_dim(x, y, "axpy");
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

ParamVector scale(double alpha, const ParamVector& x) {
    ParamVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = alpha * x[i];
    }
    return out;
}

ParamVector subtract(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "subtract");
    ParamVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

ParamVector add(const ParamVector& a, const ParamVector& b) {
    require_same_dim(a, b, "add");
    ParamVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    return out;
}

bool all_finite(const ParamVector& a) {
    for (double v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace rofsl
