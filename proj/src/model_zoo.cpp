#include "rofsl/model_zoo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "rofsl/errors.hpp"

namespace rofsl {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::SoftmaxRegression:
            return "softmax-regression";
        case ModelKind::Mlp1h:
            return "mlp-1h";
    }
    return "?";
}

ModelKind parse_model_kind(const std::string& name) {
    if (name == "softmax-regression") return ModelKind::SoftmaxRegression;
    if (name == "mlp-1h") return ModelKind::Mlp1h;
    throw ConfigError("model.kind: expected 'softmax-regression' or 'mlp-1h', got '" + name + "'");
}

std::size_t ModelArch::param_count() const {
    const auto m = static_cast<std::size_t>(input_dim);
    const auto c = static_cast<std::size_t>(num_classes);
    const auto h = static_cast<std::size_t>(hidden_dim);
    if (kind == ModelKind::SoftmaxRegression) return m * c + c;
    return h * m + h + c * h + c;
}

void ModelArch::validate() const {
    if (input_dim < 1) throw ConfigError("model.input_dim: must be >= 1");
    if (num_classes < 2) throw ConfigError("model.num_classes: must be >= 2");
    if (kind == ModelKind::Mlp1h && hidden_dim < 1) throw ConfigError("model.hidden_dim: must be >= 1 for mlp-1h");
}

namespace {

// Offsets of the parameter blocks inside a ParamVector.
struct Layout {
    std::size_t m, h, c;
    // softmax: w_out at 0, b_out after it. mlp: w_in, b_in, w_out, b_out.
    std::size_t w_in = 0, b_in = 0, w_out = 0, b_out = 0;

    explicit Layout(const ModelArch& a)
        : m(static_cast<std::size_t>(a.input_dim)),
          h(static_cast<std::size_t>(a.hidden_dim)),
          c(static_cast<std::size_t>(a.num_classes)) {
        if (a.kind == ModelKind::SoftmaxRegression) {
            w_out = 0;
            b_out = c * m;
        } else {
            w_in = 0;
            b_in = h * m;
            w_out = b_in + h;
            b_out = w_out + c * h;
        }
    }
};

void check_params(const ModelArch& arch, const ParamVector& x) {
    if (x.size() != arch.param_count()) {
        throw DimensionError(
            fmt::format("model: expected {} parameters, got {}", arch.param_count(), x.size()));
    }
}

void check_features(const ModelArch& arch, std::span<const double> f) {
    if (f.size() != static_cast<std::size_t>(arch.input_dim)) {
        throw DimensionError(fmt::format("model: expected {} features, got {}", arch.input_dim, f.size()));
    }
}

// Forward pass keeping intermediates for backprop.
struct Activations {
    std::vector<double> hidden_pre;  // mlp only
    std::vector<double> hidden;      // mlp only
    std::vector<double> probs;
    double log_normalizer = 0.0;
    double max_logit = 0.0;
    std::vector<double> logits;
};

void affine(std::span<const double> w, std::span<const double> b, std::span<const double> in,
            std::vector<double>& out) {
    const std::size_t rows = b.size();
    const std::size_t cols = in.size();
    out.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = b[r];
        const double* row = w.data() + r * cols;
        for (std::size_t k = 0; k < cols; ++k) s += row[k] * in[k];
        out[r] = s;
    }
}

void run_forward(const ModelArch& arch, const Layout& L, const ParamVector& x, std::span<const double> f,
                 Activations& act) {
    const auto p = x.values();
    std::span<const double> top_in = f;
    if (arch.kind == ModelKind::Mlp1h) {
        affine(p.subspan(L.w_in, L.h * L.m), p.subspan(L.b_in, L.h), f, act.hidden_pre);
        act.hidden.resize(L.h);
        for (std::size_t k = 0; k < L.h; ++k) act.hidden[k] = std::max(0.0, act.hidden_pre[k]);
        top_in = act.hidden;
    }
    affine(p.subspan(L.w_out, L.c * top_in.size()), p.subspan(L.b_out, L.c), top_in, act.logits);

    act.max_logit = *std::max_element(act.logits.begin(), act.logits.end());
    act.probs.resize(L.c);
    double z = 0.0;
    for (std::size_t k = 0; k < L.c; ++k) {
        act.probs[k] = std::exp(act.logits[k] - act.max_logit);
        z += act.probs[k];
    }
    for (auto& v : act.probs) v /= z;
    act.log_normalizer = act.max_logit + std::log(z);
}

double example_cross_entropy(const Activations& act, int label) {
    return act.log_normalizer - act.logits[static_cast<std::size_t>(label)];
}

double decay_term(const ModelArch& arch, const Layout& L, const ParamVector& x) {
    double s = 0.0;
    const auto p = x.values();
    auto add_block = [&](std::size_t off, std::size_t len) {
        for (std::size_t i = off; i < off + len; ++i) s += p[i] * p[i];
    };
    if (arch.kind == ModelKind::Mlp1h) {
        add_block(L.w_in, L.h * L.m);
        add_block(L.w_out, L.c * L.h);
    } else {
        add_block(L.w_out, L.c * L.m);
    }
    return s;
}

template <typename IndexFn>
double loss_impl(const ModelSpec& model, const ParamVector& x, const Dataset& batch, std::size_t n, IndexFn idx) {
    if (n == 0) throw std::invalid_argument("loss: empty batch");
    check_params(model.arch, x);
    const Layout L(model.arch);
    Activations act;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& ex = batch.examples[idx(i)];
        check_features(model.arch, ex.features);
        run_forward(model.arch, L, x, ex.features, act);
        total += example_cross_entropy(act, ex.label);
    }
    double value = total / static_cast<double>(n);
    if (model.loss.weight_decay != 0.0) {
        value += 0.5 * model.loss.weight_decay * decay_term(model.arch, L, x);
    }
    return value;
}

template <typename IndexFn>
ParamVector gradient_impl(const ModelSpec& model, const ParamVector& x, const Dataset& batch, std::size_t n,
                          IndexFn idx) {
    if (n == 0) throw std::invalid_argument("gradient: empty batch");
    const ModelArch& arch = model.arch;
    check_params(arch, x);
    const Layout L(arch);
    const auto p = x.values();
    ParamVector grad(x.size(), 0.0);
    auto g = grad.values();

    Activations act;
    std::vector<double> dlogits(L.c);
    std::vector<double> dhidden(L.h);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& ex = batch.examples[idx(i)];
        check_features(arch, ex.features);
        run_forward(arch, L, x, ex.features, act);
        for (std::size_t k = 0; k < L.c; ++k) dlogits[k] = act.probs[k];
        dlogits[static_cast<std::size_t>(ex.label)] -= 1.0;

        const std::span<const double> top_in =
            arch.kind == ModelKind::Mlp1h ? std::span<const double>(act.hidden) : std::span<const double>(ex.features);
        const std::size_t cols = top_in.size();
        for (std::size_t r = 0; r < L.c; ++r) {
            double* row = g.data() + L.w_out + r * cols;
            for (std::size_t k = 0; k < cols; ++k) row[k] += dlogits[r] * top_in[k];
            g[L.b_out + r] += dlogits[r];
        }

        if (arch.kind == ModelKind::Mlp1h) {
            std::fill(dhidden.begin(), dhidden.end(), 0.0);
            for (std::size_t r = 0; r < L.c; ++r) {
                const double* w_row = p.data() + L.w_out + r * L.h;
                for (std::size_t k = 0; k < L.h; ++k) dhidden[k] += w_row[k] * dlogits[r];
            }
            for (std::size_t k = 0; k < L.h; ++k) {
                if (act.hidden_pre[k] <= 0.0) continue;
                double* row = g.data() + L.w_in + k * L.m;
                for (std::size_t j = 0; j < L.m; ++j) row[j] += dhidden[k] * ex.features[j];
                g[L.b_in + k] += dhidden[k];
            }
        }
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : g) v *= inv_n;

    const double lambda = model.loss.weight_decay;
    if (lambda != 0.0) {
        auto decay_block = [&](std::size_t off, std::size_t len) {
            for (std::size_t j = off; j < off + len; ++j) g[j] += lambda * p[j];
        };
        if (arch.kind == ModelKind::Mlp1h) {
            decay_block(L.w_in, L.h * L.m);
            decay_block(L.w_out, L.c * L.h);
        } else {
            decay_block(L.w_out, L.c * L.m);
        }
    }
    return grad;
}

}  // namespace

ParamVector init_params(const ModelArch& arch, Rng& rng) {
    arch.validate();
    const Layout L(arch);
    ParamVector x(arch.param_count(), 0.0);
    auto fill = [&](std::size_t off, std::size_t fan_out, std::size_t fan_in) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = off; i < off + fan_out * fan_in; ++i) x[i] = u(rng);
    };
    if (arch.kind == ModelKind::Mlp1h) {
        fill(L.w_in, L.h, L.m);
        fill(L.w_out, L.c, L.h);
    } else {
        fill(L.w_out, L.c, L.m);
    }
    return x;
}

std::vector<double> decay_mask(const ModelArch& arch) {
    const Layout L(arch);
    std::vector<double> mask(arch.param_count(), 0.0);
    auto mark = [&](std::size_t off, std::size_t len) { std::fill_n(mask.begin() + static_cast<long>(off), len, 1.0); };
    if (arch.kind == ModelKind::Mlp1h) {
        mark(L.w_in, L.h * L.m);
        mark(L.w_out, L.c * L.h);
    } else {
        mark(L.w_out, L.c * L.m);
    }
    return mask;
}

std::vector<double> forward(const ModelArch& arch, const ParamVector& x, std::span<const double> features) {
    check_params(arch, x);
    check_features(arch, features);
    Activations act;
    run_forward(arch, Layout(arch), x, features, act);
    return act.probs;
}

int predict(const ModelArch& arch, const ParamVector& x, std::span<const double> features) {
    check_params(arch, x);
    check_features(arch, features);
    Activations act;
    run_forward(arch, Layout(arch), x, features, act);
    // max_element returns the first maximum, i.e. the lowest class index.
    return static_cast<int>(std::max_element(act.logits.begin(), act.logits.end()) - act.logits.begin());
}

double loss(const ModelSpec& model, const ParamVector& x, const Dataset& batch) {
    return loss_impl(model, x, batch, batch.size(), [](std::size_t i) { return i; });
}

double loss(const ModelSpec& model, const ParamVector& x, const Dataset& batch, std::span<const std::size_t> indices) {
    return loss_impl(model, x, batch, indices.size(), [&](std::size_t i) { return indices[i]; });
}

ParamVector gradient(const ModelSpec& model, const ParamVector& x, const Dataset& batch) {
    return gradient_impl(model, x, batch, batch.size(), [](std::size_t i) { return i; });
}

ParamVector gradient(const ModelSpec& model, const ParamVector& x, const Dataset& batch,
                     std::span<const std::size_t> indices) {
    return gradient_impl(model, x, batch, indices.size(), [&](std::size_t i) { return indices[i]; });
}

double cross_entropy(const ModelArch& arch, const ParamVector& x, const Dataset& data) {
    return loss(ModelSpec{arch, LossSpec{0.0}}, x, data);
}

}  // namespace rofsl
