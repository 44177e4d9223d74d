#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rofsl/data_forge.hpp"
#include "rofsl/param_space.hpp"
#include "rofsl/rng.hpp"

namespace rofsl {

enum class ModelKind { SoftmaxRegression, Mlp1h };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Architecture of the classifier. Parameters are stored layer by layer,
/// weights (row-major, out x in) before biases:
///   softmax-regression: W[C x m], b[C]
///   mlp-1h:             W1[h x m], b1[h], W2[C x h], b2[C]
struct ModelArch {
    ModelKind kind = ModelKind::SoftmaxRegression;
    int input_dim = 0;
    int hidden_dim = 0;
    int num_classes = 0;

    std::size_t param_count() const;
    void validate() const;

    bool operator==(const ModelArch&) const = default;
};

struct LossSpec {
    double weight_decay = 0.0;

    bool operator==(const LossSpec&) const = default;
};

/// Architecture plus loss; shared by the server and every client.
struct ModelSpec {
    ModelArch arch;
    LossSpec loss;

    bool operator==(const ModelSpec&) const = default;
};

/// Uniform Glorot initialisation for weights, zero biases.
ParamVector init_params(const ModelArch& arch, Rng& rng);

/// 1 for parameters subject to weight decay (weights), 0 for biases.
std::vector<double> decay_mask(const ModelArch& arch);

/// Class probabilities for one example.
std::vector<double> forward(const ModelArch& arch, const ParamVector& x, std::span<const double> features);

/// Predicted class, ties broken towards the lowest index.
int predict(const ModelArch& arch, const ParamVector& x, std::span<const double> features);

/// Mean cross-entropy plus (weight_decay / 2) * |weights|^2.
double loss(const ModelSpec& model, const ParamVector& x, const Dataset& batch);
double loss(const ModelSpec& model, const ParamVector& x, const Dataset& batch, std::span<const std::size_t> indices);

/// Analytic gradient of loss().
ParamVector gradient(const ModelSpec& model, const ParamVector& x, const Dataset& batch);
ParamVector gradient(const ModelSpec& model, const ParamVector& x, const Dataset& batch,
                     std::span<const std::size_t> indices);

/// Mean cross-entropy without decay.
double cross_entropy(const ModelArch& arch, const ParamVector& x, const Dataset& data);

}  // namespace rofsl
