#pragma once

#include <cstddef>

#include "rofsl/data_forge.hpp"
#include "rofsl/model_zoo.hpp"
#include "rofsl/param_space.hpp"
#include "rofsl/rng.hpp"

namespace rofsl {

/// One LocalSGD invocation. loss_scale multiplies the whole loss (so also the
/// gradient and the decay term); it is 1 for clients and gamma for the server.
struct SgdPlan {
    double learning_rate = 0.1;
    std::size_t num_steps = 1;
    std::size_t batch_size = 1;
    double loss_scale = 1.0;

    void validate() const;
    bool operator==(const SgdPlan&) const = default;
};

/// Runs exactly plan.num_steps steps y <- y - (lr * loss_scale) * g(y) with
/// minibatches taken from shuffled passes over data. A trailing short batch is
/// used as is. If grad_evals is non-null it is incremented once per gradient.
ParamVector local_sgd(const ModelSpec& model, const ParamVector& x0, const Dataset& data, const SgdPlan& plan,
                      Rng& rng, std::size_t* grad_evals = nullptr);

/// E * ceil(n / B).
std::size_t epochs_to_steps(std::size_t num_epochs, std::size_t shard_size, std::size_t batch_size);

/// Identity and data of one simulated client.
struct ClientData {
    int id = 0;
    Dataset shard;
    double weight = 0.0;  // p_i = n_i / n
};

/// The local model an honest client returns after training from x_t.
ParamVector honest_client_round(const ModelSpec& model, const ClientData& client, const ParamVector& x_t,
                                const SgdPlan& plan, Rng& rng);

}  // namespace rofsl
