#include "rofsl/local_trainer.hpp"

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "rofsl/errors.hpp"

namespace rofsl {

void SgdPlan::validate() const {
    // A zero rate is allowed: it is the natural limit of a label-flip attacker
    // with nu -> 0 and is used by the identity checks.
    if (!(learning_rate >= 0.0)) throw ConfigError("sgd: learning_rate must be >= 0");
    if (num_steps < 1) throw ConfigError("sgd: num_steps must be >= 1");
    if (batch_size < 1) throw ConfigError("sgd: batch_size must be >= 1");
    if (!(loss_scale > 0.0)) throw ConfigError("sgd: loss_scale must be > 0");
}

ParamVector local_sgd(const ModelSpec& model, const ParamVector& x0, const Dataset& data, const SgdPlan& plan,
                      Rng& rng, std::size_t* grad_evals) {
    plan.validate();
    if (data.empty()) throw std::invalid_argument("local_sgd: empty dataset");

    const double step = plan.learning_rate * plan.loss_scale;
    const std::size_t batch = std::min(plan.batch_size, data.size());

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();

    ParamVector y = x0;
    for (std::size_t k = 0; k < plan.num_steps; ++k) {
        if (cursor >= order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const std::size_t len = std::min(batch, order.size() - cursor);
        const std::span<const std::size_t> idx(order.data() + cursor, len);
        cursor += len;

        const ParamVector g = gradient(model, y, data, idx);
        if (grad_evals != nullptr) ++*grad_evals;
        axpy_inplace(-step, g, y);
    }
    return y;
}

std::size_t epochs_to_steps(std::size_t num_epochs, std::size_t shard_size, std::size_t batch_size) {
    if (num_epochs < 1 || shard_size < 1 || batch_size < 1) {
        throw ConfigError("epochs_to_steps: all arguments must be positive");
    }
    return num_epochs * ((shard_size + batch_size - 1) / batch_size);
}

ParamVector honest_client_round(const ModelSpec& model, const ClientData& client, const ParamVector& x_t,
                                const SgdPlan& plan, Rng& rng) {
    return local_sgd(model, x_t, client.shard, plan, rng);
}

}  // namespace rofsl
