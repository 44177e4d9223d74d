#include "rofsl/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "rofsl/errors.hpp"

namespace rofsl {

std::string to_string(BehaviorKind kind) {
    switch (kind) {
        case BehaviorKind::Honest:
            return "honest";
        case BehaviorKind::SignFlip:
            return "sign_flip";
        case BehaviorKind::LabelFlip:
            return "label_flip";
    }
    return "?";
}

std::vector<Behavior> assign_attackers(std::size_t num_clients, double beta, Rng& rng, const AttackRanges& ranges) {
    if (!(beta >= 0.0 && beta < 1.0)) {
        throw ConfigError(fmt::format("attack.beta: must lie in [0, 1), got {}", beta));
    }
    for (const NuRange& r : {ranges.sign_flip, ranges.label_flip}) {
        if (!(r.lo > 0.0 && r.lo <= r.hi)) throw ConfigError("attack: nu ranges need 0 < lo <= hi");
    }

    std::vector<std::size_t> ids(num_clients);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::shuffle(ids.begin(), ids.end(), rng);

    const auto num_malicious = static_cast<std::size_t>(std::llround(beta * static_cast<double>(num_clients)));
    const std::size_t num_sign = (num_malicious + 1) / 2;

    std::vector<Behavior> out(num_clients);
    for (std::size_t k = 0; k < num_malicious; ++k) {
        out[ids[k]].kind = k < num_sign ? BehaviorKind::SignFlip : BehaviorKind::LabelFlip;
    }
    // Strengths in ascending id order, so they depend only on the assignment.
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& b : out) {
        if (!b.malicious()) continue;
        const NuRange& r = b.kind == BehaviorKind::SignFlip ? ranges.sign_flip : ranges.label_flip;
        b.nu = r.lo + (r.hi - r.lo) * unit(rng);
    }
    return out;
}

ParamVector sign_flip_update(const ModelSpec& model, const ClientData& client, double nu, const ParamVector& x_t,
                             const SgdPlan& plan, Rng& rng) {
    const ParamVector trained = honest_client_round(model, client, x_t, plan, rng);
    return scale(-nu, subtract(trained, x_t));
}

ParamVector sign_flip_round(const ModelSpec& model, const ClientData& client, double nu, const ParamVector& x_t,
                            const SgdPlan& plan, Rng& rng) {
    return add(x_t, sign_flip_update(model, client, nu, x_t, plan, rng));
}

ParamVector label_flip_round(const ModelSpec& model, const ClientData& client, double nu, const ParamVector& x_t,
                             const SgdPlan& plan, Rng& rng) {
    SgdPlan poisoned = plan;
    poisoned.learning_rate = nu * plan.learning_rate;
    return local_sgd(model, x_t, shift_labels(client.shard, 1), poisoned, rng);
}

ParamVector client_update(const ModelSpec& model, const ClientData& client, const Behavior& behavior,
                          const ParamVector& x_t, const SgdPlan& plan, Rng& rng) {
    switch (behavior.kind) {
        case BehaviorKind::Honest:
            return subtract(honest_client_round(model, client, x_t, plan, rng), x_t);
        case BehaviorKind::SignFlip:
            return sign_flip_update(model, client, behavior.nu, x_t, plan, rng);
        case BehaviorKind::LabelFlip:
            return subtract(label_flip_round(model, client, behavior.nu, x_t, plan, rng), x_t);
    }
    return ParamVector(x_t.size(), 0.0);
}

}  // namespace rofsl
