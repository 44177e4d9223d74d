#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rofsl/local_trainer.hpp"
#include "rofsl/param_space.hpp"
#include "rofsl/rng.hpp"

namespace rofsl {

enum class BehaviorKind { Honest, SignFlip, LabelFlip };

std::string to_string(BehaviorKind kind);

struct Behavior {
    BehaviorKind kind = BehaviorKind::Honest;
    double nu = 0.0;  // attack strength, unused for honest clients

    bool malicious() const { return kind != BehaviorKind::Honest; }
    bool operator==(const Behavior&) const = default;
};

struct NuRange {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const NuRange&) const = default;
};

struct AttackRanges {
    NuRange sign_flip{0.1, 10.1};
    NuRange label_flip{0.1, 2.1};
    bool operator==(const AttackRanges&) const = default;
};

/// Marks round(beta * N) clients, chosen uniformly without replacement, as
/// malicious. The first ceil(m / 2) of them in draw order flip signs, the
/// rest flip labels. nu is drawn once per attacker from its kind's range.
std::vector<Behavior> assign_attackers(std::size_t num_clients, double beta, Rng& rng,
                                       const AttackRanges& ranges = {});

/// Update reported by a sign-flip attacker: -nu times the honest update.
ParamVector sign_flip_update(const ModelSpec& model, const ClientData& client, double nu, const ParamVector& x_t,
                             const SgdPlan& plan, Rng& rng);

/// Model reported by a sign-flip attacker: x_t - nu * (x_honest - x_t).
ParamVector sign_flip_round(const ModelSpec& model, const ClientData& client, double nu, const ParamVector& x_t,
                            const SgdPlan& plan, Rng& rng);

/// Model obtained by training on labels shifted by one with learning rate
/// nu * plan.learning_rate.
ParamVector label_flip_round(const ModelSpec& model, const ClientData& client, double nu, const ParamVector& x_t,
                             const SgdPlan& plan, Rng& rng);

/// Update a client uploads for the given behavior. Honest and label-flip
/// clients report their trained model minus x_t.
ParamVector client_update(const ModelSpec& model, const ClientData& client, const Behavior& behavior,
                          const ParamVector& x_t, const SgdPlan& plan, Rng& rng);

}  // namespace rofsl
