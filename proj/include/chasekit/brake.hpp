#ifndef CHASEKIT_BRAKE_HPP
#define CHASEKIT_BRAKE_HPP

#include "chasekit/querygen.hpp"

namespace chasekit {

struct BrakeOutput {
    RuleSet rules;
    std::map<PredId, PredId> hat_of;  // original -> hatted
    PredId halt = 0, brake = 0, real = 0;
    std::map<std::pair<std::string, size_t>, PredId> marker;  // (rule label, disjunct) -> B
};

// The emergency-brake transformation: rules are rerouted through hatted
// predicates so that deriving Halt cuts every branch after finitely many
// further steps. Throws NameCollision when the input already uses the
// reserved predicates.
BrakeOutput brake_transform(const RuleSet& rs, const std::string& halt_name = "Halt");

// The four halt triggers used with the compiled query pipeline: inconsistent
// completions, LT cycles, order elements above Last or below First.
RuleSet halt_rules_for_query(const CompileContext& ctx);

// brake(R5, Halt) together with the halt rules.
RuleSet generate_r6(const CompileContext& ctx);

}  // namespace chasekit

#endif
