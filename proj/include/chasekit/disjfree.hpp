#ifndef CHASEKIT_DISJFREE_HPP
#define CHASEKIT_DISJFREE_HPP

#include "chasekit/querygen.hpp"

namespace chasekit {

struct Split {
    RuleSet sigma1;  // disjunctive Datalog plus empty-body existential rules
    RuleSet sigma2;  // non-disjunctive existential rules
};

// Every rule gets exactly two single-atom disjuncts: single disjuncts are
// duplicated, longer heads are chained through fresh auxiliary predicates,
// and conjunctive disjuncts are flattened through fresh defined predicates.
// Throws NotDatalog on existential input.
RuleSet normalize_two_disjuncts(const RuleSet& rs);

// The world construction: collect database facts into init worlds, branch
// per disjunctive rule, simulate the existential part inside each world, and
// aggregate acceptance back to the initial worlds. sigma1 must be in
// two-disjunct normal form (empty-body existential rules are passed through
// unchanged and their inferences feed the worlds like database facts).
RuleSet remove_disjunctions(const Split& split, bool acc_debug = false);

// The full compiled pipeline: the brake-transformed query rules split into
// their disjunctive Datalog part and existential part, with disjunctions
// removed. The output is disjunction-free.
RuleSet build_pipeline(const CompileContext& ctx);

}  // namespace chasekit

#endif
