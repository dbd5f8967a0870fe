#ifndef CHASEKIT_QUERYGEN_HPP
#define CHASEKIT_QUERYGEN_HPP

#include "chasekit/chase.hpp"
#include "chasekit/turing.hpp"

namespace chasekit {

struct CompileContext {
    Schema schema;
    TuringMachine tm;
    uint32_t max_arity = 0;       // m
    uint32_t preds_per_arity = 0; // n
};

// Validates the schema shape (exactly n predicates per arity 1..m, no
// nullaries, no reserved names) and that the machine's alphabet covers the
// serialisation symbols of the schema. Throws InvalidSchema.
CompileContext make_context(Schema schema, TuringMachine tm);

// Cumulative rule sets for stages "r1".."r5".
RuleSet generate_stage(const CompileContext& ctx, const std::string& stage);

PredId gen_pred(const std::string& base, uint32_t arity);      // interns "$<base>"
std::string cell_pred_base(const std::string& token);          // tape symbol -> Cell pred base

// Shape of an R1 leaf: an ordered partition of the guessed domain plus a
// completion, or a named violation (LT cycles and merged First/Last guesses
// terminate the chase too but fall outside the order/completion shape).
struct R1Shape {
    bool ok = false;
    std::string violation;
    std::vector<std::vector<Term>> classes;  // T_1..T_k in LT order
    Term u_alpha, u_omega;
};
R1Shape decompose_r1_leaf(const Interpretation& leaf, const CompileContext& ctx, const Interpretation& db);

// The tape serialisation of the facts on the branch of `tree_leaf`, per the
// generated tape-construction order (arity, argument vector, predicate).
Tape branch_tape(const Interpretation& leaf, const CompileContext& ctx, Term tree_leaf);

struct LeafReport {
    uint32_t node = 0;
    bool conforms = false;
    std::string violation;
};

struct StructuralReport {
    std::vector<LeafReport> leaves;
    size_t conforming = 0;
    bool all_conform = true;

    std::string summary() const;
};

// Per-stage shape checks on every terminated leaf of the outcome.
StructuralReport structural_validate(const ChaseOutcome& outcome, const CompileContext& ctx,
                                     const std::string& stage);

}  // namespace chasekit

#endif
