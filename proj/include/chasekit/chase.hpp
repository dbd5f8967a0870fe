#ifndef CHASEKIT_CHASE_HPP
#define CHASEKIT_CHASE_HPP

#include <memory>

#include "chasekit/rules.hpp"

namespace chasekit {

enum class ChaseStatus {
    Terminated,        // no pair applicable to any leaf label
    NodeCapExceeded,
    StepCapExceeded,
    VerdictResolved,   // stopped early once the Goal verdict was sound
};

// Sound verdicts derivable before full termination: a terminated leaf
// without Goal refutes entailment; Goal on every terminated leaf and every
// unfinished branch label forces it (labels are monotone along paths).
enum class GoalVerdict { Entailed, NotEntailed, Unknown };

struct Strategy {
    enum Kind { Fifo, DatalogFirst, RuleOrderPriority } kind = Fifo;
    uint64_t seed = 0;

    static Strategy parse(const std::string& name, uint64_t seed);
    std::string name() const;
};

struct ChaseCaps {
    uint64_t max_nodes = 1'000'000;
    uint64_t max_steps = 10'000'000;
};

struct ChaseConfig {
    // Stop as soon as the Goal verdict is sound, without saturating the tree.
    bool stop_on_verdict = false;
    // Merge children whose instantiated disjuncts coincide syntactically
    // (default keeps the literal k-children semantics).
    bool collapse_duplicate_children = false;
    // Branch step budget before a branch is parked in favour of siblings;
    // parked branches are resumed with a grown budget.
    uint64_t initial_branch_budget = 1ull << 16;
    int jobs = 1;
};

struct ChaseStats {
    uint64_t nodes = 0;
    uint64_t applications = 0;
    uint64_t max_depth = 0;
    uint64_t ms = 0;
};

struct AppliedStep {
    uint32_t node = 0;              // node the pair was applied to
    std::string rule_label;
    std::vector<std::pair<uint32_t, Term>> substitution;  // body var -> null
};

class ChaseResultImpl;

struct ChaseOutcome {
    ChaseStatus status = ChaseStatus::Terminated;
    GoalVerdict verdict = GoalVerdict::Unknown;
    ChaseStats stats;
    std::shared_ptr<ChaseResultImpl> result;

    std::vector<uint32_t> leaf_ids() const;          // terminated leaves
    Interpretation label(uint32_t node) const;        // materialized node label
    std::vector<Interpretation> leaves() const;
    std::vector<AppliedStep> application_log() const;
    std::string tree_json() const;                     // canonical null names
    uint32_t root() const;
    std::vector<uint32_t> children(uint32_t node) const;
    bool node_has_goal(uint32_t node) const;
    // unfinished branches without Goal in their label when the run stopped
    std::vector<uint32_t> goalless_frontier() const;
};

// True iff <rule, s> is applicable to i: s covers the body, s(body) is in i,
// and no disjunct head can be satisfied by extending s within i.
bool is_applicable(const Rule& rule, const Substitution& s, const Interpretation& i);

// True iff no pair <rule, substitution> from rs is applicable to i.
bool check_model(const Interpretation& i, const RuleSet& rs);

ChaseOutcome run_chase(const RuleSet& rs, const Interpretation& db, const Strategy& strategy,
                       const ChaseCaps& caps = {}, const ChaseConfig& config = {});

// Goal() in every leaf of a terminated outcome; throws NotTerminated otherwise.
bool goal_entailed(const ChaseOutcome& outcome);

// Resolve Goal entailment with sound early verdicts, refining unresolved runs
// by restarting the chase from frontier labels (models of the rules and a
// frontier label are exactly the models of the rules and the database that
// contain the label, so restarts preserve the verdict in both directions).
GoalVerdict resolve_goal(const RuleSet& rs, const Interpretation& db, const Strategy& strategy,
                         const ChaseCaps& caps = {}, const ChaseConfig& config = {});

PredId goal_pred();

}  // namespace chasekit

#endif
