#ifndef CHASEKIT_RULES_HPP
#define CHASEKIT_RULES_HPP

#include <string>
#include <vector>

#include "chasekit/model.hpp"

namespace chasekit {

struct Disjunct {
    std::vector<uint32_t> evars;  // existential variables, declaration order
    std::vector<Atom> atoms;      // non-empty

    bool has_existentials() const { return !evars.empty(); }
};

struct Rule {
    std::string label;
    std::vector<Atom> body;            // over variables only
    std::vector<Disjunct> disjuncts;   // non-empty

    bool is_disjunctive() const { return disjuncts.size() > 1; }
    bool is_datalog() const {
        for (const Disjunct& d : disjuncts)
            if (d.has_existentials()) return false;
        return true;
    }

    std::vector<uint32_t> body_vars() const;            // first-occurrence order
    std::vector<uint32_t> frontier(size_t disjunct) const;  // body vars used in that disjunct

    friend bool operator==(const Rule& a, const Rule& b);
};

struct Schema {
    std::vector<PredId> predicates;  // sorted, unique

    bool contains(PredId p) const;
    void add(PredId p);
    uint32_t max_arity() const;

    friend bool operator==(const Schema& a, const Schema& b) { return a.predicates == b.predicates; }
};

struct RuleSet {
    std::vector<Rule> rules;

    void add(Rule r);  // validates and enforces unique labels
    const Rule* find(const std::string& label) const;
    std::vector<PredId> predicates() const;  // all predicates occurring anywhere, sorted

    friend bool operator==(const RuleSet& a, const RuleSet& b) { return a.rules == b.rules; }
};

// Throws ValidationError if the rule breaks the syntactic invariants:
// existential variables disjoint from body variables and from each other,
// undeclared head variables must occur in the body, heads non-empty.
void validate_rule(const Rule& r);

// Concrete syntax:
//   rule     := ["@" label ":"] [conj] "->" disjunct {";" disjunct} "."
//   disjunct := ["exists" var {"," var} "."] conj
//   conj     := atom {"," atom}
// `#` starts a comment. Unlabelled rules get labels r1, r2, ...
RuleSet parse_rules(std::string_view text);
RuleSet load_rules(const std::string& path);
std::string print_rules(const RuleSet& rs);
std::string print_rule(const Rule& r);

// Predicates occurring in the rule set but in no rule head.
Schema input_schema(const RuleSet& rs);

// Schema text format: one `name/arity` per line.
Schema parse_schema(std::string_view text);
Schema load_schema(const std::string& path);
std::string print_schema(const Schema& s);

// True iff for some n > 0 the schema has exactly n predicates of every arity
// 1..m (m = max arity) and no nullary predicate.
bool validate_decider_inputs(const Schema& schema);

}  // namespace chasekit

#endif
