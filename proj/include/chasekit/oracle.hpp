#ifndef CHASEKIT_ORACLE_HPP
#define CHASEKIT_ORACLE_HPP

#include "chasekit/querygen.hpp"

// Brute-force ground truth used by the test suites only.

namespace chasekit::oracle {

struct QueryOracle {
    TuringMachine tm;
    Schema schema;
    uint64_t step_cap = 1'000'000;
    bool randomized_serialisations = true;  // cross-check 4 random encodings
};

// Decide the query by running the machine on a canonical serialisation of
// the database, cross-checked against randomized serialisations.
bool decide_query_oracle(const QueryOracle& o, const Interpretation& db, uint64_t seed = 0);

// All subset-minimal models of a variable-free disjunctive program.
std::vector<Interpretation> enumerate_minimal_models(const RuleSet& ground, const Interpretation& db);

struct HomClosureReport {
    size_t checked = 0;
    std::vector<size_t> violations;  // indexes of violating pairs
};

HomClosureReport hom_closure_check(const QueryOracle& o,
                                   const std::vector<std::pair<Interpretation, Interpretation>>& corpus);

// The R1 universal model set: ordered partitions of the database nulls plus
// two guessed endpoints, with the completions forced by the copied facts and
// the congruence closure.
std::vector<Interpretation> enumerate_r1_models(const CompileContext& ctx, const Interpretation& db);

// All ordered partitions of `elems` whose first block contains `first` and
// whose last block contains `last`.
std::vector<std::vector<std::vector<Term>>> ordered_partitions(const std::vector<Term>& elems, Term first,
                                                               Term last);

// --- deterministic random corpora ---------------------------------------

struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ull) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    uint64_t below(uint64_t n) { return n ? next() % n : 0; }
    bool flip() { return next() & 1; }
};

Interpretation random_database(const Schema& schema, Rng& rng, int max_nulls = 5, int max_facts = 8);

// Pairs (D, D') with a known homomorphism D -> D': null collapses plus extra
// facts on the target side.
std::vector<std::pair<Interpretation, Interpretation>> random_hom_pairs(const Schema& schema, size_t count,
                                                                        uint64_t seed);

// Small random rule sets biased towards terminating shapes (for the brake
// conservation corpus) together with a database over their body predicates.
struct RandomCase {
    RuleSet rules;
    Interpretation db;
};
RandomCase random_small_case(uint64_t seed);

// Random constrained splits: sigma1 disjunctive Datalog, sigma2 stratified
// existential rules whose heads do not feed sigma1.
struct RandomSplitCase {
    RuleSet sigma1;
    RuleSet sigma2;
    Interpretation db;
};
RandomSplitCase random_split_case(uint64_t seed);

// Ground disjunctive programs over a bounded Herbrand base including Goal.
struct GroundCase {
    RuleSet rules;
    Interpretation db;
};
GroundCase random_ground_case(uint64_t seed, int herbrand_atoms = 10);

}  // namespace chasekit::oracle

#endif
