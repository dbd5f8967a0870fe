#ifndef CHASEKIT_TURING_HPP
#define CHASEKIT_TURING_HPP

#include "chasekit/rules.hpp"

namespace chasekit {

// Tape content as a token sequence: "0", "1", "|", "_", "@pred", marker
// symbols, etc. Text rendering concatenates tokens; '@' introduces a
// multi-character symbol.
using Tape = std::vector<std::string>;

std::string tape_to_text(const Tape& t);
Tape tape_from_text(std::string_view text);

struct TmTransition {
    int state = -1;
    int symbol = -1;
    int dir = 0;  // -1 left, +1 right
    bool defined = false;
};

struct TuringMachine {
    std::vector<std::string> state_names;
    std::vector<std::string> symbol_names;
    int initial = -1, accept = -1, reject = -1;
    int blank = -1;
    std::vector<std::vector<TmTransition>> delta;  // [state][symbol]

    int state_id(const std::string& name) const;
    int symbol_id(const std::string& name) const;   // -1 if unknown
    bool halting(int state) const { return state == accept || state == reject; }
    void validate() const;  // totality, accept != reject, no outgoing from halting
};

// `.tm` text format: `states:`, `initial:`, `accept:`, `reject:`, `blank:`,
// `alphabet:` headers, then one `delta: q a -> r b R|L` line per pair.
TuringMachine parse_tm(std::string_view text);
TuringMachine load_tm(const std::string& path);

struct Configuration {
    std::vector<int> tape;
    size_t head = 0;
    int state = -1;
};

enum class TmStatus { Accept, Reject, StepCapExceeded };

struct TmRun {
    TmStatus status = TmStatus::Reject;
    Configuration final_config;
    uint64_t steps = 0;
};

// Deterministic simulation from the initial state at head 0; blanks appended
// on demand; a left move at cell 0 throws MachineViolation.
TmRun run_tm(const TuringMachine& m, const Tape& input, uint64_t step_cap = 1'000'000);

// Configuration trace under the grow-by-one convention: the start
// configuration is the input plus one trailing blank and every step appends
// one more blank cell, so configuration i has |input| + i cells.
std::vector<Configuration> comp_trace(const TuringMachine& m, const Tape& input, uint64_t step_cap);

// Canonical serialisation: nulls numbered 1..n canonically, MSB-first binary
// without leading zeros, facts in canonical order.
Tape serialize_db(const Interpretation& db, const Schema& schema);

// Serialisation under an explicit injection (null -> binary word) and fact
// order; used for serialisation-invariance checks.
Tape serialize_db_custom(const Interpretation& db, const Schema& schema,
                         const std::map<int64_t, std::string>& word_of,
                         const std::vector<size_t>& fact_order);

Interpretation deserialize(const Tape& s, const Schema& schema);

// Facts over depth-tagged nulls ordered for tape construction: predicates by
// (arity, index), arguments lexicographically with deeper nodes first.
std::vector<Atom> order_facts(const std::vector<Atom>& facts, const std::map<int64_t, int>& depth_of,
                              const Schema& schema);

// Predicates of one arity in index order (lexicographic display name).
std::vector<PredId> preds_of_arity(const Schema& schema, uint32_t arity);

}  // namespace chasekit

#endif
