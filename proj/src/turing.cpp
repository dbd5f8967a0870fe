#include "chasekit/turing.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace chasekit {

std::string tape_to_text(const Tape& t) {
    std::string out;
    for (const std::string& tok : t) out += tok;
    return out;
}

Tape tape_from_text(std::string_view text) {
    Tape out;
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '@') {
            size_t j = i + 1;
            while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
            if (j == i + 1) throw Error("MalformedSerialisation", "'@' without a predicate name");
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, c);
            ++i;
        }
    }
    return out;
}

int TuringMachine::state_id(const std::string& name) const {
    for (size_t i = 0; i < state_names.size(); ++i)
        if (state_names[i] == name) return static_cast<int>(i);
    return -1;
}

int TuringMachine::symbol_id(const std::string& name) const {
    for (size_t i = 0; i < symbol_names.size(); ++i)
        if (symbol_names[i] == name) return static_cast<int>(i);
    return -1;
}

void TuringMachine::validate() const {
    if (initial < 0 || accept < 0 || reject < 0 || blank < 0)
        throw Error("ValidationError", "machine is missing initial/accept/reject state or blank symbol");
    if (accept == reject) throw Error("ValidationError", "accept and reject states must differ");
    for (size_t q = 0; q < state_names.size(); ++q) {
        for (size_t a = 0; a < symbol_names.size(); ++a) {
            bool defined = delta[q][a].defined;
            if (halting(static_cast<int>(q))) {
                if (defined)
                    throw Error("ValidationError", "halting state " + state_names[q] + " has an outgoing transition");
            } else if (!defined) {
                throw Error("ValidationError",
                            "missing transition for (" + state_names[q] + ", " + symbol_names[a] + ")");
            }
        }
    }
}

TuringMachine parse_tm(std::string_view text) {
    TuringMachine m;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    std::string initial_name, accept_name, reject_name, blank_name;
    struct RawDelta {
        std::string q, a, r, b, d;
        int line;
    };
    std::vector<RawDelta> raw;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head)) continue;
        if (head == "states:") {
            std::string s;
            while (ls >> s) m.state_names.push_back(s);
        } else if (head == "initial:") {
            ls >> initial_name;
        } else if (head == "accept:") {
            ls >> accept_name;
        } else if (head == "reject:") {
            ls >> reject_name;
        } else if (head == "blank:") {
            ls >> blank_name;
        } else if (head == "alphabet:") {
            std::string s;
            while (ls >> s) m.symbol_names.push_back(s);
        } else if (head == "delta:") {
            RawDelta d;
            d.line = lineno;
            std::string arrow;
            if (!(ls >> d.q >> d.a >> arrow >> d.r >> d.b >> d.d) || arrow != "->")
                throw parse_error(lineno, 1, "expected `delta: q a -> r b R|L`");
            raw.push_back(std::move(d));
        } else {
            throw parse_error(lineno, 1, "unknown directive " + head);
        }
    }
    m.initial = m.state_id(initial_name);
    m.accept = m.state_id(accept_name);
    m.reject = m.state_id(reject_name);
    m.blank = m.symbol_id(blank_name);
    m.delta.assign(m.state_names.size(), std::vector<TmTransition>(m.symbol_names.size()));
    for (const RawDelta& d : raw) {
        int q = m.state_id(d.q), a = m.symbol_id(d.a), r = m.state_id(d.r), b = m.symbol_id(d.b);
        if (q < 0 || r < 0) throw parse_error(d.line, 1, "unknown state in delta line");
        if (a < 0 || b < 0) throw parse_error(d.line, 1, "unknown symbol in delta line");
        int dir;
        if (d.d == "R")
            dir = 1;
        else if (d.d == "L")
            dir = -1;
        else
            throw parse_error(d.line, 1, "direction must be R or L");
        if (m.delta[q][a].defined) throw parse_error(d.line, 1, "duplicate transition");
        m.delta[q][a] = TmTransition{r, b, dir, true};
    }
    m.validate();
    return m;
}

TuringMachine load_tm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("MissingFile", "cannot open machine file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_tm(ss.str());
}

namespace {

std::vector<int> input_symbols(const TuringMachine& m, const Tape& input) {
    std::vector<int> tape;
    tape.reserve(input.size());
    for (const std::string& tok : input) {
        int s = m.symbol_id(tok);
        if (s < 0) throw Error("InvalidInput", "symbol " + tok + " is not in the tape alphabet");
        tape.push_back(s);
    }
    return tape;
}

}  // namespace

TmRun run_tm(const TuringMachine& m, const Tape& input, uint64_t step_cap) {
    TmRun run;
    Configuration c;
    c.tape = input_symbols(m, input);
    c.head = 0;
    c.state = m.initial;
    while (!m.halting(c.state)) {
        if (run.steps >= step_cap) {
            run.status = TmStatus::StepCapExceeded;
            run.final_config = c;
            return run;
        }
        if (c.head >= c.tape.size()) c.tape.resize(c.head + 1, m.blank);
        const TmTransition& t = m.delta[c.state][c.tape[c.head]];
        c.tape[c.head] = t.symbol;
        c.state = t.state;
        if (t.dir < 0) {
            if (c.head == 0)
                throw Error("MachineViolation", "attempted to move left at the first tape cell");
            --c.head;
        } else {
            ++c.head;
        }
        ++run.steps;
    }
    run.status = c.state == m.accept ? TmStatus::Accept : TmStatus::Reject;
    run.final_config = c;
    return run;
}

std::vector<Configuration> comp_trace(const TuringMachine& m, const Tape& input, uint64_t step_cap) {
    std::vector<Configuration> trace;
    Configuration c;
    c.tape = input_symbols(m, input);
    c.tape.push_back(m.blank);
    c.head = 0;
    c.state = m.initial;
    trace.push_back(c);
    uint64_t steps = 0;
    while (!m.halting(c.state) && steps < step_cap) {
        const TmTransition& t = m.delta[c.state][c.tape[c.head]];
        c.tape[c.head] = t.symbol;
        c.state = t.state;
        if (t.dir < 0) {
            if (c.head == 0)
                throw Error("MachineViolation", "attempted to move left at the first tape cell");
            --c.head;
        } else {
            ++c.head;
        }
        c.tape.push_back(m.blank);
        if (c.head >= c.tape.size()) c.tape.resize(c.head + 1, m.blank);
        trace.push_back(c);
        ++steps;
    }
    return trace;
}

namespace {

std::string msb_binary(uint64_t v) {
    std::string out;
    while (v > 0) {
        out += static_cast<char>('0' + (v & 1));
        v >>= 1;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

void append_word(Tape& tape, const std::string& word) {
    if (word.empty()) throw Error("MalformedSerialisation", "empty binary block");
    for (char c : word) tape.emplace_back(1, c);
}

}  // namespace

Tape serialize_db(const Interpretation& db, const Schema& schema) {
    for (const Atom& a : db.atoms())
        if (!schema.contains(a.pred))
            throw Error("SchemaMismatch",
                        "fact predicate " + Symbols::pred_name(a.pred) + " is not in the schema");
    std::vector<Term> order = canonical_null_order(db);
    std::map<int64_t, std::string> word_of;
    for (size_t i = 0; i < order.size(); ++i) word_of[order[i].raw] = msb_binary(i + 1);
    // facts sorted by (display predicate name, canonical arg numbers)
    std::vector<std::pair<std::vector<std::string>, size_t>> keys;
    for (size_t i = 0; i < db.atoms().size(); ++i) {
        const Atom& a = db.atoms()[i];
        std::vector<std::string> key;
        key.push_back(display_pred_name(Symbols::pred_name(a.pred)));
        for (Term t : a.args) {
            std::string w = word_of[t.raw];
            key.push_back(std::string(8 - std::min<size_t>(8, w.size()), '0') + w);  // length-stable compare
        }
        keys.emplace_back(std::move(key), i);
    }
    std::sort(keys.begin(), keys.end());
    std::vector<size_t> fact_order;
    for (auto& [k, i] : keys) fact_order.push_back(i);
    return serialize_db_custom(db, schema, word_of, fact_order);
}

Tape serialize_db_custom(const Interpretation& db, const Schema& schema,
                         const std::map<int64_t, std::string>& word_of,
                         const std::vector<size_t>& fact_order) {
    Tape tape;
    for (size_t i : fact_order) {
        const Atom& a = db.atoms().at(i);
        if (!schema.contains(a.pred))
            throw Error("SchemaMismatch",
                        "fact predicate " + Symbols::pred_name(a.pred) + " is not in the schema");
        tape.push_back("@" + display_pred_name(Symbols::pred_name(a.pred)));
        tape.emplace_back("|");
        for (Term t : a.args) {
            append_word(tape, word_of.at(t.raw));
            tape.emplace_back("|");
        }
    }
    return tape;
}

Interpretation deserialize(const Tape& s, const Schema& schema) {
    std::unordered_map<std::string, Term> null_of;
    std::vector<Atom> atoms;
    size_t i = 0;
    auto next = [&]() -> const std::string& {
        if (i >= s.size()) throw Error("MalformedSerialisation", "unexpected end of serialisation");
        return s[i++];
    };
    while (i < s.size()) {
        std::string ptok = next();
        if (ptok.empty() || ptok[0] != '@')
            throw Error("MalformedSerialisation", "expected a predicate symbol, got " + ptok);
        std::string name = internal_pred_name(ptok.substr(1));
        PredId pred = 0;
        bool found = false;
        for (PredId p : schema.predicates)
            if (Symbols::pred_name(p) == name) {
                pred = p;
                found = true;
            }
        if (!found) throw Error("MalformedSerialisation", "unknown predicate symbol " + ptok);
        if (next() != "|") throw Error("MalformedSerialisation", "expected '|' after predicate symbol");
        std::vector<Term> args;
        for (uint32_t k = 0; k < Symbols::pred_arity(pred); ++k) {
            std::string word;
            while (true) {
                const std::string& tok = next();
                if (tok == "|") break;
                if (tok != "0" && tok != "1")
                    throw Error("MalformedSerialisation", "binary block contains " + tok);
                word += tok;
            }
            if (word.empty()) throw Error("MalformedSerialisation", "empty binary block");
            auto it = null_of.find(word);
            if (it == null_of.end()) it = null_of.emplace(word, Symbols::fresh_null()).first;
            args.push_back(it->second);
        }
        atoms.emplace_back(pred, std::move(args));
    }
    return Interpretation(std::move(atoms));
}

std::vector<PredId> preds_of_arity(const Schema& schema, uint32_t arity) {
    std::vector<std::pair<std::string, PredId>> named;
    for (PredId p : schema.predicates)
        if (Symbols::pred_arity(p) == arity)
            named.emplace_back(display_pred_name(Symbols::pred_name(p)), p);
    std::sort(named.begin(), named.end());
    std::vector<PredId> out;
    for (auto& [n, p] : named) out.push_back(p);
    return out;
}

std::vector<Atom> order_facts(const std::vector<Atom>& facts, const std::map<int64_t, int>& depth_of,
                              const Schema& schema) {
    std::map<PredId, std::pair<uint32_t, size_t>> pred_rank;  // (arity, index)
    for (uint32_t a = 1; a <= schema.max_arity(); ++a) {
        auto preds = preds_of_arity(schema, a);
        for (size_t i = 0; i < preds.size(); ++i) pred_rank[preds[i]] = {a, i};
    }
    std::vector<Atom> out = facts;
    auto node_rank = [&](Term t) { return -depth_of.at(t.raw); };  // deeper first
    std::sort(out.begin(), out.end(), [&](const Atom& x, const Atom& y) {
        auto rx = pred_rank.at(x.pred), ry = pred_rank.at(y.pred);
        if (rx != ry) return rx < ry;
        for (size_t i = 0; i < x.args.size(); ++i) {
            int nx = node_rank(x.args[i]), ny = node_rank(y.args[i]);
            if (nx != ny) return nx < ny;
        }
        return false;
    });
    return out;
}

}  // namespace chasekit
