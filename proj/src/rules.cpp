#include "chasekit/rules.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace chasekit {

std::vector<uint32_t> Rule::body_vars() const {
    std::vector<uint32_t> out;
    std::set<uint32_t> seen;
    for (const Atom& a : body)
        for (Term t : a.args)
            if (t.is_var() && seen.insert(t.var_id()).second) out.push_back(t.var_id());
    return out;
}

std::vector<uint32_t> Rule::frontier(size_t disjunct) const {
    std::set<uint32_t> bv;
    for (const Atom& a : body)
        for (Term t : a.args)
            if (t.is_var()) bv.insert(t.var_id());
    std::vector<uint32_t> out;
    std::set<uint32_t> seen;
    for (const Atom& a : disjuncts.at(disjunct).atoms)
        for (Term t : a.args)
            if (t.is_var() && bv.count(t.var_id()) && seen.insert(t.var_id()).second)
                out.push_back(t.var_id());
    return out;
}

bool operator==(const Rule& a, const Rule& b) {
    if (a.label != b.label || a.body != b.body || a.disjuncts.size() != b.disjuncts.size()) return false;
    for (size_t i = 0; i < a.disjuncts.size(); ++i) {
        if (a.disjuncts[i].evars != b.disjuncts[i].evars || a.disjuncts[i].atoms != b.disjuncts[i].atoms)
            return false;
    }
    return true;
}

bool Schema::contains(PredId p) const {
    return std::binary_search(predicates.begin(), predicates.end(), p);
}

void Schema::add(PredId p) {
    auto it = std::lower_bound(predicates.begin(), predicates.end(), p);
    if (it == predicates.end() || *it != p) predicates.insert(it, p);
}

uint32_t Schema::max_arity() const {
    uint32_t m = 0;
    for (PredId p : predicates) m = std::max(m, Symbols::pred_arity(p));
    return m;
}

void RuleSet::add(Rule r) {
    validate_rule(r);
    for (const Rule& e : rules)
        if (e.label == r.label) throw Error("ValidationError", "duplicate rule label " + r.label);
    rules.push_back(std::move(r));
}

const Rule* RuleSet::find(const std::string& label) const {
    for (const Rule& r : rules)
        if (r.label == label) return &r;
    return nullptr;
}

std::vector<PredId> RuleSet::predicates() const {
    std::set<PredId> s;
    for (const Rule& r : rules) {
        for (const Atom& a : r.body) s.insert(a.pred);
        for (const Disjunct& d : r.disjuncts)
            for (const Atom& a : d.atoms) s.insert(a.pred);
    }
    return std::vector<PredId>(s.begin(), s.end());
}

void validate_rule(const Rule& r) {
    if (r.disjuncts.empty())
        throw Error("ValidationError", "rule " + r.label + ": head must be non-empty");
    std::set<uint32_t> bv;
    for (const Atom& a : r.body)
        for (Term t : a.args) {
            if (!t.is_var())
                throw Error("ValidationError", "rule " + r.label + ": body terms must be variables");
            bv.insert(t.var_id());
        }
    std::set<uint32_t> all_evars;
    for (size_t i = 0; i < r.disjuncts.size(); ++i) {
        const Disjunct& d = r.disjuncts[i];
        if (d.atoms.empty())
            throw Error("ValidationError", "rule " + r.label + ": disjunct " + std::to_string(i + 1) + " has no atoms");
        std::set<uint32_t> ev(d.evars.begin(), d.evars.end());
        if (ev.size() != d.evars.size())
            throw Error("ValidationError", "rule " + r.label + ": repeated existential variable");
        for (uint32_t v : d.evars) {
            if (bv.count(v))
                throw Error("ValidationError", "rule " + r.label + ": existential variable " +
                                                   Symbols::var_name(v) + " also occurs in the body");
            if (!all_evars.insert(v).second)
                throw Error("ValidationError", "rule " + r.label + ": existential variable " +
                                                   Symbols::var_name(v) + " reused across disjuncts");
        }
        for (const Atom& a : d.atoms)
            for (Term t : a.args) {
                if (!t.is_var())
                    throw Error("ValidationError", "rule " + r.label + ": head terms must be variables");
                if (!ev.count(t.var_id()) && !bv.count(t.var_id()))
                    throw Error("ValidationError", "rule " + r.label + ": head variable " +
                                                       Symbols::var_name(t.var_id()) +
                                                       " neither existential nor in the body");
            }
    }
}

namespace {

struct RuleScanner {
    std::string_view text;
    size_t pos = 0;
    int line = 1, col = 1;

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    void advance() {
        if (text[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }
    void skip() {
        while (!eof()) {
            if (peek() == '#') {
                while (!eof() && peek() != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(peek()))) {
                advance();
            } else {
                return;
            }
        }
    }
    bool try_consume(std::string_view s) {
        skip();
        if (text.substr(pos, s.size()) != s) return false;
        for (size_t i = 0; i < s.size(); ++i) advance();
        return true;
    }
    void expect(std::string_view s) {
        if (!try_consume(s)) throw parse_error(line, col, "expected '" + std::string(s) + "'");
    }
    std::string ident() {
        skip();
        if (eof() || !(std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_'))
            throw parse_error(line, col, "expected identifier");
        std::string out;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
            out += peek();
            advance();
        }
        return out;
    }
    char next_nonspace() {
        skip();
        return eof() ? '\0' : peek();
    }
};

Atom parse_atom(RuleScanner& s) {
    std::string name = internal_pred_name(s.ident());
    std::vector<Term> args;
    s.expect("(");
    if (s.next_nonspace() != ')') {
        while (true) {
            args.push_back(Symbols::var(s.ident()));
            if (s.try_consume(",")) continue;
            break;
        }
    }
    s.expect(")");
    uint32_t arity = static_cast<uint32_t>(args.size());
    return Atom(Symbols::pred(name, arity), std::move(args));
}

std::vector<Atom> parse_conj(RuleScanner& s) {
    std::vector<Atom> atoms;
    atoms.push_back(parse_atom(s));
    while (true) {
        // a comma continues the conjunction unless the next token is "exists"
        size_t save_pos = s.pos;
        int save_line = s.line, save_col = s.col;
        if (!s.try_consume(",")) break;
        atoms.push_back(parse_atom(s));
        (void)save_pos;
        (void)save_line;
        (void)save_col;
    }
    return atoms;
}

Disjunct parse_disjunct(RuleScanner& s) {
    Disjunct d;
    size_t save_pos = s.pos;
    int save_line = s.line, save_col = s.col;
    std::string word;
    s.skip();
    if (!s.eof() && (std::isalpha(static_cast<unsigned char>(s.peek())) || s.peek() == '_')) {
        word = s.ident();
    }
    if (word == "exists") {
        while (true) {
            d.evars.push_back(Symbols::var(s.ident()).var_id());
            if (s.try_consume(",")) continue;
            break;
        }
        s.expect(".");
    } else {
        s.pos = save_pos;
        s.line = save_line;
        s.col = save_col;
    }
    d.atoms = parse_conj(s);
    return d;
}

}  // namespace

RuleSet parse_rules(std::string_view text) {
    RuleScanner s{text};
    RuleSet rs;
    int index = 0;
    while (true) {
        s.skip();
        if (s.eof()) break;
        ++index;
        Rule r;
        if (s.try_consume("@")) {
            r.label = s.ident();
            s.expect(":");
        } else {
            r.label = "r" + std::to_string(index);
        }
        if (s.next_nonspace() != '-') {  // non-empty body
            r.body = parse_conj(s);
        }
        s.expect("->");
        r.disjuncts.push_back(parse_disjunct(s));
        while (s.try_consume(";")) r.disjuncts.push_back(parse_disjunct(s));
        s.expect(".");
        rs.add(std::move(r));
    }
    return rs;
}

RuleSet load_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("MissingFile", "cannot open rules file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_rules(ss.str());
}

namespace {

std::string print_atom(const Atom& a) {
    std::string out = display_pred_name(Symbols::pred_name(a.pred));
    out += "(";
    for (size_t i = 0; i < a.args.size(); ++i) {
        if (i) out += ", ";
        out += Symbols::term_name(a.args[i]);
    }
    out += ")";
    return out;
}

}  // namespace

std::string print_rule(const Rule& r) {
    std::string out = "@" + r.label + ": ";
    for (size_t i = 0; i < r.body.size(); ++i) {
        if (i) out += ", ";
        out += print_atom(r.body[i]);
    }
    if (!r.body.empty()) out += " ";
    out += "->";
    for (size_t d = 0; d < r.disjuncts.size(); ++d) {
        out += d == 0 ? " " : " ; ";
        const Disjunct& dis = r.disjuncts[d];
        if (!dis.evars.empty()) {
            out += "exists ";
            for (size_t i = 0; i < dis.evars.size(); ++i) {
                if (i) out += ", ";
                out += Symbols::var_name(dis.evars[i]);
            }
            out += " . ";
        }
        for (size_t i = 0; i < dis.atoms.size(); ++i) {
            if (i) out += ", ";
            out += print_atom(dis.atoms[i]);
        }
    }
    out += ".";
    return out;
}

std::string print_rules(const RuleSet& rs) {
    std::string out;
    for (const Rule& r : rs.rules) {
        out += print_rule(r);
        out += "\n";
    }
    return out;
}

Schema input_schema(const RuleSet& rs) {
    std::set<PredId> heads;
    for (const Rule& r : rs.rules)
        for (const Disjunct& d : r.disjuncts)
            for (const Atom& a : d.atoms) heads.insert(a.pred);
    Schema s;
    for (PredId p : rs.predicates())
        if (!heads.count(p)) s.add(p);
    return s;
}

Schema parse_schema(std::string_view text) {
    Schema s;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    std::set<std::string> names;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        size_t e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        size_t slash = line.find('/');
        if (slash == std::string::npos) throw parse_error(lineno, 1, "expected name/arity");
        std::string name = line.substr(0, slash);
        std::string arity_s = line.substr(slash + 1);
        uint32_t arity = 0;
        try {
            arity = static_cast<uint32_t>(std::stoul(arity_s));
        } catch (...) {
            throw parse_error(lineno, static_cast<int>(slash + 2), "bad arity");
        }
        if (!names.insert(name).second)
            throw Error("ValidationError", "schema repeats predicate name " + name);
        s.add(Symbols::pred(internal_pred_name(name), arity));
    }
    return s;
}

Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("MissingFile", "cannot open schema file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_schema(ss.str());
}

std::string print_schema(const Schema& s) {
    std::vector<std::string> lines;
    for (PredId p : s.predicates)
        lines.push_back(display_pred_name(Symbols::pred_name(p)) + "/" + std::to_string(Symbols::pred_arity(p)));
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (auto& l : lines) out += l + "\n";
    return out;
}

bool validate_decider_inputs(const Schema& schema) {
    if (schema.predicates.empty()) return false;
    std::map<uint32_t, uint32_t> per_arity;
    for (PredId p : schema.predicates) {
        uint32_t a = Symbols::pred_arity(p);
        if (a == 0) return false;
        per_arity[a]++;
    }
    uint32_t m = schema.max_arity();
    uint32_t n = per_arity.begin()->second;
    for (uint32_t a = 1; a <= m; ++a) {
        auto it = per_arity.find(a);
        if (it == per_arity.end() || it->second != n) return false;
    }
    return true;
}

}  // namespace chasekit
