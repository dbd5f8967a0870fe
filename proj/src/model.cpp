#include "chasekit/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace chasekit {

namespace {

struct SymbolTables {
    std::mutex mu;
    std::unordered_map<std::string, PredId> pred_ids;
    std::vector<std::pair<std::string, uint32_t>> preds;  // name, arity
    std::unordered_map<std::string, uint64_t> null_ids;
    std::vector<std::string> null_names;  // indexed by pool null id
    uint64_t next_null = 0;
    std::unordered_map<std::string, uint32_t> var_ids;
    std::vector<std::string> var_names;
};

SymbolTables& tables() {
    static SymbolTables t;
    return t;
}

std::string pred_key(std::string_view name, uint32_t arity) {
    return std::string(name) + "/" + std::to_string(arity);
}

}  // namespace

PredId Symbols::pred(std::string_view name, uint32_t arity) {
    auto& t = tables();
    std::lock_guard<std::mutex> lock(t.mu);
    std::string key = pred_key(name, arity);
    auto it = t.pred_ids.find(key);
    if (it != t.pred_ids.end()) return it->second;
    PredId id = static_cast<PredId>(t.preds.size());
    t.preds.emplace_back(std::string(name), arity);
    t.pred_ids.emplace(std::move(key), id);
    return id;
}

bool Symbols::pred_known(std::string_view name, uint32_t arity) {
    auto& t = tables();
    std::lock_guard<std::mutex> lock(t.mu);
    return t.pred_ids.count(pred_key(name, arity)) != 0;
}

std::string Symbols::pred_name(PredId id) {
    auto& t = tables();
    std::lock_guard<std::mutex> lock(t.mu);
    return t.preds.at(id).first;
}

uint32_t Symbols::pred_arity(PredId id) {
    auto& t = tables();
    std::lock_guard<std::mutex> lock(t.mu);
    return t.preds.at(id).second;
}

Term Symbols::named_null(std::string_view name) {
    auto& t = tables();
    std::lock_guard<std::mutex> lock(t.mu);
    auto it = t.null_ids.find(std::string(name));
    if (it != t.null_ids.end()) return Term::null(it->second);
    uint64_t id = t.next_null++;
    t.null_names.emplace_back(name);
    t.null_ids.emplace(std::string(name), id);
    return Term::null(id);
}

Term Symbols::fresh_null() {
    auto& t = tables();
    std::lock_guard<std::mutex> lock(t.mu);
    uint64_t id = t.next_null++;
    t.null_names.emplace_back("");
    return Term::null(id);
}

Term Symbols::var(std::string_view name) {
    auto& t = tables();
    std::lock_guard<std::mutex> lock(t.mu);
    auto it = t.var_ids.find(std::string(name));
    if (it != t.var_ids.end()) return Term::var(it->second);
    uint32_t id = static_cast<uint32_t>(t.var_names.size());
    t.var_names.emplace_back(name);
    t.var_ids.emplace(std::string(name), id);
    return Term::var(id);
}

std::string Symbols::term_name(Term t) {
    auto& tb = tables();
    std::lock_guard<std::mutex> lock(tb.mu);
    if (t.is_var()) {
        uint32_t v = t.var_id();
        if (v < tb.var_names.size()) return tb.var_names[v];
        return "?v" + std::to_string(v);
    }
    uint64_t id = t.null_id();
    if (id < tb.null_names.size() && !tb.null_names[id].empty()) return tb.null_names[id];
    return "_:" + std::to_string(id);
}

std::string Symbols::var_name(uint32_t var_id) { return term_name(Term::var(var_id)); }

std::string display_pred_name(const std::string& internal) {
    if (!internal.empty() && internal[0] == '$') return "g_" + internal.substr(1);
    return internal;
}

std::string internal_pred_name(const std::string& display) {
    if (display.rfind("g_", 0) == 0) return "$" + display.substr(2);
    return display;
}

bool is_reserved_pred_name(const std::string& display) {
    return display.rfind("g_", 0) == 0 || (!display.empty() && display[0] == '$');
}

std::string to_string(const Atom& a) {
    std::string out = display_pred_name(Symbols::pred_name(a.pred));
    out += "(";
    for (size_t i = 0; i < a.args.size(); ++i) {
        if (i) out += ", ";
        out += Symbols::term_name(a.args[i]);
    }
    out += ")";
    return out;
}

Interpretation::Interpretation(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    std::sort(atoms_.begin(), atoms_.end());
    atoms_.erase(std::unique(atoms_.begin(), atoms_.end()), atoms_.end());
}

bool Interpretation::insert(Atom a) {
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), a);
    if (it != atoms_.end() && *it == a) return false;
    atoms_.insert(it, std::move(a));
    return true;
}

bool Interpretation::contains(const Atom& a) const {
    return std::binary_search(atoms_.begin(), atoms_.end(), a);
}

void Interpretation::merge(const Interpretation& other) {
    for (const Atom& a : other.atoms_) insert(a);
}

std::pair<const Atom*, const Atom*> Interpretation::with_pred(PredId p) const {
    Atom lo;
    lo.pred = p;
    auto first = std::lower_bound(atoms_.begin(), atoms_.end(), lo,
                                  [](const Atom& a, const Atom& b) { return a.pred < b.pred; });
    auto last = first;
    while (last != atoms_.end() && last->pred == p) ++last;
    return {atoms_.data() + (first - atoms_.begin()), atoms_.data() + (last - atoms_.begin())};
}

std::vector<Term> Interpretation::nulls() const {
    std::vector<Term> out;
    for (const Atom& a : atoms_)
        for (Term t : a.args) out.push_back(t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Term Substitution::get(uint32_t var) const {
    auto it = binding.find(var);
    if (it == binding.end())
        throw Error("UnboundVariable", "variable " + Symbols::var_name(var) + " has no binding");
    return it->second;
}

bool Substitution::bind(uint32_t var, Term value) {
    auto [it, inserted] = binding.emplace(var, value);
    if (!inserted) return it->second == value;
    return true;
}

Atom apply_substitution(const Substitution& s, const Atom& atom) {
    Atom out;
    out.pred = atom.pred;
    out.args.reserve(atom.args.size());
    for (Term t : atom.args) out.args.push_back(t.is_var() ? s.get(t.var_id()) : t);
    return out;
}

std::vector<Atom> apply_substitution(const Substitution& s, const std::vector<Atom>& atoms) {
    std::vector<Atom> out;
    out.reserve(atoms.size());
    for (const Atom& a : atoms) out.push_back(apply_substitution(s, a));
    return out;
}

Interpretation apply_substitution_ground(const Substitution& s, const std::vector<Atom>& atoms) {
    return Interpretation(apply_substitution(s, atoms));
}

namespace {

// Canonical labelling via colour refinement with individualization. Nulls get
// initial colours from the atom patterns they occur in; ties are broken by
// branching, and the lexicographically least relabelled atom list wins.
struct Canonical {
    const std::vector<Atom>& atoms;
    std::vector<Term> nulls;
    std::unordered_map<int64_t, int> index_of;

    explicit Canonical(const Interpretation& i) : atoms(i.atoms()) {
        nulls = i.nulls();
        for (size_t k = 0; k < nulls.size(); ++k) index_of[nulls[k].raw] = static_cast<int>(k);
    }

    std::vector<int> refine(std::vector<int> colour) const {
        size_t n = nulls.size();
        while (true) {
            // signature: own colour plus the multiset of (pred, position, arg colours)
            std::vector<std::pair<std::vector<int64_t>, int>> sigs(n);
            for (size_t k = 0; k < n; ++k) sigs[k].second = static_cast<int>(k);
            for (size_t k = 0; k < n; ++k) sigs[k].first.push_back(colour[k]);
            std::vector<std::vector<std::vector<int64_t>>> occ(n);
            for (const Atom& a : atoms) {
                for (size_t pos = 0; pos < a.args.size(); ++pos) {
                    int k = index_of.at(a.args[pos].raw);
                    std::vector<int64_t> rec;
                    rec.push_back(a.pred);
                    rec.push_back(static_cast<int64_t>(pos));
                    for (Term t : a.args) rec.push_back(colour[index_of.at(t.raw)]);
                    occ[k].push_back(std::move(rec));
                }
            }
            for (size_t k = 0; k < n; ++k) {
                std::sort(occ[k].begin(), occ[k].end());
                for (auto& rec : occ[k]) {
                    sigs[k].first.push_back(-1);
                    sigs[k].first.insert(sigs[k].first.end(), rec.begin(), rec.end());
                }
            }
            std::vector<std::pair<std::vector<int64_t>, int>> sorted = sigs;
            std::sort(sorted.begin(), sorted.end());
            std::vector<int> next(n);
            int c = 0;
            for (size_t k = 0; k < sorted.size(); ++k) {
                if (k > 0 && sorted[k].first != sorted[k - 1].first) ++c;
                next[sorted[k].second] = c;
            }
            if (next == colour) return colour;
            colour = std::move(next);
        }
    }

    // Relabel atoms under a total null order and sort them.
    std::vector<Atom> relabel(const std::vector<int>& rank) const {
        std::vector<Atom> out;
        out.reserve(atoms.size());
        for (const Atom& a : atoms) {
            Atom b;
            b.pred = a.pred;
            b.args.reserve(a.args.size());
            for (Term t : a.args) b.args.push_back(Term::null(static_cast<uint64_t>(rank[index_of.at(t.raw)])));
            out.push_back(std::move(b));
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    void search(std::vector<int> colour, std::vector<Atom>& best, std::vector<int>& best_rank, bool& have) const {
        colour = refine(std::move(colour));
        size_t n = nulls.size();
        // first colour class with more than one member
        int branch_colour = -1;
        std::vector<int> members;
        for (int c = 0; c < static_cast<int>(n); ++c) {
            members.clear();
            for (size_t k = 0; k < n; ++k)
                if (colour[k] == c) members.push_back(static_cast<int>(k));
            if (members.size() > 1) {
                branch_colour = c;
                break;
            }
            if (members.empty()) break;
        }
        if (branch_colour < 0) {
            // discrete colouring: colours are exactly the ranks
            std::vector<Atom> cand = relabel(colour);
            if (!have || cand < best) {
                best = cand;
                best_rank = colour;
                have = true;
            }
            return;
        }
        for (int m : members) {
            std::vector<int> next = colour;
            for (size_t k = 0; k < n; ++k)
                if (next[k] >= branch_colour) ++next[k];
            next[m] = branch_colour;
            search(std::move(next), best, best_rank, have);
        }
    }

    std::pair<std::vector<Atom>, std::vector<int>> run() const {
        std::vector<Atom> best;
        std::vector<int> best_rank;
        bool have = false;
        search(std::vector<int>(nulls.size(), 0), best, best_rank, have);
        return {best, best_rank};
    }
};

}  // namespace

Interpretation canonicalize(const Interpretation& i) {
    if (i.empty()) return i;
    Canonical c(i);
    auto [atoms, rank] = c.run();
    // shift ranks to 1..k and intern printable names n1..nk
    std::vector<Atom> out;
    out.reserve(atoms.size());
    for (Atom a : atoms) {
        for (Term& t : a.args) t = Symbols::named_null("n" + std::to_string(t.null_id() + 1));
        out.push_back(std::move(a));
    }
    return Interpretation(std::move(out));
}

std::vector<Term> canonical_null_order(const Interpretation& i) {
    if (i.empty()) return {};
    Canonical c(i);
    auto [atoms, rank] = c.run();
    (void)atoms;
    std::vector<Term> order(c.nulls.size());
    for (size_t k = 0; k < c.nulls.size(); ++k) order[rank[k]] = c.nulls[k];
    return order;
}

bool isomorphic(const Interpretation& a, const Interpretation& b) {
    if (a.size() != b.size()) return false;
    if (a.empty()) return true;
    Canonical ca(a), cb(b);
    if (ca.nulls.size() != cb.nulls.size()) return false;
    return ca.run().first == cb.run().first;
}

namespace {

struct LineScanner {
    std::string_view text;
    size_t pos = 0;
    int line = 1;
    int col = 1;

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
    void skip_ws_and_comments() {
        while (!eof()) {
            char c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                return;
            }
        }
    }
    std::string ident() {
        if (eof() || !(std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_'))
            throw parse_error(line, col, "expected identifier");
        std::string out;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
            out += peek();
            advance();
        }
        return out;
    }
    void expect(char c) {
        if (eof() || peek() != c)
            throw parse_error(line, col, std::string("expected '") + c + "'");
        advance();
    }
};

}  // namespace

Interpretation parse_database(std::string_view text) {
    LineScanner s{text};
    std::vector<Atom> atoms;
    while (true) {
        s.skip_ws_and_comments();
        if (s.eof()) break;
        std::string pred = internal_pred_name(s.ident());
        std::vector<Term> args;
        s.skip_ws_and_comments();
        s.expect('(');
        s.skip_ws_and_comments();
        if (!s.eof() && s.peek() != ')') {
            while (true) {
                s.skip_ws_and_comments();
                args.push_back(Symbols::named_null(s.ident()));
                s.skip_ws_and_comments();
                if (!s.eof() && s.peek() == ',') {
                    s.advance();
                    continue;
                }
                break;
            }
        }
        s.expect(')');
        s.skip_ws_and_comments();
        s.expect('.');
        uint32_t arity = static_cast<uint32_t>(args.size());
        atoms.emplace_back(Symbols::pred(pred, arity), std::move(args));
    }
    return Interpretation(std::move(atoms));
}

std::string print_database(const Interpretation& i) {
    // sorted by predicate name then printed argument names, so output is
    // stable across interning orders
    std::vector<std::string> lines;
    lines.reserve(i.size());
    for (const Atom& a : i.atoms()) lines.push_back(to_string(a) + ".");
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const std::string& l : lines) {
        out += l;
        out += "\n";
    }
    return out;
}

Interpretation load_database(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("MissingFile", "cannot open database file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_database(ss.str());
}

}  // namespace chasekit
