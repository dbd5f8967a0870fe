#ifndef CHASEKIT_MODEL_HPP
#define CHASEKIT_MODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chasekit {

// All thrown errors carry a stable kind tag so callers (and the CLI) can map
// them to exit codes without string matching.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

inline Error parse_error(int line, int col, const std::string& msg) {
    return Error("ParseError", "line " + std::to_string(line) + ", col " + std::to_string(col) + ": " + msg);
}

using PredId = uint32_t;

// A term is either a null (domain element) or a variable. Nulls and variables
// are interned integer handles; display names live in a side table.
struct Term {
    int64_t raw = 0;

    static Term null(uint64_t id) {
        Term t;
        t.raw = static_cast<int64_t>(id);
        return t;
    }
    static Term var(uint32_t id) {
        Term t;
        t.raw = -1 - static_cast<int64_t>(id);
        return t;
    }
    bool is_null() const { return raw >= 0; }
    bool is_var() const { return raw < 0; }
    uint64_t null_id() const { return static_cast<uint64_t>(raw); }
    uint32_t var_id() const { return static_cast<uint32_t>(-1 - raw); }

    friend bool operator==(Term a, Term b) { return a.raw == b.raw; }
    friend bool operator!=(Term a, Term b) { return a.raw != b.raw; }
    friend bool operator<(Term a, Term b) { return a.raw < b.raw; }
};

// Process-wide interning of predicate, variable and null names. A single
// serialized counter hands out fresh nulls; ids are never reused in a run.
class Symbols {
public:
    static PredId pred(std::string_view name, uint32_t arity);
    static bool pred_known(std::string_view name, uint32_t arity);
    static std::string pred_name(PredId id);
    static uint32_t pred_arity(PredId id);

    static Term named_null(std::string_view name);
    static Term fresh_null();
    // Fresh nulls for chase nodes come out of a disjoint high range so that a
    // path-derived allocation never collides with the pool counter.
    static constexpr uint64_t kChaseNullBase = uint64_t(1) << 62;

    static Term var(std::string_view name);
    static std::string term_name(Term t);
    static std::string var_name(uint32_t var_id);
};

struct Atom {
    PredId pred = 0;
    std::vector<Term> args;

    Atom() = default;
    Atom(PredId p, std::vector<Term> a) : pred(p), args(std::move(a)) {}

    bool ground() const {
        for (Term t : args)
            if (!t.is_null()) return false;
        return true;
    }

    friend bool operator==(const Atom& a, const Atom& b) { return a.pred == b.pred && a.args == b.args; }
    friend bool operator!=(const Atom& a, const Atom& b) { return !(a == b); }
    friend bool operator<(const Atom& a, const Atom& b) {
        if (a.pred != b.pred) return a.pred < b.pred;
        return a.args < b.args;
    }
};

// Generated predicates are stored with a '$' prefix and rendered with a 'g_'
// prefix in every text format; parsing maps 'g_' back. User-facing names must
// not start with either prefix when used as compiler input.
std::string display_pred_name(const std::string& internal);
std::string internal_pred_name(const std::string& display);
bool is_reserved_pred_name(const std::string& display);

std::string to_string(const Atom& a);

// A finite set of ground atoms. Atoms are kept sorted and unique, so
// iteration order is deterministic for a fixed interning order.
class Interpretation {
public:
    Interpretation() = default;
    explicit Interpretation(std::vector<Atom> atoms);

    bool insert(Atom a);  // returns false if already present
    bool contains(const Atom& a) const;
    void merge(const Interpretation& other);

    const std::vector<Atom>& atoms() const { return atoms_; }
    size_t size() const { return atoms_.size(); }
    bool empty() const { return atoms_.empty(); }

    // Atoms of one predicate, as a contiguous range in the sorted store.
    std::pair<const Atom*, const Atom*> with_pred(PredId p) const;

    std::vector<Term> nulls() const;  // sorted, distinct

    friend bool operator==(const Interpretation& a, const Interpretation& b) { return a.atoms_ == b.atoms_; }
    friend bool operator!=(const Interpretation& a, const Interpretation& b) { return !(a == b); }

private:
    std::vector<Atom> atoms_;
};

struct Substitution {
    std::map<uint32_t, Term> binding;

    bool bound(uint32_t var) const { return binding.count(var) != 0; }
    Term get(uint32_t var) const;
    // Extension never overwrites: returns false on a conflicting rebind.
    bool bind(uint32_t var, Term value);
};

Atom apply_substitution(const Substitution& s, const Atom& atom);
std::vector<Atom> apply_substitution(const Substitution& s, const std::vector<Atom>& atoms);
Interpretation apply_substitution_ground(const Substitution& s, const std::vector<Atom>& atoms);

// Exact isomorphism test (bijective null renaming).
bool isomorphic(const Interpretation& a, const Interpretation& b);

// Canonical relabelling of nulls to n1..nk. Isomorphic inputs yield equal
// outputs; implemented as colour refinement plus individualization, so it is
// exact (not heuristic) but meant for desk-scale interpretations.
Interpretation canonicalize(const Interpretation& i);

// Canonical null order of an interpretation (the order in which canonicalize
// numbers them 1..k), without renaming.
std::vector<Term> canonical_null_order(const Interpretation& i);

// Database text format: one fact per line `pred(n1, n2).`, `#` comments.
Interpretation parse_database(std::string_view text);
std::string print_database(const Interpretation& i);
Interpretation load_database(const std::string& path);

}  // namespace chasekit

template <>
struct std::hash<chasekit::Atom> {
    size_t operator()(const chasekit::Atom& a) const {
        size_t h = std::hash<uint32_t>()(a.pred);
        for (chasekit::Term t : a.args) h = h * 1099511628211ULL + std::hash<int64_t>()(t.raw);
        return h;
    }
};

#endif
