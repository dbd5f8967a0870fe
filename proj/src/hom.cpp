#include "chasekit/hom.hpp"

#include <algorithm>

namespace chasekit {

namespace {

// Shared backtracking matcher. Body atoms are picked most-constrained-first:
// fewest unbound variables, then smallest candidate range. Candidates come
// from the sorted per-predicate ranges of the interpretation, so enumeration
// order is deterministic.
struct Matcher {
    const std::vector<Atom>& body;
    const Interpretation& target;
    std::vector<bool> used;
    Substitution sub;
    std::function<bool(const Substitution&)> emit;  // return true to stop

    Matcher(const std::vector<Atom>& b, const Interpretation& t, Substitution seed)
        : body(b), target(t), used(b.size(), false), sub(std::move(seed)) {}

    int unbound_vars(const Atom& a) const {
        int n = 0;
        for (Term t : a.args)
            if (t.is_var() && !sub.bound(t.var_id())) ++n;
        return n;
    }

    int pick() const {
        int best = -1;
        long best_key = -1;
        for (size_t j = 0; j < body.size(); ++j) {
            if (used[j]) continue;
            auto [lo, hi] = target.with_pred(body[j].pred);
            long key = static_cast<long>(unbound_vars(body[j])) * 1000000 + (hi - lo);
            if (best < 0 || key < best_key) {
                best = static_cast<int>(j);
                best_key = key;
            }
        }
        return best;
    }

    bool run() {
        int j = pick();
        if (j < 0) return emit(sub);
        used[j] = true;
        const Atom& pat = body[j];
        auto [lo, hi] = target.with_pred(pat.pred);
        for (const Atom* cand = lo; cand != hi; ++cand) {
            Substitution saved = sub;
            bool ok = true;
            for (size_t k = 0; k < pat.args.size(); ++k) {
                Term p = pat.args[k];
                Term v = cand->args[k];
                if (p.is_null()) {
                    if (p != v) {
                        ok = false;
                        break;
                    }
                } else if (!sub.bind(p.var_id(), v)) {
                    ok = false;
                    break;
                }
            }
            if (ok && run()) return true;
            sub = std::move(saved);
        }
        used[j] = false;
        return false;
    }
};

}  // namespace

std::vector<Substitution> enumerate_matches(const std::vector<Atom>& body, const Interpretation& i,
                                            const Substitution& seed) {
    std::vector<Substitution> out;
    Matcher m(body, i, seed);
    m.emit = [&](const Substitution& s) {
        out.push_back(s);
        return false;
    };
    m.run();
    return out;
}

std::optional<Substitution> first_match(const std::vector<Atom>& body, const Interpretation& i,
                                        const Substitution& seed) {
    std::optional<Substitution> out;
    Matcher m(body, i, seed);
    m.emit = [&](const Substitution& s) {
        out = s;
        return true;
    };
    m.run();
    return out;
}

std::optional<Homomorphism> find_homomorphism(const Interpretation& src, const Interpretation& dst) {
    // view source nulls as variables and match the atom set as a conjunction
    std::map<int64_t, uint32_t> var_of;
    std::vector<Atom> pattern;
    pattern.reserve(src.size());
    for (const Atom& a : src.atoms()) {
        Atom p;
        p.pred = a.pred;
        for (Term t : a.args) {
            auto it = var_of.find(t.raw);
            uint32_t v;
            if (it == var_of.end()) {
                v = Symbols::var("$h" + std::to_string(var_of.size()) + "_" + std::to_string(t.raw)).var_id();
                var_of.emplace(t.raw, v);
            } else {
                v = it->second;
            }
            p.args.push_back(Term::var(v));
        }
        pattern.push_back(std::move(p));
    }
    auto match = first_match(pattern, dst);
    if (!match) return std::nullopt;
    Homomorphism h;
    for (auto& [raw, v] : var_of) h.mapping[raw] = match->get(v);
    return h;
}

bool entails(const Interpretation& src, const Interpretation& query) {
    return find_homomorphism(query, src).has_value();
}

}  // namespace chasekit
