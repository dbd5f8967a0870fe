#ifndef CHASEKIT_HOM_HPP
#define CHASEKIT_HOM_HPP

#include <functional>
#include <optional>

#include "chasekit/model.hpp"

namespace chasekit {

struct Homomorphism {
    std::map<int64_t, Term> mapping;  // source null raw id -> target null

    Term map(Term t) const {
        auto it = mapping.find(t.raw);
        return it == mapping.end() ? t : it->second;
    }
};

// Witness homomorphism src -> dst, or nullopt. Backtracking search, most
// constrained atom first; deterministic for fixed inputs.
std::optional<Homomorphism> find_homomorphism(const Interpretation& src, const Interpretation& dst);

// BCQ semantics: query matches into src.
bool entails(const Interpretation& src, const Interpretation& query);

// All substitutions mapping the body conjunction into i, extending `seed`.
// The empty body yields exactly the seed. Deterministic order.
std::vector<Substitution> enumerate_matches(const std::vector<Atom>& body, const Interpretation& i,
                                            const Substitution& seed = {});

// First match only (existence check), cheaper than materializing all.
std::optional<Substitution> first_match(const std::vector<Atom>& body, const Interpretation& i,
                                        const Substitution& seed = {});

}  // namespace chasekit

#endif
