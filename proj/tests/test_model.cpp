#include <algorithm>
#include <map>
#include <set>

#include "chasekit/model.hpp"
#include "chasekit/oracle.hpp"
#include "doctest.h"

using namespace chasekit;

namespace {

Interpretation db(const std::string& text) { return parse_database(text); }

// independent oracle: try every bijection between the null sets
bool brute_isomorphic(const Interpretation& a, const Interpretation& b) {
    if (a.size() != b.size()) return false;
    std::vector<Term> na = a.nulls(), nb = b.nulls();
    if (na.size() != nb.size()) return false;
    std::vector<size_t> perm(nb.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    do {
        std::map<int64_t, Term> h;
        for (size_t i = 0; i < na.size(); ++i) h[na[i].raw] = nb[perm[i]];
        bool ok = true;
        for (const Atom& at : a.atoms()) {
            Atom img = at;
            for (Term& t : img.args) t = h[t.raw];
            if (!b.contains(img)) {
                ok = false;
                break;
            }
        }
        if (ok) return true;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return false;
}

}  // namespace

TEST_CASE("substitution application") {
    Term a = Symbols::named_null("a");
    PredId p = Symbols::pred("p", 1);
    PredId q = Symbols::pred("q", 2);
    Term x = Symbols::var("x"), y = Symbols::var("y");
    Substitution s;
    s.bind(x.var_id(), a);
    auto out = apply_substitution(s, std::vector<Atom>{{p, {x}}});
    CHECK(out[0] == Atom(p, {a}));

    Substitution empty;
    auto ground = apply_substitution(empty, std::vector<Atom>{{p, {a}}});
    CHECK(ground[0] == Atom(p, {a}));

    CHECK_THROWS_WITH_AS(apply_substitution(s, std::vector<Atom>{{q, {x, y}}}),
                         doctest::Contains("UnboundVariable"), Error);
}

TEST_CASE("substitution extension never overwrites") {
    Term a = Symbols::named_null("a"), b = Symbols::named_null("b");
    Substitution s;
    CHECK(s.bind(0, a));
    CHECK(s.bind(0, a));
    CHECK_FALSE(s.bind(0, b));
    CHECK(s.get(0) == a);
}

TEST_CASE("isomorphism basics") {
    CHECK(isomorphic(db("p(a)."), db("p(b).")));
    CHECK_FALSE(isomorphic(db("p(a)."), db("p(a). q(a).")));
    CHECK(isomorphic(db("ed(a, b). ed(b, a)."), db("ed(c, d). ed(d, c).")));
    CHECK_FALSE(isomorphic(db("ed(a, b). ed(b, c)."), db("ed(a, b). ed(a, c).")));
}

TEST_CASE("isomorphic agrees with brute force on random inputs") {
    PredId p1 = Symbols::pred("ip", 1);
    PredId e2 = Symbols::pred("ie", 2);
    Schema s;
    s.add(p1);
    s.add(e2);
    oracle::Rng rng(42);
    for (int i = 0; i < 120; ++i) {
        Interpretation a = oracle::random_database(s, rng, 4, 6);
        Interpretation b = oracle::random_database(s, rng, 4, 6);
        CHECK(isomorphic(a, b) == brute_isomorphic(a, b));
        std::vector<Term> nulls = a.nulls();
        std::map<int64_t, Term> ren;
        for (Term t : nulls) ren[t.raw] = Symbols::fresh_null();
        std::vector<Atom> copy;
        for (const Atom& at : a.atoms()) {
            Atom img = at;
            for (Term& t : img.args) t = ren[t.raw];
            copy.push_back(img);
        }
        CHECK(isomorphic(a, Interpretation(copy)));
    }
}

TEST_CASE("canonicalize examples and idempotence") {
    Interpretation c = canonicalize(db("p(z9)."));
    CHECK(print_database(c) == "p(n1).\n");
    Interpretation c1 = canonicalize(db("ed(b, a)."));
    CHECK(print_database(c1) == "ed(n1, n2).\n");
    CHECK(canonicalize(c1) == c1);
}

TEST_CASE("canonicalize is idempotent and preserves the isomorphism class") {
    PredId p1 = Symbols::pred("cp", 1);
    PredId e2 = Symbols::pred("ce", 2);
    Schema s;
    s.add(p1);
    s.add(e2);
    oracle::Rng rng(7);
    for (int i = 0; i < 150; ++i) {
        Interpretation a = oracle::random_database(s, rng, 5, 8);
        Interpretation c = canonicalize(a);
        CHECK(canonicalize(c) == c);
        CHECK(brute_isomorphic(a, c));
        std::map<int64_t, Term> ren;
        for (Term t : a.nulls()) ren[t.raw] = Symbols::fresh_null();
        std::vector<Atom> copy;
        for (const Atom& at : a.atoms()) {
            Atom img = at;
            for (Term& t : img.args) t = ren[t.raw];
            copy.push_back(img);
        }
        CHECK(canonicalize(Interpretation(copy)) == c);
    }
}

TEST_CASE("fresh null generation yields distinct ids") {
    std::set<int64_t> seen;
    for (int i = 0; i < 1000000; ++i) seen.insert(Symbols::fresh_null().raw);
    CHECK(seen.size() == 1000000);
}

TEST_CASE("database text round trip and comments") {
    Interpretation i = db("# header\np(a).\ned(a, b). # trailing\n\ned(b, a).\n");
    CHECK(i.size() == 3);
    Interpretation j = parse_database(print_database(i));
    CHECK(i == j);
}

TEST_CASE("reserved name display mapping") {
    CHECK(display_pred_name("$DbDom") == "g_DbDom");
    CHECK(internal_pred_name("g_DbDom") == "$DbDom");
    CHECK(is_reserved_pred_name("g_X"));
    CHECK(is_reserved_pred_name("$X"));
    CHECK_FALSE(is_reserved_pred_name("ed"));
}
