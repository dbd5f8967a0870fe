#include <map>

#include "chasekit/hom.hpp"
#include "chasekit/oracle.hpp"
#include "doctest.h"

using namespace chasekit;

namespace {

Interpretation db(const std::string& text) { return parse_database(text); }

Interpretation cycle(const std::string& pred, int len) {
    std::vector<Term> nulls;
    for (int i = 0; i < len; ++i) nulls.push_back(Symbols::fresh_null());
    PredId p = Symbols::pred(pred, 2);
    std::vector<Atom> atoms;
    for (int i = 0; i < len; ++i) atoms.push_back({p, {nulls[i], nulls[(i + 1) % len]}});
    return Interpretation(std::move(atoms));
}

// exhaustive check over all mappings from the source nulls to the target nulls
bool brute_hom(const Interpretation& src, const Interpretation& dst) {
    std::vector<Term> sn = src.nulls(), dn = dst.nulls();
    if (sn.empty()) return true;
    if (dn.empty()) return src.empty();
    std::vector<size_t> pick(sn.size(), 0);
    while (true) {
        std::map<int64_t, Term> h;
        for (size_t i = 0; i < sn.size(); ++i) h[sn[i].raw] = dn[pick[i]];
        bool ok = true;
        for (const Atom& a : src.atoms()) {
            Atom img = a;
            for (Term& t : img.args) t = h[t.raw];
            if (!dst.contains(img)) {
                ok = false;
                break;
            }
        }
        if (ok) return true;
        size_t k = sn.size();
        while (k > 0) {
            if (++pick[k - 1] < dn.size()) break;
            pick[k - 1] = 0;
            --k;
        }
        if (k == 0) return false;
    }
}

bool is_hom(const Homomorphism& h, const Interpretation& src, const Interpretation& dst) {
    for (const Atom& a : src.atoms()) {
        Atom img = a;
        for (Term& t : img.args) t = h.map(t);
        if (!dst.contains(img)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("homomorphism collapse onto a self loop") {
    Interpretation src = db("ed(a, b).");
    Interpretation dst = db("ed(c, c).");
    auto h = find_homomorphism(src, dst);
    REQUIRE(h.has_value());
    CHECK(is_hom(*h, src, dst));
    Term c = Symbols::named_null("c");
    CHECK(h->map(Symbols::named_null("a")) == c);
    CHECK(h->map(Symbols::named_null("b")) == c);
}

TEST_CASE("no homomorphism from a 5-cycle to a 3-cycle") {
    Interpretation five = cycle("hc", 5), three = cycle("hc", 3);
    CHECK_FALSE(brute_hom(five, three));
    CHECK_FALSE(find_homomorphism(five, three).has_value());
    CHECK(find_homomorphism(three, three).has_value());
}

TEST_CASE("prime cycles admit no cross homomorphisms") {
    // the diagonalisation fixtures: cycles of distinct prime lengths
    for (int p : {3, 5, 7})
        for (int q : {3, 5, 7}) {
            Interpretation cp = cycle("pc", p), cq = cycle("pc", q);
            bool expect = p == q;
            CHECK(find_homomorphism(cp, cq).has_value() == expect);
            CHECK(brute_hom(cp, cq) == expect);
        }
}

TEST_CASE("entails basics") {
    CHECK(entails(db("p(a)."), db("p(q0).")));
    CHECK_FALSE(entails(Interpretation{}, db("p(n).")));
    CHECK_FALSE(entails(db("ed(a, b). ed(b, c)."), db("ed(u, v). ed(v, u).")));
    CHECK(entails(db("ed(a, b). ed(b, a)."), db("ed(u, v). ed(v, u).")));
}

TEST_CASE("enumerate_matches basics") {
    PredId p = Symbols::pred("p", 1);
    PredId ed = Symbols::pred("ed", 2);
    Term x = Symbols::var("mx"), y = Symbols::var("my");
    auto ms = enumerate_matches({{p, {x}}}, db("p(a). p(b)."));
    CHECK(ms.size() == 2);
    CHECK(ms[0].get(x.var_id()) != ms[1].get(x.var_id()));

    auto empty_body = enumerate_matches({}, Interpretation{});
    REQUIRE(empty_body.size() == 1);
    CHECK(empty_body[0].binding.empty());

    auto two = enumerate_matches({{ed, {x, y}}, {ed, {y, x}}}, db("ed(a, b). ed(b, a)."));
    CHECK(two.size() == 2);
}

TEST_CASE("match counts agree with brute-force substitution enumeration") {
    PredId p = Symbols::pred("mp", 1);
    PredId e = Symbols::pred("me", 2);
    Schema s;
    s.add(p);
    s.add(e);
    Term x = Symbols::var("bx"), y = Symbols::var("by");
    std::vector<std::vector<Atom>> bodies{
        {{p, {x}}},
        {{e, {x, y}}},
        {{e, {x, y}}, {e, {y, x}}},
        {{e, {x, x}}},
        {{p, {x}}, {e, {x, y}}, {p, {y}}},
    };
    oracle::Rng rng(11);
    for (int round = 0; round < 60; ++round) {
        Interpretation i = oracle::random_database(s, rng, 4, 6);
        std::vector<Term> nulls = i.nulls();
        for (const auto& body : bodies) {
            size_t brute = 0;
            // enumerate all substitutions over the instance nulls
            std::vector<uint32_t> vars;
            for (const Atom& a : body)
                for (Term t : a.args)
                    if (t.is_var() && std::find(vars.begin(), vars.end(), t.var_id()) == vars.end())
                        vars.push_back(t.var_id());
            std::vector<size_t> pick(vars.size(), 0);
            if (!nulls.empty()) {
                while (true) {
                    Substitution sub;
                    for (size_t k = 0; k < vars.size(); ++k) sub.bind(vars[k], nulls[pick[k]]);
                    bool ok = true;
                    for (const Atom& a : body)
                        if (!i.contains(apply_substitution(sub, a))) {
                            ok = false;
                            break;
                        }
                    if (ok) ++brute;
                    size_t k = vars.size();
                    while (k > 0) {
                        if (++pick[k - 1] < nulls.size()) break;
                        pick[k - 1] = 0;
                        --k;
                    }
                    if (k == 0) break;
                }
            }
            CHECK(enumerate_matches(body, i).size() == brute);
        }
    }
}

TEST_CASE("witness composition is a homomorphism") {
    Interpretation a = db("ed(a, b). ed(b, c).");
    Interpretation b = db("ed(u, v). ed(v, u).");
    Interpretation c = db("ed(w, w).");
    auto h1 = find_homomorphism(a, b);
    auto h2 = find_homomorphism(b, c);
    REQUIRE(h1.has_value());
    REQUIRE(h2.has_value());
    Homomorphism comp;
    for (auto& [raw, t] : h1->mapping) comp.mapping[raw] = h2->map(t);
    CHECK(is_hom(comp, a, c));
}

TEST_CASE("find_homomorphism agrees with brute force on small instances") {
    PredId p = Symbols::pred("fp", 1);
    PredId e = Symbols::pred("fe", 2);
    Schema s;
    s.add(p);
    s.add(e);
    oracle::Rng rng(23);
    for (int round = 0; round < 200; ++round) {
        Interpretation a = oracle::random_database(s, rng, 4, 6);
        Interpretation b = oracle::random_database(s, rng, 4, 6);
        auto h = find_homomorphism(a, b);
        CHECK(h.has_value() == brute_hom(a, b));
        if (h) CHECK(is_hom(*h, a, b));
    }
}
