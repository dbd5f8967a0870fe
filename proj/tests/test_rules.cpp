#include "chasekit/rules.hpp"
#include "doctest.h"

using namespace chasekit;

TEST_CASE("parse a simple existential rule") {
    RuleSet rs = parse_rules("ed(x,y) -> exists z . ed(y,z).");
    REQUIRE(rs.rules.size() == 1);
    const Rule& r = rs.rules[0];
    CHECK(r.label == "r1");
    CHECK(r.body.size() == 1);
    REQUIRE(r.disjuncts.size() == 1);
    CHECK(r.disjuncts[0].evars.size() == 1);
    CHECK(Symbols::var_name(r.disjuncts[0].evars[0]) == "z");
}

TEST_CASE("parse an empty-body rule") {
    RuleSet rs = parse_rules("-> exists y . first(y), dbdom(y).");
    REQUIRE(rs.rules.size() == 1);
    CHECK(rs.rules[0].body.empty());
    CHECK(rs.rules[0].disjuncts[0].atoms.size() == 2);
}

TEST_CASE("existential variable clashing with a body variable is rejected") {
    CHECK_THROWS_WITH_AS(parse_rules("p(x) -> exists x . q(x)."), doctest::Contains("ValidationError"),
                         Error);
}

TEST_CASE("head variable neither existential nor in the body is rejected") {
    CHECK_THROWS_WITH_AS(parse_rules("p(x) -> q(y)."), doctest::Contains("ValidationError"), Error);
}

TEST_CASE("labels, disjunctions, nullary atoms round trip") {
    std::string text =
        "@one: p(x) -> q(x) ; exists z . r(x, z).\n"
        "-> A() ; B().\n"
        "@goalrule: p(x) -> Goal().\n";
    RuleSet rs = parse_rules(text);
    REQUIRE(rs.rules.size() == 3);
    CHECK(rs.rules[0].label == "one");
    CHECK(rs.rules[1].label == "r2");
    CHECK(rs.rules[1].body.empty());
    CHECK(rs.rules[1].disjuncts.size() == 2);
    std::string printed = print_rules(rs);
    RuleSet again = parse_rules(printed);
    CHECK(rs == again);
    CHECK(print_rules(again) == printed);
}

TEST_CASE("input schema") {
    RuleSet rs1 = parse_rules("p(x) -> q(x).");
    Schema s1 = input_schema(rs1);
    REQUIRE(s1.predicates.size() == 1);
    CHECK(Symbols::pred_name(s1.predicates[0]) == "p");

    RuleSet rs2 = parse_rules("p(x) -> q(x).\nq(x) -> p(x).");
    CHECK(input_schema(rs2).predicates.empty());
}

TEST_CASE("input schema is disjoint from head predicates") {
    RuleSet rs = parse_rules("a(x), b(x, y) -> c(y).\nc(x) -> exists y . b(x, y).");
    Schema in = input_schema(rs);
    for (const Rule& r : rs.rules)
        for (const Disjunct& d : r.disjuncts)
            for (const Atom& at : d.atoms) CHECK_FALSE(in.contains(at.pred));
}

TEST_CASE("decider input schema validation") {
    Schema ok;
    ok.add(Symbols::pred("p", 1));
    ok.add(Symbols::pred("ed", 2));
    CHECK(validate_decider_inputs(ok));  // n = 1, m = 2

    Schema bad;
    bad.add(Symbols::pred("p", 1));
    bad.add(Symbols::pred("q", 1));
    bad.add(Symbols::pred("ed", 2));
    CHECK_FALSE(validate_decider_inputs(bad));

    Schema nullary;
    nullary.add(Symbols::pred("c", 0));
    CHECK_FALSE(validate_decider_inputs(nullary));

    Schema empty;
    CHECK_FALSE(validate_decider_inputs(empty));

    Schema two_per;
    two_per.add(Symbols::pred("a", 1));
    two_per.add(Symbols::pred("b", 1));
    two_per.add(Symbols::pred("e", 2));
    two_per.add(Symbols::pred("f", 2));
    CHECK(validate_decider_inputs(two_per));  // n = 2, m = 2
}

TEST_CASE("schema file format") {
    Schema s = parse_schema("# comment\np/1\ned/2\n");
    CHECK(s.predicates.size() == 2);
    CHECK(s.max_arity() == 2);
    Schema again = parse_schema(print_schema(s));
    CHECK(s == again);
    CHECK_THROWS_WITH_AS(parse_schema("p/1\np/2\n"), doctest::Contains("ValidationError"), Error);
}

TEST_CASE("duplicate rule labels are rejected") {
    CHECK_THROWS_WITH_AS(parse_rules("@a: p(x) -> q(x).\n@a: q(x) -> p(x)."),
                         doctest::Contains("ValidationError"), Error);
}
