#include "chasekit/oracle.hpp"
#include "chasekit/turing.hpp"
#include "doctest.h"

using namespace chasekit;

namespace {

std::string fixture(const std::string& name) { return std::string(CHASEKIT_FIXTURES) + "/" + name; }

Interpretation db(const std::string& text) { return parse_database(text); }

// reference predicate for the self-loop machine: some fact with equal blocks
bool tape_has_equal_blocks(const Tape& t) {
    size_t i = 0;
    while (i < t.size()) {
        REQUIRE(t[i][0] == '@');
        ++i;
        REQUIRE(t[i] == "|");
        ++i;
        std::vector<std::string> blocks;
        for (int b = 0; b < 2; ++b) {
            std::string w;
            while (t[i] != "|") w += t[i++];
            ++i;
            blocks.push_back(w);
        }
        if (blocks[0] == blocks[1]) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("tape text round trip") {
    Tape t = tape_from_text("@ed|1|10|");
    REQUIRE(t.size() == 7);
    CHECK(t[0] == "@ed");
    CHECK(tape_to_text(t) == "@ed|1|10|");
}

TEST_CASE("nonempty machine per its definition") {
    TuringMachine m = load_tm(fixture("nonempty_p.tm"));
    CHECK(run_tm(m, tape_from_text("")).status == TmStatus::Reject);
    CHECK(run_tm(m, tape_from_text("@p|1|")).status == TmStatus::Accept);
    CHECK(run_tm(m, tape_from_text("0")).status == TmStatus::Accept);
}

TEST_CASE("left move at cell zero is a machine violation") {
    std::string text =
        "states: qS qA qR q\n"
        "initial: qS\naccept: qA\nreject: qR\nblank: _\n"
        "alphabet: _\n"
        "delta: qS _ -> q _ L\n"
        "delta: q _ -> qA _ R\n";
    TuringMachine m = parse_tm(text);
    CHECK_THROWS_WITH_AS(run_tm(m, tape_from_text("")), doctest::Contains("MachineViolation"), Error);
}

TEST_CASE("machine loader validates totality") {
    std::string text =
        "states: qS qA qR\n"
        "initial: qS\naccept: qA\nreject: qR\nblank: _\n"
        "alphabet: 0 _\n"
        "delta: qS _ -> qA _ R\n";
    CHECK_THROWS_WITH_AS(parse_tm(text), doctest::Contains("missing transition"), Error);
}

TEST_CASE("canonical serialisation examples") {
    Schema p1 = load_schema(fixture("p1.schema"));
    Schema ed2 = load_schema(fixture("ed2.schema"));
    CHECK(tape_to_text(serialize_db(db("p(a)."), p1)) == "@p|1|");
    CHECK(tape_to_text(serialize_db(Interpretation{}, p1)) == "");
    CHECK(tape_to_text(serialize_db(db("ed(a, b)."), ed2)) == "@ed|1|10|");
}

TEST_CASE("deserialisation examples") {
    Schema p1 = load_schema(fixture("p1.schema"));
    Schema ed2 = load_schema(fixture("ed2.schema"));
    Interpretation i = deserialize(tape_from_text("@p|1|"), p1);
    CHECK(i.size() == 1);
    CHECK(deserialize(tape_from_text("@p|1|@p|1|"), p1).size() == 1);  // set semantics
    CHECK_THROWS_WITH_AS(deserialize(tape_from_text("@ed|1|"), ed2),
                         doctest::Contains("MalformedSerialisation"), Error);
    CHECK_THROWS_WITH_AS(deserialize(tape_from_text("@q|1|"), p1),
                         doctest::Contains("MalformedSerialisation"), Error);
    CHECK_THROWS_WITH_AS(deserialize(tape_from_text("@ed||1|"), ed2),
                         doctest::Contains("MalformedSerialisation"), Error);
}

TEST_CASE("serialize then deserialize is isomorphism preserving") {
    PredId p = Symbols::pred("tp", 1);
    PredId e = Symbols::pred("te", 2);
    Schema s;
    s.add(p);
    s.add(e);
    oracle::Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        Interpretation d = oracle::random_database(s, rng, 5, 8);
        Interpretation back = deserialize(serialize_db(d, s), s);
        CHECK(isomorphic(d, back));
    }
}

TEST_CASE("selfloop machine equals the block comparison predicate") {
    TuringMachine m = load_tm(fixture("selfloop_ed.tm"));
    Schema ed2 = load_schema(fixture("ed2.schema"));
    SUBCASE("hand cases") {
        CHECK(run_tm(m, tape_from_text("@ed|01|01|")).status == TmStatus::Accept);
        CHECK(run_tm(m, tape_from_text("@ed|0|1|")).status == TmStatus::Reject);
        CHECK(run_tm(m, tape_from_text("@ed|1|10|")).status == TmStatus::Reject);
        CHECK(run_tm(m, tape_from_text("@ed|10|1|")).status == TmStatus::Reject);
        CHECK(run_tm(m, tape_from_text("")).status == TmStatus::Reject);
        CHECK(run_tm(m, tape_from_text("@ed|1|10|@ed|11|11|")).status == TmStatus::Accept);
        CHECK(run_tm(m, tape_from_text("@ed|011|011|")).status == TmStatus::Accept);
    }
    SUBCASE("databases") {
        CHECK(run_tm(m, serialize_db(db("ed(a, a)."), ed2)).status == TmStatus::Accept);
        CHECK(run_tm(m, serialize_db(db("ed(a, b)."), ed2)).status == TmStatus::Reject);
        CHECK(run_tm(m, serialize_db(db("ed(a, b). ed(b, a)."), ed2)).status == TmStatus::Reject);
        CHECK(run_tm(m, serialize_db(db("ed(a, b). ed(b, b)."), ed2)).status == TmStatus::Accept);
    }
    SUBCASE("random serialisations against the reference predicate") {
        oracle::Rng rng(77);
        Schema s;
        s.add(Symbols::pred("ed", 2));
        for (int i = 0; i < 300; ++i) {
            // random words per null, random fact order
            Interpretation d = oracle::random_database(s, rng, 4, 5);
            std::map<int64_t, std::string> word_of;
            std::set<std::string> used;
            for (Term t : d.nulls()) {
                std::string w;
                do {
                    w.clear();
                    size_t len = 1 + rng.below(4);
                    for (size_t j = 0; j < len; ++j) w += rng.flip() ? '1' : '0';
                } while (!used.insert(w).second);
                word_of[t.raw] = w;
            }
            std::vector<size_t> order(d.size());
            for (size_t j = 0; j < order.size(); ++j) order[j] = j;
            for (size_t j = order.size(); j > 1; --j) std::swap(order[j - 1], order[rng.below(j)]);
            Tape tape = serialize_db_custom(d, s, word_of, order);
            TmRun run = run_tm(m, tape);
            REQUIRE(run.status != TmStatus::StepCapExceeded);
            CHECK((run.status == TmStatus::Accept) == tape_has_equal_blocks(tape));
        }
    }
}

TEST_CASE("sample machines are serialisation invariant") {
    Schema p1 = load_schema(fixture("p1.schema"));
    Schema ed2 = load_schema(fixture("ed2.schema"));
    oracle::QueryOracle nonempty{load_tm(fixture("nonempty_p.tm")), p1};
    oracle::QueryOracle selfloop{load_tm(fixture("selfloop_ed.tm")), ed2};
    oracle::Rng rng(13);
    for (int i = 0; i < 40; ++i) {
        Interpretation dp = oracle::random_database(p1, rng, 4, 5);
        CHECK_NOTHROW(oracle::decide_query_oracle(nonempty, dp, i));
        Interpretation de = oracle::random_database(ed2, rng, 4, 5);
        CHECK_NOTHROW(oracle::decide_query_oracle(selfloop, de, i));
    }
}

TEST_CASE("configuration trace grows one cell per step") {
    TuringMachine m = load_tm(fixture("selfloop_ed.tm"));
    Tape input = tape_from_text("@ed|01|01|");
    auto trace = comp_trace(m, input, 100000);
    REQUIRE(trace.size() >= 2);
    for (size_t i = 0; i < trace.size(); ++i) CHECK(trace[i].tape.size() == input.size() + 1 + i);
}

TEST_CASE("fact ordering for tape construction") {
    PredId p11 = Symbols::pred("of_a", 1);
    PredId p21 = Symbols::pred("of_b", 2);
    Schema s;
    s.add(p11);
    s.add(p21);
    Term d1 = Symbols::fresh_null(), d2 = Symbols::fresh_null();
    std::map<int64_t, int> depth{{d1.raw, 1}, {d2.raw, 2}};
    SUBCASE("deeper node first") {
        auto out = order_facts({{p11, {d1}}, {p11, {d2}}}, depth, s);
        CHECK(out[0] == Atom(p11, {d2}));
        CHECK(out[1] == Atom(p11, {d1}));
    }
    SUBCASE("lower arity predicate first") {
        auto out = order_facts({{p21, {d1, d1}}, {p11, {d1}}}, depth, s);
        CHECK(out[0] == Atom(p11, {d1}));
        CHECK(out[1] == Atom(p21, {d1, d1}));
    }
    SUBCASE("single fact is itself") {
        auto out = order_facts({{p11, {d1}}}, depth, s);
        CHECK(out.size() == 1);
    }
}
