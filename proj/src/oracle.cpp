#include "chasekit/oracle.hpp"

#include <algorithm>
#include <set>

namespace chasekit::oracle {

bool decide_query_oracle(const QueryOracle& o, const Interpretation& db, uint64_t seed) {
    auto run = [&](const Tape& s) {
        TmRun r = run_tm(o.tm, s, o.step_cap);
        if (r.status == TmStatus::StepCapExceeded)
            throw Error("StepCapExceeded", "the oracle machine did not halt within the step cap");
        return r.status == TmStatus::Accept;
    };
    bool verdict = run(serialize_db(db, o.schema));
    if (!o.randomized_serialisations) return verdict;
    Rng rng(seed * 7919 + 17);
    std::vector<Term> nulls = db.nulls();
    for (int round = 0; round < 4; ++round) {
        // random injection: distinct binary words, leading zeros allowed
        std::set<std::string> words;
        std::map<int64_t, std::string> word_of;
        for (Term t : nulls) {
            std::string w;
            do {
                w.clear();
                size_t len = 1 + rng.below(6);
                for (size_t i = 0; i < len; ++i) w += rng.flip() ? '1' : '0';
            } while (!words.insert(w).second);
            word_of[t.raw] = w;
        }
        std::vector<size_t> order(db.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        bool v = run(serialize_db_custom(db, o.schema, word_of, order));
        if (v != verdict)
            throw Error("SerialisationDependence",
                        "machine verdict differs between serialisations of the same database");
    }
    return verdict;
}

std::vector<Interpretation> enumerate_minimal_models(const RuleSet& ground, const Interpretation& db) {
    std::set<Atom> base_set(db.atoms().begin(), db.atoms().end());
    for (const Rule& r : ground.rules) {
        for (const Atom& a : r.body) {
            if (!a.ground()) throw Error("ValidationError", "rule " + r.label + " is not ground");
            base_set.insert(a);
        }
        for (const Disjunct& d : r.disjuncts)
            for (const Atom& a : d.atoms) {
                if (!a.ground()) throw Error("ValidationError", "rule " + r.label + " is not ground");
                base_set.insert(a);
            }
    }
    std::vector<Atom> base(base_set.begin(), base_set.end());
    if (base.size() > 20) throw Error("TooLarge", "Herbrand base exceeds 20 atoms");
    std::map<Atom, size_t> index;
    for (size_t i = 0; i < base.size(); ++i) index[base[i]] = i;
    uint32_t db_mask = 0;
    for (const Atom& a : db.atoms()) db_mask |= 1u << index.at(a);
    struct GroundRule {
        uint32_t body = 0;
        std::vector<uint32_t> heads;
    };
    std::vector<GroundRule> grules;
    for (const Rule& r : ground.rules) {
        GroundRule gr;
        for (const Atom& a : r.body) gr.body |= 1u << index.at(a);
        for (const Disjunct& d : r.disjuncts) {
            uint32_t h = 0;
            for (const Atom& a : d.atoms) h |= 1u << index.at(a);
            gr.heads.push_back(h);
        }
        grules.push_back(std::move(gr));
    }
    auto is_model = [&](uint32_t m) {
        if ((m & db_mask) != db_mask) return false;
        for (const GroundRule& gr : grules) {
            if ((m & gr.body) != gr.body) continue;
            bool sat = false;
            for (uint32_t h : gr.heads)
                if ((m & h) == h) {
                    sat = true;
                    break;
                }
            if (!sat) return false;
        }
        return true;
    };
    std::vector<uint32_t> models;
    for (uint32_t m = 0; m < (1u << base.size()); ++m)
        if (is_model(m)) models.push_back(m);
    std::vector<Interpretation> out;
    for (uint32_t m : models) {
        bool minimal = true;
        for (uint32_t other : models)
            if (other != m && (other & m) == other) {
                minimal = false;
                break;
            }
        if (!minimal) continue;
        std::vector<Atom> atoms;
        for (size_t i = 0; i < base.size(); ++i)
            if (m & (1u << i)) atoms.push_back(base[i]);
        out.emplace_back(std::move(atoms));
    }
    return out;
}

HomClosureReport hom_closure_check(const QueryOracle& o,
                                   const std::vector<std::pair<Interpretation, Interpretation>>& corpus) {
    HomClosureReport report;
    for (size_t i = 0; i < corpus.size(); ++i) {
        ++report.checked;
        bool src = decide_query_oracle(o, corpus[i].first, i);
        bool dst = decide_query_oracle(o, corpus[i].second, i + 1);
        if (src && !dst) report.violations.push_back(i);
    }
    return report;
}

std::vector<std::vector<std::vector<Term>>> ordered_partitions(const std::vector<Term>& elems, Term first,
                                                               Term last) {
    std::vector<std::vector<std::vector<Term>>> out;
    size_t n = elems.size();
    for (size_t k = 1; k <= n; ++k) {
        // assignments elem -> block 0..k-1, first in block 0, last in block k-1,
        // all blocks non-empty
        std::vector<size_t> assign(n, 0);
        auto rec = [&](auto&& self, size_t i) -> void {
            if (i == n) {
                std::vector<std::vector<Term>> blocks(k);
                for (size_t j = 0; j < n; ++j) blocks[assign[j]].push_back(elems[j]);
                for (auto& b : blocks)
                    if (b.empty()) return;
                out.push_back(std::move(blocks));
                return;
            }
            if (elems[i] == first) {
                assign[i] = 0;
                self(self, i + 1);
                return;
            }
            if (elems[i] == last) {
                assign[i] = k - 1;
                self(self, i + 1);
                return;
            }
            for (size_t b = 0; b < k; ++b) {
                assign[i] = b;
                self(self, i + 1);
            }
        };
        if (k == 1 && first != last) {
            // both endpoints share the single block
            std::vector<size_t> all(n, 0);
            std::vector<std::vector<Term>> blocks(1);
            for (size_t j = 0; j < n; ++j) blocks[0].push_back(elems[j]);
            out.push_back(std::move(blocks));
            continue;
        }
        rec(rec, 0);
    }
    return out;
}

std::vector<Interpretation> enumerate_r1_models(const CompileContext& ctx, const Interpretation& db) {
    PredId dbdom = gen_pred("DbDom", 1), first = gen_pred("First", 1), last = gen_pred("Last", 1);
    PredId eq = gen_pred("Eq", 2), neq = gen_pred("NEq", 2), lt = gen_pred("LT", 2);
    Term ua = Symbols::fresh_null();
    Term uo = Symbols::fresh_null();
    std::vector<Term> delta = db.nulls();
    delta.push_back(ua);
    delta.push_back(uo);

    std::vector<Interpretation> out;
    for (auto& blocks : ordered_partitions(delta, ua, uo)) {
        std::map<int64_t, size_t> cls;
        for (size_t b = 0; b < blocks.size(); ++b)
            for (Term t : blocks[b]) cls[t.raw] = b;
        std::vector<Atom> common = db.atoms();
        for (Term t : delta) common.push_back({dbdom, {t}});
        for (Term t : blocks.front()) common.push_back({first, {t}});
        for (Term t : blocks.back()) common.push_back({last, {t}});
        for (Term t : delta)
            for (Term u : delta) {
                if (cls[t.raw] == cls[u.raw]) {
                    common.push_back({eq, {t, u}});
                } else {
                    common.push_back({neq, {t, u}});
                    if (cls[t.raw] < cls[u.raw]) common.push_back({lt, {t, u}});
                }
            }
        // completion choices per class tuple; tuples forced by copied facts
        // (under the congruence closure) are fixed to the positive side
        struct PredTuples {
            PredId p;
            std::vector<std::vector<size_t>> free_cls_tuples;
            std::set<std::vector<size_t>> forced;
        };
        std::vector<PredTuples> pt;
        for (PredId p : ctx.schema.predicates) {
            PredTuples cur;
            cur.p = p;
            uint32_t ar = Symbols::pred_arity(p);
            auto [lo, hi] = db.with_pred(p);
            for (const Atom* a = lo; a != hi; ++a) {
                std::vector<size_t> key;
                for (Term t : a->args) key.push_back(cls.at(t.raw));
                cur.forced.insert(key);
            }
            std::vector<size_t> idx(ar, 0);
            while (true) {
                std::vector<size_t> key(idx.begin(), idx.end());
                if (!cur.forced.count(key)) cur.free_cls_tuples.push_back(key);
                size_t k = ar;
                while (k > 0) {
                    if (++idx[k - 1] < blocks.size()) break;
                    idx[k - 1] = 0;
                    --k;
                }
                if (k == 0) break;
            }
            pt.push_back(std::move(cur));
        }
        size_t total_free = 0;
        for (auto& cur : pt) total_free += cur.free_cls_tuples.size();
        if (total_free > 24) throw Error("TooLarge", "too many free completion tuples to enumerate");
        for (uint64_t choice = 0; choice < (1ull << total_free); ++choice) {
            std::vector<Atom> atoms = common;
            size_t bit = 0;
            for (auto& cur : pt) {
                uint32_t ar = Symbols::pred_arity(cur.p);
                PredId in = gen_pred("In_" + display_pred_name(Symbols::pred_name(cur.p)), ar);
                PredId nin = gen_pred("NIn_" + display_pred_name(Symbols::pred_name(cur.p)), ar);
                std::set<std::vector<size_t>> positive = cur.forced;
                for (auto& key : cur.free_cls_tuples)
                    if (choice & (1ull << bit++)) positive.insert(key);
                // expand class tuples to all member tuples
                std::vector<size_t> idx(ar, 0);
                std::vector<std::vector<size_t>> all_keys;
                {
                    std::vector<size_t> cur_idx(ar, 0);
                    while (true) {
                        all_keys.emplace_back(cur_idx.begin(), cur_idx.end());
                        size_t k = ar;
                        while (k > 0) {
                            if (++cur_idx[k - 1] < blocks.size()) break;
                            cur_idx[k - 1] = 0;
                            --k;
                        }
                        if (k == 0) break;
                    }
                }
                for (auto& key : all_keys) {
                    PredId target = positive.count(key) ? in : nin;
                    std::vector<std::vector<Term>> member_tuples{{}};
                    for (size_t pos = 0; pos < ar; ++pos) {
                        std::vector<std::vector<Term>> next;
                        for (auto& partial : member_tuples)
                            for (Term t : blocks[key[pos]]) {
                                auto copy = partial;
                                copy.push_back(t);
                                next.push_back(std::move(copy));
                            }
                        member_tuples = std::move(next);
                    }
                    for (auto& args : member_tuples) atoms.push_back({target, args});
                }
            }
            out.emplace_back(std::move(atoms));
        }
    }
    return out;
}

Interpretation random_database(const Schema& schema, Rng& rng, int max_nulls, int max_facts) {
    int n = 1 + static_cast<int>(rng.below(max_nulls));
    std::vector<Term> nulls;
    for (int i = 0; i < n; ++i) nulls.push_back(Symbols::fresh_null());
    std::vector<Atom> atoms;
    int facts = 1 + static_cast<int>(rng.below(max_facts));
    for (int i = 0; i < facts; ++i) {
        PredId p = schema.predicates[rng.below(schema.predicates.size())];
        std::vector<Term> args;
        for (uint32_t j = 0; j < Symbols::pred_arity(p); ++j) args.push_back(nulls[rng.below(nulls.size())]);
        atoms.push_back({p, std::move(args)});
    }
    return Interpretation(std::move(atoms));
}

std::vector<std::pair<Interpretation, Interpretation>> random_hom_pairs(const Schema& schema, size_t count,
                                                                        uint64_t seed) {
    std::vector<std::pair<Interpretation, Interpretation>> out;
    Rng rng(seed);
    while (out.size() < count) {
        Interpretation d = random_database(schema, rng);
        std::vector<Term> nulls = d.nulls();
        std::vector<Term> targets;
        int tn = 1 + static_cast<int>(rng.below(nulls.size()));
        for (int i = 0; i < tn; ++i) targets.push_back(Symbols::fresh_null());
        std::map<int64_t, Term> h;
        for (Term t : nulls) h[t.raw] = targets[rng.below(targets.size())];
        std::vector<Atom> image;
        for (const Atom& a : d.atoms()) {
            Atom b;
            b.pred = a.pred;
            for (Term t : a.args) b.args.push_back(h[t.raw]);
            image.push_back(std::move(b));
        }
        // optional extra facts on the target side keep the map a homomorphism
        int extra = static_cast<int>(rng.below(3));
        for (int i = 0; i < extra; ++i) {
            PredId p = schema.predicates[rng.below(schema.predicates.size())];
            std::vector<Term> args;
            for (uint32_t j = 0; j < Symbols::pred_arity(p); ++j)
                args.push_back(targets[rng.below(targets.size())]);
            image.push_back({p, std::move(args)});
        }
        out.emplace_back(std::move(d), Interpretation(std::move(image)));
    }
    return out;
}

RandomCase random_small_case(uint64_t seed) {
    Rng rng(seed);
    PredId e1 = Symbols::pred("e", 1), f2 = Symbols::pred("f", 2);
    PredId a1 = Symbols::pred("a", 1), b2 = Symbols::pred("b", 2), c1 = Symbols::pred("c", 1);
    std::vector<PredId> edb{e1, f2};
    std::vector<PredId> idb{a1, b2, c1};
    Term x = Symbols::var("x"), y = Symbols::var("y");
    std::vector<Term> vars{x, y};

    RandomCase out;
    int nrules = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < nrules; ++i) {
        Rule r;
        r.label = "r" + std::to_string(i + 1);
        int nbody = 1 + static_cast<int>(rng.below(2));
        std::set<uint32_t> body_vars;
        for (int j = 0; j < nbody; ++j) {
            PredId p = (rng.flip() ? edb : idb)[rng.below(2)];
            std::vector<Term> args;
            for (uint32_t k = 0; k < Symbols::pred_arity(p); ++k) {
                Term t = vars[rng.below(vars.size())];
                args.push_back(t);
                body_vars.insert(t.var_id());
            }
            r.body.push_back({p, args});
        }
        int ndisj = 1 + static_cast<int>(rng.below(2));
        for (int dj = 0; dj < ndisj; ++dj) {
            Disjunct d;
            bool exist = rng.below(3) == 0;
            Term zd = Symbols::var("z" + std::to_string(dj + 1));
            if (exist) d.evars.push_back(zd.var_id());
            PredId p = idb[rng.below(idb.size())];
            std::vector<Term> args;
            for (uint32_t k = 0; k < Symbols::pred_arity(p); ++k) {
                if (exist && k == 0) {
                    args.push_back(zd);
                } else {
                    std::vector<uint32_t> bv(body_vars.begin(), body_vars.end());
                    args.push_back(Term::var(bv[rng.below(bv.size())]));
                }
            }
            d.atoms.push_back({p, args});
            r.disjuncts.push_back(std::move(d));
        }
        out.rules.add(std::move(r));
    }
    Schema edb_schema;
    edb_schema.add(e1);
    edb_schema.add(f2);
    out.db = random_database(edb_schema, rng, 2, 3);
    return out;
}

RandomSplitCase random_split_case(uint64_t seed) {
    Rng rng(seed);
    PredId e1 = Symbols::pred("se", 1), f2 = Symbols::pred("sf", 2);
    PredId d1 = Symbols::pred("sd1", 1), d2 = Symbols::pred("sd2", 2);
    PredId g1 = Symbols::pred("sg1", 1), g2 = Symbols::pred("sg2", 2);
    PredId goal = goal_pred();
    Term x = Symbols::var("x"), y = Symbols::var("y"), z = Symbols::var("z");

    RandomSplitCase out;
    std::vector<PredId> s1_body{e1, f2, d1, d2};
    std::vector<PredId> s1_head{d1, d2};
    int n1 = 1 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n1; ++i) {
        Rule r;
        r.label = "s1r" + std::to_string(i + 1);
        std::set<uint32_t> bv;
        int nb = 1 + static_cast<int>(rng.below(2));
        for (int j = 0; j < nb; ++j) {
            PredId p = s1_body[rng.below(s1_body.size())];
            std::vector<Term> args;
            for (uint32_t k = 0; k < Symbols::pred_arity(p); ++k) {
                Term t = rng.flip() ? x : y;
                args.push_back(t);
                bv.insert(t.var_id());
            }
            r.body.push_back({p, args});
        }
        std::vector<uint32_t> bvv(bv.begin(), bv.end());
        for (int dj = 0; dj < 2; ++dj) {
            PredId p = s1_head[rng.below(s1_head.size())];
            std::vector<Term> args;
            for (uint32_t k = 0; k < Symbols::pred_arity(p); ++k)
                args.push_back(Term::var(bvv[rng.below(bvv.size())]));
            r.disjuncts.push_back(Disjunct{{}, {{p, args}}});
        }
        out.sigma1.add(std::move(r));
    }
    // sigma2: bodies over edb + sigma1 heads, heads over fresh predicates or
    // Goal, optional non-recursive existentials
    std::vector<PredId> s2_body{e1, f2, d1, d2};
    std::vector<PredId> s2_head{g1, g2};
    int n2 = 1 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n2; ++i) {
        Rule r;
        r.label = "s2r" + std::to_string(i + 1);
        std::set<uint32_t> bv;
        int nb = 1 + static_cast<int>(rng.below(2));
        for (int j = 0; j < nb; ++j) {
            PredId p = s2_body[rng.below(s2_body.size())];
            std::vector<Term> args;
            for (uint32_t k = 0; k < Symbols::pred_arity(p); ++k) {
                Term t = rng.flip() ? x : y;
                args.push_back(t);
                bv.insert(t.var_id());
            }
            r.body.push_back({p, args});
        }
        Disjunct d;
        if (rng.below(3) == 0) {
            d.atoms.push_back({goal, {}});
        } else {
            bool exist = rng.flip();
            if (exist) d.evars.push_back(z.var_id());
            PredId p = s2_head[rng.below(s2_head.size())];
            std::vector<Term> args;
            std::vector<uint32_t> bvv(bv.begin(), bv.end());
            for (uint32_t k = 0; k < Symbols::pred_arity(p); ++k) {
                if (exist && k + 1 == Symbols::pred_arity(p))
                    args.push_back(z);
                else
                    args.push_back(Term::var(bvv[rng.below(bvv.size())]));
            }
            d.atoms.push_back({p, args});
            // sometimes a second rule consumes the fresh predicate into Goal
            if (rng.flip()) {
                Rule r2;
                r2.label = "s2g" + std::to_string(i + 1);
                std::vector<Term> gargs;
                for (uint32_t k = 0; k < Symbols::pred_arity(p); ++k)
                    gargs.push_back(k == 0 ? x : y);
                r2.body.push_back({p, gargs});
                r2.disjuncts.push_back(Disjunct{{}, {{goal, {}}}});
                if (!out.sigma2.find(r2.label)) out.sigma2.add(std::move(r2));
            }
        }
        r.disjuncts.push_back(std::move(d));
        out.sigma2.add(std::move(r));
    }
    Schema edb_schema;
    edb_schema.add(e1);
    edb_schema.add(f2);
    out.db = random_database(edb_schema, rng, 2, 3);
    return out;
}

GroundCase random_ground_case(uint64_t seed, int herbrand_atoms) {
    Rng rng(seed);
    GroundCase out;
    std::vector<Atom> base;
    for (int i = 0; i < herbrand_atoms - 1; ++i)
        base.push_back({Symbols::pred("G" + std::to_string(i), 0), {}});
    base.push_back({goal_pred(), {}});
    int nrules = 2 + static_cast<int>(rng.below(5));
    for (int i = 0; i < nrules; ++i) {
        Rule r;
        r.label = "g" + std::to_string(i + 1);
        int nb = static_cast<int>(rng.below(3));
        for (int j = 0; j < nb; ++j) r.body.push_back(base[rng.below(base.size() - 1)]);
        int nd = 1 + static_cast<int>(rng.below(2));
        for (int dj = 0; dj < nd; ++dj)
            r.disjuncts.push_back(Disjunct{{}, {base[rng.below(base.size())]}});
        out.rules.add(std::move(r));
    }
    std::vector<Atom> db;
    for (int i = 0; i + 1 < herbrand_atoms; ++i)
        if (rng.below(4) == 0) db.push_back(base[i]);
    out.db = Interpretation(std::move(db));
    return out;
}

}  // namespace chasekit::oracle
