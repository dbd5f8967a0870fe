#include "chasekit/disjfree.hpp"

#include <set>

#include "chasekit/brake.hpp"

namespace chasekit {

namespace {

std::string disp(PredId p) { return display_pred_name(Symbols::pred_name(p)); }

std::vector<uint32_t> atom_vars(const std::vector<Atom>& atoms) {
    std::vector<uint32_t> out;
    std::set<uint32_t> seen;
    for (const Atom& a : atoms)
        for (Term t : a.args)
            if (t.is_var() && seen.insert(t.var_id()).second) out.push_back(t.var_id());
    return out;
}

Term fresh_var_outside(const std::set<std::string>& used, const std::string& base) {
    std::string name = base;
    while (used.count(name)) name += "_";
    return Symbols::var(name);
}

std::set<std::string> rule_var_names(const Rule& r) {
    std::set<std::string> used;
    for (const Atom& a : r.body)
        for (Term t : a.args) used.insert(Symbols::term_name(t));
    for (const Disjunct& d : r.disjuncts) {
        for (uint32_t v : d.evars) used.insert(Symbols::var_name(v));
        for (const Atom& a : d.atoms)
            for (Term t : a.args) used.insert(Symbols::term_name(t));
    }
    return used;
}

}  // namespace

RuleSet normalize_two_disjuncts(const RuleSet& rs) {
    for (const Rule& r : rs.rules)
        if (!r.is_datalog())
            throw Error("NotDatalog", "rule " + r.label + " has existential variables");

    RuleSet out;
    std::vector<Rule> defined;  // flattening helpers, emitted after their rule
    for (const Rule& r : rs.rules) {
        // flatten conjunctive disjuncts: a disjunct with several atoms becomes
        // a fresh defined atom plus one Datalog rule per original atom
        std::vector<Atom> heads;
        for (size_t i = 0; i < r.disjuncts.size(); ++i) {
            const Disjunct& d = r.disjuncts[i];
            if (d.atoms.size() == 1) {
                heads.push_back(d.atoms[0]);
                continue;
            }
            std::vector<uint32_t> vs = atom_vars(d.atoms);
            PredId def = Symbols::pred("$d_" + r.label + "_" + std::to_string(i + 1),
                                       static_cast<uint32_t>(vs.size()));
            std::vector<Term> args;
            for (uint32_t v : vs) args.push_back(Term::var(v));
            heads.push_back({def, args});
            for (size_t j = 0; j < d.atoms.size(); ++j) {
                Rule dr;
                dr.label = r.label + "_d" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
                dr.body = {{def, args}};
                dr.disjuncts.push_back(Disjunct{{}, {d.atoms[j]}});
                defined.push_back(std::move(dr));
            }
        }
        // chain to exactly two disjuncts
        std::set<uint32_t> body_vars;
        for (const Atom& a : r.body)
            for (Term t : a.args)
                if (t.is_var()) body_vars.insert(t.var_id());
        std::vector<Atom> chain_body = r.body;
        std::string chain_label = r.label;
        size_t aux = 0;
        while (heads.size() > 2) {
            // remaining disjuncts after the first keep only the body variables
            // they still use
            std::vector<Atom> rest(heads.begin() + 1, heads.end());
            std::vector<uint32_t> vs;
            for (uint32_t v : atom_vars(rest))
                if (body_vars.count(v)) vs.push_back(v);
            PredId auxp = Symbols::pred("$aux_" + r.label + "_" + std::to_string(++aux),
                                        static_cast<uint32_t>(vs.size()));
            std::vector<Term> args;
            for (uint32_t v : vs) args.push_back(Term::var(v));
            Rule step;
            step.label = chain_label;
            step.body = chain_body;
            step.disjuncts.push_back(Disjunct{{}, {heads.front()}});
            step.disjuncts.push_back(Disjunct{{}, {{auxp, args}}});
            out.add(std::move(step));
            heads.erase(heads.begin());
            chain_body = {{auxp, args}};
            chain_label = r.label + "_aux" + std::to_string(aux);
        }
        Rule fin;
        fin.label = chain_label;
        fin.body = chain_body;
        fin.disjuncts.push_back(Disjunct{{}, {heads.front()}});
        fin.disjuncts.push_back(Disjunct{{}, {heads.size() > 1 ? heads[1] : heads[0]}});
        out.add(std::move(fin));
    }
    for (Rule& dr : defined) out.add(normalize_two_disjuncts([&] {
        RuleSet one;
        one.add(std::move(dr));
        return one;
    }()).rules[0]);
    return out;
}

RuleSet remove_disjunctions(const Split& split, bool acc_debug) {
    // classify sigma1: two-disjunct single-atom Datalog rules vs the
    // empty-body existential rules that are passed through unchanged
    std::vector<const Rule*> disj_rules;
    std::vector<const Rule*> passthrough;
    for (const Rule& r : split.sigma1.rules) {
        if (r.body.empty() && !r.is_datalog()) {
            if (r.disjuncts.size() != 1)
                throw Error("SplitViolation", "rule " + r.label + ": empty-body rules must not be disjunctive");
            passthrough.push_back(&r);
            continue;
        }
        if (!r.is_datalog())
            throw Error("SplitViolation", "rule " + r.label + ": sigma1 must be disjunctive Datalog");
        if (r.disjuncts.size() != 2 || r.disjuncts[0].atoms.size() != 1 || r.disjuncts[1].atoms.size() != 1)
            throw Error("SplitViolation",
                        "rule " + r.label + ": sigma1 must be normalized to two single-atom disjuncts");
        disj_rules.push_back(&r);
    }
    for (const Rule& r : split.sigma2.rules)
        if (r.is_disjunctive())
            throw Error("SplitViolation", "rule " + r.label + ": sigma2 must be non-disjunctive");

    std::set<PredId> preds;
    for (PredId p : split.sigma1.predicates()) preds.insert(p);
    for (PredId p : split.sigma2.predicates()) preds.insert(p);
    std::set<std::string> taken;
    for (PredId p : preds) taken.insert(Symbols::pred_name(p));
    auto fresh = [&](const std::string& internal, uint32_t ar) {
        if (taken.count(internal))
            throw Error("NameCollision",
                        "predicate " + display_pred_name(internal) + " already occurs in the split");
        return Symbols::pred(internal, ar);
    };

    PredId init = fresh("$W_Init", 1), done = fresh("$W_Done", 1), empty = fresh("$W_Empty", 1);
    PredId subs = fresh("$W_Subs", 2), acc = fresh("$W_Acc", 1);
    std::map<PredId, PredId> ins, hat;
    for (PredId p : preds) {
        uint32_t ar = Symbols::pred_arity(p);
        ins[p] = fresh("$Ins_" + disp(p), ar + 2);
        hat[p] = fresh("$WH_" + disp(p), ar + 1);
    }
    PredId goal = goal_pred();
    if (!hat.count(goal)) hat[goal] = fresh("$WH_Goal", 1);

    RuleSet out;
    for (const Rule* r : passthrough) out.add(*r);

    Term w = Symbols::var("w"), wp = Symbols::var("wp"), w0 = Symbols::var("w0");
    Term w1 = Symbols::var("w1"), w2 = Symbols::var("w2");
    {
        Rule r;
        r.label = "dr_init";
        r.disjuncts.push_back(
            Disjunct{{w.var_id()}, {{init, {w}}, {done, {w}}, {empty, {w}}}});
        out.add(std::move(r));
    }
    for (PredId p : preds) {
        uint32_t ar = Symbols::pred_arity(p);
        std::vector<Term> xs;
        for (uint32_t i = 0; i < ar; ++i) xs.push_back(Symbols::var("x" + std::to_string(i + 1)));
        auto with_w = [&](PredId q, Term a, Term b) {
            std::vector<Term> args = xs;
            args.push_back(a);
            args.push_back(b);
            return Atom(q, args);
        };
        Rule r;
        r.label = "dr_collect_" + disp(p);
        r.body = {{done, {w}}, {init, {w}}, Atom(p, xs)};
        r.disjuncts.push_back(
            Disjunct{{wp.var_id()}, {with_w(ins.at(p), w, wp), {subs, {wp, wp}}, {init, {wp}}}});
        out.add(std::move(r));

        std::vector<Term> hargs = xs;
        hargs.push_back(w2);
        Rule prop;
        prop.label = "dr_prop_" + disp(p);
        prop.body = {with_w(ins.at(p), w0, w1), {subs, {w1, w2}}};
        prop.disjuncts.push_back(
            Disjunct{{}, {with_w(ins.at(p), w2, w2), Atom(hat.at(p), hargs), {subs, {w0, w2}}}});
        out.add(std::move(prop));
    }
    auto world_body = [&](const Rule& r, Term wv) {
        std::vector<Atom> body{{done, {wv}}};
        for (const Atom& a : r.body) {
            std::vector<Term> args = a.args;
            args.push_back(wv);
            args.push_back(wv);
            body.push_back(Atom(ins.at(a.pred), args));
        }
        return body;
    };
    for (const Rule* r : disj_rules) {
        std::set<std::string> used = rule_var_names(*r);
        Term wv = fresh_var_outside(used, "w");
        used.insert(Symbols::term_name(wv));
        for (int side = 0; side < 2; ++side) {
            Term ws = fresh_var_outside(used, side == 0 ? "w1" : "w2");
            const Atom& headatom = r->disjuncts[side].atoms[0];
            std::vector<Term> args = headatom.args;
            args.push_back(wv);
            args.push_back(ws);
            Rule sr;
            sr.label = "dr_split" + std::to_string(side + 1) + "_" + r->label;
            sr.body = world_body(*r, wv);
            sr.disjuncts.push_back(
                Disjunct{{ws.var_id()}, {Atom(ins.at(headatom.pred), args), {subs, {ws, ws}}}});
            out.add(std::move(sr));
        }
    }
    {
        Rule r;
        r.label = "dr_done";
        r.body = {{empty, {w}}, {subs, {w, wp}}};
        r.disjuncts.push_back(Disjunct{{}, {{done, {wp}}}});
        out.add(std::move(r));
    }
    for (const Rule& r : split.sigma2.rules) {
        std::set<std::string> used = rule_var_names(r);
        Term wv = fresh_var_outside(used, "w");
        Rule wr;
        wr.label = "dr_world_" + r.label;
        wr.body = {{done, {wv}}};
        for (const Atom& a : r.body) {
            std::vector<Term> args = a.args;
            args.push_back(wv);
            wr.body.push_back(Atom(hat.at(a.pred), args));
        }
        Disjunct d;
        d.evars = r.disjuncts[0].evars;
        for (const Atom& a : r.disjuncts[0].atoms) {
            std::vector<Term> args = a.args;
            args.push_back(wv);
            d.atoms.push_back(Atom(hat.at(a.pred), args));
        }
        wr.disjuncts.push_back(std::move(d));
        out.add(std::move(wr));
    }
    {
        Rule r;
        r.label = "dr_acc_goal";
        r.body = {{hat.at(goal), {w}}};
        r.disjuncts.push_back(Disjunct{{}, {{acc, {w}}}});
        out.add(std::move(r));
    }
    for (const Rule* r : disj_rules) {
        std::set<std::string> used = rule_var_names(*r);
        Term wv = fresh_var_outside(used, "w");
        used.insert(Symbols::term_name(wv));
        Term wa = fresh_var_outside(used, "w1");
        used.insert(Symbols::term_name(wa));
        Term wb = fresh_var_outside(used, "w2");
        Rule ar;
        ar.label = "dr_acc_" + r->label;
        const Atom& h1 = r->disjuncts[0].atoms[0];
        const Atom& h2 = r->disjuncts[1].atoms[0];
        std::vector<Term> a1 = h1.args;
        a1.push_back(wv);
        a1.push_back(wa);
        std::vector<Term> a2 = h2.args;
        a2.push_back(wv);
        a2.push_back(wb);
        ar.body = {Atom(ins.at(h1.pred), a1), {acc, {wa}}, Atom(ins.at(h2.pred), a2), {acc, {wb}}};
        for (const Atom& a : world_body(*r, wv)) ar.body.push_back(a);
        Disjunct d;
        d.atoms.push_back({acc, {wv}});
        if (acc_debug) {
            PredId accr = Symbols::pred("$AccR_" + r->label, 3);
            d.atoms.push_back({accr, {wv, wa, wb}});
        }
        ar.disjuncts.push_back(std::move(d));
        out.add(std::move(ar));
    }
    {
        Rule r;
        r.label = "dr_goal";
        r.body = {{init, {w}}, {acc, {w}}};
        r.disjuncts.push_back(Disjunct{{}, {{goal, {}}}});
        out.add(std::move(r));
    }
    return out;
}

RuleSet build_pipeline(const CompileContext& ctx) {
    RuleSet r1 = generate_stage(ctx, "r1");
    RuleSet r5 = generate_stage(ctx, "r5");
    std::set<std::string> r1_labels;
    for (const Rule& r : r1.rules) r1_labels.insert(r.label);
    std::set<PredId> r1_preds;
    for (PredId p : r1.predicates()) r1_preds.insert(p);

    BrakeOutput braked = brake_transform(r5);
    RuleSet pi = halt_rules_for_query(ctx);

    // the creation rules and the brake witness run at the original level;
    // their inferences reach the worlds like database facts
    std::set<std::string> bucket_labels{"brake_init", "brake_body_mk_first", "brake_body_mk_last",
                                        "brake_head_mk_first_1", "brake_head_mk_last_1"};
    Split split;
    RuleSet bucket;
    RuleSet sigma1_raw;
    for (const Rule& r : braked.rules.rules) {
        if (bucket_labels.count(r.label)) {
            bucket.add(r);
            continue;
        }
        bool from_r1 = false;
        if (r.label.rfind("brake_body_", 0) == 0) from_r1 = r1_labels.count(r.label.substr(11)) != 0;
        if (r.label.rfind("brake_head_", 0) == 0) {
            std::string base = r.label.substr(11);
            size_t us = base.rfind('_');
            from_r1 = r1_labels.count(base.substr(0, us)) != 0;
        }
        if (r.label == "brake_halt") {
            sigma1_raw.add(r);
            split.sigma2.add(r);
            continue;
        }
        if (r.label.rfind("brake_real_", 0) == 0) {
            PredId orig = 0;
            bool found = false;
            for (auto& [p, hp] : braked.hat_of)
                if ("brake_real_" + disp(p) == r.label) {
                    orig = p;
                    found = true;
                }
            if (found && r1_preds.count(orig)) sigma1_raw.add(r);
            split.sigma2.add(r);
            continue;
        }
        if (from_r1)
            sigma1_raw.add(r);
        else
            split.sigma2.add(r);
    }
    for (const Rule& r : pi.rules) split.sigma2.add(r);
    split.sigma1 = normalize_two_disjuncts(sigma1_raw);

    RuleSet out = remove_disjunctions(split);
    for (const Rule& r : bucket.rules) out.add(r);
    return out;
}

}  // namespace chasekit
