#include "chasekit/brake.hpp"

#include <set>

namespace chasekit {

namespace {

std::string disp(PredId p) { return display_pred_name(Symbols::pred_name(p)); }

// a variable name unused by the rule, for the Brake witness
Term fresh_rule_var(const Rule& r, const std::string& base) {
    std::set<std::string> used;
    for (const Atom& a : r.body)
        for (Term t : a.args) used.insert(Symbols::term_name(t));
    for (const Disjunct& d : r.disjuncts) {
        for (uint32_t v : d.evars) used.insert(Symbols::var_name(v));
        for (const Atom& a : d.atoms)
            for (Term t : a.args) used.insert(Symbols::term_name(t));
    }
    std::string name = base;
    while (used.count(name)) name += "_";
    return Symbols::var(name);
}

}  // namespace

BrakeOutput brake_transform(const RuleSet& rs, const std::string& halt_name) {
    BrakeOutput out;
    std::set<std::string> used;  // internal predicate names in the input
    for (PredId p : rs.predicates()) used.insert(Symbols::pred_name(p));
    auto fresh = [&](const std::string& internal, uint32_t ar) {
        if (used.count(internal))
            throw Error("NameCollision", "predicate " + display_pred_name(internal) +
                                             " already occurs in the rule set");
        return Symbols::pred(internal, ar);
    };
    out.halt = fresh(halt_name, 0);
    out.brake = fresh("$Brake", 1);
    out.real = fresh("$Real", 1);
    for (PredId p : rs.predicates()) out.hat_of[p] = fresh("$hat_" + disp(p), Symbols::pred_arity(p));

    auto hat = [&](const Atom& a) { return Atom(out.hat_of.at(a.pred), a.args); };

    Term v0 = Symbols::var("v");
    Term x0 = Symbols::var("x");
    out.rules.add([&] {
        Rule r;
        r.label = "brake_init";
        r.disjuncts.push_back(Disjunct{{v0.var_id()}, {{out.brake, {v0}}}});
        return r;
    }());
    out.rules.add([&] {
        Rule r;
        r.label = "brake_halt";
        r.body = {{out.halt, {}}, {out.brake, {x0}}};
        r.disjuncts.push_back(Disjunct{{}, {{out.real, {x0}}}});
        return r;
    }());
    for (PredId p : rs.predicates()) {
        uint32_t ar = Symbols::pred_arity(p);
        std::vector<Term> xs;
        for (uint32_t i = 0; i < ar; ++i) xs.push_back(Symbols::var("x" + std::to_string(i + 1)));
        Rule r;
        r.label = "brake_real_" + disp(p);
        r.body.push_back({out.hat_of.at(p), xs});
        for (Term t : xs) r.body.push_back({out.real, {t}});
        r.disjuncts.push_back(Disjunct{{}, {{p, xs}}});
        out.rules.add(std::move(r));
    }
    for (const Rule& rho : rs.rules) {
        Term v = fresh_rule_var(rho, "v");
        // body rule: beta & Brake(v) -> per disjunct, marker + collapsed
        // hatted head + Real on the frontier
        Rule body_rule;
        body_rule.label = "brake_body_" + rho.label;
        body_rule.body = rho.body;
        body_rule.body.push_back({out.brake, {v}});
        for (size_t i = 0; i < rho.disjuncts.size(); ++i) {
            const Disjunct& d = rho.disjuncts[i];
            std::vector<uint32_t> frontier = rho.frontier(i);
            PredId marker = fresh("$B_" + rho.label + "_" + std::to_string(i + 1),
                                  static_cast<uint32_t>(frontier.size()));
            out.marker[{rho.label, i}] = marker;
            std::vector<Term> fr;
            for (uint32_t fv : frontier) fr.push_back(Term::var(fv));
            Disjunct nd;
            nd.atoms.push_back({marker, fr});
            std::set<uint32_t> ev(d.evars.begin(), d.evars.end());
            for (const Atom& a : d.atoms) {
                Atom h = hat(a);
                for (Term& t : h.args)
                    if (t.is_var() && ev.count(t.var_id())) t = v;
                nd.atoms.push_back(std::move(h));
            }
            for (Term t : fr) nd.atoms.push_back({out.real, {t}});
            body_rule.disjuncts.push_back(std::move(nd));

            Rule head_rule;
            head_rule.label = "brake_head_" + rho.label + "_" + std::to_string(i + 1);
            head_rule.body.push_back({marker, fr});
            Disjunct hd;
            hd.evars = d.evars;
            for (const Atom& a : d.atoms) hd.atoms.push_back(hat(a));
            for (uint32_t evv : d.evars) hd.atoms.push_back({out.real, {Term::var(evv)}});
            head_rule.disjuncts.push_back(std::move(hd));
            out.rules.add(std::move(head_rule));
        }
        out.rules.add(std::move(body_rule));
    }
    return out;
}

RuleSet halt_rules_for_query(const CompileContext& ctx) {
    RuleSet pi;
    PredId halt = Symbols::pred("Halt", 0);
    PredId first = gen_pred("First", 1), last = gen_pred("Last", 1), lt = gen_pred("LT", 2);
    Term x = Symbols::var("x"), y = Symbols::var("y");
    for (uint32_t l = 1; l <= ctx.max_arity; ++l)
        for (PredId p : preds_of_arity(ctx.schema, l)) {
            std::vector<Term> xs;
            for (uint32_t i = 0; i < l; ++i) xs.push_back(Symbols::var("x" + std::to_string(i + 1)));
            Rule r;
            r.label = "halt_incons_" + disp(p);
            r.body = {{gen_pred("In_" + disp(p), l), xs}, {gen_pred("NIn_" + disp(p), l), xs}};
            r.disjuncts.push_back(Disjunct{{}, {{halt, {}}}});
            pi.add(std::move(r));
        }
    {
        Rule r;
        r.label = "halt_lt_refl";
        r.body = {{lt, {x, x}}};
        r.disjuncts.push_back(Disjunct{{}, {{halt, {}}}});
        pi.add(std::move(r));
    }
    {
        Rule r;
        r.label = "halt_after_last";
        r.body = {{last, {x}}, {lt, {x, y}}};
        r.disjuncts.push_back(Disjunct{{}, {{halt, {}}}});
        pi.add(std::move(r));
    }
    {
        Rule r;
        r.label = "halt_before_first";
        r.body = {{lt, {x, y}}, {first, {y}}};
        r.disjuncts.push_back(Disjunct{{}, {{halt, {}}}});
        pi.add(std::move(r));
    }
    return pi;
}

RuleSet generate_r6(const CompileContext& ctx) {
    RuleSet r5 = generate_stage(ctx, "r5");
    BrakeOutput braked = brake_transform(r5);
    RuleSet out = std::move(braked.rules);
    for (Rule& r : halt_rules_for_query(ctx).rules) out.add(std::move(r));
    return out;
}

}  // namespace chasekit
