#include "chasekit/querygen.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace chasekit {

PredId gen_pred(const std::string& base, uint32_t arity) { return Symbols::pred("$" + base, arity); }

std::string cell_pred_base(const std::string& token) {
    if (token == "0") return "Cell_b0";
    if (token == "1") return "Cell_b1";
    if (token == "|") return "Cell_sep";
    if (token == "_") return "Cell_blank";
    if (token.size() > 1 && token[0] == '@') return "Cell_p_" + token.substr(1);
    return "Cell_m_" + token;
}

namespace {

std::string disp(PredId p) { return display_pred_name(Symbols::pred_name(p)); }

Term V(const std::string& n) { return Symbols::var(n); }

std::vector<Term> vars(const std::string& stem, uint32_t count, uint32_t from = 1) {
    std::vector<Term> out;
    for (uint32_t i = 0; i < count; ++i) out.push_back(V(stem + std::to_string(from + i)));
    return out;
}

Rule rule1(std::string label, std::vector<Atom> body, std::vector<uint32_t> evars, std::vector<Atom> head) {
    Rule r;
    r.label = std::move(label);
    r.body = std::move(body);
    Disjunct d;
    d.evars = std::move(evars);
    d.atoms = std::move(head);
    r.disjuncts.push_back(std::move(d));
    return r;
}

Rule rule2(std::string label, std::vector<Atom> body, std::vector<Atom> head1, std::vector<Atom> head2) {
    Rule r;
    r.label = std::move(label);
    r.body = std::move(body);
    r.disjuncts.push_back(Disjunct{{}, std::move(head1)});
    r.disjuncts.push_back(Disjunct{{}, std::move(head2)});
    return r;
}

std::vector<uint32_t> evar_ids(const std::vector<Term>& ts) {
    std::vector<uint32_t> out;
    for (Term t : ts) out.push_back(t.var_id());
    return out;
}

struct GenPreds {
    PredId dbdom, first, last, eq, neq, lt;
    std::map<PredId, PredId> in_p, nin_p;      // schema pred -> $In_p / $NIn_p
    PredId root, chi, leaf, link;
    std::map<PredId, PredId> int_p, nint_p;    // schema pred -> $InT_p / $NInT_p
    PredId enc, cell0, cell1, nxt, cpy, cpyp1;
    PredId lde, end;
    std::map<uint32_t, PredId> load_a, ready_a;   // arity level -> $LoadA<l>
    std::map<PredId, PredId> load_p, ready_p;
    std::map<std::string, PredId> cell;           // tape symbol token -> Cell pred
    std::map<std::string, PredId> head_q;         // state name -> $Head_<q>
    PredId nxtp, stp, goal;
};

GenPreds make_preds(const CompileContext& ctx) {
    GenPreds g;
    g.dbdom = gen_pred("DbDom", 1);
    g.first = gen_pred("First", 1);
    g.last = gen_pred("Last", 1);
    g.eq = gen_pred("Eq", 2);
    g.neq = gen_pred("NEq", 2);
    g.lt = gen_pred("LT", 2);
    for (PredId p : ctx.schema.predicates) {
        uint32_t ar = Symbols::pred_arity(p);
        g.in_p[p] = gen_pred("In_" + disp(p), ar);
        g.nin_p[p] = gen_pred("NIn_" + disp(p), ar);
        g.int_p[p] = gen_pred("InT_" + disp(p), ar);
        g.nint_p[p] = gen_pred("NInT_" + disp(p), ar);
        g.load_p[p] = gen_pred("LoadP_" + disp(p), 2 + ar);
        g.ready_p[p] = gen_pred("ReadyP_" + disp(p), 2 + ar);
    }
    g.root = gen_pred("Root", 1);
    g.chi = gen_pred("Chi", 2);
    g.leaf = gen_pred("Leaf", 1);
    g.link = gen_pred("Link", 2);
    g.enc = gen_pred("Enc", 3);
    g.cell0 = gen_pred(cell_pred_base("0"), 1);
    g.cell1 = gen_pred(cell_pred_base("1"), 1);
    g.nxt = gen_pred("Nxt", 2);
    g.cpy = gen_pred("Cpy", 4);
    g.cpyp1 = gen_pred("CpyP1", 4);
    g.lde = gen_pred("LdE", 3);
    g.end = gen_pred("End", 1);
    for (uint32_t l = 1; l <= ctx.max_arity; ++l) {
        g.load_a[l] = gen_pred("LoadA" + std::to_string(l), 2 + l);
        g.ready_a[l] = gen_pred("ReadyA" + std::to_string(l), 2 + l);
    }
    for (const std::string& tok : ctx.tm.symbol_names) g.cell[tok] = gen_pred(cell_pred_base(tok), 1);
    for (const std::string& q : ctx.tm.state_names) g.head_q[q] = gen_pred("Head_" + q, 1);
    g.nxtp = gen_pred("NxtP", 2);
    g.stp = gen_pred("Stp", 2);
    g.goal = goal_pred();
    return g;
}

void add_stage1(RuleSet& rs, const CompileContext& ctx, const GenPreds& g) {
    Term x = V("x"), y = V("y"), z = V("z");
    rs.add(rule1("mk_first", {}, {y.var_id()}, {{g.first, {y}}, {g.dbdom, {y}}}));
    rs.add(rule1("mk_last", {}, {z.var_id()}, {{g.last, {z}}, {g.dbdom, {z}}}));
    for (uint32_t l = 1; l <= ctx.max_arity; ++l)
        for (PredId p : preds_of_arity(ctx.schema, l)) {
            std::vector<Term> xs = vars("x", l);
            std::vector<Atom> head{{g.in_p.at(p), xs}};
            for (Term t : xs) head.push_back({g.dbdom, {t}});
            rs.add(rule1("copy_" + disp(p), {{p, xs}}, {}, std::move(head)));
        }
    rs.add(rule1("eq_refl", {{g.dbdom, {x}}}, {}, {{g.eq, {x, x}}}));
    rs.add(rule1("eq_sym", {{g.eq, {x, y}}}, {}, {{g.eq, {y, x}}}));
    rs.add(rule1("neq_sym", {{g.neq, {x, y}}}, {}, {{g.neq, {y, x}}}));
    // congruence: every listed predicate, every argument position
    std::vector<std::pair<std::string, PredId>> cong{{"First", g.first}, {"Last", g.last},
                                                     {"Eq", g.eq},       {"NEq", g.neq},
                                                     {"LT", g.lt}};
    for (uint32_t l = 1; l <= ctx.max_arity; ++l)
        for (PredId p : preds_of_arity(ctx.schema, l)) {
            cong.emplace_back("In_" + disp(p), g.in_p.at(p));
            cong.emplace_back("NIn_" + disp(p), g.nin_p.at(p));
        }
    for (auto& [name, pred] : cong) {
        uint32_t ar = Symbols::pred_arity(pred);
        for (uint32_t i = 0; i < ar; ++i) {
            std::vector<Term> xs = vars("x", ar);
            std::vector<Term> ys = xs;
            ys[i] = y;
            rs.add(rule1("cong_" + name + "_" + std::to_string(i + 1),
                         {{pred, xs}, {g.eq, {xs[i], y}}}, {}, {{pred, ys}}));
        }
    }
    rs.add(rule2("guess_eqneq", {{g.dbdom, {x}}, {g.dbdom, {y}}}, {{g.eq, {x, y}}}, {{g.neq, {x, y}}}));
    rs.add(rule1("lt_trans", {{g.lt, {x, y}}, {g.lt, {y, z}}}, {}, {{g.lt, {x, z}}}));
    rs.add(rule1("lt_first", {{g.first, {x}}, {g.neq, {x, y}}}, {}, {{g.lt, {x, y}}}));
    rs.add(rule1("lt_last", {{g.neq, {x, y}}, {g.last, {y}}}, {}, {{g.lt, {x, y}}}));
    rs.add(rule2("guess_lt", {{g.neq, {x, y}}}, {{g.lt, {x, y}}}, {{g.lt, {y, x}}}));
    for (uint32_t l = 1; l <= ctx.max_arity; ++l)
        for (PredId p : preds_of_arity(ctx.schema, l)) {
            std::vector<Term> xs = vars("x", l);
            std::vector<Atom> body;
            for (Term t : xs) body.push_back({g.dbdom, {t}});
            Rule r;
            r.label = "complete_" + disp(p);
            r.body = std::move(body);
            r.disjuncts.push_back(Disjunct{{}, {{g.in_p.at(p), xs}}});
            r.disjuncts.push_back(Disjunct{{}, {{g.nin_p.at(p), xs}}});
            rs.add(std::move(r));
        }
}

void add_stage2(RuleSet& rs, const CompileContext& ctx, const GenPreds& g) {
    Term x = V("x"), y = V("y"), z = V("z"), u = V("u"), v = V("v"), w = V("w");
    rs.add(rule1("mk_root", {{g.first, {x}}}, {u.var_id()}, {{g.root, {u}}, {g.link, {x, u}}}));
    rs.add(rule1("mk_child", {{g.link, {x, v}}, {g.lt, {x, z}}}, {w.var_id()},
                 {{g.chi, {v, w}}, {g.link, {z, w}}}));
    rs.add(rule1("mk_leaf", {{g.last, {x}}, {g.link, {x, u}}}, {}, {{g.leaf, {u}}}));
    rs.add(rule1("link_eq", {{g.link, {x, u}}, {g.eq, {x, y}}}, {}, {{g.link, {y, u}}}));
    for (uint32_t l = 1; l <= ctx.max_arity; ++l)
        for (PredId p : preds_of_arity(ctx.schema, l)) {
            std::vector<Term> xs = vars("x", l);
            std::vector<Term> us = vars("u", l);
            std::vector<Atom> body{{g.in_p.at(p), xs}};
            for (uint32_t i = 0; i < l; ++i) body.push_back({g.link, {xs[i], us[i]}});
            rs.add(rule1("treein_" + disp(p), body, {}, {{g.int_p.at(p), us}}));
            body[0] = {g.nin_p.at(p), xs};
            rs.add(rule1("treeni_" + disp(p), body, {}, {{g.nint_p.at(p), us}}));
        }
}

void add_stage3(RuleSet& rs, const GenPreds& g) {
    Term u = V("u"), v = V("v");
    Term y1 = V("y1"), y2 = V("y2"), y3 = V("y3"), yl = V("yl");
    Term z1 = V("z1"), z2 = V("z2"), zl = V("zl");
    rs.add(rule1("enc_root", {{g.root, {u}}}, evar_ids({y1, y2}),
                 {{g.enc, {u, y1, y2}}, {g.cell0, {y1}}, {g.nxt, {y1, y2}}, {g.cell1, {y2}}}));
    rs.add(rule1("enc_child", {{g.enc, {u, y1, yl}}, {g.chi, {u, v}}}, evar_ids({z1, zl}),
                 {{g.enc, {v, z1, zl}}, {g.cpyp1, {y1, yl, z1, zl}}}));
    rs.add(rule1("cpy1_last0",
                 {{g.cpyp1, {y1, y2, z1, zl}}, {g.cell0, {y1}}, {g.nxt, {y1, y2}}}, {},
                 {{g.cell1, {z1}}, {g.nxt, {z1, zl}}, {g.cell1, {zl}}}));
    rs.add(rule1("cpy1_last1",
                 {{g.cpyp1, {y1, y2, z1, zl}}, {g.cell1, {y1}}, {g.nxt, {y1, y2}}}, evar_ids({z2}),
                 {{g.cell0, {z1}}, {g.nxt, {z1, z2}}, {g.cell0, {z2}}, {g.nxt, {z2, zl}}, {g.cell1, {zl}}}));
    rs.add(rule1("cpy1_rec0",
                 {{g.cpyp1, {y1, yl, z1, zl}}, {g.cell0, {y1}}, {g.nxt, {y1, y2}}, {g.nxt, {y2, y3}}},
                 evar_ids({z2}), {{g.cpy, {y2, yl, z2, zl}}, {g.cell1, {z1}}, {g.nxt, {z1, z2}}}));
    rs.add(rule1("cpy1_rec1",
                 {{g.cpyp1, {y1, yl, z1, zl}}, {g.cell1, {y1}}, {g.nxt, {y1, y2}}, {g.nxt, {y2, y3}}},
                 evar_ids({z2}), {{g.cpyp1, {y2, yl, z2, zl}}, {g.cell0, {z1}}, {g.nxt, {z1, z2}}}));
    for (int b = 0; b <= 1; ++b) {
        PredId cb = b ? g.cell1 : g.cell0;
        rs.add(rule1("cpy_last_" + std::to_string(b),
                     {{g.cpy, {y1, y2, z1, z2}}, {cb, {y1}}, {g.nxt, {y1, y2}}}, {},
                     {{cb, {z1}}, {g.nxt, {z1, z2}}, {g.cell1, {z2}}}));
        rs.add(rule1("cpy_rec_" + std::to_string(b),
                     {{g.cpy, {y1, yl, z1, zl}}, {cb, {y1}}, {g.nxt, {y1, y2}}, {g.nxt, {y2, y3}}},
                     evar_ids({z2}), {{g.cpy, {y2, yl, z2, zl}}, {cb, {z1}}, {g.nxt, {z1, z2}}}));
    }
}

void add_stage4(RuleSet& rs, const CompileContext& ctx, const GenPreds& g) {
    Term u = V("u"), t = V("t"), y = V("y"), w = V("w");
    Term v = V("v"), xs_ = V("xs"), xe = V("xe");
    Term y1 = V("y1"), yl = V("yl"), z1 = V("z1"), zl = V("zl");
    const uint32_t m = ctx.max_arity;
    const uint32_t n = ctx.preds_per_arity;
    for (uint32_t l = 1; l <= m; ++l) {
        for (PredId p : preds_of_arity(ctx.schema, l)) {
            // serialise one present fact: pred symbol, then one encoded block
            // per argument between separators
            std::vector<Term> vsv = vars("v", l);
            std::vector<Term> xv = vars("x", l + 1);
            std::vector<Atom> body{{g.load_p.at(p), [&] {
                                        std::vector<Term> a{u, t};
                                        a.insert(a.end(), vsv.begin(), vsv.end());
                                        return a;
                                    }()},
                                   {g.int_p.at(p), vsv}};
            std::vector<Atom> head{{g.cell.at("@" + disp(p)), {t}}, {g.nxt, {t, xv[0]}}};
            for (uint32_t i = 0; i < l; ++i) head.push_back({g.lde, {vsv[i], xv[i], xv[i + 1]}});
            head.push_back({g.nxt, {xv[l], y}});
            head.push_back({g.ready_p.at(p), [&] {
                                std::vector<Term> a{u, y};
                                a.insert(a.end(), vsv.begin(), vsv.end());
                                return a;
                            }()});
            std::vector<uint32_t> ev = evar_ids(xv);
            ev.push_back(y.var_id());
            rs.add(rule1("tape_load_" + disp(p), std::move(body), std::move(ev), std::move(head)));
        }
    }
    rs.add(rule1("tape_enc", {{g.lde, {v, xs_, xe}}, {g.enc, {v, y1, yl}}}, evar_ids({z1, zl}),
                 {{g.cell.at("|"), {xs_}},
                  {g.nxt, {xs_, z1}},
                  {g.cpy, {y1, yl, z1, zl}},
                  {g.nxt, {zl, xe}},
                  {g.cell.at("|"), {xe}}}));
    rs.add(rule1("tape_start", {{g.leaf, {u}}}, evar_ids({t}),
                 {{g.load_a.at(1), {u, t, u}}, {g.head_q.at(ctx.tm.state_names[ctx.tm.initial]), {t}}}));
    for (uint32_t l = 1; l <= m; ++l) {
        std::vector<Term> vsv = vars("v", l);
        auto with_uv = [&](PredId pred, const std::vector<Term>& vv) {
            std::vector<Term> a{u, t};
            a.insert(a.end(), vv.begin(), vv.end());
            return Atom(pred, a);
        };
        auto preds_l = preds_of_arity(ctx.schema, l);
        rs.add(rule1("tape_firstpred_" + std::to_string(l), {with_uv(g.load_a.at(l), vsv)}, {},
                     {with_uv(g.load_p.at(preds_l[0]), vsv)}));
        for (uint32_t j = 0; j + 1 < n; ++j)
            rs.add(rule1("tape_nextpred_" + std::to_string(l) + "_" + std::to_string(j + 1),
                         {with_uv(g.ready_p.at(preds_l[j]), vsv)}, {},
                         {with_uv(g.load_p.at(preds_l[j + 1]), vsv)}));
        rs.add(rule1("tape_lastpred_" + std::to_string(l), {with_uv(g.ready_p.at(preds_l[n - 1]), vsv)},
                     {}, {with_uv(g.ready_a.at(l), vsv)}));
        for (uint32_t k = 1; k <= l; ++k) {
            std::vector<Atom> body{with_uv(g.ready_a.at(l), vsv)};
            for (uint32_t i = k; i < l; ++i) body.push_back({g.root, {vsv[i]}});
            body.push_back({g.chi, {w, vsv[k - 1]}});
            std::vector<Term> next(vsv.begin(), vsv.begin() + (k - 1));
            next.push_back(w);
            for (uint32_t i = k; i < l; ++i) next.push_back(u);
            rs.add(rule1("tape_nextvec_" + std::to_string(l) + "_" + std::to_string(k), std::move(body),
                         {}, {with_uv(g.load_a.at(l), next)}));
        }
        std::vector<Atom> all_root{with_uv(g.ready_a.at(l), vsv)};
        for (uint32_t i = 0; i < l; ++i) all_root.push_back({g.root, {vsv[i]}});
        if (l < m) {
            std::vector<Term> us(l + 1, u);
            rs.add(rule1("tape_nextlevel_" + std::to_string(l), all_root, {},
                         {with_uv(g.load_a.at(l + 1), us)}));
        } else {
            rs.add(rule1("tape_end", all_root, {}, {{g.cell.at("_"), {t}}, {g.end, {t}}}));
        }
    }
    for (uint32_t l = 1; l <= m; ++l)
        for (PredId p : preds_of_arity(ctx.schema, l)) {
            std::vector<Term> vsv = vars("v", l);
            std::vector<Term> a{u, t};
            a.insert(a.end(), vsv.begin(), vsv.end());
            rs.add(rule1("tape_skip_" + disp(p), {{g.load_p.at(p), a}, {g.nint_p.at(p), vsv}}, {},
                         {{g.ready_p.at(p), a}}));
        }
}

void add_stage5(RuleSet& rs, const CompileContext& ctx, const GenPreds& g) {
    Term x = V("x"), y = V("y"), z = V("z"), w = V("w"), v = V("v");
    const TuringMachine& tm = ctx.tm;
    rs.add(rule1("tm_accept", {{g.head_q.at(tm.state_names[tm.accept]), {x}}}, {}, {{g.goal, {}}}));
    rs.add(rule1("tm_nxtp_init", {{g.nxt, {x, y}}}, {}, {{g.nxtp, {x, y}}}));
    rs.add(rule1("tm_nxtp_trans", {{g.nxtp, {x, y}}, {g.nxtp, {y, z}}}, {}, {{g.nxtp, {x, z}}}));
    rs.add(rule1("tm_nxt_step", {{g.nxt, {x, y}}, {g.stp, {x, z}}, {g.stp, {y, w}}}, {},
                 {{g.nxt, {z, w}}}));
    rs.add(rule1("tm_grow", {{g.end, {x}}, {g.stp, {x, z}}}, evar_ids({v}),
                 {{g.nxt, {z, v}}, {g.cell.at("_"), {v}}, {g.end, {v}}}));
    for (size_t q = 0; q < tm.state_names.size(); ++q) {
        if (tm.halting(static_cast<int>(q))) continue;
        const std::string& qn = tm.state_names[q];
        for (size_t a = 0; a < tm.symbol_names.size(); ++a) {
            const TmTransition& tr = tm.delta[q][a];
            const std::string& an = tm.symbol_names[a];
            rs.add(rule1("tm_write_" + qn + "_" + cell_pred_base(an),
                         {{g.head_q.at(qn), {x}}, {g.cell.at(an), {x}}}, evar_ids({z}),
                         {{g.stp, {x, z}}, {g.cell.at(tm.symbol_names[tr.symbol]), {z}}}));
        }
        for (const std::string& cn : tm.symbol_names) {
            rs.add(rule1("tm_copyr_" + qn + "_" + cell_pred_base(cn),
                         {{g.head_q.at(qn), {x}}, {g.nxtp, {x, y}}, {g.cell.at(cn), {y}}}, evar_ids({z}),
                         {{g.stp, {y, z}}, {g.cell.at(cn), {z}}}));
            rs.add(rule1("tm_copyl_" + qn + "_" + cell_pred_base(cn),
                         {{g.head_q.at(qn), {x}}, {g.nxtp, {y, x}}, {g.cell.at(cn), {y}}}, evar_ids({z}),
                         {{g.stp, {y, z}}, {g.cell.at(cn), {z}}}));
        }
        for (size_t a = 0; a < tm.symbol_names.size(); ++a) {
            const TmTransition& tr = tm.delta[q][a];
            const std::string& an = tm.symbol_names[a];
            const std::string& rn = tm.state_names[tr.state];
            if (tr.dir > 0)
                rs.add(rule1("tm_mover_" + qn + "_" + cell_pred_base(an),
                             {{g.head_q.at(qn), {x}}, {g.cell.at(an), {x}}, {g.stp, {x, z}}, {g.nxt, {z, w}}},
                             {}, {{g.head_q.at(rn), {w}}}));
            else
                rs.add(rule1("tm_movel_" + qn + "_" + cell_pred_base(an),
                             {{g.head_q.at(qn), {x}}, {g.cell.at(an), {x}}, {g.stp, {x, z}}, {g.nxt, {w, z}}},
                             {}, {{g.head_q.at(rn), {w}}}));
        }
    }
}

}  // namespace

CompileContext make_context(Schema schema, TuringMachine tm) {
    CompileContext ctx;
    if (!validate_decider_inputs(schema))
        throw Error("InvalidSchema",
                    "schema must have exactly n predicates of every arity 1..m and no nullary predicates");
    for (PredId p : schema.predicates)
        if (is_reserved_pred_name(Symbols::pred_name(p)) || Symbols::pred_name(p) == "Goal" ||
            Symbols::pred_name(p) == "Halt")
            throw Error("InvalidSchema", "schema predicate " + disp(p) + " uses a reserved name");
    ctx.max_arity = schema.max_arity();
    std::map<uint32_t, uint32_t> per;
    for (PredId p : schema.predicates) per[Symbols::pred_arity(p)]++;
    ctx.preds_per_arity = per.begin()->second;
    for (const char* sym : {"0", "1", "|", "_"})
        if (tm.symbol_id(sym) < 0)
            throw Error("InvalidSchema", std::string("machine alphabet is missing symbol ") + sym);
    for (PredId p : schema.predicates)
        if (tm.symbol_id("@" + disp(p)) < 0)
            throw Error("InvalidSchema", "machine alphabet is missing symbol @" + disp(p));
    if (tm.symbol_names[tm.blank] != "_")
        throw Error("InvalidSchema", "machine blank symbol must be _");
    ctx.schema = std::move(schema);
    ctx.tm = std::move(tm);
    return ctx;
}

RuleSet generate_stage(const CompileContext& ctx, const std::string& stage) {
    int level;
    if (stage == "r1")
        level = 1;
    else if (stage == "r2")
        level = 2;
    else if (stage == "r3")
        level = 3;
    else if (stage == "r4")
        level = 4;
    else if (stage == "r5")
        level = 5;
    else
        throw Error("Usage", "unknown stage " + stage);
    GenPreds g = make_preds(ctx);
    RuleSet rs;
    add_stage1(rs, ctx, g);
    if (level >= 2) add_stage2(rs, ctx, g);
    if (level >= 3) add_stage3(rs, g);
    if (level >= 4) add_stage4(rs, ctx, g);
    if (level >= 5) add_stage5(rs, ctx, g);
    return rs;
}

// ----------------------------------------------------------- structural checks

namespace {

struct LeafView {
    const Interpretation& leaf;
    GenPreds g;

    bool has(PredId p, std::vector<Term> args) const { return leaf.contains(Atom(p, std::move(args))); }
    std::vector<const Atom*> of(PredId p) const {
        auto [lo, hi] = leaf.with_pred(p);
        std::vector<const Atom*> out;
        for (const Atom* a = lo; a != hi; ++a) out.push_back(a);
        return out;
    }
};

// all length-l tuples over a term list
void tuples(const std::vector<Term>& domain, uint32_t l, std::vector<std::vector<Term>>& out) {
    out.clear();
    std::vector<size_t> idx(l, 0);
    if (domain.empty() && l > 0) return;
    while (true) {
        std::vector<Term> t;
        for (size_t i : idx) t.push_back(domain[i]);
        out.push_back(std::move(t));
        size_t k = l;
        while (k > 0) {
            if (++idx[k - 1] < domain.size()) break;
            idx[k - 1] = 0;
            --k;
        }
        if (k == 0) break;
    }
}

}  // namespace

R1Shape decompose_r1_leaf(const Interpretation& leaf, const CompileContext& ctx, const Interpretation& db) {
    R1Shape shape;
    GenPreds g = make_preds(ctx);
    LeafView v{leaf, g};
    std::vector<Term> delta;
    for (const Atom* a : v.of(g.dbdom)) delta.push_back(a->args[0]);
    std::sort(delta.begin(), delta.end());
    delta.erase(std::unique(delta.begin(), delta.end()), delta.end());

    auto fail = [&](const std::string& why) {
        shape.ok = false;
        shape.violation = why;
        return shape;
    };

    // Eq must be an equivalence relation on delta
    for (Term t : delta)
        if (!v.has(g.eq, {t, t})) return fail("eq-not-reflexive");
    std::map<int64_t, int> cls;
    int nclasses = 0;
    for (Term t : delta) {
        if (cls.count(t.raw)) continue;
        int c = nclasses++;
        for (Term u : delta)
            if (v.has(g.eq, {t, u})) {
                if (cls.count(u.raw) && cls[u.raw] != c) return fail("eq-not-transitive");
                cls[u.raw] = c;
            }
    }
    for (const Atom* a : v.of(g.eq)) {
        if (!cls.count(a->args[0].raw) || !cls.count(a->args[1].raw)) return fail("eq-outside-domain");
        if (cls[a->args[0].raw] != cls[a->args[1].raw]) return fail("eq-not-symmetric-closed");
    }

    // First / Last must each be exactly one class
    std::set<int> first_cls, last_cls;
    for (const Atom* a : v.of(g.first)) first_cls.insert(cls.at(a->args[0].raw));
    for (const Atom* a : v.of(g.last)) last_cls.insert(cls.at(a->args[0].raw));
    if (first_cls.size() != 1) return fail("first-not-one-class");
    if (last_cls.size() != 1) return fail("last-not-one-class");
    if (*first_cls.begin() == *last_cls.begin() && nclasses > 1) return fail("first-last-merged");
    for (Term t : delta) {
        bool f = v.has(g.first, {t});
        if (f != (cls.at(t.raw) == *first_cls.begin())) return fail("first-class-incomplete");
        bool l = v.has(g.last, {t});
        if (l != (cls.at(t.raw) == *last_cls.begin())) return fail("last-class-incomplete");
    }

    // LT must strictly and totally order the classes
    for (const Atom* a : v.of(g.lt))
        if (cls.at(a->args[0].raw) == cls.at(a->args[1].raw)) return fail("lt-cycle");
    std::vector<std::vector<int>> lt(nclasses, std::vector<int>(nclasses, 0));
    for (const Atom* a : v.of(g.lt)) lt[cls.at(a->args[0].raw)][cls.at(a->args[1].raw)] = 1;
    for (int c = 0; c < nclasses; ++c)
        for (int d = 0; d < nclasses; ++d) {
            if (c == d) continue;
            if (lt[c][d] && lt[d][c]) return fail("lt-cycle");
            if (!lt[c][d] && !lt[d][c]) return fail("lt-incomparable");
        }
    std::vector<int> order(nclasses);
    for (int c = 0; c < nclasses; ++c) {
        int below = 0;
        for (int d = 0; d < nclasses; ++d) below += lt[d][c];
        order[c] = below;
    }
    {
        std::vector<int> seen(nclasses, 0);
        for (int c = 0; c < nclasses; ++c) {
            if (order[c] < 0 || order[c] >= nclasses || seen[order[c]]++) return fail("lt-not-linear");
        }
        for (int c = 0; c < nclasses; ++c)
            for (int d = 0; d < nclasses; ++d)
                if (c != d && lt[c][d] != (order[c] < order[d])) return fail("lt-not-linear");
    }
    if (order[*first_cls.begin()] != 0) return fail("first-not-minimal");
    if (order[*last_cls.begin()] != nclasses - 1) return fail("last-not-maximal");

    // NEq exactly between distinct classes
    for (const Atom* a : v.of(g.neq))
        if (cls.at(a->args[0].raw) == cls.at(a->args[1].raw)) return fail("neq-within-class");
    for (Term t : delta)
        for (Term u : delta) {
            bool cross = cls.at(t.raw) != cls.at(u.raw);
            if (cross && !v.has(g.neq, {t, u})) return fail("neq-missing");
            if (!cross && !v.has(g.eq, {t, u})) return fail("eq-missing");
        }

    // completion: exactly one of In/NIn per tuple, consistent, contains the db
    std::vector<std::vector<Term>> tup;
    for (PredId p : ctx.schema.predicates) {
        tuples(delta, Symbols::pred_arity(p), tup);
        for (auto& t : tup) {
            bool in = v.has(g.in_p.at(p), t);
            bool ni = v.has(g.nin_p.at(p), t);
            if (in && ni) return fail("completion-both");
            if (!in && !ni) return fail("completion-missing");
        }
        auto [lo, hi] = db.with_pred(p);
        for (const Atom* a = lo; a != hi; ++a)
            if (!v.has(g.in_p.at(p), a->args)) return fail("completion-misses-db-fact");
    }

    // exact reconstruction: nothing else may appear at the R1 level
    std::vector<Atom> expected = db.atoms();
    for (Term t : delta) expected.push_back({g.dbdom, {t}});
    for (Term t : delta)
        for (Term u : delta) {
            int ct = cls.at(t.raw), cu = cls.at(u.raw);
            if (ct == cu) expected.push_back({g.eq, {t, u}});
            if (ct != cu) {
                expected.push_back({g.neq, {t, u}});
                if (order[ct] < order[cu]) expected.push_back({g.lt, {t, u}});
            }
            (void)0;
        }
    for (Term t : delta) {
        if (cls.at(t.raw) == *first_cls.begin()) expected.push_back({g.first, {t}});
        if (cls.at(t.raw) == *last_cls.begin()) expected.push_back({g.last, {t}});
    }
    for (PredId p : ctx.schema.predicates) {
        tuples(delta, Symbols::pred_arity(p), tup);
        for (auto& t : tup) {
            if (v.has(g.in_p.at(p), t))
                expected.push_back({g.in_p.at(p), t});
            else
                expected.push_back({g.nin_p.at(p), t});
        }
    }
    // compare only over the R1-level predicates present in the leaf
    std::set<PredId> r1_preds{g.dbdom, g.first, g.last, g.eq, g.neq, g.lt};
    for (PredId p : ctx.schema.predicates) {
        r1_preds.insert(p);
        r1_preds.insert(g.in_p.at(p));
        r1_preds.insert(g.nin_p.at(p));
    }
    std::vector<Atom> actual;
    for (const Atom& a : leaf.atoms())
        if (r1_preds.count(a.pred)) actual.push_back(a);
    if (Interpretation(std::move(actual)) != Interpretation(std::move(expected)))
        return fail("r1-extra-or-missing-atoms");

    // assemble classes in order
    shape.classes.assign(nclasses, {});
    for (Term t : delta) shape.classes[order[cls.at(t.raw)]].push_back(t);
    shape.ok = true;
    // alpha / omega are the guessed First/Last witnesses; any member serves
    shape.u_alpha = shape.classes.front().front();
    shape.u_omega = shape.classes.back().front();
    return shape;
}

namespace {

struct TreeShape {
    bool ok = false;
    std::string violation;
    Term root{0};
    std::map<int64_t, Term> parent;       // node -> parent
    std::map<int64_t, int> depth;         // node -> |w| (root = 1)
    std::map<int64_t, int> node_class;    // node -> class order index
    std::vector<Term> leaves;             // Leaf-marked nodes
    std::vector<Term> max_branch_leaves;  // leaves whose branch hits every class
};

TreeShape decompose_tree(const Interpretation& leaf, const CompileContext& ctx, const R1Shape& r1) {
    TreeShape ts;
    GenPreds g = make_preds(ctx);
    LeafView v{leaf, g};
    auto fail = [&](const std::string& why) {
        ts.ok = false;
        ts.violation = why;
        return ts;
    };
    std::map<int64_t, int> cls_of_term;
    for (size_t c = 0; c < r1.classes.size(); ++c)
        for (Term t : r1.classes[c]) cls_of_term[t.raw] = static_cast<int>(c);

    auto roots = v.of(g.root);
    if (roots.size() != 1) return fail("tree-root-count");
    ts.root = roots[0]->args[0];
    // Link classes
    std::map<int64_t, std::set<int>> linked;
    std::set<int64_t> nodes;
    nodes.insert(ts.root.raw);
    for (const Atom* a : v.of(g.chi)) {
        nodes.insert(a->args[0].raw);
        nodes.insert(a->args[1].raw);
    }
    for (const Atom* a : v.of(g.link)) {
        if (!cls_of_term.count(a->args[0].raw)) return fail("link-from-non-domain");
        linked[a->args[1].raw].insert(cls_of_term[a->args[0].raw]);
        nodes.insert(a->args[1].raw);
    }
    for (int64_t n : nodes) {
        auto it = linked.find(n);
        if (it == linked.end() || it->second.size() != 1) return fail("node-class-ambiguous");
        ts.node_class[n] = *it->second.begin();
        // every member of the class must be linked
        int c = *it->second.begin();
        for (Term t : r1.classes[c])
            if (!v.has(g.link, {t, Term::null(static_cast<uint64_t>(n))})) return fail("link-class-incomplete");
    }
    if (ts.node_class[ts.root.raw] != 0) return fail("root-class");
    for (const Atom* a : v.of(g.chi)) {
        int64_t p = a->args[0].raw, c = a->args[1].raw;
        if (ts.parent.count(c)) return fail("tree-multi-parent");
        ts.parent[c] = a->args[0];
        if (ts.node_class[c] <= ts.node_class[p]) return fail("tree-not-monotone");
    }
    // depths from root
    ts.depth[ts.root.raw] = 1;
    bool progress = true;
    while (progress) {
        progress = false;
        for (auto& [c, p] : ts.parent) {
            if (ts.depth.count(c) || !ts.depth.count(p.raw)) continue;
            ts.depth[c] = ts.depth[p.raw] + 1;
            progress = true;
        }
    }
    for (int64_t n : nodes)
        if (!ts.depth.count(n)) return fail("tree-disconnected");
    int k = static_cast<int>(r1.classes.size());
    for (const Atom* a : v.of(g.leaf)) {
        if (ts.node_class[a->args[0].raw] != k - 1) return fail("leaf-not-last-class");
        ts.leaves.push_back(a->args[0]);
        if (ts.depth[a->args[0].raw] == k) ts.max_branch_leaves.push_back(a->args[0]);
    }
    for (int64_t n : nodes)
        if (ts.node_class[n] == k - 1 && !v.has(g.leaf, {Term::null(static_cast<uint64_t>(n))}))
            return fail("leaf-missing");
    if (ts.max_branch_leaves.empty()) return fail("no-maximal-branch");
    // tree facts reflect the completion
    for (PredId p : ctx.schema.predicates) {
        uint32_t ar = Symbols::pred_arity(p);
        std::vector<Term> node_terms;
        for (int64_t n : nodes) node_terms.push_back(Term::null(static_cast<uint64_t>(n)));
        std::vector<std::vector<Term>> tup;
        tuples(node_terms, ar, tup);
        for (auto& t : tup) {
            std::vector<Term> reps;
            for (Term n : t) reps.push_back(r1.classes[ts.node_class.at(n.raw)].front());
            bool in = v.has(g.in_p.at(p), reps);
            if (in != v.has(g.int_p.at(p), t)) return fail("tree-in-mismatch");
            if (!in != v.has(g.nint_p.at(p), t)) return fail("tree-nin-mismatch");
        }
    }
    ts.ok = true;
    return ts;
}

// read an Enc / tape chain as tokens (empty string on malformed cells)
std::vector<std::string> read_chain(const Interpretation& leaf, const GenPreds& g,
                                    const std::map<std::string, PredId>& cells, Term start, Term stop_after,
                                    bool until_end, std::string& err) {
    std::map<PredId, std::string> token_of;
    for (auto& [tok, p] : cells) token_of[p] = tok;
    std::vector<std::string> out;
    Term cur = start;
    size_t guard = 0;
    while (true) {
        if (++guard > 1000000) {
            err = "chain-too-long";
            return out;
        }
        std::string tok;
        int found = 0;
        for (auto& [p, t] : token_of)
            if (leaf.contains(Atom(p, {cur}))) {
                tok = t;
                ++found;
            }
        if (found != 1) {
            err = "cell-symbol-ambiguous";
            return out;
        }
        out.push_back(tok);
        if (!until_end && cur == stop_after) return out;
        if (until_end && leaf.contains(Atom(g.end, {cur}))) return out;
        // unique successor
        auto [lo, hi] = leaf.with_pred(g.nxt);
        Term next{-1};
        int succ = 0;
        for (const Atom* a = lo; a != hi; ++a)
            if (a->args[0] == cur) {
                next = a->args[1];
                ++succ;
            }
        if (succ != 1) {
            err = "chain-successor-ambiguous";
            return out;
        }
        cur = next;
    }
}

uint64_t lsb_value(const std::vector<std::string>& bits, bool& ok) {
    ok = true;
    if (bits.empty() || bits.back() != "1") ok = false;
    uint64_t v = 0;
    for (size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] != "0" && bits[i] != "1") {
            ok = false;
            return 0;
        }
        if (bits[i] == "1") v |= (1ull << i);
    }
    return v;
}

std::string lsb_binary(uint64_t v) {
    std::string out;
    while (v > 0) {
        out += static_cast<char>('0' + (v & 1));
        v >>= 1;
    }
    return out;
}

}  // namespace

Tape branch_tape(const Interpretation& leaf, const CompileContext& ctx, Term tree_leaf) {
    GenPreds g = make_preds(ctx);
    LeafView v{leaf, g};
    // branch nodes: walk Chi-parents up to the root
    std::vector<Term> branch{tree_leaf};
    std::map<int64_t, int> depth;
    while (true) {
        Term cur = branch.back();
        Term par{-1};
        int found = 0;
        auto [lo, hi] = leaf.with_pred(g.chi);
        for (const Atom* a = lo; a != hi; ++a)
            if (a->args[1] == cur) {
                par = a->args[0];
                ++found;
            }
        if (found == 0) break;
        if (found > 1) throw Error("StructuralViolation", "branch has multiple parents");
        branch.push_back(par);
    }
    // deepest first; depth of the root is 1
    for (size_t i = 0; i < branch.size(); ++i) depth[branch[i].raw] = static_cast<int>(branch.size() - i);
    Tape tape;
    for (uint32_t l = 1; l <= ctx.max_arity; ++l) {
        auto preds_l = preds_of_arity(ctx.schema, l);
        std::vector<std::vector<Term>> tup;
        tuples(branch, l, tup);  // branch is ordered deepest-first, so this is the odometer order
        for (auto& t : tup) {
            for (PredId p : preds_l) {
                if (!v.has(g.int_p.at(p), t)) continue;
                tape.push_back("@" + disp(p));
                tape.emplace_back("|");
                for (Term n : t) {
                    std::string bits = lsb_binary(static_cast<uint64_t>(depth.at(n.raw)) + 1);
                    for (char c : bits) tape.emplace_back(1, c);
                    tape.emplace_back("|");
                }
            }
        }
    }
    return tape;
}

std::string StructuralReport::summary() const {
    std::ostringstream out;
    out << conforming << "/" << leaves.size() << " leaves conform";
    if (!all_conform) {
        std::map<std::string, int> byv;
        for (const LeafReport& l : leaves)
            if (!l.conforms) byv[l.violation]++;
        out << " (violations:";
        for (auto& [v, c] : byv) out << " " << v << "=" << c;
        out << ")";
    }
    return out.str();
}

StructuralReport structural_validate(const ChaseOutcome& outcome, const CompileContext& ctx,
                                     const std::string& stage) {
    int level;
    if (stage == "r1")
        level = 1;
    else if (stage == "r2")
        level = 2;
    else if (stage == "r3")
        level = 3;
    else if (stage == "r4")
        level = 4;
    else if (stage == "r5")
        level = 5;
    else
        throw Error("Usage", "unknown stage " + stage);
    GenPreds g = make_preds(ctx);
    Interpretation root_label = outcome.label(outcome.root());
    std::vector<Atom> db_atoms;
    for (const Atom& a : root_label.atoms())
        if (ctx.schema.contains(a.pred)) db_atoms.push_back(a);
    Interpretation db(std::move(db_atoms));

    StructuralReport report;
    for (uint32_t id : outcome.leaf_ids()) {
        LeafReport lr;
        lr.node = id;
        Interpretation leaf = outcome.label(id);
        R1Shape r1 = decompose_r1_leaf(leaf, ctx, db);
        if (!r1.ok) {
            lr.violation = r1.violation;
            report.leaves.push_back(lr);
            report.all_conform = false;
            continue;
        }
        std::string why;
        TreeShape ts;
        if (level >= 2) {
            ts = decompose_tree(leaf, ctx, r1);
            if (!ts.ok) why = ts.violation;
        }
        if (why.empty() && level >= 3) {
            // every node's Enc chain spells depth+1, LSB first
            auto [lo, hi] = leaf.with_pred(g.enc);
            std::set<int64_t> enc_nodes;
            for (const Atom* a = lo; a != hi; ++a) {
                Term u = a->args[0];
                if (!ts.depth.count(u.raw)) {
                    why = "enc-on-non-node";
                    break;
                }
                if (!enc_nodes.insert(u.raw).second) {
                    why = "enc-duplicated";
                    break;
                }
                std::string err;
                auto bits = read_chain(leaf, g, {{"0", g.cell0}, {"1", g.cell1}}, a->args[1], a->args[2],
                                       false, err);
                if (!err.empty()) {
                    why = err;
                    break;
                }
                bool ok = false;
                uint64_t val = lsb_value(bits, ok);
                if (!ok || val != static_cast<uint64_t>(ts.depth[u.raw]) + 1) {
                    why = "enc-value-mismatch";
                    break;
                }
            }
            if (why.empty())
                for (auto& [n, d] : ts.depth)
                    if (!enc_nodes.count(n)) {
                        why = "enc-missing";
                        break;
                    }
        }
        if (why.empty() && level >= 4) {
            for (Term u : ts.leaves) {
                // start cell: LoadA1(u, t, u) with the initial head marker
                Term t0{-1};
                int found = 0;
                auto [lo, hi] = leaf.with_pred(g.load_a.at(1));
                for (const Atom* a = lo; a != hi; ++a)
                    if (a->args[0] == u && a->args[2] == u &&
                        leaf.contains(Atom(g.head_q.at(ctx.tm.state_names[ctx.tm.initial]), {a->args[1]}))) {
                        t0 = a->args[1];
                        ++found;
                    }
                if (found != 1) {
                    why = "tape-start-ambiguous";
                    break;
                }
                std::string err;
                auto toks = read_chain(leaf, g, g.cell, t0, t0, true, err);
                if (!err.empty()) {
                    why = err;
                    break;
                }
                Tape expected = branch_tape(leaf, ctx, u);
                expected.emplace_back("_");  // the End cell is blank
                if (toks != expected) {
                    why = "tape-content-mismatch";
                    break;
                }
            }
        }
        if (why.empty() && level >= 5) {
            bool accept_somewhere = false;
            for (Term u : ts.max_branch_leaves) {
                TmRun run = run_tm(ctx.tm, branch_tape(leaf, ctx, u), 1'000'000);
                if (run.status == TmStatus::StepCapExceeded) {
                    why = "tm-step-cap";
                    break;
                }
                if (run.status == TmStatus::Accept) accept_somewhere = true;
            }
            if (why.empty()) {
                bool has_goal = leaf.contains(Atom(g.goal, {}));
                if (has_goal != accept_somewhere) why = "goal-vs-tm-mismatch";
            }
        }
        lr.conforms = why.empty();
        lr.violation = why;
        if (lr.conforms) ++report.conforming;
        if (!lr.conforms) report.all_conform = false;
        report.leaves.push_back(std::move(lr));
    }
    return report;
}

}  // namespace chasekit
