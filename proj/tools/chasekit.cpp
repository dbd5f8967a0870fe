#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "chasekit/brake.hpp"
#include "chasekit/disjfree.hpp"
#include "chasekit/hom.hpp"
#include "chasekit/querygen.hpp"

using namespace chasekit;

namespace {

constexpr int kExitEntailed = 0;
constexpr int kExitNotEntailed = 1;
constexpr int kExitCap = 2;
constexpr int kExitUsage = 64;
constexpr int kExitParse = 65;
constexpr int kExitMissing = 66;

const char* kVersion = "chasekit 0.1.0";

uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("MissingFile", "cannot open " + path);
    uint64_t h = 14695981039346656037ull;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("MissingFile", "cannot write " + path);
    out << content;
}

struct ChaseFlags {
    std::string rules_path, db_path;
    std::string strategy = "fifo";
    uint64_t seed = 0;
    uint64_t max_nodes = 0;
    uint64_t max_steps = 0;
    int jobs = 1;
    bool early_verdict = false;
    std::string emit_tree, emit_leaves;

    void attach(CLI::App* cmd, bool with_emit) {
        cmd->add_option("--rules", rules_path, "rule set file")->required();
        cmd->add_option("--db", db_path, "database file")->required();
        cmd->add_option("--strategy", strategy, "fifo|datalog-first|rule-order");
        cmd->add_option("--seed", seed, "strategy tie-breaking seed");
        cmd->add_option("--max-nodes", max_nodes, "node cap (default 1000000)");
        cmd->add_option("--max-steps", max_steps, "rule application cap (default 10000000)");
        cmd->add_option("--jobs", jobs, "chase branch workers");
        cmd->add_flag("--early-verdict", early_verdict, "stop once the Goal verdict is sound");
        if (with_emit) {
            cmd->add_option("--emit-tree", emit_tree, "write the chase tree as JSON");
            cmd->add_option("--emit-leaves", emit_leaves, "write one canonical .db per leaf into a directory");
        }
    }

    ChaseCaps caps() const {
        ChaseCaps c;
        if (max_nodes) c.max_nodes = max_nodes;
        else if (const char* env = std::getenv("CHASEKIT_MAX_NODES")) c.max_nodes = std::stoull(env);
        if (max_steps) c.max_steps = max_steps;
        return c;
    }
};

int report_outcome(const ChaseOutcome& outcome) {
    std::string status;
    int code;
    if (outcome.verdict == GoalVerdict::Entailed) {
        status = "ENTAILED";
        code = kExitEntailed;
    } else if (outcome.verdict == GoalVerdict::NotEntailed) {
        status = "NOT-ENTAILED";
        code = kExitNotEntailed;
    } else {
        status = "CAP-EXCEEDED";
        code = kExitCap;
    }
    std::cout << "status=" << status << " nodes=" << outcome.stats.nodes
              << " steps=" << outcome.stats.applications << " depth=" << outcome.stats.max_depth
              << " ms=" << outcome.stats.ms << "\n";
    return code;
}

ChaseOutcome run_from_flags(const ChaseFlags& f, bool stop_on_verdict) {
    RuleSet rs = load_rules(f.rules_path);
    Interpretation db = load_database(f.db_path);
    ChaseConfig cfg;
    cfg.stop_on_verdict = stop_on_verdict || f.early_verdict;
    cfg.jobs = f.jobs;
    return run_chase(rs, db, Strategy::parse(f.strategy, f.seed), f.caps(), cfg);
}

std::string provenance_header(const std::string& stage, const std::string& schema_path,
                              const std::string& tm_path) {
    std::string out = "# " + std::string(kVersion) + " compile\n";
    out += "# stage: " + stage + "\n";
    out += "# schema: " + schema_path + " fnv1a=" + hex64(fnv1a_file(schema_path)) + "\n";
    out += "# tm: " + tm_path + " fnv1a=" + hex64(fnv1a_file(tm_path)) + "\n";
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kVersion) +
                 " - a disjunctive restricted-chase engine with a query-to-rules compiler"};
    app.require_subcommand(1);

    // entail / chase -----------------------------------------------------
    ChaseFlags entail_flags;
    CLI::App* entail = app.add_subcommand("entail", "run the chase and report Goal entailment");
    entail_flags.attach(entail, false);

    ChaseFlags chase_flags;
    CLI::App* chase = app.add_subcommand("chase", "run the chase and export tree or leaves");
    chase_flags.attach(chase, true);

    // entail-bcq ----------------------------------------------------------
    std::string bcq_src, bcq_query;
    CLI::App* bcq = app.add_subcommand("entail-bcq", "boolean conjunctive query between databases");
    bcq->add_option("--src", bcq_src, "source database")->required();
    bcq->add_option("--query", bcq_query, "query database (matched into the source)")->required();

    // compile ---------------------------------------------------------------
    std::string c_schema, c_tm, c_stage = "r5", c_out;
    CLI::App* compile = app.add_subcommand("compile", "compile a schema and decider machine to rules");
    compile->add_option("--schema", c_schema, "schema file")->required();
    compile->add_option("--tm", c_tm, "decider machine file")->required();
    compile->add_option("--stage", c_stage, "r1|r2|r3|r4|r5|r6|final");
    compile->add_option("-o,--output", c_out, "output .rules file")->required();

    // brake -------------------------------------------------------------
    std::string b_rules, b_halt_rules, b_out, b_halt_name = "Halt";
    CLI::App* brake = app.add_subcommand("brake", "apply the emergency-brake transformation");
    brake->add_option("--rules", b_rules, "input rule set")->required();
    brake->add_option("--halt-rules", b_halt_rules, "halt trigger rules to append");
    brake->add_option("--halt-name", b_halt_name, "name of the halt predicate");
    brake->add_option("-o,--output", b_out, "output .rules file")->required();

    // remove-disj ---------------------------------------------------------
    std::string rd_s1, rd_s2, rd_out;
    bool rd_debug = false;
    CLI::App* rd = app.add_subcommand("remove-disj", "replace disjunctions by the world construction");
    rd->add_option("--sigma1", rd_s1, "disjunctive Datalog part (two-disjunct normal form)")->required();
    rd->add_option("--sigma2", rd_s2, "existential part")->required();
    rd->add_flag("--acc-debug", rd_debug, "emit the instrumented acceptance predicate");
    rd->add_option("-o,--output", rd_out, "output .rules file")->required();

    // tm ------------------------------------------------------------------
    CLI::App* tm = app.add_subcommand("tm", "Turing machine utilities");
    tm->require_subcommand(1);
    std::string tm_path, tm_input;
    uint64_t tm_cap = 1'000'000;
    CLI::App* tm_run = tm->add_subcommand("run", "run a machine on a tape");
    tm_run->add_option("--tm", tm_path, "machine file")->required();
    tm_run->add_option("--input", tm_input, "input tape text");
    tm_run->add_option("--step-cap", tm_cap, "step cap");

    // serialize / deserialize ------------------------------------------------
    std::string s_db, s_schema, s_out;
    CLI::App* ser = app.add_subcommand("serialize", "canonical serialisation of a database");
    ser->add_option("--db", s_db, "database file")->required();
    ser->add_option("--schema", s_schema, "schema file")->required();
    ser->add_option("-o,--output", s_out, "output file (default stdout)");

    std::string d_input, d_schema, d_out;
    CLI::App* deser = app.add_subcommand("deserialize", "database of a serialisation");
    deser->add_option("--input", d_input, "serialisation text")->required();
    deser->add_option("--schema", d_schema, "schema file")->required();
    deser->add_option("-o,--output", d_out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (entail->parsed()) {
            return report_outcome(run_from_flags(entail_flags, true));
        }
        if (chase->parsed()) {
            ChaseOutcome outcome = run_from_flags(chase_flags, false);
            if (!chase_flags.emit_tree.empty()) write_file(chase_flags.emit_tree, outcome.tree_json());
            if (!chase_flags.emit_leaves.empty()) {
                std::filesystem::create_directories(chase_flags.emit_leaves);
                auto ids = outcome.leaf_ids();
                for (size_t i = 0; i < ids.size(); ++i) {
                    write_file(chase_flags.emit_leaves + "/leaf" + std::to_string(i + 1) + ".db",
                               print_database(canonicalize(outcome.label(ids[i]))));
                }
            }
            return report_outcome(outcome);
        }
        if (bcq->parsed()) {
            Interpretation src = load_database(bcq_src);
            Interpretation query = load_database(bcq_query);
            bool holds = entails(src, query);
            std::cout << (holds ? "true" : "false") << "\n";
            return holds ? 0 : 1;
        }
        if (compile->parsed()) {
            CompileContext ctx = make_context(load_schema(c_schema), load_tm(c_tm));
            RuleSet rs;
            if (c_stage == "r6")
                rs = generate_r6(ctx);
            else if (c_stage == "final")
                rs = build_pipeline(ctx);
            else
                rs = generate_stage(ctx, c_stage);
            write_file(c_out, provenance_header(c_stage, c_schema, c_tm) + print_rules(rs));
            std::cout << "wrote " << rs.rules.size() << " rules to " << c_out << "\n";
            return 0;
        }
        if (brake->parsed()) {
            RuleSet rs = load_rules(b_rules);
            BrakeOutput out = brake_transform(rs, b_halt_name);
            RuleSet result = std::move(out.rules);
            if (!b_halt_rules.empty())
                for (Rule& r : load_rules(b_halt_rules).rules) result.add(std::move(r));
            write_file(b_out, print_rules(result));
            std::cout << "wrote " << result.rules.size() << " rules to " << b_out << "\n";
            return 0;
        }
        if (rd->parsed()) {
            Split split;
            split.sigma1 = load_rules(rd_s1);
            split.sigma2 = load_rules(rd_s2);
            RuleSet result = remove_disjunctions(split, rd_debug);
            write_file(rd_out, print_rules(result));
            std::cout << "wrote " << result.rules.size() << " rules to " << rd_out << "\n";
            return 0;
        }
        if (tm_run->parsed()) {
            TuringMachine m = load_tm(tm_path);
            TmRun run = run_tm(m, tape_from_text(tm_input), tm_cap);
            const char* status = run.status == TmStatus::Accept   ? "ACCEPT"
                                 : run.status == TmStatus::Reject ? "REJECT"
                                                                  : "STEP-CAP-EXCEEDED";
            std::cout << "status=" << status << " steps=" << run.steps << "\n";
            return run.status == TmStatus::Accept ? 0 : run.status == TmStatus::Reject ? 1 : kExitCap;
        }
        if (ser->parsed()) {
            Tape t = serialize_db(load_database(s_db), load_schema(s_schema));
            std::string text = tape_to_text(t) + "\n";
            if (s_out.empty())
                std::cout << text;
            else
                write_file(s_out, text);
            return 0;
        }
        if (deser->parsed()) {
            Interpretation db = deserialize(tape_from_text(d_input), load_schema(d_schema));
            std::string text = print_database(canonicalize(db));
            if (d_out.empty())
                std::cout << text;
            else
                write_file(d_out, text);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (e.kind() == "MissingFile") return kExitMissing;
        if (e.kind() == "Usage") return kExitUsage;
        return kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
    return kExitUsage;
}
