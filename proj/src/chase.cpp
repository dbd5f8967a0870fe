#include "chasekit/chase.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "chasekit/hom.hpp"

namespace chasekit {

PredId goal_pred() { return Symbols::pred("Goal", 0); }

Strategy Strategy::parse(const std::string& name, uint64_t seed) {
    Strategy s;
    s.seed = seed;
    if (name == "fifo")
        s.kind = Fifo;
    else if (name == "datalog-first")
        s.kind = DatalogFirst;
    else if (name == "rule-order")
        s.kind = RuleOrderPriority;
    else
        throw Error("Usage", "unknown strategy " + name);
    return s;
}

std::string Strategy::name() const {
    switch (kind) {
        case Fifo: return "fifo";
        case DatalogFirst: return "datalog-first";
        default: return "rule-order";
    }
}

namespace {

constexpr uint32_t kNone = 0xffffffffu;

uint64_t fnv(uint64_t h, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xff;
        h *= 1099511628211ull;
    }
    return h;
}

// ----------------------------------------------------------- compiled rules

struct CAtom {
    PredId pred = 0;
    std::vector<int32_t> slots;
};

struct CDisj {
    std::vector<int32_t> evar_slots;
    std::vector<CAtom> atoms;
};

struct CRule {
    uint32_t index = 0;
    std::string label;
    std::vector<CAtom> body;
    uint32_t n_body_slots = 0;
    uint32_t n_slots = 0;
    std::vector<uint32_t> body_var_ids;
    std::vector<CDisj> disjuncts;
    bool datalog_simple = false;
};

struct CompiledRules {
    std::vector<CRule> rules;
    std::unordered_map<PredId, std::vector<std::pair<uint32_t, uint32_t>>> seats;
    std::vector<uint32_t> empty_body;
};

CompiledRules compile(const RuleSet& rs) {
    CompiledRules out;
    out.rules.reserve(rs.rules.size());
    for (const Rule& r : rs.rules) {
        CRule c;
        c.index = static_cast<uint32_t>(out.rules.size());
        c.label = r.label;
        std::unordered_map<uint32_t, int32_t> slot_of;
        auto slot_for = [&](uint32_t var) {
            auto it = slot_of.find(var);
            if (it != slot_of.end()) return it->second;
            int32_t s = static_cast<int32_t>(slot_of.size());
            slot_of.emplace(var, s);
            return s;
        };
        for (const Atom& a : r.body) {
            CAtom ca;
            ca.pred = a.pred;
            for (Term t : a.args) ca.slots.push_back(slot_for(t.var_id()));
            c.body.push_back(std::move(ca));
        }
        c.n_body_slots = static_cast<uint32_t>(slot_of.size());
        c.body_var_ids.resize(c.n_body_slots);
        for (auto& [var, slot] : slot_of)
            if (slot < static_cast<int32_t>(c.n_body_slots)) c.body_var_ids[slot] = var;
        for (const Disjunct& d : r.disjuncts) {
            CDisj cd;
            for (uint32_t ev : d.evars) cd.evar_slots.push_back(slot_for(ev));
            for (const Atom& a : d.atoms) {
                CAtom ca;
                ca.pred = a.pred;
                for (Term t : a.args) ca.slots.push_back(slot_for(t.var_id()));
                cd.atoms.push_back(std::move(ca));
            }
            c.disjuncts.push_back(std::move(cd));
        }
        c.n_slots = static_cast<uint32_t>(slot_of.size());
        c.datalog_simple = r.disjuncts.size() == 1 && r.disjuncts[0].evars.empty();
        if (c.body.empty())
            out.empty_body.push_back(c.index);
        else
            for (uint32_t seat = 0; seat < c.body.size(); ++seat)
                out.seats[c.body[seat].pred].emplace_back(c.index, seat);
        out.rules.push_back(std::move(c));
    }
    return out;
}

// ----------------------------------------------------------- atom store

class AtomStore {
public:
    static constexpr int kShardBits = 4;
    static constexpr int kShards = 1 << kShardBits;

    explicit AtomStore(bool threaded) : threaded_(threaded) {
        for (auto& s : shards_) {
            s.table.assign(1024, 0);
            s.mask = 1023;
        }
    }

    static constexpr uint32_t kAbsent = 0xffffffffu;

    // id of an existing atom, or kAbsent; never inserts
    uint32_t find(PredId pred, const Term* args, size_t n) const {
        uint64_t h = fnv(fnv(14695981039346656037ull, pred), n);
        for (size_t i = 0; i < n; ++i) h = fnv(h, static_cast<uint64_t>(args[i].raw));
        uint32_t shard_idx = static_cast<uint32_t>(h & (kShards - 1));
        const Shard& s = shards_[shard_idx];
        std::unique_lock<std::mutex> lock(const_cast<Shard&>(s).mu, std::defer_lock);
        if (threaded_) lock.lock();
        size_t pos = (h >> kShardBits) & s.mask;
        while (true) {
            uint32_t slot = s.table[pos];
            if (slot == 0) return kAbsent;
            uint32_t idx = slot - 1;
            if (s.hash[idx] == h && s.pred[idx] == pred && s.len[idx] == n &&
                std::equal(args, args + n, s.pool.begin() + s.off[idx]))
                return pack(shard_idx, idx);
            pos = (pos + 1) & s.mask;
        }
    }

    uint32_t intern(PredId pred, const Term* args, size_t n) {
        uint64_t h = fnv(fnv(14695981039346656037ull, pred), n);
        for (size_t i = 0; i < n; ++i) h = fnv(h, static_cast<uint64_t>(args[i].raw));
        uint32_t shard_idx = static_cast<uint32_t>(h & (kShards - 1));
        Shard& s = shards_[shard_idx];
        std::unique_lock<std::mutex> lock(s.mu, std::defer_lock);
        if (threaded_) lock.lock();
        size_t pos = (h >> kShardBits) & s.mask;
        while (true) {
            uint32_t slot = s.table[pos];
            if (slot == 0) break;
            uint32_t idx = slot - 1;
            if (s.hash[idx] == h && s.pred[idx] == pred && s.len[idx] == n &&
                std::equal(args, args + n, s.pool.begin() + s.off[idx]))
                return pack(shard_idx, idx);
            pos = (pos + 1) & s.mask;
        }
        uint32_t idx = static_cast<uint32_t>(s.pred.size());
        s.pred.push_back(pred);
        s.off.push_back(static_cast<uint32_t>(s.pool.size()));
        s.len.push_back(static_cast<uint32_t>(n));
        s.hash.push_back(h);
        s.pool.insert(s.pool.end(), args, args + n);
        s.table[pos] = idx + 1;
        if ((static_cast<size_t>(idx) + 1) * 10 > s.mask * 7) grow(s);
        return pack(shard_idx, idx);
    }

    PredId pred_of(uint32_t id) const { return shards_[id >> 27].pred[id & 0x7ffffff]; }
    std::pair<const Term*, size_t> args_of(uint32_t id) const {
        const Shard& s = shards_[id >> 27];
        uint32_t idx = id & 0x7ffffff;
        return {s.pool.data() + s.off[idx], s.len[idx]};
    }
    Atom atom_of(uint32_t id) const {
        auto [p, n] = args_of(id);
        return Atom(pred_of(id), std::vector<Term>(p, p + n));
    }

private:
    struct Shard {
        std::mutex mu;
        std::vector<uint32_t> table;
        size_t mask = 0;
        std::vector<PredId> pred;
        std::vector<uint32_t> off, len;
        std::vector<uint64_t> hash;
        std::vector<Term> pool;
    };

    static uint32_t pack(uint32_t shard, uint32_t idx) { return (shard << 27) | idx; }

    void grow(Shard& s) {
        size_t cap = (s.mask + 1) * 2;
        std::vector<uint32_t> table(cap, 0);
        size_t mask = cap - 1;
        for (uint32_t idx = 0; idx < s.pred.size(); ++idx) {
            size_t pos = (s.hash[idx] >> kShardBits) & mask;
            while (table[pos] != 0) pos = (pos + 1) & mask;
            table[pos] = idx + 1;
        }
        s.table = std::move(table);
        s.mask = mask;
    }

    bool threaded_;
    Shard shards_[kShards];
};

// ----------------------------------------------------------- node store

struct Batch {
    std::vector<uint32_t> rule;
    std::vector<uint32_t> off;
    std::vector<Term> flat;
    size_t size() const { return rule.size(); }
};

struct Node {
    uint32_t parent = kNone;
    uint32_t depth = 0;
    uint32_t child_index = 0;
    std::vector<uint32_t> children;
    uint32_t applied_rule = kNone;
    std::vector<Term> applied_sub;
    uint32_t via_node = kNone;
    uint32_t via_idx = 0;
    std::vector<uint32_t> delta;
    Batch batch;
    bool batch_ready = false;
    bool terminated = false;
    bool has_goal = false;
};

class NodeStore {
public:
    static constexpr int kWorkerBits = 5;
    static constexpr uint32_t kChunk = 4096;
    static constexpr uint32_t kLocalMask = (1u << (32 - kWorkerBits)) - 1;

    explicit NodeStore(int workers) : lanes_(workers) {
        for (auto& w : lanes_) w.chunks.reserve(1 << 16);
    }

    uint32_t allocate(int worker) {
        Lane& w = lanes_[worker];
        if (w.count % kChunk == 0) w.chunks.push_back(std::make_unique<Node[]>(kChunk));
        uint32_t local = w.count++;
        return (static_cast<uint32_t>(worker) << (32 - kWorkerBits)) | local;
    }

    Node& at(uint32_t id) {
        Lane& w = lanes_[id >> (32 - kWorkerBits)];
        uint32_t local = id & kLocalMask;
        return w.chunks[local / kChunk][local % kChunk];
    }
    const Node& at(uint32_t id) const { return const_cast<NodeStore*>(this)->at(id); }

    size_t lane_count() const { return lanes_.size(); }
    uint32_t lane_size(size_t lane) const { return lanes_[lane].count; }
    static uint32_t make_id(size_t lane, uint32_t local) {
        return (static_cast<uint32_t>(lane) << (32 - kWorkerBits)) | local;
    }

private:
    struct Lane {
        std::vector<std::unique_ptr<Node[]>> chunks;
        uint32_t count = 0;
    };
    std::vector<Lane> lanes_;
};

// ----------------------------------------------------------- active state

struct QItem {
    uint32_t node;
    uint32_t idx;
};

// Priority buckets with an aging escape: an item waiting for more than
// `age_limit` pushes is served in arrival order, whatever its bucket. That
// keeps strict priorities on saturating runs and restores fairness on
// branches whose low-priority rules would otherwise starve forever.
struct BucketQueue {
    std::map<uint64_t, std::deque<QItem>> buckets;
    std::deque<std::pair<uint64_t, QItem>> fifo;
    std::unordered_set<uint64_t> popped;
    uint64_t push_seq = 0;
    size_t count = 0;
    uint64_t age_limit = 0;  // 0 disables aging

    static uint64_t idkey(QItem it) { return (static_cast<uint64_t>(it.node) << 32) | it.idx; }

    void push(uint64_t key, QItem item) {
        buckets[key].push_back(item);
        if (age_limit) fifo.emplace_back(push_seq, item);
        ++push_seq;
        ++count;
    }
    bool empty() const { return count == 0; }
    QItem pop() {
        QItem item;
        bool have = false;
        if (age_limit) {
            while (!fifo.empty() && popped.count(idkey(fifo.front().second))) fifo.pop_front();
            if (!fifo.empty() && push_seq - fifo.front().first > age_limit) {
                item = fifo.front().second;
                fifo.pop_front();
                have = true;
            }
        }
        if (!have) {
            auto it = buckets.begin();
            while (true) {
                if (it->second.empty()) {
                    it = buckets.erase(it);
                    continue;
                }
                if (age_limit && popped.count(idkey(it->second.front()))) {
                    it->second.pop_front();
                    continue;
                }
                break;
            }
            item = it->second.front();
            it->second.pop_front();
        }
        if (age_limit) popped.insert(idkey(item));
        --count;
        return item;
    }
};

struct ActiveState {
    std::unordered_set<uint32_t> label;
    std::unordered_map<PredId, std::vector<uint32_t>> postings;
    std::unordered_map<uint64_t, std::vector<uint32_t>> arg_index;
    BucketQueue queue;

    static uint64_t arg_key(PredId pred, int pos, Term v) {
        return fnv(fnv(fnv(0x9e3779b97f4a7c15ull, pred), static_cast<uint64_t>(pos)),
                   static_cast<uint64_t>(v.raw));
    }

    void insert(uint32_t id, const AtomStore& store) {
        if (!label.insert(id).second) return;
        PredId p = store.pred_of(id);
        postings[p].push_back(id);
        auto [args, n] = store.args_of(id);
        for (size_t pos = 0; pos < n && pos < 2; ++pos)
            arg_index[arg_key(p, static_cast<int>(pos), args[pos])].push_back(id);
    }
};

}  // namespace

// ----------------------------------------------------------- engine

class ChaseResultImpl {
public:
    ChaseResultImpl(const RuleSet& rs, const Interpretation& db, Strategy strategy, ChaseCaps caps,
                    ChaseConfig config)
        : rules(compile(rs)),
          strategy(strategy),
          caps(caps),
          config(config),
          workers(std::max(1, std::min(config.jobs, 31))),
          store(config.jobs > 1),
          nodes(std::max(1, std::min(config.jobs, 31))) {
        goal = goal_pred();
        root = nodes.allocate(0);
        Node& r = nodes.at(root);
        for (const Atom& a : db.atoms()) {
            uint32_t id = store.intern(a.pred, a.args.data(), a.args.size());
            r.delta.push_back(id);
            if (a.pred == goal) r.has_goal = true;
            // keep invented nulls fresh even when the database already holds
            // nulls from an earlier chase (restart from a frontier label)
            for (Term t : a.args)
                if (t.null_id() & Symbols::kChaseNullBase) {
                    uint64_t node_part = (t.null_id() ^ Symbols::kChaseNullBase) >> 20;
                    null_offset = std::max(null_offset, node_part + 1);
                }
        }
        nodes_created = 1;
    }

    void run();

    CompiledRules rules;
    Strategy strategy;
    ChaseCaps caps;
    ChaseConfig config;
    int workers;
    AtomStore store;
    NodeStore nodes;
    PredId goal = 0;
    uint32_t root = 0;

    ChaseStatus status = ChaseStatus::Terminated;
    GoalVerdict verdict = GoalVerdict::Unknown;
    ChaseStats stats;
    std::vector<uint32_t> leaves;           // path-sorted at the end of run()
    std::vector<uint32_t> frontier_nodes;   // unfinished branches at stop
    uint64_t null_offset = 0;

    Interpretation label_of(uint32_t id) const {
        std::vector<uint32_t> path;
        for (uint32_t n = id; n != kNone; n = nodes.at(n).parent) path.push_back(n);
        std::vector<Atom> atoms;
        for (auto it = path.rbegin(); it != path.rend(); ++it)
            for (uint32_t a : nodes.at(*it).delta) atoms.push_back(store.atom_of(a));
        return Interpretation(std::move(atoms));
    }

    std::vector<uint32_t> path_key(uint32_t id) const {
        std::vector<uint32_t> p;
        for (uint32_t n = id; n != kNone; n = nodes.at(n).parent) p.push_back(nodes.at(n).child_index);
        std::reverse(p.begin(), p.end());
        return p;
    }

private:
    uint64_t bucket_key(uint32_t rule_idx) const {
        switch (strategy.kind) {
            case Strategy::Fifo: return 0;
            case Strategy::RuleOrderPriority: return rule_idx;
            case Strategy::DatalogFirst:
                // arrival order within each class keeps the strategy fair
                return rules.rules[rule_idx].datalog_simple ? 0 : 1;
        }
        return 0;
    }

    std::mutex task_mu;
    std::vector<uint32_t> task_stack;
    std::vector<uint32_t> parked;

    std::atomic<uint64_t> nodes_created{0};
    std::atomic<uint64_t> applications{0};
    std::atomic<uint64_t> max_depth{0};
    std::atomic<int> stop{0};  // 0 run, 1 node cap, 2 step cap, 3 verdict
    uint64_t budget = 0;

    std::mutex board_mu;
    bool refuted = false;
    bool all_frontier_goal = true;
    bool all_leaves_goal = true;

    bool pop_task(uint32_t& out) {
        std::lock_guard<std::mutex> lock(task_mu);
        if (task_stack.empty()) return false;
        out = task_stack.back();
        task_stack.pop_back();
        return true;
    }
    void push_task(uint32_t id) {
        std::lock_guard<std::mutex> lock(task_mu);
        task_stack.push_back(id);
    }
    void park_node(uint32_t id) {
        std::lock_guard<std::mutex> lock(task_mu);
        parked.push_back(id);
    }
    void note_frontier(uint32_t id) {
        // branch left unfinished; it stays visible for verdict accounting
        push_task(id);
        if (!nodes.at(id).has_goal) {
            std::lock_guard<std::mutex> lock(board_mu);
            all_frontier_goal = false;
        }
    }

    void worker_main(int worker);
    void run_branch(int worker, uint32_t start);
    void rebuild_above(ActiveState& st, uint32_t node);
    void discover_batch(uint32_t node_id, ActiveState& st);
    bool head_satisfiable(const ActiveState& st, const CRule& rule, const CDisj& disj,
                          std::vector<Term>& bind) const;
    void match_seats(const ActiveState& st, const std::vector<CAtom>& atoms, uint32_t pending,
                     size_t anchor_seat, const std::unordered_set<uint32_t>* delta_set,
                     std::vector<Term>& bind, std::vector<std::vector<Term>>& out,
                     bool stop_at_first) const;
};

namespace {

// bounded scratch for per-candidate trail of bound slots
struct Trail {
    int32_t slots[32];
    int n = 0;
    void undo(std::vector<Term>& bind) {
        for (int i = 0; i < n; ++i) bind[slots[i]] = Term{-1};
        n = 0;
    }
};

bool unify_atom(const AtomStore& store, const CAtom& pat, uint32_t atom_id, std::vector<Term>& bind,
                Trail& trail) {
    auto [args, n] = store.args_of(atom_id);
    if (n != pat.slots.size()) return false;
    for (size_t i = 0; i < n; ++i) {
        int32_t slot = pat.slots[i];
        if (bind[slot].raw == -1) {
            bind[slot] = args[i];
            trail.slots[trail.n++] = slot;
        } else if (bind[slot] != args[i]) {
            return false;
        }
    }
    return true;
}

}  // namespace

// Seat-by-seat join over the pending seat set. Fully bound seats are
// resolved by direct membership probes; the rest are joined most constrained
// first. Seats with an index before the anchor may only match atoms outside
// `delta_set`, which makes incremental match discovery duplicate-free.
void ChaseResultImpl::match_seats(const ActiveState& st, const std::vector<CAtom>& atoms, uint32_t pending,
                                  size_t anchor_seat, const std::unordered_set<uint32_t>* delta_set,
                                  std::vector<Term>& bind, std::vector<std::vector<Term>>& out,
                                  bool stop_at_first) const {
    if (stop_at_first && !out.empty()) return;
    static const std::vector<uint32_t> kEmpty;
    // resolve every fully bound pending seat by a single probe
    for (size_t i = 0; i < atoms.size(); ++i) {
        if (!(pending & (1u << i))) continue;
        const CAtom& pat = atoms[i];
        bool fully = true;
        for (int32_t sl : pat.slots)
            if (bind[sl].raw == -1) {
                fully = false;
                break;
            }
        if (!fully) continue;
        Term argbuf[32];
        size_t n = 0;
        for (int32_t sl : pat.slots) argbuf[n++] = bind[sl];
        uint32_t id = store.find(pat.pred, argbuf, n);
        if (id == AtomStore::kAbsent || !st.label.count(id)) return;
        if (delta_set && i < anchor_seat && delta_set->count(id)) return;
        pending &= ~(1u << i);
    }
    if (!pending) {
        out.push_back(bind);
        return;
    }
    // most constrained remaining seat
    size_t best_seat = atoms.size();
    const std::vector<uint32_t>* best_cands = nullptr;
    for (size_t i = 0; i < atoms.size(); ++i) {
        if (!(pending & (1u << i))) continue;
        const CAtom& pat = atoms[i];
        const std::vector<uint32_t>* cands = nullptr;
        for (size_t pos = 0; pos < pat.slots.size() && pos < 2; ++pos) {
            Term v = bind[pat.slots[pos]];
            if (v.raw != -1) {
                auto it = st.arg_index.find(ActiveState::arg_key(pat.pred, static_cast<int>(pos), v));
                const std::vector<uint32_t>* found = it == st.arg_index.end() ? &kEmpty : &it->second;
                if (!cands || found->size() < cands->size()) cands = found;
            }
        }
        if (!cands) {
            auto it = st.postings.find(pat.pred);
            cands = it == st.postings.end() ? &kEmpty : &it->second;
        }
        if (!best_cands || cands->size() < best_cands->size()) {
            best_cands = cands;
            best_seat = i;
        }
    }
    const CAtom& pat = atoms[best_seat];
    for (uint32_t id : *best_cands) {
        if (store.pred_of(id) != pat.pred) continue;
        if (delta_set && best_seat < anchor_seat && delta_set->count(id)) continue;
        Trail trail;
        if (unify_atom(store, pat, id, bind, trail)) {
            match_seats(st, atoms, pending & ~(1u << best_seat), anchor_seat, delta_set, bind, out,
                        stop_at_first);
        }
        trail.undo(bind);
        if (stop_at_first && !out.empty()) return;
    }
}

void ChaseResultImpl::discover_batch(uint32_t node_id, ActiveState& st) {
    Node& node = nodes.at(node_id);
    Batch batch;
    std::unordered_set<uint32_t> delta_set(node.delta.begin(), node.delta.end());
    auto emit = [&](uint32_t rule_idx, const std::vector<Term>& bind) {
        const CRule& r = rules.rules[rule_idx];
        batch.rule.push_back(rule_idx);
        batch.off.push_back(static_cast<uint32_t>(batch.flat.size()));
        for (uint32_t s = 0; s < r.n_body_slots; ++s) batch.flat.push_back(bind[s]);
    };
    if (node.parent == kNone)
        for (uint32_t rule_idx : rules.empty_body) emit(rule_idx, {});
    for (uint32_t d : node.delta) {
        PredId p = store.pred_of(d);
        auto it = rules.seats.find(p);
        if (it == rules.seats.end()) continue;
        for (auto [rule_idx, seat] : it->second) {
            const CRule& r = rules.rules[rule_idx];
            std::vector<Term> bind(r.n_slots, Term{-1});
            Trail trail;
            if (!unify_atom(store, r.body[seat], d, bind, trail)) continue;
            std::vector<std::vector<Term>> found;
            uint32_t pending = (r.body.size() >= 32 ? ~0u : (1u << r.body.size()) - 1) & ~(1u << seat);
            match_seats(st, r.body, pending, seat, &delta_set, bind, found, false);
            for (auto& f : found) emit(rule_idx, f);
        }
    }
    if (strategy.seed != 0 && batch.size() > 1) {
        std::vector<uint32_t> order(batch.size());
        for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
        auto item_hash = [&](uint32_t i) {
            const CRule& r = rules.rules[batch.rule[i]];
            uint64_t h = fnv(strategy.seed, batch.rule[i]);
            for (uint32_t s = 0; s < r.n_body_slots; ++s)
                h = fnv(h, static_cast<uint64_t>(batch.flat[batch.off[i] + s].raw));
            return h;
        };
        std::stable_sort(order.begin(), order.end(),
                         [&](uint32_t a, uint32_t b) { return item_hash(a) < item_hash(b); });
        Batch shuffled;
        for (uint32_t i : order) {
            const CRule& r = rules.rules[batch.rule[i]];
            shuffled.rule.push_back(batch.rule[i]);
            shuffled.off.push_back(static_cast<uint32_t>(shuffled.flat.size()));
            for (uint32_t s = 0; s < r.n_body_slots; ++s)
                shuffled.flat.push_back(batch.flat[batch.off[i] + s]);
        }
        batch = std::move(shuffled);
    }
    node.batch = std::move(batch);
    node.batch_ready = true;
}

bool ChaseResultImpl::head_satisfiable(const ActiveState& st, const CRule& rule, const CDisj& disj,
                                       std::vector<Term>& bind) const {
    (void)rule;
    std::vector<std::vector<Term>> found;
    uint32_t pending = disj.atoms.size() >= 32 ? ~0u : (1u << disj.atoms.size()) - 1;
    match_seats(st, disj.atoms, pending, disj.atoms.size(), nullptr, bind, found, true);
    return !found.empty();
}

void ChaseResultImpl::rebuild_above(ActiveState& st, uint32_t node_id) {
    std::vector<uint32_t> path;
    for (uint32_t n = node_id; n != kNone; n = nodes.at(n).parent) path.push_back(n);
    std::reverse(path.begin(), path.end());
    std::unordered_set<uint64_t> consumed;
    for (uint32_t n : path) {
        const Node& node = nodes.at(n);
        if (node.via_node != kNone)
            consumed.insert((static_cast<uint64_t>(node.via_node) << 32) | node.via_idx);
    }
    for (size_t i = 0; i + 1 < path.size(); ++i) {  // everything strictly above node_id
        const Node& node = nodes.at(path[i]);
        for (uint32_t id : node.delta) st.insert(id, store);
        if (!node.batch_ready) continue;
        for (uint32_t k = 0; k < node.batch.size(); ++k) {
            if (consumed.count((static_cast<uint64_t>(path[i]) << 32) | k)) continue;
            st.queue.push(bucket_key(node.batch.rule[k]), QItem{path[i], k});
        }
    }
}

void ChaseResultImpl::run_branch(int worker, uint32_t start) {
    ActiveState st;
    // rule-order priority gets an aging escape so that starvable rules still
    // fire on non-terminating branches (fairness)
    if (strategy.kind == Strategy::RuleOrderPriority) st.queue.age_limit = 8192;
    if (nodes.at(start).parent != kNone) rebuild_above(st, start);
    uint32_t cur = start;
    while (true) {
        if (stop.load(std::memory_order_relaxed)) {
            note_frontier(cur);
            return;
        }
        Node& node = nodes.at(cur);
        for (uint32_t id : node.delta) st.insert(id, store);
        {
            uint64_t d = node.depth;
            uint64_t seen = max_depth.load(std::memory_order_relaxed);
            while (d > seen && !max_depth.compare_exchange_weak(seen, d)) {
            }
        }
        if (node.depth >= budget) {
            park_node(cur);
            if (!node.has_goal) {
                std::lock_guard<std::mutex> lock(board_mu);
                all_frontier_goal = false;
            }
            return;
        }
        if (!node.batch_ready) discover_batch(cur, st);
        for (uint32_t i = 0; i < node.batch.size(); ++i)
            st.queue.push(bucket_key(node.batch.rule[i]), QItem{cur, i});

        bool descended = false;
        while (!st.queue.empty()) {
            QItem item = st.queue.pop();
            const Node& src = nodes.at(item.node);
            uint32_t rule_idx = src.batch.rule[item.idx];
            const CRule& rule = rules.rules[rule_idx];
            std::vector<Term> bind(rule.n_slots, Term{-1});
            for (uint32_t s = 0; s < rule.n_body_slots; ++s)
                bind[s] = src.batch.flat[src.batch.off[item.idx] + s];
            bool satisfied = false;
            for (const CDisj& d : rule.disjuncts) {
                std::vector<Term> b = bind;
                if (head_satisfiable(st, rule, d, b)) {
                    satisfied = true;
                    break;
                }
            }
            if (satisfied) continue;

            if (applications.load(std::memory_order_relaxed) >= caps.max_steps) {
                stop.store(2);
                note_frontier(cur);
                return;
            }
            size_t k = rule.disjuncts.size();
            if (nodes_created.load(std::memory_order_relaxed) + k > caps.max_nodes) {
                stop.store(1);
                note_frontier(cur);
                return;
            }
            applications.fetch_add(1);
            nodes_created.fetch_add(k);

            Node& parent = nodes.at(cur);
            parent.applied_rule = rule_idx;
            parent.applied_sub.assign(bind.begin(), bind.begin() + rule.n_body_slots);
            std::vector<uint32_t> child_ids;
            for (size_t di = 0; di < k; ++di) {
                const CDisj& disj = rule.disjuncts[di];
                uint32_t child_id = nodes.allocate(worker);
                std::vector<Term> full = bind;
                uint32_t local = 0;
                for (int32_t es : disj.evar_slots)
                    full[es] = Term::null(Symbols::kChaseNullBase |
                                          ((static_cast<uint64_t>(child_id) + null_offset) << 20) |
                                          local++);
                std::vector<uint32_t> delta;
                std::vector<Term> argbuf;
                bool goal_in_delta = false;
                for (const CAtom& a : disj.atoms) {
                    argbuf.clear();
                    for (int32_t s : a.slots) argbuf.push_back(full[s]);
                    uint32_t id = store.intern(a.pred, argbuf.data(), argbuf.size());
                    if (st.label.count(id)) continue;
                    if (std::find(delta.begin(), delta.end(), id) != delta.end()) continue;
                    delta.push_back(id);
                    if (a.pred == goal) goal_in_delta = true;
                }
                Node& child = nodes.at(child_id);
                child.parent = cur;
                child.depth = parent.depth + 1;
                child.child_index = static_cast<uint32_t>(di);
                child.via_node = item.node;
                child.via_idx = item.idx;
                child.delta = std::move(delta);
                child.has_goal = parent.has_goal || goal_in_delta;
                child_ids.push_back(child_id);
            }
            if (config.collapse_duplicate_children && k > 1) {
                std::vector<uint32_t> kept;
                std::vector<std::vector<uint32_t>> seen;
                for (size_t di = 0; di < child_ids.size(); ++di) {
                    std::vector<uint32_t> key = nodes.at(child_ids[di]).delta;
                    std::sort(key.begin(), key.end());
                    bool dup = false;
                    if (rules.rules[rule_idx].disjuncts[di].evar_slots.empty())
                        for (auto& sk : seen)
                            if (sk == key) dup = true;
                    if (!dup) {
                        seen.push_back(std::move(key));
                        kept.push_back(child_ids[di]);
                    }
                }
                child_ids = std::move(kept);
            }
            parent.children = child_ids;
            for (size_t di = 0; di + 1 < child_ids.size(); ++di) push_task(child_ids[di]);
            cur = child_ids.back();
            descended = true;
            break;
        }
        if (descended) continue;

        Node& leaf = nodes.at(cur);
        leaf.terminated = true;
        {
            std::lock_guard<std::mutex> lock(board_mu);
            leaves.push_back(cur);
            if (!leaf.has_goal) {
                all_leaves_goal = false;
                refuted = true;
            }
        }
        if (config.stop_on_verdict && !leaf.has_goal) stop.store(3);
        return;
    }
}

void ChaseResultImpl::worker_main(int worker) {
    uint32_t task;
    while (!stop.load(std::memory_order_relaxed) && pop_task(task)) run_branch(worker, task);
}

void ChaseResultImpl::run() {
    auto t0 = std::chrono::steady_clock::now();
    budget = config.initial_branch_budget ? config.initial_branch_budget : ~0ull;
    push_task(root);
    while (true) {
        if (workers <= 1) {
            worker_main(0);
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back([this, w] { worker_main(w); });
            for (auto& t : pool) t.join();
        }
        int why = stop.load();
        if (why == 1) {
            status = ChaseStatus::NodeCapExceeded;
            break;
        }
        if (why == 2) {
            status = ChaseStatus::StepCapExceeded;
            break;
        }
        if (why == 3) {
            status = ChaseStatus::VerdictResolved;
            break;
        }
        std::unique_lock<std::mutex> lock(task_mu);
        if (parked.empty()) {
            status = ChaseStatus::Terminated;
            break;
        }
        if (config.stop_on_verdict) {
            std::lock_guard<std::mutex> block(board_mu);
            if (all_frontier_goal && all_leaves_goal) {
                status = ChaseStatus::VerdictResolved;
                break;
            }
        }
        budget = budget > (~0ull >> 2) ? ~0ull : budget * 4;
        for (auto it = parked.rbegin(); it != parked.rend(); ++it) task_stack.push_back(*it);
        parked.clear();
        {
            std::lock_guard<std::mutex> block(board_mu);
            all_frontier_goal = true;
        }
    }

    {
        std::lock_guard<std::mutex> lock(board_mu);
        std::lock_guard<std::mutex> tlock(task_mu);
        for (uint32_t id : task_stack) frontier_nodes.push_back(id);
        for (uint32_t id : parked) frontier_nodes.push_back(id);
        bool pending_goal = all_frontier_goal;
        for (uint32_t id : frontier_nodes)
            if (!nodes.at(id).has_goal) pending_goal = false;
        if (refuted)
            verdict = GoalVerdict::NotEntailed;
        else if (status == ChaseStatus::Terminated)
            verdict = all_leaves_goal ? GoalVerdict::Entailed : GoalVerdict::NotEntailed;
        else if (all_leaves_goal && pending_goal)
            verdict = GoalVerdict::Entailed;
        else
            verdict = GoalVerdict::Unknown;
    }

    std::sort(leaves.begin(), leaves.end(),
              [&](uint32_t a, uint32_t b) { return path_key(a) < path_key(b); });
    stats.nodes = nodes_created.load();
    stats.applications = applications.load();
    stats.max_depth = max_depth.load();
    stats.ms = static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
            .count());
}

// ----------------------------------------------------------- outcome surface

std::vector<uint32_t> ChaseOutcome::leaf_ids() const { return result->leaves; }

Interpretation ChaseOutcome::label(uint32_t node) const { return result->label_of(node); }

std::vector<Interpretation> ChaseOutcome::leaves() const {
    std::vector<Interpretation> out;
    out.reserve(result->leaves.size());
    for (uint32_t id : result->leaves) out.push_back(result->label_of(id));
    return out;
}

uint32_t ChaseOutcome::root() const { return result->root; }

std::vector<uint32_t> ChaseOutcome::children(uint32_t node) const { return result->nodes.at(node).children; }

bool ChaseOutcome::node_has_goal(uint32_t node) const { return result->nodes.at(node).has_goal; }

std::vector<uint32_t> ChaseOutcome::goalless_frontier() const {
    std::vector<uint32_t> out;
    for (uint32_t id : result->frontier_nodes)
        if (!result->nodes.at(id).has_goal) out.push_back(id);
    std::sort(out.begin(), out.end(),
              [&](uint32_t a, uint32_t b) { return result->path_key(a) < result->path_key(b); });
    return out;
}

std::vector<AppliedStep> ChaseOutcome::application_log() const {
    std::vector<std::pair<std::vector<uint32_t>, uint32_t>> order;
    for (size_t lane = 0; lane < result->nodes.lane_count(); ++lane)
        for (uint32_t local = 0; local < result->nodes.lane_size(lane); ++local) {
            uint32_t id = NodeStore::make_id(lane, local);
            if (result->nodes.at(id).applied_rule != kNone) order.emplace_back(result->path_key(id), id);
        }
    std::sort(order.begin(), order.end());
    std::vector<AppliedStep> out;
    for (auto& [key, id] : order) {
        const Node& n = result->nodes.at(id);
        AppliedStep step;
        step.node = id;
        const CRule& r = result->rules.rules[n.applied_rule];
        step.rule_label = r.label;
        for (uint32_t s = 0; s < r.n_body_slots; ++s)
            step.substitution.emplace_back(r.body_var_ids[s], n.applied_sub[s]);
        out.push_back(std::move(step));
    }
    return out;
}

namespace {

void json_escape(std::string& out, const std::string& s) {
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
}

struct TreeNamer {
    std::map<int64_t, std::string> names;
    std::string name(Term t) {
        auto it = names.find(t.raw);
        if (it != names.end()) return it->second;
        std::string n = "n" + std::to_string(names.size() + 1);
        names.emplace(t.raw, n);
        return n;
    }
};

void tree_json_rec(const ChaseResultImpl& impl, uint32_t id, TreeNamer& namer, std::string& out) {
    const Node& n = impl.nodes.at(id);
    out += "{\"label_delta\":[";
    for (size_t i = 0; i < n.delta.size(); ++i) {
        if (i) out += ",";
        Atom a = impl.store.atom_of(n.delta[i]);
        std::string s = display_pred_name(Symbols::pred_name(a.pred)) + "(";
        for (size_t j = 0; j < a.args.size(); ++j) {
            if (j) s += ", ";
            s += namer.name(a.args[j]);
        }
        s += ")";
        out += "\"";
        json_escape(out, s);
        out += "\"";
    }
    out += "],\"applied_rule\":";
    if (n.applied_rule == kNone) {
        out += "null,\"substitution\":null";
    } else {
        const CRule& r = impl.rules.rules[n.applied_rule];
        out += "\"";
        json_escape(out, r.label);
        out += "\",\"substitution\":{";
        for (uint32_t s = 0; s < r.n_body_slots; ++s) {
            if (s) out += ",";
            out += "\"";
            json_escape(out, Symbols::var_name(r.body_var_ids[s]));
            out += "\":\"";
            json_escape(out, namer.name(n.applied_sub[s]));
            out += "\"";
        }
        out += "}";
    }
    out += ",\"children\":[";
    for (size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ",";
        tree_json_rec(impl, n.children[i], namer, out);
    }
    out += "]}";
}

}  // namespace

std::string ChaseOutcome::tree_json() const {
    TreeNamer namer;
    std::string out;
    tree_json_rec(*result, result->root, namer, out);
    out += "\n";
    return out;
}

ChaseOutcome run_chase(const RuleSet& rs, const Interpretation& db, const Strategy& strategy,
                       const ChaseCaps& caps, const ChaseConfig& config) {
    for (const Atom& a : db.atoms())
        if (!a.ground()) throw Error("ValidationError", "database atoms must be ground");
    auto impl = std::make_shared<ChaseResultImpl>(rs, db, strategy, caps, config);
    impl->run();
    ChaseOutcome out;
    out.status = impl->status;
    out.verdict = impl->verdict;
    out.stats = impl->stats;
    out.result = impl;
    return out;
}

bool is_applicable(const Rule& rule, const Substitution& s, const Interpretation& i) {
    for (uint32_t v : rule.body_vars())
        if (!s.bound(v))
            throw Error("PreconditionViolated",
                        "substitution does not cover body variable " + Symbols::var_name(v));
    for (const Atom& a : rule.body)
        if (!i.contains(apply_substitution(s, a)))
            throw Error("PreconditionViolated", "substitution image of the body is not in the interpretation");
    for (const Disjunct& d : rule.disjuncts)
        if (first_match(d.atoms, i, s).has_value()) return false;
    return true;
}

bool check_model(const Interpretation& i, const RuleSet& rs) {
    for (const Rule& r : rs.rules) {
        for (const Substitution& s : enumerate_matches(r.body, i)) {
            bool some_disjunct = false;
            for (const Disjunct& d : r.disjuncts)
                if (first_match(d.atoms, i, s).has_value()) {
                    some_disjunct = true;
                    break;
                }
            if (!some_disjunct) return false;
        }
    }
    return true;
}

bool goal_entailed(const ChaseOutcome& outcome) {
    if (outcome.status != ChaseStatus::Terminated)
        throw Error("NotTerminated", "goal entailment is only defined on terminated chase outcomes");
    for (uint32_t leaf : outcome.leaf_ids())
        if (!outcome.node_has_goal(leaf)) return false;
    return true;
}

namespace {

GoalVerdict resolve_goal_rec(const RuleSet& rs, const Interpretation& db, const Strategy& strategy,
                             const ChaseCaps& caps, ChaseConfig config, int depth) {
    config.stop_on_verdict = true;
    ChaseOutcome out = run_chase(rs, db, strategy, caps, config);
    if (out.verdict != GoalVerdict::Unknown) return out.verdict;
    if (depth >= 2) return GoalVerdict::Unknown;
    std::vector<uint32_t> frontier = out.goalless_frontier();
    if (frontier.empty() || frontier.size() > 64) return GoalVerdict::Unknown;
    // datalog-first saturates the deterministic consequences between
    // existential steps, which resolves restarts fastest
    Strategy nested{Strategy::DatalogFirst, strategy.seed};
    for (uint32_t f : frontier) {
        GoalVerdict v = resolve_goal_rec(rs, out.label(f), nested, caps, config, depth + 1);
        if (v == GoalVerdict::NotEntailed) return GoalVerdict::NotEntailed;
        if (v != GoalVerdict::Entailed) return GoalVerdict::Unknown;
    }
    // every terminated leaf already carries Goal, else the run would have
    // refuted; together with the resolved frontier this forces entailment
    return GoalVerdict::Entailed;
}

}  // namespace

GoalVerdict resolve_goal(const RuleSet& rs, const Interpretation& db, const Strategy& strategy,
                         const ChaseCaps& caps, const ChaseConfig& config) {
    // attempt under the requested strategy with a bounded slice of the caps
    ChaseCaps attempt = caps;
    attempt.max_steps = std::min<uint64_t>(caps.max_steps, 60000);
    ChaseConfig cfg = config;
    cfg.stop_on_verdict = true;
    ChaseOutcome out = run_chase(rs, db, strategy, attempt, cfg);
    if (out.verdict != GoalVerdict::Unknown) return out.verdict;
    // the verdict does not depend on the strategy, so an unresolved run may
    // be retried with the saturating strategy and frontier restarts
    Strategy resolver{Strategy::DatalogFirst, strategy.seed};
    return resolve_goal_rec(rs, db, resolver, caps, config, 0);
}

}  // namespace chasekit
