#include "verifix/deadlock.hpp"

#include "verifix/encode.hpp"
#include "verifix/error.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace verifix {

LockEventGraph build_lock_event_graph(const Trace& tr)
{
    LockEventGraph g;
    std::set<std::string> locks;
    std::map<std::string, std::set<std::string>> held;
    std::map<std::string, std::map<std::string, std::size_t>> acquired;
    for (const auto& e : tr.events) {
        if (e.kind == EventKind::Lock) {
            locks.insert(e.target);
            auto& h = held[e.thread];
            for (const auto& l1 : h)
                if (l1 != e.target) g.edges.push_back({l1, e.target, e.thread, h, acquired[e.thread][l1], e.index});
            h.insert(e.target);
            acquired[e.thread][e.target] = e.index;
        } else if (e.kind == EventKind::Unlock) {
            locks.insert(e.target);
            if (!held[e.thread].erase(e.target))
                throw Error("thread " + e.thread + " unlocks " + e.target + " without holding it (event " +
                            std::to_string(e.index) + ")");
        }
    }
    g.locks.assign(locks.begin(), locks.end());
    std::stable_sort(g.edges.begin(), g.edges.end(),
                     [](const LockEdge& a, const LockEdge& b) { return std::tie(a.ei, a.ex) < std::tie(b.ei, b.ex); });
    return g;
}

std::vector<std::pair<std::size_t, std::size_t>> PotentialDeadlock::pairs() const
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& e : edges) out.emplace_back(e.ex, e.ei);
    return out;
}

std::vector<std::string> PotentialDeadlock::threads() const
{
    std::vector<std::string> out;
    for (const auto& e : edges) out.push_back(e.thread);
    return out;
}

std::vector<std::string> PotentialDeadlock::locks() const
{
    std::vector<std::string> out;
    for (const auto& e : edges) out.push_back(e.from);
    return out;
}

std::string describe(const PotentialDeadlock& dl, const Trace& tr)
{
    std::ostringstream os;
    for (std::size_t k = 0; k < dl.edges.size(); ++k) {
        const auto& e = dl.edges[k];
        if (k) os << "; ";
        os << e.thread << " holds " << e.from << " (" << event_at(tr, e.ex).label << ") waits " << e.to << " ("
           << event_at(tr, e.ei).label << ")";
    }
    return os.str();
}

namespace {

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b)
{
    for (const auto& x : a)
        if (b.count(x)) return false;
    return true;
}

class CycleSearch {
public:
    CycleSearch(const LockEventGraph& g, std::size_t max_len) : g_(g), max_(max_len)
    {
        for (std::size_t i = 0; i < g.edges.size(); ++i) out_[g.edges[i].from].push_back(i);
    }

    std::vector<PotentialDeadlock> run()
    {
        for (std::size_t s = 0; s < g_.edges.size(); ++s) {
            start_ = s;
            path_ = {s};
            threads_ = {g_.edges[s].thread};
            held_ = g_.edges[s].held;
            visited_ = {g_.edges[s].from};
            extend(g_.edges[s].to);
        }
        std::sort(found_.begin(), found_.end(), [](const PotentialDeadlock& a, const PotentialDeadlock& b) {
            if (a.edges.size() != b.edges.size()) return a.edges.size() < b.edges.size();
            return a.pairs() < b.pairs();
        });
        return std::move(found_);
    }

private:
    const LockEventGraph& g_;
    std::size_t max_;
    std::map<std::string, std::vector<std::size_t>> out_;
    std::size_t start_ = 0;
    std::vector<std::size_t> path_;
    std::set<std::string> threads_, held_, visited_;
    std::vector<PotentialDeadlock> found_;

    bool after_start(const LockEdge& e) const
    {
        const auto& s = g_.edges[start_];
        return std::tie(e.ex, e.ei) > std::tie(s.ex, s.ei);
    }

    void extend(const std::string& at)
    {
        if (path_.size() >= max_) return;
        auto it = out_.find(at);
        if (it == out_.end()) return;
        for (std::size_t idx : it->second) {
            const LockEdge& e = g_.edges[idx];
            if (!after_start(e) || threads_.count(e.thread) || !disjoint(held_, e.held)) continue;
            bool closes = e.to == g_.edges[start_].from;
            if (!closes && visited_.count(e.to)) continue;
            path_.push_back(idx);
            if (closes) {
                PotentialDeadlock dl;
                for (std::size_t k : path_) dl.edges.push_back(g_.edges[k]);
                found_.push_back(std::move(dl));
            } else {
                threads_.insert(e.thread);
                visited_.insert(e.from);
                std::set<std::string> saved = held_;
                held_.insert(e.held.begin(), e.held.end());
                extend(e.to);
                held_ = std::move(saved);
                visited_.erase(e.from);
                threads_.erase(e.thread);
            }
            path_.pop_back();
        }
    }
};

} // namespace

std::vector<PotentialDeadlock> potential_dls(const LockEventGraph& g, std::size_t max_length)
{
    if (max_length == 0) max_length = g.locks.size();
    return CycleSearch(g, max_length).run();
}

std::vector<PotentialDeadlock> potential_dls(const Trace& tr, std::size_t max_length)
{
    return potential_dls(build_lock_event_graph(tr), max_length);
}

std::optional<Trace> deadlock_sub_trace(const Trace& tr, const PotentialDeadlock& dl, bool whole_others)
{
    std::map<std::string, std::size_t> cut;  // cycle threads: events strictly before
    for (const auto& e : dl.edges) cut[e.thread] = e.ei;
    std::map<std::string, std::size_t> last_of, spawn_at;
    std::map<std::string, std::string> spawner;
    for (const auto& e : tr.events) {
        last_of[e.thread] = e.index;
        if (e.kind == EventKind::Spawn) {
            spawner[e.target] = e.thread;
            spawn_at[e.target] = e.index;
        }
    }
    std::map<std::string, std::size_t> upto;  // other threads: events up to and including
    if (whole_others)
        for (const auto& [t, last] : last_of)
            if (!cut.count(t)) upto[t] = last;

    auto bound = [&](const std::string& t) -> std::size_t {
        if (auto c = cut.find(t); c != cut.end()) return c->second - 1;
        auto u = upto.find(t);
        return u == upto.end() ? 0 : u->second;
    };
    auto require = [&](const std::string& t, std::size_t idx) -> bool {
        if (auto c = cut.find(t); c != cut.end()) return idx < c->second;
        auto& u = upto[t];
        u = std::max(u, idx);
        return true;
    };

    for (bool changed = true; changed;) {
        changed = false;
        auto before = upto;
        std::set<std::string> present;
        for (const auto& [t, c] : cut) present.insert(t);
        for (const auto& [t, u] : upto)
            if (u) present.insert(t);
        for (const auto& t : present) {
            if (auto s = spawner.find(t); s != spawner.end())
                if (!require(s->second, spawn_at[t])) return std::nullopt;
        }
        for (const auto& e : tr.events) {
            if (e.kind != EventKind::Join || e.index > bound(e.thread)) continue;
            if (cut.count(e.target)) return std::nullopt;
            if (auto l = last_of.find(e.target); l != last_of.end()) require(e.target, l->second);
        }
        changed = upto != before;
    }

    Trace sub = tr;
    sub.events.clear();
    for (const auto& e : tr.events)
        if (e.index <= bound(e.thread)) sub.events.push_back(e);
    for (const auto& [t, last] : last_of)
        if (!cut.count(t) && bound(t) < last) sub.truncated.insert(t);
    sub.outcome = {};
    sub.divergence.reset();
    sub.prefix_mismatch.reset();
    return sub;
}

namespace {

Node hold_wait(const Trace& tr, const Trace& sub, const PotentialDeadlock& dl)
{
    std::vector<Node> conj;
    std::map<std::string, const Event*> last_crit;
    for (const auto& e : sub.events)
        if (is_critical(e.kind)) last_crit[e.thread] = &e;
    const std::size_t n = dl.edges.size();
    for (std::size_t k = 0; k < n; ++k) {
        const LockEdge& cur = dl.edges[k];
        const LockEdge& next = dl.edges[(k + 1) % n];
        OrderRef req{event_at(tr, cur.ei).order_var};
        conj.push_back(f_less({event_at(tr, next.ex).order_var}, req));
        if (auto it = last_crit.find(cur.thread); it != last_crit.end())
            conj.push_back(f_less({it->second->order_var}, req));
    }
    return f_and(std::move(conj));
}

} // namespace

Formula deadlock_query(const Trace& tr, const Trace& sub, const PotentialDeadlock& dl)
{
    return conjoin({encode_trace(sub), {std::make_shared<const SymbolTable>(tr.symbols), hold_wait(tr, sub, dl)}});
}

bool blocks_on(const Trace& replayed, const PotentialDeadlock& dl)
{
    if (replayed.outcome.kind != OutcomeKind::Blocked) return false;
    const auto& cyc = replayed.outcome.deadlock_cycle;
    for (const auto& t : dl.threads())
        if (std::find(cyc.begin(), cyc.end(), t) == cyc.end()) return false;
    return true;
}

DlReport check_dl(const Trace& tr, Solver& solver, const DlOptions& opt)
{
    DlReport rep;
    for (auto& dl : potential_dls(tr, opt.max_cycle_length)) {
        DlCandidate cand;
        cand.cycle = std::move(dl);
        cand.status = SatStatus::Unsat;
        bool undecided = false;
        for (bool whole : {false, true}) {
            auto sub = deadlock_sub_trace(tr, cand.cycle, whole);
            if (!sub) continue;
            cand.formula = print_node(hold_wait(tr, *sub, cand.cycle), tr.symbols);
            Formula q = deadlock_query(tr, *sub, cand.cycle);
            SolverResult r = solver.check_sat(q, opt.limits);
            if (r.status == SatStatus::Unknown) {
                undecided = true;
                cand.note = r.reason;
                continue;
            }
            if (r.status == SatStatus::Unsat) continue;
            cand.status = SatStatus::Sat;
            cand.witness = model_to_schedule_input(r.model, *sub);
            if (!opt.program) {
                cand.confirmed = true;
                break;
            }
            cand.replayed = replay(*opt.program, *cand.witness, opt.exec);
            cand.confirmed = blocks_on(*cand.replayed, cand.cycle);
            if (cand.confirmed) break;
            cand.note = "witness replay ended " + outcome_to_string(cand.replayed->outcome);
        }
        if (!cand.confirmed && undecided) {
            cand.status = SatStatus::Unknown;
            rep.unknown = true;
        }
        rep.candidates.push_back(std::move(cand));
        if (rep.candidates.back().confirmed && !rep.first_confirmed) {
            rep.first_confirmed = rep.candidates.size() - 1;
            if (opt.stop_at_first) break;
        }
    }
    return rep;
}

} // namespace verifix
