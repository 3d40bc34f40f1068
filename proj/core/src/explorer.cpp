#include "verifix/explorer.hpp"

#include "verifix/error.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <memory>
#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

namespace verifix {

using Clock = std::chrono::steady_clock;

namespace {

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const std::vector<Cond>& conds_of(const PathPrefix& p, const std::string& t)
{
    static const std::vector<Cond> none;
    auto it = p.find(t);
    return it == p.end() ? none : it->second;
}

} // namespace

std::vector<PathPrefix> split(const PathPrefix& pre, const PathPrefix& path)
{
    if (!is_prefix_of(pre, path)) throw Error("prefix " + prefix_to_string(pre) + " is not a prefix of the path");
    struct Axis {
        std::string thread;
        std::size_t from = 0, to = 0;  // flip positions [from, to)
    };
    std::vector<Axis> axes;
    for (const auto& [t, conds] : path) {
        std::size_t from = conds_of(pre, t).size();
        if (from < conds.size()) axes.push_back({t, from, conds.size()});
    }
    // choice 0 keeps the suffix, choice c flips position from + c - 1
    std::vector<std::size_t> choice(axes.size(), 0);
    std::vector<PathPrefix> out;
    for (;;) {
        std::size_t i = axes.size();
        while (i > 0) {
            --i;
            if (choice[i] < axes[i].to - axes[i].from) {
                ++choice[i];
                std::fill(choice.begin() + static_cast<std::ptrdiff_t>(i) + 1, choice.end(), 0);
                break;
            }
            if (i == 0) return out;
        }
        if (axes.empty()) return out;
        PathPrefix next = path;
        for (std::size_t k = 0; k < axes.size(); ++k) {
            if (!choice[k]) continue;
            auto& conds = next[axes[k].thread];
            std::size_t pos = axes[k].from + choice[k] - 1;
            conds.resize(pos + 1);
            conds[pos].taken = !conds[pos].taken;
        }
        out.push_back(std::move(next));
    }
}

Trace extract_sub_trace(const Trace& tr, const PathPrefix& next)
{
    PathPrefix path = tr.path();
    // per thread: number of branch events to include, and whether the last one is flipped
    struct Cut {
        std::size_t branches = 0;
        bool flip = false;
        bool all = true;
    };
    std::map<std::string, Cut> cuts;
    for (const auto& [t, want] : next) {
        const auto& have = conds_of(path, t);
        std::size_t j = 0;
        while (j < want.size() && j < have.size() && want[j] == have[j]) ++j;
        Cut c;
        if (j == want.size()) {
            c.all = want.size() == have.size();
            c.branches = want.size();
        } else if (j + 1 == want.size() && j < have.size() && want[j].label == have[j].label) {
            c.all = false;
            c.flip = true;
            c.branches = want.size();
        } else {
            throw Error("prefix " + prefix_to_string(next) + " does not branch off the trace of thread " + t);
        }
        cuts[t] = c;
    }
    Trace sub = tr;
    sub.events.clear();
    std::map<std::string, std::size_t> seen;
    for (const auto& e : tr.events) {
        auto it = cuts.find(e.thread);
        if (it == cuts.end() || it->second.all) {
            sub.events.push_back(e);
            continue;
        }
        auto& n = seen[e.thread];
        if (n >= it->second.branches) continue;
        sub.events.push_back(e);
        if (e.kind == EventKind::Branch) {
            ++n;
            if (n == it->second.branches && it->second.flip) sub.events.back().taken = !e.taken;
        }
    }
    for (const auto& [t, c] : cuts)
        if (!c.all) sub.truncated.insert(t);
    sub.outcome = {};
    sub.divergence.reset();
    sub.prefix_mismatch.reset();
    return sub;
}

PathPrefix common_prefix(const PathPrefix& pre, const PathPrefix& path)
{
    PathPrefix out;
    for (const auto& [t, conds] : pre) {
        const auto& have = conds_of(path, t);
        std::size_t j = 0;
        while (j < conds.size() && j < have.size() && conds[j] == have[j]) ++j;
        if (j) out[t].assign(conds.begin(), conds.begin() + static_cast<std::ptrdiff_t>(j));
    }
    return out;
}

std::vector<WorkItem> generate_new_si(const Trace& tr, const PathPrefix& pre, Solver& solver,
                                      const SolverLimits& limits, GenerateStats* stats,
                                      const std::function<bool(const PathPrefix&)>& skip)
{
    GenerateStats local;
    GenerateStats& st = stats ? *stats : local;
    std::vector<WorkItem> out;
    PathPrefix path = tr.path();
    auto cands = split(common_prefix(pre, path), path);
    st.candidates += cands.size();
    for (auto& c : cands) {
        if (skip && skip(c)) {
            ++st.skipped;
            continue;
        }
        Trace sub = extract_sub_trace(tr, c);
        Formula f = encode_trace(sub);
        SolverResult r = solver.check_sat(f, limits);
        st.solver_seconds += r.seconds;
        if (r.status == SatStatus::Unknown && Clock::now() < limits.deadline) {
            SolverLimits twice = limits;
            twice.max_nodes *= 2;
            r = solver.check_sat(f, twice);
            st.solver_seconds += r.seconds;
        }
        if (r.status == SatStatus::Unknown) {
            ++st.unknown;
            continue;
        }
        if (r.status == SatStatus::Unsat) {
            ++st.unsat;
            continue;
        }
        out.push_back({model_to_schedule_input(r.model, sub), std::move(c)});
    }
    return out;
}

std::optional<Trace> validate_av_witness(const Program& p, const Trace& tr, const AvInstance& inst,
                                         const ScheduleInput& witness, const ExecConfig& cfg)
{
    Trace t2 = replay(p, witness, cfg);
    if (t2.outcome.crashed()) return t2;
    auto ti = translate_instance(inst, tr, t2);
    if (ti && av_violated(t2, *ti)) return t2;
    return std::nullopt;
}

AvCheck check_av(const Program& p, const Trace& tr, const AtomicRegionSpec& spec, Solver& solver,
                 const SolverLimits& limits, const ExecConfig& cfg, bool all)
{
    AvCheck out;
    for (const auto& inst : find_av_instances(tr, spec)) {
        SolverResult r = solver.check_sat(av_query(tr, inst), limits);
        ++out.queries;
        out.solver_seconds += r.seconds;
        if (r.status == SatStatus::Unknown) {
            out.unknown = true;
            continue;
        }
        if (r.status == SatStatus::Unsat) continue;
        ScheduleInput w = model_to_schedule_input(r.model, tr);
        auto t2 = validate_av_witness(p, tr, inst, w, cfg);
        if (!t2) {
            out.unknown = true;
            continue;
        }
        Finding f;
        f.kind = Finding::Kind::Atomicity;
        f.witness = std::move(w);
        f.description = describe(inst, tr) + ", witness run " + outcome_to_string(t2->outcome);
        f.key = "av " + describe(inst, tr);
        f.trace = std::move(*t2);
        out.findings.push_back(std::move(f));
        if (!all) break;
    }
    return out;
}

const char* verdict_kind_name(VerdictKind k)
{
    switch (k) {
    case VerdictKind::Verified: return "verified";
    case VerdictKind::AtomicityViolation: return "atomicity-violation";
    case VerdictKind::Deadlock: return "deadlock";
    case VerdictKind::Timeout: return "timeout";
    case VerdictKind::Unknown: return "unknown";
    }
    return "?";
}

bool Verdict::has_av() const
{
    return std::any_of(findings.begin(), findings.end(), [](const Finding& f) { return f.kind == Finding::Kind::Atomicity; });
}

bool Verdict::has_dl() const
{
    return std::any_of(findings.begin(), findings.end(), [](const Finding& f) { return f.kind == Finding::Kind::Deadlock; });
}

namespace {

struct PathResult {
    Trace trace;
    std::vector<Finding> findings;
    std::vector<WorkItem> next;
    std::vector<std::string> warnings;
    std::string unknown;  // nonempty when some pruning query stayed undecided
    std::size_t queries = 0;
    double solver_seconds = 0;
};

std::string joined(const std::vector<std::string>& v)
{
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
    return s;
}

/// Workers may run items out of order, but results are committed in queue
/// order, so the outcome does not depend on the number of workers.
class Engine {
public:
    Engine(const Program& p, const AtomicRegionSpec& spec, const ExploreConfig& cfg)
        : prog_(p), spec_(spec), cfg_(cfg), deadline_(Clock::now() + cfg.timeout)
    {
    }

    Verdict run(const ScheduleInput& seed)
    {
        auto t0 = Clock::now();
        push({seed, {}});
        unsigned n = std::max(1u, cfg_.parallelism);
        if (cfg_.limit_to_cores && std::thread::hardware_concurrency() > 0)
            n = std::min(n, std::thread::hardware_concurrency());
        workers_ = n;
        v_.workers = n;
        if (n == 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (unsigned i = 0; i < n; ++i) pool.emplace_back([this] { work(); });
            for (auto& t : pool) t.join();
        }
        if (!v_.findings.empty())
            v_.kind = v_.findings.front().kind == Finding::Kind::Atomicity ? VerdictKind::AtomicityViolation
                                                                             : VerdictKind::Deadlock;
        else if (timed_out_) {
            v_.kind = VerdictKind::Timeout;
            v_.reason = "timeout after " + std::to_string(v_.paths_explored) + " paths";
        } else if (!unknown_.empty()) {
            v_.kind = VerdictKind::Unknown;
            v_.reason = unknown_;
        } else {
            v_.kind = VerdictKind::Verified;
        }
        v_.seconds = since(t0);
        return std::move(v_);
    }

private:
    struct Slot {
        WorkItem item;
        enum class State : unsigned char { Queued, Running, Done } state = State::Queued;
        bool skipped = false;
        // set once an earlier commit covers the prefix; the result would be dropped anyway
        std::atomic<bool> cancelled{false};
        PathResult result;
    };

    const Program& prog_;
    const AtomicRegionSpec& spec_;
    const ExploreConfig& cfg_;
    Clock::time_point deadline_;

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::shared_ptr<Slot>> pending_;
    std::set<std::string> queued_;
    std::vector<PathPrefix> explored_;
    std::set<std::string> keys_;
    unsigned workers_ = 1;
    bool stop_ = false;
    bool timed_out_ = false;
    std::string unknown_;
    Verdict v_;

    bool covered(const PathPrefix& pre) const
    {
        return std::any_of(explored_.begin(), explored_.end(), [&](const PathPrefix& q) { return is_prefix_of(pre, q); });
    }

    void push(WorkItem item)
    {
        auto s = std::make_shared<Slot>();
        queued_.insert(canonical_prefix(item.prefix));
        s->item = std::move(item);
        pending_.push_back(std::move(s));
    }

    void work()
    {
        auto solver = make_solver(cfg_.backend);
        std::unique_lock lk(mu_);
        for (;;) {
            if (stop_) break;
            if (Clock::now() >= deadline_) {
                timed_out_ = stop_ = true;
                cv_.notify_all();
                break;
            }
            // only look a few slots past the commit point; work further out is
            // usually dropped once an earlier path finds a bug or covers it
            std::shared_ptr<Slot> s;
            std::size_t window = std::min<std::size_t>(pending_.size(), workers_);
            for (std::size_t i = 0; i < window; ++i)
                if (pending_[i]->state == Slot::State::Queued) {
                    s = pending_[i];
                    break;
                }
            if (!s) {
                if (pending_.empty()) break;
                cv_.wait_until(lk, deadline_);
                continue;
            }
            s->state = Slot::State::Running;
            if (v_.paths_explored > 0 && covered(s->item.prefix)) {
                s->skipped = true;
            } else {
                lk.unlock();
                s->result = process(s->item, *solver, s->cancelled);
                lk.lock();
            }
            s->state = Slot::State::Done;
            commit();
            cv_.notify_all();
        }
        cv_.notify_all();
    }

    void commit()
    {
        while (!pending_.empty() && pending_.front()->state == Slot::State::Done) {
            auto s = pending_.front();
            pending_.pop_front();
            if (stop_ || s->skipped || (v_.paths_explored > 0 && covered(s->item.prefix))) continue;
            PathResult& r = s->result;
            PathRecord rec;
            rec.id = ++v_.paths_explored;
            rec.prefix = s->item.prefix;
            rec.path = r.trace.path();
            rec.outcome = r.trace.outcome;
            rec.queries = r.queries;
            rec.solver_seconds = r.solver_seconds;
            explored_.push_back(rec.path);
            v_.explored.insert(canonical_prefix(rec.path));
            v_.bound_hits += r.trace.bound_hits;
            for (auto& w : r.warnings) v_.warnings.push_back("path " + std::to_string(rec.id) + ": " + w);
            if (!r.unknown.empty() && unknown_.empty()) unknown_ = "path " + std::to_string(rec.id) + ": " + r.unknown;
            for (auto& f : r.findings) {
                if (!keys_.insert(f.key).second) continue;
                f.path_id = rec.id;
                v_.findings.push_back(std::move(f));
            }
            std::size_t added = 0;
            if (v_.findings.empty() || cfg_.find_all) {
                for (auto& item : r.next) {
                    if (covered(item.prefix) || queued_.count(canonical_prefix(item.prefix))) continue;
                    push(std::move(item));
                    ++added;
                }
            }
            rec.generated = added;
            if (cfg_.log) {
                std::ostringstream os;
                os << "path " << rec.id << " prefix " << canonical_prefix(rec.prefix) << " path "
                   << canonical_prefix(rec.path) << " outcome " << outcome_to_string(rec.outcome) << " queries "
                   << rec.queries << " solver " << rec.solver_seconds << "s new " << added;
                cfg_.log(os.str());
            }
            v_.paths.push_back(std::move(rec));
            if (!v_.findings.empty() && !cfg_.find_all) stop_ = true;
            for (auto& p : pending_)
                if (p->state == Slot::State::Running && (stop_ || covered(p->item.prefix))) p->cancelled = true;
        }
    }

    bool skip_candidate(const PathPrefix& c)
    {
        std::lock_guard lk(mu_);
        return covered(c) || queued_.count(canonical_prefix(c));
    }

    PathResult process(const WorkItem& item, Solver& solver, const std::atomic<bool>& cancelled)
    {
        PathResult r;
        SolverLimits limits;
        limits.deadline = deadline_;
        limits.max_nodes = cfg_.max_solver_nodes;
        r.trace = guided_se(prog_, item.si, item.prefix, cfg_.exec);
        const Trace& tr = r.trace;
        if (tr.prefix_mismatch)
            r.warnings.push_back("run left the requested prefix at event " + std::to_string(*tr.prefix_mismatch));
        if (tr.outcome.kind == OutcomeKind::StepLimit) r.warnings.push_back("step limit reached");

        if (tr.outcome.crashed()) {
            Finding f;
            f.kind = Finding::Kind::Atomicity;
            f.witness = tr.schedule_input();
            f.description = outcome_to_string(tr.outcome);
            f.key = "crash " + tr.outcome.thread + ":" + tr.outcome.label;
            f.trace = tr;
            r.findings.push_back(std::move(f));
        } else if (tr.outcome.kind == OutcomeKind::Blocked && !tr.outcome.deadlock_cycle.empty()) {
            Finding f;
            f.kind = Finding::Kind::Deadlock;
            f.witness = tr.schedule_input();
            f.description = outcome_to_string(tr.outcome);
            f.key = "blocked " + joined(tr.outcome.deadlock_cycle);
            f.trace = tr;
            r.findings.push_back(std::move(f));
        } else if (tr.outcome.kind == OutcomeKind::Blocked) {
            r.warnings.push_back(outcome_to_string(tr.outcome));
        }
        if ((!r.findings.empty() && !cfg_.find_all) || cancelled) return r;

        AvCheck av = check_av(prog_, tr, spec_, solver, limits, cfg_.exec, cfg_.find_all);
        r.queries += av.queries;
        r.solver_seconds += av.solver_seconds;
        if (av.unknown) r.unknown = "atomicity query undecided";
        for (auto& f : av.findings) r.findings.push_back(std::move(f));
        if ((!r.findings.empty() && !cfg_.find_all) || cancelled) return r;

        if (cfg_.check_deadlocks) {
            DlOptions opt;
            opt.limits = limits;
            opt.program = &prog_;
            opt.exec = cfg_.exec;
            opt.stop_at_first = !cfg_.find_all;
            auto t0 = Clock::now();
            DlReport dl = check_dl(tr, solver, opt);
            r.solver_seconds += since(t0);
            r.queries += dl.candidates.size();
            if (dl.unknown && r.unknown.empty()) r.unknown = "deadlock status unknown";
            for (auto& c : dl.candidates) {
                if (!c.confirmed) {
                    if (c.status == SatStatus::Sat) r.warnings.push_back("deadlock candidate not confirmed: " + c.note);
                    continue;
                }
                Finding f;
                f.kind = Finding::Kind::Deadlock;
                f.witness = *c.witness;
                f.description = describe(c.cycle, tr) + " [" + c.formula + "]";
                std::vector<std::string> parts;
                for (const auto& e : c.cycle.edges)
                    parts.push_back(e.thread + ":" + event_at(tr, e.ex).label + ">" + event_at(tr, e.ei).label);
                std::sort(parts.begin(), parts.end());
                f.key = "dl " + joined(parts);
                f.trace = std::move(*c.replayed);
                r.findings.push_back(std::move(f));
            }
            if ((!r.findings.empty() && !cfg_.find_all) || cancelled) return r;
        }

        GenerateStats gs;
        r.next = generate_new_si(tr, item.prefix, solver, limits, &gs,
                                 [&](const PathPrefix& c) { return cancelled || skip_candidate(c); });
        r.queries += gs.candidates - gs.skipped;
        r.solver_seconds += gs.solver_seconds;
        if (gs.unknown) {
            r.warnings.push_back(std::to_string(gs.unknown) + " prefixes dropped, solver undecided after retry");
            if (r.unknown.empty()) r.unknown = "prefix feasibility undecided";
        }
        return r;
    }
};

} // namespace

Verdict verify(const Program& patched, const ScheduleInput& seed, const AtomicRegionSpec& spec,
               const ExploreConfig& cfg)
{
    return Engine(patched, spec, cfg).run(seed);
}

Verdict verify_fix(const Program& p, const FixPatch& f, const std::variant<ScheduleInput, Trace>& seed,
                   const AtomicRegionSpec& spec, const ExploreConfig& cfg)
{
    PatchResult patched = apply_fix(p, f);
    ScheduleInput si = std::holds_alternative<ScheduleInput>(seed) ? std::get<ScheduleInput>(seed)
                                                                   : std::get<Trace>(seed).schedule_input();
    Verdict v = verify(patched.program, si, spec, cfg);
    for (const auto& w : patched.warnings) v.warnings.insert(v.warnings.begin(), "patch: " + w);
    return v;
}

} // namespace verifix
