#include "verifix/executor.hpp"

#include "verifix/error.hpp"

#include <algorithm>
#include <functional>
#include <random>

namespace verifix {

Machine::Machine(std::shared_ptr<const Program> p, const std::map<std::string, std::uint64_t>& inputs,
                 const ExecConfig& cfg, std::shared_ptr<const PathPrefix> prefix)
    : prog_(std::move(p)), cfg_(cfg), prefix_(std::move(prefix))
{
    const Program& prog = *prog_;
    trace_.symbols.width = prog.width;
    const std::uint64_t mask = width_mask(prog.width);
    for (const auto& v : prog.shared) {
        store_[v.name] = v.init & mask;
        trace_.shared.push_back({v.name, v.init & mask});
    }
    for (const auto& in : prog.inputs) {
        int id = trace_.symbols.add(in.name, VarKind::Value, true);
        auto it = inputs.find(in.name);
        std::uint64_t val = it == inputs.end() ? 0 : it->second & mask;
        trace_.inputs.push_back({in.name, id, val});
        input_vals_[in.name] = {val, make_var(id)};
    }
    for (const auto& t : prog.threads) {
        ThreadState ts;
        ts.id = t.id;
        threads_.push_back(std::move(ts));
    }
    for (const auto& id : prog.initial_threads()) start(static_cast<std::size_t>(prog.thread_index(id)));
}

const Stmt* Machine::current(const ThreadState& t) const
{
    if (t.status != Status::Running || t.frames.empty()) return nullptr;
    const Frame& f = t.frames.back();
    return &(*f.block)[f.pc];
}

bool Machine::can_run(const ThreadState& t) const
{
    const Stmt* s = current(t);
    if (!s) return false;
    switch (s->kind) {
    case StmtKind::Lock: return !owner_.count(s->target);
    case StmtKind::Join: {
        int ti = prog_->thread_index(s->target);
        return ti >= 0 && threads_[static_cast<std::size_t>(ti)].status == Status::Done;
    }
    default: return true;
    }
}

std::vector<std::string> Machine::enabled() const
{
    std::vector<std::string> out;
    if (crashed_ || step_limit_) return out;
    for (const auto& t : threads_)
        if (can_run(t)) out.push_back(t.id);
    return out;
}

bool Machine::finished() const
{
    if (crashed_ || step_limit_) return true;
    return std::none_of(threads_.begin(), threads_.end(), [&](const ThreadState& t) { return can_run(t); });
}

void Machine::start(std::size_t ti)
{
    ThreadState& t = threads_[ti];
    if (t.status != Status::NotStarted) return;
    t.status = Status::Running;
    t.frames.push_back({&prog_->threads[ti].body, 0, nullptr, 0});
    run_local(ti);
}

Machine::Value Machine::eval(const ThreadState& t, const Expr& e) const
{
    const unsigned w = prog_->width;
    switch (e->kind) {
    case ExprNode::Kind::Const: return {e->value & width_mask(w), e};
    case ExprNode::Kind::Local: {
        auto it = t.locals.find(e->name);
        if (it == t.locals.end()) return {0, make_const(0)};
        return it->second;
    }
    case ExprNode::Kind::Var: throw Error("program expression contains a symbolic variable");
    case ExprNode::Kind::Unary: {
        Value a = eval(t, e->lhs);
        return {apply_op(e->op, a.c, 0, w), fold_unary(e->op, a.t, w)};
    }
    case ExprNode::Kind::Binary: {
        Value a = eval(t, e->lhs);
        Value b = eval(t, e->rhs);
        return {apply_op(e->op, a.c, b.c, w), fold_binary(e->op, a.t, b.t, w)};
    }
    }
    return {};
}

unsigned Machine::next_occ(const std::string& thread, const std::string& label, EventKind k)
{
    std::string key = thread + '\x1f' + label + '\x1f' + event_kind_name(k);
    return ++occ_[key];
}

std::string Machine::var_name(const std::string& base, unsigned occ) const
{
    return occ == 1 ? base : base + "#" + std::to_string(occ);
}

void Machine::record_cond(ThreadState& t, const Stmt& s, CondSite site, const Expr& term, bool taken)
{
    Event e;
    e.thread = t.id;
    e.kind = EventKind::Branch;
    e.label = s.label;
    e.term = term;
    e.taken = taken;
    e.site = site;
    e.occurrence = next_occ(t.id, s.label, EventKind::Branch);
    if (prefix_ && !t.off_prefix) {
        auto it = prefix_->find(t.id);
        if (it != prefix_->end() && t.conds < it->second.size()) {
            const Cond& want = it->second[t.conds];
            // Marked here, resolved to an event index at flush time.
            if (want.label != s.label || want.taken != taken) {
                t.off_prefix = true;
                e.value = 1;
            }
        }
    }
    ++t.conds;
    t.pending.push_back(std::move(e));
}

void Machine::append(Event e)
{
    e.index = trace_.events.size() + 1;
    trace_.events.push_back(std::move(e));
}

void Machine::flush(ThreadState& t)
{
    for (auto& e : t.pending) {
        bool mismatch = e.value != 0;
        e.value = 0;
        append(std::move(e));
        if (mismatch && !trace_.prefix_mismatch) trace_.prefix_mismatch = trace_.events.size();
    }
    t.pending.clear();
}

void Machine::crash(ThreadState& t, OutcomeKind kind, const std::string& label)
{
    crashed_ = true;
    trace_.outcome.kind = kind;
    trace_.outcome.thread = t.id;
    trace_.outcome.label = label;
    flush(t);
}

void Machine::run_local(std::size_t ti)
{
    ThreadState& t = threads_[ti];
    while (!crashed_) {
        if (t.frames.empty()) {
            t.status = Status::Done;
            flush(t);
            return;
        }
        Frame& f = t.frames.back();
        if (f.pc >= f.block->size()) {
            if (f.loop) {
                const Stmt& ls = *f.loop;
                Value c = eval(t, ls.expr);
                if (c.c != 0 && f.iterations >= cfg_.loop_unfold_depth) {
                    ++trace_.bound_hits;
                    t.frames.pop_back();
                    continue;
                }
                record_cond(t, ls, CondSite::Loop, c.t, c.c != 0);
                if (c.c != 0) {
                    ++f.iterations;
                    f.pc = 0;
                } else {
                    t.frames.pop_back();
                }
                continue;
            }
            t.frames.pop_back();
            continue;
        }
        const Stmt& s = (*f.block)[f.pc];
        if (is_critical(s.kind)) {
            if (s.kind == StmtKind::Unlock && !t.held.count(s.target)) {
                ++f.pc;
                continue;
            }
            return;
        }
        ++f.pc;
        switch (s.kind) {
        case StmtKind::Assign: t.locals[s.local] = eval(t, s.expr); break;
        case StmtKind::ReadInput: {
            auto it = input_vals_.find(s.target);
            t.locals[s.local] = it == input_vals_.end() ? Value{0, make_const(0)} : it->second;
            break;
        }
        case StmtKind::Branch: {
            Value c = eval(t, s.expr);
            record_cond(t, s, CondSite::Branch, c.t, c.c != 0);
            const Block& b = c.c != 0 ? s.then_body : s.else_body;
            if (!b.empty()) t.frames.push_back({&b, 0, nullptr, 0});
            break;
        }
        case StmtKind::Loop: {
            Value c = eval(t, s.expr);
            if (c.c != 0 && cfg_.loop_unfold_depth == 0) {
                ++trace_.bound_hits;
                break;
            }
            record_cond(t, s, CondSite::Loop, c.t, c.c != 0);
            if (c.c != 0) t.frames.push_back({&s.then_body, 0, &s, 1});
            break;
        }
        case StmtKind::Assert: {
            Value c = eval(t, s.expr);
            record_cond(t, s, CondSite::Assert, c.t, c.c != 0);
            if (c.c == 0) crash(t, OutcomeKind::AssertFailed, s.label);
            break;
        }
        default:
            break;
        }
    }
}

void Machine::note_divergence(std::size_t position)
{
    if (!trace_.divergence) trace_.divergence = position;
}

void Machine::step(const std::string& thread)
{
    int ti = prog_->thread_index(thread);
    if (ti < 0) throw Error("unknown thread " + thread);
    ThreadState& t = threads_[static_cast<std::size_t>(ti)];
    if (!can_run(t)) throw Error("thread " + thread + " cannot run");
    if (steps_ >= cfg_.max_steps) {
        step_limit_ = true;
        trace_.outcome.kind = OutcomeKind::StepLimit;
        return;
    }
    ++steps_;
    const Stmt& s = *current(t);
    ++t.frames.back().pc;
    flush(t);

    Event e;
    e.thread = t.id;
    e.label = s.label;
    e.target = s.target;
    auto order = [&](EventKind k) {
        e.kind = k;
        e.occurrence = next_occ(t.id, s.label, k);
        e.order_var = trace_.symbols.add(var_name("O_" + s.label, e.occurrence), VarKind::Order);
    };
    switch (s.kind) {
    case StmtKind::Lock:
        order(EventKind::Lock);
        owner_[s.target] = ti;
        t.held.insert(s.target);
        append(std::move(e));
        break;
    case StmtKind::Unlock:
        order(EventKind::Unlock);
        owner_.erase(s.target);
        t.held.erase(s.target);
        append(std::move(e));
        break;
    case StmtKind::ReadShared:
    case StmtKind::Deref: {
        order(EventKind::Read);
        e.value = store_[s.target];
        e.value_var = trace_.symbols.add(var_name("R_" + s.target + "@" + s.label, e.occurrence), VarKind::Value);
        Value v{e.value, make_var(e.value_var)};
        t.locals[s.local] = v;
        append(std::move(e));
        if (s.kind == StmtKind::Deref) {
            bool ok = v.c != 0;
            record_cond(t, s, CondSite::Deref, make_binary(Op::Ne, v.t, make_const(0)), ok);
            flush(t);
            if (!ok) crash(t, OutcomeKind::NullDeref, s.label);
        }
        break;
    }
    case StmtKind::WriteShared: {
        order(EventKind::Write);
        Value v = eval(t, s.expr);
        e.value = v.c;
        e.term = v.t;
        e.value_var = trace_.symbols.add(var_name("W_" + s.target + "@" + s.label, e.occurrence), VarKind::Value);
        e.pre_var = trace_.symbols.add(var_name("R_" + s.target + "@" + s.label, e.occurrence), VarKind::Value);
        store_[s.target] = v.c;
        append(std::move(e));
        break;
    }
    case StmtKind::Spawn: {
        order(EventKind::Spawn);
        append(std::move(e));
        int ci = prog_->thread_index(s.target);
        if (ci >= 0) start(static_cast<std::size_t>(ci));
        break;
    }
    case StmtKind::Join:
        order(EventKind::Join);
        append(std::move(e));
        break;
    default:
        throw Error("statement " + s.label + " is not critical");
    }
    if (!crashed_) run_local(static_cast<std::size_t>(ti));
}

Trace Machine::finish()
{
    for (auto& t : threads_) flush(t);
    if (!crashed_ && !step_limit_) {
        std::vector<std::string> blocked;
        for (const auto& t : threads_)
            if (t.status == Status::Running) blocked.push_back(t.id);
        if (blocked.empty()) {
            trace_.outcome.kind = OutcomeKind::Completed;
        } else {
            trace_.outcome.kind = OutcomeKind::Blocked;
            trace_.outcome.blocked = blocked;
            // wait-for edges over locks; a thread is on a cycle if following
            // owners from it comes back to it
            std::vector<int> waits(threads_.size(), -1);
            for (std::size_t i = 0; i < threads_.size(); ++i) {
                const Stmt* s = current(threads_[i]);
                if (s && s->kind == StmtKind::Lock) {
                    auto it = owner_.find(s->target);
                    if (it != owner_.end()) waits[i] = it->second;
                }
            }
            for (std::size_t i = 0; i < threads_.size(); ++i) {
                int cur = waits[i];
                for (std::size_t k = 0; k < threads_.size() && cur >= 0; ++k) {
                    if (cur == static_cast<int>(i)) {
                        trace_.outcome.deadlock_cycle.push_back(threads_[i].id);
                        break;
                    }
                    cur = waits[static_cast<std::size_t>(cur)];
                }
            }
        }
    }
    return std::move(trace_);
}

namespace {

Trace run_schedule(std::shared_ptr<const Program> p, const ScheduleInput& si,
                   std::shared_ptr<const PathPrefix> prefix, const ExecConfig& cfg)
{
    Machine m(std::move(p), si.inputs, cfg, std::move(prefix));
    std::mt19937_64 rng(cfg.random_seed);
    std::size_t k = 0;
    bool diverged = false;
    while (!m.finished()) {
        auto en = m.enabled();
        std::string pick;
        if (!diverged && k < si.schedule.size()) {
            if (std::find(en.begin(), en.end(), si.schedule[k]) != en.end()) {
                pick = si.schedule[k];
            } else {
                diverged = true;
                m.note_divergence(k);
            }
        }
        if (pick.empty()) pick = en[rng() % en.size()];
        m.step(pick);
        ++k;
    }
    return m.finish();
}

} // namespace

Trace guided_se(const Program& p, const ScheduleInput& si, const PathPrefix& prefix, const ExecConfig& cfg)
{
    return run_schedule(std::make_shared<const Program>(p), si, std::make_shared<const PathPrefix>(prefix), cfg);
}

Trace replay(const Program& p, const ScheduleInput& si, const ExecConfig& cfg)
{
    return run_schedule(std::make_shared<const Program>(p), si, nullptr, cfg);
}

std::vector<Trace> enumerate_all(const Program& p, const std::map<std::string, std::uint64_t>& inputs,
                                 const ExecConfig& cfg, std::size_t max_traces)
{
    std::vector<Trace> out;
    std::function<void(Machine&)> dfs = [&](Machine& m) {
        if (out.size() >= max_traces) return;
        if (m.finished()) {
            out.push_back(m.finish());
            return;
        }
        auto en = m.enabled();
        for (std::size_t i = 0; i < en.size(); ++i) {
            if (i + 1 == en.size()) {
                m.step(en[i]);
                dfs(m);
            } else {
                Machine c = m;
                c.step(en[i]);
                dfs(c);
            }
        }
    };
    Machine root(std::make_shared<const Program>(p), inputs, cfg);
    dfs(root);
    return out;
}

} // namespace verifix
