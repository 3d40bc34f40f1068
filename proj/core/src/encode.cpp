#include "verifix/encode.hpp"

#include "verifix/error.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace verifix {

const Event& event_at(const Trace& tr, std::size_t index)
{
    auto it = std::lower_bound(tr.events.begin(), tr.events.end(), index,
                               [](const Event& e, std::size_t i) { return e.index < i; });
    if (it == tr.events.end() || it->index != index) throw Error("trace has no event " + std::to_string(index));
    return *it;
}

namespace {

SymbolTablePtr table_of(const Trace& tr) { return std::make_shared<const SymbolTable>(tr.symbols); }

OrderRef oref(const Event& e) { return {e.order_var}; }

bool same_thread_before(const Event& a, const Event& b) { return a.thread == b.thread && a.index < b.index; }

/// The value `value` seen at order point `at` equals the last write to `loc`
/// before it, or the initial value when no write precedes it.
Node rw_for(const Trace& tr, const std::vector<const Event*>& writes, const Expr& value, const Event* at,
            OrderRef at_order, std::uint64_t init)
{
    std::vector<const Event*> cands;
    for (const Event* w : writes)
        if (w != at) cands.push_back(w);

    std::vector<Node> alts;
    for (const Event* w : cands) {
        if (at && same_thread_before(*at, *w)) continue;  // program order puts w after the read
        std::vector<Node> conj{f_eq(value, make_var(w->value_var))};
        if (!(at && same_thread_before(*w, *at))) conj.push_back(f_less(oref(*w), at_order));
        for (const Event* w2 : cands) {
            if (w2 == w) continue;
            if (same_thread_before(*w2, *w)) continue;
            if (at && same_thread_before(*at, *w2)) continue;
            conj.push_back(f_or({f_less(oref(*w2), oref(*w)), f_less(at_order, oref(*w2))}));
        }
        alts.push_back(f_and(std::move(conj)));
    }
    std::vector<Node> init_conj{f_eq(value, make_const(init))};
    for (const Event* w2 : cands) {
        if (at && same_thread_before(*w2, *at)) {
            init_conj = {f_false()};
            break;
        }
        if (at && same_thread_before(*at, *w2)) continue;
        init_conj.push_back(f_less(at_order, oref(*w2)));
    }
    alts.push_back(f_and(std::move(init_conj)));
    (void)tr;
    return f_or(std::move(alts));
}

std::map<std::string, std::vector<const Event*>> writes_by_location(const Trace& tr)
{
    std::map<std::string, std::vector<const Event*>> m;
    for (const auto& e : tr.events)
        if (e.kind == EventKind::Write) m[e.target].push_back(&e);
    return m;
}

} // namespace

Formula encode_rw(const Trace& tr)
{
    auto writes = writes_by_location(tr);
    std::vector<Node> conj;
    for (const auto& e : tr.events) {
        if (e.kind == EventKind::Read) {
            conj.push_back(rw_for(tr, writes[e.target], make_var(e.value_var), &e, oref(e), tr.initial_value(e.target)));
        } else if (e.kind == EventKind::Write) {
            conj.push_back(f_eq(make_var(e.value_var), e.term ? e.term : make_const(e.value)));
            conj.push_back(rw_for(tr, writes[e.target], make_var(e.pre_var), &e, oref(e), tr.initial_value(e.target)));
        }
    }
    return {table_of(tr), f_and(std::move(conj))};
}

Formula encode_sync(const Trace& tr)
{
    std::vector<Node> conj;
    std::map<std::string, std::vector<const Event*>> per_thread;
    for (const auto& e : tr.events)
        if (is_critical(e.kind)) per_thread[e.thread].push_back(&e);

    std::map<std::string, const Event*> last_crit;
    for (const auto& [t, evs] : per_thread) {
        for (std::size_t i = 1; i < evs.size(); ++i) conj.push_back(f_less(oref(*evs[i - 1]), oref(*evs[i])));
        last_crit[t] = evs.back();
    }

    std::map<std::string, const Event*> spawn_of;
    for (const auto& e : tr.events)
        if (e.kind == EventKind::Spawn) spawn_of[e.target] = &e;
    for (const auto& e : tr.events) {
        if (e.kind == EventKind::Spawn) {
            auto it = per_thread.find(e.target);
            if (it != per_thread.end()) conj.push_back(f_less(oref(e), oref(*it->second.front())));
        } else if (e.kind == EventKind::Join) {
            auto it = per_thread.find(e.target);
            if (it != per_thread.end())
                conj.push_back(f_less(oref(*it->second.back()), oref(e)));
            else if (auto s = spawn_of.find(e.target); s != spawn_of.end())
                conj.push_back(f_less(oref(*s->second), oref(e)));
        }
    }

    struct Section {
        std::string thread;
        const Event* lock = nullptr;
        const Event* unlock = nullptr;
    };
    std::map<std::string, std::vector<Section>> sections;
    std::map<std::pair<std::string, std::string>, std::size_t> open;
    for (const auto& e : tr.events) {
        if (e.kind == EventKind::Lock) {
            open[{e.thread, e.target}] = sections[e.target].size();
            sections[e.target].push_back({e.thread, &e, nullptr});
        } else if (e.kind == EventKind::Unlock) {
            auto it = open.find({e.thread, e.target});
            if (it == open.end()) throw Error("unlock of " + e.target + " without matching lock in trace");
            sections[e.target][it->second].unlock = &e;
            open.erase(it);
        }
    }
    for (const auto& [lock, secs] : sections) {
        for (std::size_t i = 0; i < secs.size(); ++i) {
            for (std::size_t j = i + 1; j < secs.size(); ++j) {
                const Section& a = secs[i];
                const Section& b = secs[j];
                if (a.thread == b.thread) continue;
                // a section ends at its unlock, after the thread's last event
                // when the thread was cut short, or never
                auto a_first = [&](const Section& x, const Section& y) -> Node {
                    if (x.unlock) return f_less(oref(*x.unlock), oref(*y.lock));
                    if (tr.truncated.count(x.thread)) return f_less(oref(*last_crit[x.thread]), oref(*y.lock));
                    return f_false();
                };
                conj.push_back(f_or({a_first(a, b), a_first(b, a)}));
            }
        }
    }
    return {table_of(tr), f_and(std::move(conj))};
}

Formula encode_pc(const Trace& tr)
{
    std::vector<Node> conj;
    for (const auto& e : tr.events) {
        if (e.kind != EventKind::Branch) continue;
        conj.push_back(e.taken ? f_ne(e.term, make_const(0)) : f_eq(e.term, make_const(0)));
    }
    return {table_of(tr), f_and(std::move(conj))};
}

Formula encode_trace(const Trace& tr)
{
    return conjoin({encode_rw(tr), encode_pc(tr), encode_sync(tr)});
}

ScheduleInput model_to_schedule_input(const Model& m, const Trace& tr)
{
    ScheduleInput si;
    for (const auto& in : tr.inputs) {
        std::uint64_t v = in.value;
        if (in.var >= 0 && static_cast<std::size_t>(in.var) < m.values.size())
            v = static_cast<std::uint64_t>(m[in.var]) & width_mask(tr.width());
        si.inputs[in.name] = v;
    }
    std::vector<const Event*> crit;
    for (const auto& e : tr.events)
        if (is_critical(e.kind)) crit.push_back(&e);
    std::stable_sort(crit.begin(), crit.end(),
                     [&](const Event* a, const Event* b) { return m[a->order_var] < m[b->order_var]; });
    for (const Event* e : crit) si.schedule.push_back(e->thread);
    return si;
}

// Atomicity violations

std::vector<AvInstance> find_av_instances(const Trace& tr, const AtomicRegionSpec& spec)
{
    std::set<std::string> unit(spec.unit.begin(), spec.unit.end());
    std::set<std::string> locs(spec.locations.begin(), spec.locations.end());
    std::vector<const Event*> local, remote;
    for (const auto& e : tr.events) {
        if (e.kind != EventKind::Read && e.kind != EventKind::Write) continue;
        if (!locs.count(e.target)) continue;
        if (e.thread == spec.thread) {
            if (unit.count(e.label)) local.push_back(&e);
        } else {
            remote.push_back(&e);
        }
    }
    auto want = [&](int pattern) { return !spec.pattern || *spec.pattern == pattern; };
    auto is_r = [](const Event* e) { return e->kind == EventKind::Read; };
    auto is_w = [](const Event* e) { return e->kind == EventKind::Write; };

    std::vector<AvInstance> out;
    for (const auto& x : locs) {
        const Event* prev = nullptr;
        for (const Event* c : local) {
            if (c->target != x) continue;
            if (prev) {
                const Event* p = prev;
                int pattern = is_r(p) ? (is_r(c) ? 1 : 4) : (is_w(c) ? 2 : 3);
                if (want(pattern)) {
                    for (const Event* r : remote) {
                        if (r->target != x) continue;
                        if (pattern == 2 ? !is_r(r) : !is_w(r)) continue;
                        out.push_back({pattern, {p->index, r->index, c->index}, x, ""});
                    }
                }
            }
            prev = c;
        }
    }
    for (std::size_t a = 0; a < local.size(); ++a) {
        for (std::size_t b = a + 1; b < local.size(); ++b) {
            const Event* i = local[a];
            const Event* l = local[b];
            if (i->target == l->target) continue;
            std::vector<int> patterns;
            if (is_w(i) && is_w(l)) patterns = {5, 6};
            if (is_r(i) && is_r(l)) patterns = {7};
            for (int pattern : patterns) {
                if (!want(pattern)) continue;
                bool remote_reads = pattern == 6;
                for (const Event* j : remote) {
                    if (j->target != i->target || (remote_reads ? !is_r(j) : !is_w(j))) continue;
                    for (const Event* k : remote) {
                        if (k->target != l->target || (remote_reads ? !is_r(k) : !is_w(k))) continue;
                        out.push_back({pattern, {i->index, j->index, k->index, l->index}, i->target, l->target});
                    }
                }
            }
        }
    }
    auto key = [](const AvInstance& v) {
        std::vector<std::size_t> k;
        if (v.pattern <= 4)
            k = {v.events[0], v.events[2], v.events[1]};
        else
            k = {v.events[0], v.events[3], v.events[1], v.events[2]};
        k.push_back(static_cast<std::size_t>(v.pattern));
        return k;
    };
    std::stable_sort(out.begin(), out.end(), [&](const AvInstance& a, const AvInstance& b) { return key(a) < key(b); });
    return out;
}

std::string describe(const AvInstance& inst, const Trace& tr)
{
    std::string s = "pattern " + std::to_string(inst.pattern) + " (";
    for (std::size_t i = 0; i < inst.events.size(); ++i) {
        const Event& e = event_at(tr, inst.events[i]);
        if (i) s += ", ";
        s += e.thread + ":" + e.label + " " + event_kind_name(e.kind) + " " + e.target;
    }
    return s + ")";
}

AvEncoding encode_av(const Trace& tr, const AvInstance& inst)
{
    auto table = std::make_shared<SymbolTable>(tr.symbols);
    AvEncoding enc;
    auto writes = writes_by_location(tr);
    std::vector<Node> ghost_defs;

    auto ev = [&](std::size_t role) -> const Event& { return event_at(tr, inst.events[role]); };
    auto value = [](const Event& e) { return make_var(e.value_var); };
    // value of `loc` just before event e
    auto before = [&](const std::string& loc, const Event& e) -> Expr {
        if (e.target == loc) {
            if (e.kind == EventKind::Read) return make_var(e.value_var);
            if (e.kind == EventKind::Write) return make_var(e.pre_var);
        }
        for (const auto& g : enc.ghosts)
            if (g.location == loc && g.event == e.index) return make_var(g.var);
        int id = table->add("S_" + loc + "@" + e.label + (e.occurrence > 1 ? "#" + std::to_string(e.occurrence) : ""),
                            VarKind::Value);
        enc.ghosts.push_back({id, loc, e.index});
        ghost_defs.push_back(rw_for(tr, writes[loc], make_var(id), &e, oref(e), tr.initial_value(loc)));
        return make_var(id);
    };

    Node phi;
    switch (inst.pattern) {
    case 1: phi = f_eq(value(ev(0)), value(ev(2))); break;
    case 2: phi = f_ne(value(ev(0)), value(ev(1))); break;
    case 3: phi = f_eq(value(ev(2)), value(ev(0))); break;
    case 4: phi = f_eq(value(ev(0)), make_var(ev(2).pre_var)); break;
    case 5:
        phi = f_and({f_eq(value(ev(0)), before(inst.v1, ev(3))), f_eq(before(inst.v2, ev(0)), make_var(ev(3).pre_var))});
        break;
    case 6:
        phi = f_and({f_ne(value(ev(1)), value(ev(0))), f_ne(value(ev(2)), before(inst.v2, ev(0)))});
        break;
    case 7:
        phi = f_and({f_eq(value(ev(0)), before(inst.v1, ev(3))), f_eq(before(inst.v2, ev(0)), value(ev(3)))});
        break;
    default: throw Error("unknown atomicity pattern " + std::to_string(inst.pattern));
    }
    enc.phi_av = {table, phi};
    enc.ghost_defs = f_and(std::move(ghost_defs));
    return enc;
}

Formula av_query(const Trace& tr, const AvInstance& inst)
{
    AvEncoding enc = encode_av(tr, inst);
    const auto& table = enc.phi_av.symbols;
    // a crash check after the region starts may fail in the violating run
    std::size_t first = *std::min_element(inst.events.begin(), inst.events.end());
    Trace relaxed = tr;
    std::erase_if(relaxed.events, [&](const Event& e) {
        return e.kind == EventKind::Branch && (e.site == CondSite::Deref || e.site == CondSite::Assert) &&
               e.index > first;
    });
    return conjoin({encode_trace(relaxed), Formula{table, enc.ghost_defs}, Formula{table, f_not(enc.phi_av.root)}});
}

Model concrete_model(const Trace& tr, const AvEncoding* enc)
{
    std::size_t n = enc ? enc->phi_av.symbols->size() : tr.symbols.size();
    Model m;
    m.values.assign(n, 0);
    auto set = [&](int id, std::uint64_t v) {
        if (id >= 0) m.values[static_cast<std::size_t>(id)] = static_cast<std::int64_t>(v);
    };
    for (const auto& in : tr.inputs) set(in.var, in.value);
    std::map<std::string, std::uint64_t> store;
    for (const auto& s : tr.shared) store[s.name] = s.init;
    for (const auto& e : tr.events) {
        if (enc)
            for (const auto& g : enc->ghosts)
                if (g.event == e.index) set(g.var, store[g.location]);
        if (is_critical(e.kind)) set(e.order_var, e.index);
        if (e.kind == EventKind::Read) set(e.value_var, e.value);
        if (e.kind == EventKind::Write) {
            set(e.pre_var, store[e.target]);
            set(e.value_var, e.value);
            store[e.target] = e.value;
        }
    }
    return m;
}

bool av_violated(const Trace& tr, const AvInstance& inst)
{
    AvEncoding enc = encode_av(tr, inst);
    Model m = concrete_model(tr, &enc);
    return !evaluate(enc.phi_av.root, m, tr.width());
}

std::optional<AvInstance> translate_instance(const AvInstance& inst, const Trace& from, const Trace& to)
{
    AvInstance out = inst;
    for (auto& idx : out.events) {
        const Event& e = event_at(from, idx);
        const Event* t = to.find(e.thread, e.label, e.kind, e.occurrence);
        if (!t) return std::nullopt;
        idx = t->index;
    }
    return out;
}

} // namespace verifix
