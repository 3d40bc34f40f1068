#include "oracles.hpp"

#include "verifix/executor.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace verifix::testing {

std::vector<EdgeKey> oracle_lock_edges(const Trace& tr)
{
    std::map<std::string, std::map<std::string, std::size_t>> held;  // thread -> lock -> acquiring event
    std::vector<EdgeKey> out;
    for (const auto& e : tr.events) {
        auto& h = held[e.thread];
        if (e.kind == EventKind::Lock) {
            std::set<std::string> names;
            for (const auto& [l, at] : h) names.insert(l);
            for (const auto& [l, at] : h) out.emplace_back(l, e.target, e.thread, names, at, e.index);
            h[e.target] = e.index;
        } else if (e.kind == EventKind::Unlock) {
            h.erase(e.target);
        }
    }
    return out;
}

std::set<CycleKey> oracle_unsafe_cycles(const Trace& tr)
{
    auto edges = oracle_lock_edges(tr);
    std::set<CycleKey> out;
    std::vector<std::size_t> chain;
    std::function<void()> extend = [&]() {
        const EdgeKey& first = edges[chain.front()];
        const EdgeKey& last = edges[chain.back()];
        if (chain.size() >= 2 && std::get<1>(last) == std::get<0>(first)) {
            CycleKey c;
            for (auto i : chain) c.push_back(edges[i]);
            auto lead = std::min_element(c.begin(), c.end(), [](const EdgeKey& a, const EdgeKey& b) {
                return std::pair(std::get<4>(a), std::get<5>(a)) < std::pair(std::get<4>(b), std::get<5>(b));
            });
            std::rotate(c.begin(), lead, c.end());
            out.insert(c);
        }
        for (std::size_t n = 0; n < edges.size(); ++n) {
            const EdgeKey& e = edges[n];
            if (std::get<0>(e) != std::get<1>(last)) continue;
            bool ok = true;
            for (auto i : chain) {
                const EdgeKey& o = edges[i];
                // a simple cycle visits each lock once
                if (std::get<0>(o) == std::get<0>(e) || std::get<2>(o) == std::get<2>(e)) ok = false;
                for (const auto& l : std::get<3>(e))
                    if (std::get<3>(o).count(l)) ok = false;
            }
            if (!ok) continue;
            chain.push_back(n);
            extend();
            chain.pop_back();
        }
    };
    for (std::size_t s = 0; s < edges.size(); ++s) {
        chain = {s};
        extend();
    }
    return out;
}

std::vector<RoleEvent> roles_of(const Trace& tr, const AvInstance& inst)
{
    std::vector<RoleEvent> out;
    for (auto idx : inst.events) {
        const Event& e = tr.events.at(idx - 1);
        out.push_back({e.thread, e.label, e.kind, e.occurrence});
    }
    return out;
}

std::optional<bool> oracle_violated(const Trace& run, int pattern, const std::vector<RoleEvent>& roles)
{
    // position of each role and the store just before it
    std::vector<std::size_t> at(roles.size(), 0);
    std::map<std::string, std::uint64_t> store;
    for (const auto& s : run.shared) store[s.name] = s.init;
    std::vector<std::map<std::string, std::uint64_t>> before(roles.size());
    std::map<std::tuple<std::string, std::string, EventKind>, unsigned> seen;
    for (const auto& e : run.events) {
        unsigned occ = ++seen[{e.thread, e.label, e.kind}];
        for (std::size_t r = 0; r < roles.size(); ++r)
            if (roles[r].thread == e.thread && roles[r].label == e.label && roles[r].kind == e.kind &&
                roles[r].occurrence == occ) {
                at[r] = e.index;
                before[r] = store;
            }
        if (e.kind == EventKind::Write) store[e.target] = e.value;
    }
    for (auto a : at)
        if (!a) return std::nullopt;
    auto val = [&](std::size_t r) { return run.events[at[r] - 1].value; };
    auto target = [&](std::size_t r) { return run.events[at[r] - 1].target; };
    auto pre = [&](std::size_t r) { return before[r].at(target(r)); };
    switch (pattern) {
    case 1: return val(0) != val(2);
    case 2: return val(0) == val(1);
    case 3: return val(2) != val(0);
    case 4: return val(0) != pre(2);
    case 5: return !(val(0) == before[3].at(target(0)) && before[0].at(target(3)) == pre(3));
    case 6: return !(val(1) != val(0) && val(2) != before[0].at(target(3)));
    case 7: return !(val(0) == before[3].at(target(0)) && before[0].at(target(3)) == val(3));
    default: return std::nullopt;
    }
}

std::vector<Trace> same_path_runs(const Program& p, const Trace& tr)
{
    std::string want = canonical_prefix(tr.path());
    std::vector<std::map<std::string, std::uint64_t>> assignments{{}};
    for (const auto& in : p.inputs) {
        std::vector<std::map<std::string, std::uint64_t>> next;
        for (const auto& a : assignments)
            for (std::uint64_t v = 0; v <= width_mask(p.width); ++v) {
                auto b = a;
                b[in.name] = v;
                next.push_back(std::move(b));
            }
        assignments = std::move(next);
    }
    std::vector<Trace> out;
    for (const auto& a : assignments)
        for (auto& run : enumerate_all(p, a, {}))
            if (run.outcome.kind == OutcomeKind::Completed && canonical_prefix(run.path()) == want)
                out.push_back(std::move(run));
    return out;
}

std::size_t expected_split_size(const PathPrefix& pre, const PathPrefix& path)
{
    std::size_t n = 1;
    for (const auto& [t, conds] : path) {
        auto it = pre.find(t);
        std::size_t kept = it == pre.end() ? 0 : it->second.size();
        n *= conds.size() - kept + 1;
    }
    return n - 1;
}

} // namespace verifix::testing
