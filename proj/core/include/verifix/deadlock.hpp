#pragma once

#include "verifix/executor.hpp"
#include "verifix/solver.hpp"
#include "verifix/trace.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace verifix {

/// Thread `thread` requested `to` at event ei while holding `from`, which it
/// last acquired at event ex. `held` is every lock it held at ei.
struct LockEdge {
    std::string from, to, thread;
    std::set<std::string> held;
    std::size_t ex = 0, ei = 0;

    bool operator==(const LockEdge&) const = default;
};

struct LockEventGraph {
    std::vector<std::string> locks;  // sorted
    std::vector<LockEdge> edges;     // in order of ei, then ex
};

/// Throws Error on an unlock the thread does not hold.
LockEventGraph build_lock_event_graph(const Trace& tr);

/// Cycle of edges, edges[k].to == edges[k+1].from. Rotated so the edge with
/// the smallest ex comes first.
struct PotentialDeadlock {
    std::vector<LockEdge> edges;

    std::vector<std::pair<std::size_t, std::size_t>> pairs() const;  // (ex, ei) per edge
    std::vector<std::string> threads() const;
    std::vector<std::string> locks() const;
};

std::string describe(const PotentialDeadlock& dl, const Trace& tr);

/// Simple cycles of length >= 2 whose edges have pairwise distinct threads and
/// pairwise disjoint held sets. Sorted by length, then by event indices.
/// max_length 0 means the number of locks.
std::vector<PotentialDeadlock> potential_dls(const Trace& tr, std::size_t max_length = 0);
std::vector<PotentialDeadlock> potential_dls(const LockEventGraph& g, std::size_t max_length = 0);

/// Trace cut at the cycle: cycle threads keep what comes before their request,
/// other threads what spawn/join forces in, or everything when `whole_others`.
/// Empty when the cut is inconsistent (a join needs a cycle thread to finish).
std::optional<Trace> deadlock_sub_trace(const Trace& tr, const PotentialDeadlock& dl, bool whole_others);

/// Sub-trace formula plus the hold-wait ordering of the cycle.
Formula deadlock_query(const Trace& tr, const Trace& sub, const PotentialDeadlock& dl);

struct DlOptions {
    SolverLimits limits;
    /// When set, each Sat witness is replayed and kept only if it blocks on the cycle.
    const Program* program = nullptr;
    ExecConfig exec;
    bool stop_at_first = true;
    std::size_t max_cycle_length = 0;
};

struct DlCandidate {
    PotentialDeadlock cycle;
    SatStatus status = SatStatus::Unknown;
    std::string formula;  // printed query of the last attempt
    std::optional<ScheduleInput> witness;
    std::optional<Trace> replayed;
    bool confirmed = false;  // Sat and, when a program was given, replay blocked on the cycle
    std::string note;
};

struct DlReport {
    std::vector<DlCandidate> candidates;
    std::optional<std::size_t> first_confirmed;  // index into candidates
    bool unknown = false;                        // some candidate stayed undecided
};

DlReport check_dl(const Trace& tr, Solver& solver, const DlOptions& opt = {});

/// Whether a replayed trace is the deadlock the cycle describes.
bool blocks_on(const Trace& replayed, const PotentialDeadlock& dl);

} // namespace verifix
