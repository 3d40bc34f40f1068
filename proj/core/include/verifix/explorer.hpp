#pragma once

#include "verifix/deadlock.hpp"
#include "verifix/encode.hpp"
#include "verifix/executor.hpp"
#include "verifix/solver.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace verifix {

struct WorkItem {
    ScheduleInput si;
    PathPrefix prefix;
};

/// Per-thread alternatives: the whole suffix, or the suffix up to position k
/// with the k-th condition negated. All combinations except all-keep.
/// Throws Error when pre is not a prefix of path.
std::vector<PathPrefix> split(const PathPrefix& pre, const PathPrefix& path);

/// Events of tr that pre' still guarantees. A thread whose conditions are all
/// kept contributes everything it did; a thread with a flipped condition
/// contributes up to that condition, with its outcome negated.
Trace extract_sub_trace(const Trace& tr, const PathPrefix& next);

struct GenerateStats {
    std::size_t candidates = 0;  // split size before any filtering
    std::size_t skipped = 0;     // already covered or queued
    std::size_t unsat = 0;
    std::size_t unknown = 0;     // dropped after the retry
    double solver_seconds = 0;
};

/// Longest per-thread common prefix of pre and path.
PathPrefix common_prefix(const PathPrefix& pre, const PathPrefix& path);

/// skip(pre') returning true drops the candidate before solving.
std::vector<WorkItem> generate_new_si(const Trace& tr, const PathPrefix& pre, Solver& solver,
                                      const SolverLimits& limits, GenerateStats* stats = nullptr,
                                      const std::function<bool(const PathPrefix&)>& skip = {});

struct AvFinding {
    AvInstance instance;  // in terms of the replayed trace; empty events for a plain crash
    std::string description;
};

struct DlFinding {
    PotentialDeadlock cycle;  // in terms of the trace it was found on
    std::string description;
    std::string formula;
};

struct Finding {
    enum class Kind : unsigned char { Atomicity, Deadlock } kind = Kind::Atomicity;
    ScheduleInput witness;
    Trace trace;  // replay of the witness
    std::string description;
    std::string key;  // identity for deduplication across paths
    std::size_t path_id = 0;
};

/// Witness check for an AV instance found on tr: the replay crashes or
/// exhibits the unserializable values.
std::optional<Trace> validate_av_witness(const Program& p, const Trace& tr, const AvInstance& inst,
                                         const ScheduleInput& witness, const ExecConfig& cfg);

struct AvCheck {
    std::vector<Finding> findings;
    bool unknown = false;
    std::size_t queries = 0;
    double solver_seconds = 0;
};

AvCheck check_av(const Program& p, const Trace& tr, const AtomicRegionSpec& spec, Solver& solver,
                 const SolverLimits& limits, const ExecConfig& cfg, bool all = false);

enum class VerdictKind : unsigned char { Verified, AtomicityViolation, Deadlock, Timeout, Unknown };

const char* verdict_kind_name(VerdictKind k);

struct PathRecord {
    std::size_t id = 0;
    PathPrefix prefix;
    PathPrefix path;
    Outcome outcome;
    std::size_t queries = 0;
    double solver_seconds = 0;
    std::size_t generated = 0;
};

struct Verdict {
    VerdictKind kind = VerdictKind::Verified;
    std::size_t paths_explored = 0;
    unsigned bound_hits = 0;
    std::vector<Finding> findings;
    std::set<std::string> explored;  // canonical forms of the explored paths
    std::vector<PathRecord> paths;
    std::vector<std::string> warnings;
    std::string reason;  // for Unknown and Timeout
    unsigned workers = 1;
    double seconds = 0;

    bool has_av() const;
    bool has_dl() const;
    bool bug() const { return kind == VerdictKind::AtomicityViolation || kind == VerdictKind::Deadlock; }
};

struct ExploreConfig {
    ExecConfig exec;
    unsigned parallelism = 1;
    /// Never run more workers than hardware threads. Results do not depend on
    /// the worker count either way.
    bool limit_to_cores = true;
    std::chrono::milliseconds timeout{1200 * 1000};
    BackendKind backend = BackendKind::Builtin;
    std::uint64_t max_solver_nodes = 4'000'000;
    bool find_all = false;
    bool check_deadlocks = true;
    std::function<void(const std::string&)> log;  // one line per explored path
};

/// Explores from the seed until a bug is confirmed or no unexplored prefix is left.
Verdict verify(const Program& patched, const ScheduleInput& seed, const AtomicRegionSpec& spec,
               const ExploreConfig& cfg);

Verdict verify_fix(const Program& p, const FixPatch& f, const std::variant<ScheduleInput, Trace>& seed,
                   const AtomicRegionSpec& spec, const ExploreConfig& cfg);

} // namespace verifix
