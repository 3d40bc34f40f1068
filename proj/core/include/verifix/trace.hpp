#pragma once

#include "verifix/expr.hpp"
#include "verifix/symbols.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace verifix {

enum class EventKind : std::uint8_t { Read, Write, Lock, Unlock, Spawn, Join, Branch };

/// Where a branch event comes from. Deref and assert checks are path conditions too.
enum class CondSite : std::uint8_t { Branch, Loop, Deref, Assert };

const char* event_kind_name(EventKind k);
bool is_critical(EventKind k);

struct Event {
    std::size_t index = 0;  // 1-based position in the trace
    std::string thread;
    EventKind kind = EventKind::Read;
    std::string label;
    std::string target;       // variable, lock or thread
    std::uint64_t value = 0;  // concrete value read or written
    int order_var = -1;       // critical events only
    int value_var = -1;       // read: value read; write: value written
    int pre_var = -1;         // write: value overwritten
    Expr term;                // write: written term; branch: condition
    bool taken = false;
    CondSite site = CondSite::Branch;
    unsigned occurrence = 1;  // n-th dynamic instance of (thread, label, kind)
};

enum class OutcomeKind : std::uint8_t { Completed, AssertFailed, NullDeref, Blocked, StepLimit };

struct Outcome {
    OutcomeKind kind = OutcomeKind::Completed;
    std::string thread;  // failing thread for AssertFailed / NullDeref
    std::string label;
    std::vector<std::string> blocked;         // every thread that could not finish
    std::vector<std::string> deadlock_cycle;  // threads waiting on each other for locks

    bool crashed() const { return kind == OutcomeKind::AssertFailed || kind == OutcomeKind::NullDeref; }
};

std::string outcome_to_string(const Outcome& o);

struct Cond {
    std::string label;
    bool taken = false;
    bool operator==(const Cond&) const = default;
};

/// Per-thread branch outcomes. Threads without conditions may be absent.
using PathPrefix = std::map<std::string, std::vector<Cond>>;

std::string prefix_to_string(const PathPrefix& p);
/// Same as prefix_to_string after dropping empty per-thread lists.
std::string canonical_prefix(const PathPrefix& p);
bool is_prefix_of(const PathPrefix& pre, const PathPrefix& path);

struct ScheduleInput {
    std::map<std::string, std::uint64_t> inputs;
    std::vector<std::string> schedule;  // one thread id per critical event

    std::vector<std::pair<std::string, std::size_t>> turns() const;
    bool operator==(const ScheduleInput&) const = default;
};

std::string serialize_schedule(const ScheduleInput& si);
ScheduleInput parse_schedule(const std::string& text);

struct SharedInit {
    std::string name;
    std::uint64_t init = 0;
};

struct InputBinding {
    std::string name;
    int var = -1;
    std::uint64_t value = 0;
};

struct Trace {
    SymbolTable symbols;
    std::vector<SharedInit> shared;
    std::vector<InputBinding> inputs;
    std::vector<Event> events;
    Outcome outcome;
    std::optional<std::size_t> divergence;       // schedule position where the schedule stopped applying
    std::optional<std::size_t> prefix_mismatch;  // event index of the first branch off the requested prefix
    unsigned bound_hits = 0;
    /// Threads cut short on purpose; their open lock sections end at some
    /// point after their last event here instead of never.
    std::set<std::string> truncated;

    unsigned width() const { return symbols.width; }
    std::uint64_t initial_value(const std::string& var) const;
    PathPrefix path() const;
    std::vector<std::string> schedule() const;
    ScheduleInput schedule_input() const;
    const Event* find(const std::string& thread, const std::string& label, EventKind kind, unsigned occurrence = 1) const;
};

std::vector<Event> project(const Trace& tr, const std::string& thread);

std::string serialize_trace(const Trace& tr);
Trace parse_trace(const std::string& text);

/// Prefix form of a term, e.g. "(+ $3 1)".
std::string term_to_sexpr(const Expr& e);
Expr parse_term_sexpr(const std::string& text);

} // namespace verifix
