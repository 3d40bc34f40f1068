#pragma once

#include "verifix/expr.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace verifix {

enum class StmtKind : std::uint8_t {
    Lock, Unlock,
    ReadShared, WriteShared, Deref,
    Assign, Branch, Loop,
    Spawn, Join,
    ReadInput, Assert,
};

const char* stmt_kind_name(StmtKind k);

struct Stmt {
    std::string label;
    StmtKind kind = StmtKind::Assign;
    // lock, shared var, thread or input name depending on kind
    std::string target;
    // destination local for ReadShared, Deref, Assign, ReadInput
    std::string local;
    // written value, assigned value, branch/loop/assert condition
    Expr expr;
    std::vector<Stmt> then_body;
    std::vector<Stmt> else_body;
};

using Block = std::vector<Stmt>;

/// Statements that produce an event and a scheduling point.
bool is_critical(StmtKind k);

struct SharedVar {
    std::string name;
    bool is_ref = false;
    unsigned width = 8;
    std::uint64_t init = 0;
};

struct InputDecl {
    std::string name;
    unsigned width = 8;
};

struct ThreadDef {
    std::string id;
    Block body;
};

struct Program {
    unsigned width = 8;
    std::vector<SharedVar> shared;
    std::vector<std::string> locks;
    std::vector<InputDecl> inputs;
    std::vector<ThreadDef> threads;
    std::string entry;

    const SharedVar* find_shared(const std::string& name) const;
    const ThreadDef* find_thread(const std::string& id) const;
    int thread_index(const std::string& id) const;
    bool has_lock(const std::string& name) const;
    bool has_input(const std::string& name) const;
    /// Threads started when the program starts: the entry thread and every
    /// thread that no spawn statement targets.
    std::vector<std::string> initial_threads() const;
    /// Finds a statement anywhere in the program by label.
    const Stmt* find_label(const std::string& label, std::string* thread = nullptr) const;
};

bool operator==(const Stmt& a, const Stmt& b);
bool operator==(const SharedVar& a, const SharedVar& b);
bool operator==(const InputDecl& a, const InputDecl& b);
bool operator==(const ThreadDef& a, const ThreadDef& b);
bool operator==(const Program& a, const Program& b);

struct ParseOptions {
    bool validate = true;
};

/// Throws ParseError. With validation on, the first diagnostic becomes the error.
Program parse_program(const std::string& text, ParseOptions opts = {});
std::string print_program(const Program& p);

struct Diagnostic {
    std::string message;
    std::string label;
};

std::vector<Diagnostic> validate(const Program& p);

// Fix patches

enum class PatchOpKind : std::uint8_t { InsertLock, InsertUnlock, RemoveSync, MoveSync };

struct PatchOp {
    PatchOpKind kind = PatchOpKind::InsertLock;
    std::string lock;
    std::string label;     // statement to remove or move
    bool before = false;
    std::string anchor;    // insertion point
};

bool operator==(const PatchOp& a, const PatchOp& b);

struct FixPatch {
    std::vector<PatchOp> ops;
};

FixPatch parse_patch(const std::string& text);
std::string print_patch(const FixPatch& f);

struct PatchResult {
    Program program;
    std::vector<std::string> warnings;
};

/// Throws PatchError for unknown anchors, undeclared locks, or a repeated identical edit.
PatchResult apply_fix(const Program& p, const FixPatch& f);

/// Straight-line lock balance problems per thread, e.g. a lock that is never released.
std::vector<std::string> lock_balance_warnings(const Program& p);

// Atomic regions

struct AtomicRegionSpec {
    std::string thread;
    std::vector<std::string> unit;
    std::vector<std::string> locations;
    std::optional<int> pattern;  // 1..7
};

AtomicRegionSpec parse_region_spec(const std::string& text);
std::string print_region_spec(const AtomicRegionSpec& s);

std::string read_file(const std::string& path);

} // namespace verifix
