#pragma once

#include "verifix/formula.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace verifix {

enum class SatStatus : unsigned char { Sat, Unsat, Unknown };

const char* sat_status_name(SatStatus s);

struct SolverResult {
    SatStatus status = SatStatus::Unknown;
    Model model;         // total over the symbol table when Sat
    std::string reason;  // why Unknown
    double seconds = 0;
};

struct SolverLimits {
    std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max();
    std::uint64_t max_nodes = 4'000'000;
};

enum class BackendKind : unsigned char { Builtin, Smt };

std::optional<BackendKind> parse_backend(const std::string& name);
const char* backend_name(BackendKind k);

class Solver {
public:
    virtual ~Solver() = default;
    /// Every Sat answer has been re-checked against the formula; a model that
    /// fails the check turns the answer into Unknown.
    SolverResult check_sat(const Formula& f, const SolverLimits& limits = {});
    virtual std::string name() const = 0;

protected:
    virtual SolverResult solve(const Formula& f, const SolverLimits& limits) = 0;
};

/// Case-splitting search: order atoms kept as a transitively closed graph,
/// value atoms checked by a small constraint solver.
class BuiltinSolver : public Solver {
public:
    std::string name() const override { return "builtin"; }

protected:
    SolverResult solve(const Formula& f, const SolverLimits& limits) override;
};

/// SMT-LIB 2 solver in a child process, z3 by default. The binary comes from
/// VERIFIX_SMT_SOLVER or `z3` on PATH.
class SmtProcessSolver : public Solver {
public:
    explicit SmtProcessSolver(std::string binary = {});
    std::string name() const override { return "smt:" + binary_; }
    static bool available(const std::string& binary = {});

protected:
    SolverResult solve(const Formula& f, const SolverLimits& limits) override;

private:
    std::string binary_;
};

std::unique_ptr<Solver> make_solver(BackendKind kind);

/// Tries every assignment in lexicographic order. Order variables range over
/// 1..n for the n used ones and must be distinct; values over 0..2^width-1.
/// Unknown when the product of domain sizes exceeds the budget.
SolverResult brute_force_sat(const Formula& f, std::uint64_t budget = 50'000'000);

std::string emit_smtlib(const Formula& f);
/// Reads back the formula asserted last by emit_smtlib.
Formula parse_smtlib(const std::string& text, SymbolTablePtr symbols);
/// Model from `(get-model)` output. Variables missing from the output get 0.
Model parse_smt_model(const std::string& text, const SymbolTable& symbols);

} // namespace verifix
