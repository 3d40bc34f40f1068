#pragma once

#include "verifix/program.hpp"
#include "verifix/trace.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace verifix {

struct ExecConfig {
    unsigned loop_unfold_depth = 5;
    std::uint64_t random_seed = 0;
    std::size_t max_steps = 100000;
};

/// One execution state. Copyable, so callers can fork it at scheduling points.
///
/// Between scheduling points a thread runs all of its local statements at once.
/// Branch events produced that way are buffered and enter the trace just before
/// the thread's next critical event, or when the thread stops.
class Machine {
public:
    Machine(std::shared_ptr<const Program> p, const std::map<std::string, std::uint64_t>& inputs,
            const ExecConfig& cfg, std::shared_ptr<const PathPrefix> prefix = nullptr);

    /// Threads whose next critical statement can run now, in declaration order.
    std::vector<std::string> enabled() const;
    bool finished() const;
    void step(const std::string& thread);
    void note_divergence(std::size_t position);
    Trace finish();

    std::size_t steps() const { return steps_; }

private:
    struct Frame {
        const Block* block = nullptr;
        std::size_t pc = 0;
        const Stmt* loop = nullptr;
        unsigned iterations = 0;
    };
    struct Value {
        std::uint64_t c = 0;
        Expr t;
    };
    enum class Status : unsigned char { NotStarted, Running, Done };
    struct ThreadState {
        std::string id;
        Status status = Status::NotStarted;
        std::vector<Frame> frames;
        std::map<std::string, Value> locals;
        std::vector<Event> pending;
        std::set<std::string> held;
        std::size_t conds = 0;
        bool off_prefix = false;
    };

    std::shared_ptr<const Program> prog_;
    ExecConfig cfg_;
    std::shared_ptr<const PathPrefix> prefix_;
    std::vector<ThreadState> threads_;
    std::map<std::string, std::uint64_t> store_;
    std::map<std::string, int> owner_;
    std::map<std::string, unsigned> occ_;
    std::map<std::string, Value> input_vals_;
    Trace trace_;
    bool crashed_ = false;
    bool step_limit_ = false;
    std::size_t steps_ = 0;

    const Stmt* current(const ThreadState& t) const;
    bool can_run(const ThreadState& t) const;
    void start(std::size_t ti);
    void run_local(std::size_t ti);
    Value eval(const ThreadState& t, const Expr& e) const;
    unsigned next_occ(const std::string& thread, const std::string& label, EventKind k);
    std::string var_name(const std::string& base, unsigned occ) const;
    void record_cond(ThreadState& t, const Stmt& s, CondSite site, const Expr& term, bool taken);
    void flush(ThreadState& t);
    void append(Event e);
    void crash(ThreadState& t, OutcomeKind kind, const std::string& label);
};

Trace guided_se(const Program& p, const ScheduleInput& si, const PathPrefix& prefix, const ExecConfig& cfg);
Trace replay(const Program& p, const ScheduleInput& si, const ExecConfig& cfg);

/// Every interleaving for fixed inputs. Stops after max_traces executions.
std::vector<Trace> enumerate_all(const Program& p, const std::map<std::string, std::uint64_t>& inputs,
                                 const ExecConfig& cfg, std::size_t max_traces = 200000);

} // namespace verifix
