#include "verifix/solver.hpp"

#include "verifix/error.hpp"

#include <algorithm>
#include <map>
#include <queue>

namespace verifix {

const char* sat_status_name(SatStatus s)
{
    switch (s) {
    case SatStatus::Sat: return "sat";
    case SatStatus::Unsat: return "unsat";
    case SatStatus::Unknown: return "unknown";
    }
    return "?";
}

std::optional<BackendKind> parse_backend(const std::string& name)
{
    if (name == "builtin") return BackendKind::Builtin;
    if (name == "smt" || name == "z3" || name == "external") return BackendKind::Smt;
    return std::nullopt;
}

const char* backend_name(BackendKind k) { return k == BackendKind::Builtin ? "builtin" : "z3"; }

std::unique_ptr<Solver> make_solver(BackendKind kind)
{
    if (kind == BackendKind::Smt) return std::make_unique<SmtProcessSolver>();
    return std::make_unique<BuiltinSolver>();
}

namespace {

void complete_model(const Formula& f, Model& m)
{
    const SymbolTable& st = *f.symbols;
    m.values.resize(st.size(), 0);
    auto used = used_vars(f.root);
    std::vector<bool> is_used(st.size(), false);
    for (int v : used) is_used[static_cast<std::size_t>(v)] = true;
    std::int64_t top = 0;
    for (int v : used)
        if (st[v].kind == VarKind::Order) top = std::max(top, m[v]);
    for (std::size_t i = 0; i < st.size(); ++i) {
        if (is_used[i]) continue;
        m.values[i] = st.vars[i].kind == VarKind::Order ? ++top : 0;
    }
}

} // namespace

SolverResult Solver::check_sat(const Formula& f, const SolverLimits& limits)
{
    auto t0 = std::chrono::steady_clock::now();
    SolverResult r = solve(f, limits);
    if (r.status == SatStatus::Sat) {
        complete_model(f, r.model);
        if (!evaluate(f, r.model)) {
            r.status = SatStatus::Unknown;
            r.reason = "model failed re-evaluation";
        }
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

namespace {

struct OutOfBudget {
    std::string why;
};

Node nnf(const Node& n, bool neg)
{
    using K = FormulaNode::Kind;
    switch (n->kind) {
    case K::True: return f_bool(!neg);
    case K::False: return f_bool(neg);
    case K::Not: return nnf(n->kids.front(), !neg);
    case K::And:
    case K::Or: {
        std::vector<Node> kids;
        kids.reserve(n->kids.size());
        for (const auto& k : n->kids) kids.push_back(nnf(k, neg));
        bool conj = (n->kind == K::And) != neg;
        return conj ? f_and(std::move(kids)) : f_or(std::move(kids));
    }
    case K::Less:
        // order values are distinct, so not(a < b) is b < a
        return neg ? f_less(n->b, n->a) : n;
    case K::Eq: return neg ? f_ne(n->lhs, n->rhs) : n;
    case K::Ne: return neg ? f_eq(n->lhs, n->rhs) : n;
    }
    return n;
}

class Search {
public:
    Search(const Formula& f, const SolverLimits& lim) : f_(f), lim_(lim), width_(f.symbols->width)
    {
        root_ = nnf(f.root, false);
        for (int v : used_vars(root_)) {
            if ((*f.symbols)[v].kind == VarKind::Order) {
                dense_[v] = static_cast<int>(order_vars_.size());
                order_vars_.push_back(v);
            } else {
                value_vars_.push_back(v);
            }
        }
        n_ = order_vars_.size();
        words_ = (n_ + 63) / 64;
        closure_.assign(n_ * words_, 0);
        forced_.assign(f.symbols->size(), -1);
    }

    SolverResult run()
    {
        SolverResult r;
        try {
            if (assert_node(root_.get()) && search()) {
                r.status = SatStatus::Sat;
                r.model = build_model();
            } else {
                r.status = SatStatus::Unsat;
            }
        } catch (const OutOfBudget& e) {
            r.status = SatStatus::Unknown;
            r.reason = e.why;
        }
        return r;
    }

private:
    const Formula& f_;
    SolverLimits lim_;
    unsigned width_;
    Node root_;
    std::map<int, int> dense_;
    std::vector<int> order_vars_;
    std::vector<int> value_vars_;
    std::size_t n_ = 0;
    std::size_t words_ = 0;
    std::vector<std::uint64_t> closure_;
    std::vector<const FormulaNode*> lits_;
    std::vector<const FormulaNode*> ors_;
    std::vector<std::int64_t> forced_;
    bool forced_dirty_ = true;
    std::vector<std::int64_t> values_;
    std::uint64_t nodes_ = 0;

    void tick()
    {
        if (++nodes_ > lim_.max_nodes) throw OutOfBudget{"node budget exhausted"};
        if ((nodes_ & 255) == 0 && std::chrono::steady_clock::now() > lim_.deadline) throw OutOfBudget{"timeout"};
    }

    int dense(const OrderRef& r) const { return dense_.at(r.var); }

    bool reach(std::size_t a, std::size_t b) const { return (closure_[a * words_ + b / 64] >> (b % 64)) & 1; }

    bool add_edge(std::size_t a, std::size_t b)
    {
        if (a == b || reach(b, a)) return false;
        if (reach(a, b)) return true;
        for (std::size_t x = 0; x < n_; ++x) {
            if (x != a && !reach(x, a)) continue;
            std::uint64_t* rx = &closure_[x * words_];
            const std::uint64_t* rb = &closure_[b * words_];
            for (std::size_t w = 0; w < words_; ++w) rx[w] |= rb[w];
            rx[b / 64] |= std::uint64_t{1} << (b % 64);
        }
        return true;
    }

    // forced values from equalities whose other side is known
    bool refresh_forced()
    {
        if (!forced_dirty_) return true;
        forced_dirty_ = false;
        std::fill(forced_.begin(), forced_.end(), -1);
        bool changed = true;
        while (changed) {
            changed = false;
            for (const FormulaNode* l : lits_) {
                if (l->kind != FormulaNode::Kind::Eq) continue;
                std::uint64_t a, b;
                bool ka = eval(l->lhs, forced_, a), kb = eval(l->rhs, forced_, b);
                if (ka && !kb && l->rhs->kind == ExprNode::Kind::Var) {
                    forced_[static_cast<std::size_t>(l->rhs->var)] = static_cast<std::int64_t>(a);
                    changed = true;
                } else if (kb && !ka && l->lhs->kind == ExprNode::Kind::Var) {
                    forced_[static_cast<std::size_t>(l->lhs->var)] = static_cast<std::int64_t>(b);
                    changed = true;
                }
            }
        }
        for (const FormulaNode* l : lits_)
            if (lit_truth(l, forced_) < 0) return false;
        return true;
    }

    bool eval(const Expr& e, const std::vector<std::int64_t>& vals, std::uint64_t& out) const
    {
        return eval_expr(e, width_,
                         [&](const ExprNode& n, std::uint64_t& v) {
                             std::int64_t x = vals[static_cast<std::size_t>(n.var)];
                             if (x < 0) return false;
                             v = static_cast<std::uint64_t>(x);
                             return true;
                         },
                         out);
    }

    int lit_truth(const FormulaNode* l, const std::vector<std::int64_t>& vals) const
    {
        std::uint64_t a, b;
        if (!eval(l->lhs, vals, a) || !eval(l->rhs, vals, b)) return 0;
        bool eq = a == b;
        return (eq == (l->kind == FormulaNode::Kind::Eq)) ? 1 : -1;
    }

    int truth(const FormulaNode* n)
    {
        using K = FormulaNode::Kind;
        switch (n->kind) {
        case K::True: return 1;
        case K::False: return -1;
        case K::Less: {
            std::size_t a = static_cast<std::size_t>(dense(n->a)), b = static_cast<std::size_t>(dense(n->b));
            if (reach(a, b)) return 1;
            if (a == b || reach(b, a)) return -1;
            return 0;
        }
        case K::Eq:
        case K::Ne:
            refresh_forced();
            return lit_truth(n, forced_);
        case K::And: {
            int r = 1;
            for (const auto& k : n->kids) {
                int t = truth(k.get());
                if (t < 0) return -1;
                if (t == 0) r = 0;
            }
            return r;
        }
        case K::Or: {
            int r = -1;
            for (const auto& k : n->kids) {
                int t = truth(k.get());
                if (t > 0) return 1;
                if (t == 0) r = 0;
            }
            return r;
        }
        case K::Not: break;
        }
        throw Error("formula not in negation normal form");
    }

    bool assert_node(const FormulaNode* n)
    {
        using K = FormulaNode::Kind;
        std::vector<const FormulaNode*> work{n};
        while (!work.empty()) {
            const FormulaNode* x = work.back();
            work.pop_back();
            switch (x->kind) {
            case K::True: break;
            case K::False: return false;
            case K::And:
                for (auto it = x->kids.rbegin(); it != x->kids.rend(); ++it) work.push_back(it->get());
                break;
            case K::Or: ors_.push_back(x); break;
            case K::Less:
                if (!add_edge(static_cast<std::size_t>(dense(x->a)), static_cast<std::size_t>(dense(x->b)))) return false;
                break;
            case K::Eq:
            case K::Ne:
                lits_.push_back(x);
                forced_dirty_ = true;
                break;
            case K::Not: throw Error("formula not in negation normal form");
            }
        }
        return true;
    }

    bool propagate()
    {
        for (;;) {
            tick();
            if (!refresh_forced()) return false;
            bool changed = false;
            for (std::size_t i = 0; i < ors_.size();) {
                const FormulaNode* o = ors_[i];
                const FormulaNode* unit = nullptr;
                int unknown = 0;
                bool sat = false;
                for (const auto& k : o->kids) {
                    int t = truth(k.get());
                    if (t > 0) {
                        sat = true;
                        break;
                    }
                    if (t == 0) {
                        ++unknown;
                        unit = k.get();
                    }
                }
                if (sat) {
                    ors_[i] = ors_.back();
                    ors_.pop_back();
                    continue;
                }
                if (unknown == 0) return false;
                if (unknown == 1) {
                    ors_[i] = ors_.back();
                    ors_.pop_back();
                    if (!assert_node(unit)) return false;
                    changed = true;
                    continue;
                }
                ++i;
            }
            if (!changed) return true;
        }
    }

    struct Saved {
        std::vector<std::uint64_t> closure;
        std::size_t lits;
        std::vector<const FormulaNode*> ors;
    };

    bool search()
    {
        if (!propagate()) return false;
        if (ors_.empty()) return solve_values();

        // the disjunction with the fewest open alternatives
        const FormulaNode* pick = nullptr;
        std::size_t best = SIZE_MAX;
        for (const FormulaNode* o : ors_) {
            std::size_t open = 0;
            for (const auto& k : o->kids)
                if (truth(k.get()) == 0) ++open;
            if (open < best) {
                best = open;
                pick = o;
            }
        }
        std::vector<const FormulaNode*> alts;
        for (const auto& k : pick->kids)
            if (truth(k.get()) == 0) alts.push_back(k.get());

        Saved s{closure_, lits_.size(), ors_};
        for (const FormulaNode* alt : alts) {
            tick();
            ors_.erase(std::find(ors_.begin(), ors_.end(), pick));
            if (assert_node(alt) && search()) return true;
            closure_ = s.closure;
            lits_.resize(s.lits);
            ors_ = s.ors;
            forced_dirty_ = true;
        }
        return false;
    }

    bool solve_values()
    {
        values_.assign(f_.symbols->size(), -1);
        return assign_values(0);
    }

    bool assign_values(std::size_t next)
    {
        tick();
        std::vector<int> trail;
        bool ok = true;
        bool changed = true;
        while (ok && changed) {
            changed = false;
            for (const FormulaNode* l : lits_) {
                std::uint64_t a, b;
                bool ka = eval(l->lhs, values_, a), kb = eval(l->rhs, values_, b);
                if (ka && kb) {
                    if ((a == b) != (l->kind == FormulaNode::Kind::Eq)) {
                        ok = false;
                        break;
                    }
                } else if (l->kind == FormulaNode::Kind::Eq) {
                    const Expr& other = ka ? l->rhs : l->lhs;
                    if ((ka || kb) && other->kind == ExprNode::Kind::Var) {
                        values_[static_cast<std::size_t>(other->var)] = static_cast<std::int64_t>(ka ? a : b);
                        trail.push_back(other->var);
                        changed = true;
                    }
                }
            }
        }
        if (ok) {
            while (next < value_vars_.size() && values_[static_cast<std::size_t>(value_vars_[next])] >= 0) ++next;
            if (next == value_vars_.size()) return true;
            const auto v = static_cast<std::size_t>(value_vars_[next]);
            const std::uint64_t top = width_mask(width_);
            for (std::uint64_t x = 0;; ++x) {
                values_[v] = static_cast<std::int64_t>(x);
                if (assign_values(next + 1)) return true;
                if (x == top) break;
            }
            values_[v] = -1;
        }
        for (int v : trail) values_[static_cast<std::size_t>(v)] = -1;
        return false;
    }

    Model build_model() const
    {
        Model m;
        m.values.assign(f_.symbols->size(), 0);
        for (int v : value_vars_) m.values[static_cast<std::size_t>(v)] = std::max<std::int64_t>(values_[static_cast<std::size_t>(v)], 0);
        // linear extension of the order graph, smallest dense index first
        std::vector<int> indeg(n_, 0);
        for (std::size_t a = 0; a < n_; ++a)
            for (std::size_t b = 0; b < n_; ++b)
                if (reach(a, b)) ++indeg[b];
        std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
        for (std::size_t i = 0; i < n_; ++i)
            if (indeg[i] == 0) ready.push(i);
        std::int64_t rank = 0;
        while (!ready.empty()) {
            std::size_t a = ready.top();
            ready.pop();
            m.values[static_cast<std::size_t>(order_vars_[a])] = ++rank;
            for (std::size_t b = 0; b < n_; ++b)
                if (reach(a, b) && --indeg[b] == 0) ready.push(b);
        }
        return m;
    }
};

} // namespace

SolverResult BuiltinSolver::solve(const Formula& f, const SolverLimits& limits)
{
    Search s(f, limits);
    return s.run();
}

// Oracle: plain enumeration.

SolverResult brute_force_sat(const Formula& f, std::uint64_t budget)
{
    SolverResult r;
    const SymbolTable& st = *f.symbols;
    auto used = used_vars(f.root);
    std::vector<int> order, value;
    for (int v : used) (st[v].kind == VarKind::Order ? order : value).push_back(v);
    const std::uint64_t vdom = width_mask(st.width) + 1;

    long double space = 1;
    for (std::size_t i = 0; i < order.size(); ++i) space *= static_cast<long double>(order.size());
    for (std::size_t i = 0; i < value.size(); ++i) space *= static_cast<long double>(vdom);
    if (space > static_cast<long double>(budget)) {
        r.status = SatStatus::Unknown;
        r.reason = "search space exceeds budget";
        return r;
    }

    Model m;
    m.values.assign(st.size(), 0);
    // lexicographic over variables in id order
    std::vector<int> vars = used;
    std::vector<std::uint64_t> digit(vars.size(), 0);
    auto lo = [&](int v) -> std::uint64_t { return st[v].kind == VarKind::Order ? 1 : 0; };
    auto hi = [&](int v) -> std::uint64_t {
        return st[v].kind == VarKind::Order ? order.size() : vdom - 1;
    };
    for (std::size_t i = 0; i < vars.size(); ++i) digit[i] = lo(vars[i]);
    for (;;) {
        bool distinct = true;
        std::vector<bool> seen(order.size() + 1, false);
        for (std::size_t i = 0; i < vars.size(); ++i) {
            m.values[static_cast<std::size_t>(vars[i])] = static_cast<std::int64_t>(digit[i]);
            if (st[vars[i]].kind == VarKind::Order) {
                if (seen[digit[i]]) distinct = false;
                seen[digit[i]] = true;
            }
        }
        if (distinct && evaluate(f.root, m, st.width)) {
            r.status = SatStatus::Sat;
            r.model = m;
            return r;
        }
        std::size_t i = vars.size();
        while (i > 0) {
            --i;
            if (digit[i] < hi(vars[i])) {
                ++digit[i];
                break;
            }
            digit[i] = lo(vars[i]);
            if (i == 0) {
                r.status = SatStatus::Unsat;
                return r;
            }
        }
        if (vars.empty()) {
            r.status = SatStatus::Unsat;
            return r;
        }
    }
}

} // namespace verifix
