#include "verifix/formula.hpp"

#include "verifix/error.hpp"

#include <algorithm>
#include <set>

namespace verifix {

namespace {

Node leaf(FormulaNode::Kind k)
{
    auto n = std::make_shared<FormulaNode>();
    n->kind = k;
    return n;
}

const Node& true_node()
{
    static const Node n = leaf(FormulaNode::Kind::True);
    return n;
}

const Node& false_node()
{
    static const Node n = leaf(FormulaNode::Kind::False);
    return n;
}

} // namespace

Node f_true() { return true_node(); }
Node f_false() { return false_node(); }
Node f_bool(bool v) { return v ? true_node() : false_node(); }

Node f_and(std::vector<Node> kids)
{
    std::vector<Node> flat;
    for (auto& k : kids) {
        if (k->kind == FormulaNode::Kind::True) continue;
        if (k->kind == FormulaNode::Kind::False) return f_false();
        if (k->kind == FormulaNode::Kind::And)
            flat.insert(flat.end(), k->kids.begin(), k->kids.end());
        else
            flat.push_back(std::move(k));
    }
    if (flat.empty()) return f_true();
    if (flat.size() == 1) return flat.front();
    auto n = std::make_shared<FormulaNode>();
    n->kind = FormulaNode::Kind::And;
    n->kids = std::move(flat);
    return n;
}

Node f_or(std::vector<Node> kids)
{
    std::vector<Node> flat;
    for (auto& k : kids) {
        if (k->kind == FormulaNode::Kind::False) continue;
        if (k->kind == FormulaNode::Kind::True) return f_true();
        if (k->kind == FormulaNode::Kind::Or)
            flat.insert(flat.end(), k->kids.begin(), k->kids.end());
        else
            flat.push_back(std::move(k));
    }
    if (flat.empty()) return f_false();
    if (flat.size() == 1) return flat.front();
    auto n = std::make_shared<FormulaNode>();
    n->kind = FormulaNode::Kind::Or;
    n->kids = std::move(flat);
    return n;
}

Node f_not(Node n)
{
    if (n->kind == FormulaNode::Kind::True) return f_false();
    if (n->kind == FormulaNode::Kind::False) return f_true();
    if (n->kind == FormulaNode::Kind::Not) return n->kids.front();
    auto r = std::make_shared<FormulaNode>();
    r->kind = FormulaNode::Kind::Not;
    r->kids.push_back(std::move(n));
    return r;
}

Node f_less(OrderRef a, OrderRef b)
{
    if (a == b) return f_false();
    if (b.is_zero()) return f_false();
    if (a.is_zero()) return f_true();
    auto n = std::make_shared<FormulaNode>();
    n->kind = FormulaNode::Kind::Less;
    n->a = a;
    n->b = b;
    return n;
}

namespace {

Node cmp(FormulaNode::Kind k, Expr a, Expr b)
{
    if (is_const(a) && is_const(b)) return f_bool((a->value == b->value) == (k == FormulaNode::Kind::Eq));
    auto n = std::make_shared<FormulaNode>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

} // namespace

Node f_eq(Expr a, Expr b) { return cmp(FormulaNode::Kind::Eq, std::move(a), std::move(b)); }
Node f_ne(Expr a, Expr b) { return cmp(FormulaNode::Kind::Ne, std::move(a), std::move(b)); }

bool node_equal(const Node& a, const Node& b)
{
    if (a == b) return true;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
    case FormulaNode::Kind::True:
    case FormulaNode::Kind::False: return true;
    case FormulaNode::Kind::Less: return a->a == b->a && a->b == b->b;
    case FormulaNode::Kind::Eq:
    case FormulaNode::Kind::Ne: return expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
    default:
        if (a->kids.size() != b->kids.size()) return false;
        for (std::size_t i = 0; i < a->kids.size(); ++i)
            if (!node_equal(a->kids[i], b->kids[i])) return false;
        return true;
    }
}

Formula conjoin(const std::vector<Formula>& fs)
{
    if (fs.empty()) throw Error("conjoin of no formulas");
    SymbolTablePtr table = fs.front().symbols;
    std::vector<Node> kids;
    for (const auto& f : fs) {
        const SymbolTable& small = f.symbols->size() < table->size() ? *f.symbols : *table;
        const SymbolTable& big = f.symbols->size() < table->size() ? *table : *f.symbols;
        for (std::size_t i = 0; i < small.size(); ++i)
            if (small.vars[i].name != big.vars[i].name) throw Error("conjoin of formulas over different traces");
        if (f.symbols->size() > table->size()) table = f.symbols;
        kids.push_back(f.root);
    }
    return {table, f_and(std::move(kids))};
}

bool evaluate(const Node& n, const Model& m, unsigned width)
{
    switch (n->kind) {
    case FormulaNode::Kind::True: return true;
    case FormulaNode::Kind::False: return false;
    case FormulaNode::Kind::And:
        return std::all_of(n->kids.begin(), n->kids.end(), [&](const Node& k) { return evaluate(k, m, width); });
    case FormulaNode::Kind::Or:
        return std::any_of(n->kids.begin(), n->kids.end(), [&](const Node& k) { return evaluate(k, m, width); });
    case FormulaNode::Kind::Not: return !evaluate(n->kids.front(), m, width);
    case FormulaNode::Kind::Less: {
        std::int64_t a = n->a.is_zero() ? 0 : m[n->a.var];
        std::int64_t b = n->b.is_zero() ? 0 : m[n->b.var];
        return a < b;
    }
    case FormulaNode::Kind::Eq:
    case FormulaNode::Kind::Ne: {
        auto leaf = [&](const ExprNode& e, std::uint64_t& out) {
            if (e.kind != ExprNode::Kind::Var) return false;
            out = static_cast<std::uint64_t>(m[e.var]);
            return true;
        };
        std::uint64_t a = 0, b = 0;
        if (!eval_expr(n->lhs, width, leaf, a) || !eval_expr(n->rhs, width, leaf, b))
            throw Error("formula term has a non-variable leaf");
        return (a == b) == (n->kind == FormulaNode::Kind::Eq);
    }
    }
    return false;
}

std::vector<int> used_vars(const Node& n)
{
    std::set<int> s;
    std::vector<const FormulaNode*> stack{n.get()};
    while (!stack.empty()) {
        const FormulaNode* x = stack.back();
        stack.pop_back();
        switch (x->kind) {
        case FormulaNode::Kind::Less:
            if (!x->a.is_zero()) s.insert(x->a.var);
            if (!x->b.is_zero()) s.insert(x->b.var);
            break;
        case FormulaNode::Kind::Eq:
        case FormulaNode::Kind::Ne:
            visit_vars(x->lhs, [&](int v) { s.insert(v); });
            visit_vars(x->rhs, [&](int v) { s.insert(v); });
            break;
        default:
            for (const auto& k : x->kids) stack.push_back(k.get());
        }
    }
    return {s.begin(), s.end()};
}

bool evaluate(const Formula& f, const Model& m)
{
    if (m.values.size() < f.symbols->size()) return false;
    std::set<std::int64_t> seen;
    for (int v : used_vars(f.root)) {
        if ((*f.symbols)[v].kind != VarKind::Order) continue;
        if (m[v] <= 0 || !seen.insert(m[v]).second) return false;
    }
    for (int v : used_vars(f.root))
        if ((*f.symbols)[v].kind == VarKind::Value &&
            static_cast<std::uint64_t>(m[v]) > width_mask(f.symbols->width))
            return false;
    return evaluate(f.root, m, f.symbols->width);
}

std::size_t node_count(const Node& n)
{
    std::size_t c = 1;
    for (const auto& k : n->kids) c += node_count(k);
    return c;
}

namespace {

void print(const Node& n, const SymbolTable& st, std::string& out)
{
    auto name = [&](int v) { return st[v].name; };
    auto oname = [&](OrderRef r) { return r.is_zero() ? std::string("0") : st[r.var].name; };
    switch (n->kind) {
    case FormulaNode::Kind::True: out += "true"; break;
    case FormulaNode::Kind::False: out += "false"; break;
    case FormulaNode::Kind::And:
    case FormulaNode::Kind::Or: {
        out += "(";
        for (std::size_t i = 0; i < n->kids.size(); ++i) {
            if (i) out += n->kind == FormulaNode::Kind::And ? " & " : " | ";
            print(n->kids[i], st, out);
        }
        out += ")";
        break;
    }
    case FormulaNode::Kind::Not:
        out += "!";
        print(n->kids.front(), st, out);
        break;
    case FormulaNode::Kind::Less: out += oname(n->a) + " < " + oname(n->b); break;
    case FormulaNode::Kind::Eq:
    case FormulaNode::Kind::Ne:
        out += expr_to_string(n->lhs, name);
        out += n->kind == FormulaNode::Kind::Eq ? " = " : " != ";
        out += expr_to_string(n->rhs, name);
        break;
    }
}

} // namespace

std::string print_node(const Node& n, const SymbolTable& symbols)
{
    std::string out;
    print(n, symbols, out);
    return out;
}

std::string print_formula(const Formula& f)
{
    if (f.root->kind != FormulaNode::Kind::And) return print_node(f.root, *f.symbols) + "\n";
    std::string out;
    for (const auto& k : f.root->kids) out += print_node(k, *f.symbols) + "\n";
    return out;
}

} // namespace verifix
