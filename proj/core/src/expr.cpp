#include "verifix/expr.hpp"

#include "verifix/error.hpp"

namespace verifix {

ParseError::ParseError(const std::string& msg, int line, int column)
    : Error(line > 0 ? msg + " at line " + std::to_string(line) + ":" + std::to_string(column) : msg),
      line_(line), column_(column)
{
}

bool is_unary(Op op) { return op == Op::Not || op == Op::Neg; }

const char* op_symbol(Op op)
{
    switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::LAnd: return "&&";
    case Op::LOr: return "||";
    case Op::Not: return "!";
    case Op::Neg: return "-";
    }
    return "?";
}

std::uint64_t width_mask(unsigned width)
{
    return width >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
}

std::uint64_t apply_op(Op op, std::uint64_t a, std::uint64_t b, unsigned width)
{
    const std::uint64_t m = width_mask(width);
    a &= m;
    b &= m;
    switch (op) {
    case Op::Add: return (a + b) & m;
    case Op::Sub: return (a - b) & m;
    case Op::Mul: return (a * b) & m;
    case Op::Eq: return a == b;
    case Op::Ne: return a != b;
    case Op::Lt: return a < b;
    case Op::Le: return a <= b;
    case Op::Gt: return a > b;
    case Op::Ge: return a >= b;
    case Op::LAnd: return a != 0 && b != 0;
    case Op::LOr: return a != 0 || b != 0;
    case Op::Not: return a == 0;
    case Op::Neg: return (~a + 1) & m;
    }
    return 0;
}

Expr make_const(std::uint64_t v)
{
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Const;
    n->value = v;
    return n;
}

Expr make_local(std::string name)
{
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Local;
    n->name = std::move(name);
    return n;
}

Expr make_var(int id)
{
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Var;
    n->var = id;
    return n;
}

Expr make_unary(Op op, Expr e)
{
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Unary;
    n->op = op;
    n->lhs = std::move(e);
    return n;
}

Expr make_binary(Op op, Expr a, Expr b)
{
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Binary;
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

bool is_const(const Expr& e) { return e && e->kind == ExprNode::Kind::Const; }

Expr fold_unary(Op op, Expr e, unsigned width)
{
    if (is_const(e)) return make_const(apply_op(op, e->value, 0, width));
    return make_unary(op, std::move(e));
}

Expr fold_binary(Op op, Expr a, Expr b, unsigned width)
{
    if (is_const(a) && is_const(b)) return make_const(apply_op(op, a->value, b->value, width));
    return make_binary(op, std::move(a), std::move(b));
}

bool expr_equal(const Expr& a, const Expr& b)
{
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    switch (a->kind) {
    case ExprNode::Kind::Const: return a->value == b->value;
    case ExprNode::Kind::Local: return a->name == b->name;
    case ExprNode::Kind::Var: return a->var == b->var;
    case ExprNode::Kind::Unary: return a->op == b->op && expr_equal(a->lhs, b->lhs);
    case ExprNode::Kind::Binary:
        return a->op == b->op && expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
    }
    return false;
}

bool eval_expr(const Expr& e, unsigned width, const LeafFn& leaf, std::uint64_t& out)
{
    switch (e->kind) {
    case ExprNode::Kind::Const:
        out = e->value & width_mask(width);
        return true;
    case ExprNode::Kind::Local:
    case ExprNode::Kind::Var:
        if (!leaf(*e, out)) return false;
        out &= width_mask(width);
        return true;
    case ExprNode::Kind::Unary: {
        std::uint64_t a;
        if (!eval_expr(e->lhs, width, leaf, a)) return false;
        out = apply_op(e->op, a, 0, width);
        return true;
    }
    case ExprNode::Kind::Binary: {
        std::uint64_t a, b;
        if (!eval_expr(e->lhs, width, leaf, a) || !eval_expr(e->rhs, width, leaf, b)) return false;
        out = apply_op(e->op, a, b, width);
        return true;
    }
    }
    return false;
}

namespace {

void print(const Expr& e, const std::function<std::string(int)>& var_name, bool top, std::string& out)
{
    switch (e->kind) {
    case ExprNode::Kind::Const: out += std::to_string(e->value); break;
    case ExprNode::Kind::Local: out += e->name; break;
    case ExprNode::Kind::Var:
        out += var_name ? var_name(e->var) : "$" + std::to_string(e->var);
        break;
    case ExprNode::Kind::Unary:
        out += op_symbol(e->op);
        print(e->lhs, var_name, false, out);
        break;
    case ExprNode::Kind::Binary:
        if (!top) out += '(';
        print(e->lhs, var_name, false, out);
        out += ' ';
        out += op_symbol(e->op);
        out += ' ';
        print(e->rhs, var_name, false, out);
        if (!top) out += ')';
        break;
    }
}

} // namespace

std::string expr_to_string(const Expr& e, const std::function<std::string(int)>& var_name)
{
    std::string out;
    if (e) print(e, var_name, true, out);
    return out;
}

} // namespace verifix
