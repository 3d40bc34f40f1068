#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace verifix {

enum class Op : std::uint8_t {
    Add, Sub, Mul,
    Eq, Ne, Lt, Le, Gt, Ge,
    LAnd, LOr,
    Not, Neg,
};

bool is_unary(Op op);
const char* op_symbol(Op op);

/// Unsigned arithmetic modulo 2^width. Comparisons and logical operators give 0 or 1.
std::uint64_t apply_op(Op op, std::uint64_t a, std::uint64_t b, unsigned width);
std::uint64_t width_mask(unsigned width);

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

// One node type serves both program expressions (leaves are locals) and
// symbolic terms (leaves are value variables of a trace).
struct ExprNode {
    enum class Kind : std::uint8_t { Const, Local, Var, Unary, Binary };

    Kind kind = Kind::Const;
    std::uint64_t value = 0;
    std::string name;
    int var = -1;
    Op op = Op::Add;
    Expr lhs;
    Expr rhs;
};

Expr make_const(std::uint64_t v);
Expr make_local(std::string name);
Expr make_var(int id);
Expr make_unary(Op op, Expr e);
Expr make_binary(Op op, Expr a, Expr b);

/// Like make_unary/make_binary but folds constant operands.
Expr fold_unary(Op op, Expr e, unsigned width);
Expr fold_binary(Op op, Expr a, Expr b, unsigned width);

bool expr_equal(const Expr& a, const Expr& b);
bool is_const(const Expr& e);

/// Evaluates with leaves resolved by the callbacks. Locals or vars that resolve
/// to nothing make the whole result empty.
using LeafFn = std::function<bool(const ExprNode&, std::uint64_t&)>;
bool eval_expr(const Expr& e, unsigned width, const LeafFn& leaf, std::uint64_t& out);

/// Source syntax, fully parenthesised below the top level. Vars print as $id
/// unless a namer is given.
std::string expr_to_string(const Expr& e, const std::function<std::string(int)>& var_name = {});

template <class F>
void visit_vars(const Expr& e, F&& f)
{
    if (!e) return;
    switch (e->kind) {
    case ExprNode::Kind::Var: f(e->var); break;
    case ExprNode::Kind::Unary: visit_vars(e->lhs, f); break;
    case ExprNode::Kind::Binary:
        visit_vars(e->lhs, f);
        visit_vars(e->rhs, f);
        break;
    default: break;
    }
}

} // namespace verifix
