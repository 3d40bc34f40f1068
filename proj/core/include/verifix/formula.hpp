#pragma once

#include "verifix/expr.hpp"
#include "verifix/symbols.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace verifix {

/// Order variable reference. var < 0 stands for the initial writes, whose order is 0.
struct OrderRef {
    int var = -1;
    bool is_zero() const { return var < 0; }
    bool operator==(const OrderRef&) const = default;
};

struct FormulaNode;
using Node = std::shared_ptr<const FormulaNode>;

struct FormulaNode {
    enum class Kind : unsigned char { True, False, And, Or, Not, Less, Eq, Ne };

    Kind kind = Kind::True;
    std::vector<Node> kids;
    OrderRef a, b;  // Less: a < b
    Expr lhs, rhs;  // Eq, Ne over value terms
};

Node f_true();
Node f_false();
Node f_bool(bool v);
/// Flattens nested conjunctions and drops True; any False makes the result False.
Node f_and(std::vector<Node> kids);
Node f_or(std::vector<Node> kids);
Node f_not(Node n);
Node f_less(OrderRef a, OrderRef b);
Node f_eq(Expr a, Expr b);
Node f_ne(Expr a, Expr b);

bool node_equal(const Node& a, const Node& b);

struct Formula {
    SymbolTablePtr symbols;
    Node root;
};

/// Conjunction of formulas over the same base table. The longer table wins;
/// tables must agree on their common prefix.
Formula conjoin(const std::vector<Formula>& fs);

/// Values of a model are indexed by variable id. Order values are positive and
/// distinct over the variables a formula uses.
struct Model {
    std::vector<std::int64_t> values;

    std::int64_t operator[](int id) const { return values[static_cast<std::size_t>(id)]; }
};

bool evaluate(const Node& n, const Model& m, unsigned width);
/// Truth of the formula plus injectivity and positivity of the used order variables.
bool evaluate(const Formula& f, const Model& m);

/// Variables that occur in the formula.
std::vector<int> used_vars(const Node& n);

std::size_t node_count(const Node& n);

/// Human readable, one top-level conjunct per line.
std::string print_formula(const Formula& f);
std::string print_node(const Node& n, const SymbolTable& symbols);

} // namespace verifix
