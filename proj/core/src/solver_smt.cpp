#include "verifix/solver.hpp"

#include "verifix/error.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace verifix {

namespace {

std::string sym(const SymbolTable& st, int v) { return (st[v].kind == VarKind::Order ? "o" : "v") + std::to_string(v); }

std::string bv(std::uint64_t v, unsigned w) { return "(_ bv" + std::to_string(v) + " " + std::to_string(w) + ")"; }

void emit_term(const Expr& e, unsigned w, std::string& out)
{
    auto sub = [&](const Expr& x) {
        out += " ";
        emit_term(x, w, out);
    };
    auto as_bv = [&](const std::string& cond_head, const Expr& a, const Expr& b, bool swap_branches) {
        out += "(ite (" + cond_head;
        sub(a);
        if (b) sub(b);
        out += ") " + (swap_branches ? bv(0, w) + " " + bv(1, w) : bv(1, w) + " " + bv(0, w)) + ")";
    };
    switch (e->kind) {
    case ExprNode::Kind::Const: out += bv(e->value & width_mask(w), w); return;
    case ExprNode::Kind::Var: out += "v" + std::to_string(e->var); return;
    case ExprNode::Kind::Local: throw Error("cannot emit a program local");
    case ExprNode::Kind::Unary:
        if (e->op == Op::Neg) {
            out += "(bvneg";
            sub(e->lhs);
            out += ")";
        } else {
            as_bv("distinct", e->lhs, make_const(0), true);
        }
        return;
    case ExprNode::Kind::Binary: break;
    }
    const char* arith = e->op == Op::Add ? "bvadd" : e->op == Op::Sub ? "bvsub" : e->op == Op::Mul ? "bvmul" : nullptr;
    if (arith) {
        out += "(" + std::string(arith);
        sub(e->lhs);
        sub(e->rhs);
        out += ")";
        return;
    }
    switch (e->op) {
    case Op::Eq: as_bv("=", e->lhs, e->rhs, false); return;
    case Op::Ne: as_bv("distinct", e->lhs, e->rhs, false); return;
    case Op::Lt: as_bv("bvult", e->lhs, e->rhs, false); return;
    case Op::Le: as_bv("bvule", e->lhs, e->rhs, false); return;
    case Op::Gt: as_bv("bvugt", e->lhs, e->rhs, false); return;
    case Op::Ge: as_bv("bvuge", e->lhs, e->rhs, false); return;
    case Op::LAnd:
    case Op::LOr: {
        out += e->op == Op::LAnd ? "(ite (and (distinct" : "(ite (or (distinct";
        sub(e->lhs);
        out += " " + bv(0, w) + ") (distinct";
        sub(e->rhs);
        out += " " + bv(0, w) + ")) " + bv(1, w) + " " + bv(0, w) + ")";
        return;
    }
    default: throw Error("unexpected operator in term");
    }
}

void emit_node(const Node& n, const SymbolTable& st, std::string& out)
{
    using K = FormulaNode::Kind;
    auto oref = [&](OrderRef r) { return r.is_zero() ? std::string("0") : sym(st, r.var); };
    switch (n->kind) {
    case K::True: out += "true"; return;
    case K::False: out += "false"; return;
    case K::And:
    case K::Or:
    case K::Not:
        out += n->kind == K::And ? "(and" : n->kind == K::Or ? "(or" : "(not";
        for (const auto& k : n->kids) {
            out += " ";
            emit_node(k, st, out);
        }
        out += ")";
        return;
    case K::Less: out += "(< " + oref(n->a) + " " + oref(n->b) + ")"; return;
    case K::Eq:
    case K::Ne:
        out += n->kind == K::Eq ? "(= " : "(distinct ";
        emit_term(n->lhs, st.width, out);
        out += " ";
        emit_term(n->rhs, st.width, out);
        out += ")";
        return;
    }
}

// s-expressions

struct SNode {
    std::string atom;
    std::vector<SNode> list;
    bool is_list = false;
};

class SReader {
public:
    explicit SReader(const std::string& s) : s_(s) {}

    bool at_end()
    {
        skip();
        return i_ >= s_.size();
    }

    SNode read()
    {
        skip();
        if (i_ >= s_.size()) throw ParseError("unexpected end of SMT-LIB text");
        SNode n;
        if (s_[i_] == '(') {
            ++i_;
            n.is_list = true;
            for (;;) {
                skip();
                if (i_ >= s_.size()) throw ParseError("unbalanced parentheses in SMT-LIB text");
                if (s_[i_] == ')') {
                    ++i_;
                    break;
                }
                n.list.push_back(read());
            }
            return n;
        }
        if (s_[i_] == ')') throw ParseError("unexpected ')' in SMT-LIB text");
        if (s_[i_] == '|') {
            auto j = s_.find('|', i_ + 1);
            if (j == std::string::npos) throw ParseError("unterminated quoted symbol");
            n.atom = s_.substr(i_ + 1, j - i_ - 1);
            i_ = j + 1;
            return n;
        }
        if (s_[i_] == '"') {
            auto j = s_.find('"', i_ + 1);
            if (j == std::string::npos) throw ParseError("unterminated string");
            n.atom = s_.substr(i_, j - i_ + 1);
            i_ = j + 1;
            return n;
        }
        std::size_t j = i_;
        while (j < s_.size() && !std::isspace(static_cast<unsigned char>(s_[j])) && s_[j] != '(' && s_[j] != ')') ++j;
        n.atom = s_.substr(i_, j - i_);
        i_ = j;
        return n;
    }

private:
    const std::string& s_;
    std::size_t i_ = 0;

    void skip()
    {
        while (i_ < s_.size()) {
            if (std::isspace(static_cast<unsigned char>(s_[i_]))) {
                ++i_;
            } else if (s_[i_] == ';') {
                while (i_ < s_.size() && s_[i_] != '\n') ++i_;
            } else {
                break;
            }
        }
    }
};

bool is_atom(const SNode& n, const char* a) { return !n.is_list && n.atom == a; }
bool head_is(const SNode& n, const char* h) { return n.is_list && !n.list.empty() && is_atom(n.list[0], h); }

std::uint64_t parse_u64(const std::string& s)
{
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ParseError("bad number in SMT-LIB text: " + s);
    }
}

// (_ bvN w) → N
bool bv_literal(const SNode& n, std::uint64_t& v)
{
    if (n.is_list && n.list.size() == 3 && is_atom(n.list[0], "_") && !n.list[1].is_list &&
        n.list[1].atom.rfind("bv", 0) == 0) {
        v = parse_u64(n.list[1].atom.substr(2));
        return true;
    }
    if (!n.is_list && n.atom.size() > 2 && n.atom[0] == '#') {
        if (n.atom[1] == 'x') {
            v = std::stoull(n.atom.substr(2), nullptr, 16);
            return true;
        }
        if (n.atom[1] == 'b') {
            v = std::stoull(n.atom.substr(2), nullptr, 2);
            return true;
        }
    }
    return false;
}

int var_id(const SNode& n, char prefix)
{
    if (n.is_list || n.atom.size() < 2 || n.atom[0] != prefix) throw ParseError("unexpected symbol in SMT-LIB text");
    return static_cast<int>(parse_u64(n.atom.substr(1)));
}

Expr read_term(const SNode& n)
{
    std::uint64_t v;
    if (bv_literal(n, v)) return make_const(v);
    if (!n.is_list) return make_var(var_id(n, 'v'));
    if (n.list.empty() || n.list[0].is_list) throw ParseError("malformed SMT-LIB term");
    const std::string& h = n.list[0].atom;
    if (h == "bvneg" && n.list.size() == 2) return make_unary(Op::Neg, read_term(n.list[1]));
    if ((h == "bvadd" || h == "bvsub" || h == "bvmul") && n.list.size() == 3)
        return make_binary(h == "bvadd" ? Op::Add : h == "bvsub" ? Op::Sub : Op::Mul, read_term(n.list[1]),
                           read_term(n.list[2]));
    if (h == "ite" && n.list.size() == 4) {
        const SNode& c = n.list[1];
        std::uint64_t t = 0, e = 0;
        if (!bv_literal(n.list[2], t) || !bv_literal(n.list[3], e)) throw ParseError("unsupported ite in SMT-LIB term");
        bool swapped = t == 0;
        if (!c.is_list || c.list.empty()) throw ParseError("malformed ite condition");
        const std::string& ch = c.list[0].atom;
        if (swapped) {
            if (ch != "distinct" || c.list.size() != 3) throw ParseError("unsupported ite in SMT-LIB term");
            return make_unary(Op::Not, read_term(c.list[1]));
        }
        if ((ch == "and" || ch == "or") && c.list.size() == 3)
            return make_binary(ch == "and" ? Op::LAnd : Op::LOr, read_term(c.list[1].list.at(1)),
                               read_term(c.list[2].list.at(1)));
        static const std::pair<const char*, Op> cmps[] = {{"=", Op::Eq},      {"distinct", Op::Ne}, {"bvult", Op::Lt},
                                                          {"bvule", Op::Le},  {"bvugt", Op::Gt},    {"bvuge", Op::Ge}};
        for (const auto& [name, op] : cmps)
            if (ch == name && c.list.size() == 3) return make_binary(op, read_term(c.list[1]), read_term(c.list[2]));
    }
    throw ParseError("unsupported SMT-LIB term head " + h);
}

OrderRef read_oref(const SNode& n)
{
    if (is_atom(n, "0")) return {};
    return {var_id(n, 'o')};
}

Node read_node(const SNode& n)
{
    if (is_atom(n, "true")) return f_true();
    if (is_atom(n, "false")) return f_false();
    if (!n.is_list || n.list.empty() || n.list[0].is_list) throw ParseError("malformed SMT-LIB formula");
    const std::string& h = n.list[0].atom;
    auto build = [&](FormulaNode::Kind k) {
        auto r = std::make_shared<FormulaNode>();
        r->kind = k;
        for (std::size_t i = 1; i < n.list.size(); ++i) r->kids.push_back(read_node(n.list[i]));
        return Node(r);
    };
    if (h == "and") return build(FormulaNode::Kind::And);
    if (h == "or") return build(FormulaNode::Kind::Or);
    if (h == "not" && n.list.size() == 2) return build(FormulaNode::Kind::Not);
    if (h == "<" && n.list.size() == 3) {
        auto r = std::make_shared<FormulaNode>();
        r->kind = FormulaNode::Kind::Less;
        r->a = read_oref(n.list[1]);
        r->b = read_oref(n.list[2]);
        return r;
    }
    if ((h == "=" || h == "distinct") && n.list.size() == 3) {
        auto r = std::make_shared<FormulaNode>();
        r->kind = h == "=" ? FormulaNode::Kind::Eq : FormulaNode::Kind::Ne;
        r->lhs = read_term(n.list[1]);
        r->rhs = read_term(n.list[2]);
        return r;
    }
    throw ParseError("unsupported SMT-LIB formula head " + h);
}

} // namespace

std::string emit_smtlib(const Formula& f)
{
    const SymbolTable& st = *f.symbols;
    std::string out = "(set-option :produce-models true)\n(set-logic ALL)\n";
    auto used = used_vars(f.root);
    std::vector<int> orders;
    for (int v : used) {
        out += "; " + st[v].name + "\n";
        if (st[v].kind == VarKind::Order) {
            out += "(declare-fun " + sym(st, v) + " () Int)\n";
            orders.push_back(v);
        } else {
            out += "(declare-fun " + sym(st, v) + " () (_ BitVec " + std::to_string(st.width) + "))\n";
        }
    }
    for (int v : orders) out += "(assert (> " + sym(st, v) + " 0))\n";
    if (orders.size() > 1) {
        out += "(assert (distinct";
        for (int v : orders) out += " " + sym(st, v);
        out += "))\n";
    }
    out += "(assert ";
    emit_node(f.root, st, out);
    out += ")\n(check-sat)\n(get-model)\n";
    return out;
}

Formula parse_smtlib(const std::string& text, SymbolTablePtr symbols)
{
    SReader rd(text);
    const SNode* last = nullptr;
    std::vector<SNode> all;
    while (!rd.at_end()) all.push_back(rd.read());
    for (const auto& n : all)
        if (head_is(n, "assert") && n.list.size() == 2) last = &n.list[1];
    if (!last) throw ParseError("no assertion in SMT-LIB text");
    return {std::move(symbols), read_node(*last)};
}

Model parse_smt_model(const std::string& text, const SymbolTable& symbols)
{
    Model m;
    m.values.assign(symbols.size(), 0);
    SReader rd(text);
    while (!rd.at_end()) {
        SNode n = rd.read();
        std::vector<const SNode*> defs;
        if (head_is(n, "define-fun")) defs.push_back(&n);
        else if (n.is_list)
            for (const auto& k : n.list)
                if (head_is(k, "define-fun")) defs.push_back(&k);
        if (head_is(n, "model"))
            for (const auto& k : n.list)
                if (head_is(k, "define-fun")) defs.push_back(&k);
        for (const SNode* d : defs) {
            if (d->list.size() != 5 || d->list[1].is_list) continue;
            const std::string& name = d->list[1].atom;
            if (name.size() < 2 || (name[0] != 'o' && name[0] != 'v')) continue;
            int id;
            try {
                id = static_cast<int>(std::stoul(name.substr(1)));
            } catch (const std::exception&) {
                continue;
            }
            if (id < 0 || static_cast<std::size_t>(id) >= symbols.size()) continue;
            const SNode& val = d->list[4];
            std::uint64_t u;
            std::int64_t x = 0;
            if (bv_literal(val, u))
                x = static_cast<std::int64_t>(u);
            else if (!val.is_list)
                x = std::stoll(val.atom);
            else if (val.list.size() == 2 && is_atom(val.list[0], "-"))
                x = -std::stoll(val.list[1].atom);
            else
                throw ParseError("unsupported model value for " + name);
            m.values[static_cast<std::size_t>(id)] = x;
        }
    }
    return m;
}

// child process backend

namespace {

std::string resolve_binary(const std::string& requested)
{
    if (!requested.empty()) return requested;
    if (const char* env = std::getenv("VERIFIX_SMT_SOLVER"); env && *env) return env;
    return "z3";
}

bool on_path(const std::string& bin)
{
    if (bin.find('/') != std::string::npos) return access(bin.c_str(), X_OK) == 0;
    const char* path = std::getenv("PATH");
    if (!path) return false;
    std::stringstream ss(path);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
        std::string p = (dir.empty() ? "." : dir) + "/" + bin;
        if (access(p.c_str(), X_OK) == 0) return true;
    }
    return false;
}

struct ProcessOutput {
    bool started = false;
    std::string out;
};

ProcessOutput run_process(const std::vector<std::string>& argv, const std::string& input)
{
    ProcessOutput r;
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0) return r;
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        return r;
    }
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, in_pipe[0], 0);
    posix_spawn_file_actions_adddup2(&fa, out_pipe[1], 1);
    posix_spawn_file_actions_addclose(&fa, in_pipe[1]);
    posix_spawn_file_actions_addclose(&fa, out_pipe[0]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    pid_t pid = 0;
    int rc = posix_spawnp(&pid, args[0], &fa, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    close(in_pipe[0]);
    close(out_pipe[1]);
    if (rc != 0) {
        close(in_pipe[1]);
        close(out_pipe[0]);
        return r;
    }
    r.started = true;
    std::thread writer([fd = in_pipe[1], &input] {
        signal(SIGPIPE, SIG_IGN);
        std::size_t off = 0;
        while (off < input.size()) {
            ssize_t n = write(fd, input.data() + off, input.size() - off);
            if (n <= 0) {
                if (n < 0 && errno == EINTR) continue;
                break;
            }
            off += static_cast<std::size_t>(n);
        }
        close(fd);
    });
    char buf[4096];
    for (;;) {
        ssize_t n = read(out_pipe[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        r.out.append(buf, static_cast<std::size_t>(n));
    }
    close(out_pipe[0]);
    writer.join();
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    return r;
}

} // namespace

SmtProcessSolver::SmtProcessSolver(std::string binary) : binary_(resolve_binary(binary)) {}

bool SmtProcessSolver::available(const std::string& binary) { return on_path(resolve_binary(binary)); }

SolverResult SmtProcessSolver::solve(const Formula& f, const SolverLimits& limits)
{
    SolverResult r;
    std::vector<std::string> argv{binary_, "-in", "-smt2"};
    if (limits.deadline != std::chrono::steady_clock::time_point::max()) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(limits.deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            r.reason = "timeout";
            return r;
        }
        argv.push_back("-t:" + std::to_string(left.count()));
    }
    ProcessOutput po = run_process(argv, emit_smtlib(f));
    if (!po.started) {
        r.reason = "could not start " + binary_;
        return r;
    }
    std::istringstream is(po.out);
    std::string first;
    is >> first;
    if (first == "sat") {
        r.status = SatStatus::Sat;
        std::string rest((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        try {
            r.model = parse_smt_model(rest, *f.symbols);
        } catch (const std::exception& e) {
            r.status = SatStatus::Unknown;
            r.reason = std::string("bad model: ") + e.what();
        }
    } else if (first == "unsat") {
        r.status = SatStatus::Unsat;
    } else {
        r.reason = first.empty() ? "no answer from " + binary_ : first;
    }
    return r;
}

} // namespace verifix
