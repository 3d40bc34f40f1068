#include "verifix/trace.hpp"

#include "verifix/error.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace verifix {

int SymbolTable::add(std::string name, VarKind kind, bool input)
{
    vars.push_back({std::move(name), kind, input});
    return static_cast<int>(vars.size()) - 1;
}

int SymbolTable::find(const std::string& name) const
{
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == name) return static_cast<int>(i);
    return -1;
}

const char* event_kind_name(EventKind k)
{
    switch (k) {
    case EventKind::Read: return "read";
    case EventKind::Write: return "write";
    case EventKind::Lock: return "lock";
    case EventKind::Unlock: return "unlock";
    case EventKind::Spawn: return "spawn";
    case EventKind::Join: return "join";
    case EventKind::Branch: return "branch";
    }
    return "?";
}

bool is_critical(EventKind k) { return k != EventKind::Branch; }

namespace {

const char* site_name(CondSite s)
{
    switch (s) {
    case CondSite::Branch: return "branch";
    case CondSite::Loop: return "loop";
    case CondSite::Deref: return "deref";
    case CondSite::Assert: return "assert";
    }
    return "?";
}

std::vector<std::string> words(const std::string& s)
{
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

std::uint64_t to_u64(const std::string& s, int line)
{
    try {
        std::size_t n = 0;
        auto v = std::stoull(s, &n);
        if (n != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("expected number, got '" + s + "'", line, 1);
    }
}

} // namespace

std::string outcome_to_string(const Outcome& o)
{
    switch (o.kind) {
    case OutcomeKind::Completed: return "completed";
    case OutcomeKind::AssertFailed: return "assertion failure at " + o.label + " in " + o.thread;
    case OutcomeKind::NullDeref: return "null dereference at " + o.label + " in " + o.thread;
    case OutcomeKind::StepLimit: return "step limit reached";
    case OutcomeKind::Blocked: {
        std::string s = "blocked:";
        for (const auto& t : o.blocked) s += " " + t;
        if (!o.deadlock_cycle.empty()) {
            s += " (deadlock:";
            for (const auto& t : o.deadlock_cycle) s += " " + t;
            s += ")";
        }
        return s;
    }
    }
    return "?";
}

std::string prefix_to_string(const PathPrefix& p)
{
    std::string s;
    for (const auto& [t, conds] : p) {
        if (!s.empty()) s += " | ";
        s += t + ":";
        for (const auto& c : conds) s += " " + (c.taken ? c.label : "!" + c.label);
    }
    return s.empty() ? "true" : s;
}

std::string canonical_prefix(const PathPrefix& p)
{
    PathPrefix q;
    for (const auto& [t, c] : p)
        if (!c.empty()) q[t] = c;
    return prefix_to_string(q);
}

bool is_prefix_of(const PathPrefix& pre, const PathPrefix& path)
{
    for (const auto& [t, conds] : pre) {
        if (conds.empty()) continue;
        auto it = path.find(t);
        if (it == path.end() || it->second.size() < conds.size()) return false;
        if (!std::equal(conds.begin(), conds.end(), it->second.begin())) return false;
    }
    return true;
}

std::vector<std::pair<std::string, std::size_t>> ScheduleInput::turns() const
{
    std::vector<std::pair<std::string, std::size_t>> out;
    for (const auto& t : schedule) {
        if (!out.empty() && out.back().first == t)
            ++out.back().second;
        else
            out.emplace_back(t, 1);
    }
    return out;
}

std::string serialize_schedule(const ScheduleInput& si)
{
    std::ostringstream os;
    for (const auto& [k, v] : si.inputs) os << "input " << k << " = " << v << "\n";
    os << "order:";
    for (const auto& t : si.schedule) os << " " << t;
    os << "\n";
    return os.str();
}

ScheduleInput parse_schedule(const std::string& text)
{
    ScheduleInput si;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool seen_order = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        auto w = words(line);
        if (w.empty()) continue;
        if (w[0] == "input") {
            if (w.size() != 4 || w[2] != "=") throw ParseError("expected 'input <name> = <value>'", lineno, 1);
            si.inputs[w[1]] = to_u64(w[3], lineno);
        } else if (w[0] == "order:" || w[0] == "order") {
            seen_order = true;
            std::size_t start = 1;
            if (w[0] == "order") {
                if (w.size() < 2 || w[1] != ":") throw ParseError("expected 'order:'", lineno, 1);
                start = 2;
            }
            for (std::size_t i = start; i < w.size(); ++i) si.schedule.push_back(w[i]);
        } else if (seen_order) {
            for (const auto& t : w) si.schedule.push_back(t);
        } else {
            throw ParseError("unexpected '" + w[0] + "' in schedule", lineno, 1);
        }
    }
    return si;
}

std::uint64_t Trace::initial_value(const std::string& var) const
{
    for (const auto& s : shared)
        if (s.name == var) return s.init;
    throw Error("trace has no initial value for " + var);
}

PathPrefix Trace::path() const
{
    PathPrefix p;
    for (const auto& e : events)
        if (e.kind == EventKind::Branch) p[e.thread].push_back({e.label, e.taken});
    return p;
}

std::vector<std::string> Trace::schedule() const
{
    std::vector<std::string> s;
    for (const auto& e : events)
        if (is_critical(e.kind)) s.push_back(e.thread);
    return s;
}

ScheduleInput Trace::schedule_input() const
{
    ScheduleInput si;
    for (const auto& in : inputs) si.inputs[in.name] = in.value;
    si.schedule = schedule();
    return si;
}

const Event* Trace::find(const std::string& thread, const std::string& label, EventKind kind, unsigned occurrence) const
{
    for (const auto& e : events)
        if (e.thread == thread && e.label == label && e.kind == kind && e.occurrence == occurrence) return &e;
    return nullptr;
}

std::vector<Event> project(const Trace& tr, const std::string& thread)
{
    std::vector<Event> out;
    for (const auto& e : tr.events)
        if (e.thread == thread) out.push_back(e);
    return out;
}

// s-expressions for terms

namespace {

const char* sexpr_op(Op op) { return op == Op::Neg ? "neg" : op_symbol(op); }

void write_sexpr(const Expr& e, std::string& out)
{
    switch (e->kind) {
    case ExprNode::Kind::Const: out += std::to_string(e->value); break;
    case ExprNode::Kind::Var: out += "$" + std::to_string(e->var); break;
    case ExprNode::Kind::Local: out += e->name; break;
    case ExprNode::Kind::Unary:
        out += "(";
        out += sexpr_op(e->op);
        out += " ";
        write_sexpr(e->lhs, out);
        out += ")";
        break;
    case ExprNode::Kind::Binary:
        out += "(";
        out += sexpr_op(e->op);
        out += " ";
        write_sexpr(e->lhs, out);
        out += " ";
        write_sexpr(e->rhs, out);
        out += ")";
        break;
    }
}

struct SexprReader {
    const std::string& s;
    std::size_t i = 0;

    void ws()
    {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }

    std::string atom()
    {
        ws();
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) && s[j] != '(' && s[j] != ')') ++j;
        if (j == i) throw ParseError("malformed term: " + s);
        std::string a = s.substr(i, j - i);
        i = j;
        return a;
    }

    Expr read()
    {
        ws();
        if (i >= s.size()) throw ParseError("malformed term: " + s);
        if (s[i] == '(') {
            ++i;
            std::string op = atom();
            Expr a = read();
            ws();
            if (i < s.size() && s[i] == ')') {
                ++i;
                if (op == "neg") return make_unary(Op::Neg, a);
                if (op == "!") return make_unary(Op::Not, a);
                throw ParseError("unknown unary operator " + op);
            }
            Expr b = read();
            ws();
            if (i >= s.size() || s[i] != ')') throw ParseError("malformed term: " + s);
            ++i;
            static const Op ops[] = {Op::Add, Op::Sub, Op::Mul, Op::Eq, Op::Ne, Op::Lt,
                                     Op::Le, Op::Gt, Op::Ge, Op::LAnd, Op::LOr};
            for (Op o : ops)
                if (op == op_symbol(o)) return make_binary(o, a, b);
            throw ParseError("unknown binary operator " + op);
        }
        std::string a = atom();
        if (a[0] == '$') return make_var(static_cast<int>(to_u64(a.substr(1), 0)));
        if (std::isdigit(static_cast<unsigned char>(a[0]))) return make_const(to_u64(a, 0));
        return make_local(a);
    }
};

} // namespace

std::string term_to_sexpr(const Expr& e)
{
    std::string out;
    if (e) write_sexpr(e, out);
    return out;
}

Expr parse_term_sexpr(const std::string& text)
{
    SexprReader r{text};
    Expr e = r.read();
    r.ws();
    if (r.i != text.size()) throw ParseError("trailing text after term: " + text);
    return e;
}

// trace files

std::string serialize_trace(const Trace& tr)
{
    std::ostringstream os;
    os << "verifix-trace 1\n";
    os << "width " << tr.symbols.width << "\n";
    for (const auto& s : tr.shared) os << "shared " << s.name << " " << s.init << "\n";
    for (std::size_t i = 0; i < tr.symbols.vars.size(); ++i) {
        const auto& v = tr.symbols.vars[i];
        os << "var " << i << " " << (v.kind == VarKind::Order ? "order" : "value") << " " << v.name
           << (v.input ? " input" : "") << "\n";
    }
    for (const auto& in : tr.inputs) os << "input " << in.name << " " << in.var << " " << in.value << "\n";
    const Outcome& o = tr.outcome;
    os << "outcome ";
    switch (o.kind) {
    case OutcomeKind::Completed: os << "completed"; break;
    case OutcomeKind::StepLimit: os << "step_limit"; break;
    case OutcomeKind::AssertFailed: os << "assert_failed " << o.thread << " " << o.label; break;
    case OutcomeKind::NullDeref: os << "null_deref " << o.thread << " " << o.label; break;
    case OutcomeKind::Blocked:
        os << "blocked";
        for (const auto& t : o.blocked) os << " " << t;
        if (!o.deadlock_cycle.empty()) {
            os << " cycle";
            for (const auto& t : o.deadlock_cycle) os << " " << t;
        }
        break;
    }
    os << "\n";
    if (tr.divergence) os << "divergence " << *tr.divergence << "\n";
    if (tr.prefix_mismatch) os << "mismatch " << *tr.prefix_mismatch << "\n";
    if (tr.bound_hits) os << "bound_hits " << tr.bound_hits << "\n";
    if (!tr.truncated.empty()) {
        os << "truncated";
        for (const auto& t : tr.truncated) os << " " << t;
        os << "\n";
    }
    for (const auto& e : tr.events) {
        os << "event " << e.index << " " << e.thread << " " << event_kind_name(e.kind) << " " << e.label << " "
           << (e.target.empty() ? "-" : e.target) << " " << (e.kind == EventKind::Branch ? (e.taken ? 1 : 0) : e.value);
        if (e.occurrence != 1) os << " occ=" << e.occurrence;
        if (e.order_var >= 0) os << " o=" << e.order_var;
        if (e.value_var >= 0) os << " v=" << e.value_var;
        if (e.pre_var >= 0) os << " pre=" << e.pre_var;
        if (e.kind == EventKind::Branch) os << " site=" << site_name(e.site);
        if (e.term) os << " | " << term_to_sexpr(e.term);
        os << "\n";
    }
    return os.str();
}

Trace parse_trace(const std::string& text)
{
    Trace tr;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string term_text;
        if (auto bar = line.find('|'); bar != std::string::npos) {
            term_text = line.substr(bar + 1);
            line.resize(bar);
        }
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        auto w = words(line);
        if (w.empty()) continue;
        auto need = [&](std::size_t n) {
            if (w.size() < n) throw ParseError("too few fields for '" + w[0] + "'", lineno, 1);
        };
        if (w[0] == "verifix-trace") {
            header = true;
            continue;
        }
        if (!header) throw ParseError("missing trace header", lineno, 1);
        if (w[0] == "width") {
            need(2);
            tr.symbols.width = static_cast<unsigned>(to_u64(w[1], lineno));
        } else if (w[0] == "shared") {
            need(3);
            tr.shared.push_back({w[1], to_u64(w[2], lineno)});
        } else if (w[0] == "var") {
            need(4);
            auto id = to_u64(w[1], lineno);
            if (id != tr.symbols.vars.size()) throw ParseError("variables must be listed in id order", lineno, 1);
            VarKind k;
            if (w[2] == "order")
                k = VarKind::Order;
            else if (w[2] == "value")
                k = VarKind::Value;
            else
                throw ParseError("unknown variable kind " + w[2], lineno, 1);
            tr.symbols.add(w[3], k, w.size() > 4 && w[4] == "input");
        } else if (w[0] == "input") {
            need(4);
            tr.inputs.push_back({w[1], static_cast<int>(to_u64(w[2], lineno)), to_u64(w[3], lineno)});
        } else if (w[0] == "outcome") {
            need(2);
            Outcome o;
            if (w[1] == "completed") {
                o.kind = OutcomeKind::Completed;
            } else if (w[1] == "step_limit") {
                o.kind = OutcomeKind::StepLimit;
            } else if (w[1] == "assert_failed" || w[1] == "null_deref") {
                need(4);
                o.kind = w[1] == "assert_failed" ? OutcomeKind::AssertFailed : OutcomeKind::NullDeref;
                o.thread = w[2];
                o.label = w[3];
            } else if (w[1] == "blocked") {
                o.kind = OutcomeKind::Blocked;
                bool cyc = false;
                for (std::size_t i = 2; i < w.size(); ++i) {
                    if (w[i] == "cycle")
                        cyc = true;
                    else
                        (cyc ? o.deadlock_cycle : o.blocked).push_back(w[i]);
                }
            } else {
                throw ParseError("unknown outcome " + w[1], lineno, 1);
            }
            tr.outcome = o;
        } else if (w[0] == "divergence") {
            need(2);
            tr.divergence = to_u64(w[1], lineno);
        } else if (w[0] == "mismatch") {
            need(2);
            tr.prefix_mismatch = to_u64(w[1], lineno);
        } else if (w[0] == "truncated") {
            tr.truncated.insert(w.begin() + 1, w.end());
        } else if (w[0] == "bound_hits") {
            need(2);
            tr.bound_hits = static_cast<unsigned>(to_u64(w[1], lineno));
        } else if (w[0] == "event") {
            need(7);
            Event e;
            e.index = to_u64(w[1], lineno);
            if (e.index != tr.events.size() + 1) throw ParseError("event indices must be consecutive from 1", lineno, 1);
            e.thread = w[2];
            static const EventKind kinds[] = {EventKind::Read, EventKind::Write, EventKind::Lock, EventKind::Unlock,
                                              EventKind::Spawn, EventKind::Join, EventKind::Branch};
            bool ok = false;
            for (auto k : kinds)
                if (w[3] == event_kind_name(k)) {
                    e.kind = k;
                    ok = true;
                }
            if (!ok) throw ParseError("unknown event kind " + w[3], lineno, 1);
            e.label = w[4];
            e.target = w[5] == "-" ? "" : w[5];
            e.value = to_u64(w[6], lineno);
            if (e.kind == EventKind::Branch) {
                e.taken = e.value != 0;
                e.value = 0;
            }
            for (std::size_t i = 7; i < w.size(); ++i) {
                auto eq = w[i].find('=');
                if (eq == std::string::npos) throw ParseError("expected key=value, got " + w[i], lineno, 1);
                std::string k = w[i].substr(0, eq), v = w[i].substr(eq + 1);
                if (k == "o")
                    e.order_var = static_cast<int>(to_u64(v, lineno));
                else if (k == "v")
                    e.value_var = static_cast<int>(to_u64(v, lineno));
                else if (k == "pre")
                    e.pre_var = static_cast<int>(to_u64(v, lineno));
                else if (k == "occ")
                    e.occurrence = static_cast<unsigned>(to_u64(v, lineno));
                else if (k == "site") {
                    if (v == "branch") e.site = CondSite::Branch;
                    else if (v == "loop") e.site = CondSite::Loop;
                    else if (v == "deref") e.site = CondSite::Deref;
                    else if (v == "assert") e.site = CondSite::Assert;
                    else throw ParseError("unknown site " + v, lineno, 1);
                } else
                    throw ParseError("unknown event field " + k, lineno, 1);
            }
            if (!term_text.empty()) e.term = parse_term_sexpr(term_text.substr(term_text.find_first_not_of(' ')));
            auto check_var = [&](int id) {
                if (id >= static_cast<int>(tr.symbols.size()))
                    throw ParseError("event refers to unknown variable " + std::to_string(id), lineno, 1);
            };
            check_var(e.order_var);
            check_var(e.value_var);
            check_var(e.pre_var);
            if (is_critical(e.kind) && e.order_var < 0) throw ParseError("critical event without order variable", lineno, 1);
            if (e.kind == EventKind::Branch && !e.term) throw ParseError("branch event without condition", lineno, 1);
            tr.events.push_back(std::move(e));
        } else {
            throw ParseError("unknown trace line '" + w[0] + "'", lineno, 1);
        }
    }
    if (!header) throw ParseError("missing trace header");
    return tr;
}

} // namespace verifix
