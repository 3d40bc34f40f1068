#include "verifix/program.hpp"

#include "verifix/error.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace verifix {

bool operator==(const PatchOp& a, const PatchOp& b)
{
    return a.kind == b.kind && a.lock == b.lock && a.label == b.label && a.before == b.before && a.anchor == b.anchor;
}

namespace {

std::vector<std::string> split_ws(const std::string& line)
{
    std::string s = line;
    for (char& c : s)
        if (c == '(' || c == ')' || c == ',') c = ' ';
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string w;
    while (is >> w) out.push_back(w);
    return out;
}

std::string strip_comment(const std::string& line)
{
    auto pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

} // namespace

FixPatch parse_patch(const std::string& text)
{
    FixPatch f;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto w = split_ws(strip_comment(line));
        if (w.empty()) continue;
        PatchOp op;
        auto where = [&](std::size_t i) {
            if (i + 1 >= w.size() || (w[i] != "before" && w[i] != "after"))
                throw ParseError("expected 'before <label>' or 'after <label>'", lineno, 1);
            op.before = w[i] == "before";
            op.anchor = w[i + 1];
            if (i + 2 != w.size()) throw ParseError("trailing text in patch line", lineno, 1);
        };
        if (w[0] == "insert" && w.size() >= 3 && (w[1] == "lock" || w[1] == "unlock")) {
            op.kind = w[1] == "lock" ? PatchOpKind::InsertLock : PatchOpKind::InsertUnlock;
            op.lock = w[2];
            where(3);
        } else if (w[0] == "remove" && w.size() == 2) {
            op.kind = PatchOpKind::RemoveSync;
            op.label = w[1];
        } else if (w[0] == "move" && w.size() >= 2) {
            op.kind = PatchOpKind::MoveSync;
            op.label = w[1];
            where(2);
        } else {
            throw ParseError("unrecognised patch operation '" + w[0] + "'", lineno, 1);
        }
        f.ops.push_back(std::move(op));
    }
    return f;
}

std::string print_patch(const FixPatch& f)
{
    std::ostringstream os;
    for (const auto& op : f.ops) {
        switch (op.kind) {
        case PatchOpKind::InsertLock:
        case PatchOpKind::InsertUnlock:
            os << "insert " << (op.kind == PatchOpKind::InsertLock ? "lock(" : "unlock(") << op.lock << ") "
               << (op.before ? "before " : "after ") << op.anchor << "\n";
            break;
        case PatchOpKind::RemoveSync: os << "remove " << op.label << "\n"; break;
        case PatchOpKind::MoveSync:
            os << "move " << op.label << (op.before ? " before " : " after ") << op.anchor << "\n";
            break;
        }
    }
    return os.str();
}

namespace {

struct Loc {
    Block* block = nullptr;
    std::size_t index = 0;
};

bool locate(Block& b, const std::string& label, Loc& out)
{
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i].label == label) {
            out = {&b, i};
            return true;
        }
        if (locate(b[i].then_body, label, out) || locate(b[i].else_body, label, out)) return true;
    }
    return false;
}

bool locate(Program& p, const std::string& label, Loc& out)
{
    for (auto& t : p.threads)
        if (locate(t.body, label, out)) return true;
    return false;
}

bool derived_from(const std::string& label, const std::string& anchor, bool before)
{
    if (before) {
        if (label.size() <= anchor.size() || label.compare(label.size() - anchor.size(), anchor.size(), anchor) != 0)
            return false;
        return std::all_of(label.begin(), label.end() - static_cast<long>(anchor.size()), [](char c) { return c == '\''; });
    }
    if (label.size() <= anchor.size() || label.compare(0, anchor.size(), anchor) != 0) return false;
    return std::all_of(label.begin() + static_cast<long>(anchor.size()), label.end(), [](char c) { return c == '\''; });
}

std::string fresh_label(const Program& p, const std::string& anchor, bool before)
{
    std::string l = anchor;
    do {
        l = before ? "'" + l : l + "'";
    } while (p.find_label(l));
    return l;
}

void insert_at(Program& p, Stmt s, const std::string& anchor, bool before)
{
    Loc loc;
    if (!locate(p, anchor, loc)) throw PatchError("unknown anchor label " + anchor);
    std::size_t at = before ? loc.index : loc.index + 1;
    loc.block->insert(loc.block->begin() + static_cast<long>(at), std::move(s));
}

using HeldSet = std::set<std::string>;
using States = std::set<HeldSet>;

States flow(const Block& b, States in, const std::string& tid, std::set<std::string>& warn)
{
    for (const auto& s : b) {
        switch (s.kind) {
        case StmtKind::Lock: {
            States next;
            for (auto h : in) {
                if (h.count(s.target))
                    warn.insert("thread " + tid + " may acquire " + s.target + " twice at " + s.label);
                h.insert(s.target);
                next.insert(std::move(h));
            }
            in = std::move(next);
            break;
        }
        case StmtKind::Unlock: {
            States next;
            for (auto h : in) {
                if (!h.erase(s.target))
                    warn.insert("unlock of " + s.target + " at " + s.label + " without a matching lock on some path");
                next.insert(std::move(h));
            }
            in = std::move(next);
            break;
        }
        case StmtKind::Branch: {
            States a = flow(s.then_body, in, tid, warn);
            States c = flow(s.else_body, in, tid, warn);
            a.insert(c.begin(), c.end());
            in = std::move(a);
            break;
        }
        case StmtKind::Loop: {
            States a = flow(s.then_body, in, tid, warn);
            in.insert(a.begin(), a.end());
            break;
        }
        default:
            break;
        }
    }
    return in;
}

} // namespace

std::vector<std::string> lock_balance_warnings(const Program& p)
{
    std::set<std::string> warn;
    for (const auto& t : p.threads) {
        States end = flow(t.body, States{HeldSet{}}, t.id, warn);
        for (const auto& h : end)
            for (const auto& l : h) warn.insert("thread " + t.id + " may finish while holding " + l);
    }
    return {warn.begin(), warn.end()};
}

PatchResult apply_fix(const Program& p, const FixPatch& f)
{
    for (std::size_t i = 0; i < f.ops.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (f.ops[i] == f.ops[j]) throw PatchError("repeated edit in patch: " + print_patch(FixPatch{{f.ops[i]}}));

    PatchResult r;
    r.program = p;
    Program& q = r.program;
    for (const auto& op : f.ops) {
        switch (op.kind) {
        case PatchOpKind::InsertLock:
        case PatchOpKind::InsertUnlock: {
            if (!q.has_lock(op.lock)) throw PatchError("undeclared lock " + op.lock);
            Loc loc;
            if (!locate(q, op.anchor, loc)) throw PatchError("unknown anchor label " + op.anchor);
            Stmt s;
            s.kind = op.kind == PatchOpKind::InsertLock ? StmtKind::Lock : StmtKind::Unlock;
            s.target = op.lock;
            const Block& b = *loc.block;
            std::size_t probe = op.before ? loc.index : loc.index + 1;
            if (op.before ? probe > 0 : probe < b.size()) {
                const Stmt& n = op.before ? b[probe - 1] : b[probe];
                if (n.kind == s.kind && n.target == s.target && derived_from(n.label, op.anchor, op.before))
                    throw PatchError("edit already applied at " + op.anchor);
            }
            s.label = fresh_label(q, op.anchor, op.before);
            insert_at(q, std::move(s), op.anchor, op.before);
            break;
        }
        case PatchOpKind::RemoveSync:
        case PatchOpKind::MoveSync: {
            Loc loc;
            if (!locate(q, op.label, loc)) throw PatchError("unknown label " + op.label);
            Stmt s = (*loc.block)[loc.index];
            if (s.kind != StmtKind::Lock && s.kind != StmtKind::Unlock)
                throw PatchError("statement " + op.label + " is not a lock or unlock");
            loc.block->erase(loc.block->begin() + static_cast<long>(loc.index));
            if (op.kind == PatchOpKind::MoveSync) insert_at(q, std::move(s), op.anchor, op.before);
            break;
        }
        }
    }
    auto before = lock_balance_warnings(p);
    for (auto& w : lock_balance_warnings(q))
        if (std::find(before.begin(), before.end(), w) == before.end()) r.warnings.push_back(w);
    return r;
}

AtomicRegionSpec parse_region_spec(const std::string& text)
{
    AtomicRegionSpec s;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_comment(line);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (split_ws(line).empty()) continue;
            throw ParseError("expected key = value", lineno, 1);
        }
        auto key = split_ws(line.substr(0, eq));
        auto vals = split_ws(line.substr(eq + 1));
        if (key.size() != 1) throw ParseError("bad key", lineno, 1);
        if (key[0] == "thread") {
            if (vals.size() != 1) throw ParseError("thread takes one value", lineno, 1);
            s.thread = vals[0];
        } else if (key[0] == "unit") {
            s.unit = vals;
        } else if (key[0] == "locations") {
            s.locations = vals;
        } else if (key[0] == "pattern") {
            if (vals.size() != 1) throw ParseError("pattern takes one value", lineno, 1);
            if (vals[0] != "any") {
                int k = 0;
                try {
                    k = std::stoi(vals[0]);
                } catch (const std::exception&) {
                    throw ParseError("pattern must be 1..7 or any", lineno, 1);
                }
                if (k < 1 || k > 7) throw ParseError("pattern must be 1..7 or any", lineno, 1);
                s.pattern = k;
            }
        } else {
            throw ParseError("unknown key " + key[0], lineno, 1);
        }
    }
    if (s.thread.empty()) throw ParseError("region spec needs a thread");
    if (s.unit.empty()) throw ParseError("region spec needs a unit");
    if (s.locations.empty()) throw ParseError("region spec needs locations");
    return s;
}

std::string print_region_spec(const AtomicRegionSpec& s)
{
    std::ostringstream os;
    os << "thread = " << s.thread << "\nunit =";
    for (const auto& u : s.unit) os << " " << u;
    os << "\nlocations =";
    for (const auto& l : s.locations) os << " " << l;
    os << "\npattern = " << (s.pattern ? std::to_string(*s.pattern) : std::string("any")) << "\n";
    return os.str();
}

} // namespace verifix
