#include "verifix/program.hpp"

#include "verifix/error.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace verifix {

const char* stmt_kind_name(StmtKind k)
{
    switch (k) {
    case StmtKind::Lock: return "lock";
    case StmtKind::Unlock: return "unlock";
    case StmtKind::ReadShared: return "read";
    case StmtKind::WriteShared: return "write";
    case StmtKind::Deref: return "deref";
    case StmtKind::Assign: return "assign";
    case StmtKind::Branch: return "branch";
    case StmtKind::Loop: return "loop";
    case StmtKind::Spawn: return "spawn";
    case StmtKind::Join: return "join";
    case StmtKind::ReadInput: return "input";
    case StmtKind::Assert: return "assert";
    }
    return "?";
}

bool is_critical(StmtKind k)
{
    switch (k) {
    case StmtKind::Lock:
    case StmtKind::Unlock:
    case StmtKind::ReadShared:
    case StmtKind::WriteShared:
    case StmtKind::Deref:
    case StmtKind::Spawn:
    case StmtKind::Join:
        return true;
    default:
        return false;
    }
}

const SharedVar* Program::find_shared(const std::string& name) const
{
    for (const auto& v : shared)
        if (v.name == name) return &v;
    return nullptr;
}

const ThreadDef* Program::find_thread(const std::string& id) const
{
    for (const auto& t : threads)
        if (t.id == id) return &t;
    return nullptr;
}

int Program::thread_index(const std::string& id) const
{
    for (std::size_t i = 0; i < threads.size(); ++i)
        if (threads[i].id == id) return static_cast<int>(i);
    return -1;
}

bool Program::has_lock(const std::string& name) const
{
    for (const auto& l : locks)
        if (l == name) return true;
    return false;
}

bool Program::has_input(const std::string& name) const
{
    for (const auto& i : inputs)
        if (i.name == name) return true;
    return false;
}

namespace {

template <class F>
void walk(const Block& b, F&& f)
{
    for (const auto& s : b) {
        f(s);
        walk(s.then_body, f);
        walk(s.else_body, f);
    }
}

const Stmt* find_in(const Block& b, const std::string& label)
{
    for (const auto& s : b) {
        if (s.label == label) return &s;
        if (auto* r = find_in(s.then_body, label)) return r;
        if (auto* r = find_in(s.else_body, label)) return r;
    }
    return nullptr;
}

} // namespace

std::vector<std::string> Program::initial_threads() const
{
    std::set<std::string> spawned;
    for (const auto& t : threads)
        walk(t.body, [&](const Stmt& s) {
            if (s.kind == StmtKind::Spawn) spawned.insert(s.target);
        });
    std::vector<std::string> out;
    if (find_thread(entry)) out.push_back(entry);
    for (const auto& t : threads)
        if (t.id != entry && !spawned.count(t.id)) out.push_back(t.id);
    return out;
}

const Stmt* Program::find_label(const std::string& label, std::string* thread) const
{
    for (const auto& t : threads) {
        if (auto* s = find_in(t.body, label)) {
            if (thread) *thread = t.id;
            return s;
        }
    }
    return nullptr;
}

bool operator==(const Stmt& a, const Stmt& b)
{
    return a.label == b.label && a.kind == b.kind && a.target == b.target && a.local == b.local &&
           expr_equal(a.expr, b.expr) && a.then_body == b.then_body && a.else_body == b.else_body;
}

bool operator==(const SharedVar& a, const SharedVar& b)
{
    return a.name == b.name && a.is_ref == b.is_ref && a.width == b.width && a.init == b.init;
}

bool operator==(const InputDecl& a, const InputDecl& b) { return a.name == b.name && a.width == b.width; }
bool operator==(const ThreadDef& a, const ThreadDef& b) { return a.id == b.id && a.body == b.body; }

bool operator==(const Program& a, const Program& b)
{
    return a.width == b.width && a.shared == b.shared && a.locks == b.locks && a.inputs == b.inputs &&
           a.threads == b.threads && a.entry == b.entry;
}

// Lexer

namespace {

enum class Tok { Word, Number, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 0;
    int col = 0;
};

bool word_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '.';
}

std::vector<Token> lex(const std::string& src)
{
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto adv = [&](std::size_t n) {
        for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            adv(1);
            continue;
        }
        if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
            while (i < src.size() && src[i] != '\n') adv(1);
            continue;
        }
        Token t;
        t.line = line;
        t.col = col;
        if (word_char(c)) {
            std::size_t j = i;
            while (j < src.size() && word_char(src[j])) ++j;
            t.text = src.substr(i, j - i);
            bool digits = true;
            for (char d : t.text)
                if (!std::isdigit(static_cast<unsigned char>(d))) digits = false;
            t.kind = digits ? Tok::Number : Tok::Word;
            adv(j - i);
            out.push_back(std::move(t));
            continue;
        }
        static const char* two[] = {"==", "!=", "<=", ">=", "&&", "||"};
        t.kind = Tok::Punct;
        bool matched = false;
        for (const char* p : two) {
            if (src.compare(i, 2, p) == 0) {
                t.text = p;
                adv(2);
                matched = true;
                break;
            }
        }
        if (!matched) {
            if (std::string("{}():,;=<>+-*!").find(c) == std::string::npos)
                throw ParseError(std::string("unexpected character '") + c + "'", line, col);
            t.text = std::string(1, c);
            adv(1);
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::End;
    end.line = line;
    end.col = col;
    out.push_back(end);
    return out;
}

bool is_ident(const std::string& s)
{
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

class Parser {
public:
    explicit Parser(const std::string& src) : toks_(lex(src)) {}

    Program program()
    {
        Program p;
        std::optional<unsigned> width;
        std::vector<std::size_t> refs;
        while (peek().kind != Tok::End) {
            Token t = next();
            if (t.text == "width") {
                width = static_cast<unsigned>(number());
            } else if (t.text == "shared") {
                SharedVar v;
                v.name = ident();
                expect(":");
                type(v.is_ref, v.width);
                if (accept("=")) {
                    if (accept_word("null"))
                        v.init = 0;
                    else
                        v.init = number();
                }
                if (!v.is_ref && !width) width = v.width;
                if (v.is_ref) refs.push_back(p.shared.size());
                p.shared.push_back(std::move(v));
            } else if (t.text == "lock") {
                p.locks.push_back(ident());
                while (accept(",")) p.locks.push_back(ident());
            } else if (t.text == "input") {
                InputDecl d;
                d.name = ident();
                expect(":");
                bool is_ref = false;
                type(is_ref, d.width);
                if (is_ref) fail("inputs must have an integer type", t);
                if (!width) width = d.width;
                p.inputs.push_back(std::move(d));
            } else if (t.text == "main") {
                p.entry = ident();
            } else if (t.text == "thread") {
                ThreadDef td;
                td.id = ident();
                expect("{");
                td.body = block();
                p.threads.push_back(std::move(td));
            } else {
                fail("expected a declaration, got '" + t.text + "'", t);
            }
        }
        p.width = width.value_or(8);
        for (auto i : refs) p.shared[i].width = p.width;
        if (p.entry.empty() && !p.threads.empty()) p.entry = p.threads.front().id;
        return p;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;

    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    Token next()
    {
        Token t = peek();
        if (pos_ < toks_.size() - 1) ++pos_;
        return t;
    }

    [[noreturn]] void fail(const std::string& msg, const Token& t) { throw ParseError(msg, t.line, t.col); }

    bool accept(const char* p)
    {
        if (peek().kind == Tok::Punct && peek().text == p) {
            next();
            return true;
        }
        return false;
    }

    bool accept_word(const char* w)
    {
        if (peek().kind == Tok::Word && peek().text == w) {
            next();
            return true;
        }
        return false;
    }

    void expect(const char* p)
    {
        if (!accept(p)) {
            const Token& t = peek();
            fail(std::string("expected '") + p + "', got '" + (t.kind == Tok::End ? "end of input" : t.text) + "'", t);
        }
    }

    std::string ident()
    {
        Token t = next();
        if (t.kind != Tok::Word || !is_ident(t.text)) fail("expected identifier, got '" + t.text + "'", t);
        return t.text;
    }

    std::uint64_t number()
    {
        Token t = next();
        if (t.kind != Tok::Number) fail("expected number, got '" + t.text + "'", t);
        try {
            return std::stoull(t.text);
        } catch (const std::exception&) {
            fail("number out of range", t);
        }
    }

    void type(bool& is_ref, unsigned& width)
    {
        Token t = next();
        if (t.text == "ref") {
            is_ref = true;
            return;
        }
        if (t.text.rfind("int", 0) == 0 && t.text.size() > 3) {
            try {
                width = static_cast<unsigned>(std::stoul(t.text.substr(3)));
            } catch (const std::exception&) {
                fail("bad type '" + t.text + "'", t);
            }
            if (width == 0 || width > 32) fail("unsupported width in '" + t.text + "'", t);
            return;
        }
        fail("expected type, got '" + t.text + "'", t);
    }

    Block block()
    {
        Block b;
        while (!accept("}")) {
            if (peek().kind == Tok::End) fail("unterminated block", peek());
            b.push_back(stmt());
            accept(";");
        }
        return b;
    }

    Stmt stmt()
    {
        Token lt = next();
        if (lt.kind != Tok::Word && lt.kind != Tok::Number) fail("expected statement label, got '" + lt.text + "'", lt);
        Stmt s;
        s.label = lt.text;
        expect(":");
        Token t = peek();
        if (t.kind != Tok::Word) fail("expected statement, got '" + t.text + "'", t);
        if (t.text == "lock" || t.text == "unlock") {
            next();
            s.kind = t.text == "lock" ? StmtKind::Lock : StmtKind::Unlock;
            expect("(");
            s.target = ident();
            expect(")");
        } else if (t.text == "write") {
            next();
            s.kind = StmtKind::WriteShared;
            expect("(");
            s.target = ident();
            expect(",");
            s.expr = expr();
            expect(")");
        } else if (t.text == "spawn" || t.text == "join") {
            next();
            s.kind = t.text == "spawn" ? StmtKind::Spawn : StmtKind::Join;
            s.target = ident();
        } else if (t.text == "assert") {
            next();
            s.kind = StmtKind::Assert;
            expect("(");
            s.expr = expr();
            expect(")");
        } else if (t.text == "branch" || t.text == "loop") {
            next();
            s.kind = t.text == "branch" ? StmtKind::Branch : StmtKind::Loop;
            expect("(");
            s.expr = expr();
            expect(")");
            expect("{");
            s.then_body = block();
            if (s.kind == StmtKind::Branch && accept_word("else")) {
                expect("{");
                s.else_body = block();
            }
        } else {
            s.local = ident();
            expect("=");
            const Token& f = peek();
            if (f.kind == Tok::Word && peek(1).kind == Tok::Punct && peek(1).text == "(" &&
                (f.text == "read" || f.text == "deref" || f.text == "input")) {
                std::string fn = next().text;
                expect("(");
                s.target = ident();
                expect(")");
                s.kind = fn == "read" ? StmtKind::ReadShared : fn == "deref" ? StmtKind::Deref : StmtKind::ReadInput;
            } else {
                s.kind = StmtKind::Assign;
                s.expr = expr();
            }
        }
        return s;
    }

    static int prec(const std::string& op)
    {
        if (op == "||") return 1;
        if (op == "&&") return 2;
        if (op == "==" || op == "!=") return 3;
        if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
        if (op == "+" || op == "-") return 5;
        if (op == "*") return 6;
        return 0;
    }

    static Op binop(const std::string& s)
    {
        static const std::map<std::string, Op> m = {
            {"+", Op::Add}, {"-", Op::Sub}, {"*", Op::Mul}, {"==", Op::Eq}, {"!=", Op::Ne},
            {"<", Op::Lt},  {"<=", Op::Le}, {">", Op::Gt},  {">=", Op::Ge}, {"&&", Op::LAnd},
            {"||", Op::LOr},
        };
        return m.at(s);
    }

    Expr expr(int min_prec = 1)
    {
        Expr lhs = unary();
        for (;;) {
            const Token& t = peek();
            int p = t.kind == Tok::Punct ? prec(t.text) : 0;
            if (p < min_prec || p == 0) break;
            std::string op = next().text;
            Expr rhs = expr(p + 1);
            lhs = make_binary(binop(op), lhs, rhs);
        }
        return lhs;
    }

    Expr unary()
    {
        if (accept("!")) return make_unary(Op::Not, unary());
        if (accept("-")) return make_unary(Op::Neg, unary());
        if (accept("(")) {
            Expr e = expr();
            expect(")");
            return e;
        }
        Token t = next();
        if (t.kind == Tok::Number) {
            try {
                return make_const(std::stoull(t.text));
            } catch (const std::exception&) {
                fail("number out of range", t);
            }
        }
        if (t.kind == Tok::Word && t.text == "null") return make_const(0);
        if (t.kind == Tok::Word && is_ident(t.text)) return make_local(t.text);
        fail("expected expression, got '" + (t.kind == Tok::End ? std::string("end of input") : t.text) + "'", t);
    }
};

void print_block(const Block& b, int indent, std::ostringstream& os)
{
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    for (const auto& s : b) {
        os << pad << s.label << ": ";
        switch (s.kind) {
        case StmtKind::Lock: os << "lock(" << s.target << ")"; break;
        case StmtKind::Unlock: os << "unlock(" << s.target << ")"; break;
        case StmtKind::ReadShared: os << s.local << " = read(" << s.target << ")"; break;
        case StmtKind::Deref: os << s.local << " = deref(" << s.target << ")"; break;
        case StmtKind::ReadInput: os << s.local << " = input(" << s.target << ")"; break;
        case StmtKind::WriteShared: os << "write(" << s.target << ", " << expr_to_string(s.expr) << ")"; break;
        case StmtKind::Assign: os << s.local << " = " << expr_to_string(s.expr); break;
        case StmtKind::Spawn: os << "spawn " << s.target; break;
        case StmtKind::Join: os << "join " << s.target; break;
        case StmtKind::Assert: os << "assert(" << expr_to_string(s.expr) << ")"; break;
        case StmtKind::Branch:
        case StmtKind::Loop:
            os << (s.kind == StmtKind::Branch ? "branch (" : "loop (") << expr_to_string(s.expr) << ") {\n";
            print_block(s.then_body, indent + 1, os);
            os << pad << "}";
            if (s.kind == StmtKind::Branch && !s.else_body.empty()) {
                os << " else {\n";
                print_block(s.else_body, indent + 1, os);
                os << pad << "}";
            }
            break;
        }
        os << "\n";
    }
}

} // namespace

Program parse_program(const std::string& text, ParseOptions opts)
{
    Parser ps(text);
    Program p = ps.program();
    if (opts.validate) {
        auto diags = validate(p);
        if (!diags.empty()) {
            std::string msg = diags.front().message;
            if (!diags.front().label.empty()) msg += " (statement " + diags.front().label + ")";
            throw ParseError(msg);
        }
    }
    return p;
}

std::string print_program(const Program& p)
{
    std::ostringstream os;
    os << "width " << p.width << "\n";
    for (const auto& v : p.shared) {
        os << "shared " << v.name << " : ";
        if (v.is_ref)
            os << "ref = " << (v.init == 0 ? std::string("null") : std::to_string(v.init));
        else
            os << "int" << v.width << " = " << v.init;
        os << "\n";
    }
    for (const auto& l : p.locks) os << "lock " << l << "\n";
    for (const auto& i : p.inputs) os << "input " << i.name << " : int" << i.width << "\n";
    if (!p.entry.empty()) os << "main " << p.entry << "\n";
    for (const auto& t : p.threads) {
        os << "\nthread " << t.id << " {\n";
        print_block(t.body, 1, os);
        os << "}\n";
    }
    return os.str();
}

std::vector<Diagnostic> validate(const Program& p)
{
    std::vector<Diagnostic> out;
    auto add = [&](std::string msg, std::string label = {}) { out.push_back({std::move(msg), std::move(label)}); };

    if (p.threads.empty()) add("program has no threads");
    if (!p.entry.empty() && !p.find_thread(p.entry)) add("undeclared entry thread " + p.entry);

    std::set<std::string> names;
    for (const auto& v : p.shared)
        if (!names.insert(v.name).second) add("duplicate declaration of " + v.name);
    for (const auto& l : p.locks)
        if (!names.insert(l).second) add("duplicate declaration of " + l);
    for (const auto& i : p.inputs)
        if (!names.insert(i.name).second) add("duplicate declaration of " + i.name);
    std::set<std::string> tids;
    for (const auto& t : p.threads)
        if (!tids.insert(t.id).second) add("duplicate thread " + t.id);

    for (const auto& v : p.shared)
        if (!v.is_ref && v.width != p.width) add("mixed value widths: " + v.name + " is int" + std::to_string(v.width));
    for (const auto& i : p.inputs)
        if (i.width != p.width) add("mixed value widths: " + i.name + " is int" + std::to_string(i.width));

    std::map<std::string, int> spawn_count;
    std::set<std::string> labels;
    for (const auto& t : p.threads) {
        walk(t.body, [&](const Stmt& s) {
            if (s.label.empty()) add("statement without label");
            else if (!labels.insert(s.label).second) add("duplicate label " + s.label, s.label);
            if (s.kind == StmtKind::Spawn) ++spawn_count[s.target];
        });
    }

    for (const auto& t : p.threads) {
        walk(t.body, [&](const Stmt& s) {
            switch (s.kind) {
            case StmtKind::Lock:
            case StmtKind::Unlock:
                if (!p.has_lock(s.target)) add("undeclared lock " + s.target, s.label);
                break;
            case StmtKind::ReadShared:
            case StmtKind::WriteShared:
            case StmtKind::Deref: {
                const SharedVar* v = p.find_shared(s.target);
                if (!v) add("undeclared variable " + s.target, s.label);
                else if (s.kind == StmtKind::Deref && !v->is_ref)
                    add("deref of non-reference variable " + s.target, s.label);
                break;
            }
            case StmtKind::ReadInput:
                if (!p.has_input(s.target)) add("undeclared input " + s.target, s.label);
                break;
            case StmtKind::Spawn:
                if (!p.find_thread(s.target)) add("undeclared thread " + s.target, s.label);
                else if (s.target == p.entry) add("spawn of entry thread " + s.target, s.label);
                else if (s.target == t.id) add("thread spawns itself", s.label);
                else if (spawn_count[s.target] > 1) add("thread " + s.target + " spawned more than once", s.label);
                break;
            case StmtKind::Join:
                if (!p.find_thread(s.target)) add("undeclared thread " + s.target, s.label);
                else if (!spawn_count.count(s.target)) add("join of unspawned thread " + s.target, s.label);
                else if (s.target == t.id) add("thread joins itself", s.label);
                break;
            default:
                break;
            }
            if (!s.local.empty() && (p.find_shared(s.local) || p.has_input(s.local) || p.has_lock(s.local)))
                add("local " + s.local + " shadows a declaration", s.label);
            if (s.expr) {
                std::vector<const ExprNode*> stack{s.expr.get()};
                while (!stack.empty()) {
                    const ExprNode* e = stack.back();
                    stack.pop_back();
                    if (e->kind == ExprNode::Kind::Local &&
                        (p.find_shared(e->name) || p.has_input(e->name) || p.has_lock(e->name)))
                        add("expression uses " + e->name + " directly; read it into a local first", s.label);
                    if (e->lhs) stack.push_back(e->lhs.get());
                    if (e->rhs) stack.push_back(e->rhs.get());
                }
            }
        });
    }
    return out;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace verifix
