#include "mbt/prog.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace mbt::prog {

SExp SExp::k(Value v) {
    SExp e;
    e.kind = Kind::Const;
    e.constant = v;
    return e;
}

SExp SExp::read(Address a) {
    SExp e;
    e.kind = Kind::Read;
    e.src = a;
    return e;
}

SExp SExp::bin(BinOp op, SExp lhs, SExp rhs) {
    SExp e;
    e.kind = Kind::Bin;
    e.op = op;
    e.lhs = std::make_shared<const SExp>(std::move(lhs));
    e.rhs = std::make_shared<const SExp>(std::move(rhs));
    return e;
}

Prog Prog::ret() {
    return Prog{};
}

Prog Prog::write(Address dst, SExp e, Prog rest) {
    Prog p;
    p.kind = Kind::Write;
    p.dst = dst;
    p.expr = std::make_shared<const SExp>(std::move(e));
    p.next = std::make_shared<const Prog>(std::move(rest));
    return p;
}

Prog Prog::ifle(SExp l, SExp r, Prog then_branch, Prog else_branch) {
    Prog p;
    p.kind = Kind::IfLe;
    p.cl = std::make_shared<const SExp>(std::move(l));
    p.cr = std::make_shared<const SExp>(std::move(r));
    p.then_ = std::make_shared<const Prog>(std::move(then_branch));
    p.else_ = std::make_shared<const Prog>(std::move(else_branch));
    return p;
}

bool Memory::operator==(const Memory& other) const {
    const auto n = std::max(cells_.size(), other.cells_.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (read(static_cast<Address>(i)) != other.read(static_cast<Address>(i))) return false;
    }
    return true;
}

Value sexp_eval(const SExp& e, const Memory& s) {
    switch (e.kind) {
        case SExp::Kind::Const: return e.constant;
        case SExp::Kind::Read: return s.read(e.src);
        case SExp::Kind::Bin: {
            const Value l = sexp_eval(*e.lhs, s);
            const Value r = sexp_eval(*e.rhs, s);
            switch (e.op) {
                case BinOp::Add: return wrap_add(l, r);
                case BinOp::Sub: return wrap_sub(l, r);
                case BinOp::Mul: return wrap_mul(l, r);
                case BinOp::Div: return checked_div(l, r);
            }
        }
    }
    return 0;
}

Memory eval(const Prog& p, const Memory& s) {
    const Prog* cur = &p;
    Memory m = s;
    for (;;) {
        switch (cur->kind) {
            case Prog::Kind::Return: return m;
            case Prog::Kind::Write: {
                m.write(cur->dst, sexp_eval(*cur->expr, m));
                cur = cur->next.get();
                break;
            }
            case Prog::Kind::IfLe: {
                const Value l = sexp_eval(*cur->cl, m);
                const Value r = sexp_eval(*cur->cr, m);
                cur = (l <= r) ? cur->then_.get() : cur->else_.get();
                break;
            }
        }
    }
}

namespace {

void max_address_sexp(const SExp& e, Address& acc) {
    switch (e.kind) {
        case SExp::Kind::Const: return;
        case SExp::Kind::Read: acc = std::max(acc, e.src); return;
        case SExp::Kind::Bin:
            max_address_sexp(*e.lhs, acc);
            max_address_sexp(*e.rhs, acc);
            return;
    }
}

void max_address_prog(const Prog& p, Address& acc) {
    switch (p.kind) {
        case Prog::Kind::Return: return;
        case Prog::Kind::Write:
            acc = std::max(acc, p.dst);
            max_address_sexp(*p.expr, acc);
            max_address_prog(*p.next, acc);
            return;
        case Prog::Kind::IfLe:
            max_address_sexp(*p.cl, acc);
            max_address_sexp(*p.cr, acc);
            max_address_prog(*p.then_, acc);
            max_address_prog(*p.else_, acc);
            return;
    }
}

bool division_safe_sexp(const SExp& e) {
    switch (e.kind) {
        case SExp::Kind::Const:
        case SExp::Kind::Read: return true;
        case SExp::Kind::Bin:
            if (e.op == BinOp::Div &&
                (e.rhs->kind != SExp::Kind::Const || e.rhs->constant == 0)) {
                return false;
            }
            return division_safe_sexp(*e.lhs) && division_safe_sexp(*e.rhs);
    }
    return true;
}

}  // namespace

Address max_address(const Prog& p) {
    Address acc = 1;
    max_address_prog(p, acc);
    return acc;
}

bool division_is_safe(const Prog& p) {
    switch (p.kind) {
        case Prog::Kind::Return: return true;
        case Prog::Kind::Write:
            return division_safe_sexp(*p.expr) && division_is_safe(*p.next);
        case Prog::Kind::IfLe:
            return division_safe_sexp(*p.cl) && division_safe_sexp(*p.cr) &&
                   division_is_safe(*p.then_) && division_is_safe(*p.else_);
    }
    return true;
}

qac::ServerModel server_of(const Prog& p) {
    auto body = std::make_shared<const Prog>(p);
    qac::ServerModel m;
    m.state = Memory{};
    m.step = [body](Value q, Value c, const std::any& state) -> std::pair<Value, std::any> {
        Memory s = std::any_cast<Memory>(state);
        s.write(0, c);
        s.write(1, q);
        Memory out = eval(*body, s);
        return {out.read(1), std::move(out)};
    };
    return m;
}

// --- parser -----------------------------------------------------------------

namespace {

struct Token {
    enum class Kind { Int, Bang, Assign, If, Then, Else, End, Return, Le, Op, LParen, RParen, Sep, Eof };
    Kind kind;
    Value number = 0;
    char op = 0;
    std::size_t line = 0;
};

class Lexer {
  public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

  private:
    void advance() {
        // Collapse runs of separators into one.
        bool saw_sep = false;
        for (;;) {
            while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
            if (pos_ < text_.size() && text_[pos_] == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            }
            if (pos_ < text_.size() && (text_[pos_] == '\n' || text_[pos_] == ';')) {
                if (text_[pos_] == '\n') ++line_;
                saw_sep = true;
                ++pos_;
                continue;
            }
            break;
        }
        if (saw_sep) {
            tok_ = Token{Token::Kind::Sep, 0, 0, line_};
            return;
        }
        if (pos_ >= text_.size()) {
            tok_ = Token{Token::Kind::Eof, 0, 0, line_};
            return;
        }
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t end = pos_;
            while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
            tok_ = Token{Token::Kind::Int, std::stoll(text_.substr(pos_, end - pos_)), 0, line_};
            pos_ = end;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t end = pos_;
            while (end < text_.size() && std::isalpha(static_cast<unsigned char>(text_[end]))) ++end;
            const std::string word = text_.substr(pos_, end - pos_);
            pos_ = end;
            if (word == "if") tok_ = Token{Token::Kind::If, 0, 0, line_};
            else if (word == "then") tok_ = Token{Token::Kind::Then, 0, 0, line_};
            else if (word == "else") tok_ = Token{Token::Kind::Else, 0, 0, line_};
            else if (word == "end") tok_ = Token{Token::Kind::End, 0, 0, line_};
            else if (word == "return") tok_ = Token{Token::Kind::Return, 0, 0, line_};
            else throw ParseError("line " + std::to_string(line_ + 1) + ": unknown keyword '" + word + "'");
            return;
        }
        switch (c) {
            case '!': tok_ = Token{Token::Kind::Bang, 0, 0, line_}; ++pos_; return;
            case '(': tok_ = Token{Token::Kind::LParen, 0, 0, line_}; ++pos_; return;
            case ')': tok_ = Token{Token::Kind::RParen, 0, 0, line_}; ++pos_; return;
            case '+': case '-': case '*': case '/':
                tok_ = Token{Token::Kind::Op, 0, c, line_};
                ++pos_;
                return;
            case ':':
                if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '=') {
                    tok_ = Token{Token::Kind::Assign, 0, 0, line_};
                    pos_ += 2;
                    return;
                }
                break;
            case '<':
                if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '=') {
                    tok_ = Token{Token::Kind::Le, 0, 0, line_};
                    pos_ += 2;
                    return;
                }
                break;
            default: break;
        }
        throw ParseError("line " + std::to_string(line_ + 1) + ": unexpected character '" + std::string(1, c) + "'");
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
    Token tok_{};
};

class Parser {
  public:
    explicit Parser(const std::string& text) : lex_(text) {}

    Prog parse() {
        skip_seps();
        Prog p = parse_seq();
        skip_seps();
        expect(Token::Kind::Eof, "end of input");
        return p;
    }

  private:
    void skip_seps() {
        while (lex_.peek().kind == Token::Kind::Sep) lex_.take();
    }

    [[noreturn]] void fail(const std::string& msg) {
        throw ParseError("line " + std::to_string(lex_.peek().line + 1) + ": " + msg);
    }

    void expect(Token::Kind k, const std::string& what) {
        if (lex_.peek().kind != k) fail("expected " + what);
        lex_.take();
    }

    bool at_seq_end() {
        const auto k = lex_.peek().kind;
        return k == Token::Kind::Eof || k == Token::Kind::Else || k == Token::Kind::End;
    }

    Prog parse_seq() {
        skip_seps();
        if (at_seq_end()) return Prog::ret();  // implied return
        if (lex_.peek().kind == Token::Kind::Return) {
            lex_.take();
            skip_seps();
            return Prog::ret();
        }
        if (lex_.peek().kind == Token::Kind::Bang) {
            lex_.take();
            if (lex_.peek().kind != Token::Kind::Int) fail("expected address after '!'");
            const Address dst = static_cast<Address>(lex_.take().number);
            expect(Token::Kind::Assign, "':='");
            SExp e = parse_expr();
            Prog rest = parse_seq();
            return Prog::write(dst, std::move(e), std::move(rest));
        }
        if (lex_.peek().kind == Token::Kind::If) {
            lex_.take();
            SExp l = parse_expr();
            expect(Token::Kind::Le, "'<='");
            SExp r = parse_expr();
            skip_seps();
            expect(Token::Kind::Then, "'then'");
            Prog then_branch = parse_seq();
            expect(Token::Kind::Else, "'else'");
            Prog else_branch = parse_seq();
            expect(Token::Kind::End, "'end'");
            skip_seps();
            if (!at_seq_end()) fail("statements after 'end' are not supported; branches must return");
            return Prog::ifle(std::move(l), std::move(r), std::move(then_branch), std::move(else_branch));
        }
        fail("expected statement");
    }

    SExp parse_expr() {
        SExp acc = parse_term();
        while (lex_.peek().kind == Token::Kind::Op &&
               (lex_.peek().op == '+' || lex_.peek().op == '-')) {
            const char op = lex_.take().op;
            SExp rhs = parse_term();
            acc = SExp::bin(op == '+' ? BinOp::Add : BinOp::Sub, std::move(acc), std::move(rhs));
        }
        return acc;
    }

    SExp parse_term() {
        SExp acc = parse_atom();
        while (lex_.peek().kind == Token::Kind::Op &&
               (lex_.peek().op == '*' || lex_.peek().op == '/')) {
            const char op = lex_.take().op;
            SExp rhs = parse_atom();
            acc = SExp::bin(op == '*' ? BinOp::Mul : BinOp::Div, std::move(acc), std::move(rhs));
        }
        return acc;
    }

    SExp parse_atom() {
        const auto& t = lex_.peek();
        switch (t.kind) {
            case Token::Kind::Int: return SExp::k(lex_.take().number);
            case Token::Kind::Op:
                if (t.op == '-') {  // unary minus
                    lex_.take();
                    if (lex_.peek().kind == Token::Kind::Int) return SExp::k(-lex_.take().number);
                    return SExp::bin(BinOp::Sub, SExp::k(0), parse_atom());
                }
                fail("unexpected operator");
            case Token::Kind::Bang: {
                lex_.take();
                if (lex_.peek().kind != Token::Kind::Int) fail("expected address after '!'");
                return SExp::read(static_cast<Address>(lex_.take().number));
            }
            case Token::Kind::LParen: {
                lex_.take();
                SExp e = parse_expr();
                expect(Token::Kind::RParen, "')'");
                return e;
            }
            default: fail("expected expression");
        }
    }

    Lexer lex_;
};

void print_sexp_to(const SExp& e, std::ostream& out, int parent_prec) {
    switch (e.kind) {
        case SExp::Kind::Const: out << e.constant; return;
        case SExp::Kind::Read: out << '!' << e.src; return;
        case SExp::Kind::Bin: {
            const int prec = (e.op == BinOp::Add || e.op == BinOp::Sub) ? 1 : 2;
            const char* sym = e.op == BinOp::Add ? " + " : e.op == BinOp::Sub ? " - "
                              : e.op == BinOp::Mul ? " * " : " / ";
            const bool paren = prec < parent_prec;
            if (paren) out << '(';
            print_sexp_to(*e.lhs, out, prec);
            out << sym;
            print_sexp_to(*e.rhs, out, prec + 1);  // left-associative
            if (paren) out << ')';
            return;
        }
    }
}

void print_prog_to(const Prog& p, std::ostream& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    switch (p.kind) {
        case Prog::Kind::Return: out << pad << "return\n"; return;
        case Prog::Kind::Write:
            out << pad << '!' << p.dst << " := ";
            print_sexp_to(*p.expr, out, 0);
            out << '\n';
            print_prog_to(*p.next, out, indent);
            return;
        case Prog::Kind::IfLe:
            out << pad << "if ";
            print_sexp_to(*p.cl, out, 0);
            out << " <= ";
            print_sexp_to(*p.cr, out, 0);
            out << " then\n";
            print_prog_to(*p.then_, out, indent + 1);
            out << pad << "else\n";
            print_prog_to(*p.else_, out, indent + 1);
            out << pad << "end\n";
            return;
    }
}

}  // namespace

Prog parse_program(const std::string& text) {
    return Parser(text).parse();
}

std::string print_program(const Prog& p) {
    std::ostringstream out;
    print_prog_to(p, out, 0);
    return out.str();
}

std::string print_sexp(const SExp& e) {
    std::ostringstream out;
    print_sexp_to(e, out, 0);
    return out.str();
}

Prog cmp_rst_program() {
    return Prog::ifle(SExp::read(1), SExp::read(2),
                      Prog::write(1, SExp::k(0), Prog::ret()),
                      Prog::write(1, SExp::k(1), Prog::write(2, SExp::read(0), Prog::ret())));
}

}  // namespace mbt::prog
