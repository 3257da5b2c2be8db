#pragma once

// The integer-machine modeling language: straight-line programs with writes
// and a two-way comparison branch, over a memory of integer cells. A program
// induces a server model whose loop body writes the internal choice to !0 and
// the query to !1, runs the program, and answers with the value left in !1.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mbt/qac.hpp"
#include "mbt/util.hpp"

namespace mbt::prog {

using Address = std::uint32_t;

enum class BinOp { Add, Sub, Mul, Div };

struct SExp {
    enum class Kind { Const, Read, Bin };
    Kind kind = Kind::Const;
    Value constant = 0;                  // Kind::Const
    Address src = 0;                     // Kind::Read
    BinOp op = BinOp::Add;               // Kind::Bin
    std::shared_ptr<const SExp> lhs, rhs;

    static SExp k(Value v);
    static SExp read(Address a);
    static SExp bin(BinOp op, SExp lhs, SExp rhs);
};

struct Prog {
    enum class Kind { Return, Write, IfLe };
    Kind kind = Kind::Return;
    Address dst = 0;                       // Write
    std::shared_ptr<const SExp> expr;      // Write source
    std::shared_ptr<const SExp> cl, cr;    // IfLe guard sides
    std::shared_ptr<const Prog> next;      // Write continuation
    std::shared_ptr<const Prog> then_, else_;

    static Prog ret();
    static Prog write(Address dst, SExp e, Prog rest);
    static Prog ifle(SExp l, SExp r, Prog then_branch, Prog else_branch);
};

// Total map address -> integer, default 0. Grows on demand; equality is
// extensional (trailing zero cells are irrelevant).
class Memory {
  public:
    Memory() = default;

    Value read(Address a) const { return a < cells_.size() ? cells_[a] : 0; }

    void write(Address a, Value v) {
        if (a >= cells_.size()) cells_.resize(a + 1, 0);
        cells_[a] = v;
    }

    bool operator==(const Memory& other) const;

    const std::vector<Value>& cells() const { return cells_; }

  private:
    std::vector<Value> cells_;
};

// Structural evaluation; Read(k) yields s!k. Throws DivByZero.
Value sexp_eval(const SExp& e, const Memory& s);

// Runs the program over the memory. Throws DivByZero.
Memory eval(const Prog& p, const Memory& s);

// Largest address mentioned anywhere in the program (reads, writes, guards),
// but at least 1 so the choice/query cells always exist.
Address max_address(const Prog& p);

// True iff every division in the program has a nonzero constant divisor.
bool division_is_safe(const Prog& p);

qac::ServerModel server_of(const Prog& p);

// --- surface syntax -------------------------------------------------------
//
//   prog  := stmt (sep stmt)*            sep is ';' or newline
//   stmt  := "return"
//          | "!" nat ":=" expr
//          | "if" expr "<=" expr "then" prog "else" prog "end"
//   expr  := usual arithmetic over integer literals, "!" nat, + - * /
//            with * / binding tighter than + -, parentheses allowed
//
// A missing trailing "return" is implied. Comments run from '#' to the end
// of the line.

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

Prog parse_program(const std::string& text);

std::string print_program(const Prog& p);
std::string print_sexp(const SExp& e);

// The compare-and-reset example model: stores its data in !2, answers 0 when
// the query is no greater than the data, else answers 1 and resets the data
// to the internal choice.
Prog cmp_rst_program();

}  // namespace mbt::prog
