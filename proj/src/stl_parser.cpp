#include <cctype>
#include <cmath>

#include "agc/stl.hpp"

namespace agc::stl {

// Recursive descent over:
//   expr   := until ('&' until)*
//   until  := unary ('U' interval? unary)?
//   unary  := '!' unary | ('G'|'F') interval? unary | atom
//   atom   := '(' expr ')' | 'true' | predicate
//   pred   := ident cmp number | 'abs' '(' ident ')' cmp number
//   cmp    := '>=' | '<='
//   interval := '[' number ',' (number | 'inf') ']'
namespace {

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  Formula parse() {
    Formula f = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing input");
    return f;
  }

 private:
  const std::string& s_;
  size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  bool accept(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }

  void expect(char c, const char* what) {
    if (!accept(c)) fail(std::string("expected '") + c + "' " + what);
  }

  bool accept_word(const std::string& w) {
    skip_ws();
    if (s_.compare(pos_, w.size(), w) != 0) return false;
    const size_t end = pos_ + w.size();
    if (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
      return false;  // longer identifier, not this keyword
    pos_ = end;
    return true;
  }

  double number() {
    skip_ws();
    if (accept_word("inf")) return kInf;
    const size_t start = pos_;
    size_t consumed = 0;
    double v = 0;
    try {
      v = std::stod(s_.substr(pos_), &consumed);
    } catch (const std::exception&) {
      fail("expected number");
    }
    pos_ = start + consumed;
    return v;
  }

  std::string ident() {
    skip_ws();
    const size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    if (pos_ == start) fail("expected identifier");
    return s_.substr(start, pos_ - start);
  }

  Interval interval_or_default() {
    if (!peek('[')) return Interval(0.0, kInf);
    ++pos_;
    const double a = number();
    expect(',', "in interval");
    const double b = number();
    expect(']', "closing interval");
    if (!(a >= 0.0) || !(b >= a)) fail("invalid interval bounds");
    return Interval(a, b);
  }

  Cmp cmp_token() {
    skip_ws();
    if (s_.compare(pos_, 2, ">=") == 0) {
      pos_ += 2;
      return Cmp::Ge;
    }
    if (s_.compare(pos_, 2, "<=") == 0) {
      pos_ += 2;
      return Cmp::Le;
    }
    fail("expected '>=' or '<='");
  }

  Formula atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (accept('(')) {
      Formula f = expr();
      expect(')', "closing group");
      return f;
    }
    if (accept_word("true")) return Formula::tautology();
    if (accept_word("abs")) {
      expect('(', "after abs");
      std::string sig = ident();
      expect(')', "after abs argument");
      const Cmp c = cmp_token();
      const double thr = number();
      if (!std::isfinite(thr)) fail("abs threshold must be finite");
      return Formula::abs_pred(std::move(sig), c, thr);
    }
    std::string sig = ident();
    const Cmp c = cmp_token();
    const double thr = number();
    if (!std::isfinite(thr)) fail("threshold must be finite");
    return Formula::pred(std::move(sig), c, thr);
  }

  Formula unary() {
    skip_ws();
    if (accept('!')) return Formula::negate(unary());
    if (accept_word("G")) {
      const Interval itv = interval_or_default();
      return Formula::always(itv, unary());
    }
    if (accept_word("F")) {
      const Interval itv = interval_or_default();
      return Formula::eventually(itv, unary());
    }
    return atom();
  }

  Formula until_level() {
    Formula lhs = unary();
    if (accept_word("U")) {
      const Interval itv = interval_or_default();
      Formula rhs = unary();
      return Formula::until(std::move(lhs), itv, std::move(rhs));
    }
    return lhs;
  }

  Formula expr() {
    Formula f = until_level();
    while (accept('&')) f = Formula::conj(std::move(f), until_level());
    return f;
  }
};

}  // namespace

Formula parse_formula(const std::string& text) { return Parser(text).parse(); }

}  // namespace agc::stl
