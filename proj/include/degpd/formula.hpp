#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "degpd/errors.hpp"

// Formula grammar for covariate-dependent distribution parameters:
//
//   param ~ 1
//   param ~ s(name) + s(name, k=INT) + ...
//
// Parameters come from {kappa, delta, kappa1, kappa2, p, sigma, xi, pi}.
// An intercept is always present; "1" just means intercept-only. Several
// statements may be joined with ';'. Parameters not mentioned stay
// intercept-only.

namespace degpd {

struct SmoothTermSpec {
  std::string covariate;
  int n_basis = 10;
};

struct ParamFormula {
  std::string param;
  std::vector<SmoothTermSpec> smooths;
};

struct GamFormula {
  std::vector<ParamFormula> parts;

  const ParamFormula* find(const std::string& param) const {
    for (const auto& p : parts)
      if (p.param == param) return &p;
    return nullptr;
  }

  bool any_smooth() const {
    for (const auto& p : parts)
      if (!p.smooths.empty()) return true;
    return false;
  }
};

namespace detail {

class FormulaLexer {
 public:
  explicit FormulaLexer(const std::string& s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
            s_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ == start) throw ConfigError("formula: expected identifier near '" + rest() + "'");
    return s_.substr(start, pos_ - start);
  }

  int integer() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ == start) throw ConfigError("formula: expected integer near '" + rest() + "'");
    return std::stoi(s_.substr(start, pos_ - start));
  }

  bool done() {
    skip_ws();
    return pos_ >= s_.size();
  }

  std::string rest() const { return s_.substr(pos_); }

 private:
  std::string s_;
  std::size_t pos_ = 0;
};

inline ParamFormula parse_one(const std::string& text) {
  FormulaLexer lex(text);
  ParamFormula out;
  out.param = lex.ident();
  if (!lex.eat('~'))
    throw ConfigError("formula: expected '~' in '" + text + "'");
  bool first = true;
  while (!lex.done()) {
    if (!first && !lex.eat('+'))
      throw ConfigError("formula: expected '+' near '" + lex.rest() + "'");
    first = false;
    if (lex.peek() == '1') {
      lex.eat('1');  // explicit intercept; nothing to add
      continue;
    }
    const std::string fn = lex.ident();
    if (fn != "s")
      throw ConfigError("formula: only s(...) smooth terms are supported, got '" + fn + "'");
    if (!lex.eat('(')) throw ConfigError("formula: expected '(' after s");
    SmoothTermSpec term;
    term.covariate = lex.ident();
    if (lex.eat(',')) {
      const std::string key = lex.ident();
      if (key != "k") throw ConfigError("formula: unknown s() option '" + key + "'");
      if (!lex.eat('=')) throw ConfigError("formula: expected '=' after k");
      term.n_basis = lex.integer();
      if (term.n_basis < 4) throw ConfigError("formula: k must be at least 4");
    }
    if (!lex.eat(')')) throw ConfigError("formula: expected ')' in '" + text + "'");
    out.smooths.push_back(term);
  }
  return out;
}

}  // namespace detail

/// Parse one or more ';'-separated formula statements.
inline GamFormula parse_formula(const std::string& text) {
  GamFormula out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(';', start);
    if (end == std::string::npos) end = text.size();
    std::string piece = text.substr(start, end - start);
    bool blank = true;
    for (char c : piece)
      if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    if (!blank) {
      ParamFormula pf = detail::parse_one(piece);
      if (out.find(pf.param))
        throw ConfigError("formula: parameter '" + pf.param + "' specified twice");
      out.parts.push_back(std::move(pf));
    }
    start = end + 1;
  }
  return out;
}

}  // namespace degpd
