// Internal lexer for the .dato grammar.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datoc/diag.hpp"

namespace datoc::detail {

enum class Tok {
  Ident, Int, Float, String,
  LParen, RParen, LBracket, RBracket, LBrace, RBrace,
  Lt, Gt, Comma, Colon, Semi, At, Assign,
  Plus, Minus, Star, Slash, Dot,
  Eof, Error,
};

struct Token {
  Tok kind = Tok::Eof;
  std::string text;
  std::int64_t ival = 0;
  double fval = 0.0;
  SourceSpan span;
};

// Tokenizes the whole input. "//" starts a line comment. On a bad character
// emits a single Error token at that position and stops.
std::vector<Token> lex(const std::string& text, const std::string& filename);

const char* tok_name(Tok t);

}  // namespace datoc::detail
