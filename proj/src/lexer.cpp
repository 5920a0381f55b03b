#include "lexer.hpp"

namespace datoc::detail {

const char* tok_name(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Int: return "integer";
    case Tok::Float: return "float";
    case Tok::String: return "string";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::Lt: return "'<'";
    case Tok::Gt: return "'>'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::Semi: return "';'";
    case Tok::At: return "'@'";
    case Tok::Assign: return "'='";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Dot: return "'.'";
    case Tok::Eof: return "end of input";
    case Tok::Error: return "invalid character";
  }
  return "?";
}

std::vector<Token> lex(const std::string& text, const std::string& filename) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto span_at = [&](int len) {
    SourceSpan s;
    s.file = filename;
    s.line = line;
    s.col = col;
    s.length = len;
    return s;
  };
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n && i < text.size(); ++k) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };

  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
      size_t j = i;
      while (j < text.size() &&
             ((text[j] >= 'a' && text[j] <= 'z') || (text[j] >= 'A' && text[j] <= 'Z') ||
              (text[j] >= '0' && text[j] <= '9') || text[j] == '_'))
        ++j;
      Token t;
      t.kind = Tok::Ident;
      t.text = text.substr(i, j - i);
      t.span = span_at(static_cast<int>(j - i));
      out.push_back(std::move(t));
      advance(j - i);
      continue;
    }
    if (c >= '0' && c <= '9') {
      size_t j = i;
      bool is_float = false;
      while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
      if (j < text.size() && text[j] == '.' && j + 1 < text.size() && text[j + 1] >= '0' &&
          text[j + 1] <= '9') {
        is_float = true;
        ++j;
        while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
      }
      Token t;
      t.text = text.substr(i, j - i);
      t.span = span_at(static_cast<int>(j - i));
      if (is_float) {
        t.kind = Tok::Float;
        t.fval = std::stod(t.text);
      } else {
        t.kind = Tok::Int;
        t.ival = std::stoll(t.text);
      }
      out.push_back(std::move(t));
      advance(j - i);
      continue;
    }
    if (c == '"') {
      size_t j = i + 1;
      while (j < text.size() && text[j] != '"' && text[j] != '\n') ++j;
      if (j >= text.size() || text[j] != '"') {
        Token t;
        t.kind = Tok::Error;
        t.text = "unterminated string";
        t.span = span_at(1);
        out.push_back(std::move(t));
        return out;
      }
      Token t;
      t.kind = Tok::String;
      t.text = text.substr(i + 1, j - i - 1);
      t.span = span_at(static_cast<int>(j - i + 1));
      out.push_back(std::move(t));
      advance(j - i + 1);
      continue;
    }
    Tok k;
    switch (c) {
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case '[': k = Tok::LBracket; break;
      case ']': k = Tok::RBracket; break;
      case '{': k = Tok::LBrace; break;
      case '}': k = Tok::RBrace; break;
      case '<': k = Tok::Lt; break;
      case '>': k = Tok::Gt; break;
      case ',': k = Tok::Comma; break;
      case ':': k = Tok::Colon; break;
      case ';': k = Tok::Semi; break;
      case '@': k = Tok::At; break;
      case '=': k = Tok::Assign; break;
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '*': k = Tok::Star; break;
      case '/': k = Tok::Slash; break;
      case '.': k = Tok::Dot; break;
      default: {
        Token t;
        t.kind = Tok::Error;
        t.text = std::string(1, c);
        t.span = span_at(1);
        out.push_back(std::move(t));
        return out;
      }
    }
    Token t;
    t.kind = k;
    t.text = std::string(1, c);
    t.span = span_at(1);
    out.push_back(std::move(t));
    advance(1);
  }
  Token eof;
  eof.kind = Tok::Eof;
  eof.span = span_at(0);
  out.push_back(std::move(eof));
  return out;
}

}  // namespace datoc::detail
