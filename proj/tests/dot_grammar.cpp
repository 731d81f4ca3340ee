#include "dot_grammar.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace dot {
namespace {

enum class Tok { id, lbrace, rbrace, lbracket, rbracket, equals, semicolon, comma, colon, edgeop, end };

struct Token {
  Tok kind;
  std::string text;
  bool keyword = false;  // bare identifier matching a reserved word
  int line = 0;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool is_keyword(const std::string& s) {
  static const std::set<std::string> kw{"strict", "graph", "digraph", "node", "edge", "subgraph"};
  return kw.contains(lower(s));
}

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return ident_start(c) || std::isdigit(c); }

class Lexer {
 public:
  explicit Lexer(const std::string& s) : s_(s) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space_and_comments();
      if (i_ >= s_.size()) break;
      out.push_back(next());
    }
    out.push_back({Tok::end, "", false, line_});
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError("line " + std::to_string(line_) + ": " + what);
  }

  void skip_space_and_comments() {
    while (i_ < s_.size()) {
      const char c = s_[i_];
      if (c == '\n') {
        ++line_;
        ++i_;
        at_line_start_ = true;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++i_;
      } else if (c == '#' && at_line_start_) {
        while (i_ < s_.size() && s_[i_] != '\n') ++i_;
      } else if (s_.compare(i_, 2, "//") == 0) {
        while (i_ < s_.size() && s_[i_] != '\n') ++i_;
      } else if (s_.compare(i_, 2, "/*") == 0) {
        const auto end = s_.find("*/", i_ + 2);
        if (end == std::string::npos) fail("unterminated comment");
        line_ += static_cast<int>(std::count(s_.begin() + static_cast<std::ptrdiff_t>(i_),
                                             s_.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
        i_ = end + 2;
        at_line_start_ = false;
      } else {
        break;
      }
    }
  }

  Token next() {
    at_line_start_ = false;
    const int line = line_;
    const char c = s_[i_];
    auto single = [&](Tok t) {
      ++i_;
      return Token{t, std::string(1, c), false, line};
    };
    switch (c) {
      case '{': return single(Tok::lbrace);
      case '}': return single(Tok::rbrace);
      case '[': return single(Tok::lbracket);
      case ']': return single(Tok::rbracket);
      case '=': return single(Tok::equals);
      case ';': return single(Tok::semicolon);
      case ',': return single(Tok::comma);
      case ':': return single(Tok::colon);
      case '"': return quoted();
      case '<': return html();
      default: break;
    }
    if (s_.compare(i_, 2, "--") == 0 || s_.compare(i_, 2, "->") == 0) {
      i_ += 2;
      return {Tok::edgeop, s_.substr(i_ - 2, 2), false, line};
    }
    if (c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) return numeral();
    if (ident_start(static_cast<unsigned char>(c))) {
      const std::size_t start = i_;
      while (i_ < s_.size() && ident_char(static_cast<unsigned char>(s_[i_]))) ++i_;
      std::string text = s_.substr(start, i_ - start);
      const bool kw = is_keyword(text);
      return {Tok::id, std::move(text), kw, line};
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  Token quoted() {
    const int line = line_;
    std::string text;
    ++i_;
    for (;;) {
      if (i_ >= s_.size()) fail("unterminated string");
      const char c = s_[i_++];
      if (c == '"') break;
      if (c == '\\' && i_ < s_.size()) {
        const char e = s_[i_++];
        if (e == '\n') {
          ++line_;
          continue;  // line continuation
        }
        if (e == '"') {
          text += '"';
          continue;
        }
        text += '\\';
        text += e;
        continue;
      }
      if (c == '\n') ++line_;
      text += c;
    }
    // "a" + "b" concatenation
    const std::size_t save = i_;
    const int save_line = line_;
    skip_space_and_comments();
    if (i_ < s_.size() && s_[i_] == '+') {
      ++i_;
      skip_space_and_comments();
      if (i_ >= s_.size() || s_[i_] != '"') fail("'+' must join two quoted strings");
      text += quoted().text;
    } else {
      i_ = save;
      line_ = save_line;
    }
    return {Tok::id, std::move(text), false, line};
  }

  Token html() {
    const int line = line_;
    const std::size_t start = i_;
    int depth = 0;
    do {
      if (i_ >= s_.size()) fail("unterminated HTML string");
      if (s_[i_] == '<') ++depth;
      if (s_[i_] == '>') --depth;
      if (s_[i_] == '\n') ++line_;
      ++i_;
    } while (depth > 0);
    return {Tok::id, s_.substr(start, i_ - start), false, line};
  }

  Token numeral() {
    const int line = line_;
    const std::size_t start = i_;
    if (s_[i_] == '-') ++i_;
    std::size_t digits = 0;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_, ++digits;
    if (i_ < s_.size() && s_[i_] == '.') {
      ++i_;
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_, ++digits;
    }
    if (digits == 0) fail("malformed numeral");
    if (i_ < s_.size() && ident_start(static_cast<unsigned char>(s_[i_])))
      fail("numeral immediately followed by an identifier: " + s_.substr(start, i_ - start + 1));
    return {Tok::id, s_.substr(start, i_ - start), false, line};
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_ = 1;
  bool at_line_start_ = true;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

  Graph run() {
    if (is_kw("strict")) {
      g_.strict = true;
      ++p_;
    }
    if (is_kw("graph")) {
      g_.directed = false;
    } else if (is_kw("digraph")) {
      g_.directed = true;
    } else {
      fail("expected 'graph' or 'digraph'");
    }
    ++p_;
    if (peek().kind == Tok::id && !peek().keyword) g_.id = t_[p_++].text;
    expect(Tok::lbrace, "'{'");
    stmt_list();
    expect(Tok::rbrace, "'}'");
    if (peek().kind != Tok::end) fail("content after the closing brace");
    return g_;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return t_[std::min(p_ + ahead, t_.size() - 1)]; }

  bool is_kw(const char* word, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::id && peek(ahead).keyword && lower(peek(ahead).text) == word;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError("line " + std::to_string(peek().line) + ": " + what + " near '" + peek().text + "'");
  }

  void expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what);
    ++p_;
  }

  std::string id() {
    if (peek().kind != Tok::id || peek().keyword) fail("expected an ID");
    return t_[p_++].text;
  }

  void stmt_list() {
    while (peek().kind != Tok::rbrace && peek().kind != Tok::end) {
      stmt();
      if (peek().kind == Tok::semicolon) ++p_;
    }
  }

  void stmt() {
    if (is_kw("graph") || is_kw("node") || is_kw("edge")) {
      const std::string which = lower(t_[p_++].text);
      if (peek().kind != Tok::lbracket) fail("expected an attribute list");
      Attributes attrs = attr_list();
      if (which == "graph") g_.graph_attributes.insert(attrs.begin(), attrs.end());
      return;
    }
    if (peek().kind == Tok::id && !peek().keyword && peek(1).kind == Tok::equals) {
      const std::string key = id();
      ++p_;
      g_.graph_attributes[key] = id();
      return;
    }
    std::vector<std::string> left = operand();
    if (peek().kind == Tok::edgeop) {
      std::vector<std::vector<std::string>> chain{left};
      while (peek().kind == Tok::edgeop) {
        if (peek().text != (g_.directed ? "->" : "--"))
          fail(g_.directed ? "'--' in a directed graph" : "'->' in an undirected graph");
        ++p_;
        chain.push_back(operand());
      }
      Attributes attrs;
      if (peek().kind == Tok::lbracket) attrs = attr_list();
      for (std::size_t i = 0; i + 1 < chain.size(); ++i)
        for (const auto& a : chain[i])
          for (const auto& b : chain[i + 1]) g_.edges.push_back({a, b, attrs});
      return;
    }
    if (left.size() != 1 || last_operand_was_subgraph_) {
      if (peek().kind == Tok::lbracket) fail("attributes after a subgraph");
      return;
    }
    if (peek().kind == Tok::lbracket) {
      auto attrs = attr_list();
      g_.node_attributes[left[0]].insert(attrs.begin(), attrs.end());
    }
  }

  // node_id or subgraph; returns the node names it covers.
  std::vector<std::string> operand() {
    last_operand_was_subgraph_ = false;
    if (is_kw("subgraph") || peek().kind == Tok::lbrace) {
      last_operand_was_subgraph_ = true;
      if (is_kw("subgraph")) {
        ++p_;
        if (peek().kind == Tok::id && !peek().keyword) ++p_;
      }
      expect(Tok::lbrace, "'{'");
      scopes_.emplace_back();
      stmt_list();
      expect(Tok::rbrace, "'}'");
      // Every node mentioned inside the braces stands for the subgraph in an edge.
      std::vector<std::string> covered = std::move(scopes_.back());
      scopes_.pop_back();
      for (const auto& n : covered) mention(n);
      last_operand_was_subgraph_ = true;
      return covered;
    }
    const std::string name = id();
    if (peek().kind == Tok::colon) {  // port
      ++p_;
      id();
      if (peek().kind == Tok::colon) {
        ++p_;
        id();
      }
    }
    mention(name);
    return {name};
  }

  void mention(const std::string& name) {
    if (seen_.insert(name).second) g_.nodes.push_back(name);
    if (!scopes_.empty() && std::find(scopes_.back().begin(), scopes_.back().end(), name) == scopes_.back().end())
      scopes_.back().push_back(name);
  }

  Attributes attr_list() {
    Attributes attrs;
    while (peek().kind == Tok::lbracket) {
      ++p_;
      while (peek().kind != Tok::rbracket) {
        const std::string key = id();
        expect(Tok::equals, "'='");
        attrs[key] = id();
        if (peek().kind == Tok::comma || peek().kind == Tok::semicolon) ++p_;
      }
      ++p_;
    }
    return attrs;
  }

  std::vector<Token> t_;
  std::size_t p_ = 0;
  Graph g_;
  std::set<std::string> seen_;
  std::vector<std::vector<std::string>> scopes_;
  bool last_operand_was_subgraph_ = false;
};

}  // namespace

Graph parse(const std::string& text) { return Parser(Lexer(text).run()).run(); }

}  // namespace dot
