#include "llmctl/sql.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace llmctl::sql {

SqlError::SqlError(std::size_t offset, const std::string& message)
    : Error("SQL error at offset " + std::to_string(offset) + ": " + message), offset_(offset), message_(message) {}

std::size_t TableSchema::find(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return i;
  }
  return npos;
}

const TableSchema& experiments_schema() {
  static const TableSchema s{"experiments",
                             {{"ExperimentID", ColumnType::Text},
                              {"StartTime", ColumnType::Text},
                              {"EndTime", ColumnType::Text},
                              {"controller_name", ColumnType::Text}}};
  return s;
}

const TableSchema& timeseries_schema() {
  static const TableSchema s{"timeseries_data",
                             {{"MeasurementTime", ColumnType::Text},
                              {"Temperature", ColumnType::Real},
                              {"HeaterDutyCycle", ColumnType::Real},
                              {"FanOn", ColumnType::Integer},
                              {"AmbientTemperature", ColumnType::Real}}};
  return s;
}

const TableSchema* find_table(std::string_view name) {
  if (name == experiments_schema().name) return &experiments_schema();
  if (name == timeseries_schema().name) return &timeseries_schema();
  return nullptr;
}

namespace {

struct Token {
  enum class Kind { Ident, String, Number, Symbol, End };
  Kind kind;
  std::string text;  // identifier, unquoted string, number text or symbol
  std::size_t offset;
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (std::isalpha(c) || c == '_') {
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      out.push_back({Token::Kind::Ident, std::string(s.substr(start, i - start)), start});
    } else if (std::isdigit(c) || ((c == '-' || c == '.') && i + 1 < s.size() &&
                                   (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '.'))) {
      ++i;
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == 'e' ||
                              s[i] == 'E' || ((s[i] == '-' || s[i] == '+') && (s[i - 1] == 'e' || s[i - 1] == 'E')))) {
        ++i;
      }
      out.push_back({Token::Kind::Number, std::string(s.substr(start, i - start)), start});
    } else if (c == '\'' || c == '`') {
      std::string text;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        if (s[i] == '\'' || s[i] == '`') {
          if (s[i] == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
            text += '\'';
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        text += s[i++];
      }
      if (!closed) throw SqlError(start, "unterminated string literal");
      out.push_back({Token::Kind::String, std::move(text), start});
    } else if (c == ',' || c == '*' || c == '=' || c == ';' || c == '(' || c == ')') {
      out.push_back({Token::Kind::Symbol, std::string(1, static_cast<char>(c)), start});
      ++i;
    } else {
      throw SqlError(start, std::string("unexpected character '") + static_cast<char>(c) + "'");
    }
  }
  out.push_back({Token::Kind::End, "", s.size()});
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(a[i])) != std::toupper(static_cast<unsigned char>(b[i]))) return false;
  }
  return true;
}

bool is_keyword(std::string_view w) {
  for (const char* k : {"SELECT", "FROM", "WHERE", "AND", "BETWEEN", "LIMIT"}) {
    if (iequals(w, k)) return true;
  }
  return false;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

  QueryAst parse() {
    QueryAst ast;
    expect_keyword("SELECT");
    std::vector<Token> cols;
    if (peek_symbol("*")) {
      next();
    } else {
      cols.push_back(expect_ident("column name"));
      while (peek_symbol(",")) {
        next();
        cols.push_back(expect_ident("column name"));
      }
    }
    expect_keyword("FROM");
    const Token table = expect_ident("table name");
    const TableSchema* schema = find_table(table.text);
    if (!schema) throw SqlError(table.offset, "unknown table '" + table.text + "'");
    ast.table = table.text;
    for (const auto& c : cols) {
      if (schema->find(c.text) == npos) {
        throw SqlError(c.offset, "unknown column '" + c.text + "' in table " + schema->name);
      }
      ast.columns.push_back(c.text);
    }

    if (peek_keyword("WHERE")) {
      next();
      ast.where.push_back(predicate(*schema));
      while (peek_keyword("AND")) {
        next();
        ast.where.push_back(predicate(*schema));
      }
    }
    if (peek_keyword("LIMIT")) {
      next();
      const Token& n = next();
      if (n.kind != Token::Kind::Number || n.text.find_first_not_of("0123456789") != std::string::npos) {
        throw SqlError(n.offset, "LIMIT expects a non-negative integer");
      }
      ast.limit = std::stoull(n.text);
    }
    if (peek_symbol(";")) next();
    if (peek().kind != Token::Kind::End) throw SqlError(peek().offset, "unexpected '" + peek().text + "'");
    return ast;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

  bool peek_keyword(const char* kw) const { return peek().kind == Token::Kind::Ident && iequals(peek().text, kw); }
  bool peek_symbol(const char* s) const { return peek().kind == Token::Kind::Symbol && peek().text == s; }

  void expect_keyword(const char* kw) {
    if (!peek_keyword(kw)) throw SqlError(peek().offset, std::string("expected ") + kw + describe_found());
    next();
  }

  Token expect_ident(const char* what) {
    if (peek().kind != Token::Kind::Ident || is_keyword(peek().text)) {
      throw SqlError(peek().offset, std::string("expected ") + what + describe_found());
    }
    return next();
  }

  std::string describe_found() const {
    return peek().kind == Token::Kind::End ? ", found end of input" : ", found '" + peek().text + "'";
  }

  Value literal(ColumnType type, const Token& column) {
    const Token& t = next();
    if (t.kind == Token::Kind::String) {
      if (type != ColumnType::Text) throw SqlError(t.offset, "column " + column.text + " is numeric");
      return t.text;
    }
    if (t.kind == Token::Kind::Number) {
      if (type == ColumnType::Text) throw SqlError(t.offset, "column " + column.text + " compares to text");
      char* end = nullptr;
      const double v = std::strtod(t.text.c_str(), &end);
      if (*end != '\0') throw SqlError(t.offset, "malformed number '" + t.text + "'");
      return v;
    }
    throw SqlError(t.offset, "expected a literal" + std::string(t.kind == Token::Kind::End ? ", found end of input"
                                                                                            : ", found '" + t.text + "'"));
  }

  Predicate predicate(const TableSchema& schema) {
    const Token col = expect_ident("column name");
    const std::size_t idx = schema.find(col.text);
    if (idx == npos) throw SqlError(col.offset, "unknown column '" + col.text + "' in table " + schema.name);
    const ColumnType type = schema.columns[idx].type;
    Predicate p;
    p.column = col.text;
    if (peek_symbol("=")) {
      next();
      p.kind = Predicate::Kind::Equals;
      p.low = literal(type, col);
      p.high = std::string();
      return p;
    }
    if (peek_keyword("BETWEEN")) {
      next();
      p.kind = Predicate::Kind::Between;
      p.low = literal(type, col);
      expect_keyword("AND");
      p.high = literal(type, col);
      return p;
    }
    throw SqlError(peek().offset, "expected '=' or BETWEEN" + describe_found());
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

std::string print_value(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return quote(*s);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(v));
  return buf;
}

}  // namespace

QueryAst parse_query(std::string_view text) { return Parser(text).parse(); }

std::string print_query(const QueryAst& ast) {
  std::ostringstream os;
  os << "SELECT ";
  if (ast.columns.empty()) os << '*';
  for (std::size_t i = 0; i < ast.columns.size(); ++i) os << (i ? ", " : "") << ast.columns[i];
  os << " FROM " << ast.table;
  for (std::size_t i = 0; i < ast.where.size(); ++i) {
    const auto& p = ast.where[i];
    os << (i ? " AND " : " WHERE ") << p.column;
    if (p.kind == Predicate::Kind::Equals) {
      os << " = " << print_value(p.low);
    } else {
      os << " BETWEEN " << print_value(p.low) << " AND " << print_value(p.high);
    }
  }
  if (ast.limit) os << " LIMIT " << *ast.limit;
  os << ';';
  return os.str();
}

std::string format_value(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", std::get<double>(v));
  return buf;
}

std::string format_table(const ResultTable& t, std::size_t max_rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? " | " : "") << t.columns[i];
  os << '\n';
  const std::size_t shown = std::min(max_rows, t.rows.size());
  for (std::size_t r = 0; r < shown; ++r) {
    for (std::size_t i = 0; i < t.rows[r].size(); ++i) os << (i ? " | " : "") << format_value(t.rows[r][i]);
    os << '\n';
  }
  if (shown < t.rows.size()) os << "... (" << t.rows.size() << " rows)\n";
  if (t.rows.empty()) os << "(0 rows)\n";
  return os.str();
}

}  // namespace llmctl::sql
