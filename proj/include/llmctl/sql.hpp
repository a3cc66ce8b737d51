#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "llmctl/error.hpp"

namespace llmctl::sql {

/// Syntax or schema error with the byte offset where parsing stopped.
class SqlError : public Error {
 public:
  SqlError(std::size_t offset, const std::string& message);
  std::size_t offset() const { return offset_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t offset_;
  std::string message_;
};

enum class ColumnType { Text, Real, Integer };

struct ColumnDef {
  std::string name;
  ColumnType type;
};

struct TableSchema {
  std::string name;
  std::vector<ColumnDef> columns;

  /// Column index or npos.
  std::size_t find(std::string_view column) const;
};

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

/// The two history tables, column order as stored.
const TableSchema& experiments_schema();
const TableSchema& timeseries_schema();
const TableSchema* find_table(std::string_view name);

using Value = std::variant<std::string, double>;

struct Predicate {
  enum class Kind { Equals, Between };
  Kind kind = Kind::Equals;
  std::string column;
  Value low;   // the compared value for Equals
  Value high;  // unused for Equals

  bool operator==(const Predicate&) const = default;
};

/// SELECT columns FROM table [WHERE p AND p ...] [LIMIT n]
struct QueryAst {
  std::vector<std::string> columns;  // empty means *
  std::string table;
  std::vector<Predicate> where;      // conjunction
  std::optional<std::size_t> limit;

  bool operator==(const QueryAst&) const = default;
};

/// Parses the supported subset. Keywords are case-insensitive; column and
/// table names are exact. String literals use single quotes; a backtick is
/// also accepted as the opening quote.
QueryAst parse_query(std::string_view text);

/// Canonical text that parses back to an equal AST.
std::string print_query(const QueryAst& ast);

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;

  bool empty() const { return rows.empty(); }
};

/// Human-readable rendering, one row per line.
std::string format_value(const Value& v);
std::string format_table(const ResultTable& t, std::size_t max_rows = 20);

}  // namespace llmctl::sql
