#include "llmctl/history.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

namespace llmctl {

namespace {

constexpr const char* kExperimentsFile = "experiments.csv";
constexpr const char* kTimeseriesFile = "timeseries_data.csv";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string header_of(const sql::TableSchema& s) {
  std::string h;
  for (std::size_t i = 0; i < s.columns.size(); ++i) h += (i ? "," : "") + s.columns[i].name;
  return h;
}

std::string fmt(const char* f, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string experiment_line(const ExperimentRecord& e) {
  return csv_field(e.id) + "," + e.start_time + "," + e.end_time + "," + csv_field(e.controller_name);
}

std::string row_line(const TimeseriesRow& r) {
  return r.time + "," + fmt("%.4f", r.temperature) + "," + fmt("%.2f", r.heater) + "," + std::to_string(r.fan) + "," +
         fmt("%.4f", r.ambient);
}

// Values are kept exactly as they will read back from the CSV.
double as_stored(const char* f, double v) { return std::stod(fmt(f, v)); }

sql::Value cell(const ExperimentRecord& e, std::size_t col) {
  switch (col) {
    case 0: return e.id;
    case 1: return e.start_time;
    case 2: return e.end_time;
    default: return e.controller_name;
  }
}

sql::Value cell(const TimeseriesRow& r, std::size_t col) {
  switch (col) {
    case 0: return r.time;
    case 1: return r.temperature;
    case 2: return r.heater;
    case 3: return static_cast<double>(r.fan);
    default: return r.ambient;
  }
}

bool matches(const sql::Value& v, const sql::Predicate& p) {
  if (p.kind == sql::Predicate::Kind::Equals) return v == p.low;
  return p.low <= v && v <= p.high;  // same alternative on both sides by construction
}

template <class Row>
sql::ResultTable run(const std::vector<Row>& rows, const sql::TableSchema& schema, const sql::QueryAst& ast) {
  sql::ResultTable out;
  std::vector<std::size_t> proj;
  if (ast.columns.empty()) {
    for (std::size_t i = 0; i < schema.columns.size(); ++i) proj.push_back(i);
  } else {
    for (const auto& c : ast.columns) {
      const std::size_t i = schema.find(c);
      if (i == sql::npos) throw sql::SqlError(0, "unknown column '" + c + "'");
      proj.push_back(i);
    }
  }
  for (std::size_t i : proj) out.columns.push_back(schema.columns[i].name);
  std::vector<std::size_t> pred_cols;
  for (const auto& p : ast.where) {
    const std::size_t i = schema.find(p.column);
    if (i == sql::npos) throw sql::SqlError(0, "unknown column '" + p.column + "'");
    pred_cols.push_back(i);
  }
  for (const auto& row : rows) {
    if (ast.limit && out.rows.size() >= *ast.limit) break;
    bool keep = true;
    for (std::size_t k = 0; k < ast.where.size() && keep; ++k) keep = matches(cell(row, pred_cols[k]), ast.where[k]);
    if (!keep) continue;
    std::vector<sql::Value> r;
    r.reserve(proj.size());
    for (std::size_t i : proj) r.push_back(cell(row, i));
    out.rows.push_back(std::move(r));
  }
  return out;
}

void append_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("cannot open " + path.string() + " for appending");
  for (const auto& l : lines) f << l << '\n';
  f.flush();
  if (!f) throw IoError("write to " + path.string() + " failed");
}

}  // namespace

HistoryStore::HistoryStore() = default;

HistoryStore::HistoryStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(*dir_);
  load();
}

void HistoryStore::load() {
  const auto open = [&](const char* name, const sql::TableSchema& schema, auto&& on_row) {
    const auto path = *dir_ / name;
    if (!std::filesystem::exists(path)) {
      append_lines(path, {header_of(schema)});
      return;
    }
    std::ifstream f(path);
    std::string line;
    if (!std::getline(f, line) || line != header_of(schema)) {
      throw IoError(path.string() + ": header must be " + header_of(schema));
    }
    std::size_t n = 1;
    while (std::getline(f, line)) {
      ++n;
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != schema.columns.size()) {
        throw IoError(path.string() + ":" + std::to_string(n) + ": expected " + std::to_string(schema.columns.size()) +
                      " fields");
      }
      on_row(fields);
    }
  };
  open(kExperimentsFile, sql::experiments_schema(), [&](const std::vector<std::string>& f) {
    experiments_.push_back({f[0], f[1], f[2], f[3]});
  });
  open(kTimeseriesFile, sql::timeseries_schema(), [&](const std::vector<std::string>& f) {
    rows_.push_back({f[0], std::stod(f[1]), std::stod(f[2]), std::stoi(f[3]), std::stod(f[4])});
  });
}

IngestCounts HistoryStore::ingest_run(const std::string& experiment_id, const std::string& controller_name,
                                      std::span<const RunTick> ticks) {
  if (experiment_id.empty()) throw ValidationError("experiment id must not be empty");
  if (ticks.empty()) throw ValidationError("run " + experiment_id + " has no ticks");
  if (ticks.size() < 2) throw ValidationError("run " + experiment_id + " needs at least two ticks (StartTime < EndTime)");
  for (std::size_t k = 1; k < ticks.size(); ++k) {
    if (ticks[k].time <= ticks[k - 1].time) {
      throw ValidationError("run " + experiment_id + ": tick times must strictly increase");
    }
  }

  const ExperimentRecord rec{experiment_id, format_timestamp(ticks.front().time), format_timestamp(ticks.back().time),
                             controller_name};
  std::vector<TimeseriesRow> new_rows;
  new_rows.reserve(ticks.size());
  for (const auto& t : ticks) {
    new_rows.push_back({format_timestamp(t.time), as_stored("%.4f", t.temperature), as_stored("%.2f", t.u.heater()),
                        t.u.fan_on(), as_stored("%.4f", t.ambient)});
  }

  std::unique_lock lock(mutex_);
  for (const auto& e : experiments_) {
    if (e.id == experiment_id) throw DuplicateExperimentError("experiment '" + experiment_id + "' already exists");
  }
  if (dir_) {
    std::vector<std::string> lines;
    lines.reserve(new_rows.size());
    for (const auto& r : new_rows) lines.push_back(row_line(r));
    append_lines(*dir_ / kTimeseriesFile, lines);
    append_lines(*dir_ / kExperimentsFile, {experiment_line(rec)});
  }
  experiments_.push_back(rec);
  rows_.insert(rows_.end(), new_rows.begin(), new_rows.end());
  return {1, new_rows.size()};
}

sql::ResultTable HistoryStore::execute(const sql::QueryAst& ast) const {
  std::shared_lock lock(mutex_);
  if (ast.table == sql::experiments_schema().name) return run(experiments_, sql::experiments_schema(), ast);
  if (ast.table == sql::timeseries_schema().name) return run(rows_, sql::timeseries_schema(), ast);
  throw sql::SqlError(0, "unknown table '" + ast.table + "'");
}

sql::ResultTable HistoryStore::query(std::string_view text) const { return execute(sql::parse_query(text)); }

std::optional<ExperimentRecord> HistoryStore::find_experiment(const std::string& id) const {
  std::shared_lock lock(mutex_);
  for (const auto& e : experiments_) {
    if (e.id == id) return e;
  }
  return std::nullopt;
}

std::size_t HistoryStore::experiment_count() const {
  std::shared_lock lock(mutex_);
  return experiments_.size();
}

std::size_t HistoryStore::row_count() const {
  std::shared_lock lock(mutex_);
  return rows_.size();
}

std::string describe_history_schema() {
  std::ostringstream os;
  for (const auto* s : {&sql::experiments_schema(), &sql::timeseries_schema()}) {
    os << s->name << "(";
    for (std::size_t i = 0; i < s->columns.size(); ++i) {
      const char* type = s->columns[i].type == sql::ColumnType::Text ? "TEXT"
                         : s->columns[i].type == sql::ColumnType::Real ? "REAL"
                                                                        : "INTEGER";
      os << (i ? ", " : "") << s->columns[i].name << " " << type;
    }
    os << ")\n";
  }
  os << "Timestamps are 'YYYY-MM-DD HH:MM:SS'. timeseries_data rows belong to an experiment when MeasurementTime "
        "lies between its StartTime and EndTime.\n"
        "Supported SQL: SELECT cols|* FROM table [WHERE col = 'text' | col = number | col BETWEEN a AND b "
        "[AND ...]] [LIMIT n]. No joins, aggregates or ORDER BY.";
  return os.str();
}

}  // namespace llmctl
