#include <unistd.h>

#include <charconv>
#include <fstream>
#include <system_error>

#include "mest/error.hpp"
#include "mest/harness.hpp"

namespace mest {

using nlohmann::json;

namespace {

const std::vector<std::string> kColumns = {
    "experiment_id",   "n",           "rep",     "data_seed",       "score_seed",
    "status",          "error",       "gap",     "gap_excluded",    "criterion_value",
    "reference_value", "evaluations", "eta_hat", "component_errors"};

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k > 0) out += ',';
    out += format_double(v[k]);
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'", line);
  return v;
}

template <class T>
T parse_unsigned(const std::string& s, std::size_t line) {
  T v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError("bad integer '" + s + "'", line);
  return v;
}

std::vector<double> split_doubles(const std::string& s, std::size_t line) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(parse_double(s.substr(start, comma - start), line));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void append_row(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k > 0) out += ',';
    out += csv_escape(fields[k]);
  }
  out += "\r\n";
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    rows.push_back(std::move(row));
    row.clear();
    field_started = false;
  };
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char c = text[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < text.size() && text[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty()) throw ParseError("quote inside an unquoted field", line);
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\r' && k + 1 < text.size() && text[k + 1] == '\n') {
      // CRLF; the LF ends the row
    } else if (c == '\n') {
      end_row();
      ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line);
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string records_to_csv(const std::string& experiment_id, const std::vector<ConsistencyRecord>& records) {
  std::string out;
  append_row(out, kColumns);
  for (const auto& r : records) {
    append_row(out, {experiment_id, std::to_string(r.n), std::to_string(r.rep), std::to_string(r.data_seed),
                     std::to_string(r.score_seed), to_string(r.status), format_double(r.error),
                     format_double(r.gap), r.gap_excluded ? "1" : "0", format_double(r.criterion_value),
                     format_double(r.reference_value), std::to_string(r.evaluations), join_doubles(r.eta_hat),
                     join_doubles(r.component_errors)});
  }
  return out;
}

std::vector<ConsistencyRecord> records_from_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows.front() != kColumns) throw ParseError("unexpected CSV header", 1);
  std::vector<ConsistencyRecord> out;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& f = rows[k];
    const std::size_t line = k + 1;
    if (f.size() != kColumns.size()) throw ParseError("wrong number of fields", line);
    ConsistencyRecord r;
    r.n = parse_unsigned<std::size_t>(f[1], line);
    r.rep = parse_unsigned<std::size_t>(f[2], line);
    r.data_seed = parse_unsigned<std::uint64_t>(f[3], line);
    r.score_seed = parse_unsigned<std::uint64_t>(f[4], line);
    if (f[5] == "success") {
      r.status = FitStatus::success;
    } else if (f[5] == "degenerate") {
      r.status = FitStatus::degenerate;
    } else {
      throw ParseError("unknown status '" + f[5] + "'", line);
    }
    r.error = parse_double(f[6], line);
    r.gap = parse_double(f[7], line);
    if (f[8] != "0" && f[8] != "1") throw ParseError("gap_excluded must be 0 or 1", line);
    r.gap_excluded = f[8] == "1";
    r.criterion_value = parse_double(f[9], line);
    r.reference_value = parse_double(f[10], line);
    r.evaluations = parse_unsigned<std::size_t>(f[11], line);
    r.eta_hat = split_doubles(f[12], line);
    r.component_errors = split_doubles(f[13], line);
    out.push_back(std::move(r));
  }
  return out;
}

json summary_json(const ConsistencyReport& report) {
  const auto& cfg = report.config;
  json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["experiment_id"] = cfg.id;
  j["config"] = to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  j["master_seed"] = cfg.master_seed;
  json cells = json::array();
  for (const auto& r : report.records) {
    cells.push_back({{"n", r.n}, {"rep", r.rep}, {"data_seed", r.data_seed}, {"score_seed", r.score_seed}});
  }
  j["cells"] = cells;
  json sums = json::array();
  for (const auto& s : report.summaries) {
    json comps = json::array();
    for (double c : s.component_medians) comps.push_back(number_or_null(c));
    sums.push_back({{"n", s.n},
                    {"median_error", number_or_null(s.median_error)},
                    {"p90_error", number_or_null(s.p90_error)},
                    {"bootstrap_se", number_or_null(s.bootstrap_se)},
                    {"component_medians", comps},
                    {"degenerate", s.degenerate},
                    {"min_gap", number_or_null(s.min_gap)}});
  }
  j["summaries"] = sums;
  j["verdicts"] = {{"monotone", report.monotone},
                   {"monotone_tolerant", report.monotone_tolerant},
                   {"components_monotone", report.components_monotone()},
                   {"gaps_nonnegative", report.gaps_nonnegative},
                   {"gap_records", report.gap_records},
                   {"thresholds_pass", report.thresholds_pass()}};
  return j;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

EmittedFiles emit_report(const ConsistencyReport& report, const std::filesystem::path& root) {
  const auto dir = root / report.config.id;
  EmittedFiles files{dir / "raw.csv", dir / "summary.csv", dir / "summary.json"};
  write_file_atomic(files.raw_csv, records_to_csv(report.config.id, report.records));

  std::string summary;
  append_row(summary, {"experiment_id", "n", "median_error", "p90_error", "bootstrap_se", "degenerate", "min_gap",
                       "component_medians"});
  for (const auto& s : report.summaries) {
    append_row(summary, {report.config.id, std::to_string(s.n), format_double(s.median_error),
                         format_double(s.p90_error), format_double(s.bootstrap_se), std::to_string(s.degenerate),
                         format_double(s.min_gap), join_doubles(s.component_medians)});
  }
  write_file_atomic(files.summary_csv, summary);
  write_file_atomic(files.summary_json, summary_json(report).dump(2) + "\n");
  return files;
}

}  // namespace mest
