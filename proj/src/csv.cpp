#include "cdt/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cdt/errors.hpp"

namespace cdt {

namespace {

std::vector<std::vector<std::string>> parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_open = false, closed = false;
  std::size_t i = 0;
  const std::size_t n = text.size();

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_open = false;
    closed = false;
  };
  auto reject_after_quote = [&] {
    if (closed)
      throw DataError("record " + std::to_string(records.size() + 1) +
                      ": text after a closing quote");
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  while (i < n) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          quoted = false;
          closed = true;
          ++i;
        }
      } else {
        field += c;
        ++i;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_open)
          throw DataError("record " + std::to_string(records.size() + 1) +
                          ": quote inside an unquoted field");
        quoted = true;
        field_open = true;
        ++i;
        break;
      case ',':
        end_field();
        ++i;
        break;
      case '\r':
        if (i + 1 < n && text[i + 1] == '\n') {
          end_record();
          i += 2;
        } else {
          reject_after_quote();
          field += c;  // lone CR is data
          ++i;
        }
        break;
      case '\n':
        end_record();
        ++i;
        break;
      default:
        reject_after_quote();
        field += c;
        field_open = true;
        ++i;
    }
  }
  if (quoted)
    throw DataError("record " + std::to_string(records.size() + 1) +
                    ": unterminated quoted field");
  if (field_open || !field.empty() || !record.empty()) end_record();
  return records;
}

}  // namespace

CsvTable read_csv(const std::string& text) {
  auto records = parse_records(text);
  if (records.empty()) throw DataError("no header row");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size())
      throw DataError("row " + std::to_string(r) + ": has " +
                      std::to_string(records[r].size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_csv(buf.str());
}

std::string csv_field(const std::string& raw) {
  const bool needs =
      raw.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs) return raw;
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string write_csv(const CsvTable& table) {
  std::string out;
  auto line = [&out](const std::vector<std::string>& fields) {
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (j) out += ',';
      out += csv_field(fields[j]);
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
  return out;
}

void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << write_csv(table);
}

double parse_number(const std::string& field, std::size_t row, const std::string& col) {
  auto fail = [&](const std::string& what) -> double {
    throw DataError("row " + std::to_string(row) + ", column " + col + ": " + what +
                    " ('" + field + "')");
  };
  std::string trimmed = field;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front())))
    trimmed.erase(trimmed.begin());
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
    trimmed.pop_back();
  if (trimmed.empty()) return fail("empty field");

  const char* s = trimmed.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end != s + trimmed.size()) return fail("not a number");
  if (std::isnan(v)) return fail("NaN is not allowed");
  if (std::isinf(v)) return fail("infinity is not allowed");
  return v;
}

Dataset dataset_from_csv(const CsvTable& table, const std::string& outcome_col,
                         const std::string& treatment_col,
                         const std::vector<std::string>* covariate_cols,
                         const std::string* id_col) {
  auto find_col = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw DataError("no column named " + name);
    return static_cast<std::size_t>(it - table.header.begin());
  };

  const std::size_t yc = find_col(outcome_col);
  const std::size_t zc = find_col(treatment_col);
  if (yc == zc) throw DataError("outcome and treatment name the same column");
  std::optional<std::size_t> idc;
  if (id_col) idc = find_col(*id_col);

  std::vector<std::size_t> xcols;
  if (covariate_cols) {
    if (covariate_cols->empty()) throw DataError("empty covariate list");
    for (const std::string& name : *covariate_cols) {
      const std::size_t c = find_col(name);
      if (c == yc || c == zc)
        throw DataError("column " + name + " is already the outcome or treatment");
      xcols.push_back(c);
    }
  } else {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (c != yc && c != zc && (!idc || c != *idc)) xcols.push_back(c);
  }
  if (xcols.empty()) throw DataError("no covariate columns");

  Dataset d;
  d.n = table.rows.size();
  d.p = xcols.size();
  for (std::size_t c : xcols) d.columns.push_back(table.header[c]);
  d.x.resize(d.n * d.p);
  d.y.resize(d.n);
  d.z.resize(d.n);
  if (idc) d.ids.resize(d.n);

  for (std::size_t r = 0; r < d.n; ++r) {
    const auto& row = table.rows[r];
    d.y[r] = parse_number(row[yc], r + 1, outcome_col);
    const double zv = parse_number(row[zc], r + 1, treatment_col);
    if (zv != 0.0 && zv != 1.0)
      throw DataError("row " + std::to_string(r + 1) + ", column " + treatment_col +
                      ": treatment must be 0 or 1 ('" + row[zc] + "')");
    d.z[r] = static_cast<int>(zv);
    for (std::size_t j = 0; j < d.p; ++j)
      d.x[r * d.p + j] = parse_number(row[xcols[j]], r + 1, d.columns[j]);
    if (idc) d.ids[r] = row[*idc];
  }
  validate_dataset(d);
  return d;
}

}  // namespace cdt
