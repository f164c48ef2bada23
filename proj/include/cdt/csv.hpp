#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cdt/dataset.hpp"

namespace cdt {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC 4180: quoted fields, doubled-quote escapes, CR LF or LF line ends,
// embedded newlines inside quotes. Header row required; ragged or
// malformed rows are rejected with their row number.
CsvTable read_csv(const std::string& text);
CsvTable read_csv_file(const std::string& path);

// Quotes a field only when it needs it.
std::string csv_field(const std::string& raw);
std::string write_csv(const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

// Strict full-field numeric parse; NaN, infinities, empty fields, and
// trailing junk are errors naming the data row (1-based) and column.
double parse_number(const std::string& field, std::size_t row, const std::string& col);

// Builds an analysis dataset from named columns: every other column is a
// covariate unless an explicit list is given. The treatment column must be
// 0/1; the optional id column is carried through as row labels.
Dataset dataset_from_csv(const CsvTable& table, const std::string& outcome_col,
                         const std::string& treatment_col,
                         const std::vector<std::string>* covariate_cols = nullptr,
                         const std::string* id_col = nullptr);

}  // namespace cdt
