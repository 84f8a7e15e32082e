#include "smmpc/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "smmpc/errors.hpp"

namespace smmpc {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file: " + path);

  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV file: " + path);
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str()) throw IoError("non-numeric cell '" + cell + "' in " + path);
    }
    if (row.size() != table.header.size()) {
      throw IoError("ragged CSV row in " + path);
    }
    rows.push_back(std::move(row));
  }
  table.data.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.header.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      table.data(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& data) {
  if (data.rows() > 0 && static_cast<size_t>(data.cols()) != header.size()) {
    throw DimensionError("write_csv: header and data column counts differ");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (size_t j = 0; j < header.size(); ++j) {
    out << header[j] << (j + 1 < header.size() ? "," : "\n");
  }
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.cols(); ++j) {
      out << format_double(data(i, j)) << (j + 1 < data.cols() ? "," : "\n");
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_record_csv(const std::string& path, const DataRecord& record) {
  std::vector<std::string> header{"t"};
  for (Index j = 0; j < record.n_u(); ++j) header.push_back("u_" + std::to_string(j + 1));
  for (Index j = 0; j < record.n_y(); ++j) header.push_back("y_" + std::to_string(j + 1));

  Matrix data(record.K(), 1 + record.n_u() + record.n_y());
  for (Index t = 0; t < record.K(); ++t) {
    data(t, 0) = static_cast<double>(t + 1);
    data.block(t, 1, 1, record.n_u()) = record.u.row(t);
    data.block(t, 1 + record.n_u(), 1, record.n_y()) = record.y.row(t);
  }
  write_csv(path, header, data);
}

DataRecord read_record_csv(const std::string& path, bool noise_free) {
  const CsvTable table = read_csv(path);
  if (table.header.empty() || table.header[0] != "t") {
    throw IoError("record CSV must start with a 't' column: " + path);
  }
  Index n_u = 0, n_y = 0;
  size_t j = 1;
  while (j < table.header.size() && table.header[j] == "u_" + std::to_string(n_u + 1)) {
    ++n_u;
    ++j;
  }
  while (j < table.header.size() && table.header[j] == "y_" + std::to_string(n_y + 1)) {
    ++n_y;
    ++j;
  }
  if (n_u < 1 || n_y < 1 || j != table.header.size()) {
    throw IoError("record CSV header must be t,u_1..u_nu,y_1..y_ny: " + path);
  }
  DataRecord record;
  record.u = table.data.middleCols(1, n_u);
  record.y = table.data.middleCols(1 + n_u, n_y);
  record.noise_free = noise_free;
  return record;
}

}  // namespace smmpc
