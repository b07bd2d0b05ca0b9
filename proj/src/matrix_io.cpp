#include "knockoffs/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "knockoffs/errors.hpp"

namespace knockoffs {

FeatureMatrix make_matrix(Tensor values, std::vector<std::string> names) {
  FeatureMatrix m;
  if (names.empty()) names = default_names(values.cols());
  if (static_cast<std::int64_t>(names.size()) != values.cols())
    throw DataError("column name count does not match matrix width");
  m.values = std::move(values);
  m.names = std::move(names);
  return m;
}

std::vector<std::string> default_names(std::int64_t p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (std::int64_t j = 0; j < p; ++j)
    names.push_back("f" + std::to_string(j + 1));
  return names;
}

std::string format_double(double v) {
  char buf[32];
  // %.17g always round-trips doubles exactly.
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN";
}

}  // namespace

IngestResult ingest_csv(const std::filesystem::path& path,
                        const std::optional<std::string>& response_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);
  if (header.empty()) throw DataError(path.string() + ": no columns");

  std::unordered_set<std::string> seen;
  for (const auto& h : header)
    if (!seen.insert(h).second)
      throw DataError(path.string() + ": duplicate column name '" + h + "'");

  std::int64_t response_idx = -1;
  if (response_column) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == *response_column) response_idx = static_cast<std::int64_t>(j);
    if (response_idx < 0)
      throw DataError(path.string() + ": response column '" +
                      *response_column + "' not found");
  }

  const auto ncol = static_cast<std::int64_t>(header.size());
  std::vector<double> flat;
  std::vector<double> response;
  IngestResult result;
  std::int64_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    std::vector<std::string> cells = split_line(line);
    if (static_cast<std::int64_t>(cells.size()) != ncol)
      throw DataError(path.string() + ": row " + std::to_string(row) +
                      " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(ncol));
    for (std::int64_t j = 0; j < ncol; ++j) {
      const std::string cell = trim(cells[static_cast<std::size_t>(j)]);
      double v;
      if (is_missing(cell)) {
        v = std::numeric_limits<double>::quiet_NaN();
        ++result.missing_values;
      } else {
        const char* b = cell.data();
        const char* e = b + cell.size();
        auto [ptr, ec] = std::from_chars(b, e, v);
        if (ec != std::errc{} || ptr != e)
          throw DataError(path.string() + ": non-numeric cell at row " +
                          std::to_string(row) + ", column '" +
                          header[static_cast<std::size_t>(j)] + "'");
      }
      if (j == response_idx)
        response.push_back(v);
      else
        flat.push_back(v);
    }
  }
  if (row == 0) throw DataError(path.string() + ": no data rows");

  std::vector<std::string> names;
  for (std::int64_t j = 0; j < ncol; ++j)
    if (j != response_idx) names.push_back(header[static_cast<std::size_t>(j)]);
  const std::int64_t p = ncol - (response_idx >= 0 ? 1 : 0);
  result.matrix = make_matrix(Tensor::from_data({row, p}, std::move(flat)),
                              std::move(names));
  if (response_idx >= 0) result.response = std::move(response);
  return result;
}

namespace {

void write_rows(std::ofstream& out, const FeatureMatrix& m,
                const std::vector<double>* y) {
  for (std::int64_t i = 0; i < m.n(); ++i) {
    for (std::int64_t j = 0; j < m.p(); ++j) {
      if (j) out << ',';
      out << format_double(m.values.at(i, j));
    }
    if (y) out << ',' << format_double((*y)[static_cast<std::size_t>(i)]);
    out << '\n';
  }
}

}  // namespace

void write_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::int64_t j = 0; j < m.p(); ++j) {
    if (j) out << ',';
    out << m.names[static_cast<std::size_t>(j)];
  }
  out << '\n';
  write_rows(out, m, nullptr);
}

void write_csv_with_response(const FeatureMatrix& m,
                             const std::vector<double>& y,
                             const std::string& response_name,
                             const std::filesystem::path& path) {
  if (static_cast<std::int64_t>(y.size()) != m.n())
    throw DataError("response length does not match row count");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::int64_t j = 0; j < m.p(); ++j) {
    if (j) out << ',';
    out << m.names[static_cast<std::size_t>(j)];
  }
  out << ',' << response_name << '\n';
  write_rows(out, m, &y);
}

}  // namespace knockoffs
