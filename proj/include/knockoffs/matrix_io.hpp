#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "knockoffs/tensor.hpp"

namespace knockoffs {

// n x p matrix of features with named columns (rows are samples).
struct FeatureMatrix {
  Tensor values;
  std::vector<std::string> names;

  std::int64_t n() const { return values.defined() ? values.rows() : 0; }
  std::int64_t p() const { return values.defined() ? values.cols() : 0; }
};

FeatureMatrix make_matrix(Tensor values, std::vector<std::string> names = {});

struct IngestResult {
  FeatureMatrix matrix;
  std::optional<std::vector<double>> response;
  std::int64_t missing_values = 0;  // empty / NA cells (stored as NaN)
};

// Reads a rectangular CSV with a header row. If `response_column` is given,
// that column is split out as the response. Ragged rows, non-numeric cells
// and duplicate column names raise DataError naming the offending cell.
IngestResult ingest_csv(const std::filesystem::path& path,
                        const std::optional<std::string>& response_column = {});

void write_csv(const FeatureMatrix& m, const std::filesystem::path& path);
void write_csv_with_response(const FeatureMatrix& m,
                             const std::vector<double>& y,
                             const std::string& response_name,
                             const std::filesystem::path& path);

std::string format_double(double v);  // shortest round-trip formatting

std::vector<std::string> default_names(std::int64_t p);  // f1..fp

}  // namespace knockoffs
