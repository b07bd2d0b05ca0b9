#pragma once

#include "knockoffs/matrix_io.hpp"

namespace knockoffs {

struct NormalizeSpec {
  bool log1p = true;
  bool standardize = true;
};

struct NormalizeParams {
  NormalizeSpec spec;
  std::vector<double> mean, sd;  // per column (population sd)
};

struct NormalizedMatrix {
  FeatureMatrix matrix;
  NormalizeParams params;
};

// log(1 + x) (optional) then per-column zero-mean unit-variance. Columns
// with zero variance are rejected with their names listed.
NormalizedMatrix normalize(const FeatureMatrix& data,
                           const NormalizeSpec& spec);

// Inverse transform using the stored parameters.
FeatureMatrix denormalize(const FeatureMatrix& data,
                          const NormalizeParams& params);

}  // namespace knockoffs
