#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "recap/errors.hpp"

namespace recap {

// Capture histories with per-individual covariates. Rows are the n observed
// individuals (each captured at least once), columns of `histories` the K
// capture occasions in time order. Immutable after construction and safe to
// share across threads.
struct CaptureDataset {
  Eigen::MatrixXi histories;               // n x K, entries in {0, 1}
  Eigen::MatrixXd covariates;              // n x q
  std::vector<std::string> covariate_names;
  std::vector<std::string> history_names;

  int n() const { return static_cast<int>(histories.rows()); }
  int K() const { return static_cast<int>(histories.cols()); }
  int q() const { return static_cast<int>(covariates.cols()); }

  // Throws DataError when an invariant is broken (empty data, non-binary
  // history cell, all-zero row, non-finite covariate).
  void validate() const;
};

struct DatasetSummary {
  int n = 0;
  int K = 0;
  int m1 = 0;  // individuals captured exactly once
  int m2 = 0;  // individuals captured exactly twice
  std::vector<int> capture_counts;  // per-occasion totals
};

// Column mapping for CSV input: history columns in occasion order plus the
// covariate columns to keep.
struct CsvSchema {
  std::vector<std::string> history_columns;
  std::vector<std::string> covariate_columns;
};

CaptureDataset parse_dataset(std::istream& in, const CsvSchema& schema);
CaptureDataset load_dataset(const std::string& path, const CsvSchema& schema);

// Writes CSV with the same column order the dataset was parsed with
// (histories first, then covariates).
void serialize_dataset(const CaptureDataset& data, std::ostream& out);

DatasetSummary summarize(const CaptureDataset& data);

}  // namespace recap
