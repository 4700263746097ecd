#include "recap/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace recap {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, int row, const std::string& col) {
  const std::string t = trim(cell);
  double value = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(value))
    throw DataError("non-numeric covariate '" + cell + "' in column '" + col +
                    "' at data row " + std::to_string(row));
  return value;
}

}  // namespace

void CaptureDataset::validate() const {
  if (n() < 1) throw DataError("dataset must contain at least one individual");
  if (K() < 2) throw DataError("dataset must contain at least two capture occasions");
  if (covariates.rows() != histories.rows())
    throw DataError("covariate rows do not match history rows");
  for (int i = 0; i < n(); ++i) {
    int row_sum = 0;
    for (int k = 0; k < K(); ++k) {
      const int d = histories(i, k);
      if (d != 0 && d != 1)
        throw DataError("non-binary history entry at row " + std::to_string(i + 1));
      row_sum += d;
    }
    if (row_sum == 0)
      throw DataError("all-zero capture history at row " + std::to_string(i + 1) +
                      "; only ever-captured individuals can be recorded");
    for (int j = 0; j < q(); ++j)
      if (!std::isfinite(covariates(i, j)))
        throw DataError("non-finite covariate at row " + std::to_string(i + 1));
  }
}

CaptureDataset parse_dataset(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);

  std::unordered_map<std::string, int> index;
  for (size_t j = 0; j < header.size(); ++j) index[header[j]] = static_cast<int>(j);

  const auto column_of = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw DataError("missing column '" + name + "' in header");
    return it->second;
  };

  std::vector<int> hist_idx, cov_idx;
  for (const auto& name : schema.history_columns) hist_idx.push_back(column_of(name));
  for (const auto& name : schema.covariate_columns) cov_idx.push_back(column_of(name));
  if (hist_idx.size() < 2)
    throw DataError("schema must name at least two history columns");

  std::vector<std::vector<int>> hist_rows;
  std::vector<std::vector<double>> cov_rows;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw DataError("malformed CSV: row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " fields, expected " +
                      std::to_string(header.size()));

    std::vector<int> h;
    int row_sum = 0;
    for (const int j : hist_idx) {
      const std::string& cell = cells[static_cast<size_t>(j)];
      int d;
      if (cell == "0")
        d = 0;
      else if (cell == "1")
        d = 1;
      else
        throw DataError("non-binary history cell '" + cell + "' at data row " +
                        std::to_string(row));
      h.push_back(d);
      row_sum += d;
    }
    if (row_sum == 0)
      throw DataError("all-zero capture history at data row " + std::to_string(row));

    std::vector<double> x;
    for (size_t c = 0; c < cov_idx.size(); ++c)
      x.push_back(parse_number(cells[static_cast<size_t>(cov_idx[c])], row,
                               schema.covariate_columns[c]));

    hist_rows.push_back(std::move(h));
    cov_rows.push_back(std::move(x));
  }
  if (hist_rows.empty()) throw DataError("no data rows found");

  CaptureDataset data;
  const int n = static_cast<int>(hist_rows.size());
  const int K = static_cast<int>(hist_idx.size());
  const int q = static_cast<int>(cov_idx.size());
  data.histories.resize(n, K);
  data.covariates.resize(n, q);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) data.histories(i, k) = hist_rows[static_cast<size_t>(i)][static_cast<size_t>(k)];
    for (int j = 0; j < q; ++j) data.covariates(i, j) = cov_rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  data.history_names = schema.history_columns;
  data.covariate_names = schema.covariate_columns;
  data.validate();
  return data;
}

CaptureDataset load_dataset(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file: " + path);
  return parse_dataset(in, schema);
}

void serialize_dataset(const CaptureDataset& data, std::ostream& out) {
  for (int k = 0; k < data.K(); ++k) {
    if (k) out << ',';
    out << (k < static_cast<int>(data.history_names.size()) ? data.history_names[static_cast<size_t>(k)]
                                                            : "d" + std::to_string(k + 1));
  }
  for (int j = 0; j < data.q(); ++j)
    out << ','
        << (j < static_cast<int>(data.covariate_names.size()) ? data.covariate_names[static_cast<size_t>(j)]
                                                              : "x" + std::to_string(j + 1));
  out << '\n';
  char buf[64];
  for (int i = 0; i < data.n(); ++i) {
    for (int k = 0; k < data.K(); ++k) {
      if (k) out << ',';
      out << data.histories(i, k);
    }
    for (int j = 0; j < data.q(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), data.covariates(i, j));
      out << ',' << std::string_view(buf, static_cast<size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

DatasetSummary summarize(const CaptureDataset& data) {
  DatasetSummary s;
  s.n = data.n();
  s.K = data.K();
  s.capture_counts.assign(static_cast<size_t>(data.K()), 0);
  for (int i = 0; i < data.n(); ++i) {
    int total = 0;
    for (int k = 0; k < data.K(); ++k) {
      total += data.histories(i, k);
      s.capture_counts[static_cast<size_t>(k)] += data.histories(i, k);
    }
    if (total == 1) ++s.m1;
    if (total == 2) ++s.m2;
  }
  return s;
}

}  // namespace recap
