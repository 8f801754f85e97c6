/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 */

#include "strata/mmio.hpp"

#include <fstream>
#include <sstream>
#include <algorithm>

namespace strata {

CooMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrKind::Usage, "empty matrix market stream");
  std::istringstream hdr(line);
  std::string banner, object, fmt, field, symmetry;
  hdr >> banner >> object >> fmt >> field >> symmetry;
  if (banner != "%%MatrixMarket" || object != "matrix" || fmt != "coordinate")
    fail(ErrKind::Usage, "unsupported matrix market header: " + line);
  bool pattern = field == "pattern";
  bool symmetric = symmetry == "symmetric";
  if (field != "real" && field != "integer" && !pattern)
    fail(ErrKind::Usage, "unsupported matrix market field: " + field);

  // Skip comments.
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream dims(line);
  int64_t rows = 0, cols = 0, nnz = 0;
  if (!(dims >> rows >> cols >> nnz)) fail(ErrKind::Usage, "bad matrix market size line");

  CooMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.triplets.reserve(nnz);
  for (int64_t k = 0; k < nnz; ++k) {
    if (!std::getline(in, line)) fail(ErrKind::Usage, "truncated matrix market entries");
    std::istringstream ls(line);
    int64_t i = 0, j = 0;
    double v = 1.0;
    if (!(ls >> i >> j)) fail(ErrKind::Usage, "bad matrix market entry: " + line);
    if (!pattern) ls >> v;
    if (i < 1 || i > rows || j < 1 || j > cols)
      fail(ErrKind::Usage, "matrix market entry out of range: " + line);
    m.triplets.push_back({i - 1, j - 1, v});
    if (symmetric && i != j) m.triplets.push_back({j - 1, i - 1, v});
  }
  return m;
}

CooMatrix read_matrix_market_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrKind::Usage, "cannot open " + path);
  return read_matrix_market(f);
}

void write_matrix_market(std::ostream& out, const CooMatrix& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  std::vector<Triplet> t = m.triplets;
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  out << m.rows << " " << m.cols << " " << t.size() << "\n";
  out.precision(17);
  for (const auto& e : t) out << e.row + 1 << " " << e.col + 1 << " " << e.value << "\n";
}

void write_matrix_market_file(const std::string& path, const CooMatrix& m) {
  std::ofstream f(path);
  if (!f) fail(ErrKind::Usage, "cannot open " + path + " for writing");
  write_matrix_market(f, m);
}

}  // namespace strata
