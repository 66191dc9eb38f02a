#pragma once

// Matrix Market coordinate I/O for constraint matrices.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "recon/csv.hpp"
#include "recon/sparse_core.hpp"

namespace recon {

/// `%%MatrixMarket matrix coordinate real general`, 1-based, row-major entry order.
template <typename Scalar>
void write_matrix_market(std::ostream& out, const SparseConstraintMatrix<Scalar>& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  const auto& s = a.storage();
  for (Index r = 0; r < s.outerSize(); ++r) {
    for (typename SparseConstraintMatrix<Scalar>::Storage::InnerIterator it(s, r); it; ++it) {
      out << (it.row() + 1) << ' ' << (it.col() + 1) << ' '
          << format_number(static_cast<double>(it.value())) << '\n';
    }
  }
}

template <typename Scalar>
void write_matrix_market(const std::string& path, const SparseConstraintMatrix<Scalar>& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_matrix_market(out, a);
  if (!out) throw Error("failed writing '" + path + "'");
}

/// Reads the coordinate real/integer general format written above.
template <typename Scalar = double>
SparseConstraintMatrix<Scalar> read_matrix_market(std::istream& in,
                                                  const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket matrix coordinate", 0) != 0) {
    throw ParseError(source + ": missing Matrix Market coordinate banner");
  }
  if (line.find("general") == std::string::npos ||
      (line.find("real") == std::string::npos && line.find("integer") == std::string::npos)) {
    throw ParseError(source + ": only real/integer general matrices are supported");
  }
  do {
    if (!std::getline(in, line)) throw ParseError(source + ": missing size line");
  } while (line.empty() || line[0] == '%');
  Index rows = 0, cols = 0, nnz = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) {
      throw ParseError(source + ": malformed size line");
    }
  }
  std::vector<typename SparseConstraintMatrix<Scalar>::Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (Index e = 0; e < nnz; ++e) {
    if (!std::getline(in, line)) throw ParseError(source + ": expected " + std::to_string(nnz) + " entries");
    std::istringstream ss(line);
    Index r = 0, c = 0;
    std::string value;
    double v = 0.0;
    if (!(ss >> r >> c >> value) || !parse_number(value, v) || r < 1 || r > rows || c < 1 ||
        c > cols) {
      throw ParseError(source + ": malformed entry '" + line + "'");
    }
    triplets.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), static_cast<Scalar>(v));
  }
  return SparseConstraintMatrix<Scalar>::from_triplets(rows, cols, triplets);
}

}  // namespace recon
