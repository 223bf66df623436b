#include "spinegnn/matrix.hpp"

#include <algorithm>

#include "spinegnn/error.hpp"

namespace spinegnn {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw ShapeError("matrix data length " + std::to_string(data.size()) + " does not match " +
                     std::to_string(r) + "x" + std::to_string(c));
  }
}

void Matrix::fill(double v) { std::fill(data.begin(), data.end(), v); }

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

}  // namespace spinegnn
