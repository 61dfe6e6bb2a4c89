#pragma once

#include <cstddef>

namespace cloudpatch::detail {

// out[c] += sum over rows of m[r, c] for a row-major rows x cols block, summed
// in row order so the result does not depend on buffer alignment.
template <class T>
void add_column_sums(const T* m, std::size_t rows, std::size_t cols, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = m + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
  }
}

}  // namespace cloudpatch::detail
