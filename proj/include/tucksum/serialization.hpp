#pragma once

#include <iosfwd>
#include <string>

#include "tucksum/dense_tensor.hpp"

namespace tucksum {

// Binary fixture format, little-endian: u64 order, u64 dims[order], then
// the column-major f64 payload.
void save_tensor(std::ostream& os, const DenseTensor& t);
[[nodiscard]] DenseTensor load_tensor(std::istream& is);

void save_tensor(const std::string& path, const DenseTensor& t);
[[nodiscard]] DenseTensor load_tensor(const std::string& path);

} // namespace tucksum
