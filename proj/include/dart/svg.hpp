#pragma once

#include <string>
#include <vector>

#include "dart/types.hpp"

namespace dart {

// points is N x 2; one circle per row, colored by label. Layout and palette
// are fixed so identical inputs yield identical bytes.
std::string build_scatter_svg(const Matrix& points, const std::vector<std::string>& labels,
                              const std::string& title);

void write_scatter_svg(const std::string& path, const Matrix& points,
                       const std::vector<std::string>& labels, const std::string& title);

}  // namespace dart
