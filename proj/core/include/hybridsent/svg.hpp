#pragma once

#include <string>
#include <vector>

#include "hybridsent/tensor.hpp"

namespace hybridsent {

// Two-color sentiment scatter (axis-free, legend included). Output bytes are
// a pure function of the inputs.
std::string scatter_svg(const Tensord& coords, const std::vector<int>& labels);

void emit_plot(const Tensord& coords, const std::vector<int>& labels, const std::string& path);

}  // namespace hybridsent
