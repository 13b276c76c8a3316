#pragma once

#include <string>

#include "vtsdf/neural_field.hpp"

namespace vtsdf {

// Binary field snapshot: versioned header with the full config, parameter
// values stored as little-endian float32. Loading promotes back to double.
void save_field(const FieldParams& params, const std::string& path);
FieldParams load_field(const std::string& path);

}  // namespace vtsdf
