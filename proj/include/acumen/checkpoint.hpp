#pragma once

#include <string>

#include "acumen/model.hpp"

namespace acumen {

// Versioned binary container: layer descriptor plus the flat parameter
// vector, lossless in double precision.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace acumen
