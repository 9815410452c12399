#pragma once

#include <string>

#include "taskvid/image.hpp"

namespace taskvid {

// 8-bit RGB PNG files; values map to [-1, 1] via the affine byte conversion.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

}  // namespace taskvid
