#pragma once

#include <optional>
#include <string>
#include <vector>

#include "taskvid/codec.hpp"
#include "taskvid/image.hpp"

namespace taskvid {

enum class InterpVariant { Linear, Quadratic, Discrete, Tiles };

struct InterpMethod {
    InterpVariant variant = InterpVariant::Linear;
    int tiles_rows = 4, tiles_cols = 4;  // Tiles only; must divide (H, W)
};

const char* interp_variant_name(InterpVariant v);
std::optional<InterpVariant> interp_variant_from_name(const std::string& s);

// Transition video from x to y. Frame 0 is exactly x and frame F-1 exactly y
// for every variant.
Video interpolate(const Image& x, const Image& y, int frames, const InterpMethod& method);

// One transition video per training pair, order preserving.
std::vector<Video> build_video_dataset(const TaskSet& tasks, int frames, const InterpMethod& method);

}  // namespace taskvid
