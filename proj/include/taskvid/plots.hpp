#pragma once

#include <string>
#include <vector>

#include "taskvid/image.hpp"

namespace taskvid {

struct PlotSeries {
    std::string label;
    std::vector<double> xs, ys;
};

// Line chart with axes, ticks and per-series colors. y range defaults to the
// data range (padded); pass y_min/y_max to pin it (e.g. 0..1 for accuracies).
Image render_line_chart(const std::vector<PlotSeries>& series, int height = 240, int width = 320,
                        double y_min = 0.0, double y_max = 1.0);

// Row-normalized heatmap (values in [0, 1]) with cell shading.
Image render_heatmap(const std::vector<std::vector<double>>& matrix, int cell_px = 24);

// 3x5 bitmap digits for tick labels; exposed for reuse in report images.
void draw_tiny_text(Image& img, int y, int x, const std::string& text, float r, float g, float b);

}  // namespace taskvid
