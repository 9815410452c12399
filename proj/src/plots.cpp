#include "taskvid/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace taskvid {

namespace {

// 3x5 glyphs, column-major bits; enough for numeric tick labels
struct Glyph {
    char ch;
    uint16_t rows[5];  // 3 bits per row
};

const Glyph kGlyphs[] = {
    {'0', {0b111, 0b101, 0b101, 0b101, 0b111}}, {'1', {0b010, 0b110, 0b010, 0b010, 0b111}},
    {'2', {0b111, 0b001, 0b111, 0b100, 0b111}}, {'3', {0b111, 0b001, 0b111, 0b001, 0b111}},
    {'4', {0b101, 0b101, 0b111, 0b001, 0b001}}, {'5', {0b111, 0b100, 0b111, 0b001, 0b111}},
    {'6', {0b111, 0b100, 0b111, 0b101, 0b111}}, {'7', {0b111, 0b001, 0b010, 0b010, 0b010}},
    {'8', {0b111, 0b101, 0b111, 0b101, 0b111}}, {'9', {0b111, 0b101, 0b111, 0b001, 0b111}},
    {'.', {0b000, 0b000, 0b000, 0b000, 0b010}}, {'-', {0b000, 0b000, 0b111, 0b000, 0b000}},
    {'%', {0b101, 0b001, 0b010, 0b100, 0b101}}, {' ', {0b000, 0b000, 0b000, 0b000, 0b000}},
    {'k', {0b100, 0b101, 0b110, 0b110, 0b101}}, {'n', {0b000, 0b000, 0b110, 0b101, 0b101}},
};

const Glyph* find_glyph(char c) {
    for (const auto& g : kGlyphs)
        if (g.ch == c) return &g;
    return nullptr;
}

void put_px(Image& img, int y, int x, float r, float g, float b) {
    if (y < 0 || y >= img.h || x < 0 || x >= img.w) return;
    img.set(y, x, r, g, b);
}

void draw_line(Image& img, int y0, int x0, int y1, int x1, float r, float g, float b) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put_px(img, y0, x0, r, g, b);
        if (x0 == x1 && y0 == y1) break;
        int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

const float kSeriesColors[][3] = {
    {0.2f, 0.5f, 1.0f}, {1.0f, 0.3f, 0.2f}, {0.1f, 0.8f, 0.3f}, {1.0f, 0.8f, 0.0f},
    {0.8f, 0.2f, 0.9f}, {0.0f, 0.8f, 0.8f},
};

}  // namespace

void draw_tiny_text(Image& img, int y, int x, const std::string& text, float r, float g, float b) {
    for (char c : text) {
        if (const Glyph* gl = find_glyph(c)) {
            for (int ry = 0; ry < 5; ++ry)
                for (int rx = 0; rx < 3; ++rx)
                    if (gl->rows[ry] & (1 << (2 - rx))) put_px(img, y + ry, x + rx, r, g, b);
        }
        x += 4;
    }
}

Image render_line_chart(const std::vector<PlotSeries>& series, int height, int width, double y_min,
                        double y_max) {
    Image img(height, width, 1.0f);  // white background
    const int ml = 30, mr = 8, mt = 8, mb = 18;
    int x0 = ml, x1 = width - mr, y0 = height - mb, y1 = mt;

    double xmin = 0, xmax = 1;
    bool got = false;
    for (const auto& s : series)
        for (double x : s.xs) {
            if (!got) {
                xmin = xmax = x;
                got = true;
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
        }
    if (xmax <= xmin) xmax = xmin + 1;
    if (y_max <= y_min) y_max = y_min + 1;

    auto px = [&](double x) {
        return x0 + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (x1 - x0)));
    };
    auto py = [&](double y) {
        return y0 - static_cast<int>(std::lround((y - y_min) / (y_max - y_min) * (y0 - y1)));
    };

    // axes and ticks
    draw_line(img, y0, x0, y0, x1, -1, -1, -1);
    draw_line(img, y0, x0, y1, x0, -1, -1, -1);
    for (int i = 0; i <= 4; ++i) {
        double yv = y_min + (y_max - y_min) * i / 4.0;
        int yy = py(yv);
        draw_line(img, yy, x0 - 2, yy, x0, -1, -1, -1);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", yv);
        draw_tiny_text(img, yy - 2, 2, buf, -0.5f, -0.5f, -0.5f);
    }
    int xticks = std::min<int>(6, static_cast<int>(xmax - xmin) + 1);
    for (int i = 0; i < std::max(2, xticks); ++i) {
        double xv = xmin + (xmax - xmin) * i / std::max(1, xticks - 1);
        int xx = px(xv);
        draw_line(img, y0, xx, y0 + 2, xx, -1, -1, -1);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%g", xv);
        draw_tiny_text(img, y0 + 5, xx - 4, buf, -0.5f, -0.5f, -0.5f);
    }

    for (size_t s = 0; s < series.size(); ++s) {
        const auto& c = kSeriesColors[s % 6];
        const auto& sr = series[s];
        for (size_t i = 0; i + 1 < sr.xs.size(); ++i)
            draw_line(img, py(sr.ys[i]), px(sr.xs[i]), py(sr.ys[i + 1]), px(sr.xs[i + 1]), c[0], c[1],
                      c[2]);
        for (size_t i = 0; i < sr.xs.size(); ++i) {
            int yy = py(sr.ys[i]), xx = px(sr.xs[i]);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) put_px(img, yy + dy, xx + dx, c[0], c[1], c[2]);
        }
    }
    return img;
}

Image render_heatmap(const std::vector<std::vector<double>>& matrix, int cell_px) {
    int rows = static_cast<int>(matrix.size());
    int cols = rows > 0 ? static_cast<int>(matrix[0].size()) : 0;
    const int m = 14;  // margin for indices
    Image img(rows * cell_px + m, cols * cell_px + m, 1.0f);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            double v = std::clamp(matrix[static_cast<size_t>(i)][static_cast<size_t>(j)], 0.0, 1.0);
            // white -> blue ramp
            float r = static_cast<float>(1.0 - v);
            float g = static_cast<float>(1.0 - 0.7 * v);
            float b = 1.0f;
            for (int y = 0; y < cell_px - 1; ++y)
                for (int x = 0; x < cell_px - 1; ++x)
                    put_px(img, m + i * cell_px + y, m + j * cell_px + x, r * 2 - 1, g * 2 - 1, b * 2 - 1);
        }
    for (int i = 0; i < rows; ++i)
        draw_tiny_text(img, m + i * cell_px + cell_px / 2 - 2, 2, std::to_string(i), -1, -1, -1);
    for (int j = 0; j < cols; ++j)
        draw_tiny_text(img, 2, m + j * cell_px + cell_px / 2 - 2, std::to_string(j), -1, -1, -1);
    return img;
}

}  // namespace taskvid
