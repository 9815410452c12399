#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "taskvid/image.hpp"

namespace taskvid {

// ---------------------------------------------------------------------------
// Grids (ARC-style), values 0..9
// ---------------------------------------------------------------------------

struct Grid {
    int rows = 0, cols = 0;
    std::vector<int> cells;  // rows * cols, values 0..9

    Grid() = default;
    Grid(int r, int c, int fill = 0) : rows(r), cols(c), cells(static_cast<size_t>(r) * c, fill) {}

    int& at(int r, int c) { return cells[static_cast<size_t>(r) * cols + c]; }
    int at(int r, int c) const { return cells[static_cast<size_t>(r) * cols + c]; }
    bool operator==(const Grid& o) const {
        return rows == o.rows && cols == o.cols && cells == o.cells;
    }
    // number of differing cells; returns -1 when shapes differ
    int diff_count(const Grid& o) const;
};

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
    float fr() const { return from_byte(r); }
    float fg() const { return from_byte(g); }
    float fb() const { return from_byte(b); }
};

// The 10 grid colors. The source material never pins RGB values, so these are
// project data, overridable from JSON (see load_palette).
struct Palette {
    std::array<Rgb, 10> colors;
    Rgb border;  // painted on background and cell boundaries, not matchable

    static Palette default_palette();
    // smallest pairwise L2 distance between palette colors in [-1,1]^3 space
    float min_color_distance() const;
};

Palette load_palette(const std::string& json_path);
void save_palette(const std::string& json_path, const Palette& p);

// Geometry of a grid rendering on a canvas: a border of `border` px around
// every cell (default 1), integer cell size, centered block.
struct GridLayout {
    int cell = 0;       // cell side in px
    int border = 1;     // border width per cell boundary
    int ox = 0, oy = 0; // top-left of the bordered block
    int gh = 0, gw = 0; // bordered block size
};

GridLayout grid_layout(int rows, int cols, int canvas_h, int canvas_w, int border = 1);

Image grid_encode(const Grid& g, int canvas_h, int canvas_w,
                  const Palette& p = Palette::default_palette(), int border = 1);
Grid grid_decode(const Image& img, int rows, int cols,
                 const Palette& p = Palette::default_palette(), int border = 1);

// ---------------------------------------------------------------------------
// Pose
// ---------------------------------------------------------------------------

enum class PosePart { Head = 0, Torso = 1, Arms = 2, Legs = 3 };
constexpr int kPoseParts = 4;
const char* pose_part_name(PosePart p);

struct PoseAnnotation {
    // annotated component centroids per part class, image pixel coordinates
    std::array<std::vector<std::pair<float, float>>, kPoseParts> centroids;  // (x, y)
    // average inter-head distance in px; <= 0 means unavailable
    float inter_head_distance = 0.0f;

    size_t total() const {
        size_t n = 0;
        for (const auto& c : centroids) n += c.size();
        return n;
    }
};

// One stroke of a stick figure: a polyline with a thickness, tagged by part.
struct PoseStroke {
    PosePart part;
    std::vector<std::pair<float, float>> points;  // (x, y)
    float thickness = 1.5f;
};

struct PoseFigure {
    std::vector<PoseStroke> strokes;
};

// Renders figures on black, legs then arms then torso then head, in the four
// component colors (head white, torso blue, arms red, legs green). When
// `annotation` is given it receives exact centroids of the painted pixels.
Image render_pose_target(const std::vector<PoseFigure>& figures, int h, int w,
                         PoseAnnotation* annotation = nullptr);

// Same rasterizer with caller-chosen part colors, drawn over `img` in place.
void draw_pose_figures(Image& img, const std::vector<PoseFigure>& figures,
                       const std::array<Rgb, kPoseParts>& colors);

// ---------------------------------------------------------------------------
// Binary masks
// ---------------------------------------------------------------------------

struct Mask {
    int h = 0, w = 0;
    std::vector<uint8_t> m;  // 0 or 1

    Mask() = default;
    Mask(int h_, int w_, uint8_t fill = 0) : h(h_), w(w_), m(static_cast<size_t>(h_) * w_, fill) {}
    uint8_t& at(int y, int x) { return m[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return m[static_cast<size_t>(y) * w + x]; }
    bool operator==(const Mask& o) const { return h == o.h && w == o.w && m == o.m; }
};

Image render_mask_target(const Mask& mask);
Mask mask_decode(const Image& img);  // pixel mean > 0 -> foreground

// ---------------------------------------------------------------------------
// Classification grids (4x4 photo mosaic -> 4x4 symbol mosaic)
// ---------------------------------------------------------------------------

enum class SymbolShape { Circle, Cross, Triangle, Square, Star, Diamond, Bar };

struct ClassSymbol {
    SymbolShape shape;
    Rgb color;
};

// 7 high-contrast glyph/color pairs for up to 7 classes
std::vector<ClassSymbol> default_symbols();

Image render_symbol_tile(const ClassSymbol& s, int tile_h, int tile_w);

// input mosaic from 16 tiles, target mosaic from the 16 labels' symbols
std::pair<Image, Image> build_classification_grid(const std::vector<Image>& tiles,
                                                  const std::array<int, 16>& labels,
                                                  const std::vector<ClassSymbol>& symbols);

// nearest reference symbol tile by L2, ties to the lowest class id
std::array<int, 16> decode_classification_grid(const Image& img,
                                               const std::vector<ClassSymbol>& symbols);

// ---------------------------------------------------------------------------
// Task sets
// ---------------------------------------------------------------------------

enum class TaskKind {
    Segmentation,
    Pose,
    Colorization,
    Jigsaw,
    Inpainting,
    Arc,
    ClassificationGrid,
    Generic,
};

const char* task_kind_name(TaskKind k);
std::optional<TaskKind> task_kind_from_name(const std::string& s);

struct TaskPair {
    Image input;
    Image target;
};

// Ground-truth side data, parallel to the pair lists. Only the vectors
// matching `kind` are populated.
struct TaskTruth {
    std::vector<Mask> masks;
    std::vector<PoseAnnotation> poses;
    std::vector<Grid> in_grids, out_grids;
    std::vector<std::array<int, 16>> labels;
};

struct TaskSet {
    std::string name;
    TaskKind kind = TaskKind::Generic;
    int height = 0, width = 0;
    std::vector<TaskPair> train, test;
    TaskTruth train_truth, test_truth;
};

uint64_t taskset_hash(const TaskSet& t);

}  // namespace taskvid
