#include "taskvid/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "taskvid/errors.hpp"

namespace taskvid {

int Grid::diff_count(const Grid& o) const {
    if (rows != o.rows || cols != o.cols) return -1;
    int d = 0;
    for (size_t i = 0; i < cells.size(); ++i)
        if (cells[i] != o.cells[i]) ++d;
    return d;
}

Palette Palette::default_palette() {
    Palette p;
    p.colors = {Rgb{0x00, 0x00, 0x00},   // 0 black
                Rgb{0x00, 0x74, 0xD9},   // 1 blue
                Rgb{0xFF, 0x41, 0x36},   // 2 red
                Rgb{0x2E, 0xCC, 0x40},   // 3 green
                Rgb{0xFF, 0xDC, 0x00},   // 4 yellow
                Rgb{0xAA, 0xAA, 0xAA},   // 5 gray
                Rgb{0xF0, 0x12, 0xBE},   // 6 magenta
                Rgb{0xFF, 0x85, 0x1B},   // 7 orange
                Rgb{0x7F, 0xDB, 0xFF},   // 8 azure
                Rgb{0x87, 0x0C, 0x25}};  // 9 maroon
    p.border = Rgb{0x40, 0x40, 0x40};    // dark gray, distinct from palette gray
    return p;
}

float Palette::min_color_distance() const {
    float best = 1e9f;
    for (int i = 0; i < 10; ++i)
        for (int j = i + 1; j < 10; ++j) {
            float dr = colors[i].fr() - colors[j].fr();
            float dg = colors[i].fg() - colors[j].fg();
            float db = colors[i].fb() - colors[j].fb();
            best = std::min(best, std::sqrt(dr * dr + dg * dg + db * db));
        }
    return best;
}

Palette load_palette(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw IoError("load_palette: cannot open " + json_path);
    nlohmann::json j;
    in >> j;
    Palette p;
    auto rgb = [](const nlohmann::json& a) {
        return Rgb{static_cast<uint8_t>(a.at(0).get<int>()), static_cast<uint8_t>(a.at(1).get<int>()),
                   static_cast<uint8_t>(a.at(2).get<int>())};
    };
    const auto& cols = j.at("colors");
    if (cols.size() != 10) throw ValidationError("load_palette: expected 10 colors");
    for (int i = 0; i < 10; ++i) p.colors[static_cast<size_t>(i)] = rgb(cols.at(static_cast<size_t>(i)));
    p.border = rgb(j.at("border"));
    return p;
}

void save_palette(const std::string& json_path, const Palette& p) {
    nlohmann::json j;
    for (const auto& c : p.colors) j["colors"].push_back({c.r, c.g, c.b});
    j["border"] = {p.border.r, p.border.g, p.border.b};
    std::ofstream out(json_path);
    if (!out) throw IoError("save_palette: cannot open " + json_path);
    out << j.dump(2) << "\n";
}

GridLayout grid_layout(int rows, int cols, int canvas_h, int canvas_w, int border) {
    if (rows < 1 || rows > 30 || cols < 1 || cols > 30)
        throw ValidationError("grid_layout: grid shape must be within [1,30]^2");
    if (border < 0) throw ValidationError("grid_layout: negative border");
    int avail_h = canvas_h - (rows + 1) * border;
    int avail_w = canvas_w - (cols + 1) * border;
    int cell = std::min(avail_h / std::max(rows, 1), avail_w / std::max(cols, 1));
    if (cell < 4)
        throw ValidationError("grid_layout: grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " does not fit canvas " + std::to_string(canvas_h) + "x" +
                              std::to_string(canvas_w) + " with cell size >= 4 px (got " +
                              std::to_string(cell) + ")");
    GridLayout l;
    l.cell = cell;
    l.border = border;
    l.gh = rows * cell + (rows + 1) * border;
    l.gw = cols * cell + (cols + 1) * border;
    l.oy = (canvas_h - l.gh) / 2;
    l.ox = (canvas_w - l.gw) / 2;
    return l;
}

Image grid_encode(const Grid& g, int canvas_h, int canvas_w, const Palette& p, int border) {
    for (int v : g.cells)
        if (v < 0 || v > 9) throw ValidationError("grid_encode: cell value outside 0..9");
    GridLayout l = grid_layout(g.rows, g.cols, canvas_h, canvas_w, border);
    Image img(canvas_h, canvas_w);
    for (int y = 0; y < canvas_h; ++y)
        for (int x = 0; x < canvas_w; ++x) img.set(y, x, p.border.fr(), p.border.fg(), p.border.fb());
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) {
            const Rgb& col = p.colors[static_cast<size_t>(g.at(r, c))];
            int y0 = l.oy + l.border + r * (l.cell + l.border);
            int x0 = l.ox + l.border + c * (l.cell + l.border);
            for (int y = y0; y < y0 + l.cell; ++y)
                for (int x = x0; x < x0 + l.cell; ++x) img.set(y, x, col.fr(), col.fg(), col.fb());
        }
    return img;
}

Grid grid_decode(const Image& img, int rows, int cols, const Palette& p, int border) {
    GridLayout l = grid_layout(rows, cols, img.h, img.w, border);
    Grid g(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            int y0 = l.oy + l.border + r * (l.cell + l.border);
            int x0 = l.ox + l.border + c * (l.cell + l.border);
            double mr = 0, mg = 0, mb = 0;
            for (int y = y0; y < y0 + l.cell; ++y)
                for (int x = x0; x < x0 + l.cell; ++x) {
                    mr += img.at(y, x, 0);
                    mg += img.at(y, x, 1);
                    mb += img.at(y, x, 2);
                }
            double n = static_cast<double>(l.cell) * l.cell;
            mr /= n;
            mg /= n;
            mb /= n;
            int best = 0;
            double best_d = 1e18;
            for (int k = 0; k < 10; ++k) {
                double dr = mr - p.colors[static_cast<size_t>(k)].fr();
                double dg = mg - p.colors[static_cast<size_t>(k)].fg();
                double db = mb - p.colors[static_cast<size_t>(k)].fb();
                double d = dr * dr + dg * dg + db * db;
                if (d < best_d) {  // ties keep the lowest palette index
                    best_d = d;
                    best = k;
                }
            }
            g.at(r, c) = best;
        }
    return g;
}

// ---------------------------------------------------------------------------
// Pose rendering
// ---------------------------------------------------------------------------

const char* pose_part_name(PosePart p) {
    switch (p) {
        case PosePart::Head: return "head";
        case PosePart::Torso: return "torso";
        case PosePart::Arms: return "arms";
        case PosePart::Legs: return "legs";
    }
    return "?";
}

namespace {

Rgb pose_color(PosePart p) {
    switch (p) {
        case PosePart::Head: return Rgb{255, 255, 255};
        case PosePart::Torso: return Rgb{0, 0, 255};
        case PosePart::Arms: return Rgb{255, 0, 0};
        case PosePart::Legs: return Rgb{0, 255, 0};
    }
    return Rgb{};
}

int draw_rank(PosePart p) {
    // later draws win; legs -> arms -> torso -> head
    switch (p) {
        case PosePart::Legs: return 0;
        case PosePart::Arms: return 1;
        case PosePart::Torso: return 2;
        case PosePart::Head: return 3;
    }
    return 0;
}

float point_segment_dist(float px, float py, float ax, float ay, float bx, float by) {
    float dx = bx - ax, dy = by - ay;
    float len2 = dx * dx + dy * dy;
    float t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0f;
    t = std::clamp(t, 0.0f, 1.0f);
    float qx = ax + t * dx, qy = ay + t * dy;
    return std::hypot(px - qx, py - qy);
}

}  // namespace

namespace {

struct StrokeOwner {
    int fig = -1, stroke = -1;
    bool set = false;
};

void paint_figures(Image& img, const std::vector<PoseFigure>& figures,
                   const std::array<Rgb, kPoseParts>& colors, std::vector<StrokeOwner>* owner) {
    const int h = img.h, w = img.w;
    // paint in rank order so overlapping strokes resolve legs->arms->torso->head
    for (int rank = 0; rank < 4; ++rank) {
        for (size_t fi = 0; fi < figures.size(); ++fi) {
            for (size_t si = 0; si < figures[fi].strokes.size(); ++si) {
                const PoseStroke& s = figures[fi].strokes[si];
                if (draw_rank(s.part) != rank) continue;
                Rgb col = colors[static_cast<size_t>(s.part)];
                // rasterize: pixels within `thickness` of any segment (or point)
                float minx = 1e9f, miny = 1e9f, maxx = -1e9f, maxy = -1e9f;
                for (auto& pt : s.points) {
                    minx = std::min(minx, pt.first);
                    maxx = std::max(maxx, pt.first);
                    miny = std::min(miny, pt.second);
                    maxy = std::max(maxy, pt.second);
                }
                int x0 = std::max(0, static_cast<int>(std::floor(minx - s.thickness - 1)));
                int x1 = std::min(w - 1, static_cast<int>(std::ceil(maxx + s.thickness + 1)));
                int y0 = std::max(0, static_cast<int>(std::floor(miny - s.thickness - 1)));
                int y1 = std::min(h - 1, static_cast<int>(std::ceil(maxy + s.thickness + 1)));
                for (int y = y0; y <= y1; ++y)
                    for (int x = x0; x <= x1; ++x) {
                        float px = static_cast<float>(x), py = static_cast<float>(y);
                        float d = 1e9f;
                        if (s.points.size() == 1)
                            d = std::hypot(px - s.points[0].first, py - s.points[0].second);
                        else
                            for (size_t k = 0; k + 1 < s.points.size(); ++k)
                                d = std::min(d, point_segment_dist(px, py, s.points[k].first,
                                                                   s.points[k].second, s.points[k + 1].first,
                                                                   s.points[k + 1].second));
                        if (d <= s.thickness) {
                            img.set(y, x, from_byte(col.r), from_byte(col.g), from_byte(col.b));
                            if (owner) {
                                StrokeOwner& o = (*owner)[static_cast<size_t>(y) * w + x];
                                o.fig = static_cast<int>(fi);
                                o.stroke = static_cast<int>(si);
                                o.set = true;
                            }
                        }
                    }
            }
        }
    }
}

}  // namespace

void draw_pose_figures(Image& img, const std::vector<PoseFigure>& figures,
                       const std::array<Rgb, kPoseParts>& colors) {
    paint_figures(img, figures, colors, nullptr);
}

Image render_pose_target(const std::vector<PoseFigure>& figures, int h, int w,
                         PoseAnnotation* annotation) {
    Image img(h, w, -1.0f);
    std::vector<StrokeOwner> owner(static_cast<size_t>(h) * w);
    paint_figures(img, figures,
                  {pose_color(PosePart::Head), pose_color(PosePart::Torso), pose_color(PosePart::Arms),
                   pose_color(PosePart::Legs)},
                  &owner);

    if (annotation) {
        *annotation = PoseAnnotation{};
        // exact centroids of the pixels each stroke still owns after overdraw
        for (size_t fi = 0; fi < figures.size(); ++fi)
            for (size_t si = 0; si < figures[fi].strokes.size(); ++si) {
                double sx = 0, sy = 0;
                int64_t n = 0;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const StrokeOwner& o = owner[static_cast<size_t>(y) * w + x];
                        if (o.set && o.fig == static_cast<int>(fi) && o.stroke == static_cast<int>(si)) {
                            sx += x;
                            sy += y;
                            ++n;
                        }
                    }
                if (n > 0) {
                    PosePart part = figures[fi].strokes[si].part;
                    annotation->centroids[static_cast<size_t>(part)].emplace_back(
                        static_cast<float>(sx / n), static_cast<float>(sy / n));
                }
            }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

Image render_mask_target(const Mask& mask) {
    Image img(mask.h, mask.w);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) {
            float v = mask.at(y, x) ? 1.0f : -1.0f;
            img.set(y, x, v, v, v);
        }
    return img;
}

Mask mask_decode(const Image& img) {
    Mask m(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            float mean = (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0f;
            m.at(y, x) = mean > 0.0f ? 1 : 0;
        }
    return m;
}

// ---------------------------------------------------------------------------
// Classification grids
// ---------------------------------------------------------------------------

std::vector<ClassSymbol> default_symbols() {
    return {
        {SymbolShape::Circle, Rgb{255, 64, 64}},    // red circle
        {SymbolShape::Cross, Rgb{64, 255, 64}},     // green cross
        {SymbolShape::Triangle, Rgb{64, 128, 255}}, // blue triangle
        {SymbolShape::Square, Rgb{255, 224, 0}},    // yellow square
        {SymbolShape::Star, Rgb{255, 64, 255}},     // magenta star
        {SymbolShape::Diamond, Rgb{0, 224, 224}},   // cyan diamond
        {SymbolShape::Bar, Rgb{255, 144, 0}},       // orange bar
    };
}

Image render_symbol_tile(const ClassSymbol& s, int tile_h, int tile_w) {
    Image img(tile_h, tile_w, -1.0f);
    float cx = (tile_w - 1) * 0.5f, cy = (tile_h - 1) * 0.5f;
    float rad = 0.38f * std::min(tile_h, tile_w);
    float fr = from_byte(s.color.r), fg = from_byte(s.color.g), fb = from_byte(s.color.b);
    auto inside = [&](float x, float y) -> bool {
        float dx = x - cx, dy = y - cy;
        switch (s.shape) {
            case SymbolShape::Circle:
                return dx * dx + dy * dy <= rad * rad;
            case SymbolShape::Cross:
                return (std::abs(dx) <= rad * 0.35f && std::abs(dy) <= rad) ||
                       (std::abs(dy) <= rad * 0.35f && std::abs(dx) <= rad);
            case SymbolShape::Triangle:
                return dy >= -rad && dy <= rad * 0.9f &&
                       std::abs(dx) <= (dy + rad) * 0.55f;
            case SymbolShape::Square:
                return std::abs(dx) <= rad * 0.85f && std::abs(dy) <= rad * 0.85f;
            case SymbolShape::Star: {
                float a = std::atan2(dy, dx);
                float r5 = rad * (0.55f + 0.45f * std::cos(5.0f * a));
                return dx * dx + dy * dy <= r5 * r5;
            }
            case SymbolShape::Diamond:
                return std::abs(dx) + std::abs(dy) <= rad;
            case SymbolShape::Bar:
                return std::abs(dx) <= rad && std::abs(dy) <= rad * 0.3f;
        }
        return false;
    };
    for (int y = 0; y < tile_h; ++y)
        for (int x = 0; x < tile_w; ++x)
            if (inside(static_cast<float>(x), static_cast<float>(y))) img.set(y, x, fr, fg, fb);
    return img;
}

namespace {

void blit(Image& dst, const Image& src, int y0, int x0) {
    for (int y = 0; y < src.h; ++y)
        for (int x = 0; x < src.w; ++x)
            for (int c = 0; c < 3; ++c) dst.at(y0 + y, x0 + x, c) = src.at(y, x, c);
}

Image crop(const Image& src, int y0, int x0, int h, int w) {
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(y0 + y, x0 + x, c);
    return out;
}

}  // namespace

std::pair<Image, Image> build_classification_grid(const std::vector<Image>& tiles,
                                                  const std::array<int, 16>& labels,
                                                  const std::vector<ClassSymbol>& symbols) {
    if (tiles.size() != 16) throw ValidationError("build_classification_grid: need 16 tiles");
    int th = tiles[0].h, tw = tiles[0].w;
    for (const auto& t : tiles)
        if (t.h != th || t.w != tw) throw ValidationError("build_classification_grid: tile size mismatch");
    if (symbols.size() > 10) throw ValidationError("build_classification_grid: at most 10 classes");
    for (int l : labels)
        if (l < 0 || l >= static_cast<int>(symbols.size()))
            throw ValidationError("build_classification_grid: label out of range");

    Image input(4 * th, 4 * tw), target(4 * th, 4 * tw);
    for (int i = 0; i < 16; ++i) {
        int r = i / 4, c = i % 4;
        blit(input, tiles[static_cast<size_t>(i)], r * th, c * tw);
        blit(target, render_symbol_tile(symbols[static_cast<size_t>(labels[static_cast<size_t>(i)])], th, tw),
             r * th, c * tw);
    }
    return {input, target};
}

std::array<int, 16> decode_classification_grid(const Image& img,
                                               const std::vector<ClassSymbol>& symbols) {
    if (img.h % 4 != 0 || img.w % 4 != 0)
        throw ValidationError("decode_classification_grid: image does not partition into 4x4 tiles");
    int th = img.h / 4, tw = img.w / 4;
    std::vector<Image> refs;
    refs.reserve(symbols.size());
    for (const auto& s : symbols) refs.push_back(render_symbol_tile(s, th, tw));

    std::array<int, 16> out{};
    for (int i = 0; i < 16; ++i) {
        int r = i / 4, c = i % 4;
        Image tile = crop(img, r * th, c * tw, th, tw);
        int best = 0;
        double best_d = 1e30;
        for (size_t k = 0; k < refs.size(); ++k) {
            double d = 0;
            for (size_t j = 0; j < tile.px.size(); ++j) {
                double e = static_cast<double>(tile.px[j]) - refs[k].px[j];
                d += e * e;
            }
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(k);
            }
        }
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Task sets
// ---------------------------------------------------------------------------

const char* task_kind_name(TaskKind k) {
    switch (k) {
        case TaskKind::Segmentation: return "segmentation";
        case TaskKind::Pose: return "pose";
        case TaskKind::Colorization: return "colorization";
        case TaskKind::Jigsaw: return "jigsaw";
        case TaskKind::Inpainting: return "inpainting";
        case TaskKind::Arc: return "arc";
        case TaskKind::ClassificationGrid: return "classification_grid";
        case TaskKind::Generic: return "generic";
    }
    return "?";
}

std::optional<TaskKind> task_kind_from_name(const std::string& s) {
    for (TaskKind k : {TaskKind::Segmentation, TaskKind::Pose, TaskKind::Colorization, TaskKind::Jigsaw,
                       TaskKind::Inpainting, TaskKind::Arc, TaskKind::ClassificationGrid, TaskKind::Generic})
        if (s == task_kind_name(k)) return k;
    return std::nullopt;
}

uint64_t taskset_hash(const TaskSet& t) {
    uint64_t h = fnv1a64(t.name);
    h = fnv1a64(task_kind_name(t.kind), strlen(task_kind_name(t.kind)), h);
    for (const auto& list : {&t.train, &t.test})
        for (const auto& pr : *list) {
            uint64_t a = image_hash(pr.input), b = image_hash(pr.target);
            h = fnv1a64(&a, sizeof a, h);
            h = fnv1a64(&b, sizeof b, h);
        }
    return h;
}

}  // namespace taskvid
