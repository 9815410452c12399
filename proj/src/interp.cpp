#include "taskvid/interp.hpp"

#include <cmath>

#include "taskvid/errors.hpp"

namespace taskvid {

const char* interp_variant_name(InterpVariant v) {
    switch (v) {
        case InterpVariant::Linear: return "linear";
        case InterpVariant::Quadratic: return "quadratic";
        case InterpVariant::Discrete: return "discrete";
        case InterpVariant::Tiles: return "tiles";
    }
    return "?";
}

std::optional<InterpVariant> interp_variant_from_name(const std::string& s) {
    for (InterpVariant v : {InterpVariant::Linear, InterpVariant::Quadratic, InterpVariant::Discrete,
                            InterpVariant::Tiles})
        if (s == interp_variant_name(v)) return v;
    return std::nullopt;
}

Video interpolate(const Image& x, const Image& y, int frames, const InterpMethod& method) {
    if (!x.same_shape(y)) throw ValidationError("interpolate: source/target shape mismatch");
    if (frames < 2) throw ValidationError("interpolate: need at least 2 frames");

    const int F = frames;
    Video v(F, x.h, x.w);

    switch (method.variant) {
        case InterpVariant::Linear:
        case InterpVariant::Quadratic: {
            for (int f = 0; f < F; ++f) {
                float u = static_cast<float>(f) / (F - 1);
                float wf = method.variant == InterpVariant::Linear ? u : u * u;
                float* dst = v.frame(f);
                for (size_t i = 0; i < x.px.size(); ++i)
                    dst[i] = (1.0f - wf) * x.px[i] + wf * y.px[i];
            }
            // endpoints exact regardless of rounding
            v.set_frame(0, x);
            v.set_frame(F - 1, y);
            break;
        }
        case InterpVariant::Discrete: {
            // sharp transition halfway: frames 1..ceil(F/2) show x (1-based)
            int switch_after = (F + 1) / 2;
            for (int f = 0; f < F; ++f) v.set_frame(f, f < switch_after ? x : y);
            break;
        }
        case InterpVariant::Tiles: {
            int tr = method.tiles_rows, tc = method.tiles_cols;
            if (tr < 1 || tc < 1 || x.h % tr != 0 || x.w % tc != 0)
                throw ValidationError("interpolate: tiles grid must divide the canvas");
            int total = tr * tc;
            int th = x.h / tr, tw = x.w / tc;
            for (int f = 0; f < F; ++f) {
                // tiles switch to target content in raster order
                int switched = static_cast<int>(
                    std::lround(static_cast<double>(total) * f / (F - 1)));
                v.set_frame(f, x);
                float* dst = v.frame(f);
                for (int t = 0; t < switched; ++t) {
                    int y0 = (t / tc) * th, x0 = (t % tc) * tw;
                    for (int yy = y0; yy < y0 + th; ++yy)
                        for (int xx = x0; xx < x0 + tw; ++xx)
                            for (int c = 0; c < 3; ++c) {
                                size_t idx = (static_cast<size_t>(yy) * x.w + xx) * 3 + c;
                                dst[idx] = y.px[idx];
                            }
                }
            }
            break;
        }
    }
    return v;
}

std::vector<Video> build_video_dataset(const TaskSet& tasks, int frames, const InterpMethod& method) {
    if (tasks.train.empty()) throw ValidationError("build_video_dataset: task set has no training pairs");
    std::vector<Video> out;
    out.reserve(tasks.train.size());
    for (const auto& pr : tasks.train) out.push_back(interpolate(pr.input, pr.target, frames, method));
    return out;
}

}  // namespace taskvid
