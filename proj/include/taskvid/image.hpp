#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "taskvid/errors.hpp"
#include "taskvid/hash.hpp"

namespace taskvid {

// RGB image, interleaved row-major, values in [-1, 1].
template <typename T>
struct ImageT {
    int h = 0, w = 0;
    std::vector<T> px;  // h * w * 3

    ImageT() = default;
    ImageT(int h_, int w_, T fill = T(0)) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_ * 3, fill) {}

    T& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    T at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }

    void set(int y, int x, T r, T g, T b) {
        T* p = &px[(static_cast<size_t>(y) * w + x) * 3];
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    int64_t numel() const { return static_cast<int64_t>(px.size()); }
    bool same_shape(const ImageT& o) const { return h == o.h && w == o.w; }

    template <typename U>
    ImageT<U> cast() const {
        ImageT<U> o;
        o.h = h;
        o.w = w;
        o.px.resize(px.size());
        for (size_t i = 0; i < px.size(); ++i) o.px[i] = static_cast<U>(px[i]);
        return o;
    }
};

// Frame sequence, F x H x W x 3. Frame 0 is the source image and frame F-1
// the target when the video encodes a task transition.
template <typename T>
struct VideoT {
    int f = 0, h = 0, w = 0;
    std::vector<T> px;  // f * h * w * 3

    VideoT() = default;
    VideoT(int f_, int h_, int w_, T fill = T(0))
        : f(f_), h(h_), w(w_), px(static_cast<size_t>(f_) * h_ * w_ * 3, fill) {}

    size_t frame_size() const { return static_cast<size_t>(h) * w * 3; }
    T* frame(int i) { return px.data() + frame_size() * i; }
    const T* frame(int i) const { return px.data() + frame_size() * i; }

    ImageT<T> frame_image(int i) const {
        ImageT<T> im(h, w);
        std::copy(frame(i), frame(i) + frame_size(), im.px.begin());
        return im;
    }

    void set_frame(int i, const ImageT<T>& im) {
        if (im.h != h || im.w != w) throw ValidationError("set_frame: shape mismatch");
        std::copy(im.px.begin(), im.px.end(), frame(i));
    }

    int64_t numel() const { return static_cast<int64_t>(px.size()); }
    bool same_shape(const VideoT& o) const { return f == o.f && h == o.h && w == o.w; }

    void clamp_unit() {
        for (auto& x : px) x = std::min(T(1), std::max(T(-1), x));
    }

    template <typename U>
    VideoT<U> cast() const {
        VideoT<U> o;
        o.f = f;
        o.h = h;
        o.w = w;
        o.px.resize(px.size());
        for (size_t i = 0; i < px.size(); ++i) o.px[i] = static_cast<U>(px[i]);
        return o;
    }
};

using Image = ImageT<float>;
using Video = VideoT<float>;

// [-1,1] float <-> 8-bit, affine map with half-away-from-zero rounding.
inline uint8_t to_byte(float v) {
    double x = (static_cast<double>(v) + 1.0) * 0.5 * 255.0;
    long r = std::lround(x);
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    return static_cast<uint8_t>(r);
}

inline float from_byte(uint8_t b) {
    return static_cast<float>(b) / 255.0f * 2.0f - 1.0f;
}

inline uint64_t image_hash(const Image& im) {
    uint64_t h = fnv1a64(&im.h, sizeof im.h);
    h = fnv1a64(&im.w, sizeof im.w, h);
    return fnv1a64(im.px.data(), im.px.size() * sizeof(float), h);
}

inline uint64_t video_hash(const Video& v) {
    uint64_t h = fnv1a64(&v.f, sizeof v.f);
    h = fnv1a64(&v.h, sizeof v.h, h);
    h = fnv1a64(&v.w, sizeof v.w, h);
    return fnv1a64(v.px.data(), v.px.size() * sizeof(float), h);
}

}  // namespace taskvid
