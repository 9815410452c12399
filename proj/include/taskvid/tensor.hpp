#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "taskvid/hash.hpp"
#include "taskvid/rng.hpp"

namespace taskvid {

// Dense row-major tensor. Shapes are small (at most 4 dims in practice) and
// all math goes through the free-function kernels below.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(count(shape), T(0)) {}

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(v.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    // 2-d accessors; rows = shape[0], cols = shape[1]
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }
    T& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
    T at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    void add_(const Tensor& o) {
        for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    }
    void scale_(T a) {
        for (auto& x : v) x *= a;
    }

    bool finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> o(shape);
        for (size_t i = 0; i < v.size(); ++i) o.v[i] = static_cast<U>(v[i]);
        return o;
    }

    static Tensor gaussian(std::vector<int> s, double stddev, RngStream& rng) {
        Tensor t(std::move(s));
        for (auto& x : t.v) x = static_cast<T>(stddev * rng.normal());
        return t;
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Hash of raw values, little-endian. Tensors are stored in float32 on disk,
// so the float instantiation is the one used for freeze-discipline checks.
template <typename T>
uint64_t tensor_hash(const Tensor<T>& t, uint64_t h = 0xcbf29ce484222325ull) {
    for (int d : t.shape) {
        uint32_t u = static_cast<uint32_t>(d);
        unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                              static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
        h = fnv1a64(b, 4, h);
    }
    for (T x : t.v) {
        if constexpr (sizeof(T) == 4) {
            uint32_t u;
            std::memcpy(&u, &x, 4);
            unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                                  static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
            h = fnv1a64(b, 4, h);
        } else {
            uint64_t u;
            std::memcpy(&u, &x, 8);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
            h = fnv1a64(b, 8, h);
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Matrix kernels. All accumulation orders are fixed by the code (lane-wise
// partial sums), so results are bit-deterministic without -ffast-math.
// A, B, C are row-major with explicit leading dimensions.
// ---------------------------------------------------------------------------

// C[MxN] = A[MxK] * B[NxK]^T   (rows of A dotted with rows of B)
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc,
             bool accumulate = false) {
    constexpr int L = 8;
    for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<size_t>(i) * lda;
        T* c = C + static_cast<size_t>(i) * ldc;
        for (int j = 0; j < N; ++j) {
            const T* b = B + static_cast<size_t>(j) * ldb;
            T acc[L] = {};
            int k = 0;
            for (; k + L <= K; k += L)
                for (int u = 0; u < L; ++u) acc[u] += a[k + u] * b[k + u];
            T s = 0;
            for (int u = 0; u < L; ++u) s += acc[u];
            for (; k < K; ++k) s += a[k] * b[k];
            c[j] = accumulate ? c[j] + s : s;
        }
    }
}

// C[MxN] = A[MxK] * B[KxN]
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc,
             bool accumulate = false) {
    for (int i = 0; i < M; ++i) {
        T* c = C + static_cast<size_t>(i) * ldc;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c[j] = 0;
        const T* a = A + static_cast<size_t>(i) * lda;
        for (int k = 0; k < K; ++k) {
            const T aik = a[k];
            const T* b = B + static_cast<size_t>(k) * ldb;
            for (int j = 0; j < N; ++j) c[j] += aik * b[j];
        }
    }
}

// C[MxN] = A[KxM]^T * B[KxN]
template <typename T>
void gemm_tn(int M, int N, int K, const T* A, int lda, const T* B, int ldb, T* C, int ldc,
             bool accumulate = false) {
    for (int i = 0; i < M; ++i) {
        T* c = C + static_cast<size_t>(i) * ldc;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c[j] = 0;
        for (int k = 0; k < K; ++k) {
            const T aki = A[static_cast<size_t>(k) * lda + i];
            const T* b = B + static_cast<size_t>(k) * ldb;
            for (int j = 0; j < N; ++j) c[j] += aki * b[j];
        }
    }
}

}  // namespace taskvid
