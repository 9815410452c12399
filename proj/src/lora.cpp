#include "taskvid/lora.hpp"

#include <cmath>

#include "taskvid/errors.hpp"

namespace taskvid {

int lora_rank_cap(const ModelConfig& cfg, TargetSpec spec) {
    cfg.validate();
    int cap = 1 << 30;
    const int d = cfg.dim, pd = cfg.patch_dim();
    auto dims = [&](const std::string& name) -> std::pair<int, int> {
        if (name == "cond.proj.w") return {d, d};
        if (name == "head.w") return {pd, d};
        if (name.find("mlp.w1") != std::string::npos) return {4 * d, d};
        if (name.find("mlp.w2") != std::string::npos) return {d, 4 * d};
        return {d, d};  // attention projections
    };
    for (const auto& name : resolve_targets(cfg, spec)) {
        auto [rows, cols] = dims(name);
        cap = std::min(cap, std::min(rows, cols) / 2);
    }
    return cap;
}

template <typename T>
LoraAdapterT<T> lora_attach(const ParamStoreT<T>& params, TargetSpec spec, int rank, double alpha,
                            uint64_t seed) {
    if (rank < 1) throw ValidationError("lora_attach: rank must be >= 1");
    auto names = resolve_targets(params.cfg, spec);
    if (names.empty()) throw ValidationError("lora_attach: target spec resolves to no layers");

    LoraAdapterT<T> a;
    a.spec = spec;
    a.rank = rank;
    a.alpha = alpha;
    for (const auto& name : names) {
        const Tensor<T>& base = params.get(name);
        int d = base.rows(), k = base.cols();
        if (rank > std::min(d, k) / 2)
            throw ValidationError("lora_attach: rank " + std::to_string(rank) + " exceeds cap " +
                                  std::to_string(std::min(d, k) / 2) + " for layer " + name);
        RngStream rng(derive_seed(seed, fnv1a64(name), 0x10aa));
        Tensor<T> A = Tensor<T>::gaussian({rank, k}, 1.0 / std::sqrt(static_cast<double>(rank)), rng);
        Tensor<T> B({d, rank});  // zeros: attach is a no-op on the forward pass
        a.layers.emplace(name, std::make_pair(std::move(A), std::move(B)));
    }
    return a;
}

template <typename T>
Tensor<T> lora_effective_weight(const Tensor<T>& base, const Tensor<T>& A, const Tensor<T>& B,
                                double alpha, int rank) {
    if (A.rows() != rank || B.cols() != rank || B.rows() != base.rows() || A.cols() != base.cols())
        throw ValidationError("lora_effective_weight: shape mismatch");
    Tensor<T> out = base;
    Tensor<T> delta({base.rows(), base.cols()});
    gemm_nn(B.rows(), A.cols(), rank, B.data(), B.cols(), A.data(), A.cols(), delta.data(), delta.cols());
    T s = static_cast<T>(alpha / rank);
    for (int64_t i = 0; i < out.numel(); ++i) out.v[static_cast<size_t>(i)] += s * delta.v[static_cast<size_t>(i)];
    return out;
}

template <typename T>
ParamStoreT<T> lora_merge(const ParamStoreT<T>& params, const LoraAdapterT<T>& adapter) {
    ParamStoreT<T> merged = params;
    for (const auto& [name, ab] : adapter.layers)
        merged.get(name) =
            lora_effective_weight(params.get(name), ab.first, ab.second, adapter.alpha, adapter.rank);
    return merged;
}

template LoraAdapterT<float> lora_attach(const ParamStoreT<float>&, TargetSpec, int, double, uint64_t);
template LoraAdapterT<double> lora_attach(const ParamStoreT<double>&, TargetSpec, int, double, uint64_t);
template Tensor<float> lora_effective_weight(const Tensor<float>&, const Tensor<float>&,
                                             const Tensor<float>&, double, int);
template Tensor<double> lora_effective_weight(const Tensor<double>&, const Tensor<double>&,
                                              const Tensor<double>&, double, int);
template ParamStoreT<float> lora_merge(const ParamStoreT<float>&, const LoraAdapterT<float>&);
template ParamStoreT<double> lora_merge(const ParamStoreT<double>&, const LoraAdapterT<double>&);

}  // namespace taskvid
