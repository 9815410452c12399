#pragma once

#include "taskvid/net.hpp"

namespace taskvid {

// Fresh adapters over the resolved target set: A ~ N(0, 1/r), B = 0, so the
// effective delta at attach time is exactly zero. `rank` above the
// min(d,k)/2 cap is rejected; use capped_rank to pre-clamp with a warning.
template <typename T>
LoraAdapterT<T> lora_attach(const ParamStoreT<T>& params, TargetSpec spec, int rank, double alpha,
                            uint64_t seed);

// Largest admissible rank over the target set: min over layers of
// min(d, k) / 2.
int lora_rank_cap(const ModelConfig& cfg, TargetSpec spec);

// base + (alpha/r) * B * A for one layer
template <typename T>
Tensor<T> lora_effective_weight(const Tensor<T>& base, const Tensor<T>& A, const Tensor<T>& B,
                                double alpha, int rank);

// New parameter store with all deltas folded in; the input store is untouched.
template <typename T>
ParamStoreT<T> lora_merge(const ParamStoreT<T>& params, const LoraAdapterT<T>& adapter);

}  // namespace taskvid
