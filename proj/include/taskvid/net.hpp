#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "taskvid/image.hpp"
#include "taskvid/schedule.hpp"
#include "taskvid/tensor.hpp"

namespace taskvid {

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

struct ModelConfig {
    int frames = 9;
    int height = 32, width = 32;
    int patch = 4;
    int dim = 128;
    int heads = 4;
    int blocks = 6;
    int tsteps = 200;  // diffusion steps the timestep table is sized for

    int patches_y() const { return height / patch; }
    int patches_x() const { return width / patch; }
    int patches_per_frame() const { return patches_y() * patches_x(); }
    int tokens() const { return frames * patches_per_frame(); }
    int patch_dim() const { return patch * patch * 3; }
    int head_dim() const { return dim / heads; }

    void validate() const;
    // closed-form trainable parameter count of the base model
    int64_t param_count() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& s);
    uint64_t hash() const { return fnv1a64(to_json()); }
    bool operator==(const ModelConfig& o) const = default;
};

// Named tensor store for the denoiser. Keys are stable layer names
// ("block0.attn.wq", "embed.patch.w", ...); map order doubles as the
// serialization and hashing order.
template <typename T>
struct ParamStoreT {
    ModelConfig cfg;
    std::map<std::string, Tensor<T>> tensors;

    const Tensor<T>& get(const std::string& name) const;
    Tensor<T>& get(const std::string& name);
    int64_t total_numel() const;

    template <typename U>
    ParamStoreT<U> cast() const {
        ParamStoreT<U> o;
        o.cfg = cfg;
        for (const auto& [k, t] : tensors) o.tensors.emplace(k, t.template cast<U>());
        return o;
    }
};

using DenoiserParams = ParamStoreT<float>;

template <typename T>
uint64_t params_hash(const ParamStoreT<T>& p);

// Deterministic initialization: scaled Gaussian weights (std 1/sqrt(fan_in),
// residual-exit projections additionally scaled by 1/sqrt(2*blocks)),
// embeddings std 0.02, norm scales 1, norm offsets 0.
template <typename T>
ParamStoreT<T> init_params(const ModelConfig& cfg, uint64_t seed);

// ---------------------------------------------------------------------------
// LoRA adapters (low-rank deltas over selected weight matrices)
// ---------------------------------------------------------------------------

enum class TargetSpec { QK, VO, QKVO, AllLinear };

const char* target_spec_name(TargetSpec s);
std::optional<TargetSpec> target_spec_from_name(const std::string& s);

// Base tensor names covered by a target spec. AllLinear is every
// matrix-multiply weight except the embeddings (attention projections, MLP,
// conditioning projection, output head).
std::vector<std::string> resolve_targets(const ModelConfig& cfg, TargetSpec spec);

template <typename T>
struct LoraAdapterT {
    TargetSpec spec = TargetSpec::QKVO;
    int rank = 0;
    double alpha = 32.0;
    // key: base tensor name; A is (r x k), B is (d x r) for a (d x k) base
    std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> layers;  // {A, B}

    double scaling() const { return alpha / rank; }
    int64_t trainable_numel() const;

    template <typename U>
    LoraAdapterT<U> cast() const {
        LoraAdapterT<U> o;
        o.spec = spec;
        o.rank = rank;
        o.alpha = alpha;
        for (const auto& [k, ab] : layers)
            o.layers.emplace(k, std::make_pair(ab.first.template cast<U>(), ab.second.template cast<U>()));
        return o;
    }
};

using LoraAdapter = LoraAdapterT<float>;

template <typename T>
uint64_t adapter_hash(const LoraAdapterT<T>& a);

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

// Everything the backward pass needs from one forward evaluation.
template <typename T>
struct ForwardTape {
    int t = 0;
    Tensor<T> patches;   // (N, pd) main input patches
    Tensor<T> cmean;     // (1, pd) mean conditioning patch
    Tensor<T> cpool;     // (1, d) pooled conditioning embedding
    struct Block {
        Tensor<T> x_in;                 // (N, d)
        Tensor<T> ln1_xhat, ln2_xhat;   // (N, d)
        std::vector<T> ln1_rstd, ln2_rstd;
        Tensor<T> h, q, k, v, att, x_mid, h2;  // (N, d)
        Tensor<T> probs;                // (heads, N, N) flattened
        Tensor<T> m1, g;                // (N, 4d)
    };
    std::vector<Block> block;
    Tensor<T> x_final;   // (N, d)
    Tensor<T> y;         // (N, pd) head output (predicted noise, patch layout)
    Tensor<T> y_target;  // (N, pd) eps in patch layout when built via training_loss
    bool has_target = false;
    // effective (base + lora delta) weights for adapted layers
    std::map<std::string, Tensor<T>> effective;
};

// Noise prediction eps_theta(v_t, t, c). `t` is 1-based. The conditioning is
// the clean first frame plus the learned context vector from the store.
template <typename T>
VideoT<T> denoiser_forward(const ParamStoreT<T>& params, std::type_identity_t<const LoraAdapterT<T>*> lora,
                           const VideoT<T>& v_t, int t, const ImageT<T>& cond_frame,
                           ForwardTape<T>* tape = nullptr);

// MSE training objective: builds v_t = add_noise(v0, t, eps), runs the model
// and returns mean squared error between eps and the prediction.
template <typename T>
T diffusion_training_loss(const ParamStoreT<T>& params, std::type_identity_t<const LoraAdapterT<T>*> lora,
                          const VideoT<T>& v0, const ImageT<T>& cond_frame, int t,
                          const VideoT<T>& eps, const NoiseSchedule& sched,
                          ForwardTape<T>* tape = nullptr);

enum class TrainMode { Base, LoraOnly };

// Exact reverse-mode gradients for the MSE objective recorded in `tape`.
// Base mode returns gradients for every base tensor; LoraOnly returns only
// "lora.<layer>.A" / ".B" entries (loss_scale seeds d(loss_scale * L)).
template <typename T>
std::map<std::string, Tensor<T>> denoiser_backward(const ParamStoreT<T>& params,
                                                   std::type_identity_t<const LoraAdapterT<T>*> lora,
                                                   const ForwardTape<T>& tape, TrainMode mode,
                                                   T loss_scale = T(1));

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.90;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 1e-3;
    double max_grad_norm = 1.0;
};

template <typename T>
struct AdamWStateT {
    int64_t step = 0;
    std::map<std::string, Tensor<T>> m, v;
};

using AdamWState = AdamWStateT<float>;

// Global-norm clipping followed by a decoupled-weight-decay Adam update.
// Rejects the step (returns false, touches nothing) on non-finite gradients.
template <typename T>
bool adamw_step(const std::map<std::string, Tensor<T>*>& params,
                const std::map<std::string, Tensor<T>>& grads, AdamWStateT<T>& state,
                const AdamWConfig& cfg, double* grad_norm_out = nullptr,
                std::string* error_out = nullptr);

}  // namespace taskvid
