#pragma once

#include "taskvid/net.hpp"
#include "taskvid/schedule.hpp"

namespace taskvid {

// ---------------------------------------------------------------------------
// Ancestral sampling
// ---------------------------------------------------------------------------

// One reverse step at t (full schedule):
//   mu = (v_t - beta_t / sqrt(1 - abar_t) * eps_theta) / sqrt(alpha_t)
//   v_{t-1} = mu + sigma_t * noise_draw, with sigma forced to 0 at t = 1.
template <typename T>
VideoT<T> denoise_step(const ParamStoreT<T>& params, std::type_identity_t<const LoraAdapterT<T>*> lora, const VideoT<T>& v_t,
                       int t, const ImageT<T>& cond_frame, const NoiseSchedule& sched,
                       const VideoT<T>& noise_draw);

struct SampleOptions {
    int steps = 0;       // 0 or >= T: full chain; otherwise strided subsequence
    bool anchor = true;  // first-frame anchoring during the chain
};

// Full ancestral chain from pure noise. After every step the first frame of
// the working tensor is replaced by the conditioning frame noised to the
// step's level; the finished video carries the clean conditioning frame and
// is clamped to [-1, 1]. Pure function of (params, adapter, cond, seed).
Video sample(const DenoiserParams& params, const LoraAdapter* lora, const Image& cond_frame,
             const NoiseSchedule& sched, uint64_t seed, const SampleOptions& opt = {});

}  // namespace taskvid
