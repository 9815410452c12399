#include "taskvid/diffusion.hpp"

#include <cmath>

#include "taskvid/errors.hpp"

namespace taskvid {

template <typename T>
VideoT<T> denoise_step(const ParamStoreT<T>& params, std::type_identity_t<const LoraAdapterT<T>*> lora, const VideoT<T>& v_t,
                       int t, const ImageT<T>& cond_frame, const NoiseSchedule& sched,
                       const VideoT<T>& noise_draw) {
    if (t < 1 || t > sched.T) throw ValidationError("denoise_step: t outside [1, T]");
    if (!v_t.same_shape(noise_draw)) throw ValidationError("denoise_step: noise shape mismatch");

    VideoT<T> eps = denoiser_forward(params, lora, v_t, t, cond_frame);
    double a = sched.alpha_at(t);
    double ab = sched.alpha_bar_at(t);
    double coef = sched.beta_at(t) / std::sqrt(1.0 - ab);
    double inv_sqrt_a = 1.0 / std::sqrt(a);
    double sigma = t == 1 ? 0.0 : sched.sigma_at(t);  // final step is deterministic

    VideoT<T> out = v_t;
    for (size_t i = 0; i < out.px.size(); ++i)
        out.px[i] = static_cast<T>(inv_sqrt_a * (v_t.px[i] - coef * eps.px[i]) + sigma * noise_draw.px[i]);
    return out;
}

template VideoT<float> denoise_step(const ParamStoreT<float>&, const LoraAdapterT<float>*,
                                    const VideoT<float>&, int, const ImageT<float>&,
                                    const NoiseSchedule&, const VideoT<float>&);
template VideoT<double> denoise_step(const ParamStoreT<double>&, const LoraAdapterT<double>*,
                                     const VideoT<double>&, int, const ImageT<double>&,
                                     const NoiseSchedule&, const VideoT<double>&);

namespace {

void fill_normal(Video& v, RngStream& rng) {
    for (auto& x : v.px) x = static_cast<float>(rng.normal());
}

// overwrite frame 0 with the conditioning frame noised to alpha_bar level
void anchor_first_frame(Video& v, const Image& cond, double alpha_bar, RngStream& rng) {
    float a = static_cast<float>(std::sqrt(alpha_bar));
    float b = static_cast<float>(std::sqrt(1.0 - alpha_bar));
    float* f0 = v.frame(0);
    for (size_t i = 0; i < cond.px.size(); ++i)
        f0[i] = a * cond.px[i] + b * static_cast<float>(rng.normal());
}

}  // namespace

Video sample(const DenoiserParams& params, const LoraAdapter* lora, const Image& cond_frame,
             const NoiseSchedule& sched, uint64_t seed, const SampleOptions& opt) {
    const ModelConfig& cfg = params.cfg;
    if (cond_frame.h != cfg.height || cond_frame.w != cfg.width)
        throw ValidationError("sample: conditioning frame shape mismatch");
    if (sched.T != cfg.tsteps)
        throw ValidationError("sample: schedule length does not match the model's timestep table");

    int steps = opt.steps <= 0 ? sched.T : std::min(opt.steps, sched.T);
    std::vector<int> taus = select_timesteps(sched.T, steps);  // ascending, ends at T

    RngStream rng(derive_seed(seed, 0x5a3d7e));
    Video v(cfg.frames, cfg.height, cfg.width);
    fill_normal(v, rng);
    if (opt.anchor) anchor_first_frame(v, cond_frame, sched.alpha_bar_at(sched.T), rng);

    Video z(cfg.frames, cfg.height, cfg.width);
    for (size_t k = taus.size(); k-- > 0;) {
        int t = taus[k];
        // respaced coefficients: alpha'_k = abar(tau_k) / abar(tau_{k-1})
        double ab_t = sched.alpha_bar_at(t);
        double ab_prev = k == 0 ? 1.0 : sched.alpha_bar_at(taus[k - 1]);
        double alpha_eff = ab_t / ab_prev;
        double beta_eff = 1.0 - alpha_eff;
        double sigma_eff = k == 0 ? 0.0 : std::sqrt(beta_eff);

        Video eps = denoiser_forward(params, lora, v, t, cond_frame);
        if (k == 0) {
            z.px.assign(z.px.size(), 0.0f);
        } else {
            fill_normal(z, rng);
        }
        double coef = beta_eff / std::sqrt(1.0 - ab_t);
        double inv_sqrt_a = 1.0 / std::sqrt(alpha_eff);
        for (size_t i = 0; i < v.px.size(); ++i)
            v.px[i] = static_cast<float>(inv_sqrt_a * (v.px[i] - coef * eps.px[i]) +
                                         sigma_eff * z.px[i]);

        if (opt.anchor) {
            if (k == 0)
                v.set_frame(0, cond_frame);  // clean conditioning frame at the end
            else
                anchor_first_frame(v, cond_frame, ab_prev, rng);
        }
    }
    v.clamp_unit();
    return v;
}

}  // namespace taskvid
