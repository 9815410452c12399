#include "taskvid/net.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "taskvid/errors.hpp"

namespace taskvid {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
    if (frames < 2) throw ValidationError("ModelConfig: frames must be >= 2");
    if (height <= 0 || width <= 0 || patch <= 0 || dim <= 0 || heads <= 0 || blocks <= 0 || tsteps < 1)
        throw ValidationError("ModelConfig: dimensions must be positive");
    if (height % patch != 0 || width % patch != 0)
        throw ValidationError("ModelConfig: height and width must be multiples of patch");
    if (dim % heads != 0) throw ValidationError("ModelConfig: dim must be divisible by heads");
}

int64_t ModelConfig::param_count() const {
    int64_t d = dim, pd = patch_dim(), np = patches_per_frame();
    int64_t per_block = 12 * d * d + 4 * d;  // qkvo + mlp(8d^2) + two norms
    return 2 * d * pd                        // patch embedding + output head
           + d * (frames + np + tsteps + 1)  // positions, time table, context
           + d * d                           // conditioning projection
           + blocks * per_block;
}

std::string ModelConfig::to_json() const {
    nlohmann::json j{{"frames", frames}, {"height", height}, {"width", width}, {"patch", patch},
                     {"dim", dim},       {"heads", heads},   {"blocks", blocks}, {"tsteps", tsteps}};
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& s) {
    nlohmann::json j = nlohmann::json::parse(s);
    ModelConfig c;
    c.frames = j.at("frames");
    c.height = j.at("height");
    c.width = j.at("width");
    c.patch = j.at("patch");
    c.dim = j.at("dim");
    c.heads = j.at("heads");
    c.blocks = j.at("blocks");
    c.tsteps = j.at("tsteps");
    return c;
}

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

template <typename T>
const Tensor<T>& ParamStoreT<T>::get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ValidationError("ParamStore: missing tensor " + name);
    return it->second;
}

template <typename T>
Tensor<T>& ParamStoreT<T>::get(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ValidationError("ParamStore: missing tensor " + name);
    return it->second;
}

template <typename T>
int64_t ParamStoreT<T>::total_numel() const {
    int64_t n = 0;
    for (const auto& [k, t] : tensors) n += t.numel();
    return n;
}

template <typename T>
uint64_t params_hash(const ParamStoreT<T>& p) {
    uint64_t h = p.cfg.hash();
    for (const auto& [k, t] : p.tensors) {
        h = fnv1a64(k, h);
        h = tensor_hash(t, h);
    }
    return h;
}

template <typename T>
ParamStoreT<T> init_params(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ParamStoreT<T> p;
    p.cfg = cfg;
    const int d = cfg.dim, pd = cfg.patch_dim(), np = cfg.patches_per_frame();
    const double res_scale = 1.0 / std::sqrt(2.0 * cfg.blocks);

    auto gaussian = [&](const std::string& name, std::vector<int> shape, double stddev) {
        RngStream rng(derive_seed(seed, fnv1a64(name)));
        p.tensors.emplace(name, Tensor<T>::gaussian(std::move(shape), stddev, rng));
    };
    auto constant = [&](const std::string& name, std::vector<int> shape, T value) {
        Tensor<T> t(std::move(shape));
        t.fill(value);
        p.tensors.emplace(name, std::move(t));
    };

    gaussian("embed.patch.w", {d, pd}, 1.0 / std::sqrt(pd));
    gaussian("embed.pos.frame", {cfg.frames, d}, 0.02);
    gaussian("embed.pos.patch", {np, d}, 0.02);
    gaussian("embed.time", {cfg.tsteps, d}, 0.02);
    gaussian("cond.proj.w", {d, d}, 1.0 / std::sqrt(d));
    gaussian("cond.context", {1, d}, 0.02);
    for (int b = 0; b < cfg.blocks; ++b) {
        std::string pre = "block" + std::to_string(b) + ".";
        constant(pre + "ln1.scale", {1, d}, T(1));
        constant(pre + "ln1.offset", {1, d}, T(0));
        gaussian(pre + "attn.wq", {d, d}, 1.0 / std::sqrt(d));
        gaussian(pre + "attn.wk", {d, d}, 1.0 / std::sqrt(d));
        gaussian(pre + "attn.wv", {d, d}, 1.0 / std::sqrt(d));
        gaussian(pre + "attn.wo", {d, d}, res_scale / std::sqrt(d));
        constant(pre + "ln2.scale", {1, d}, T(1));
        constant(pre + "ln2.offset", {1, d}, T(0));
        gaussian(pre + "mlp.w1", {4 * d, d}, 1.0 / std::sqrt(d));
        gaussian(pre + "mlp.w2", {d, 4 * d}, res_scale / std::sqrt(4.0 * d));
    }
    gaussian("head.w", {pd, d}, 1.0 / std::sqrt(d));

    if (p.total_numel() != cfg.param_count())
        throw NumericError("init_params: parameter count mismatch against closed form");
    return p;
}

// ---------------------------------------------------------------------------
// LoRA target resolution
// ---------------------------------------------------------------------------

const char* target_spec_name(TargetSpec s) {
    switch (s) {
        case TargetSpec::QK: return "qk";
        case TargetSpec::VO: return "vo";
        case TargetSpec::QKVO: return "qkvo";
        case TargetSpec::AllLinear: return "all-linear";
    }
    return "?";
}

std::optional<TargetSpec> target_spec_from_name(const std::string& s) {
    for (TargetSpec t : {TargetSpec::QK, TargetSpec::VO, TargetSpec::QKVO, TargetSpec::AllLinear})
        if (s == target_spec_name(t)) return t;
    return std::nullopt;
}

std::vector<std::string> resolve_targets(const ModelConfig& cfg, TargetSpec spec) {
    std::vector<std::string> names;
    for (int b = 0; b < cfg.blocks; ++b) {
        std::string pre = "block" + std::to_string(b) + ".";
        switch (spec) {
            case TargetSpec::QK:
                names.push_back(pre + "attn.wq");
                names.push_back(pre + "attn.wk");
                break;
            case TargetSpec::VO:
                names.push_back(pre + "attn.wv");
                names.push_back(pre + "attn.wo");
                break;
            case TargetSpec::QKVO:
            case TargetSpec::AllLinear:
                names.push_back(pre + "attn.wq");
                names.push_back(pre + "attn.wk");
                names.push_back(pre + "attn.wv");
                names.push_back(pre + "attn.wo");
                if (spec == TargetSpec::AllLinear) {
                    names.push_back(pre + "mlp.w1");
                    names.push_back(pre + "mlp.w2");
                }
                break;
        }
    }
    if (spec == TargetSpec::AllLinear) {
        names.push_back("cond.proj.w");
        names.push_back("head.w");
    }
    return names;
}

template <typename T>
int64_t LoraAdapterT<T>::trainable_numel() const {
    int64_t n = 0;
    for (const auto& [k, ab] : layers) n += ab.first.numel() + ab.second.numel();
    return n;
}

template <typename T>
uint64_t adapter_hash(const LoraAdapterT<T>& a) {
    uint64_t h = fnv1a64(target_spec_name(a.spec), std::strlen(target_spec_name(a.spec)));
    h = fnv1a64(&a.rank, sizeof a.rank, h);
    h = fnv1a64(&a.alpha, sizeof a.alpha, h);
    for (const auto& [k, ab] : a.layers) {
        h = fnv1a64(k, h);
        h = tensor_hash(ab.first, h);
        h = tensor_hash(ab.second, h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

namespace {

constexpr double kLnEps = 1e-5;

template <typename T>
void patchify_frame_into(const T* frame, int H, int W, int P, T* out, int out_stride) {
    // out rows: one per patch, raster order; columns: (dy, dx, c) row-major
    int wp = W / P;
    int hp = H / P;
    for (int py = 0; py < hp; ++py)
        for (int px = 0; px < wp; ++px) {
            T* row = out + static_cast<size_t>(py * wp + px) * out_stride;
            for (int dy = 0; dy < P; ++dy)
                for (int dx = 0; dx < P; ++dx)
                    for (int c = 0; c < 3; ++c)
                        row[(dy * P + dx) * 3 + c] =
                            frame[(static_cast<size_t>(py * P + dy) * W + (px * P + dx)) * 3 + c];
        }
}

template <typename T>
Tensor<T> patchify(const VideoT<T>& v, const ModelConfig& cfg) {
    Tensor<T> out({cfg.tokens(), cfg.patch_dim()});
    for (int f = 0; f < cfg.frames; ++f)
        patchify_frame_into(v.frame(f), cfg.height, cfg.width, cfg.patch,
                            out.data() + static_cast<size_t>(f) * cfg.patches_per_frame() * cfg.patch_dim(),
                            cfg.patch_dim());
    return out;
}

template <typename T>
VideoT<T> unpatchify(const Tensor<T>& y, const ModelConfig& cfg) {
    VideoT<T> v(cfg.frames, cfg.height, cfg.width);
    int P = cfg.patch, W = cfg.width, wp = cfg.patches_x();
    for (int f = 0; f < cfg.frames; ++f) {
        T* frame = v.frame(f);
        for (int p = 0; p < cfg.patches_per_frame(); ++p) {
            const T* row = y.data() + (static_cast<size_t>(f) * cfg.patches_per_frame() + p) * cfg.patch_dim();
            int py = p / wp, px = p % wp;
            for (int dy = 0; dy < P; ++dy)
                for (int dx = 0; dx < P; ++dx)
                    for (int c = 0; c < 3; ++c)
                        frame[(static_cast<size_t>(py * P + dy) * W + (px * P + dx)) * 3 + c] =
                            row[(dy * P + dx) * 3 + c];
        }
    }
    return v;
}

template <typename T>
void layer_norm_forward(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& offset,
                        Tensor<T>& xhat, std::vector<T>& rstd, Tensor<T>& out) {
    int N = x.rows(), d = x.cols();
    xhat = Tensor<T>({N, d});
    out = Tensor<T>({N, d});
    rstd.assign(static_cast<size_t>(N), T(0));
    for (int i = 0; i < N; ++i) {
        const T* xi = x.data() + static_cast<size_t>(i) * d;
        double mu = 0;
        for (int j = 0; j < d; ++j) mu += xi[j];
        mu /= d;
        double var = 0;
        for (int j = 0; j < d; ++j) {
            double e = xi[j] - mu;
            var += e * e;
        }
        var /= d;
        T rs = static_cast<T>(1.0 / std::sqrt(var + kLnEps));
        rstd[static_cast<size_t>(i)] = rs;
        T* xh = xhat.data() + static_cast<size_t>(i) * d;
        T* o = out.data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            xh[j] = static_cast<T>((xi[j] - mu) * rs);
            o[j] = scale.v[static_cast<size_t>(j)] * xh[j] + offset.v[static_cast<size_t>(j)];
        }
    }
}

// dX for y = scale * xhat + offset; accumulates parameter grads when given
template <typename T>
void layer_norm_backward(const Tensor<T>& dy, const Tensor<T>& xhat, const std::vector<T>& rstd,
                         const Tensor<T>& scale, Tensor<T>& dx, Tensor<T>* dscale, Tensor<T>* doffset) {
    int N = dy.rows(), d = dy.cols();
    dx = Tensor<T>({N, d});
    for (int i = 0; i < N; ++i) {
        const T* dyi = dy.data() + static_cast<size_t>(i) * d;
        const T* xh = xhat.data() + static_cast<size_t>(i) * d;
        double s1 = 0, s2 = 0;  // mean(dxhat), mean(dxhat * xhat)
        for (int j = 0; j < d; ++j) {
            double dxh = static_cast<double>(dyi[j]) * scale.v[static_cast<size_t>(j)];
            s1 += dxh;
            s2 += dxh * xh[j];
        }
        s1 /= d;
        s2 /= d;
        T* dxi = dx.data() + static_cast<size_t>(i) * d;
        T rs = rstd[static_cast<size_t>(i)];
        for (int j = 0; j < d; ++j) {
            double dxh = static_cast<double>(dyi[j]) * scale.v[static_cast<size_t>(j)];
            dxi[j] = static_cast<T>(rs * (dxh - s1 - xh[j] * s2));
        }
        if (dscale)
            for (int j = 0; j < d; ++j) dscale->v[static_cast<size_t>(j)] += dyi[j] * xh[j];
        if (doffset)
            for (int j = 0; j < d; ++j) doffset->v[static_cast<size_t>(j)] += dyi[j];
    }
}

template <typename T>
T gelu(T x) {
    return static_cast<T>(0.5 * x * (1.0 + std::erf(static_cast<double>(x) * 0.7071067811865475244)));
}

template <typename T>
T gelu_grad(T x) {
    double xd = x;
    double phi = 0.5 * (1.0 + std::erf(xd * 0.7071067811865475244));
    double pdf = std::exp(-0.5 * xd * xd) * 0.3989422804014326779;
    return static_cast<T>(phi + xd * pdf);
}

}  // namespace

template <typename T>
VideoT<T> denoiser_forward(const ParamStoreT<T>& params, std::type_identity_t<const LoraAdapterT<T>*> lora,
                           const VideoT<T>& v_t, int t, const ImageT<T>& cond_frame,
                           ForwardTape<T>* tape_out) {
    const ModelConfig& cfg = params.cfg;
    if (v_t.f != cfg.frames || v_t.h != cfg.height || v_t.w != cfg.width)
        throw ValidationError("denoiser_forward: video shape does not match model config");
    if (cond_frame.h != cfg.height || cond_frame.w != cfg.width)
        throw ValidationError("denoiser_forward: conditioning frame shape mismatch");
    if (t < 1 || t > cfg.tsteps) throw ValidationError("denoiser_forward: t outside [1, T]");

    ForwardTape<T> local;
    ForwardTape<T>& tape = tape_out ? *tape_out : local;
    tape = ForwardTape<T>{};
    tape.t = t;

    const int N = cfg.tokens(), d = cfg.dim, pd = cfg.patch_dim(), np = cfg.patches_per_frame();
    const int heads = cfg.heads, hd = cfg.head_dim();
    const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

    // effective weights for adapted layers: base + (alpha/r) * B * A
    if (lora) {
        for (const auto& [name, ab] : lora->layers) {
            const Tensor<T>& base = params.get(name);
            const Tensor<T>& A = ab.first;   // (r, k)
            const Tensor<T>& B = ab.second;  // (d, r)
            Tensor<T> eff = base;
            Tensor<T> delta({base.rows(), base.cols()});
            gemm_nn(B.rows(), A.cols(), A.rows(), B.data(), B.cols(), A.data(), A.cols(), delta.data(),
                    delta.cols());
            T s = static_cast<T>(lora->scaling());
            for (int64_t i = 0; i < eff.numel(); ++i) eff.v[static_cast<size_t>(i)] += s * delta.v[static_cast<size_t>(i)];
            tape.effective.emplace(name, std::move(eff));
        }
    }
    auto weight = [&](const std::string& name) -> const Tensor<T>& {
        auto it = tape.effective.find(name);
        return it == tape.effective.end() ? params.get(name) : it->second;
    };

    // tokens
    tape.patches = patchify(v_t, cfg);
    Tensor<T> x({N, d});
    gemm_nt(N, d, pd, tape.patches.data(), pd, weight("embed.patch.w").data(), pd, x.data(), d);

    // conditioning: pooled clean-first-frame embedding, projected, plus the
    // learned context vector and the timestep row, added to every token
    tape.cmean = Tensor<T>({1, pd});
    {
        Tensor<T> cpatches({np, pd});
        patchify_frame_into(cond_frame.px.data(), cfg.height, cfg.width, cfg.patch, cpatches.data(), pd);
        for (int j = 0; j < pd; ++j) {
            double s = 0;
            for (int i = 0; i < np; ++i) s += cpatches.at(i, j);
            tape.cmean.v[static_cast<size_t>(j)] = static_cast<T>(s / np);
        }
    }
    tape.cpool = Tensor<T>({1, d});
    gemm_nt(1, d, pd, tape.cmean.data(), pd, weight("embed.patch.w").data(), pd, tape.cpool.data(), d);
    Tensor<T> cvec({1, d});
    gemm_nt(1, d, d, tape.cpool.data(), d, weight("cond.proj.w").data(), d, cvec.data(), d);

    const Tensor<T>& posf = params.get("embed.pos.frame");
    const Tensor<T>& posp = params.get("embed.pos.patch");
    const Tensor<T>& time = params.get("embed.time");
    const Tensor<T>& context = params.get("cond.context");
    for (int n = 0; n < N; ++n) {
        int f = n / np, p = n % np;
        T* xi = x.data() + static_cast<size_t>(n) * d;
        const T* pf = posf.data() + static_cast<size_t>(f) * d;
        const T* pp = posp.data() + static_cast<size_t>(p) * d;
        const T* tt = time.data() + static_cast<size_t>(t - 1) * d;
        for (int j = 0; j < d; ++j)
            xi[j] += pf[j] + pp[j] + cvec.v[static_cast<size_t>(j)] + context.v[static_cast<size_t>(j)] +
                     tt[j];
    }

    tape.block.resize(static_cast<size_t>(cfg.blocks));
    for (int b = 0; b < cfg.blocks; ++b) {
        auto& bt = tape.block[static_cast<size_t>(b)];
        std::string pre = "block" + std::to_string(b) + ".";
        bt.x_in = x;

        layer_norm_forward(x, params.get(pre + "ln1.scale"), params.get(pre + "ln1.offset"), bt.ln1_xhat,
                           bt.ln1_rstd, bt.h);

        bt.q = Tensor<T>({N, d});
        bt.k = Tensor<T>({N, d});
        bt.v = Tensor<T>({N, d});
        gemm_nt(N, d, d, bt.h.data(), d, weight(pre + "attn.wq").data(), d, bt.q.data(), d);
        gemm_nt(N, d, d, bt.h.data(), d, weight(pre + "attn.wk").data(), d, bt.k.data(), d);
        gemm_nt(N, d, d, bt.h.data(), d, weight(pre + "attn.wv").data(), d, bt.v.data(), d);

        bt.probs = Tensor<T>({heads, N, N});
        bt.att = Tensor<T>({N, d});
        for (int a = 0; a < heads; ++a) {
            T* P = bt.probs.data() + static_cast<size_t>(a) * N * N;
            gemm_nt(N, N, hd, bt.q.data() + static_cast<size_t>(a) * hd, d,
                    bt.k.data() + static_cast<size_t>(a) * hd, d, P, N);
            for (size_t i = 0; i < static_cast<size_t>(N) * N; ++i) P[i] *= att_scale;
            // softmax in place over the head's score block
            for (int i = 0; i < N; ++i) {
                T* r = P + static_cast<size_t>(i) * N;
                T mx = r[0];
                for (int j = 1; j < N; ++j) mx = std::max(mx, r[j]);
                double sum = 0;
                for (int j = 0; j < N; ++j) {
                    r[j] = static_cast<T>(std::exp(static_cast<double>(r[j] - mx)));
                    sum += r[j];
                }
                T inv = static_cast<T>(1.0 / sum);
                for (int j = 0; j < N; ++j) r[j] *= inv;
            }
            gemm_nn(N, hd, N, P, N, bt.v.data() + static_cast<size_t>(a) * hd, d,
                    bt.att.data() + static_cast<size_t>(a) * hd, d);
        }

        Tensor<T> o({N, d});
        gemm_nt(N, d, d, bt.att.data(), d, weight(pre + "attn.wo").data(), d, o.data(), d);
        for (int64_t i = 0; i < x.numel(); ++i) x.v[static_cast<size_t>(i)] += o.v[static_cast<size_t>(i)];
        bt.x_mid = x;

        layer_norm_forward(x, params.get(pre + "ln2.scale"), params.get(pre + "ln2.offset"), bt.ln2_xhat,
                           bt.ln2_rstd, bt.h2);
        bt.m1 = Tensor<T>({N, 4 * d});
        gemm_nt(N, 4 * d, d, bt.h2.data(), d, weight(pre + "mlp.w1").data(), d, bt.m1.data(), 4 * d);
        bt.g = bt.m1;
        for (auto& gv : bt.g.v) gv = gelu(gv);
        Tensor<T> m2({N, d});
        gemm_nt(N, d, 4 * d, bt.g.data(), 4 * d, weight(pre + "mlp.w2").data(), 4 * d, m2.data(), d);
        for (int64_t i = 0; i < x.numel(); ++i) x.v[static_cast<size_t>(i)] += m2.v[static_cast<size_t>(i)];
    }

    tape.x_final = x;
    tape.y = Tensor<T>({N, pd});
    gemm_nt(N, pd, d, x.data(), d, weight("head.w").data(), d, tape.y.data(), pd);

    return unpatchify(tape.y, cfg);
}

template <typename T>
T diffusion_training_loss(const ParamStoreT<T>& params, std::type_identity_t<const LoraAdapterT<T>*> lora,
                          const VideoT<T>& v0, const ImageT<T>& cond_frame, int t,
                          const VideoT<T>& eps, const NoiseSchedule& sched, ForwardTape<T>* tape_out) {
    if (!v0.same_shape(eps)) throw ValidationError("training_loss: eps shape mismatch");
    ForwardTape<T> local;
    ForwardTape<T>& tape = tape_out ? *tape_out : local;
    VideoT<T> vt = add_noise(v0, t, eps, sched);
    denoiser_forward(params, lora, vt, t, cond_frame, &tape);
    tape.y_target = patchify(eps, params.cfg);
    tape.has_target = true;
    double acc = 0;
    for (int64_t i = 0; i < tape.y.numel(); ++i) {
        double e = static_cast<double>(tape.y.v[static_cast<size_t>(i)]) -
                   static_cast<double>(tape.y_target.v[static_cast<size_t>(i)]);
        acc += e * e;
    }
    return static_cast<T>(acc / static_cast<double>(tape.y.numel()));
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

namespace {

template <typename T>
Tensor<T>& grad_slot(std::map<std::string, Tensor<T>>& grads, const std::string& name,
                     const std::vector<int>& shape) {
    auto it = grads.find(name);
    if (it == grads.end()) it = grads.emplace(name, Tensor<T>(shape)).first;
    return it->second;
}

}  // namespace

template <typename T>
std::map<std::string, Tensor<T>> denoiser_backward(const ParamStoreT<T>& params,
                                                   std::type_identity_t<const LoraAdapterT<T>*> lora,
                                                   const ForwardTape<T>& tape, TrainMode mode,
                                                   T loss_scale) {
    if (!tape.has_target) throw ValidationError("denoiser_backward: tape has no recorded objective");
    if (mode == TrainMode::LoraOnly && (!lora || lora->layers.empty()))
        throw ValidationError("denoiser_backward: LoraOnly mode without adapters");

    const ModelConfig& cfg = params.cfg;
    const int N = cfg.tokens(), d = cfg.dim, pd = cfg.patch_dim(), np = cfg.patches_per_frame();
    const int heads = cfg.heads, hd = cfg.head_dim();
    const T att_scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));

    const bool base_mode = mode == TrainMode::Base;
    auto adapted = [&](const std::string& name) {
        return lora && lora->layers.count(name) > 0;
    };
    auto weight = [&](const std::string& name) -> const Tensor<T>& {
        auto it = tape.effective.find(name);
        return it == tape.effective.end() ? params.get(name) : it->second;
    };

    std::map<std::string, Tensor<T>> grads;

    // dW_eff -> base grad (Base mode) and/or A/B grads (layer adapted)
    auto consume_weight_grad = [&](const std::string& name, const Tensor<T>& dW) {
        if (base_mode) grad_slot(grads, name, dW.shape).add_(dW);
        if (adapted(name)) {
            const auto& ab = lora->layers.at(name);
            const Tensor<T>& A = ab.first;   // (r, k)
            const Tensor<T>& B = ab.second;  // (d, r)
            T s = static_cast<T>(lora->scaling());
            Tensor<T>& dA = grad_slot(grads, "lora." + name + ".A", A.shape);
            Tensor<T>& dB = grad_slot(grads, "lora." + name + ".B", B.shape);
            // dA += s * B^T dW ; dB += s * dW A^T
            Tensor<T> tmpA({A.rows(), A.cols()});
            gemm_tn(A.rows(), A.cols(), B.rows(), B.data(), B.cols(), dW.data(), dW.cols(), tmpA.data(),
                    tmpA.cols());
            Tensor<T> tmpB({B.rows(), B.cols()});
            gemm_nt(B.rows(), B.cols(), A.cols(), dW.data(), dW.cols(), A.data(), A.cols(), tmpB.data(),
                    tmpB.cols());
            for (int64_t i = 0; i < dA.numel(); ++i) dA.v[static_cast<size_t>(i)] += s * tmpA.v[static_cast<size_t>(i)];
            for (int64_t i = 0; i < dB.numel(); ++i) dB.v[static_cast<size_t>(i)] += s * tmpB.v[static_cast<size_t>(i)];
        }
    };
    auto want_weight_grad = [&](const std::string& name) { return base_mode || adapted(name); };

    // seed: d mean((y - target)^2) = 2 (y - target) / numel, times loss_scale
    Tensor<T> dy({N, pd});
    {
        T c = static_cast<T>(2.0 * static_cast<double>(loss_scale) / static_cast<double>(tape.y.numel()));
        for (int64_t i = 0; i < dy.numel(); ++i)
            dy.v[static_cast<size_t>(i)] =
                c * (tape.y.v[static_cast<size_t>(i)] - tape.y_target.v[static_cast<size_t>(i)]);
    }

    // head
    Tensor<T> dx({N, d});
    gemm_nn(N, d, pd, dy.data(), pd, weight("head.w").data(), d, dx.data(), d);
    if (want_weight_grad("head.w")) {
        Tensor<T> dW({pd, d});
        gemm_tn(pd, d, N, dy.data(), pd, tape.x_final.data(), d, dW.data(), d);
        consume_weight_grad("head.w", dW);
    }

    for (int b = cfg.blocks - 1; b >= 0; --b) {
        const auto& bt = tape.block[static_cast<size_t>(b)];
        std::string pre = "block" + std::to_string(b) + ".";

        // ---- MLP branch (x = x_mid + m2) ----
        Tensor<T> dg({N, 4 * d});
        gemm_nn(N, 4 * d, d, dx.data(), d, weight(pre + "mlp.w2").data(), 4 * d, dg.data(), 4 * d);
        if (want_weight_grad(pre + "mlp.w2")) {
            Tensor<T> dW({d, 4 * d});
            gemm_tn(d, 4 * d, N, dx.data(), d, bt.g.data(), 4 * d, dW.data(), 4 * d);
            consume_weight_grad(pre + "mlp.w2", dW);
        }
        for (int64_t i = 0; i < dg.numel(); ++i)
            dg.v[static_cast<size_t>(i)] *= gelu_grad(bt.m1.v[static_cast<size_t>(i)]);
        Tensor<T> dh2({N, d});
        gemm_nn(N, d, 4 * d, dg.data(), 4 * d, weight(pre + "mlp.w1").data(), d, dh2.data(), d);
        if (want_weight_grad(pre + "mlp.w1")) {
            Tensor<T> dW({4 * d, d});
            gemm_tn(4 * d, d, N, dg.data(), 4 * d, bt.h2.data(), d, dW.data(), d);
            consume_weight_grad(pre + "mlp.w1", dW);
        }
        {
            Tensor<T> dx_ln;
            if (base_mode) {
                layer_norm_backward(dh2, bt.ln2_xhat, bt.ln2_rstd, params.get(pre + "ln2.scale"), dx_ln,
                                    &grad_slot(grads, pre + "ln2.scale", {1, d}),
                                    &grad_slot(grads, pre + "ln2.offset", {1, d}));
            } else {
                layer_norm_backward(dh2, bt.ln2_xhat, bt.ln2_rstd, params.get(pre + "ln2.scale"), dx_ln,
                                    static_cast<Tensor<T>*>(nullptr), static_cast<Tensor<T>*>(nullptr));
            }
            dx.add_(dx_ln);
        }

        // ---- attention branch (x_mid = x_in + o) ----
        Tensor<T> datt({N, d});
        gemm_nn(N, d, d, dx.data(), d, weight(pre + "attn.wo").data(), d, datt.data(), d);
        if (want_weight_grad(pre + "attn.wo")) {
            Tensor<T> dW({d, d});
            gemm_tn(d, d, N, dx.data(), d, bt.att.data(), d, dW.data(), d);
            consume_weight_grad(pre + "attn.wo", dW);
        }

        Tensor<T> dq({N, d}), dk({N, d}), dv({N, d});
        for (int a = 0; a < heads; ++a) {
            const T* P = bt.probs.data() + static_cast<size_t>(a) * N * N;
            // dP = datt_a V_a^T
            Tensor<T> dP({N, N});
            gemm_nt(N, N, hd, datt.data() + static_cast<size_t>(a) * hd, d,
                    bt.v.data() + static_cast<size_t>(a) * hd, d, dP.data(), N);
            // dV_a = P^T datt_a
            gemm_tn(N, hd, N, P, N, datt.data() + static_cast<size_t>(a) * hd, d,
                    dv.data() + static_cast<size_t>(a) * hd, d);
            // softmax backward in place: dZ = (dP - rowdot(dP, P)) * P
            for (int i = 0; i < N; ++i) {
                T* dpr = dP.data() + static_cast<size_t>(i) * N;
                const T* pr = P + static_cast<size_t>(i) * N;
                double dot = 0;
                for (int j = 0; j < N; ++j) dot += static_cast<double>(dpr[j]) * pr[j];
                for (int j = 0; j < N; ++j)
                    dpr[j] = static_cast<T>((static_cast<double>(dpr[j]) - dot) * pr[j] * att_scale);
            }
            // dQ_a = dZ K_a ; dK_a = dZ^T Q_a
            gemm_nn(N, hd, N, dP.data(), N, bt.k.data() + static_cast<size_t>(a) * hd, d,
                    dq.data() + static_cast<size_t>(a) * hd, d);
            gemm_tn(N, hd, N, dP.data(), N, bt.q.data() + static_cast<size_t>(a) * hd, d,
                    dk.data() + static_cast<size_t>(a) * hd, d);
        }

        Tensor<T> dh({N, d});
        gemm_nn(N, d, d, dq.data(), d, weight(pre + "attn.wq").data(), d, dh.data(), d);
        gemm_nn(N, d, d, dk.data(), d, weight(pre + "attn.wk").data(), d, dh.data(), d, true);
        gemm_nn(N, d, d, dv.data(), d, weight(pre + "attn.wv").data(), d, dh.data(), d, true);
        for (auto [nm, dptr] : {std::pair<const char*, Tensor<T>*>{"attn.wq", &dq},
                                std::pair<const char*, Tensor<T>*>{"attn.wk", &dk},
                                std::pair<const char*, Tensor<T>*>{"attn.wv", &dv}}) {
            std::string name = pre + nm;
            if (want_weight_grad(name)) {
                Tensor<T> dW({d, d});
                gemm_tn(d, d, N, dptr->data(), d, bt.h.data(), d, dW.data(), d);
                consume_weight_grad(name, dW);
            }
        }

        {
            Tensor<T> dx_ln;
            if (base_mode) {
                layer_norm_backward(dh, bt.ln1_xhat, bt.ln1_rstd, params.get(pre + "ln1.scale"), dx_ln,
                                    &grad_slot(grads, pre + "ln1.scale", {1, d}),
                                    &grad_slot(grads, pre + "ln1.offset", {1, d}));
            } else {
                layer_norm_backward(dh, bt.ln1_xhat, bt.ln1_rstd, params.get(pre + "ln1.scale"), dx_ln,
                                    static_cast<Tensor<T>*>(nullptr), static_cast<Tensor<T>*>(nullptr));
            }
            dx.add_(dx_ln);
        }
    }

    // ---- embeddings and conditioning ----
    Tensor<T> daddvec({1, d});
    if (base_mode) {
        Tensor<T>& dposf = grad_slot(grads, "embed.pos.frame", {cfg.frames, d});
        Tensor<T>& dposp = grad_slot(grads, "embed.pos.patch", {np, d});
        for (int n = 0; n < N; ++n) {
            int f = n / np, p = n % np;
            const T* dxi = dx.data() + static_cast<size_t>(n) * d;
            T* pf = dposf.data() + static_cast<size_t>(f) * d;
            T* pp = dposp.data() + static_cast<size_t>(p) * d;
            for (int j = 0; j < d; ++j) {
                pf[j] += dxi[j];
                pp[j] += dxi[j];
                daddvec.v[static_cast<size_t>(j)] += dxi[j];
            }
        }
        Tensor<T>& dtime = grad_slot(grads, "embed.time", {cfg.tsteps, d});
        Tensor<T>& dcontext = grad_slot(grads, "cond.context", {1, d});
        for (int j = 0; j < d; ++j) {
            dtime.at(tape.t - 1, j) += daddvec.v[static_cast<size_t>(j)];
            dcontext.v[static_cast<size_t>(j)] += daddvec.v[static_cast<size_t>(j)];
        }
    } else {
        for (int n = 0; n < N; ++n) {
            const T* dxi = dx.data() + static_cast<size_t>(n) * d;
            for (int j = 0; j < d; ++j) daddvec.v[static_cast<size_t>(j)] += dxi[j];
        }
    }

    // conditioning projection: cvec = cpool W_c^T (row-vector convention)
    if (want_weight_grad("cond.proj.w")) {
        Tensor<T> dWc({d, d});
        gemm_tn(d, d, 1, daddvec.data(), d, tape.cpool.data(), d, dWc.data(), d);
        consume_weight_grad("cond.proj.w", dWc);
    }
    if (want_weight_grad("embed.patch.w")) {
        // main tokens: dW_e += dX^T patches; cond path: dW_e += dcpool^T cmean
        Tensor<T> dWe({d, pd});
        gemm_tn(d, pd, N, dx.data(), d, tape.patches.data(), pd, dWe.data(), pd);
        Tensor<T> dcpool({1, d});
        gemm_nn(1, d, d, daddvec.data(), d, weight("cond.proj.w").data(), d, dcpool.data(), d);
        gemm_tn(d, pd, 1, dcpool.data(), d, tape.cmean.data(), pd, dWe.data(), pd, true);
        consume_weight_grad("embed.patch.w", dWe);
    }

    return grads;
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

template <typename T>
bool adamw_step(const std::map<std::string, Tensor<T>*>& params,
                const std::map<std::string, Tensor<T>>& grads, AdamWStateT<T>& state,
                const AdamWConfig& cfg, double* grad_norm_out, std::string* error_out) {
    // validate and compute the global norm first; reject before mutating
    double sq = 0;
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end()) throw ValidationError("adamw_step: gradient for unknown tensor " + name);
        if (it->second->shape != g.shape) throw ValidationError("adamw_step: shape mismatch for " + name);
        for (T x : g.v) {
            double xd = static_cast<double>(x);
            if (!std::isfinite(xd)) {
                if (error_out) *error_out = "non-finite gradient in " + name;
                return false;
            }
            sq += xd * xd;
        }
    }
    double norm = std::sqrt(sq);
    if (grad_norm_out) *grad_norm_out = norm;
    double clip = 1.0;
    if (cfg.max_grad_norm > 0 && norm > cfg.max_grad_norm) clip = cfg.max_grad_norm / norm;

    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    for (const auto& [name, g] : grads) {
        Tensor<T>& p = *params.at(name);
        auto mi = state.m.find(name);
        if (mi == state.m.end()) {
            state.m.emplace(name, Tensor<T>(g.shape));
            state.v.emplace(name, Tensor<T>(g.shape));
            mi = state.m.find(name);
        }
        Tensor<T>& m = mi->second;
        Tensor<T>& v = state.v.at(name);
        for (int64_t i = 0; i < g.numel(); ++i) {
            size_t idx = static_cast<size_t>(i);
            double gd = static_cast<double>(g.v[idx]) * clip;
            double md = cfg.beta1 * static_cast<double>(m.v[idx]) + (1.0 - cfg.beta1) * gd;
            double vd = cfg.beta2 * static_cast<double>(v.v[idx]) + (1.0 - cfg.beta2) * gd * gd;
            m.v[idx] = static_cast<T>(md);
            v.v[idx] = static_cast<T>(vd);
            double mhat = md / bc1;
            double vhat = vd / bc2;
            double upd = mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * static_cast<double>(p.v[idx]);
            p.v[idx] = static_cast<T>(static_cast<double>(p.v[idx]) - cfg.lr * upd);
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

template struct ParamStoreT<float>;
template struct ParamStoreT<double>;
template struct LoraAdapterT<float>;
template struct LoraAdapterT<double>;
template struct ForwardTape<float>;
template struct ForwardTape<double>;

template uint64_t params_hash(const ParamStoreT<float>&);
template uint64_t params_hash(const ParamStoreT<double>&);
template ParamStoreT<float> init_params(const ModelConfig&, uint64_t);
template ParamStoreT<double> init_params(const ModelConfig&, uint64_t);
template uint64_t adapter_hash(const LoraAdapterT<float>&);
template uint64_t adapter_hash(const LoraAdapterT<double>&);

template VideoT<float> denoiser_forward(const ParamStoreT<float>&, const LoraAdapterT<float>*,
                                        const VideoT<float>&, int, const ImageT<float>&,
                                        ForwardTape<float>*);
template VideoT<double> denoiser_forward(const ParamStoreT<double>&, const LoraAdapterT<double>*,
                                         const VideoT<double>&, int, const ImageT<double>&,
                                         ForwardTape<double>*);
template float diffusion_training_loss(const ParamStoreT<float>&, const LoraAdapterT<float>*,
                                       const VideoT<float>&, const ImageT<float>&, int,
                                       const VideoT<float>&, const NoiseSchedule&, ForwardTape<float>*);
template double diffusion_training_loss(const ParamStoreT<double>&, const LoraAdapterT<double>*,
                                        const VideoT<double>&, const ImageT<double>&, int,
                                        const VideoT<double>&, const NoiseSchedule&,
                                        ForwardTape<double>*);
template std::map<std::string, Tensor<float>> denoiser_backward(const ParamStoreT<float>&,
                                                                const LoraAdapterT<float>*,
                                                                const ForwardTape<float>&, TrainMode,
                                                                float);
template std::map<std::string, Tensor<double>> denoiser_backward(const ParamStoreT<double>&,
                                                                 const LoraAdapterT<double>*,
                                                                 const ForwardTape<double>&, TrainMode,
                                                                 double);
template bool adamw_step(const std::map<std::string, Tensor<float>*>&,
                         const std::map<std::string, Tensor<float>>&, AdamWStateT<float>&,
                         const AdamWConfig&, double*, std::string*);
template bool adamw_step(const std::map<std::string, Tensor<double>*>&,
                         const std::map<std::string, Tensor<double>>&, AdamWStateT<double>&,
                         const AdamWConfig&, double*, std::string*);

}  // namespace taskvid
