#include "taskvid/schedule.hpp"

#include <cmath>

#include "taskvid/errors.hpp"

namespace taskvid {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ValidationError("make_schedule: T must be >= 1");
    if (!(0.0 < beta_start && beta_start < 1.0) || !(0.0 < beta_end && beta_end < 1.0))
        throw ValidationError("make_schedule: beta bounds must lie in (0, 1)");
    if (T > 1 && !(beta_start < beta_end))
        throw ValidationError("make_schedule: beta_start must be below beta_end");

    NoiseSchedule s;
    s.T = T;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.resize(static_cast<size_t>(T));
    s.alpha.resize(static_cast<size_t>(T));
    s.alpha_bar.resize(static_cast<size_t>(T));
    s.sigma.resize(static_cast<size_t>(T));
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        double b = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (T - 1);
        s.beta[static_cast<size_t>(i)] = b;
        s.alpha[static_cast<size_t>(i)] = 1.0 - b;
        prod *= 1.0 - b;
        s.alpha_bar[static_cast<size_t>(i)] = prod;
        s.sigma[static_cast<size_t>(i)] = std::sqrt(b);
    }
    return s;
}

template <typename T>
VideoT<T> add_noise(const VideoT<T>& v0, int t, const VideoT<T>& eps, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.T) throw ValidationError("add_noise: t outside [1, T]");
    if (!v0.same_shape(eps)) throw ValidationError("add_noise: eps shape mismatch");
    T a = static_cast<T>(std::sqrt(sched.alpha_bar_at(t)));
    T b = static_cast<T>(std::sqrt(1.0 - sched.alpha_bar_at(t)));
    VideoT<T> out = v0;
    for (size_t i = 0; i < out.px.size(); ++i) out.px[i] = a * v0.px[i] + b * eps.px[i];
    return out;
}

template VideoT<float> add_noise(const VideoT<float>&, int, const VideoT<float>&, const NoiseSchedule&);
template VideoT<double> add_noise(const VideoT<double>&, int, const VideoT<double>&, const NoiseSchedule&);

std::vector<int> select_timesteps(int T, int steps) {
    if (steps < 1) throw ValidationError("select_timesteps: need at least 1 step");
    if (steps >= T) {
        std::vector<int> all(static_cast<size_t>(T));
        for (int i = 0; i < T; ++i) all[static_cast<size_t>(i)] = i + 1;
        return all;
    }
    // evenly spaced, ascending, ending at T
    std::vector<int> out(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        double u = static_cast<double>(i + 1) / steps;
        int t = static_cast<int>(std::lround(u * T));
        out[static_cast<size_t>(i)] = std::max(1, std::min(T, t));
    }
    // de-duplicate while keeping the endpoint
    for (size_t i = 1; i < out.size(); ++i)
        if (out[i] <= out[i - 1]) out[i] = out[i - 1] + 1;
    for (size_t i = out.size(); i-- > 1;)
        if (out[i] > T) out[i] = T;  // cannot happen with steps < T, kept as a guard
    return out;
}

}  // namespace taskvid
