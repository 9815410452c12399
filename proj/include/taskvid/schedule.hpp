#pragma once

#include <vector>

#include "taskvid/image.hpp"

namespace taskvid {

// DDPM-style variance schedule. Index t is 1-based in the API (t in [1, T])
// to match the process definition; arrays are stored 0-based.
struct NoiseSchedule {
    int T = 0;
    double beta_start = 0, beta_end = 0;
    std::vector<double> beta;       // beta_t
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // prod_{s<=t} alpha_s
    std::vector<double> sigma;      // sqrt(beta_t), posterior std-dev

    double beta_at(int t) const { return beta[static_cast<size_t>(t - 1)]; }
    double alpha_at(int t) const { return alpha[static_cast<size_t>(t - 1)]; }
    double alpha_bar_at(int t) const { return alpha_bar[static_cast<size_t>(t - 1)]; }
    double sigma_at(int t) const { return sigma[static_cast<size_t>(t - 1)]; }
};

// Linear beta ramp from beta_start to beta_end over T steps.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);

// Closed-form forward marginal: v_t = sqrt(abar_t) v0 + sqrt(1 - abar_t) eps.
template <typename T>
VideoT<T> add_noise(const VideoT<T>& v0, int t, const VideoT<T>& eps, const NoiseSchedule& sched);

// Evenly spaced subsequence of [1..T] of the requested length, always
// containing T. Used for strided sampling.
std::vector<int> select_timesteps(int T, int steps);

}  // namespace taskvid
