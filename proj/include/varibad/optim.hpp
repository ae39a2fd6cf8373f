#pragma once

#include <random>

#include "varibad/tape.hpp"

namespace varibad {

// Bias-corrected Adam over a ParamStore. One instance per optimised network.
struct Adam {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long long step_count = 0;

    void step(ParamStore& params);
};

// Scales all grads by max_norm/norm when the global L2 norm exceeds max_norm.
// Returns the pre-clip norm.
double global_norm_clip(ParamStore& params, double max_norm);

double grad_global_norm(const ParamStore& params);

// Affine init: weights uniform in +-sqrt(1/fan_in), bias zero.
void init_affine(Param& w, Param& b, std::mt19937_64& rng);

}  // namespace varibad
