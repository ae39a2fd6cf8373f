#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "varibad/tape.hpp"

namespace varibad::testutil {

// Central finite differences against reverse-mode gradients over every entry
// of every parameter. loss_value() must rebuild the graph from current param
// values; fill_grads() must zero grads and run backward once.
inline double max_rel_err_fd(ParamStore& params, const std::function<double()>& loss_value,
                             const std::function<void()>& fill_grads, double h = 1e-5) {
    fill_grads();
    std::vector<std::vector<double>> saved;
    for (Param* p : params.all()) saved.push_back(p->grad.v);
    double worst = 0.0;
    auto all = params.all();
    for (size_t pi = 0; pi < all.size(); ++pi) {
        Param* p = all[pi];
        for (size_t i = 0; i < p->value.v.size(); ++i) {
            double orig = p->value.v[i];
            p->value.v[i] = orig + h;
            double f1 = loss_value();
            p->value.v[i] = orig - h;
            double f0 = loss_value();
            p->value.v[i] = orig;
            double fd = (f1 - f0) / (2.0 * h);
            double g = saved[pi][i];
            double rel = std::fabs(fd - g) / std::max(1.0, std::fabs(g));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

inline Tensor randn(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(rows, cols);
    std::normal_distribution<double> nd(0.0, scale);
    for (double& v : t.v) v = nd(rng);
    return t;
}

}  // namespace varibad::testutil
