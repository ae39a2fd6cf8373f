#include "varibad/optim.hpp"

#include <cmath>

namespace varibad {

void Adam::step(ParamStore& params) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (Param* p : params.all()) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            double gd = p->grad.v[i];
            p->adam_m.v[i] = beta1 * p->adam_m.v[i] + (1.0 - beta1) * gd;
            p->adam_v.v[i] = beta2 * p->adam_v.v[i] + (1.0 - beta2) * gd * gd;
            double mhat = p->adam_m.v[i] / bc1;
            double vhat = p->adam_v.v[i] / bc2;
            p->value.v[i] -= lr * mhat / (std::sqrt(vhat) + epsilon);
        }
    }
}

double grad_global_norm(const ParamStore& params) {
    double sq = 0.0;
    for (const Param* p : params.all())
        for (double gd : p->grad.v) sq += gd * gd;
    return std::sqrt(sq);
}

double global_norm_clip(ParamStore& params, double max_norm) {
    double norm = grad_global_norm(params);
    if (norm > max_norm && norm > 0.0) {
        double scale = max_norm / norm;
        for (Param* p : params.all())
            for (double& gd : p->grad.v) gd *= scale;
    }
    return norm;
}

void init_affine(Param& w, Param& b, std::mt19937_64& rng) {
    double bound = std::sqrt(1.0 / static_cast<double>(w.value.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& e : w.value.v) e = dist(rng);
    b.value.fill(0.0);
}

}  // namespace varibad
