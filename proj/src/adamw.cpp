#include <draglab/adamw.hpp>

#include <cmath>

namespace draglab::nn {

AdamW::AdamW(ParameterStore& store, AdamWConfig config) : store_(store), config_(config) {
    for (const auto& p : store_.params()) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void AdamW::reset() {
    for (auto& m : m_) m.fill(0);
    for (auto& v : v_) v.fill(0);
    t_ = 0;
}

double AdamW::step() {
    double sq = 0.0;
    for (const auto& p : store_.params())
        if (p->trainable)
            for (real g : p->grad.values()) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) return norm;
    const double clip = (config_.grad_clip > 0.0 && norm > config_.grad_clip) ? config_.grad_clip / norm : 1.0;

    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const double lr = config_.learning_rate;
    auto& params = store_.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->trainable || params[i]->grad.empty()) continue;
        Tensor& w = params[i]->value;
        const Tensor& g = params[i]->grad;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double grad = g[k] * clip;
            const double mk = config_.beta1 * m[k] + (1.0 - config_.beta1) * grad;
            const double vk = config_.beta2 * v[k] + (1.0 - config_.beta2) * grad * grad;
            m[k] = static_cast<real>(mk);
            v[k] = static_cast<real>(vk);
            const double update = (mk / bc1) / (std::sqrt(vk / bc2) + config_.eps);
            w[k] = static_cast<real>(w[k] - lr * (update + config_.weight_decay * w[k]));
        }
    }
    return norm;
}

}  // namespace draglab::nn
