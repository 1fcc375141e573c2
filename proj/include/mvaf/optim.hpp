#pragma once

#include <map>
#include <string>
#include <vector>

#include "mvaf/autodiff.hpp"

namespace mvaf {

// Named learnable tensors. Creation order is stable and defines the
// checkpoint layout.
class ParamStore {
public:
    ad::Var create(const std::string& name, Tensor init);
    ad::Var get(const std::string& name) const;
    bool has(const std::string& name) const;
    const std::vector<std::string>& names() const { return names_; }
    size_t size() const { return names_.size(); }
    void zero_grads();

private:
    std::vector<std::string> names_;
    std::map<std::string, ad::Var> params_;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // decoupled
};

// Decoupled-weight-decay Adam. One (m, v) slot per parameter, keyed by
// creation order.
class Adam {
public:
    Adam(ParamStore* params, AdamConfig cfg);
    // Applies one update using current gradients. `beta1` may be overridden
    // per step by the momentum schedule (pass < 0 to keep the config value).
    void step(double lr, double beta1_override = -1.0);
    long long step_count() const { return t_; }

    // checkpoint access
    std::vector<Tensor>& moments_m() { return m_; }
    std::vector<Tensor>& moments_v() { return v_; }
    void set_step_count(long long t) { t_ = t; }

private:
    ParamStore* params_;
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    long long t_ = 0;
};

struct OneCycleSchedule {
    double max_lr = 3e-3;
    double div_factor = 10.0;       // initial lr = max_lr / div_factor
    double final_div_factor = 1e4;  // final lr = max_lr / (div_factor * final_div_factor)
    double momentum_lo = 0.85;
    double momentum_hi = 0.95;
    double rise_fraction = 0.4;
    long long total_steps = 1;
};

// Cosine one-cycle: lr rises from max_lr/div to max_lr over the first
// rise_fraction of steps, then falls to the final value; momentum moves
// inversely between momentum_hi and momentum_lo. Steps past the end clamp.
std::pair<double, double> one_cycle_lr(long long step, const OneCycleSchedule& s);

}  // namespace mvaf
