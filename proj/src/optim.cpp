#include "mvaf/optim.hpp"

#include <cmath>

namespace mvaf {

ad::Var ParamStore::create(const std::string& name, Tensor init) {
    if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    ad::Var v = ad::make_leaf(std::move(init));
    names_.push_back(name);
    params_.emplace(name, v);
    return v;
}

ad::Var ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) != 0; }

void ParamStore::zero_grads() {
    for (const auto& name : names_) params_.at(name).zero_grad();
}

Adam::Adam(ParamStore* params, AdamConfig cfg) : params_(params), cfg_(cfg) {
    for (const auto& name : params->names()) {
        const Tensor& v = params->get(name).value();
        m_.push_back(Tensor(v.shape));
        v_.push_back(Tensor(v.shape));
    }
}

void Adam::step(double lr, double beta1_override) {
    double b1 = beta1_override >= 0 ? beta1_override : cfg_.beta1;
    ++t_;
    double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t p = 0; p < params_->names().size(); ++p) {
        ad::Var var = params_->get(params_->names()[p]);
        Tensor& val = var.value();
        const Tensor& g = var.grad();
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (int i = 0; i < val.size(); ++i) {
            m[i] = b1 * m[i] + (1 - b1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            // decoupled weight decay, then the Adam update
            val[i] -= lr * cfg_.weight_decay * val[i];
            val[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

std::pair<double, double> one_cycle_lr(long long step, const OneCycleSchedule& s) {
    double lr0 = s.max_lr / s.div_factor;
    double lr_final = s.max_lr / (s.div_factor * s.final_div_factor);
    long long peak = static_cast<long long>(std::llround(s.rise_fraction * static_cast<double>(s.total_steps)));
    if (peak < 1) peak = 1;
    if (step < 0) step = 0;
    if (step > s.total_steps) step = s.total_steps;
    auto cosine = [](double a, double b, double t) {
        return b + (a - b) * 0.5 * (1.0 + std::cos(kPi * t));
    };
    if (step <= peak) {
        double t = static_cast<double>(step) / static_cast<double>(peak);
        return {cosine(lr0, s.max_lr, t), cosine(s.momentum_hi, s.momentum_lo, t)};
    }
    double t = static_cast<double>(step - peak) / static_cast<double>(std::max<long long>(1, s.total_steps - peak));
    return {cosine(s.max_lr, lr_final, t), cosine(s.momentum_lo, s.momentum_hi, t)};
}

}  // namespace mvaf
