#pragma once

#include <map>
#include <set>
#include <string>

#include "viti/nn.hpp"

namespace viti {

// AdamW: adaptive moments with decoupled weight decay.
class AdamW {
public:
    struct Options {
        double lr = 1e-5;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW() = default;
    explicit AdamW(const Options& opts) : opts_(opts) {}

    const Options& options() const { return opts_; }
    void set_lr(double lr) { opts_.lr = lr; }

    // applies one step to the trainable subset and clears those gradients
    void step(nn::ParamStore& store, const std::set<std::string>& trainable) {
        ++t_;
        double bc1 = 1.0 - std::pow(opts_.beta1, t_);
        double bc2 = 1.0 - std::pow(opts_.beta2, t_);
        for (const std::string& name : trainable) {
            ag::Var var = store.get(name);
            if (!var.has_grad())
                continue;
            Tensor& w = var.mutable_value();
            const Tensor& g = var.grad();
            auto& slot = state_[name];
            if (slot.m.numel() == 0) {
                slot.m = Tensor::zeros(w.shape);
                slot.v = Tensor::zeros(w.shape);
            }
            for (int64_t i = 0; i < w.numel(); ++i) {
                double gi = g[i];
                slot.m[i] = opts_.beta1 * slot.m[i] + (1.0 - opts_.beta1) * gi;
                slot.v[i] = opts_.beta2 * slot.v[i] + (1.0 - opts_.beta2) * gi * gi;
                double mhat = slot.m[i] / bc1;
                double vhat = slot.v[i] / bc2;
                w[i] -= opts_.lr * (mhat / (std::sqrt(vhat) + opts_.eps) + opts_.weight_decay * w[i]);
            }
        }
    }

private:
    struct Slot {
        Tensor m, v;
    };
    Options opts_;
    std::map<std::string, Slot> state_;
    int64_t t_ = 0;
};

}  // namespace viti
