#pragma once

#include <map>
#include <set>
#include <string>

#include "viti/autograd.hpp"
#include "viti/rng.hpp"

namespace viti::nn {

// Named leaf tensors. Names are the stable checkpoint API, so modules
// register parameters under fixed hierarchical prefixes.
class ParamStore {
public:
    ag::Var add(const std::string& name, Tensor init) {
        if (params_.count(name))
            throw ContractError("parameter registered twice: " + name);
        ag::Var v = ag::Var::leaf(std::move(init), true);
        params_.emplace(name, v);
        return v;
    }

    ag::Var get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end())
            throw ContractError("unknown parameter: " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    const std::map<std::string, ag::Var>& all() const { return params_; }

    std::set<std::string> names() const {
        std::set<std::string> out;
        for (const auto& [k, v] : params_)
            out.insert(k);
        return out;
    }

    void zero_grads() {
        for (auto& [k, v] : params_)
            v.zero_grad();
    }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& [k, v] : params_)
            n += v.value().numel();
        return n;
    }

private:
    std::map<std::string, ag::Var> params_;
};

inline Tensor xavier_init(int64_t out, int64_t in, RngStream& rng) {
    double s = std::sqrt(2.0 / static_cast<double>(in + out));
    return rng.normal_tensor({out, in}, 0.0, s);
}

struct Linear {
    ag::Var w, b;

    Linear() = default;
    Linear(ParamStore& store, const std::string& prefix, int64_t in, int64_t out, RngStream& rng,
           bool zero_init = false) {
        w = store.add(prefix + ".weight", zero_init ? Tensor::zeros({out, in}) : xavier_init(out, in, rng));
        b = store.add(prefix + ".bias", Tensor::zeros({out}));
    }

    ag::Var operator()(const ag::Var& x) const { return ag::linear(x, w, b); }
};

struct LayerNorm {
    ag::Var gamma, beta;

    LayerNorm() = default;
    LayerNorm(ParamStore& store, const std::string& prefix, int64_t dim) {
        gamma = store.add(prefix + ".gamma", Tensor::full({dim}, 1.0));
        beta = store.add(prefix + ".beta", Tensor::zeros({dim}));
    }

    ag::Var operator()(const ag::Var& x) const { return ag::layer_norm(x, gamma, beta); }
};

struct Mlp {
    Linear fc1, fc2;

    Mlp() = default;
    Mlp(ParamStore& store, const std::string& prefix, int64_t in, int64_t hidden, int64_t out,
        RngStream& rng)
        : fc1(store, prefix + ".fc1", in, hidden, rng), fc2(store, prefix + ".fc2", hidden, out, rng) {}

    ag::Var operator()(const ag::Var& x) const { return fc2(ag::gelu(fc1(x))); }
};

}  // namespace viti::nn
