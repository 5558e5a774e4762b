#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "viti/tensor.hpp"

namespace viti::ag {

// Reverse-mode tape at tensor granularity. Nodes record parents and a
// backward closure only when some input needs gradients, so inference
// passes build no tape at all.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backfn;

    Tensor& ensure_grad() {
        if (!grad_ready) {
            grad = Tensor::zeros(value.shape);
            grad_ready = true;
        }
        return grad;
    }
};

using NodePtr = std::shared_ptr<Node>;

class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : n_(std::move(n)) {}

    static Var leaf(Tensor value, bool requires_grad) {
        auto n = std::make_shared<Node>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        return Var(std::move(n));
    }

    static Var constant(Tensor value) { return leaf(std::move(value), false); }

    bool defined() const { return static_cast<bool>(n_); }
    const Tensor& value() const { return n_->value; }
    Tensor& mutable_value() { return n_->value; }
    const Tensor& grad() const { return n_->grad; }
    Tensor& ensure_grad() { return n_->ensure_grad(); }
    bool has_grad() const { return n_->grad_ready; }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    void zero_grad() {
        if (n_->grad_ready)
            std::fill(n_->grad.data.begin(), n_->grad.data.end(), 0.0);
    }
    NodePtr node() const { return n_; }

private:
    NodePtr n_;
};

namespace detail {

inline bool any_requires(std::initializer_list<const Var*> vs) {
    for (const Var* v : vs)
        if (v->defined() && v->requires_grad())
            return true;
    return false;
}

inline Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backfn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool need = false;
    for (const Var& v : inputs)
        need = need || v.requires_grad();
    n->requires_grad = need;
    if (need) {
        for (const Var& v : inputs)
            n->inputs.push_back(v.node());
        n->backfn = std::move(backfn);
    }
    return Var(std::move(n));
}

}  // namespace detail

// Seeds d(loss)/d(loss) = 1 and propagates through the tape in reverse
// topological order. `loss` must be a scalar (numel == 1).
inline void backward(const Var& loss) {
    if (loss.value().numel() != 1)
        throw ContractError("backward: loss must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({loss.node().get(), 0});
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->inputs.size()) {
            Node* child = n->inputs[idx++].get();
            if (child->requires_grad && !seen.count(child)) {
                seen.insert(child);
                stack.push_back({child, 0});
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backfn && n->grad_ready)
            n->backfn(*n);
    }
}

// ---- elementwise ----

inline Var add(const Var& a, const Var& b) {
    Tensor v = viti::add(a.value(), b.value());
    return detail::make_op(std::move(v), {a, b}, [](Node& self) {
        for (int k = 0; k < 2; ++k) {
            Node& in = *self.inputs[k];
            if (!in.requires_grad)
                continue;
            Tensor& g = in.ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] += self.grad[i];
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    Tensor v = viti::sub(a.value(), b.value());
    return detail::make_op(std::move(v), {a, b}, [](Node& self) {
        if (self.inputs[0]->requires_grad) {
            Tensor& g = self.inputs[0]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] += self.grad[i];
        }
        if (self.inputs[1]->requires_grad) {
            Tensor& g = self.inputs[1]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] -= self.grad[i];
        }
    });
}

inline Var mul(const Var& a, const Var& b) {
    Tensor v = viti::mul(a.value(), b.value());
    return detail::make_op(std::move(v), {a, b}, [](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        if (na.requires_grad) {
            Tensor& g = na.ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] += self.grad[i] * nb.value[i];
        }
        if (nb.requires_grad) {
            Tensor& g = nb.ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] += self.grad[i] * na.value[i];
        }
    });
}

inline Var scale(const Var& a, double s) {
    Tensor v = viti::scaled(a.value(), s);
    return detail::make_op(std::move(v), {a}, [s](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i)
            g[i] += s * self.grad[i];
    });
}

// multiply by a constant tensor (mask weighting); gradient is exactly zero
// wherever the constant is zero
inline Var mul_const(const Var& a, Tensor c) {
    check_same_shape(a.value(), c, "mul_const");
    Tensor v = viti::mul(a.value(), c);
    auto cp = std::make_shared<Tensor>(std::move(c));
    return detail::make_op(std::move(v), {a}, [cp](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i)
            g[i] += self.grad[i] * (*cp)[i];
    });
}

inline Var add_const(const Var& a, Tensor c) {
    Tensor v = viti::add(a.value(), std::move(c));
    return detail::make_op(std::move(v), {a}, [](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i)
            g[i] += self.grad[i];
    });
}

inline Var gelu(const Var& a) {
    const Tensor& x = a.value();
    Tensor v = x;
    for (double& e : v.data) {
        double cdf = 0.5 * (1.0 + std::erf(e / 1.4142135623730951));
        e = e * cdf;
    }
    return detail::make_op(std::move(v), {a}, [](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        const Tensor& x = self.inputs[0]->value;
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i) {
            double xi = x[i];
            double cdf = 0.5 * (1.0 + std::erf(xi / 1.4142135623730951));
            double pdf = std::exp(-0.5 * xi * xi) * 0.3989422804014327;
            g[i] += self.grad[i] * (cdf + xi * pdf);
        }
    });
}

// ---- reductions ----

inline Var sum(const Var& a) {
    Tensor v = Tensor::scalar(viti::sum(a.value()));
    return detail::make_op(std::move(v), {a}, [](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        double s = self.grad[0];
        for (int64_t i = 0; i < g.numel(); ++i)
            g[i] += s;
    });
}

// ---- shape ----

inline Var reshape(const Var& a, std::vector<int64_t> shape) {
    Tensor v = a.value().reshaped(std::move(shape));
    return detail::make_op(std::move(v), {a}, [](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < g.numel(); ++i)
            g[i] += self.grad[i];
    });
}

inline Var transpose(const Var& a) {
    const Tensor& x = a.value();
    if (x.rank() != 2)
        throw ContractError("transpose: rank-2 only");
    int64_t m = x.dim(0), n = x.dim(1);
    Tensor v({n, m});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
            v.at(j, i) = x.at(i, j);
    return detail::make_op(std::move(v), {a}, [m, n](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j)
                g.at(i, j) += self.grad.at(j, i);
    });
}

inline Var slice_cols(const Var& a, int64_t lo, int64_t hi) {
    const Tensor& x = a.value();
    if (x.rank() != 2 || lo < 0 || hi > x.dim(1) || lo >= hi)
        throw ContractError("slice_cols: bad range");
    int64_t m = x.dim(0), w = hi - lo;
    Tensor v({m, w});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < w; ++j)
            v.at(i, j) = x.at(i, lo + j);
    return detail::make_op(std::move(v), {a}, [lo, m, w](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j)
                g.at(i, lo + j) += self.grad.at(i, j);
    });
}

inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty())
        throw ContractError("concat_cols: empty");
    int64_t m = parts[0].value().dim(0), total = 0;
    for (const Var& p : parts) {
        if (p.value().rank() != 2 || p.value().dim(0) != m)
            throw ContractError("concat_cols: row mismatch");
        total += p.value().dim(1);
    }
    Tensor v({m, total});
    int64_t off = 0;
    for (const Var& p : parts) {
        int64_t w = p.value().dim(1);
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j)
                v.at(i, off + j) = p.value().at(i, j);
        off += w;
    }
    std::vector<int64_t> widths;
    for (const Var& p : parts)
        widths.push_back(p.value().dim(1));
    return detail::make_op(std::move(v), parts, [m, widths](Node& self) {
        int64_t off = 0;
        for (size_t k = 0; k < self.inputs.size(); ++k) {
            int64_t w = widths[k];
            if (self.inputs[k]->requires_grad) {
                Tensor& g = self.inputs[k]->ensure_grad();
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < w; ++j)
                        g.at(i, j) += self.grad.at(i, off + j);
            }
            off += w;
        }
    });
}

inline Var slice_rows(const Var& a, int64_t lo, int64_t hi) {
    const Tensor& x = a.value();
    if (x.rank() != 2 || lo < 0 || hi > x.dim(0) || lo >= hi)
        throw ContractError("slice_rows: bad range");
    int64_t w = x.dim(1), m = hi - lo;
    Tensor v({m, w});
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < w; ++j)
            v.at(i, j) = x.at(lo + i, j);
    return detail::make_op(std::move(v), {a}, [lo, m, w](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j)
                g.at(lo + i, j) += self.grad.at(i, j);
    });
}

inline Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty())
        throw ContractError("concat_rows: empty");
    int64_t w = parts[0].value().dim(1), total = 0;
    for (const Var& p : parts) {
        if (p.value().rank() != 2 || p.value().dim(1) != w)
            throw ContractError("concat_rows: col mismatch");
        total += p.value().dim(0);
    }
    Tensor v({total, w});
    int64_t off = 0;
    for (const Var& p : parts) {
        int64_t m = p.value().dim(0);
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < w; ++j)
                v.at(off + i, j) = p.value().at(i, j);
        off += m;
    }
    std::vector<int64_t> heights;
    for (const Var& p : parts)
        heights.push_back(p.value().dim(0));
    return detail::make_op(std::move(v), parts, [w, heights](Node& self) {
        int64_t off = 0;
        for (size_t k = 0; k < self.inputs.size(); ++k) {
            int64_t m = heights[k];
            if (self.inputs[k]->requires_grad) {
                Tensor& g = self.inputs[k]->ensure_grad();
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t j = 0; j < w; ++j)
                        g.at(i, j) += self.grad.at(off + i, j);
            }
            off += m;
        }
    });
}

// rows of `table` selected by `idx`; backward scatter-adds into the table
inline Var gather_rows(const Var& table, std::vector<int64_t> idx) {
    const Tensor& t = table.value();
    if (t.rank() != 2)
        throw ContractError("gather_rows: table must be rank-2");
    int64_t w = t.dim(1);
    Tensor v({static_cast<int64_t>(idx.size()), w});
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= t.dim(0))
            throw ContractError("gather_rows: index out of range");
        for (int64_t j = 0; j < w; ++j)
            v.at(static_cast<int64_t>(i), j) = t.at(idx[i], j);
    }
    auto ip = std::make_shared<std::vector<int64_t>>(std::move(idx));
    return detail::make_op(std::move(v), {table}, [ip, w](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        for (size_t i = 0; i < ip->size(); ++i)
            for (int64_t j = 0; j < w; ++j)
                g.at((*ip)[i], j) += self.grad.at(static_cast<int64_t>(i), j);
    });
}

// ---- linear algebra ----

inline void matmul_into(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (!accumulate)
        std::fill(out.data.begin(), out.data.end(), 0.0);
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i * k)];
        double* orow = &out.data[static_cast<size_t>(i * n)];
        for (int64_t p = 0; p < k; ++p) {
            double av = arow[p];
            if (av == 0.0)
                continue;
            const double* brow = &b.data[static_cast<size_t>(p * n)];
            for (int64_t j = 0; j < n; ++j)
                orow[j] += av * brow[j];
        }
    }
}

inline Tensor matmul_val(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ContractError("matmul: incompatible shapes");
    Tensor out({a.dim(0), b.dim(1)});
    matmul_into(a, b, out, false);
    return out;
}

inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    // a^T * b, a: [k,m], b: [k,n]
    int64_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    for (int64_t p = 0; p < k; ++p) {
        const double* arow = &a.data[static_cast<size_t>(p * m)];
        const double* brow = &b.data[static_cast<size_t>(p * n)];
        for (int64_t i = 0; i < m; ++i) {
            double av = arow[i];
            if (av == 0.0)
                continue;
            double* orow = &out.data[static_cast<size_t>(i * n)];
            for (int64_t j = 0; j < n; ++j)
                orow[j] += av * brow[j];
        }
    }
    return out;
}

inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    // a * b^T, a: [m,k], b: [n,k]
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    Tensor out({m, n});
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i * k)];
        for (int64_t j = 0; j < n; ++j) {
            const double* brow = &b.data[static_cast<size_t>(j * k)];
            double s = 0.0;
            for (int64_t p = 0; p < k; ++p)
                s += arow[p] * brow[p];
            out.at(i, j) = s;
        }
    }
    return out;
}

inline Var matmul(const Var& a, const Var& b) {
    Tensor v = matmul_val(a.value(), b.value());
    return detail::make_op(std::move(v), {a, b}, [](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        if (na.requires_grad) {
            Tensor da = matmul_nt(self.grad, nb.value);  // G * B^T
            Tensor& g = na.ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] += da[i];
        }
        if (nb.requires_grad) {
            Tensor db = matmul_tn(na.value, self.grad);  // A^T * G
            Tensor& g = nb.ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] += db[i];
        }
    });
}

// y = x * W^T + b ; x: [L,in], W: [out,in], b: [out]
inline Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1) || bv.dim(0) != wv.dim(0))
        throw ContractError("linear: incompatible shapes");
    Tensor v = matmul_nt(xv, wv);
    int64_t L = v.dim(0), out = v.dim(1);
    for (int64_t i = 0; i < L; ++i)
        for (int64_t j = 0; j < out; ++j)
            v.at(i, j) += bv[j];
    return detail::make_op(std::move(v), {x, w, b}, [](Node& self) {
        Node& nx = *self.inputs[0];
        Node& nw = *self.inputs[1];
        Node& nb = *self.inputs[2];
        if (nx.requires_grad) {
            Tensor dx = matmul_val(self.grad, nw.value);  // G * W
            Tensor& g = nx.ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] += dx[i];
        }
        if (nw.requires_grad) {
            Tensor dw = matmul_tn(self.grad, nx.value);  // G^T * X
            Tensor& g = nw.ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] += dw[i];
        }
        if (nb.requires_grad) {
            Tensor& g = nb.ensure_grad();
            int64_t L = self.grad.dim(0), out = self.grad.dim(1);
            for (int64_t i = 0; i < L; ++i)
                for (int64_t j = 0; j < out; ++j)
                    g[j] += self.grad.at(i, j);
        }
    });
}

// broadcast-add a row vector v[n] to every row of x[m,n]
inline Var add_rowvec(const Var& x, const Var& v) {
    const Tensor& xv = x.value();
    const Tensor& vv = v.value();
    if (xv.rank() != 2 || vv.numel() != xv.dim(1))
        throw ContractError("add_rowvec: incompatible shapes");
    Tensor out = xv;
    int64_t m = xv.dim(0), n = xv.dim(1);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
            out.at(i, j) += vv[j];
    return detail::make_op(std::move(out), {x, v}, [m, n](Node& self) {
        if (self.inputs[0]->requires_grad) {
            Tensor& g = self.inputs[0]->ensure_grad();
            for (int64_t i = 0; i < g.numel(); ++i)
                g[i] += self.grad[i];
        }
        if (self.inputs[1]->requires_grad) {
            Tensor& g = self.inputs[1]->ensure_grad();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j)
                    g[j] += self.grad.at(i, j);
        }
    });
}

inline Var softmax_rows(const Var& a) {
    const Tensor& x = a.value();
    if (x.rank() != 2)
        throw ContractError("softmax_rows: rank-2 only");
    int64_t m = x.dim(0), n = x.dim(1);
    Tensor v({m, n});
    for (int64_t i = 0; i < m; ++i) {
        double mx = x.at(i, 0);
        for (int64_t j = 1; j < n; ++j)
            mx = std::max(mx, x.at(i, j));
        double z = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            double e = std::exp(x.at(i, j) - mx);
            v.at(i, j) = e;
            z += e;
        }
        for (int64_t j = 0; j < n; ++j)
            v.at(i, j) /= z;
    }
    return detail::make_op(std::move(v), {a}, [m, n](Node& self) {
        if (!self.inputs[0]->requires_grad)
            return;
        Tensor& g = self.inputs[0]->ensure_grad();
        const Tensor& p = self.value;
        for (int64_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int64_t j = 0; j < n; ++j)
                dot += self.grad.at(i, j) * p.at(i, j);
            for (int64_t j = 0; j < n; ++j)
                g.at(i, j) += p.at(i, j) * (self.grad.at(i, j) - dot);
        }
    });
}

inline Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-6) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2)
        throw ContractError("layer_norm: rank-2 only");
    int64_t m = xv.dim(0), n = xv.dim(1);
    if (gamma.value().numel() != n || beta.value().numel() != n)
        throw ContractError("layer_norm: param size mismatch");
    Tensor v({m, n});
    auto xhat = std::make_shared<Tensor>(Tensor({m, n}));
    auto rstd = std::make_shared<std::vector<double>>(static_cast<size_t>(m));
    for (int64_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (int64_t j = 0; j < n; ++j)
            mu += xv.at(i, j);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            double d = xv.at(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double rs = 1.0 / std::sqrt(var + eps);
        (*rstd)[static_cast<size_t>(i)] = rs;
        for (int64_t j = 0; j < n; ++j) {
            double xh = (xv.at(i, j) - mu) * rs;
            xhat->at(i, j) = xh;
            v.at(i, j) = xh * gamma.value()[j] + beta.value()[j];
        }
    }
    return detail::make_op(std::move(v), {x, gamma, beta}, [m, n, xhat, rstd](Node& self) {
        Node& nx = *self.inputs[0];
        Node& ng = *self.inputs[1];
        Node& nb = *self.inputs[2];
        const Tensor& G = self.grad;
        if (ng.requires_grad) {
            Tensor& g = ng.ensure_grad();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j)
                    g[j] += G.at(i, j) * xhat->at(i, j);
        }
        if (nb.requires_grad) {
            Tensor& g = nb.ensure_grad();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j)
                    g[j] += G.at(i, j);
        }
        if (nx.requires_grad) {
            Tensor& g = nx.ensure_grad();
            const Tensor& gam = ng.value;
            for (int64_t i = 0; i < m; ++i) {
                double mean_gh = 0.0, mean_ghx = 0.0;
                for (int64_t j = 0; j < n; ++j) {
                    double gh = G.at(i, j) * gam[j];
                    mean_gh += gh;
                    mean_ghx += gh * xhat->at(i, j);
                }
                mean_gh /= static_cast<double>(n);
                mean_ghx /= static_cast<double>(n);
                double rs = (*rstd)[static_cast<size_t>(i)];
                for (int64_t j = 0; j < n; ++j) {
                    double gh = G.at(i, j) * gam[j];
                    g.at(i, j) += rs * (gh - mean_gh - xhat->at(i, j) * mean_ghx);
                }
            }
        }
    });
}

}  // namespace viti::ag
