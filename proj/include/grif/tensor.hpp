#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "grif/rng.hpp"

namespace grif::tc {

// Reverse-mode autodiff over dense row-major tensors. Graphs are built by the
// forward ops below and freed when the last tensor referencing them goes out
// of scope. Real is float for training and double for gradient checks.
template <typename Real>
class TensorT {
public:
    struct Node {
        std::vector<int> shape;
        std::shared_ptr<std::vector<Real>> data;
        std::vector<Real> grad;  // allocated on first backward touch
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward_fn;  // accumulates into parents' grad

        int64_t numel() const {
            int64_t n = 1;
            for (int d : shape) n *= d;
            return n;
        }
        void ensure_grad() {
            if (grad.empty()) grad.assign(static_cast<size_t>(numel()), Real(0));
        }
    };

    TensorT() = default;

    TensorT(std::vector<int> shape, std::vector<Real> values, bool requires_grad = false) {
        int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("tensor: shape dims must be positive, got " + shape_str(shape));
            n *= d;
        }
        if (n != static_cast<int64_t>(values.size()))
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " needs " + std::to_string(n) +
                                        " values, got " + std::to_string(values.size()));
        n_ = std::make_shared<Node>();
        n_->shape = std::move(shape);
        n_->data = std::make_shared<std::vector<Real>>(std::move(values));
        n_->requires_grad = requires_grad;
    }

    static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return TensorT(std::move(shape), std::vector<Real>(static_cast<size_t>(n), Real(0)), requires_grad);
    }

    static TensorT full(std::vector<int> shape, Real value, bool requires_grad = false) {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return TensorT(std::move(shape), std::vector<Real>(static_cast<size_t>(n), value), requires_grad);
    }

    static TensorT scalar(Real value) { return TensorT({1}, {value}); }

    // He-style uniform fan-in init for weight matrices, U(-sqrt(6/fan_in), +).
    static TensorT he_uniform(std::vector<int> shape, int fan_in, Rng& rng, bool requires_grad = true) {
        int64_t n = 1;
        for (int d : shape) n *= d;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::vector<Real> v(static_cast<size_t>(n));
        for (auto& x : v) x = static_cast<Real>(rng.uniform(-bound, bound));
        return TensorT(std::move(shape), std::move(v), requires_grad);
    }

    bool defined() const { return static_cast<bool>(n_); }
    const std::vector<int>& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape.at(static_cast<size_t>(i)); }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    int64_t numel() const { return n_->numel(); }
    bool requires_grad() const { return n_->requires_grad; }

    std::vector<Real>& data() { return *n_->data; }
    const std::vector<Real>& data() const { return *n_->data; }
    std::vector<Real>& grad() {
        n_->ensure_grad();
        return n_->grad;
    }
    const std::vector<Real>& grad() const {
        n_->ensure_grad();
        return n_->grad;
    }
    void zero_grad() {
        if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), Real(0));
    }

    Real item() const {
        if (numel() != 1) throw std::invalid_argument("item: tensor has " + std::to_string(numel()) + " elements");
        return (*n_->data)[0];
    }
    Real at(int64_t i) const { return (*n_->data)[static_cast<size_t>(i)]; }
    Real at(int64_t r, int64_t c) const {
        return (*n_->data)[static_cast<size_t>(r * n_->shape[1] + c)];
    }

    // Shares the value buffer but drops history and gradient tracking.
    TensorT detach() const {
        TensorT t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = n_->shape;
        t.n_->data = n_->data;
        t.n_->requires_grad = false;
        return t;
    }

    // Deep copy of the values; no history.
    TensorT clone() const {
        return TensorT(n_->shape, *n_->data, n_->requires_grad);
    }

    TensorT reshape(std::vector<int> shape) const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        if (n != numel())
            throw std::invalid_argument("reshape: " + shape_str(n_->shape) + " -> " + shape_str(shape) +
                                        " changes element count");
        TensorT t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = std::move(shape);
        t.n_->data = n_->data;
        t.n_->requires_grad = n_->requires_grad;
        if (n_->requires_grad) {
            t.n_->parents = {n_};
            auto src = n_;
            t.n_->backward_fn = [src](Node& self) {
                src->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) src->grad[i] += self.grad[i];
            };
        }
        return t;
    }

    std::shared_ptr<Node> node() const { return n_; }

    static std::string shape_str(const std::vector<int>& s) {
        std::ostringstream os;
        os << "(";
        for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << ")";
        return os.str();
    }

    static TensorT from_node(std::shared_ptr<Node> n) {
        TensorT t;
        t.n_ = std::move(n);
        return t;
    }

private:
    std::shared_ptr<Node> n_;
};

namespace detail {

template <typename Real>
void check_finite(const TensorT<Real>& t, const char* op) {
    for (Real v : t.data())
        if (!std::isfinite(static_cast<double>(v)))
            throw std::domain_error(std::string(op) + ": non-finite input value");
}

template <typename Real>
std::shared_ptr<typename TensorT<Real>::Node> make_node(std::vector<int> shape,
                                                        std::vector<Real> values,
                                                        std::vector<TensorT<Real>> parents) {
    auto n = std::make_shared<typename TensorT<Real>::Node>();
    n->shape = std::move(shape);
    n->data = std::make_shared<std::vector<Real>>(std::move(values));
    for (auto& p : parents) {
        if (p.requires_grad()) n->requires_grad = true;
        n->parents.push_back(p.node());
    }
    if (!n->requires_grad) n->parents.clear();
    return n;
}

template <typename Real>
using EMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using EMap = Eigen::Map<EMat<Real>>;
template <typename Real>
using ECMap = Eigen::Map<const EMat<Real>>;

}  // namespace detail

// ---------------------------------------------------------------------------
// forward ops
// ---------------------------------------------------------------------------

template <typename Real>
TensorT<Real> matmul(const TensorT<Real>& a, const TensorT<Real>& b) {
    using T = TensorT<Real>;
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + T::shape_str(a.shape()) + " x " +
                                    T::shape_str(b.shape()));
    detail::check_finite(a, "matmul");
    detail::check_finite(b, "matmul");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<Real> out(static_cast<size_t>(m) * n);
    detail::ECMap<Real> A(a.data().data(), m, k), B(b.data().data(), k, n);
    detail::EMap<Real>(out.data(), m, n).noalias() = A * B;
    auto node = detail::make_node<Real>({m, n}, std::move(out), {a, b});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backward_fn = [an, bn, m, k, n](typename T::Node& self) {
            detail::ECMap<Real> G(self.grad.data(), m, n);
            detail::ECMap<Real> A2(an->data->data(), m, k), B2(bn->data->data(), k, n);
            if (an->requires_grad) {
                an->ensure_grad();
                detail::EMap<Real>(an->grad.data(), m, k).noalias() += G * B2.transpose();
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                detail::EMap<Real>(bn->grad.data(), k, n).noalias() += A2.transpose() * G;
            }
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> add(const TensorT<Real>& a, const TensorT<Real>& b) {
    using T = TensorT<Real>;
    if (a.shape() != b.shape())
        throw std::invalid_argument("add: shape mismatch " + T::shape_str(a.shape()) + " vs " +
                                    T::shape_str(b.shape()));
    std::vector<Real> out(a.data());
    for (size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a, b});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backward_fn = [an, bn](typename T::Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
            }
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> sub(const TensorT<Real>& a, const TensorT<Real>& b) {
    using T = TensorT<Real>;
    if (a.shape() != b.shape())
        throw std::invalid_argument("sub: shape mismatch " + T::shape_str(a.shape()) + " vs " +
                                    T::shape_str(b.shape()));
    std::vector<Real> out(a.data());
    for (size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a, b});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backward_fn = [an, bn](typename T::Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
            }
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> mul(const TensorT<Real>& a, const TensorT<Real>& b) {
    using T = TensorT<Real>;
    if (a.shape() != b.shape())
        throw std::invalid_argument("mul: shape mismatch " + T::shape_str(a.shape()) + " vs " +
                                    T::shape_str(b.shape()));
    std::vector<Real> out(a.data());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a, b});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backward_fn = [an, bn](typename T::Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * (*bn->data)[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * (*an->data)[i];
            }
        };
    }
    return T::from_node(node);
}

// Row-broadcast bias add: (m,n) + (n,).
template <typename Real>
TensorT<Real> add_bias(const TensorT<Real>& a, const TensorT<Real>& bias) {
    using T = TensorT<Real>;
    if (a.rank() != 2 || bias.rank() != 1 || bias.dim(0) != a.dim(1))
        throw std::invalid_argument("add_bias: shape mismatch " + T::shape_str(a.shape()) + " vs " +
                                    T::shape_str(bias.shape()));
    const int m = a.dim(0), n = a.dim(1);
    std::vector<Real> out(a.data());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i) * n + j] += bias.data()[static_cast<size_t>(j)];
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a, bias});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = bias.node();
        node->backward_fn = [an, bn, m, n](typename T::Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) bn->grad[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(i) * n + j];
            }
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> scale(const TensorT<Real>& a, Real c) {
    using T = TensorT<Real>;
    std::vector<Real> out(a.data());
    for (auto& v : out) v *= c;
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an, c](typename T::Node& self) {
            an->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += c * self.grad[i];
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> add_const(const TensorT<Real>& a, Real c) {
    using T = TensorT<Real>;
    std::vector<Real> out(a.data());
    for (auto& v : out) v += c;
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an](typename T::Node& self) {
            an->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> relu(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    std::vector<Real> out(a.data());
    for (auto& v : out) v = v > Real(0) ? v : Real(0);
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an](typename T::Node& self) {
            an->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                if ((*an->data)[i] > Real(0)) an->grad[i] += self.grad[i];
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> tanh_op(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    std::vector<Real> out(a.data());
    for (auto& v : out) v = std::tanh(v);
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an](typename T::Node& self) {
            an->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                const Real y = (*self.data)[i];
                an->grad[i] += self.grad[i] * (Real(1) - y * y);
            }
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> sum_all(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    Real s = 0;
    for (Real v : a.data()) s += v;
    auto node = detail::make_node<Real>({1}, {s}, {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an](typename T::Node& self) {
            an->ensure_grad();
            for (auto& g : an->grad) g += self.grad[0];
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> mean_all(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    Real s = 0;
    for (Real v : a.data()) s += v;
    const Real inv = Real(1) / static_cast<Real>(a.numel());
    auto node = detail::make_node<Real>({1}, {s * inv}, {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an, inv](typename T::Node& self) {
            an->ensure_grad();
            for (auto& g : an->grad) g += self.grad[0] * inv;
        };
    }
    return T::from_node(node);
}

// Mean over axis 0: (m,n) -> (1,n).
template <typename Real>
TensorT<Real> mean_rows(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    if (a.rank() != 2) throw std::invalid_argument("mean_rows: need rank-2, got " + T::shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    std::vector<Real> out(static_cast<size_t>(n), Real(0));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(j)] += a.data()[static_cast<size_t>(i) * n + j];
    const Real inv = Real(1) / static_cast<Real>(m);
    for (auto& v : out) v *= inv;
    auto node = detail::make_node<Real>({1, n}, std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an, m, n, inv](typename T::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    an->grad[static_cast<size_t>(i) * n + j] += self.grad[static_cast<size_t>(j)] * inv;
        };
    }
    return T::from_node(node);
}

// Mean over consecutive groups of `group` rows: (g*group, n) -> (g, n).
template <typename Real>
TensorT<Real> mean_rows_grouped(const TensorT<Real>& a, int group) {
    using T = TensorT<Real>;
    if (a.rank() != 2 || group <= 0 || a.dim(0) % group != 0)
        throw std::invalid_argument("mean_rows_grouped: shape " + T::shape_str(a.shape()) + " not divisible into groups of " +
                                    std::to_string(group));
    const int g = a.dim(0) / group, n = a.dim(1);
    std::vector<Real> out(static_cast<size_t>(g) * n, Real(0));
    for (int i = 0; i < a.dim(0); ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<size_t>(i / group) * n + j] += a.data()[static_cast<size_t>(i) * n + j];
    const Real inv = Real(1) / static_cast<Real>(group);
    for (auto& v : out) v *= inv;
    auto node = detail::make_node<Real>({g, n}, std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        const int rows = a.dim(0);
        node->backward_fn = [an, rows, n, group, inv](typename T::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < n; ++j)
                    an->grad[static_cast<size_t>(i) * n + j] += self.grad[static_cast<size_t>(i / group) * n + j] * inv;
        };
    }
    return T::from_node(node);
}

// Sum over axis 1: (m,n) -> (m,1).
template <typename Real>
TensorT<Real> sum_cols(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    if (a.rank() != 2) throw std::invalid_argument("sum_cols: need rank-2, got " + T::shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    std::vector<Real> out(static_cast<size_t>(m), Real(0));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i)] += a.data()[static_cast<size_t>(i) * n + j];
    auto node = detail::make_node<Real>({m, 1}, std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an, m, n](typename T::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) an->grad[static_cast<size_t>(i) * n + j] += self.grad[static_cast<size_t>(i)];
        };
    }
    return T::from_node(node);
}

// Concatenate along axis 0; all parts must share the column count.
template <typename Real>
TensorT<Real> concat_rows(const std::vector<TensorT<Real>>& parts) {
    using T = TensorT<Real>;
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const int n = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
    int m = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(1) != n)
            throw std::invalid_argument("concat_rows: part shape " + T::shape_str(p.shape()) + " differs in columns");
        m += p.dim(0);
    }
    std::vector<Real> out;
    out.reserve(static_cast<size_t>(m) * n);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    auto node = detail::make_node<Real>({m, n}, std::move(out), parts);
    if (node->requires_grad) {
        std::vector<std::shared_ptr<typename T::Node>> pn;
        std::vector<int> rows;
        for (const auto& p : parts) {
            pn.push_back(p.node());
            rows.push_back(p.dim(0));
        }
        node->backward_fn = [pn, rows, n](typename T::Node& self) {
            size_t off = 0;
            for (size_t k = 0; k < pn.size(); ++k) {
                const size_t cnt = static_cast<size_t>(rows[k]) * n;
                if (pn[k]->requires_grad) {
                    pn[k]->ensure_grad();
                    for (size_t i = 0; i < cnt; ++i) pn[k]->grad[i] += self.grad[off + i];
                }
                off += cnt;
            }
        };
    }
    return T::from_node(node);
}

// Column slice [c0, c1): (m,n) -> (m, c1-c0).
template <typename Real>
TensorT<Real> slice_cols(const TensorT<Real>& a, int c0, int c1) {
    using T = TensorT<Real>;
    if (a.rank() != 2 || c0 < 0 || c1 > a.dim(1) || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," + std::to_string(c1) +
                                    ") for " + T::shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1), w = c1 - c0;
    std::vector<Real> out(static_cast<size_t>(m) * w);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j) out[static_cast<size_t>(i) * w + j] = a.data()[static_cast<size_t>(i) * n + c0 + j];
    auto node = detail::make_node<Real>({m, w}, std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an, m, n, w, c0](typename T::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j)
                    an->grad[static_cast<size_t>(i) * n + c0 + j] += self.grad[static_cast<size_t>(i) * w + j];
        };
    }
    return T::from_node(node);
}

template <typename Real>
TensorT<Real> transpose(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    if (a.rank() != 2) throw std::invalid_argument("transpose: need rank-2, got " + T::shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    std::vector<Real> out(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(j) * m + i] = a.data()[static_cast<size_t>(i) * n + j];
    auto node = detail::make_node<Real>({n, m}, std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an, m, n](typename T::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    an->grad[static_cast<size_t>(i) * n + j] += self.grad[static_cast<size_t>(j) * m + i];
        };
    }
    return T::from_node(node);
}

// Row-wise L2 normalization; rank-1 input treated as one row.
template <typename Real>
TensorT<Real> l2_normalize_rows(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    detail::check_finite(a, "l2_normalize");
    const bool vec = a.rank() == 1;
    if (!vec && a.rank() != 2)
        throw std::invalid_argument("l2_normalize: need rank-1 or rank-2, got " + T::shape_str(a.shape()));
    const int m = vec ? 1 : a.dim(0);
    const int n = vec ? a.dim(0) : a.dim(1);
    std::vector<Real> out(a.data());
    std::vector<Real> inv_norm(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        double s = 0;
        for (int j = 0; j < n; ++j) {
            const double v = out[static_cast<size_t>(i) * n + j];
            s += v * v;
        }
        const double norm = std::sqrt(s);
        if (norm <= 1e-12) throw std::domain_error("l2_normalize: row norm below 1e-12");
        inv_norm[static_cast<size_t>(i)] = static_cast<Real>(1.0 / norm);
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i) * n + j] *= inv_norm[static_cast<size_t>(i)];
    }
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an, m, n, inv_norm](typename T::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < m; ++i) {
                Real dot = 0;
                for (int j = 0; j < n; ++j) {
                    const size_t idx = static_cast<size_t>(i) * n + j;
                    dot += self.grad[idx] * (*self.data)[idx];
                }
                for (int j = 0; j < n; ++j) {
                    const size_t idx = static_cast<size_t>(i) * n + j;
                    an->grad[idx] += (self.grad[idx] - (*self.data)[idx] * dot) * inv_norm[static_cast<size_t>(i)];
                }
            }
        };
    }
    return T::from_node(node);
}

// Log-softmax along axis 1.
template <typename Real>
TensorT<Real> log_softmax_rows(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    detail::check_finite(a, "log_softmax");
    if (a.rank() != 2) throw std::invalid_argument("log_softmax: need rank-2, got " + T::shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    std::vector<Real> out(a.data());
    for (int i = 0; i < m; ++i) {
        Real* row = out.data() + static_cast<size_t>(i) * n;
        Real mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double s = 0;
        for (int j = 0; j < n; ++j) s += std::exp(static_cast<double>(row[j] - mx));
        const Real lse = mx + static_cast<Real>(std::log(s));
        for (int j = 0; j < n; ++j) row[j] -= lse;
    }
    auto node = detail::make_node<Real>(a.shape(), std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an, m, n](typename T::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < m; ++i) {
                Real gsum = 0;
                for (int j = 0; j < n; ++j) gsum += self.grad[static_cast<size_t>(i) * n + j];
                for (int j = 0; j < n; ++j) {
                    const size_t idx = static_cast<size_t>(i) * n + j;
                    an->grad[idx] += self.grad[idx] - std::exp((*self.data)[idx]) * gsum;
                }
            }
        };
    }
    return T::from_node(node);
}

// Diagonal of a square matrix: (k,k) -> (k,1).
template <typename Real>
TensorT<Real> take_diag(const TensorT<Real>& a) {
    using T = TensorT<Real>;
    if (a.rank() != 2 || a.dim(0) != a.dim(1))
        throw std::invalid_argument("take_diag: need square matrix, got " + T::shape_str(a.shape()));
    const int k = a.dim(0);
    std::vector<Real> out(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<size_t>(i)] = a.data()[static_cast<size_t>(i) * k + i];
    auto node = detail::make_node<Real>({k, 1}, std::move(out), {a});
    if (node->requires_grad) {
        auto an = a.node();
        node->backward_fn = [an, k](typename T::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < k; ++i) an->grad[static_cast<size_t>(i) * k + i] += self.grad[static_cast<size_t>(i)];
        };
    }
    return T::from_node(node);
}

// Row gather from an embedding table; duplicate ids accumulate gradient.
template <typename Real>
TensorT<Real> gather_rows(const TensorT<Real>& table, const std::vector<int>& ids) {
    using T = TensorT<Real>;
    if (table.rank() != 2) throw std::invalid_argument("gather_rows: table must be rank-2");
    if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
    const int v = table.dim(0), d = table.dim(1);
    for (int id : ids)
        if (id < 0 || id >= v)
            throw std::invalid_argument("gather_rows: id " + std::to_string(id) + " out of range [0," + std::to_string(v) + ")");
    std::vector<Real> out(ids.size() * static_cast<size_t>(d));
    for (size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < d; ++j)
            out[i * d + j] = table.data()[static_cast<size_t>(ids[i]) * d + j];
    auto node = detail::make_node<Real>({static_cast<int>(ids.size()), d}, std::move(out), {table});
    if (node->requires_grad) {
        auto tn = table.node();
        node->backward_fn = [tn, ids, d](typename T::Node& self) {
            tn->ensure_grad();
            for (size_t i = 0; i < ids.size(); ++i)
                for (int j = 0; j < d; ++j)
                    tn->grad[static_cast<size_t>(ids[i]) * d + j] += self.grad[i * d + j];
        };
    }
    return T::from_node(node);
}

// Cosine similarity of two vectors (rank-1, same length) -> scalar.
template <typename Real>
TensorT<Real> cosine(const TensorT<Real>& a, const TensorT<Real>& b) {
    using T = TensorT<Real>;
    if (a.rank() != 1 || b.rank() != 1 || a.dim(0) != b.dim(0))
        throw std::invalid_argument("cosine: need equal-length vectors, got " + T::shape_str(a.shape()) + " and " +
                                    T::shape_str(b.shape()));
    detail::check_finite(a, "cosine");
    detail::check_finite(b, "cosine");
    const int n = a.dim(0);
    double dot = 0, na = 0, nb = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.data()[static_cast<size_t>(i)], y = b.data()[static_cast<size_t>(i)];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na <= 1e-12 || nb <= 1e-12) throw std::domain_error("cosine: input norm below 1e-12");
    const Real c = static_cast<Real>(dot / (na * nb));
    auto node = detail::make_node<Real>({1}, {c}, {a, b});
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backward_fn = [an, bn, n, na, nb, c](typename T::Node& self) {
            const Real g = self.grad[0];
            if (an->requires_grad) {
                an->ensure_grad();
                for (int i = 0; i < n; ++i)
                    an->grad[static_cast<size_t>(i)] +=
                        g * static_cast<Real>((*bn->data)[static_cast<size_t>(i)] / (na * nb) -
                                              c * (*an->data)[static_cast<size_t>(i)] / (na * na));
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int i = 0; i < n; ++i)
                    bn->grad[static_cast<size_t>(i)] +=
                        g * static_cast<Real>((*an->data)[static_cast<size_t>(i)] / (na * nb) -
                                              c * (*bn->data)[static_cast<size_t>(i)] / (nb * nb));
            }
        };
    }
    return T::from_node(node);
}

// FiLM-style scale-and-shift: s * a + t, all same shape.
template <typename Real>
TensorT<Real> scale_shift(const TensorT<Real>& a, const TensorT<Real>& s, const TensorT<Real>& t) {
    return add(mul(a, s), t);
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively into
// every reachable node that requires them; leaf buffers are not cleared here
// (the optimizer owns zeroing between steps).
template <typename Real>
void backward(const TensorT<Real>& loss) {
    using Node = typename TensorT<Real>::Node;
    if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " + TensorT<Real>::shape_str(loss.shape()));

    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    // Iterative DFS; graphs can be thousands of nodes deep.
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    auto* root = loss.node().get();
    root->ensure_grad();
    root->grad[0] += Real(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

using Tensor = TensorT<float>;

}  // namespace grif::tc
