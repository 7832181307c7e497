#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace vitxray {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ')';
    return os.str();
}

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // lazily sized; empty until first backward touch
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;  // pushes this->grad into parents

    void accumulate_grad(const std::vector<double>& g) {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    }
    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

// Dense row-major tensor of 64-bit floats. Values are immutable after
// construction except through optimizer updates; grad buffers accumulate
// across backward calls until zero_grad().
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match data length " +
                                        std::to_string(data.size()));
        auto impl = std::make_shared<TensorImpl>();
        impl->shape = std::move(shape);
        impl->data = std::move(data);
        impl->requires_grad = requires_grad;
        return Tensor(impl);
    }
    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<double> d(shape_numel(shape), 0.0);
        return from_data(std::move(shape), std::move(d), requires_grad);
    }
    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        std::vector<double> d(shape_numel(shape), value);
        return from_data(std::move(shape), std::move(d), requires_grad);
    }
    static Tensor scalar(double value, bool requires_grad = false) {
        return from_data({1}, {value}, requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->data.size(); }
    const std::vector<double>& data() const { return impl_->data; }
    std::vector<double>& mutable_data() { return impl_->data; }
    bool requires_grad() const { return impl_->requires_grad; }
    const std::vector<double>& grad() const {
        if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
        return impl_->grad;
    }
    void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }
    double item() const {
        if (numel() != 1) throw std::invalid_argument("item(): tensor has " + std::to_string(numel()) + " elements");
        return impl_->data[0];
    }
    std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

namespace detail {

inline Tensor make_result(Shape shape, std::vector<double> data,
                          std::vector<Tensor> inputs,
                          std::function<void(TensorImpl&)> backward_fn) {
    bool track = false;
    for (const auto& t : inputs)
        if (t.impl()->requires_grad || t.impl()->backward_fn) track = true;
    Tensor out = Tensor::from_data(std::move(shape), std::move(data), track);
    if (track) {
        for (const auto& t : inputs) out.impl()->parents.push_back(t.impl());
        out.impl()->backward_fn = std::move(backward_fn);
    }
    return out;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto ai = a.impl(), bi = b.impl();
    return detail::make_result(a.shape(), std::move(out), {a, b}, [ai, bi](TensorImpl& self) {
        ai->accumulate_grad(self.grad);
        bi->accumulate_grad(self.grad);
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto ai = a.impl(), bi = b.impl();
    return detail::make_result(a.shape(), std::move(out), {a, b}, [ai, bi](TensorImpl& self) {
        std::vector<double> ga(self.grad.size()), gb(self.grad.size());
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ga[i] = self.grad[i] * bi->data[i];
            gb[i] = self.grad[i] * ai->data[i];
        }
        ai->accumulate_grad(ga);
        bi->accumulate_grad(gb);
    });
}

// a*x + b elementwise
inline Tensor affine(const Tensor& x, double a, double b) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x.data()[i] + b;
    auto xi = x.impl();
    return detail::make_result(x.shape(), std::move(out), {x}, [xi, a](TensorImpl& self) {
        std::vector<double> g(self.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = a * self.grad[i];
        xi->accumulate_grad(g);
    });
}

inline Tensor scale(const Tensor& x, double a) { return affine(x, a, 0.0); }

inline Tensor log_op(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(x.data()[i]);
    auto xi = x.impl();
    return detail::make_result(x.shape(), std::move(out), {x}, [xi](TensorImpl& self) {
        std::vector<double> g(self.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] / xi->data[i];
        xi->accumulate_grad(g);
    });
}

// Gradient is passed through strictly inside (lo, hi) and zeroed at the rails.
inline Tensor clamp(const Tensor& x, double lo, double hi) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, x.data()[i]));
    auto xi = x.impl();
    return detail::make_result(x.shape(), std::move(out), {x}, [xi, lo, hi](TensorImpl& self) {
        std::vector<double> g(self.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = (xi->data[i] > lo && xi->data[i] < hi) ? self.grad[i] : 0.0;
        xi->accumulate_grad(g);
    });
}

inline Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = x.data()[i];
        out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    auto xi = x.impl();
    std::vector<double> saved = out;
    return detail::make_result(x.shape(), std::move(out), {x}, [xi, saved](TensorImpl& self) {
        std::vector<double> g(self.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * saved[i] * (1.0 - saved[i]);
        xi->accumulate_grad(g);
    });
}

// x * Phi(x) with the exact Gaussian CDF (erf form).
inline Tensor gelu(const Tensor& x) {
    static constexpr double kInvSqrt2 = 0.70710678118654752440;
    static constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = x.data()[i];
        out[i] = v * 0.5 * std::erfc(-v * kInvSqrt2);
    }
    auto xi = x.impl();
    return detail::make_result(x.shape(), std::move(out), {x}, [xi](TensorImpl& self) {
        std::vector<double> g(self.grad.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            double v = xi->data[i];
            double cdf = 0.5 * std::erfc(-v * kInvSqrt2);
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            g[i] = self.grad[i] * (cdf + v * pdf);
        }
        xi->accumulate_grad(g);
    });
}

// ---- reductions ------------------------------------------------------------

inline Tensor sum(const Tensor& x) {
    double s = std::accumulate(x.data().begin(), x.data().end(), 0.0);
    auto xi = x.impl();
    return detail::make_result({1}, {s}, {x}, [xi](TensorImpl& self) {
        std::vector<double> g(xi->data.size(), self.grad[0]);
        xi->accumulate_grad(g);
    });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

// ---- matmul ----------------------------------------------------------------
// Supported: (M,K)x(K,N), (B,M,K)x(B,K,N), and (B,M,K)x(K,N) with the rank-2
// right operand shared across the batch.

namespace detail {

inline void mm(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        std::fill(crow, crow + n, 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[i * k + p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c += a^T * b  (a: m x k, b: m x n, c: k x n)
inline void mm_at_b_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[i * k + p];
            for (std::size_t j = 0; j < n; ++j) c[p * n + j] += av * b[i * n + j];
        }
}

// c += a * b^T  (a: m x n, b: k x n, c: m x k)
inline void mm_a_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * b[p * n + j];
            c[i * k + p] += s;
        }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    auto bad = [&] {
        return std::invalid_argument("matmul: incompatible shapes " + shape_str(as) + " and " + shape_str(bs));
    };
    if (as.size() < 2 || as.size() > 3 || bs.size() < 2 || bs.size() > 3 || bs.size() > as.size()) throw bad();

    std::size_t batch = as.size() == 3 ? as[0] : 1;
    std::size_t m = as[as.size() - 2], k = as[as.size() - 1];
    std::size_t k2 = bs[bs.size() - 2], n = bs[bs.size() - 1];
    bool b_batched = bs.size() == 3;
    if (k != k2) throw bad();
    if (b_batched && bs[0] != batch) throw bad();

    Shape out_shape = as.size() == 3 ? Shape{batch, m, n} : Shape{m, n};
    std::vector<double> out(batch * m * n);
    for (std::size_t bi = 0; bi < batch; ++bi)
        detail::mm(a.data().data() + bi * m * k, b.data().data() + (b_batched ? bi * k * n : 0),
                   out.data() + bi * m * n, m, k, n);

    auto ai = a.impl(), bimpl = b.impl();
    return detail::make_result(std::move(out_shape), std::move(out), {a, b},
                               [ai, bimpl, batch, m, k, n, b_batched](TensorImpl& self) {
        std::vector<double> ga(ai->data.size(), 0.0), gb(bimpl->data.size(), 0.0);
        for (std::size_t bi = 0; bi < batch; ++bi) {
            const double* g = self.grad.data() + bi * m * n;
            const double* bv = bimpl->data.data() + (b_batched ? bi * k * n : 0);
            const double* av = ai->data.data() + bi * m * k;
            detail::mm_a_bt_acc(g, bv, ga.data() + bi * m * k, m, n, k);  // dA = G * B^T
            detail::mm_at_b_acc(av, g, gb.data() + (b_batched ? bi * k * n : 0), m, k, n);  // dB = A^T * G
        }
        ai->accumulate_grad(ga);
        bimpl->accumulate_grad(gb);
    });
}

// ---- shape ops -------------------------------------------------------------

inline Tensor transpose_last2(const Tensor& x) {
    const Shape& s = x.shape();
    if (s.size() < 2) throw std::invalid_argument("transpose_last2: rank must be >= 2, got " + shape_str(s));
    std::size_t batch = 1;
    for (std::size_t i = 0; i + 2 < s.size(); ++i) batch *= s[i];
    std::size_t r = s[s.size() - 2], c = s[s.size() - 1];
    Shape out_shape = s;
    std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
    std::vector<double> out(x.numel());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out[b * r * c + j * r + i] = x.data()[b * r * c + i * c + j];
    auto xi = x.impl();
    return detail::make_result(std::move(out_shape), std::move(out), {x}, [xi, batch, r, c](TensorImpl& self) {
        std::vector<double> g(xi->data.size());
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[b * r * c + i * c + j] = self.grad[b * r * c + j * r + i];
        xi->accumulate_grad(g);
    });
}

inline Tensor slice_lastdim(const Tensor& x, std::size_t start, std::size_t len) {
    const Shape& s = x.shape();
    std::size_t last = s.back();
    if (start + len > last)
        throw std::invalid_argument("slice_lastdim: [" + std::to_string(start) + "," + std::to_string(start + len) +
                                    ") out of range for " + shape_str(s));
    std::size_t rows = x.numel() / last;
    Shape out_shape = s;
    out_shape.back() = len;
    std::vector<double> out(rows * len);
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(x.data().begin() + r * last + start, len, out.begin() + r * len);
    auto xi = x.impl();
    return detail::make_result(std::move(out_shape), std::move(out), {x},
                               [xi, rows, last, start, len](TensorImpl& self) {
        auto& g = xi->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < len; ++j) g[r * last + start + j] += self.grad[r * len + j];
    });
}

inline Tensor concat_lastdim(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_lastdim: no inputs");
    Shape base = parts[0].shape();
    std::size_t total_last = 0;
    for (const auto& p : parts) {
        Shape s = p.shape();
        s.back() = 0;
        Shape b = base;
        b.back() = 0;
        if (s != b) throw std::invalid_argument("concat_lastdim: leading-shape mismatch " + shape_str(p.shape()) +
                                                " vs " + shape_str(base));
        total_last += p.shape().back();
    }
    std::size_t rows = parts[0].numel() / base.back();
    Shape out_shape = base;
    out_shape.back() = total_last;
    std::vector<double> out(rows * total_last);
    std::vector<std::size_t> widths, offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        widths.push_back(p.shape().back());
        offsets.push_back(off);
        off += p.shape().back();
    }
    for (std::size_t pi = 0; pi < parts.size(); ++pi)
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(parts[pi].data().begin() + r * widths[pi], widths[pi],
                        out.begin() + r * total_last + offsets[pi]);
    std::vector<std::shared_ptr<TensorImpl>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    return detail::make_result(std::move(out_shape), std::move(out), parts,
                               [impls, widths, offsets, rows, total_last](TensorImpl& self) {
        for (std::size_t pi = 0; pi < impls.size(); ++pi) {
            std::vector<double> g(rows * widths[pi]);
            for (std::size_t r = 0; r < rows; ++r)
                std::copy_n(self.grad.begin() + r * total_last + offsets[pi], widths[pi], g.begin() + r * widths[pi]);
            impls[pi]->accumulate_grad(g);
        }
    });
}

// (B,S,H) -> (B,H), picking one sequence position.
inline Tensor select_seq(const Tensor& x, std::size_t index) {
    const Shape& s = x.shape();
    if (s.size() != 3) throw std::invalid_argument("select_seq: expected rank-3, got " + shape_str(s));
    std::size_t B = s[0], S = s[1], H = s[2];
    if (index >= S) throw std::invalid_argument("select_seq: index " + std::to_string(index) + " out of range");
    std::vector<double> out(B * H);
    for (std::size_t b = 0; b < B; ++b)
        std::copy_n(x.data().begin() + (b * S + index) * H, H, out.begin() + b * H);
    auto xi = x.impl();
    return detail::make_result({B, H}, std::move(out), {x}, [xi, B, S, H, index](TensorImpl& self) {
        auto& g = xi->grad_buffer();
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < H; ++j) g[(b * S + index) * H + j] += self.grad[b * H + j];
    });
}

// Broadcast-add a rank-1 bias over the last dimension.
inline Tensor add_bias(const Tensor& x, const Tensor& bias) {
    std::size_t last = x.shape().back();
    if (bias.rank() != 1 || bias.shape()[0] != last)
        throw std::invalid_argument("add_bias: bias " + shape_str(bias.shape()) + " does not match last extent of " +
                                    shape_str(x.shape()));
    std::size_t rows = x.numel() / last;
    std::vector<double> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < last; ++j) out[r * last + j] = x.data()[r * last + j] + bias.data()[j];
    auto xi = x.impl(), bi = bias.impl();
    return detail::make_result(x.shape(), std::move(out), {x, bias}, [xi, bi, rows, last](TensorImpl& self) {
        xi->accumulate_grad(self.grad);
        std::vector<double> gb(last, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < last; ++j) gb[j] += self.grad[r * last + j];
        bi->accumulate_grad(gb);
    });
}

// ---- softmax / layernorm ---------------------------------------------------

inline Tensor softmax_lastdim(const Tensor& x) {
    std::size_t last = x.shape().back();
    if (last < 1) throw std::invalid_argument("softmax_lastdim: empty last dimension");
    std::size_t rows = x.numel() / last;
    std::vector<double> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.data().data() + r * last;
        double mx = *std::max_element(in, in + last);
        double denom = 0.0;
        for (std::size_t j = 0; j < last; ++j) {
            out[r * last + j] = std::exp(in[j] - mx);
            denom += out[r * last + j];
        }
        for (std::size_t j = 0; j < last; ++j) out[r * last + j] /= denom;
    }
    auto xi = x.impl();
    std::vector<double> saved = out;
    return detail::make_result(x.shape(), std::move(saved), {x}, [xi, out, rows, last](TensorImpl& self) {
        std::vector<double> g(xi->data.size());
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < last; ++j) dot += self.grad[r * last + j] * out[r * last + j];
            for (std::size_t j = 0; j < last; ++j)
                g[r * last + j] = out[r * last + j] * (self.grad[r * last + j] - dot);
        }
        xi->accumulate_grad(g);
    });
}

inline Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6) {
    std::size_t last = x.shape().back();
    if (gamma.rank() != 1 || gamma.shape()[0] != last || beta.rank() != 1 || beta.shape()[0] != last)
        throw std::invalid_argument("layernorm: gamma " + shape_str(gamma.shape()) + " / beta " +
                                    shape_str(beta.shape()) + " do not match last extent of " + shape_str(x.shape()));
    if (eps <= 0.0) throw std::invalid_argument("layernorm: eps must be positive");
    std::size_t rows = x.numel() / last;
    std::vector<double> out(x.numel()), xhat(x.numel()), inv_sigma(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.data().data() + r * last;
        double mu = std::accumulate(in, in + last, 0.0) / last;
        double var = 0.0;
        for (std::size_t j = 0; j < last; ++j) var += (in[j] - mu) * (in[j] - mu);
        var /= last;
        inv_sigma[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < last; ++j) {
            xhat[r * last + j] = (in[j] - mu) * inv_sigma[r];
            out[r * last + j] = xhat[r * last + j] * gamma.data()[j] + beta.data()[j];
        }
    }
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl();
    return detail::make_result(x.shape(), std::move(out), {x, gamma, beta},
                               [xi, gi, bi, xhat, inv_sigma, rows, last](TensorImpl& self) {
        std::vector<double> gx(xi->data.size()), gg(last, 0.0), gb(last, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            double mean_h = 0.0, mean_hx = 0.0;
            for (std::size_t j = 0; j < last; ++j) {
                double h = self.grad[r * last + j] * gi->data[j];
                mean_h += h;
                mean_hx += h * xhat[r * last + j];
                gg[j] += self.grad[r * last + j] * xhat[r * last + j];
                gb[j] += self.grad[r * last + j];
            }
            mean_h /= last;
            mean_hx /= last;
            for (std::size_t j = 0; j < last; ++j) {
                double h = self.grad[r * last + j] * gi->data[j];
                gx[r * last + j] = (h - mean_h - xhat[r * last + j] * mean_hx) * inv_sigma[r];
            }
        }
        xi->accumulate_grad(gx);
        gi->accumulate_grad(gg);
        bi->accumulate_grad(gb);
    });
}

// ---- backward --------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Gradients accumulate into the grad
// buffers of every requires_grad ancestor; callers zero them between steps.
inline void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> seen;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    stack.emplace_back(loss.impl().get(), 0);
    seen.insert(loss.impl().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorImpl* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // order is post-order: parents before children; walk it reversed
    loss.impl()->accumulate_grad({1.0});
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
}

}  // namespace vitxray
