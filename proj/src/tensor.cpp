#include "fusevid/tensor.hpp"

#include <cmath>
#include <cstring>
#include <unordered_set>

#include "fusevid/kernels.hpp"

namespace fusevid {

using detail::TensorNode;
using detail::with_dtype;

const char* dtype_name(DType dt) { return dt == DType::f32 ? "f32" : "f64"; }

DType dtype_from_name(const std::string& name) {
    if (name == "f32") return DType::f32;
    if (name == "f64") return DType::f64;
    throw DtypeError("unknown dtype name: " + name);
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

namespace {

std::shared_ptr<TensorNode> make_node(std::vector<std::size_t> shape, DType dt) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->dtype = dt;
    if (dt == DType::f32) n->data32.assign(n->numel(), 0.0f);
    else n->data64.assign(n->numel(), 0.0);
    return n;
}

// Marks out as gradient-carrying and records its backward function when any
// parent wants gradients. Otherwise the graph edge is dropped entirely.
void attach(const std::shared_ptr<TensorNode>& out,
            std::vector<std::shared_ptr<TensorNode>> parents,
            std::function<void(TensorNode&)> fn) {
    bool need = false;
    for (const auto& p : parents) need = need || p->requires_grad;
    if (!need) return;
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward_fn = std::move(fn);
}

template <class T>
T* grad_buf(TensorNode& n) {
    if (!n.has_grad()) n.ensure_grad();
    return n.grad<T>();
}

template <class T>
void acc_mul(T* dst, const T* x, const T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += x[i] * y[i];
}

template <class T>
void acc_scalar(T* dst, T v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += v;
}

void check_dtype(const char* op, const Tensor& a, const Tensor& b) {
    if (a.dtype() != b.dtype()) {
        throw DtypeError(std::string(op) + ": mixed dtypes " + dtype_name(a.dtype()) + " vs " +
                         dtype_name(b.dtype()));
    }
}

void check_same(const char* op, const Tensor& a, const Tensor& b) {
    check_dtype(op, a, b);
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
    }
}

std::size_t last_extent(const Tensor& a, const char* op) {
    if (a.rank() == 0) throw ShapeError(std::string(op) + ": rank-0 tensor has no last axis");
    return a.shape().back();
}

}  // namespace

// --- Tensor basics -----------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape, DType dt, bool requires_grad) {
    auto n = make_node(std::move(shape), dt);
    n->requires_grad = requires_grad;
    return wrap(std::move(n));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, DType dt) {
    auto n = make_node(std::move(shape), dt);
    with_dtype(dt, [&](auto tag) {
        using T = typename decltype(tag)::type;
        T* d = n->data<T>();
        const T v = static_cast<T>(value);
        for (std::size_t i = 0; i < n->numel(); ++i) d[i] = v;
    });
    return wrap(std::move(n));
}

Tensor Tensor::scalar(double value, DType dt) { return full({}, value, dt); }

Tensor Tensor::from_values(std::vector<std::size_t> shape, std::span<const double> values,
                           DType dt) {
    auto n = make_node(std::move(shape), dt);
    if (values.size() != n->numel()) {
        throw ShapeError("from_values: " + std::to_string(values.size()) + " values for shape " +
                         shape_to_string(n->shape));
    }
    with_dtype(dt, [&](auto tag) {
        using T = typename decltype(tag)::type;
        T* d = n->data<T>();
        for (std::size_t i = 0; i < values.size(); ++i) d[i] = static_cast<T>(values[i]);
    });
    return wrap(std::move(n));
}

Tensor Tensor::randn(std::vector<std::size_t> shape, Rng& rng, double stddev, DType dt) {
    auto n = make_node(std::move(shape), dt);
    with_dtype(dt, [&](auto tag) {
        using T = typename decltype(tag)::type;
        T* d = n->data<T>();
        for (std::size_t i = 0; i < n->numel(); ++i) d[i] = static_cast<T>(rng.normal() * stddev);
    });
    return wrap(std::move(n));
}

void Tensor::set_requires_grad(bool v) {
    if (node().backward_fn) throw ParamError("set_requires_grad: leaf tensors only");
    node().requires_grad = v;
}

double Tensor::value_at(std::size_t flat) const {
    if (flat >= numel()) throw ParamError("value_at: index out of range");
    return with_dtype(dtype(), [&](auto tag) -> double {
        using T = typename decltype(tag)::type;
        return static_cast<double>(node().data<T>()[flat]);
    });
}

void Tensor::set_value_at(std::size_t flat, double v) {
    if (flat >= numel()) throw ParamError("set_value_at: index out of range");
    with_dtype(dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        node().data<T>()[flat] = static_cast<T>(v);
    });
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor has " + std::to_string(numel()) + " elements");
    return value_at(0);
}

double Tensor::grad_at(std::size_t flat) const {
    if (flat >= numel()) throw ParamError("grad_at: index out of range");
    if (!has_grad()) throw ParamError("grad_at: no gradient stored");
    return with_dtype(dtype(), [&](auto tag) -> double {
        using T = typename decltype(tag)::type;
        return static_cast<double>(node().grad<T>()[flat]);
    });
}

void Tensor::zero_grad() {
    node().grad32.clear();
    node().grad64.clear();
}

Tensor Tensor::clone() const {
    auto n = make_node(shape(), dtype());
    n->data32 = node().data32;
    n->data64 = node().data64;
    return wrap(std::move(n));
}

void Tensor::backward() {
    TensorNode& self = node();
    if (self.numel() != 1) {
        throw ShapeError("backward: requires a scalar, got shape " + shape_to_string(self.shape));
    }
    if (!self.requires_grad) throw ParamError("backward: tensor does not require gradients");

    // Postorder DFS over gradient-carrying ancestors: inputs land before users.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    struct Frame {
        TensorNode* n;
        std::size_t next;
    };
    std::vector<Frame> stack{{&self, 0}};
    seen.insert(&self);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            TensorNode* p = f.n->parents[f.next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }

    // Interior grads are per-pass scratch; leaf grads persist so repeated
    // backward calls accumulate (two passes double a leaf's gradient).
    for (TensorNode* n : order) {
        if (n->backward_fn) {
            n->grad32.clear();
            n->grad64.clear();
        }
    }

    with_dtype(self.dtype, [&](auto tag) {
        using T = typename decltype(tag)::type;
        grad_buf<T>(self)[0] += static_cast<T>(1);
    });

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    check_same("add", a, b);
    auto out = make_node(a.shape(), a.dtype());
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        kernels::ew_add(an->data<T>(), bn->data<T>(), out->data<T>(), out->numel());
        attach(out, {an, bn}, [an, bn](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy) return;
            if (an->requires_grad) kernels::serial::axpy(dy, T(1), grad_buf<T>(*an), self.numel());
            if (bn->requires_grad) kernels::serial::axpy(dy, T(1), grad_buf<T>(*bn), self.numel());
        });
    });
    return Tensor::wrap(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same("sub", a, b);
    auto out = make_node(a.shape(), a.dtype());
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        kernels::ew_sub(an->data<T>(), bn->data<T>(), out->data<T>(), out->numel());
        attach(out, {an, bn}, [an, bn](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy) return;
            if (an->requires_grad) kernels::serial::axpy(dy, T(1), grad_buf<T>(*an), self.numel());
            if (bn->requires_grad) kernels::serial::axpy(dy, T(-1), grad_buf<T>(*bn), self.numel());
        });
    });
    return Tensor::wrap(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same("mul", a, b);
    auto out = make_node(a.shape(), a.dtype());
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        kernels::ew_mul(an->data<T>(), bn->data<T>(), out->data<T>(), out->numel());
        attach(out, {an, bn}, [an, bn](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy) return;
            if (an->requires_grad) acc_mul(grad_buf<T>(*an), dy, bn->data<T>(), self.numel());
            if (bn->requires_grad) acc_mul(grad_buf<T>(*bn), dy, an->data<T>(), self.numel());
        });
    });
    return Tensor::wrap(out);
}

Tensor scalar_mul(const Tensor& a, double s) {
    auto out = make_node(a.shape(), a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        kernels::ew_affine(an->data<T>(), static_cast<T>(s), T(0), out->data<T>(), out->numel());
        attach(out, {an}, [an, s](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy) return;
            if (an->requires_grad)
                kernels::serial::axpy(dy, static_cast<T>(s), grad_buf<T>(*an), self.numel());
        });
    });
    return Tensor::wrap(out);
}

Tensor add_scalar(const Tensor& a, double s) {
    auto out = make_node(a.shape(), a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        kernels::ew_affine(an->data<T>(), T(1), static_cast<T>(s), out->data<T>(), out->numel());
        attach(out, {an}, [an](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy) return;
            if (an->requires_grad) kernels::serial::axpy(dy, T(1), grad_buf<T>(*an), self.numel());
        });
    });
    return Tensor::wrap(out);
}

// --- matmul / transpose ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_dtype("matmul", a, b);
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    auto out = make_node({m, n}, a.dtype());
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        kernels::gemm_nn(an->data<T>(), bn->data<T>(), out->data<T>(), m, k, n);
        attach(out, {an, bn}, [an, bn, m, k, n](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy) return;
            if (an->requires_grad) {
                std::vector<T> scratch(m * k);
                kernels::gemm_nt(dy, bn->data<T>(), scratch.data(), m, n, k);
                kernels::serial::axpy(scratch.data(), T(1), grad_buf<T>(*an), m * k);
            }
            if (bn->requires_grad) {
                std::vector<T> scratch(k * n);
                kernels::gemm_tn(an->data<T>(), dy, scratch.data(), k, m, n);
                kernels::serial::axpy(scratch.data(), T(1), grad_buf<T>(*bn), k * n);
            }
        });
    });
    return Tensor::wrap(out);
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expects rank 2, got " + shape_to_string(a.shape()));
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    auto out = make_node({n, m}, a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* x = an->data<T>();
        T* y = out->data<T>();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) y[j * m + i] = x[i * n + j];
        attach(out, {an}, [an, m, n](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            T* dx = grad_buf<T>(*an);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += dy[j * m + i];
        });
    });
    return Tensor::wrap(out);
}

// --- shape ops ----------------------------------------------------------------

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    if (n != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
    }
    auto out = make_node(std::move(shape), a.dtype());
    auto an = a.node_ptr();
    out->data32 = an->data32;
    out->data64 = an->data64;
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        attach(out, {an}, [an](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy) return;
            if (an->requires_grad) kernels::serial::axpy(dy, T(1), grad_buf<T>(*an), self.numel());
        });
    });
    return Tensor::wrap(out);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const auto& first = parts.front();
    if (axis >= first.rank()) throw ShapeError("concat: axis out of range");
    std::vector<std::size_t> shape = first.shape();
    std::size_t total = 0;
    for (const auto& p : parts) {
        check_dtype("concat", first, p);
        if (p.rank() != first.rank()) throw ShapeError("concat: rank mismatch");
        for (std::size_t d = 0; d < shape.size(); ++d) {
            if (d != axis && p.shape()[d] != shape[d]) {
                throw ShapeError("concat: extent mismatch at axis " + std::to_string(d) + ": " +
                                 shape_to_string(first.shape()) + " vs " + shape_to_string(p.shape()));
            }
        }
        total += p.shape()[axis];
    }
    shape[axis] = total;

    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];

    auto out = make_node(shape, first.dtype());
    std::vector<std::shared_ptr<TensorNode>> pnodes;
    pnodes.reserve(parts.size());
    for (const auto& p : parts) pnodes.push_back(p.node_ptr());

    std::vector<std::size_t> extents;
    for (const auto& p : parts) extents.push_back(p.shape()[axis]);

    with_dtype(first.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        T* y = out->data<T>();
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < pnodes.size(); ++pi) {
            const T* x = pnodes[pi]->data<T>();
            const std::size_t chunk = extents[pi] * inner;
            for (std::size_t o = 0; o < outer; ++o) {
                std::memcpy(y + o * total * inner + off * inner, x + o * chunk, chunk * sizeof(T));
            }
            off += extents[pi];
        }
        attach(out, pnodes, [pnodes, extents, outer, inner, total](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy) return;
            std::size_t off = 0;
            for (std::size_t pi = 0; pi < pnodes.size(); ++pi) {
                const std::size_t chunk = extents[pi] * inner;
                if (pnodes[pi]->requires_grad) {
                    T* dx = grad_buf<T>(*pnodes[pi]);
                    for (std::size_t o = 0; o < outer; ++o) {
                        kernels::serial::axpy(dy + o * total * inner + off * inner, T(1),
                                              dx + o * chunk, chunk);
                    }
                }
                off += extents[pi];
            }
        });
    });
    return Tensor::wrap(out);
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
    if (a.rank() == 0) throw ShapeError("slice_rows: rank-0 tensor");
    const std::size_t rows = a.shape()[0];
    if (start + count > rows) {
        throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") exceeds " + std::to_string(rows) +
                         " rows");
    }
    std::vector<std::size_t> shape = a.shape();
    shape[0] = count;
    const std::size_t row_size = a.numel() / (rows == 0 ? 1 : rows);
    auto out = make_node(std::move(shape), a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        std::memcpy(out->data<T>(), an->data<T>() + start * row_size,
                    count * row_size * sizeof(T));
        attach(out, {an}, [an, start, row_size](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            kernels::serial::axpy(dy, T(1), grad_buf<T>(*an) + start * row_size, self.numel());
        });
    });
    return Tensor::wrap(out);
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
    if (a.rank() != 2) throw ShapeError("slice_cols: expects rank 2, got " + shape_to_string(a.shape()));
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    if (start + count > n) {
        throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") exceeds " + std::to_string(n) +
                         " cols");
    }
    auto out = make_node({m, count}, a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* x = an->data<T>();
        T* y = out->data<T>();
        for (std::size_t i = 0; i < m; ++i)
            std::memcpy(y + i * count, x + i * n + start, count * sizeof(T));
        attach(out, {an}, [an, start, m, n, count](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            T* dx = grad_buf<T>(*an);
            for (std::size_t i = 0; i < m; ++i)
                kernels::serial::axpy(dy + i * count, T(1), dx + i * n + start, count);
        });
    });
    return Tensor::wrap(out);
}

// --- reductions ---------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
    auto out = make_node({}, a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        out->data<T>()[0] = kernels::serial::sum(an->data<T>(), an->numel());
        attach(out, {an}, [an](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            acc_scalar(grad_buf<T>(*an), dy[0], an->numel());
        });
    });
    return Tensor::wrap(out);
}

Tensor mean_all(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean_all: empty tensor");
    const std::size_t n = a.numel();
    auto out = make_node({}, a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        out->data<T>()[0] = kernels::serial::sum(an->data<T>(), n) / static_cast<T>(n);
        attach(out, {an}, [an, n](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            acc_scalar(grad_buf<T>(*an), static_cast<T>(dy[0] / static_cast<T>(n)), n);
        });
    });
    return Tensor::wrap(out);
}

Tensor var_all(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("var_all: empty tensor");
    const std::size_t n = a.numel();
    auto out = make_node({}, a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* x = an->data<T>();
        const T mean = kernels::serial::sum(x, n) / static_cast<T>(n);
        T v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const T d = x[i] - mean;
            v += d * d;
        }
        out->data<T>()[0] = v / static_cast<T>(n);
        attach(out, {an}, [an, n](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            const T* x = an->data<T>();
            const T mean = kernels::serial::sum(x, n) / static_cast<T>(n);
            const T c = static_cast<T>(2) * dy[0] / static_cast<T>(n);
            T* dx = grad_buf<T>(*an);
            for (std::size_t i = 0; i < n; ++i) dx[i] += c * (x[i] - mean);
        });
    });
    return Tensor::wrap(out);
}

// --- row-structured ops ---------------------------------------------------------

Tensor layer_norm(const Tensor& a, double eps) {
    const std::size_t cols = last_extent(a, "layer_norm");
    if (cols == 0) throw ShapeError("layer_norm: empty last axis");
    const std::size_t rows = a.numel() / cols;
    auto out = make_node(a.shape(), a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        std::vector<T> mean(rows), rstd(rows);
        kernels::layer_norm_fwd(an->data<T>(), out->data<T>(), mean.data(), rstd.data(), rows,
                                cols, static_cast<T>(eps));
        attach(out, {an}, [an, rstd = std::move(rstd), rows, cols](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            kernels::layer_norm_bwd(self.data<T>(), dy, rstd.data(), grad_buf<T>(*an), rows, cols);
        });
    });
    return Tensor::wrap(out);
}

Tensor softmax_rows(const Tensor& a) {
    const std::size_t cols = last_extent(a, "softmax_rows");
    if (cols == 0) throw ShapeError("softmax_rows: empty last axis");
    const std::size_t rows = a.numel() / cols;
    auto out = make_node(a.shape(), a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        kernels::softmax_fwd(an->data<T>(), out->data<T>(), rows, cols);
        attach(out, {an}, [an, rows, cols](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            kernels::softmax_bwd(self.data<T>(), dy, grad_buf<T>(*an), rows, cols);
        });
    });
    return Tensor::wrap(out);
}

Tensor gelu(const Tensor& a) {
    auto out = make_node(a.shape(), a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        kernels::gelu_fwd(an->data<T>(), out->data<T>(), out->numel());
        attach(out, {an}, [an](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            kernels::gelu_bwd(an->data<T>(), dy, grad_buf<T>(*an), self.numel());
        });
    });
    return Tensor::wrap(out);
}

Tensor broadcast_rows(const Tensor& v, std::size_t rows) {
    if (v.rank() != 1) throw ShapeError("broadcast_rows: expects rank 1, got " + shape_to_string(v.shape()));
    const std::size_t d = v.shape()[0];
    auto out = make_node({rows, d}, v.dtype());
    auto vn = v.node_ptr();
    with_dtype(v.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* x = vn->data<T>();
        T* y = out->data<T>();
        for (std::size_t r = 0; r < rows; ++r) std::memcpy(y + r * d, x, d * sizeof(T));
        attach(out, {vn}, [vn, rows, d](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !vn->requires_grad) return;
            T* dv = grad_buf<T>(*vn);
            for (std::size_t r = 0; r < rows; ++r) kernels::serial::axpy(dy + r * d, T(1), dv, d);
        });
    });
    return Tensor::wrap(out);
}

Tensor mean_over_rows(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("mean_over_rows: expects rank 2, got " + shape_to_string(a.shape()));
    const std::size_t m = a.shape()[0], d = a.shape()[1];
    if (m == 0) throw ShapeError("mean_over_rows: no rows");
    auto out = make_node({d}, a.dtype());
    auto an = a.node_ptr();
    with_dtype(a.dtype(), [&](auto tag) {
        using T = typename decltype(tag)::type;
        const T* x = an->data<T>();
        T* y = out->data<T>();
        for (std::size_t r = 0; r < m; ++r) kernels::serial::axpy(x + r * d, T(1), y, d);
        const T inv = T(1) / static_cast<T>(m);
        for (std::size_t j = 0; j < d; ++j) y[j] *= inv;
        attach(out, {an}, [an, m, d](TensorNode& self) {
            const T* dy = self.grad<T>();
            if (!dy || !an->requires_grad) return;
            T* dx = grad_buf<T>(*an);
            const T inv = T(1) / static_cast<T>(m);
            for (std::size_t r = 0; r < m; ++r) kernels::serial::axpy(dy, inv, dx + r * d, d);
        });
    });
    return Tensor::wrap(out);
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || a.shape()[1] != v.shape()[0]) {
        throw ShapeError("add_rowvec: incompatible shapes " + shape_to_string(a.shape()) + " + " +
                         shape_to_string(v.shape()));
    }
    return add(a, broadcast_rows(v, a.shape()[0]));
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || a.shape()[1] != v.shape()[0]) {
        throw ShapeError("mul_rowvec: incompatible shapes " + shape_to_string(a.shape()) + " * " +
                         shape_to_string(v.shape()));
    }
    return mul(a, broadcast_rows(v, a.shape()[0]));
}

}  // namespace fusevid
