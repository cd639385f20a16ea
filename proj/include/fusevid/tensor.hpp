#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "fusevid/errors.hpp"
#include "fusevid/rng.hpp"

namespace fusevid {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline std::size_t dtype_size(DType dt) { return dt == DType::f32 ? 4 : 8; }
const char* dtype_name(DType dt);
DType dtype_from_name(const std::string& name);

namespace detail {

struct TensorNode {
    std::vector<std::size_t> shape;
    DType dtype = DType::f32;
    std::vector<float> data32;
    std::vector<double> data64;
    std::vector<float> grad32;
    std::vector<double> grad64;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::size_t numel() const {
        std::size_t n = 1;
        for (auto e : shape) n *= e;
        return n;
    }

    template <class T>
    T* data() {
        if constexpr (std::is_same_v<T, float>) return data32.data();
        else return data64.data();
    }
    template <class T>
    const T* data() const {
        if constexpr (std::is_same_v<T, float>) return data32.data();
        else return data64.data();
    }
    template <class T>
    T* grad() {
        if constexpr (std::is_same_v<T, float>) return grad32.empty() ? nullptr : grad32.data();
        else return grad64.empty() ? nullptr : grad64.data();
    }
    template <class T>
    const T* grad() const {
        if constexpr (std::is_same_v<T, float>) return grad32.empty() ? nullptr : grad32.data();
        else return grad64.empty() ? nullptr : grad64.data();
    }
    void ensure_grad() {
        if (dtype == DType::f32) grad32.assign(numel(), 0.0f);
        else grad64.assign(numel(), 0.0);
    }
    bool has_grad() const { return !grad32.empty() || !grad64.empty(); }
};

// Calls f with a std::type_identity tag for the element type of dt.
template <class F>
decltype(auto) with_dtype(DType dt, F&& f) {
    if (dt == DType::f32) return f(std::type_identity<float>{});
    return f(std::type_identity<double>{});
}

}  // namespace detail

// Value-semantic handle to a node in a reverse-mode autodiff graph.
//
// Copies share the node. Elements are row-major, dtype is runtime (f32 or
// f64), and every op in one expression must use a single dtype. Results of
// ops are treated as immutable; only leaf tensors (parameters) are mutated,
// and only between graph constructions (optimizer steps, finite-difference
// probes). Gradients accumulate across backward() calls until zero_grad().
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, DType dt, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, DType dt);
    static Tensor scalar(double value, DType dt);
    static Tensor from_values(std::vector<std::size_t> shape, std::span<const double> values,
                              DType dt);
    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev, DType dt);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node().shape; }
    std::size_t rank() const { return node().shape.size(); }
    std::size_t numel() const { return node().numel(); }
    DType dtype() const { return node().dtype; }

    bool requires_grad() const { return node().requires_grad; }
    // Leaf-only: interior nodes get their flag at construction.
    void set_requires_grad(bool v);

    template <class T>
    std::span<T> data() {
        return {node().data<T>(), numel()};
    }
    template <class T>
    std::span<const T> data() const {
        return {node().data<T>(), numel()};
    }

    double value_at(std::size_t flat) const;
    void set_value_at(std::size_t flat, double v);
    // Scalar extraction; requires numel() == 1.
    double item() const;

    bool has_grad() const { return node().has_grad(); }
    double grad_at(std::size_t flat) const;
    void zero_grad();

    // Reverse pass from a scalar. Seeds d(self)/d(self) = 1 and accumulates
    // into the grad buffers of every reachable tensor with requires_grad.
    void backward();

    // Deep copy of the data, detached from any graph.
    Tensor clone() const;

    detail::TensorNode& node() {
        if (!node_) throw ParamError("tensor: use of undefined tensor");
        return *node_;
    }
    const detail::TensorNode& node() const {
        if (!node_) throw ParamError("tensor: use of undefined tensor");
        return *node_;
    }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

    static Tensor wrap(std::shared_ptr<detail::TensorNode> n) {
        Tensor t;
        t.node_ = std::move(n);
        return t;
    }

  private:
    std::shared_ptr<detail::TensorNode> node_;
};

// --- ops -------------------------------------------------------------------
// All ops validate shape and dtype, produce a fresh node, and record a
// backward function when any input requires gradients.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

// (m,k) x (k,n) -> (m,n)
Tensor matmul(const Tensor& a, const Tensor& b);
// (m,n) -> (n,m)
Tensor transpose(const Tensor& a);

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Slice along axis 0, any rank.
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
// Slice along axis 1 of a 2-d tensor.
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// Population variance over all elements.
Tensor var_all(const Tensor& a);

// Normalize the last axis to zero mean / unit variance (no affine terms).
Tensor layer_norm(const Tensor& a, double eps);
// Softmax over the last axis.
Tensor softmax_rows(const Tensor& a);
Tensor gelu(const Tensor& a);

// (d) -> (rows, d)
Tensor broadcast_rows(const Tensor& v, std::size_t rows);
// (m, d) -> (d), mean over axis 0.
Tensor mean_over_rows(const Tensor& a);
// (m, d) + (d) and (m, d) * (d), the vector applied to every row.
Tensor add_rowvec(const Tensor& a, const Tensor& v);
Tensor mul_rowvec(const Tensor& a, const Tensor& v);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scalar_mul(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scalar_mul(a, s); }

std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace fusevid
