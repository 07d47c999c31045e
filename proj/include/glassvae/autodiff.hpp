#pragma once
// Reverse-mode automatic differentiation over dense float64 tensors.
//
// A Tape records every operation in execution order, so parents always
// precede children and backward() is a single reverse sweep. Var is a cheap
// handle (tape pointer + node index); all tensors live on the tape.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace glassvae::ad {

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
    static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }
    static Tensor row(std::span<const double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
        return Tensor({rows, cols}, std::move(values));
    }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    // Leading dimension (1 for rank 0).
    std::size_t rows() const noexcept { return shape_.empty() ? 1 : shape_[0]; }
    // Product of the trailing dimensions.
    std::size_t cols() const noexcept;
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double item() const;

    void fill(double v);
    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Appends an op node. requires_grad is inherited from the parents; when no
    // parent needs a gradient the backward rule is dropped.
    Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);
    Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward);

    // Populates gradients of every node reachable from `loss` (scalar).
    void backward(Var loss);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    // Gradient buffer; zeros for nodes never reached.
    const Tensor& grad(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    // Mutable gradient buffer of `id`, allocated as zeros on first access.
    Tensor& grad_buffer(std::size_t id);
    std::size_t parent(std::size_t id, std::size_t k) const { return nodes_[id].parents[k]; }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::vector<std::size_t> parents;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Operators. All inputs must live on the same tape.

Var matmul(Var a, Var b);
// Elementwise a + b; b may also be a [1 x cols] row broadcast over a's rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scalar_mul(Var a, double s);
Var add_scalar(Var a, double s);
Var square(Var a);
Var relu(Var a);
Var silu(Var a);
Var exp(Var a);
Var log(Var a);
// Values clamped into [lo, hi]; gradient passes only where unclamped.
Var clamp(Var a, double lo, double hi);
// Row-wise softmax with max subtraction.
Var softmax(Var a);
Var sum(Var a);
Var mean(Var a);
// Column-wise concatenation of tensors with equal row counts.
Var concat(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
// out[r] = a[indices[r]]
Var index_gather(Var a, std::vector<std::uint32_t> indices);
// out[s] = Σ_{r: ids[r] = s} a[r]
Var segment_sum(Var a, std::vector<std::uint32_t> segment_ids, std::size_t n_segments);
// Mean per segment; empty segments yield zero rows.
Var segment_mean(Var a, std::vector<std::uint32_t> segment_ids, std::size_t n_segments);
// Row-wise ‖a_r‖₂ as an [n x 1] column.
Var l2_norm(Var a);
// Row-wise cosine of paired rows as an [n x 1] column. Rows where either norm
// is below `eps` yield 0 with zero gradient (treated as orthogonal).
Var cosine_similarity(Var a, Var b, double eps = 1e-12);
// Minimum-image fold of [n x 3] displacement rows with per-row box lengths
// (box: [n x 3] constant). Gradient is the identity almost everywhere.
Var min_image(Var delta, const Tensor& box);
// Soft radial histogram. dist: [P x 1] pair distances, pairs assigned to
// `n_segments` histograms. Each pair with 0 < d <= r_max contributes
// normalized Gaussian weights to `bins` bins of width r_max/bins.
Var soft_histogram(Var dist, std::vector<std::uint32_t> segment_ids, std::size_t n_segments, double r_max,
                   std::size_t bins, double sigma);

// Global ℓ₂ norm over all buffers; if it exceeds max_norm, every buffer is
// scaled by max_norm / norm. Returns the norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);
double global_norm(std::span<const Tensor> grads);

}  // namespace glassvae::ad
