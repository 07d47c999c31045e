#include "glassvae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glassvae/errors.hpp"
#include "glassvae/kernels.hpp"
#include "glassvae/periodic_graph.hpp"

namespace glassvae::ad {

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
    const std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
    data_.assign(n, fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    const std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
    if (n != data_.size())
        throw ShapeError("tensor shape " + shape_str(shape_) + " needs " + std::to_string(n) + " values, got " +
                         std::to_string(data_.size()));
}

Tensor Tensor::row(std::span<const double> values) {
    return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::cols() const noexcept {
    if (shape_.size() < 2) return shape_.empty() ? 1 : 1;
    return std::accumulate(shape_.begin() + 1, shape_.end(), std::size_t{1}, std::multiplies<>());
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s + "]";
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.parents.reserve(parents.size());
    for (const Var& p : parents) {
        if (p.tape != this) throw ArgumentError("autodiff: operands recorded on different tapes");
        n.parents.push_back(p.id);
        n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::grad(std::size_t id) const {
    Node& n = const_cast<Node&>(nodes_[id]);
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw ArgumentError("backward: loss lives on a different tape");
    if (nodes_[loss.id].value.size() != 1)
        throw ArgumentError("backward: loss must be a scalar, got shape " + shape_str(nodes_[loss.id].value.shape()));
    for (auto& n : nodes_) n.grad = Tensor(n.value.shape());
    nodes_[loss.id].grad[0] = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.backward) continue;
        n.backward(*this, id);
    }
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor like(const Tensor& t) { return Tensor({t.rows(), t.cols()}); }

// Accumulate `g` into the gradient of parent k if it wants one.
template <typename F>
void with_parent_grad(Tape& tape, std::size_t self, std::size_t k, F&& f) {
    const std::size_t p = tape.parent(self, k);
    if (!tape.requires_grad(p)) return;
    f(tape.grad_buffer(p), tape.value(p));
}

// dydx(x, y) is the local derivative given input x and output y.
template <typename F, typename D>
Var unary(Var a, F forward_fn, D dydx) {
    const Tensor& x = a.value();
    Tensor y = like(x);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward_fn(x[i]);
    return a.tape->record(std::move(y), {a}, [dydx](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad(self);
        const Tensor& out = tape.value(self);
        with_parent_grad(tape, self, 0, [&](Tensor& gx, const Tensor& x) {
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * dydx(x[i], out[i]);
        });
    });
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Operators

Var matmul(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.cols() != B.rows())
        throw ShapeError("matmul: shape mismatch " + shape_str(A.shape()) + " vs " + shape_str(B.shape()));
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    Tensor C = Tensor::zeros(n, m);
    kernels::gemm_nn(n, k, m, A.values(), B.values(), C.values());
    return a.tape->record(std::move(C), {a, b}, [n, k, m](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        const Tensor& A = tape.value(tape.parent(self, 0));
        const Tensor& B = tape.value(tape.parent(self, 1));
        with_parent_grad(tape, self, 0, [&](Tensor& gA, const Tensor&) { kernels::gemm_nt(n, k, m, G.values(), B.values(), gA.values()); });
        with_parent_grad(tape, self, 1, [&](Tensor& gB, const Tensor&) { kernels::gemm_tn(n, k, m, A.values(), G.values(), gB.values()); });
    });
}

Var add(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    const bool row_broadcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
    if (!row_broadcast) require_same_shape("add", A, B);
    Tensor C = like(A);
    const std::size_t cols = A.cols();
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] + (row_broadcast ? B[i % cols] : B[i]);
    return a.tape->record(std::move(C), {a, b}, [row_broadcast, cols](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        with_parent_grad(tape, self, 0, [&](Tensor& gA, const Tensor&) { kernels::axpy(1.0, G.values(), gA.values()); });
        with_parent_grad(tape, self, 1, [&](Tensor& gB, const Tensor&) {
            if (!row_broadcast) {
                kernels::axpy(1.0, G.values(), gB.values());
                return;
            }
            for (std::size_t r = 0; r < G.rows(); ++r) kernels::axpy(1.0, G.values().subspan(r * cols, cols), gB.values());
        });
    });
}

Var sub(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_same_shape("sub", A, B);
    Tensor C = like(A);
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] - B[i];
    return a.tape->record(std::move(C), {a, b}, [](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        with_parent_grad(tape, self, 0, [&](Tensor& gA, const Tensor&) { kernels::axpy(1.0, G.values(), gA.values()); });
        with_parent_grad(tape, self, 1, [&](Tensor& gB, const Tensor&) { kernels::axpy(-1.0, G.values(), gB.values()); });
    });
}

Var mul(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_same_shape("mul", A, B);
    Tensor C = like(A);
    kernels::hadamard(A.values(), B.values(), C.values());
    return a.tape->record(std::move(C), {a, b}, [](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        const Tensor& A = tape.value(tape.parent(self, 0));
        const Tensor& B = tape.value(tape.parent(self, 1));
        with_parent_grad(tape, self, 0, [&](Tensor& gA, const Tensor&) {
            for (std::size_t i = 0; i < G.size(); ++i) gA[i] += G[i] * B[i];
        });
        with_parent_grad(tape, self, 1, [&](Tensor& gB, const Tensor&) {
            for (std::size_t i = 0; i < G.size(); ++i) gB[i] += G[i] * A[i];
        });
    });
}

Var scalar_mul(Var a, double s) {
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var square(Var a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var relu(Var a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var silu(Var a) {
    return unary(
        a, [](double x) { return x * sigmoid(x); },
        [](double x, double) {
            const double s = sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Var exp(Var a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp(Var a, double lo, double hi) {
    return unary(
        a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var softmax(Var a) {
    const Tensor& X = a.value();
    const std::size_t rows = X.rows(), cols = X.cols();
    Tensor Y = like(X);
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = X.at(r, 0);
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, X.at(r, c));
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += (Y.at(r, c) = std::exp(X.at(r, c) - mx));
        for (std::size_t c = 0; c < cols; ++c) Y.at(r, c) /= total;
    }
    return a.tape->record(std::move(Y), {a}, [rows, cols](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        const Tensor& Y = tape.value(self);
        with_parent_grad(tape, self, 0, [&](Tensor& gX, const Tensor&) {
            for (std::size_t r = 0; r < rows; ++r) {
                double dotgy = 0.0;
                for (std::size_t c = 0; c < cols; ++c) dotgy += G.at(r, c) * Y.at(r, c);
                for (std::size_t c = 0; c < cols; ++c) gX.at(r, c) += Y.at(r, c) * (G.at(r, c) - dotgy);
            }
        });
    });
}

Var sum(Var a) {
    const Tensor& X = a.value();
    double total = 0.0;
    for (double v : X.values()) total += v;
    return a.tape->record(Tensor::scalar(total), {a}, [](Tape& tape, std::size_t self) {
        const double g = tape.grad(self)[0];
        with_parent_grad(tape, self, 0, [&](Tensor& gX, const Tensor&) {
            for (double& v : gX.values()) v += g;
        });
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw ShapeError("mean of an empty tensor");
    return scalar_mul(sum(a), 1.0 / n);
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const std::size_t rows = parts[0].rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows)
            throw ShapeError("concat: shape mismatch " + shape_str(parts[0].value().shape()) + " vs " + shape_str(p.value().shape()));
        widths.push_back(p.cols());
        total += p.cols();
    }
    Tensor Y = Tensor::zeros(rows, total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& X = parts[k].value();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(X.data() + r * widths[k], widths[k], Y.data() + r * total + offset);
        offset += widths[k];
    }
    return parts[0].tape->record(std::move(Y), parts, [widths, rows, total](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            with_parent_grad(tape, self, k, [&](Tensor& gX, const Tensor&) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < widths[k]; ++c) gX[r * widths[k] + c] += G[r * total + offset + c];
            });
            offset += widths[k];
        }
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    const Tensor& X = a.value();
    if (begin >= end || end > X.cols())
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " +
                         shape_str(X.shape()));
    const std::size_t rows = X.rows(), cols = X.cols(), width = end - begin;
    Tensor Y = Tensor::zeros(rows, width);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(X.data() + r * cols + begin, width, Y.data() + r * width);
    return a.tape->record(std::move(Y), {a}, [rows, cols, begin, width](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        with_parent_grad(tape, self, 0, [&](Tensor& gX, const Tensor&) {
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < width; ++c) gX[r * cols + begin + c] += G[r * width + c];
        });
    });
}

Var index_gather(Var a, std::vector<std::uint32_t> indices) {
    const Tensor& X = a.value();
    const std::size_t cols = X.cols();
    Tensor Y = Tensor::zeros(indices.size(), cols);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= X.rows())
            throw ShapeError("index_gather: index " + std::to_string(indices[r]) + " out of range for " + shape_str(X.shape()));
        std::copy_n(X.data() + indices[r] * cols, cols, Y.data() + r * cols);
    }
    return a.tape->record(std::move(Y), {a}, [indices = std::move(indices), cols](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        with_parent_grad(tape, self, 0, [&](Tensor& gX, const Tensor&) {
            for (std::size_t r = 0; r < indices.size(); ++r)
                kernels::axpy(1.0, G.values().subspan(r * cols, cols), gX.values().subspan(indices[r] * cols, cols));
        });
    });
}

namespace {

Var segment_reduce(Var a, std::vector<std::uint32_t> ids, std::size_t n_segments, bool average) {
    const Tensor& X = a.value();
    if (ids.size() != X.rows())
        throw ShapeError("segment op: " + std::to_string(ids.size()) + " segment ids for " + shape_str(X.shape()));
    const std::size_t cols = X.cols();
    std::vector<double> scale(n_segments, 0.0);
    for (auto id : ids) {
        if (id >= n_segments)
            throw ShapeError("segment op: id " + std::to_string(id) + " outside [0, " + std::to_string(n_segments) + ")");
        scale[id] += 1.0;
    }
    for (double& s : scale) s = average ? (s > 0.0 ? 1.0 / s : 0.0) : 1.0;
    Tensor Y = Tensor::zeros(n_segments, cols);
    for (std::size_t r = 0; r < ids.size(); ++r)
        kernels::axpy(scale[ids[r]], X.values().subspan(r * cols, cols), Y.values().subspan(ids[r] * cols, cols));
    return a.tape->record(std::move(Y), {a}, [ids = std::move(ids), scale = std::move(scale), cols](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        with_parent_grad(tape, self, 0, [&](Tensor& gX, const Tensor&) {
            for (std::size_t r = 0; r < ids.size(); ++r)
                kernels::axpy(scale[ids[r]], G.values().subspan(ids[r] * cols, cols), gX.values().subspan(r * cols, cols));
        });
    });
}

}  // namespace

Var segment_sum(Var a, std::vector<std::uint32_t> segment_ids, std::size_t n_segments) {
    return segment_reduce(a, std::move(segment_ids), n_segments, false);
}

Var segment_mean(Var a, std::vector<std::uint32_t> segment_ids, std::size_t n_segments) {
    return segment_reduce(a, std::move(segment_ids), n_segments, true);
}

Var l2_norm(Var a) {
    const Tensor& X = a.value();
    const std::size_t rows = X.rows(), cols = X.cols();
    Tensor Y = Tensor::zeros(rows, 1);
    for (std::size_t r = 0; r < rows; ++r) Y[r] = std::sqrt(kernels::sum_sq(X.values().subspan(r * cols, cols)));
    return a.tape->record(std::move(Y), {a}, [rows, cols](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        const Tensor& Y = tape.value(self);
        with_parent_grad(tape, self, 0, [&](Tensor& gX, const Tensor& X) {
            for (std::size_t r = 0; r < rows; ++r) {
                if (Y[r] == 0.0) continue;
                kernels::axpy(G[r] / Y[r], X.values().subspan(r * cols, cols), gX.values().subspan(r * cols, cols));
            }
        });
    });
}

Var cosine_similarity(Var a, Var b, double eps) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_same_shape("cosine_similarity", A, B);
    const std::size_t rows = A.rows(), cols = A.cols();
    Tensor Y = Tensor::zeros(rows, 1);
    std::vector<double> na(rows), nb(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto ar = A.values().subspan(r * cols, cols);
        const auto br = B.values().subspan(r * cols, cols);
        na[r] = std::sqrt(kernels::sum_sq(ar));
        nb[r] = std::sqrt(kernels::sum_sq(br));
        Y[r] = (na[r] < eps || nb[r] < eps) ? 0.0 : kernels::dot(ar, br) / (na[r] * nb[r]);
    }
    return a.tape->record(std::move(Y), {a, b}, [rows, cols, eps, na = std::move(na), nb = std::move(nb)](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        const Tensor& Y = tape.value(self);
        const Tensor& A = tape.value(tape.parent(self, 0));
        const Tensor& B = tape.value(tape.parent(self, 1));
        // ∂c/∂a = b / (|a||b|) - c a / |a|²
        auto rule = [&](Tensor& gX, const Tensor& self_val, const Tensor& other, const std::vector<double>& ns,
                        const std::vector<double>& no) {
            for (std::size_t r = 0; r < rows; ++r) {
                if (ns[r] < eps || no[r] < eps) continue;
                const double g = G[r];
                for (std::size_t c = 0; c < cols; ++c) {
                    const std::size_t i = r * cols + c;
                    gX[i] += g * (other[i] / (ns[r] * no[r]) - Y[r] * self_val[i] / (ns[r] * ns[r]));
                }
            }
        };
        with_parent_grad(tape, self, 0, [&](Tensor& gA, const Tensor&) { rule(gA, A, B, na, nb); });
        with_parent_grad(tape, self, 1, [&](Tensor& gB, const Tensor&) { rule(gB, B, A, nb, na); });
    });
}

Var min_image(Var delta, const Tensor& box) {
    const Tensor& D = delta.value();
    if (D.cols() != 3 || box.rows() != D.rows() || box.cols() != 3)
        throw ShapeError("min_image: shape mismatch " + shape_str(D.shape()) + " vs " + shape_str(box.shape()));
    Tensor Y = like(D);
    for (std::size_t i = 0; i < D.size(); ++i) {
        const double length = box[i];
        const double half = 0.5 * length;
        const double shifted = D[i] + half;
        double c = shifted - length * std::floor(shifted / length) - half;
        if (c >= half) c -= length;
        if (c < -half) c = -half;
        Y[i] = c;
    }
    return delta.tape->record(std::move(Y), {delta}, [](Tape& tape, std::size_t self) {
        const Tensor& G = tape.grad(self);
        with_parent_grad(tape, self, 0, [&](Tensor& gX, const Tensor&) { kernels::axpy(1.0, G.values(), gX.values()); });
    });
}

Var soft_histogram(Var dist, std::vector<std::uint32_t> segment_ids, std::size_t n_segments, double r_max, std::size_t bins,
                   double sigma) {
    const Tensor& D = dist.value();
    if (D.cols() != 1 || segment_ids.size() != D.rows())
        throw ShapeError("soft_histogram: distances " + shape_str(D.shape()) + " with " + std::to_string(segment_ids.size()) +
                         " segment ids");
    if (bins < 2 || !(r_max > 0.0) || !(sigma > 0.0)) throw ArgumentError("soft_histogram: invalid bins/r_max/sigma");
    const std::size_t pairs = D.rows();
    const double bin_width = r_max / static_cast<double>(bins);
    Tensor H = Tensor::zeros(n_segments, bins);
    // Per-pair weights, kept for the backward rule. Excluded pairs keep zeros.
    auto weights = std::make_shared<std::vector<double>>(pairs * bins, 0.0);
    std::vector<bool> included(pairs, false);
    for (std::size_t p = 0; p < pairs; ++p) {
        if (segment_ids[p] >= n_segments) throw ShapeError("soft_histogram: segment id out of range");
        const double d = D[p];
        if (!(d > 0.0) || d > r_max) continue;
        included[p] = true;
        std::span<double> w(weights->data() + p * bins, bins);
        graph::soft_bin_weights(d, bin_width, sigma, w);
        kernels::axpy(1.0, w, H.values().subspan(segment_ids[p] * bins, bins));
    }
    return dist.tape->record(
        std::move(H), {dist},
        [weights, included = std::move(included), ids = std::move(segment_ids), bins, bin_width, sigma](Tape& tape, std::size_t self) {
            const Tensor& G = tape.grad(self);
            with_parent_grad(tape, self, 0, [&](Tensor& gD, const Tensor& D) {
                const double inv_var = 1.0 / (sigma * sigma);
                for (std::size_t p = 0; p < included.size(); ++p) {
                    if (!included[p]) continue;
                    const double* w = weights->data() + p * bins;
                    const double* g = G.data() + ids[p] * bins;
                    // d w_b / d d = w_b (l'_b - Σ_k w_k l'_k), l'_b = -(d - c_b)/σ²
                    double gw = 0.0, gwl = 0.0, wl = 0.0;
                    for (std::size_t b = 0; b < bins; ++b) {
                        const double lp = -(D[p] - (static_cast<double>(b) + 0.5) * bin_width) * inv_var;
                        gw += g[b] * w[b];
                        gwl += g[b] * w[b] * lp;
                        wl += w[b] * lp;
                    }
                    gD[p] += gwl - gw * wl;
                }
            });
        });
}

// ---------------------------------------------------------------------------

double global_norm(std::span<const Tensor> grads) {
    double total = 0.0;
    for (const Tensor& g : grads) total += kernels::sum_sq(g.values());
    return std::sqrt(total);
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
    if (!(max_norm > 0.0)) throw ArgumentError("clip_global_norm: max_norm must be positive");
    const double norm = global_norm(std::span<const Tensor>(grads.data(), grads.size()));
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (Tensor& g : grads)
            for (double& v : g.values()) v *= scale;
    }
    return norm;
}

}  // namespace glassvae::ad
