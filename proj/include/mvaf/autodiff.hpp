#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "mvaf/tensor.hpp"

namespace mvaf::ad {

// Reverse-mode tape. Every op allocates a Node holding its value, a zeroed
// gradient buffer and a closure that scatters the incoming gradient to its
// parents. Nodes carry a monotonically increasing id; backward() replays
// reachable nodes in descending id order, which is a valid topological order
// because parents are always created before children.
struct Node {
    Tensor value;
    Tensor grad;
    long long id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // reads grad, accumulates into parents
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    bool valid() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    Tensor& grad() { return node_->grad; }
    void zero_grad() { std::fill(node_->grad.data.begin(), node_->grad.data.end(), 0.0); }
    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

Var make_leaf(Tensor value);  // parameters and constants alike

// Runs reverse-mode accumulation from `root`, seeding its gradient with ones.
// Gradients accumulate (never overwrite), so reusing a leaf in several
// subgraphs sums the contributions.
void backward(const Var& root);

// ---- elementwise / linear algebra ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var matmul(const Var& a, const Var& b);              // (N,K)x(K,M)
Var add_row_vector(const Var& a, const Var& bias);   // (N,M) + (M)
Var linear(const Var& x, const Var& w, const Var& b);  // x(N,K) w(K,M) b(M)

Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope = 0.1);
Var sigmoid(const Var& x);
Var softmax_rows(const Var& x);  // (N,K), along K

Var sum(const Var& x);   // -> scalar
Var mean(const Var& x);  // -> scalar

Var concat_cols(const std::vector<Var>& xs);      // (N,Ci) -> (N, sum Ci)
Var slice_cols(const Var& x, int c0, int c1);     // (N,C) -> (N, c1-c0)
Var concat_channels(const std::vector<Var>& xs);  // (Ci,H,W) -> (sum Ci,H,W)
Var reshape(const Var& x, std::vector<int> shape);
Var row_scale(const Var& x, const Var& s);  // x(N,C) * s(N,1) broadcast over C

// ---- conv stack ----
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// w shape (Cout, Cin, k, k); x shape (Cin, H, W)
Var transposed_conv2d(const Var& x, const Var& w, const Var& b, int stride);
// w shape (Cin, Cout, k, k), output (Cout, (H-1)*stride + k, ...); used with
// k == stride for exact integer upsampling.

// Per-channel batch normalization. For 3D inputs (C,H,W) statistics are taken
// over H*W; for 2D inputs (N,C) over N. In training mode batch statistics are
// used and running stats updated in place; in eval mode running stats are
// consumed.
struct NormState {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.99;
    long long steps = 0;
};
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, NormState* state, bool training,
               double eps = 1e-5);
// Affine fallback for tiny batches: gamma * x + beta per channel, no statistics.
Var channel_affine(const Var& x, const Var& gamma, const Var& beta);

// ---- gather / scatter ----
using GatherCoords = std::vector<std::optional<std::pair<double, double>>>;  // (row, col)

// 4-neighbor bilinear interpolation on a (C,H,W) map; one output row per
// coord. Absent coords and out-of-bounds neighbors contribute zero.
Var bilinear_gather(const Var& map, const GatherCoords& coords);

// Channelwise max over each group of rows of x (N,C); one output row per
// group. Gradient routes to the first maximal row of each group.
Var grouped_max(const Var& x, const std::vector<std::vector<int>>& groups);

// Scatter rows of x (P,C) into a dense (C,rows,cols) image at cell (r,c).
Var scatter_rows(const Var& x, const std::vector<std::pair<int, int>>& cells, int rows, int cols);

// Reorder head conv output (A*K, H, W) into anchor-major rows (H*W*A, K).
Var head_reshape(const Var& x, int anchors_per_cell, int channels_per_anchor);

// ---- loss kernels ----
// Binary focal loss on probabilities p (any shape, flattened). targets are
// 0/1, weights is a 0/1 inclusion mask of the same length. Sum over included
// elements divided by `normalizer`. p is clamped to [1e-7, 1-1e-7].
Var focal_loss(const Var& p, const std::vector<double>& targets, const std::vector<double>& weights,
               double alpha, double gamma, double normalizer);

// Smooth-L1 (Huber) on pred - target, masked per element, summed / normalizer.
Var smooth_l1(const Var& pred, const Tensor& target, const std::vector<double>& weights,
              double normalizer, double delta = 1.0);

// Softmax cross entropy over rows of logits (N,K) against integer targets,
// masked per row, summed / normalizer.
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& targets,
                          const std::vector<double>& row_weights, double normalizer);

}  // namespace mvaf::ad
