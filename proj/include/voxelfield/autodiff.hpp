#pragma once

// Tensor-level reverse-mode differentiation.
//
// Every op appends one node holding its value and an adjoint rule. Nodes are appended after
// their inputs, so walking the tape backwards from the loss is a reverse topological order
// and each node is visited once.

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "voxelfield/tensor.hpp"

namespace voxelfield::ad {

struct Var {
    std::uint32_t index = 0;
};

class Tape {
public:
    // Accumulates into the inputs' gradients given this node's output gradient.
    using Backward = std::function<void(Tape& tape, const Matrix& grad_out)>;

    Var constant(Matrix value);
    /// Differentiable leaf.
    Var leaf(Matrix value);
    /// Node computed from `inputs`. It requires a gradient iff some input does; in that case
    /// `backward` is kept.
    Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
    Var record(Matrix value, std::span<const Var> inputs, Backward backward);

    const Matrix& value(Var v) const { return nodes_[v.index].value; }
    bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
    /// Gradient after backward(); a zero matrix of the value's shape when nothing flowed in.
    Matrix grad(Var v) const;

    /// Adds `g` into v's gradient. No-op for constants.
    void accumulate(Var v, const Matrix& g);
    /// Mutable gradient buffer for scatter-style adjoints; allocated zero on first use.
    Matrix& grad_buffer(Var v);

    /// Seeds d(loss)/d(loss) = 1 and runs every adjoint rule once in reverse order.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    /// Non-smooth ops mix their branch pattern in here, so callers can tell whether two
    /// evaluations took identical branches (finite-difference checks rely on this).
    void mix_branch_signature(std::uint64_t h);
    std::uint64_t branch_signature() const { return branch_signature_; }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backward backward;
        bool requires_grad = false;
        bool has_grad = false;
    };
    std::deque<Node> nodes_;
    std::uint64_t branch_signature_ = 0xcbf29ce484222325ull;
};

// ---- elementwise and shape ops --------------------------------------------------------------

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
/// a * k + c for scalars k, c.
Var affine(Tape& t, Var a, double k, double c = 0.0);
/// Adds the 1xC row `row` to every row of `a`.
Var add_row(Tape& t, Var a, Var row);
/// Multiplies every row of `a` elementwise by the 1xC row `row`.
Var mul_row(Tape& t, Var a, Var row);

Var leaky_relu(Tape& t, Var a, double slope = 0.2);
Var softplus(Tape& t, Var a);
Var tanh(Tape& t, Var a);
Var exp(Tape& t, Var a);
Var square(Tape& t, Var a);
/// |a| with subgradient 0 at 0.
Var abs(Tape& t, Var a);
/// Elementwise clamp; gradient passes through strictly inside [lo, hi] and is 0 outside.
Var clamp(Tape& t, Var a, double lo, double hi);

Var sum(Tape& t, Var a);
Var mean(Tape& t, Var a);

Var matmul(Tape& t, Var a, Var b);
/// x * W^T + b, with W out x in and b 1 x out.
Var linear(Tape& t, Var x, Var weight, Var bias);

Var concat_cols(Tape& t, std::span<const Var> parts);
Var slice_cols(Tape& t, Var a, Eigen::Index begin, Eigen::Index count);
/// Rows of `table` selected by `rows`.
Var gather_rows(Tape& t, Var table, std::vector<std::uint32_t> rows);

// ---- domain ops ------------------------------------------------------------------------------

/// Partial Fourier encoding of an N x (n_encoded + n_pass) input. Output columns:
/// [sin(2^k pi u_j) for k, j] [cos(2^k pi u_j) for k, j] [passthrough], k-major.
Var positional_encoding(Tape& t, Var x, int n_encoded, int n_freq);

/// Row i = sum_k weights(i, k) * table(corners(i, k), :), for 8 corners per row.
Var trilinear(Tape& t, Var table, std::vector<std::array<std::uint32_t, 8>> corners,
              std::vector<std::array<double, 8>> weights);

/// Style-modulated, row-demodulated weight: W'(r, c) = W(r, c) * s(c),
/// W''(r, :) = W'(r, :) / sqrt(|W'(r, :)|^2 + eps). `scale` is 1 x in.
Var modulated_weight(Tape& t, Var weight, Var scale, double eps);

/// Per-ray quadrature. `ray_offsets` has rays+1 entries delimiting each ray's samples.
/// Inputs: density N x 1, color N x C, sky R x C. Output R x (C + 1): the composited
/// feature followed by the residual transmittance.
Var composite(Tape& t, Var density, Var color, Var sky, std::vector<double> deltas,
              std::vector<std::size_t> ray_offsets);

/// Image stored as (H*W) x C rows in row-major pixel order to (H*W) x (C*k*k) patches with
/// zero padding. Column order: channel-major, then ky, then kx.
Var im2col(Tape& t, Var image, int height, int width, int kernel);

} // namespace voxelfield::ad
