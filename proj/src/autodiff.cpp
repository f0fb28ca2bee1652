#include "voxelfield/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "voxelfield/quadrature.hpp"

namespace voxelfield {

double quadrature_weights(std::span<const double> sigma, std::span<const double> delta,
                          std::span<double> transmittance, std::span<double> weight) {
    double optical_depth = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        const double a = sigma[i] * delta[i];
        const double t = std::exp(-optical_depth);
        transmittance[i] = t;
        weight[i] = -t * std::expm1(-a);
        optical_depth += a;
    }
    return std::exp(-optical_depth);
}

} // namespace voxelfield

namespace voxelfield::ad {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
    h ^= v;
    return h * 0x100000001b3ull;
}

} // namespace

// ---- Tape ------------------------------------------------------------------------------------

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, {}, false, false});
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, {}, true, false});
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_[v.index].requires_grad;
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs, false});
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Matrix Tape::grad(Var v) const {
    const Node& n = nodes_[v.index];
    if (n.has_grad) return n.grad;
    return Matrix::Zero(n.value.rows(), n.value.cols());
}

void Tape::accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[v.index];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        n.grad += g;
    }
}

Matrix& Tape::grad_buffer(Var v) {
    Node& n = nodes_[v.index];
    if (!n.has_grad) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(Var loss) {
    Node& root = nodes_[loss.index];
    if (root.value.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    if (!root.requires_grad) return;
    root.grad = Matrix::Ones(1, 1);
    root.has_grad = true;
    for (std::size_t i = loss.index + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.has_grad && n.backward) n.backward(*this, n.grad);
    }
}

void Tape::mix_branch_signature(std::uint64_t h) { branch_signature_ = fnv_mix(branch_signature_, h); }

// ---- elementwise -----------------------------------------------------------------------------

Var add(Tape& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "add");
    return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

Var sub(Tape& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "sub");
    return t.record(t.value(a) - t.value(b), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, -g);
    });
}

Var mul(Tape& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "mul");
    return t.record(t.value(a).cwiseProduct(t.value(b)), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
        if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
    });
}

Var affine(Tape& t, Var a, double k, double c) {
    Matrix v = (t.value(a).array() * k + c).matrix();
    return t.record(std::move(v), {a}, [a, k](Tape& tp, const Matrix& g) { tp.accumulate(a, g * k); });
}

Var add_row(Tape& t, Var a, Var row) {
    const Matrix& av = t.value(a);
    const Matrix& rv = t.value(row);
    if (rv.rows() != 1 || rv.cols() != av.cols()) throw std::invalid_argument("add_row: shape mismatch");
    Matrix v = av.rowwise() + rv.row(0);
    return t.record(std::move(v), {a, row}, [a, row](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        if (tp.requires_grad(row)) tp.accumulate(row, g.colwise().sum());
    });
}

Var mul_row(Tape& t, Var a, Var row) {
    const Matrix& av = t.value(a);
    const Matrix& rv = t.value(row);
    if (rv.rows() != 1 || rv.cols() != av.cols()) throw std::invalid_argument("mul_row: shape mismatch");
    Matrix v = av.array().rowwise() * rv.row(0).array();
    return t.record(std::move(v), {a, row}, [a, row](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) {
            Matrix ga = g.array().rowwise() * tp.value(row).row(0).array();
            tp.accumulate(a, ga);
        }
        if (tp.requires_grad(row)) tp.accumulate(row, g.cwiseProduct(tp.value(a)).colwise().sum());
    });
}

Var leaky_relu(Tape& t, Var a, double slope) {
    const Matrix& x = t.value(a);
    Matrix v(x.rows(), x.cols());
    std::uint64_t h = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x.data()[i];
        v.data()[i] = xi > 0.0 ? xi : slope * xi;
        h = fnv_mix(h, xi > 0.0 ? 0x9e37u + static_cast<std::uint64_t>(i) : 0);
    }
    t.mix_branch_signature(h);
    return t.record(std::move(v), {a}, [a, slope](Tape& tp, const Matrix& g) {
        const Matrix& x = tp.value(a);
        Matrix ga = (x.array() > 0.0).select(g.array(), slope * g.array());
        tp.accumulate(a, ga);
    });
}

Var softplus(Tape& t, Var a) {
    const Matrix& x = t.value(a);
    Matrix v = x.unaryExpr([](double z) { return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0); });
    return t.record(std::move(v), {a}, [a](Tape& tp, const Matrix& g) {
        const Matrix& x = tp.value(a);
        Matrix s = x.unaryExpr([](double z) {
            return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        });
        tp.accumulate(a, g.cwiseProduct(s));
    });
}

Var tanh(Tape& t, Var a) {
    Matrix v = t.value(a).array().tanh().matrix();
    return t.record(std::move(v), {a}, [a](Tape& tp, const Matrix& g) {
        const Matrix y = tp.value(a).array().tanh().matrix();
        tp.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
    });
}

Var exp(Tape& t, Var a) {
    Matrix v = t.value(a).array().exp().matrix();
    return t.record(std::move(v), {a}, [a](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g.cwiseProduct(tp.value(a).array().exp().matrix()));
    });
}

Var square(Tape& t, Var a) {
    Matrix v = t.value(a).array().square().matrix();
    return t.record(std::move(v), {a}, [a](Tape& tp, const Matrix& g) {
        tp.accumulate(a, (2.0 * g.array() * tp.value(a).array()).matrix());
    });
}

Var abs(Tape& t, Var a) {
    const Matrix& x = t.value(a);
    std::uint64_t h = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x.data()[i];
        h = fnv_mix(h, xi > 0.0 ? 1 : (xi < 0.0 ? 2 : 3));
    }
    t.mix_branch_signature(h);
    return t.record(x.cwiseAbs(), {a}, [a](Tape& tp, const Matrix& g) {
        const Matrix sign = tp.value(a).unaryExpr([](double z) { return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0); });
        tp.accumulate(a, g.cwiseProduct(sign));
    });
}

Var clamp(Tape& t, Var a, double lo, double hi) {
    const Matrix& x = t.value(a);
    std::uint64_t h = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xi = x.data()[i];
        h = fnv_mix(h, xi <= lo ? 1 : (xi >= hi ? 2 : 3));
    }
    t.mix_branch_signature(h);
    Matrix v = x.cwiseMax(lo).cwiseMin(hi);
    return t.record(std::move(v), {a}, [a, lo, hi](Tape& tp, const Matrix& g) {
        const Matrix& x = tp.value(a);
        Matrix ga = (x.array() > lo && x.array() < hi).select(g.array(), 0.0);
        tp.accumulate(a, ga);
    });
}

Var sum(Tape& t, Var a) {
    Matrix v(1, 1);
    v(0, 0) = t.value(a).sum();
    return t.record(std::move(v), {a}, [a](Tape& tp, const Matrix& g) {
        const Matrix& x = tp.value(a);
        tp.accumulate(a, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
    });
}

Var mean(Tape& t, Var a) {
    const double n = static_cast<double>(t.value(a).size());
    Matrix v(1, 1);
    v(0, 0) = n > 0 ? t.value(a).sum() / n : 0.0;
    return t.record(std::move(v), {a}, [a, n](Tape& tp, const Matrix& g) {
        const Matrix& x = tp.value(a);
        if (n > 0) tp.accumulate(a, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
    });
}

// ---- linear algebra and shape ----------------------------------------------------------------

Var matmul(Tape& t, Var a, Var b) {
    if (t.value(a).cols() != t.value(b).rows()) throw std::invalid_argument("matmul: shape mismatch");
    Matrix v = t.value(a) * t.value(b);
    return t.record(std::move(v), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
        if (tp.requires_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
    });
}

Var linear(Tape& t, Var x, Var weight, Var bias) {
    const Matrix& xv = t.value(x);
    const Matrix& w = t.value(weight);
    const Matrix& b = t.value(bias);
    if (xv.cols() != w.cols() || b.rows() != 1 || b.cols() != w.rows()) {
        throw std::invalid_argument("linear: shape mismatch");
    }
    Matrix v = xv * w.transpose();
    v.rowwise() += b.row(0);
    return t.record(std::move(v), {x, weight, bias}, [x, weight, bias](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(x)) tp.accumulate(x, g * tp.value(weight));
        if (tp.requires_grad(weight)) tp.accumulate(weight, g.transpose() * tp.value(x));
        if (tp.requires_grad(bias)) tp.accumulate(bias, g.colwise().sum());
    });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const Eigen::Index rows = t.value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (Var p : parts) {
        if (t.value(p).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
        cols += t.value(p).cols();
    }
    Matrix v(rows, cols);
    Eigen::Index c = 0;
    for (Var p : parts) {
        v.middleCols(c, t.value(p).cols()) = t.value(p);
        c += t.value(p).cols();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return t.record(std::move(v), parts, [inputs](Tape& tp, const Matrix& g) {
        Eigen::Index c = 0;
        for (Var p : inputs) {
            const Eigen::Index w = tp.value(p).cols();
            if (tp.requires_grad(p)) tp.accumulate(p, g.middleCols(c, w));
            c += w;
        }
    });
}

Var slice_cols(Tape& t, Var a, Eigen::Index begin, Eigen::Index count) {
    const Matrix& x = t.value(a);
    if (begin < 0 || count < 0 || begin + count > x.cols()) throw std::invalid_argument("slice_cols: out of range");
    Matrix v = x.middleCols(begin, count);
    return t.record(std::move(v), {a}, [a, begin, count](Tape& tp, const Matrix& g) {
        Matrix& ga = tp.grad_buffer(a);
        ga.middleCols(begin, count) += g;
    });
}

Var gather_rows(Tape& t, Var table, std::vector<std::uint32_t> rows) {
    const Matrix& tv = t.value(table);
    Matrix v(static_cast<Eigen::Index>(rows.size()), tv.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= tv.rows()) throw std::out_of_range("gather_rows: index out of range");
        v.row(static_cast<Eigen::Index>(i)) = tv.row(rows[i]);
    }
    return t.record(std::move(v), {table}, [table, rows = std::move(rows)](Tape& tp, const Matrix& g) {
        Matrix& gt = tp.grad_buffer(table);
        for (std::size_t i = 0; i < rows.size(); ++i) gt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    });
}

// ---- domain ops ------------------------------------------------------------------------------

Var positional_encoding(Tape& t, Var x, int n_encoded, int n_freq) {
    const Matrix& xv = t.value(x);
    if (n_encoded < 0 || n_freq < 0 || n_encoded > xv.cols()) {
        throw std::invalid_argument("positional_encoding: bad channel split");
    }
    const Eigen::Index n = xv.rows();
    const Eigen::Index ne = n_encoded;
    const Eigen::Index np = xv.cols() - ne;
    const Eigen::Index block = ne * n_freq;
    Matrix v(n, 2 * block + np);
    for (int k = 0; k < n_freq; ++k) {
        const double f = std::ldexp(std::numbers::pi, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < ne; ++j) {
                const double arg = f * xv(i, j);
                v(i, k * ne + j) = std::sin(arg);
                v(i, block + k * ne + j) = std::cos(arg);
            }
        }
    }
    if (np > 0) v.rightCols(np) = xv.rightCols(np);
    return t.record(std::move(v), {x}, [x, ne, np, n_freq, block](Tape& tp, const Matrix& g) {
        const Matrix& xv = tp.value(x);
        Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
        for (int k = 0; k < n_freq; ++k) {
            const double f = std::ldexp(std::numbers::pi, k);
            for (Eigen::Index i = 0; i < xv.rows(); ++i) {
                for (Eigen::Index j = 0; j < ne; ++j) {
                    const double arg = f * xv(i, j);
                    gx(i, j) += f * (g(i, k * ne + j) * std::cos(arg) - g(i, block + k * ne + j) * std::sin(arg));
                }
            }
        }
        if (np > 0) gx.rightCols(np) = g.rightCols(np);
        tp.accumulate(x, gx);
    });
}

Var trilinear(Tape& t, Var table, std::vector<std::array<std::uint32_t, 8>> corners,
              std::vector<std::array<double, 8>> weights) {
    if (corners.size() != weights.size()) throw std::invalid_argument("trilinear: size mismatch");
    const Matrix& tv = t.value(table);
    const Eigen::Index dim = tv.cols();
    Matrix v = Matrix::Zero(static_cast<Eigen::Index>(corners.size()), dim);
    for (std::size_t i = 0; i < corners.size(); ++i) {
        for (int k = 0; k < 8; ++k) {
            if (corners[i][k] >= tv.rows()) throw std::out_of_range("trilinear: corner out of range");
            v.row(static_cast<Eigen::Index>(i)) += weights[i][k] * tv.row(corners[i][k]);
        }
    }
    return t.record(std::move(v), {table},
                    [table, corners = std::move(corners), weights = std::move(weights)](Tape& tp, const Matrix& g) {
                        Matrix& gt = tp.grad_buffer(table);
                        for (std::size_t i = 0; i < corners.size(); ++i) {
                            for (int k = 0; k < 8; ++k) {
                                gt.row(corners[i][k]) += weights[i][k] * g.row(static_cast<Eigen::Index>(i));
                            }
                        }
                    });
}

Var modulated_weight(Tape& t, Var weight, Var scale, double eps) {
    const Matrix& w = t.value(weight);
    const Matrix& s = t.value(scale);
    if (s.rows() != 1 || s.cols() != w.cols()) throw std::invalid_argument("modulated_weight: shape mismatch");
    const Matrix modulated = w.array().rowwise() * s.row(0).array();
    const Eigen::VectorXd norms = (modulated.rowwise().squaredNorm().array() + eps).sqrt();
    Matrix v = modulated.array().colwise() / norms.array();
    return t.record(std::move(v), {weight, scale}, [weight, scale, eps](Tape& tp, const Matrix& g) {
        const Matrix& w = tp.value(weight);
        const Matrix& s = tp.value(scale);
        const Matrix modulated = w.array().rowwise() * s.row(0).array();
        const Eigen::VectorXd norms = (modulated.rowwise().squaredNorm().array() + eps).sqrt();
        // d/dW' of W'/n: G/n - W' (G . W') / n^3, row by row.
        const Eigen::VectorXd proj = g.cwiseProduct(modulated).rowwise().sum();
        Matrix g_mod = g.array().colwise() / norms.array();
        g_mod.array() -= modulated.array().colwise() * (proj.array() / norms.array().cube());
        if (tp.requires_grad(weight)) {
            Matrix gw = g_mod.array().rowwise() * s.row(0).array();
            tp.accumulate(weight, gw);
        }
        if (tp.requires_grad(scale)) tp.accumulate(scale, g_mod.cwiseProduct(w).colwise().sum());
    });
}

Var composite(Tape& t, Var density, Var color, Var sky, std::vector<double> deltas,
              std::vector<std::size_t> ray_offsets) {
    const Matrix& sigma = t.value(density);
    const Matrix& c = t.value(color);
    const Matrix& sk = t.value(sky);
    const Eigen::Index n = sigma.rows();
    const Eigen::Index cd = c.cols();
    const Eigen::Index rays = sk.rows();
    if (sigma.cols() != 1 || c.rows() != n || sk.cols() != cd || static_cast<Eigen::Index>(deltas.size()) != n ||
        static_cast<Eigen::Index>(ray_offsets.size()) != rays + 1 || ray_offsets.back() != static_cast<std::size_t>(n)) {
        throw std::invalid_argument("composite: shape mismatch");
    }

    Matrix out(rays, cd + 1);
    std::vector<double> trans(static_cast<std::size_t>(n)), weight(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < rays; ++r) {
        const std::size_t b = ray_offsets[r], e = ray_offsets[r + 1];
        const double t_end = quadrature_weights({sigma.data() + b, e - b}, {deltas.data() + b, e - b},
                                                {trans.data() + b, e - b}, {weight.data() + b, e - b});
        Eigen::RowVectorXd acc = t_end * sk.row(r);
        for (std::size_t i = b; i < e; ++i) acc += weight[i] * c.row(static_cast<Eigen::Index>(i));
        out.row(r).head(cd) = acc;
        out(r, cd) = t_end;
    }

    return t.record(std::move(out), {density, color, sky},
                    [density, color, sky, deltas = std::move(deltas), ray_offsets = std::move(ray_offsets),
                     trans = std::move(trans), weight = std::move(weight)](Tape& tp, const Matrix& g) {
                        const Matrix& sigma = tp.value(density);
                        const Matrix& c = tp.value(color);
                        const Matrix& sk = tp.value(sky);
                        const Eigen::Index cd = c.cols();
                        const Eigen::Index rays = sk.rows();
                        const bool want_sigma = tp.requires_grad(density);
                        const bool want_color = tp.requires_grad(color);
                        const bool want_sky = tp.requires_grad(sky);
                        Matrix g_sigma = want_sigma ? Matrix::Zero(sigma.rows(), 1) : Matrix();
                        Matrix g_color = want_color ? Matrix::Zero(c.rows(), cd) : Matrix();
                        Matrix g_sky = want_sky ? Matrix::Zero(rays, cd) : Matrix();
                        for (Eigen::Index r = 0; r < rays; ++r) {
                            const std::size_t b = ray_offsets[r], e = ray_offsets[r + 1];
                            const auto gc = g.row(r).head(cd);
                            const double gt = g(r, cd);
                            double optical_depth = 0.0;
                            for (std::size_t i = b; i < e; ++i) optical_depth += sigma(static_cast<Eigen::Index>(i), 0) * deltas[i];
                            const double t_end = std::exp(-optical_depth);
                            if (want_sky) g_sky.row(r) = t_end * gc;
                            if (want_color) {
                                for (std::size_t i = b; i < e; ++i) g_color.row(static_cast<Eigen::Index>(i)) = weight[i] * gc;
                            }
                            if (!want_sigma) continue;
                            const double sky_term = t_end * sk.row(r).dot(gc) + t_end * gt;
                            double later = 0.0; // sum_{i>k} w_i (c_i . gc)
                            for (std::size_t k = e; k-- > b;) {
                                const auto ki = static_cast<Eigen::Index>(k);
                                const double a = sigma(ki, 0) * deltas[k];
                                const double cg = c.row(ki).dot(gc);
                                const double t_next = trans[k] * std::exp(-a);
                                const double d_a = t_next * cg - later - sky_term;
                                g_sigma(ki, 0) = d_a * deltas[k];
                                later += weight[k] * cg;
                            }
                        }
                        if (want_sigma) tp.accumulate(density, g_sigma);
                        if (want_color) tp.accumulate(color, g_color);
                        if (want_sky) tp.accumulate(sky, g_sky);
                    });
}

Var im2col(Tape& t, Var image, int height, int width, int kernel) {
    const Matrix& x = t.value(image);
    if (x.rows() != static_cast<Eigen::Index>(height) * width || kernel < 1 || kernel % 2 == 0) {
        throw std::invalid_argument("im2col: bad image shape or kernel");
    }
    const Eigen::Index ch = x.cols();
    const int r = kernel / 2;
    const int kk = kernel * kernel;
    Matrix v = Matrix::Zero(x.rows(), ch * kk);
    for (int y = 0; y < height; ++y) {
        for (int xx = 0; xx < width; ++xx) {
            const Eigen::Index row = static_cast<Eigen::Index>(y) * width + xx;
            for (int ky = 0; ky < kernel; ++ky) {
                const int sy = y + ky - r;
                if (sy < 0 || sy >= height) continue;
                for (int kx = 0; kx < kernel; ++kx) {
                    const int sx = xx + kx - r;
                    if (sx < 0 || sx >= width) continue;
                    const Eigen::Index src = static_cast<Eigen::Index>(sy) * width + sx;
                    for (Eigen::Index c = 0; c < ch; ++c) v(row, c * kk + ky * kernel + kx) = x(src, c);
                }
            }
        }
    }
    return t.record(std::move(v), {image}, [image, height, width, kernel](Tape& tp, const Matrix& g) {
        Matrix& gx = tp.grad_buffer(image);
        const Eigen::Index ch = gx.cols();
        const int r = kernel / 2;
        const int kk = kernel * kernel;
        for (int y = 0; y < height; ++y) {
            for (int xx = 0; xx < width; ++xx) {
                const Eigen::Index row = static_cast<Eigen::Index>(y) * width + xx;
                for (int ky = 0; ky < kernel; ++ky) {
                    const int sy = y + ky - r;
                    if (sy < 0 || sy >= height) continue;
                    for (int kx = 0; kx < kernel; ++kx) {
                        const int sx = xx + kx - r;
                        if (sx < 0 || sx >= width) continue;
                        const Eigen::Index src = static_cast<Eigen::Index>(sy) * width + sx;
                        for (Eigen::Index c = 0; c < ch; ++c) gx(src, c) += g(row, c * kk + ky * kernel + kx);
                    }
                }
            }
        }
    });
}

} // namespace voxelfield::ad
