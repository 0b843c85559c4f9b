#include "deepmal/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "deepmal/nn/eigen_maps.hpp"
#include "deepmal/util/error.hpp"
#include "deepmal/util/seed.hpp"

DEEPMAL_NN_BEGIN
namespace {

void expect_rank(const Tensor& t, std::size_t rank, const char* who) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) +
                         " input, got " + shape_string(t.shape()));
    }
}

void init_uniform(Tensor& t, double limit, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& v : t.values()) v = static_cast<Real>(rng.uniform(-limit, limit));
}

double init_limit(Init init, std::size_t fan_in, std::size_t fan_out) {
    if (init == Init::HeUniform) return std::sqrt(6.0 / static_cast<double>(fan_in));
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Real sigmoid(Real x) {
    if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
    const Real e = std::exp(x);
    return e / (Real(1) + e);
}

// (B, L, C) -> (B*L, K*C) patch matrix with zero "same" padding.
RowMatrix im2col(const Tensor& input, std::size_t kernel) {
    const std::size_t B = input.dim(0), L = input.dim(1), C = input.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
    RowMatrix patches = RowMatrix::Zero(static_cast<Eigen::Index>(B * L),
                                        static_cast<Eigen::Index>(kernel * C));
    const Real* in = input.data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < L; ++t) {
            Real* row = patches.data() + (b * L + t) * kernel * C;
            for (std::size_t k = 0; k < kernel; ++k) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + k) - pad;
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
                std::copy_n(in + (b * L + static_cast<std::size_t>(s)) * C, C, row + k * C);
            }
        }
    }
    return patches;
}

}  // namespace

std::size_t Layer::param_count() {
    std::size_t n = 0;
    for (const auto& p : params()) n += p.value->size();
    return n;
}

// ---------------------------------------------------------------------------
// Functional kernels

Tensor conv1d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    expect_rank(input, 3, "conv1d");
    expect_rank(weights, 3, "conv1d weights");
    const std::size_t B = input.dim(0), L = input.dim(1), C = input.dim(2);
    const std::size_t K = weights.dim(0), F = weights.dim(2);
    if (weights.dim(1) != C) {
        throw ShapeError("conv1d: input has " + std::to_string(C) + " channels, kernel expects " +
                         std::to_string(weights.dim(1)));
    }
    if (bias.size() != F) throw ShapeError("conv1d: bias length mismatch");
    Tensor out({B, L, F});
    if (B == 0) return out;
    const RowMatrix patches = im2col(input, K);
    auto o = as_matrix(out.data(), B * L, F);
    o.noalias() = patches * as_matrix(weights.data(), K * C, F);
    o.rowwise() += as_row(bias.data(), F);
    return out;
}

Conv1DGrads conv1d_backward(const Tensor& grad_output, const Tensor& input,
                            const Tensor& weights) {
    const std::size_t B = input.dim(0), L = input.dim(1), C = input.dim(2);
    const std::size_t K = weights.dim(0), F = weights.dim(2);
    if (grad_output.shape() != Shape{B, L, F}) {
        throw ShapeError("conv1d backward: gradient shape " + shape_string(grad_output.shape()) +
                         " does not match forward output");
    }
    Conv1DGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({F})};
    if (B == 0) return g;
    const RowMatrix patches = im2col(input, K);
    const auto go = as_matrix(grad_output.data(), B * L, F);
    as_matrix(g.weights.data(), K * C, F).noalias() = patches.transpose() * go;
    as_row(g.bias.data(), F) = go.colwise().sum();
    const RowMatrix dpatches = go * as_matrix(weights.data(), K * C, F).transpose();

    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((K - 1) / 2);
    Real* dx = g.input.data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < L; ++t) {
            const Real* row = dpatches.data() + (b * L + t) * K * C;
            for (std::size_t k = 0; k < K; ++k) {
                const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + k) - pad;
                if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
                Real* dst = dx + (b * L + static_cast<std::size_t>(s)) * C;
                for (std::size_t c = 0; c < C; ++c) dst[c] += row[k * C + c];
            }
        }
    }
    return g;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    expect_rank(input, 2, "dense");
    const std::size_t B = input.dim(0), D = input.dim(1), U = weights.dim(1);
    if (weights.dim(0) != D) {
        throw ShapeError("dense: input width " + std::to_string(D) + " vs weights " +
                         shape_string(weights.shape()));
    }
    if (bias.size() != U) throw ShapeError("dense: bias length mismatch");
    Tensor out({B, U});
    if (B == 0) return out;
    auto o = as_matrix(out.data(), B, U);
    o.noalias() = as_matrix(input.data(), B, D) * as_matrix(weights.data(), D, U);
    o.rowwise() += as_row(bias.data(), U);
    return out;
}

DenseGrads dense_backward(const Tensor& grad_output, const Tensor& input, const Tensor& weights) {
    const std::size_t B = input.dim(0), D = input.dim(1), U = weights.dim(1);
    if (grad_output.shape() != Shape{B, U}) throw ShapeError("dense backward: gradient shape mismatch");
    DenseGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({U})};
    if (B == 0) return g;
    const auto go = as_matrix(grad_output.data(), B, U);
    as_matrix(g.weights.data(), D, U).noalias() = as_matrix(input.data(), B, D).transpose() * go;
    as_row(g.bias.data(), U) = go.colwise().sum();
    as_matrix(g.input.data(), B, D).noalias() = go * as_matrix(weights.data(), D, U).transpose();
    return g;
}

PoolResult maxpool1d_forward(const Tensor& input, std::size_t pool) {
    expect_rank(input, 3, "maxpool1d");
    if (pool == 0) throw ConfigError("pool size must be positive");
    const std::size_t B = input.dim(0), L = input.dim(1), C = input.dim(2);
    const std::size_t out_len = (L + pool - 1) / pool;
    PoolResult r{Tensor({B, out_len, C}), std::vector<std::size_t>(B * out_len * C)};
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t w = 0; w < out_len; ++w) {
            const std::size_t begin = w * pool, end = std::min(L, begin + pool);
            for (std::size_t c = 0; c < C; ++c) {
                std::size_t best = (b * L + begin) * C + c;
                for (std::size_t t = begin + 1; t < end; ++t) {
                    const std::size_t idx = (b * L + t) * C + c;
                    if (input[idx] > input[best]) best = idx;
                }
                const std::size_t o = (b * out_len + w) * C + c;
                r.output[o] = input[best];
                r.argmax[o] = best;
            }
        }
    }
    return r;
}

Tensor maxpool1d_backward(const Tensor& grad_output, const Shape& input_shape,
                          const std::vector<std::size_t>& argmax) {
    if (grad_output.size() != argmax.size()) throw ShapeError("maxpool backward: gradient shape mismatch");
    Tensor dx(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += grad_output[i];
    return dx;
}

// ---------------------------------------------------------------------------
// Conv1D

Conv1D::Conv1D(const LayerSpec& spec, std::size_t in_channels, std::uint64_t seed)
    : Layer(spec),
      in_channels_(in_channels),
      w_({spec.kernel, in_channels, spec.filters}),
      b_({spec.filters}),
      dw_(w_.shape()),
      db_(b_.shape()) {
    init_uniform(w_, init_limit(spec.init, spec.kernel * in_channels, spec.kernel * spec.filters),
                 seed);
}

Shape Conv1D::output_shape(const Shape& in) const {
    if (in.size() != 2 || in[1] != in_channels_) {
        throw ShapeError("Conv1D expects (length, " + std::to_string(in_channels_) + "), got " +
                         shape_string(in));
    }
    return {in[0], spec_.filters};
}

Tensor Conv1D::forward(const Tensor& input, Mode) {
    input_ = input;
    return conv1d_forward(input, w_, b_);
}

Tensor Conv1D::backward(const Tensor& grad_output) {
    auto g = conv1d_backward(grad_output, input_, w_);
    dw_ = std::move(g.weights);
    db_ = std::move(g.bias);
    return std::move(g.input);
}

std::vector<Param> Conv1D::params() { return {{"kernel", &w_, &dw_}, {"bias", &b_, &db_}}; }

// ---------------------------------------------------------------------------
// MaxPool1D

Shape MaxPool1D::output_shape(const Shape& in) const {
    if (in.size() != 2) throw ShapeError("MaxPool1D expects (length, channels), got " + shape_string(in));
    return {(in[0] + spec_.pool - 1) / spec_.pool, in[1]};
}

Tensor MaxPool1D::forward(const Tensor& input, Mode) {
    input_shape_ = input.shape();
    auto r = maxpool1d_forward(input, spec_.pool);
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
}

Tensor MaxPool1D::backward(const Tensor& grad_output) {
    return maxpool1d_backward(grad_output, input_shape_, argmax_);
}

// ---------------------------------------------------------------------------
// LSTM

LSTM::LSTM(const LayerSpec& spec, std::size_t in_features, std::uint64_t seed)
    : Layer(spec),
      in_features_(in_features),
      units_(spec.units),
      w_({in_features, 4 * spec.units}),
      r_({spec.units, 4 * spec.units}),
      b_({4 * spec.units}),
      dw_(w_.shape()),
      dr_(r_.shape()),
      db_(b_.shape()) {
    init_uniform(w_, init_limit(Init::GlorotUniform, in_features, 4 * units_),
                 derive_seed(seed, "kernel"));
    init_uniform(r_, init_limit(Init::GlorotUniform, units_, 4 * units_),
                 derive_seed(seed, "recurrent"));
    for (std::size_t u = 0; u < units_; ++u) b_[units_ + u] = Real(1);  // forget gate
}

Shape LSTM::output_shape(const Shape& in) const {
    if (in.size() != 2 || in[1] != in_features_) {
        throw ShapeError("LSTM expects (steps, " + std::to_string(in_features_) + "), got " +
                         shape_string(in));
    }
    if (spec_.return_sequences) return {in[0], units_};
    return {units_};
}

Tensor LSTM::forward(const Tensor& input, Mode) {
    expect_rank(input, 3, "LSTM");
    const std::size_t B = input.dim(0), T = input.dim(1), F = input.dim(2), U = units_;
    if (F != in_features_) throw ShapeError("LSTM: feature width mismatch");
    if (T == 0) throw ShapeError("LSTM: at least one step required");
    batch_ = B;
    steps_ = T;

    x_tm_ = Tensor({T, B, F});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < T; ++t) {
            std::copy_n(input.data() + (b * T + t) * F, F, x_tm_.data() + (t * B + b) * F);
        }
    }
    gates_ = Tensor({T, B, 4 * U});
    cells_ = Tensor({T, B, U});
    cell_tanh_ = Tensor({T, B, U});
    hidden_ = Tensor({T, B, U});
    if (B == 0) return spec_.return_sequences ? Tensor({0, T, U}) : Tensor({0, U});

    auto z_all = as_matrix(gates_.data(), T * B, 4 * U);
    z_all.noalias() = as_matrix(x_tm_.data(), T * B, F) * as_matrix(w_.data(), F, 4 * U);
    z_all.rowwise() += as_row(b_.data(), 4 * U);
    const auto R = as_matrix(r_.data(), U, 4 * U);

    for (std::size_t t = 0; t < T; ++t) {
        auto z = as_matrix(gates_.data() + t * B * 4 * U, B, 4 * U);
        if (t > 0) z.noalias() += as_matrix(hidden_.data() + (t - 1) * B * U, B, U) * R;
        for (std::size_t b = 0; b < B; ++b) {
            Real* g = z.data() + b * 4 * U;
            const Real* c_prev = t > 0 ? cells_.data() + ((t - 1) * B + b) * U : nullptr;
            Real* c = cells_.data() + (t * B + b) * U;
            Real* tc = cell_tanh_.data() + (t * B + b) * U;
            Real* h = hidden_.data() + (t * B + b) * U;
            for (std::size_t u = 0; u < U; ++u) {
                const Real i = sigmoid(g[u]);
                const Real f = sigmoid(g[U + u]);
                const Real cand = std::tanh(g[2 * U + u]);
                const Real o = sigmoid(g[3 * U + u]);
                g[u] = i;
                g[U + u] = f;
                g[2 * U + u] = cand;
                g[3 * U + u] = o;
                c[u] = (c_prev ? f * c_prev[u] : Real(0)) + i * cand;
                tc[u] = std::tanh(c[u]);
                h[u] = o * tc[u];
            }
        }
    }

    if (!spec_.return_sequences) {
        Tensor out({B, U});
        std::copy_n(hidden_.data() + (T - 1) * B * U, B * U, out.data());
        return out;
    }
    Tensor out({B, T, U});
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t b = 0; b < B; ++b) {
            std::copy_n(hidden_.data() + (t * B + b) * U, U, out.data() + (b * T + t) * U);
        }
    }
    return out;
}

Tensor LSTM::backward(const Tensor& grad_output) {
    const std::size_t B = batch_, T = steps_, F = in_features_, U = units_;
    const Shape expected = spec_.return_sequences ? Shape{B, T, U} : Shape{B, U};
    if (grad_output.shape() != expected) throw ShapeError("LSTM backward: gradient shape mismatch");

    Tensor dz({T, B, 4 * U});
    RowMatrix dh_next = RowMatrix::Zero(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(U));
    std::vector<Real> dc_next(B * U, Real(0));
    const auto R = as_matrix(r_.data(), U, 4 * U);
    auto dR = as_matrix(dr_.data(), U, 4 * U);
    dR.setZero();

    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t b = 0; b < B; ++b) {
            const Real* g = gates_.data() + (t * B + b) * 4 * U;
            const Real* tc = cell_tanh_.data() + (t * B + b) * U;
            const Real* c_prev = t > 0 ? cells_.data() + ((t - 1) * B + b) * U : nullptr;
            Real* d = dz.data() + (t * B + b) * 4 * U;
            Real* dcn = dc_next.data() + b * U;
            for (std::size_t u = 0; u < U; ++u) {
                Real dh = dh_next(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(u));
                if (spec_.return_sequences) {
                    dh += grad_output[(b * T + t) * U + u];
                } else if (t == T - 1) {
                    dh += grad_output[b * U + u];
                }
                const Real i = g[u], f = g[U + u], cand = g[2 * U + u], o = g[3 * U + u];
                const Real dc = dh * o * (Real(1) - tc[u] * tc[u]) + dcn[u];
                d[u] = dc * cand * i * (Real(1) - i);
                d[U + u] = c_prev ? dc * c_prev[u] * f * (Real(1) - f) : Real(0);
                d[2 * U + u] = dc * i * (Real(1) - cand * cand);
                d[3 * U + u] = dh * tc[u] * o * (Real(1) - o);
                dcn[u] = dc * f;
            }
        }
        const auto dz_t = as_matrix(dz.data() + t * B * 4 * U, B, 4 * U);
        if (t > 0) dR.noalias() += as_matrix(hidden_.data() + (t - 1) * B * U, B, U).transpose() * dz_t;
        dh_next.noalias() = dz_t * R.transpose();
    }

    const auto dz_all = as_matrix(dz.data(), T * B, 4 * U);
    as_matrix(dw_.data(), F, 4 * U).noalias() =
        as_matrix(x_tm_.data(), T * B, F).transpose() * dz_all;
    as_row(db_.data(), 4 * U) = dz_all.colwise().sum();
    RowMatrix dx_tm = dz_all * as_matrix(w_.data(), F, 4 * U).transpose();

    Tensor dx({B, T, F});
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t b = 0; b < B; ++b) {
            std::copy_n(dx_tm.data() + (t * B + b) * F, F, dx.data() + (b * T + t) * F);
        }
    }
    return dx;
}

std::vector<Param> LSTM::params() {
    return {{"kernel", &w_, &dw_}, {"recurrent_kernel", &r_, &dr_}, {"bias", &b_, &db_}};
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(const LayerSpec& spec, std::size_t in_features, std::uint64_t seed)
    : Layer(spec),
      in_features_(in_features),
      w_({in_features, spec.units}),
      b_({spec.units}),
      dw_(w_.shape()),
      db_(b_.shape()) {
    init_uniform(w_, init_limit(spec.init, in_features, spec.units), seed);
}

Shape Dense::output_shape(const Shape& in) const {
    if (in.size() != 1 || in[0] != in_features_) {
        throw ShapeError("Dense expects (" + std::to_string(in_features_) + "), got " +
                         shape_string(in));
    }
    return {spec_.units};
}

Tensor Dense::forward(const Tensor& input, Mode) {
    input_ = input;
    return dense_forward(input, w_, b_);
}

Tensor Dense::backward(const Tensor& grad_output) {
    auto g = dense_backward(grad_output, input_, w_);
    dw_ = std::move(g.weights);
    db_ = std::move(g.bias);
    return std::move(g.input);
}

std::vector<Param> Dense::params() { return {{"kernel", &w_, &dw_}, {"bias", &b_, &db_}}; }

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(const LayerSpec& spec, std::size_t features)
    : Layer(spec),
      features_(features),
      gamma_({features}, Real(1)),
      beta_({features}),
      dgamma_({features}),
      dbeta_({features}),
      running_mean_({features}),
      running_var_({features}, Real(1)) {}

Shape BatchNorm::output_shape(const Shape& in) const {
    const std::size_t rank = spec_.kind == LayerKind::SpatialBatchNorm ? 2 : 1;
    if (in.size() != rank || in.back() != features_) {
        throw ShapeError(to_string(spec_.kind) + " got incompatible input " + shape_string(in));
    }
    return in;
}

Tensor BatchNorm::forward(const Tensor& input, Mode mode) {
    const std::size_t rank = spec_.kind == LayerKind::SpatialBatchNorm ? 3 : 2;
    expect_rank(input, rank, "batchnorm");
    const std::size_t D = features_;
    if (input.shape().back() != D) throw ShapeError("batchnorm: feature width mismatch");
    const std::size_t rows = input.size() / D;
    last_mode_ = mode;
    xhat_ = Tensor(input.shape());
    inv_std_.assign(D, Real(0));
    Tensor out(input.shape());

    if (mode == Mode::Train) {
        if (input.dim(0) < 2) throw ShapeError("batchnorm: training needs a batch of at least 2");
        std::vector<double> mean(D, 0.0), var(D, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < D; ++d) mean[d] += input[r * D + d];
        }
        for (auto& m : mean) m /= static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < D; ++d) {
                const double c = input[r * D + d] - mean[d];
                var[d] += c * c;
            }
        }
        for (auto& v : var) v /= static_cast<double>(rows);
        const double mom = spec_.momentum;
        const double unbias = static_cast<double>(rows) / static_cast<double>(rows - 1);
        for (std::size_t d = 0; d < D; ++d) {
            inv_std_[d] = static_cast<Real>(1.0 / std::sqrt(var[d] + spec_.epsilon));
            running_mean_[d] = static_cast<Real>(mom * running_mean_[d] + (1.0 - mom) * mean[d]);
            running_var_[d] =
                static_cast<Real>(mom * running_var_[d] + (1.0 - mom) * var[d] * unbias);
        }
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < D; ++d) {
                const std::size_t i = r * D + d;
                xhat_[i] = static_cast<Real>((input[i] - mean[d]) * inv_std_[d]);
                out[i] = gamma_[d] * xhat_[i] + beta_[d];
            }
        }
    } else {
        for (std::size_t d = 0; d < D; ++d) {
            inv_std_[d] = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(running_var_[d]) +
                                                            spec_.epsilon));
        }
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < D; ++d) {
                const std::size_t i = r * D + d;
                xhat_[i] = (input[i] - running_mean_[d]) * inv_std_[d];
                out[i] = gamma_[d] * xhat_[i] + beta_[d];
            }
        }
    }
    return out;
}

Tensor BatchNorm::backward(const Tensor& grad_output) {
    if (grad_output.shape() != xhat_.shape()) throw ShapeError("batchnorm backward: gradient shape mismatch");
    const std::size_t D = features_;
    const std::size_t rows = grad_output.size() / D;
    std::vector<double> sum_g(D, 0.0), sum_gx(D, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t d = 0; d < D; ++d) {
            const std::size_t i = r * D + d;
            sum_g[d] += grad_output[i];
            sum_gx[d] += static_cast<double>(grad_output[i]) * xhat_[i];
        }
    }
    for (std::size_t d = 0; d < D; ++d) {
        dgamma_[d] = static_cast<Real>(sum_gx[d]);
        dbeta_[d] = static_cast<Real>(sum_g[d]);
    }
    Tensor dx(grad_output.shape());
    if (last_mode_ == Mode::Train) {
        const double n = static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < D; ++d) {
                const std::size_t i = r * D + d;
                const double gx = gamma_[d] * inv_std_[d] / n;
                dx[i] = static_cast<Real>(
                    gx * (n * grad_output[i] - sum_g[d] - xhat_[i] * sum_gx[d]));
            }
        }
    } else {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < D; ++d) {
                const std::size_t i = r * D + d;
                dx[i] = grad_output[i] * gamma_[d] * inv_std_[d];
            }
        }
    }
    return dx;
}

std::vector<Param> BatchNorm::params() {
    return {{"gamma", &gamma_, &dgamma_}, {"beta", &beta_, &dbeta_}};
}

std::vector<StateTensor> BatchNorm::state() {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(const LayerSpec& spec, std::uint64_t seed) : Layer(spec), rng_(seed) {}

Tensor Dropout::forward(const Tensor& input, Mode mode) {
    last_mode_ = mode;
    if (mode == Mode::Infer || spec_.rate == 0.0) {
        mask_.clear();
        return input;
    }
    const Real keep_scale = static_cast<Real>(1.0 / (1.0 - spec_.rate));
    mask_.resize(input.size());
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        mask_[i] = rng_.uniform() < spec_.rate ? Real(0) : keep_scale;
        out[i] = input[i] * mask_[i];
    }
    return out;
}

Tensor Dropout::backward(const Tensor& grad_output) {
    if (mask_.empty()) return grad_output;
    if (mask_.size() != grad_output.size()) throw ShapeError("dropout backward: gradient shape mismatch");
    Tensor dx(grad_output.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_output[i] * mask_[i];
    return dx;
}

// ---------------------------------------------------------------------------
// Activations and reshapes

Tensor ReLU::forward(const Tensor& input, Mode) {
    input_ = input;
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0 ? input[i] : Real(0);
    return out;
}

Tensor ReLU::backward(const Tensor& grad_output) {
    Tensor dx(grad_output.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = input_[i] > 0 ? grad_output[i] : Real(0);
    return dx;
}

Tensor Sigmoid::forward(const Tensor& input, Mode) {
    output_ = Tensor(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) output_[i] = sigmoid(input[i]);
    return output_;
}

Tensor Sigmoid::backward(const Tensor& grad_output) {
    Tensor dx(grad_output.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) {
        dx[i] = grad_output[i] * output_[i] * (Real(1) - output_[i]);
    }
    return dx;
}

Tensor Softmax::forward(const Tensor& input, Mode) {
    expect_rank(input, 2, "softmax");
    const std::size_t B = input.dim(0), K = input.dim(1);
    output_ = Tensor(input.shape());
    for (std::size_t b = 0; b < B; ++b) {
        const Real* x = input.data() + b * K;
        Real* y = output_.data() + b * K;
        const Real mx = *std::max_element(x, x + K);
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            y[k] = std::exp(x[k] - mx);
            sum += y[k];
        }
        for (std::size_t k = 0; k < K; ++k) y[k] = static_cast<Real>(y[k] / sum);
    }
    return output_;
}

Tensor Softmax::backward(const Tensor& grad_output) {
    const std::size_t B = output_.dim(0), K = output_.dim(1);
    Tensor dx(output_.shape());
    for (std::size_t b = 0; b < B; ++b) {
        const Real* y = output_.data() + b * K;
        const Real* g = grad_output.data() + b * K;
        double dot = 0.0;
        for (std::size_t k = 0; k < K; ++k) dot += static_cast<double>(g[k]) * y[k];
        for (std::size_t k = 0; k < K; ++k) dx[b * K + k] = static_cast<Real>(y[k] * (g[k] - dot));
    }
    return dx;
}

Shape Flatten::output_shape(const Shape& in) const { return {element_count(in)}; }

Tensor Flatten::forward(const Tensor& input, Mode) {
    input_shape_ = input.shape();
    return input.reshaped({input.dim(0), input.row_size()});
}

Tensor Flatten::backward(const Tensor& grad_output) { return grad_output.reshaped(input_shape_); }

// ---------------------------------------------------------------------------

Shape infer_output_shape(const LayerSpec& spec, const Shape& in) {
    spec.validate();
    auto need_rank = [&](std::size_t r) {
        if (in.size() != r) {
            throw ShapeError(to_string(spec.kind) + " cannot follow a layer producing " +
                             shape_string(in));
        }
    };
    switch (spec.kind) {
        case LayerKind::Conv1D:
            need_rank(2);
            return {in[0], spec.filters};
        case LayerKind::MaxPool1D:
            need_rank(2);
            return {(in[0] + spec.pool - 1) / spec.pool, in[1]};
        case LayerKind::LSTM:
            need_rank(2);
            if (spec.return_sequences) return {in[0], spec.units};
            return {spec.units};
        case LayerKind::Dense:
            need_rank(1);
            return {spec.units};
        case LayerKind::BatchNorm:
        case LayerKind::Softmax:
            need_rank(1);
            return in;
        case LayerKind::SpatialBatchNorm:
            need_rank(2);
            return in;
        case LayerKind::Flatten:
            return {element_count(in)};
        default:
            return in;
    }
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& in, std::uint64_t seed) {
    spec.validate();
    auto need_rank = [&](std::size_t r) {
        if (in.size() != r) {
            throw ShapeError(to_string(spec.kind) + " cannot follow a layer producing " +
                             shape_string(in));
        }
    };
    std::unique_ptr<Layer> layer;
    switch (spec.kind) {
        case LayerKind::Conv1D:
            need_rank(2);
            layer = std::make_unique<Conv1D>(spec, in[1], seed);
            break;
        case LayerKind::MaxPool1D:
            need_rank(2);
            layer = std::make_unique<MaxPool1D>(spec);
            break;
        case LayerKind::LSTM:
            need_rank(2);
            layer = std::make_unique<LSTM>(spec, in[1], seed);
            break;
        case LayerKind::Dense:
            need_rank(1);
            layer = std::make_unique<Dense>(spec, in[0], seed);
            break;
        case LayerKind::BatchNorm:
            need_rank(1);
            layer = std::make_unique<BatchNorm>(spec, in[0]);
            break;
        case LayerKind::SpatialBatchNorm:
            need_rank(2);
            layer = std::make_unique<BatchNorm>(spec, in[1]);
            break;
        case LayerKind::Dropout:
            layer = std::make_unique<Dropout>(spec, seed);
            break;
        case LayerKind::ReLU:
            layer = std::make_unique<ReLU>();
            break;
        case LayerKind::Sigmoid:
            layer = std::make_unique<Sigmoid>();
            break;
        case LayerKind::Softmax:
            need_rank(1);
            layer = std::make_unique<Softmax>();
            break;
        case LayerKind::Flatten:
            layer = std::make_unique<Flatten>();
            break;
    }
    layer->output_shape(in);  // validates compatibility
    return layer;
}

DEEPMAL_NN_END
