#ifndef MIXNET_NN_HPP
#define MIXNET_NN_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mixnet/archive.hpp"
#include "mixnet/common.hpp"

namespace mixnet::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

// NCHW tensor of doubles.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    size_t size() const { return v.size(); }
    int plane() const { return h * w; }
    int sample_size() const { return c * h * w; }

    double& at(int in_, int ic, int iy, int ix) {
        return v[((static_cast<size_t>(in_) * c + ic) * h + iy) * w + ix];
    }
    double at(int in_, int ic, int iy, int ix) const {
        return v[((static_cast<size_t>(in_) * c + ic) * h + iy) * w + ix];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const { return strf("(%d,%d,%d,%d)", n, c, h, w); }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

struct ParamView {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    size_t count = 0;
    bool trainable = true;  // false for batch-norm running statistics
};

class Layer {
  public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    virtual Tensor forward(const std::vector<const Tensor*>& in, bool train) = 0;
    virtual std::vector<Tensor> backward(const Tensor& grad_out) = 0;
    virtual std::vector<ParamView> params() { return {}; }
};

// --- convolution ---

class Conv2d : public Layer {
  public:
    Conv2d(int in_c, int out_c, int k, int stride, int pad, Rng& rng, bool bias = true)
        : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad), has_bias_(bias) {
        weight_.resize(static_cast<size_t>(out_c) * in_c * k * k);
        wgrad_.assign(weight_.size(), 0.0);
        const double std = std::sqrt(2.0 / (in_c * k * k));
        for (auto& w : weight_) w = rng.normal() * std;
        if (has_bias_) {
            bias_.assign(out_c, 0.0);
            bgrad_.assign(out_c, 0.0);
        }
    }

    std::string kind() const override { return "conv2d"; }

    Tensor forward(const std::vector<const Tensor*>& in, bool train) override {
        const Tensor& x = *in.at(0);
        if (x.c != in_c_)
            throw std::invalid_argument(strf("conv2d: expected %d input channels, got %d", in_c_, x.c));
        out_h_ = (x.h + 2 * pad_ - k_) / stride_ + 1;
        out_w_ = (x.w + 2 * pad_ - k_) / stride_ + 1;
        in_h_ = x.h;
        in_w_ = x.w;
        n_ = x.n;
        Tensor y(x.n, out_c_, out_h_, out_w_);
        const int cols = out_h_ * out_w_;
        const int rows = in_c_ * k_ * k_;
        if (train) cols_.assign(static_cast<size_t>(x.n) * rows * cols, 0.0);
        std::vector<double> colbuf(static_cast<size_t>(rows) * cols);
        CMapMat W(weight_.data(), out_c_, rows);
        for (int s = 0; s < x.n; ++s) {
            double* col = train ? cols_.data() + static_cast<size_t>(s) * rows * cols
                                : colbuf.data();
            im2col(x, s, col);
            MapMat Y(y.v.data() + static_cast<size_t>(s) * out_c_ * cols, out_c_, cols);
            CMapMat C(col, rows, cols);
            Y.noalias() = W * C;
            if (has_bias_)
                for (int oc = 0; oc < out_c_; ++oc) Y.row(oc).array() += bias_[oc];
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& gy) override {
        if (cols_.empty()) throw std::runtime_error("conv2d: backward before training forward");
        const int cols = out_h_ * out_w_;
        const int rows = in_c_ * k_ * k_;
        Tensor gx(n_, in_c_, in_h_, in_w_);
        MapMat dW(wgrad_.data(), out_c_, rows);
        CMapMat W(weight_.data(), out_c_, rows);
        std::vector<double> dcol(static_cast<size_t>(rows) * cols);
        for (int s = 0; s < n_; ++s) {
            CMapMat dY(gy.v.data() + static_cast<size_t>(s) * out_c_ * cols, out_c_, cols);
            CMapMat C(cols_.data() + static_cast<size_t>(s) * rows * cols, rows, cols);
            dW.noalias() += dY * C.transpose();
            if (has_bias_)
                for (int oc = 0; oc < out_c_; ++oc) bgrad_[oc] += dY.row(oc).sum();
            MapMat DC(dcol.data(), rows, cols);
            DC.noalias() = W.transpose() * dY;
            col2im(dcol.data(), gx, s);
        }
        return {std::move(gx)};
    }

    std::vector<ParamView> params() override {
        std::vector<ParamView> p;
        p.push_back({"weight", weight_.data(), wgrad_.data(), weight_.size(), true});
        if (has_bias_) p.push_back({"bias", bias_.data(), bgrad_.data(), bias_.size(), true});
        return p;
    }

  private:
    void im2col(const Tensor& x, int s, double* col) const {
        const int cols = out_h_ * out_w_;
        for (int ic = 0; ic < in_c_; ++ic)
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx) {
                    double* dst = col + (static_cast<size_t>(ic) * k_ * k_ + ky * k_ + kx) * cols;
                    for (int oy = 0; oy < out_h_; ++oy) {
                        int iy = oy * stride_ + ky - pad_;
                        for (int ox = 0; ox < out_w_; ++ox) {
                            int ix = ox * stride_ + kx - pad_;
                            dst[oy * out_w_ + ox] =
                                (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                                    ? x.at(s, ic, iy, ix)
                                    : 0.0;
                        }
                    }
                }
    }

    void col2im(const double* dcol, Tensor& gx, int s) const {
        const int cols = out_h_ * out_w_;
        for (int ic = 0; ic < in_c_; ++ic)
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx) {
                    const double* src = dcol + (static_cast<size_t>(ic) * k_ * k_ + ky * k_ + kx) * cols;
                    for (int oy = 0; oy < out_h_; ++oy) {
                        int iy = oy * stride_ + ky - pad_;
                        if (iy < 0 || iy >= gx.h) continue;
                        for (int ox = 0; ox < out_w_; ++ox) {
                            int ix = ox * stride_ + kx - pad_;
                            if (ix < 0 || ix >= gx.w) continue;
                            gx.at(s, ic, iy, ix) += src[oy * out_w_ + ox];
                        }
                    }
                }
    }

    int in_c_, out_c_, k_, stride_, pad_;
    bool has_bias_;
    int n_ = 0, in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
    std::vector<double> weight_, wgrad_, bias_, bgrad_;
    std::vector<double> cols_;  // cached im2col buffers (train mode)
};

// --- batch normalization ---

class BatchNorm2d : public Layer {
  public:
    explicit BatchNorm2d(int channels, double eps = 1e-5, double momentum = 0.1)
        : c_(channels), eps_(eps), momentum_(momentum) {
        gamma_.assign(c_, 1.0);
        beta_.assign(c_, 0.0);
        ggrad_.assign(c_, 0.0);
        bgrad_.assign(c_, 0.0);
        running_mean_.assign(c_, 0.0);
        running_var_.assign(c_, 1.0);
        dummy_grad_.assign(c_, 0.0);
    }

    std::string kind() const override { return "batchnorm2d"; }

    Tensor forward(const std::vector<const Tensor*>& in, bool train) override {
        const Tensor& x = *in.at(0);
        if (x.c != c_) throw std::invalid_argument("batchnorm2d: channel mismatch");
        Tensor y(x.n, x.c, x.h, x.w);
        const size_t m = static_cast<size_t>(x.n) * x.h * x.w;
        train_ = train;
        if (train) {
            xhat_ = Tensor(x.n, x.c, x.h, x.w);
            invstd_.assign(c_, 0.0);
            for (int ch = 0; ch < c_; ++ch) {
                double mean = 0.0;
                for (int s = 0; s < x.n; ++s)
                    for (int i = 0; i < x.plane(); ++i)
                        mean += x.v[(static_cast<size_t>(s) * c_ + ch) * x.plane() + i];
                mean /= static_cast<double>(m);
                double var = 0.0;
                for (int s = 0; s < x.n; ++s)
                    for (int i = 0; i < x.plane(); ++i) {
                        double d = x.v[(static_cast<size_t>(s) * c_ + ch) * x.plane() + i] - mean;
                        var += d * d;
                    }
                var /= static_cast<double>(m);
                double istd = 1.0 / std::sqrt(var + eps_);
                invstd_[ch] = istd;
                for (int s = 0; s < x.n; ++s)
                    for (int i = 0; i < x.plane(); ++i) {
                        size_t idx = (static_cast<size_t>(s) * c_ + ch) * x.plane() + i;
                        double xh = (x.v[idx] - mean) * istd;
                        xhat_.v[idx] = xh;
                        y.v[idx] = gamma_[ch] * xh + beta_[ch];
                    }
                running_mean_[ch] = (1 - momentum_) * running_mean_[ch] + momentum_ * mean;
                running_var_[ch] = (1 - momentum_) * running_var_[ch] + momentum_ * var;
            }
        } else {
            for (int ch = 0; ch < c_; ++ch) {
                double istd = 1.0 / std::sqrt(running_var_[ch] + eps_);
                double mean = running_mean_[ch];
                for (int s = 0; s < x.n; ++s)
                    for (int i = 0; i < x.plane(); ++i) {
                        size_t idx = (static_cast<size_t>(s) * c_ + ch) * x.plane() + i;
                        y.v[idx] = gamma_[ch] * (x.v[idx] - mean) * istd + beta_[ch];
                    }
            }
            eval_invstd_ = true;
        }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& gy) override {
        if (!train_) throw std::runtime_error("batchnorm2d: backward requires training forward");
        Tensor gx(gy.n, gy.c, gy.h, gy.w);
        const size_t m = static_cast<size_t>(gy.n) * gy.h * gy.w;
        for (int ch = 0; ch < c_; ++ch) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int s = 0; s < gy.n; ++s)
                for (int i = 0; i < gy.plane(); ++i) {
                    size_t idx = (static_cast<size_t>(s) * c_ + ch) * gy.plane() + i;
                    sum_dy += gy.v[idx];
                    sum_dy_xhat += gy.v[idx] * xhat_.v[idx];
                }
            ggrad_[ch] += sum_dy_xhat;
            bgrad_[ch] += sum_dy;
            double scale = gamma_[ch] * invstd_[ch];
            for (int s = 0; s < gy.n; ++s)
                for (int i = 0; i < gy.plane(); ++i) {
                    size_t idx = (static_cast<size_t>(s) * c_ + ch) * gy.plane() + i;
                    gx.v[idx] = scale * (gy.v[idx] - sum_dy / m - xhat_.v[idx] * sum_dy_xhat / m);
                }
        }
        return {std::move(gx)};
    }

    std::vector<ParamView> params() override {
        return {{"gamma", gamma_.data(), ggrad_.data(), gamma_.size(), true},
                {"beta", beta_.data(), bgrad_.data(), beta_.size(), true},
                {"running_mean", running_mean_.data(), dummy_grad_.data(), running_mean_.size(), false},
                {"running_var", running_var_.data(), dummy_grad_.data(), running_var_.size(), false}};
    }

  private:
    int c_;
    double eps_, momentum_;
    bool train_ = false, eval_invstd_ = false;
    std::vector<double> gamma_, beta_, ggrad_, bgrad_, running_mean_, running_var_, invstd_,
        dummy_grad_;
    Tensor xhat_;
};

// --- activations and pooling ---

class ReLU : public Layer {
  public:
    std::string kind() const override { return "relu"; }
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in.at(0);
        mask_.assign(x.size(), 0);
        Tensor y = x;
        for (size_t i = 0; i < y.size(); ++i) {
            if (y.v[i] > 0)
                mask_[i] = 1;
            else
                y.v[i] = 0.0;
        }
        return y;
    }
    std::vector<Tensor> backward(const Tensor& gy) override {
        Tensor gx = gy;
        for (size_t i = 0; i < gx.size(); ++i)
            if (!mask_[i]) gx.v[i] = 0.0;
        return {std::move(gx)};
    }

  private:
    std::vector<unsigned char> mask_;
};

class MaxPool2d : public Layer {
  public:
    MaxPool2d(int k, int stride, int pad = 0) : k_(k), stride_(stride), pad_(pad) {}
    std::string kind() const override { return "maxpool2d"; }

    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in.at(0);
        in_shape_ = {x.n, x.c, x.h, x.w};
        int oh = (x.h + 2 * pad_ - k_) / stride_ + 1;
        int ow = (x.w + 2 * pad_ - k_) / stride_ + 1;
        Tensor y(x.n, x.c, oh, ow);
        argmax_.assign(y.size(), 0);
        for (int s = 0; s < x.n; ++s)
            for (int ch = 0; ch < x.c; ++ch)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        double best = -std::numeric_limits<double>::infinity();
                        size_t best_idx = 0;
                        for (int ky = 0; ky < k_; ++ky)
                            for (int kx = 0; kx < k_; ++kx) {
                                int iy = oy * stride_ + ky - pad_;
                                int ix = ox * stride_ + kx - pad_;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                double v = x.at(s, ch, iy, ix);
                                if (v > best) {
                                    best = v;
                                    best_idx = ((static_cast<size_t>(s) * x.c + ch) * x.h + iy) * x.w + ix;
                                }
                            }
                        y.at(s, ch, oy, ox) = best;
                        argmax_[((static_cast<size_t>(s) * x.c + ch) * oh + oy) * ow + ox] = best_idx;
                    }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& gy) override {
        Tensor gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        for (size_t i = 0; i < gy.size(); ++i) gx.v[argmax_[i]] += gy.v[i];
        return {std::move(gx)};
    }

  private:
    int k_, stride_, pad_;
    std::array<int, 4> in_shape_{};
    std::vector<size_t> argmax_;
};

class AvgPool2d : public Layer {
  public:
    AvgPool2d(int k, int stride) : k_(k), stride_(stride) {}
    std::string kind() const override { return "avgpool2d"; }

    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in.at(0);
        in_shape_ = {x.n, x.c, x.h, x.w};
        int oh = (x.h - k_) / stride_ + 1;
        int ow = (x.w - k_) / stride_ + 1;
        Tensor y(x.n, x.c, oh, ow);
        const double inv = 1.0 / (k_ * k_);
        for (int s = 0; s < x.n; ++s)
            for (int ch = 0; ch < x.c; ++ch)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        double sum = 0.0;
                        for (int ky = 0; ky < k_; ++ky)
                            for (int kx = 0; kx < k_; ++kx)
                                sum += x.at(s, ch, oy * stride_ + ky, ox * stride_ + kx);
                        y.at(s, ch, oy, ox) = sum * inv;
                    }
        return y;
    }

    std::vector<Tensor> backward(const Tensor& gy) override {
        Tensor gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        const double inv = 1.0 / (k_ * k_);
        for (int s = 0; s < gy.n; ++s)
            for (int ch = 0; ch < gy.c; ++ch)
                for (int oy = 0; oy < gy.h; ++oy)
                    for (int ox = 0; ox < gy.w; ++ox) {
                        double g = gy.at(s, ch, oy, ox) * inv;
                        for (int ky = 0; ky < k_; ++ky)
                            for (int kx = 0; kx < k_; ++kx)
                                gx.at(s, ch, oy * stride_ + ky, ox * stride_ + kx) += g;
                    }
        return {std::move(gx)};
    }

  private:
    int k_, stride_;
    std::array<int, 4> in_shape_{};
};

class GlobalAvgPool : public Layer {
  public:
    std::string kind() const override { return "gap"; }
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in.at(0);
        in_shape_ = {x.n, x.c, x.h, x.w};
        Tensor y(x.n, x.c, 1, 1);
        const double inv = 1.0 / x.plane();
        for (int s = 0; s < x.n; ++s)
            for (int ch = 0; ch < x.c; ++ch) {
                double sum = 0.0;
                for (int i = 0; i < x.plane(); ++i)
                    sum += x.v[(static_cast<size_t>(s) * x.c + ch) * x.plane() + i];
                y.at(s, ch, 0, 0) = sum * inv;
            }
        return y;
    }
    std::vector<Tensor> backward(const Tensor& gy) override {
        Tensor gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        const double inv = 1.0 / (in_shape_[2] * in_shape_[3]);
        for (int s = 0; s < gx.n; ++s)
            for (int ch = 0; ch < gx.c; ++ch) {
                double g = gy.at(s, ch, 0, 0) * inv;
                for (int i = 0; i < gx.plane(); ++i)
                    gx.v[(static_cast<size_t>(s) * gx.c + ch) * gx.plane() + i] = g;
            }
        return {std::move(gx)};
    }

  private:
    std::array<int, 4> in_shape_{};
};

class Dense : public Layer {
  public:
    Dense(int in_dim, int out_dim, Rng& rng) : in_dim_(in_dim), out_dim_(out_dim) {
        weight_.resize(static_cast<size_t>(out_dim) * in_dim);
        wgrad_.assign(weight_.size(), 0.0);
        const double std = std::sqrt(2.0 / in_dim);
        for (auto& w : weight_) w = rng.normal() * std;
        bias_.assign(out_dim, 0.0);
        bgrad_.assign(out_dim, 0.0);
    }

    std::string kind() const override { return "dense"; }

    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in.at(0);
        if (x.sample_size() != in_dim_)
            throw std::invalid_argument(strf("dense: expected input dim %d, got %d", in_dim_,
                                             x.sample_size()));
        in_shape_ = {x.n, x.c, x.h, x.w};
        input_ = x;
        Tensor y(x.n, out_dim_, 1, 1);
        CMapMat X(x.v.data(), x.n, in_dim_);
        CMapMat W(weight_.data(), out_dim_, in_dim_);
        MapMat Y(y.v.data(), x.n, out_dim_);
        Y.noalias() = X * W.transpose();
        for (int s = 0; s < x.n; ++s)
            for (int o = 0; o < out_dim_; ++o) Y(s, o) += bias_[o];
        return y;
    }

    std::vector<Tensor> backward(const Tensor& gy) override {
        Tensor gx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        CMapMat dY(gy.v.data(), gy.n, out_dim_);
        CMapMat X(input_.v.data(), input_.n, in_dim_);
        CMapMat W(weight_.data(), out_dim_, in_dim_);
        MapMat dW(wgrad_.data(), out_dim_, in_dim_);
        dW.noalias() += dY.transpose() * X;
        for (int o = 0; o < out_dim_; ++o) bgrad_[o] += dY.col(o).sum();
        MapMat dX(gx.v.data(), gx.n, in_dim_);
        dX.noalias() = dY * W;
        return {std::move(gx)};
    }

    std::vector<ParamView> params() override {
        return {{"weight", weight_.data(), wgrad_.data(), weight_.size(), true},
                {"bias", bias_.data(), bgrad_.data(), bias_.size(), true}};
    }

    // head weights exposed for class-activation maps: row per class
    const std::vector<double>& weight() const { return weight_; }
    int out_dim() const { return out_dim_; }
    int in_dim() const { return in_dim_; }

  private:
    int in_dim_, out_dim_;
    std::array<int, 4> in_shape_{};
    std::vector<double> weight_, wgrad_, bias_, bgrad_;
    Tensor input_;
};

class Add : public Layer {
  public:
    std::string kind() const override { return "add"; }
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& a = *in.at(0);
        const Tensor& b = *in.at(1);
        if (!a.same_shape(b))
            throw std::invalid_argument("add: shape mismatch " + a.shape_str() + " vs " +
                                        b.shape_str());
        Tensor y = a;
        for (size_t i = 0; i < y.size(); ++i) y.v[i] += b.v[i];
        return y;
    }
    std::vector<Tensor> backward(const Tensor& gy) override { return {gy, gy}; }
};

class ConcatChannels : public Layer {
  public:
    std::string kind() const override { return "concat"; }
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        int total_c = 0;
        channels_.clear();
        for (const Tensor* t : in) {
            channels_.push_back(t->c);
            total_c += t->c;
        }
        const Tensor& first = *in.at(0);
        Tensor y(first.n, total_c, first.h, first.w);
        for (int s = 0; s < first.n; ++s) {
            int oc = 0;
            for (const Tensor* t : in) {
                if (t->n != first.n || t->h != first.h || t->w != first.w)
                    throw std::invalid_argument("concat: spatial shape mismatch");
                std::copy(t->v.begin() + static_cast<size_t>(s) * t->sample_size(),
                          t->v.begin() + static_cast<size_t>(s + 1) * t->sample_size(),
                          y.v.begin() + (static_cast<size_t>(s) * total_c + oc) * first.plane());
                oc += t->c;
            }
        }
        n_ = first.n;
        hw_ = first.plane();
        h_ = first.h;
        w_ = first.w;
        return y;
    }
    std::vector<Tensor> backward(const Tensor& gy) override {
        std::vector<Tensor> gx;
        int oc = 0;
        for (int c : channels_) {
            Tensor g(n_, c, h_, w_);
            for (int s = 0; s < n_; ++s)
                std::copy(gy.v.begin() + (static_cast<size_t>(s) * gy.c + oc) * hw_,
                          gy.v.begin() + (static_cast<size_t>(s) * gy.c + oc + c) * hw_,
                          g.v.begin() + static_cast<size_t>(s) * c * hw_);
            gx.push_back(std::move(g));
            oc += c;
        }
        return gx;
    }

  private:
    std::vector<int> channels_;
    int n_ = 0, hw_ = 0, h_ = 0, w_ = 0;
};

// --- computation graph ---

constexpr int kGraphInput = -1;

class Graph {
  public:
    int add(std::unique_ptr<Layer> layer, std::vector<int> inputs, std::string name) {
        for (int i : inputs)
            if (i != kGraphInput && (i < 0 || i >= static_cast<int>(nodes_.size())))
                throw std::invalid_argument("graph: bad input index");
        nodes_.push_back({std::move(layer), std::move(inputs), std::move(name)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    // convenience: chain onto the previous node
    int add(std::unique_ptr<Layer> layer, std::string name) {
        int prev = nodes_.empty() ? kGraphInput : static_cast<int>(nodes_.size()) - 1;
        return add(std::move(layer), std::vector<int>{prev}, std::move(name));
    }

    Tensor forward(const Tensor& x, bool train) {
        input_ = x;
        outs_.resize(nodes_.size());
        for (size_t i = 0; i < nodes_.size(); ++i) {
            std::vector<const Tensor*> ins;
            for (int idx : nodes_[i].inputs)
                ins.push_back(idx == kGraphInput ? &input_ : &outs_[idx]);
            outs_[i] = nodes_[i].layer->forward(ins, train);
        }
        return outs_.back();
    }

    // Backpropagate grad_out (w.r.t. the last node's output); accumulates
    // into parameter grads. Returns the gradient w.r.t. the graph input.
    Tensor backward(const Tensor& grad_out) {
        if (outs_.size() != nodes_.size()) throw std::runtime_error("graph: backward before forward");
        std::vector<Tensor> grads(nodes_.size());
        Tensor input_grad(input_.n, input_.c, input_.h, input_.w);
        grads.back() = grad_out;
        for (size_t ri = nodes_.size(); ri-- > 0;) {
            if (grads[ri].size() == 0) {
                // node not on the path from any loss; feed zeros
                grads[ri] = Tensor(outs_[ri].n, outs_[ri].c, outs_[ri].h, outs_[ri].w);
            }
            auto in_grads = nodes_[ri].layer->backward(grads[ri]);
            const auto& inputs = nodes_[ri].inputs;
            for (size_t k = 0; k < inputs.size(); ++k) {
                if (inputs[k] == kGraphInput) {
                    for (size_t t = 0; t < input_grad.size(); ++t)
                        input_grad.v[t] += in_grads[k].v[t];
                } else {
                    Tensor& dst = grads[inputs[k]];
                    if (dst.size() == 0)
                        dst = std::move(in_grads[k]);
                    else
                        for (size_t t = 0; t < dst.size(); ++t) dst.v[t] += in_grads[k].v[t];
                }
            }
        }
        return input_grad;
    }

    std::vector<ParamView> params() {
        std::vector<ParamView> all;
        for (size_t i = 0; i < nodes_.size(); ++i)
            for (auto p : nodes_[i].layer->params()) {
                p.name = nodes_[i].name + "." + p.name;
                all.push_back(p);
            }
        return all;
    }

    void zero_grad() {
        for (auto& p : params()) std::fill(p.grad, p.grad + p.count, 0.0);
    }

    size_t param_count(bool trainable_only = true) {
        size_t n = 0;
        for (const auto& p : params())
            if (p.trainable || !trainable_only) n += p.count;
        return n;
    }

    const Tensor& output_of(int node) const { return outs_.at(node); }
    const Tensor& output_of(const std::string& name) const {
        for (size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].name == name) return outs_.at(i);
        throw std::invalid_argument("graph: no node named " + name);
    }
    Layer* layer_of(int node) { return nodes_.at(node).layer.get(); }
    int node_count() const { return static_cast<int>(nodes_.size()); }

  private:
    struct Node {
        std::unique_ptr<Layer> layer;
        std::vector<int> inputs;
        std::string name;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> outs_;
    Tensor input_;
};

// --- optimizer and loss helpers ---

inline void sgd_step(std::vector<ParamView> params, double lr) {
    for (auto& p : params) {
        if (!p.trainable) continue;
        for (size_t i = 0; i < p.count; ++i) p.value[i] -= lr * p.grad[i];
    }
}

// row-wise softmax on an (N, K, 1, 1) tensor
inline Tensor softmax_rows(const Tensor& logits) {
    Tensor probs = logits;
    const int k = logits.c;
    for (int s = 0; s < logits.n; ++s) {
        double* row = probs.v.data() + static_cast<size_t>(s) * k;
        double mx = *std::max_element(row, row + k);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
            row[i] = std::exp(row[i] - mx);
            sum += row[i];
        }
        for (int i = 0; i < k; ++i) row[i] /= sum;
    }
    return probs;
}

// dlogits from dprobs through a row-wise softmax
inline Tensor softmax_backward_rows(const Tensor& probs, const Tensor& dprobs) {
    Tensor dlogits = probs;
    const int k = probs.c;
    for (int s = 0; s < probs.n; ++s) {
        const double* p = probs.v.data() + static_cast<size_t>(s) * k;
        const double* dp = dprobs.v.data() + static_cast<size_t>(s) * k;
        double dot = 0.0;
        for (int i = 0; i < k; ++i) dot += dp[i] * p[i];
        double* dl = dlogits.v.data() + static_cast<size_t>(s) * k;
        for (int i = 0; i < k; ++i) dl[i] = p[i] * (dp[i] - dot);
    }
    return dlogits;
}

// --- checkpoint plumbing ---

inline void store_params(Graph& g, Archive& a, const std::string& prefix) {
    for (const auto& p : g.params())
        a.arrays[prefix + p.name] = std::vector<double>(p.value, p.value + p.count);
}

inline void load_params(Graph& g, const Archive& a, const std::string& prefix) {
    for (auto& p : g.params()) {
        auto it = a.arrays.find(prefix + p.name);
        if (it == a.arrays.end())
            throw std::runtime_error("checkpoint: missing array " + prefix + p.name);
        if (it->second.size() != p.count)
            throw std::runtime_error(strf("checkpoint: array %s has %zu values, expected %zu",
                                          (prefix + p.name).c_str(), it->second.size(), p.count));
        std::copy(it->second.begin(), it->second.end(), p.value);
    }
}

}  // namespace mixnet::nn

#endif
