// Copyright 2026 The sbmatch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sbmatch/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "sbmatch/nn/gemm.hpp"

namespace sbm::nn {
namespace {

std::string layer_label(const LayerSpec& spec) {
    return std::string(kind_name(spec.kind)) + " layer '" + spec.tag + "'";
}

template <class T>
void im2col(const Tensor<T>& x, const LayerSpec& spec, int ho, int wo, T* col) {
    const int n_cols = x.n * ho * wo;
    const int s = spec.stride, d = spec.dilation, pad = spec.pad();
    for (int ci = 0; ci < x.c; ++ci) {
        for (int ky = 0; ky < kKernel; ++ky) {
            for (int kx = 0; kx < kKernel; ++kx) {
                T* dst = col + static_cast<std::ptrdiff_t>((ci * kKernel + ky) * kKernel + kx) * n_cols;
                for (int b = 0; b < x.n; ++b) {
                    const T* src = x.item(b) + static_cast<std::ptrdiff_t>(ci) * x.h * x.w;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * s - pad + ky * d;
                        if (iy < 0 || iy >= x.h) {
                            std::fill(dst, dst + wo, T(0));
                            dst += wo;
                            continue;
                        }
                        const T* srow = src + static_cast<std::ptrdiff_t>(iy) * x.w;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox * s - pad + kx * d;
                            *dst++ = (ix >= 0 && ix < x.w) ? srow[ix] : T(0);
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void col2im(const T* col, const LayerSpec& spec, int ho, int wo, Tensor<T>& dx) {
    const int n_cols = dx.n * ho * wo;
    const int s = spec.stride, d = spec.dilation, pad = spec.pad();
    for (int ci = 0; ci < dx.c; ++ci) {
        for (int ky = 0; ky < kKernel; ++ky) {
            for (int kx = 0; kx < kKernel; ++kx) {
                const T* src = col + static_cast<std::ptrdiff_t>((ci * kKernel + ky) * kKernel + kx) * n_cols;
                for (int b = 0; b < dx.n; ++b) {
                    T* dst = dx.item(b) + static_cast<std::ptrdiff_t>(ci) * dx.h * dx.w;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * s - pad + ky * d;
                        if (iy < 0 || iy >= dx.h) {
                            src += wo;
                            continue;
                        }
                        T* drow = dst + static_cast<std::ptrdiff_t>(iy) * dx.w;
                        for (int ox = 0; ox < wo; ++ox, ++src) {
                            const int ix = ox * s - pad + kx * d;
                            if (ix >= 0 && ix < dx.w) drow[ix] += *src;
                        }
                    }
                }
            }
        }
    }
}

template <class T>
Tensor<T> conv_forward(const LayerSpec& spec, const Tensor<T>& x, const ParamStore<T>& params,
                       LayerContext<T>* ctx) {
    SBM_REQUIRE(x.rank == 4 && x.c == spec.in_channels,
                layer_label(spec) + ": expected " + std::to_string(spec.in_channels) +
                    " input channels, got " + std::to_string(x.c));
    const int ho = conv_output_size(spec, x.h), wo = conv_output_size(spec, x.w);
    SBM_REQUIRE(ho > 0 && wo > 0, layer_label(spec) + ": input too small");
    const auto& weight = params.at(spec.weight_name());
    const auto& bias = params.at(spec.bias_name());
    const int k = spec.in_channels * kKernel * kKernel;
    const int n_cols = x.n * ho * wo;
    const int hw = ho * wo;

    std::vector<T> col(static_cast<std::size_t>(k) * n_cols);
    im2col(x, spec, ho, wo, col.data());
    std::vector<T> y2(static_cast<std::size_t>(spec.out_channels) * n_cols);
    gemm<T>(false, false, spec.out_channels, n_cols, k, T(1), weight.value.data(), k, col.data(), n_cols,
            T(0), y2.data(), n_cols);

    Tensor<T> out(x.n, spec.out_channels, ho, wo);
    for (int b = 0; b < x.n; ++b) {
        for (int co = 0; co < spec.out_channels; ++co) {
            const T* src = y2.data() + static_cast<std::ptrdiff_t>(co) * n_cols + static_cast<std::ptrdiff_t>(b) * hw;
            T* dst = out.item(b) + static_cast<std::ptrdiff_t>(co) * hw;
            const T bv = bias.value[static_cast<std::size_t>(co)];
            for (int p = 0; p < hw; ++p) dst[p] = src[p] + bv;
        }
    }
    if (ctx) ctx->saved = std::move(col);
    return out;
}

template <class T>
Tensor<T> conv_backward(const LayerSpec& spec, const Tensor<T>& g, const LayerContext<T>& ctx,
                        ParamStore<T>& params) {
    const auto in_shape = ctx.input_shapes.at(0);
    Tensor<T> dx(in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
    const int ho = g.h, wo = g.w, hw = ho * wo;
    const int k = spec.in_channels * kKernel * kKernel;
    const int n_cols = g.n * hw;
    SBM_REQUIRE(ctx.saved.size() == static_cast<std::size_t>(k) * n_cols,
                layer_label(spec) + ": context does not match gradient shape");

    std::vector<T> g2(static_cast<std::size_t>(spec.out_channels) * n_cols);
    for (int b = 0; b < g.n; ++b)
        for (int co = 0; co < spec.out_channels; ++co)
            std::copy_n(g.item(b) + static_cast<std::ptrdiff_t>(co) * hw, hw,
                        g2.data() + static_cast<std::ptrdiff_t>(co) * n_cols + static_cast<std::ptrdiff_t>(b) * hw);

    auto& weight = params.at(spec.weight_name());
    auto& bias = params.at(spec.bias_name());
    gemm<T>(false, true, spec.out_channels, k, n_cols, T(1), g2.data(), n_cols, ctx.saved.data(), n_cols,
            T(1), weight.grad.data(), k);
    for (int co = 0; co < spec.out_channels; ++co) {
        const T* row = g2.data() + static_cast<std::ptrdiff_t>(co) * n_cols;
        T acc = T(0);
        for (int p = 0; p < n_cols; ++p) acc += row[p];
        bias.grad[static_cast<std::size_t>(co)] += acc;
    }
    std::vector<T> dcol(static_cast<std::size_t>(k) * n_cols);
    gemm<T>(true, false, k, n_cols, spec.out_channels, T(1), weight.value.data(), k, g2.data(), n_cols, T(0),
            dcol.data(), n_cols);
    col2im(dcol.data(), spec, ho, wo, dx);
    return dx;
}

template <class T>
Tensor<T> fc_forward(const LayerSpec& spec, const Tensor<T>& x, const ParamStore<T>& params,
                     LayerContext<T>* ctx) {
    SBM_REQUIRE(x.item_size() == static_cast<std::size_t>(spec.in_channels),
                layer_label(spec) + ": expected " + std::to_string(spec.in_channels) +
                    " input features, got " + std::to_string(x.item_size()));
    const auto& weight = params.at(spec.weight_name());
    const auto& bias = params.at(spec.bias_name());
    const int in = spec.in_channels, out_w = spec.out_channels;
    Tensor<T> y = Tensor<T>::matrix(x.n, out_w);
    gemm<T>(false, true, x.n, out_w, in, T(1), x.data.data(), in, weight.value.data(), in, T(0), y.data.data(),
            out_w);
    for (int b = 0; b < x.n; ++b) {
        T* row = y.item(b);
        for (int o = 0; o < out_w; ++o) row[o] += bias.value[static_cast<std::size_t>(o)];
    }
    if (ctx) ctx->saved = x.data;
    return y;
}

template <class T>
Tensor<T> fc_backward(const LayerSpec& spec, const Tensor<T>& g, const LayerContext<T>& ctx,
                      ParamStore<T>& params) {
    const auto in_shape = ctx.input_shapes.at(0);
    Tensor<T> dx(in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
    const int in = spec.in_channels, out_w = spec.out_channels, batch = g.n;
    SBM_REQUIRE(ctx.saved.size() == static_cast<std::size_t>(batch) * in,
                layer_label(spec) + ": context does not match gradient shape");
    auto& weight = params.at(spec.weight_name());
    auto& bias = params.at(spec.bias_name());
    gemm<T>(true, false, out_w, in, batch, T(1), g.data.data(), out_w, ctx.saved.data(), in, T(1),
            weight.grad.data(), in);
    for (int b = 0; b < batch; ++b) {
        const T* row = g.item(b);
        for (int o = 0; o < out_w; ++o) bias.grad[static_cast<std::size_t>(o)] += row[o];
    }
    gemm<T>(false, false, batch, in, out_w, T(1), g.data.data(), out_w, weight.value.data(), in, T(0),
            dx.data.data(), in);
    return dx;
}

}  // namespace

std::string_view kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::fully_connected: return "fc";
        case LayerKind::relu: return "relu";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::concat: return "concat";
    }
    return "?";
}

void LayerSpec::validate() const {
    SBM_REQUIRE(!tag.empty(), "layer without tag");
    switch (kind) {
        case LayerKind::conv2d:
            SBM_REQUIRE(in_channels > 0 && out_channels > 0, layer_label(*this) + ": channel counts must be > 0");
            SBM_REQUIRE(stride == 1 || stride == 2, layer_label(*this) + ": stride must be 1 or 2");
            SBM_REQUIRE(dilation >= 1, layer_label(*this) + ": dilation must be >= 1");
            SBM_REQUIRE(sources.size() <= 1, layer_label(*this) + ": takes one source");
            break;
        case LayerKind::fully_connected:
            SBM_REQUIRE(in_channels > 0 && out_channels > 0, layer_label(*this) + ": widths must be > 0");
            SBM_REQUIRE(sources.size() <= 1, layer_label(*this) + ": takes one source");
            break;
        case LayerKind::relu:
        case LayerKind::sigmoid:
            SBM_REQUIRE(sources.size() <= 1, layer_label(*this) + ": takes one source");
            break;
        case LayerKind::concat:
            SBM_REQUIRE(sources.size() >= 2, layer_label(*this) + ": needs at least two sources");
            break;
    }
}

int conv_output_size(const LayerSpec& spec, int in) {
    const int span = spec.dilation * (kKernel - 1) + 1;
    const int padded = in + 2 * spec.pad();
    if (padded < span) return 0;
    return (padded - span) / spec.stride + 1;
}

template <class T>
void init_layer_params(const LayerSpec& spec, ParamStore<T>& params, std::mt19937_64& rng) {
    if (!spec.has_params()) return;
    std::vector<int> wshape;
    int fan_in = 0;
    if (spec.kind == LayerKind::conv2d) {
        wshape = {spec.out_channels, spec.in_channels, kKernel, kKernel};
        fan_in = spec.in_channels * kKernel * kKernel;
    } else {
        wshape = {spec.out_channels, spec.in_channels};
        fan_in = spec.in_channels;
    }
    params.add(spec.weight_name(), wshape);
    params.add(spec.bias_name(), {spec.out_channels});
    if (spec.zero_init) return;
    // Look the weight up again: adding the bias may have moved it.
    auto& w = params.at(spec.weight_name());
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : w.value) v = static_cast<T>(normal(rng));
}

template <class T>
Tensor<T> layer_forward(const LayerSpec& spec, std::span<const Tensor<T>* const> inputs,
                        const ParamStore<T>& params, LayerContext<T>* ctx) {
    SBM_REQUIRE(!inputs.empty(), layer_label(spec) + ": no inputs");
    if (spec.kind != LayerKind::concat)
        SBM_REQUIRE(inputs.size() == 1, layer_label(spec) + ": expects exactly one input");
    if (ctx) {
        ctx->tag = spec.tag;
        ctx->input_shapes.clear();
        for (const auto* in : inputs) ctx->input_shapes.push_back(in->shape());
        ctx->saved.clear();
    }
    Tensor<T> out;
    switch (spec.kind) {
        case LayerKind::conv2d: out = conv_forward(spec, *inputs[0], params, ctx); break;
        case LayerKind::fully_connected: out = fc_forward(spec, *inputs[0], params, ctx); break;
        case LayerKind::relu: {
            out = *inputs[0];
            for (auto& v : out.data) v = v > T(0) ? v : T(0);
            if (ctx) ctx->saved = out.data;
            break;
        }
        case LayerKind::sigmoid: {
            out = *inputs[0];
            for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
            if (ctx) ctx->saved = out.data;
            break;
        }
        case LayerKind::concat: {
            const auto& first = *inputs[0];
            int channels = 0;
            for (const auto* in : inputs) {
                SBM_REQUIRE(in->rank == first.rank && in->n == first.n && in->h == first.h && in->w == first.w,
                            layer_label(spec) + ": sources differ in batch or spatial size");
                channels += in->c;
            }
            out = Tensor<T>(first.n, channels, first.h, first.w);
            out.rank = first.rank;
            for (int b = 0; b < first.n; ++b) {
                T* dst = out.item(b);
                for (const auto* in : inputs) dst = std::copy_n(in->item(b), in->item_size(), dst);
            }
            break;
        }
    }
    if (ctx) {
        ctx->output_shape = out.shape();
        ctx->output_rank = out.rank;
    }
    return out;
}

template <class T>
std::vector<Tensor<T>> layer_backward(const LayerSpec& spec, const Tensor<T>& grad_out,
                                      const LayerContext<T>& ctx, ParamStore<T>& params) {
    SBM_REQUIRE(ctx.tag == spec.tag && grad_out.shape() == ctx.output_shape,
                layer_label(spec) + ": stale or mismatched forward context");
    std::vector<Tensor<T>> grads;
    switch (spec.kind) {
        case LayerKind::conv2d: grads.push_back(conv_backward(spec, grad_out, ctx, params)); break;
        case LayerKind::fully_connected: grads.push_back(fc_backward(spec, grad_out, ctx, params)); break;
        case LayerKind::relu: {
            SBM_REQUIRE(ctx.saved.size() == grad_out.size(), layer_label(spec) + ": stale context");
            Tensor<T> g = grad_out;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (!(ctx.saved[i] > T(0))) g.data[i] = T(0);
            grads.push_back(std::move(g));
            break;
        }
        case LayerKind::sigmoid: {
            SBM_REQUIRE(ctx.saved.size() == grad_out.size(), layer_label(spec) + ": stale context");
            Tensor<T> g = grad_out;
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= ctx.saved[i] * (T(1) - ctx.saved[i]);
            grads.push_back(std::move(g));
            break;
        }
        case LayerKind::concat: {
            int offset = 0;
            for (const auto& s : ctx.input_shapes) {
                Tensor<T> g(s[0], s[1], s[2], s[3]);
                g.rank = grad_out.rank;
                const std::size_t chunk = g.item_size();
                for (int b = 0; b < g.n; ++b)
                    std::copy_n(grad_out.item(b) + static_cast<std::ptrdiff_t>(offset) * g.plane(), chunk, g.item(b));
                offset += s[1];
                grads.push_back(std::move(g));
            }
            break;
        }
    }
    return grads;
}

#define SBM_INSTANTIATE_LAYERS(T)                                                                       \
    template void init_layer_params<T>(const LayerSpec&, ParamStore<T>&, std::mt19937_64&);            \
    template Tensor<T> layer_forward<T>(const LayerSpec&, std::span<const Tensor<T>* const>,           \
                                        const ParamStore<T>&, LayerContext<T>*);                       \
    template std::vector<Tensor<T>> layer_backward<T>(const LayerSpec&, const Tensor<T>&,              \
                                                      const LayerContext<T>&, ParamStore<T>&);

SBM_INSTANTIATE_LAYERS(float)
SBM_INSTANTIATE_LAYERS(double)

}  // namespace sbm::nn
