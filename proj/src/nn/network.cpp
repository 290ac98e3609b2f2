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

#include "sbmatch/nn/network.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace sbm::nn {
namespace {

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

int parse_int(const std::string& s, const std::string& what) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError("manifest: bad integer for " + what + ": '" + s + "'");
    return v;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<std::vector<int>> NetworkSpec::source_indices() const {
    std::unordered_map<std::string, int> index;
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        std::vector<int> srcs;
        if (l.sources.empty()) {
            srcs.push_back(static_cast<int>(i) - 1);
        } else {
            for (const auto& s : l.sources) {
                if (s == "input") {
                    srcs.push_back(-1);
                    continue;
                }
                auto it = index.find(s);
                SBM_REQUIRE(it != index.end(),
                            "network '" + name + "': layer '" + l.tag + "' reads unknown or later tag '" + s + "'");
                srcs.push_back(it->second);
            }
        }
        SBM_REQUIRE(!index.contains(l.tag) && l.tag != "input",
                    "network '" + name + "': duplicate tag '" + l.tag + "'");
        index.emplace(l.tag, static_cast<int>(i));
        out.push_back(std::move(srcs));
    }
    return out;
}

int NetworkSpec::output_index() const {
    SBM_REQUIRE(!layers.empty(), "network '" + name + "' has no layers");
    if (output.empty()) return static_cast<int>(layers.size()) - 1;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].tag == output) return static_cast<int>(i);
    throw ContractError("network '" + name + "': unknown output tag '" + output + "'");
}

void NetworkSpec::validate() const {
    SBM_REQUIRE(in_channels > 0, "network '" + name + "': input channels must be > 0");
    for (const auto& l : layers) l.validate();
    (void)source_indices();
    (void)output_index();
}

template <class T>
void init_network_params(const NetworkSpec& net, ParamStore<T>& params, std::mt19937_64& rng) {
    net.validate();
    for (const auto& l : net.layers) init_layer_params(l, params, rng);
}

template <class T>
Tensor<T> network_forward(const NetworkSpec& net, const Tensor<T>& input, const ParamStore<T>& params,
                          Trace<T>* trace) {
    SBM_REQUIRE(input.c == net.in_channels, "network '" + net.name + "': expected " +
                                                std::to_string(net.in_channels) + " input channels");
    SBM_REQUIRE((net.in_height == 0 || input.h == net.in_height) && (net.in_width == 0 || input.w == net.in_width),
                "network '" + net.name + "': input spatial size mismatch");
    const auto srcs = net.source_indices();
    const int out_idx = net.output_index();
    const std::size_t n = net.layers.size();

    Tensor<T> scaled = input;
    if (net.input_scale != 1.0)
        for (auto& v : scaled.data) v *= static_cast<T>(net.input_scale);

    // Last consumer of every output, so inference can release activations early.
    std::vector<int> last_use(n, -1);
    for (std::size_t i = 0; i < n; ++i)
        for (int s : srcs[i])
            if (s >= 0) last_use[static_cast<std::size_t>(s)] = static_cast<int>(i);

    std::vector<Tensor<T>> outputs(n);
    if (trace) {
        trace->contexts.assign(n, {});
        trace->input_shape = input.shape();
    }
    std::vector<const Tensor<T>*> in_ptrs;
    for (std::size_t i = 0; i < n; ++i) {
        in_ptrs.clear();
        for (int s : srcs[i]) in_ptrs.push_back(s < 0 ? &scaled : &outputs[static_cast<std::size_t>(s)]);
        outputs[i] = layer_forward<T>(net.layers[i], in_ptrs, params, trace ? &trace->contexts[i] : nullptr);
        if (!trace) {
            for (int s : srcs[i])
                if (s >= 0 && last_use[static_cast<std::size_t>(s)] == static_cast<int>(i) && s != out_idx)
                    outputs[static_cast<std::size_t>(s)] = Tensor<T>();
        }
    }
    Tensor<T> result = outputs[static_cast<std::size_t>(out_idx)];
    if (trace) trace->outputs = std::move(outputs);
    return result;
}

template <class T>
Tensor<T> network_backward(const NetworkSpec& net, const Tensor<T>& grad_output, const Trace<T>& trace,
                           ParamStore<T>& params) {
    const auto srcs = net.source_indices();
    const int out_idx = net.output_index();
    const std::size_t n = net.layers.size();
    SBM_REQUIRE(trace.contexts.size() == n, "network '" + net.name + "': trace does not belong to this network");

    std::vector<Tensor<T>> grads(n);
    std::vector<bool> has(n, false);
    grads[static_cast<std::size_t>(out_idx)] = grad_output;
    has[static_cast<std::size_t>(out_idx)] = true;
    const auto& is = trace.input_shape;
    Tensor<T> input_grad(is[0], is[1], is[2], is[3]);

    for (int i = static_cast<int>(n) - 1; i >= 0; --i) {
        const auto ui = static_cast<std::size_t>(i);
        if (!has[ui]) continue;
        auto in_grads = layer_backward<T>(net.layers[ui], grads[ui], trace.contexts[ui], params);
        grads[ui] = Tensor<T>();
        for (std::size_t k = 0; k < srcs[ui].size(); ++k) {
            const int s = srcs[ui][k];
            Tensor<T>& g = in_grads[k];
            if (s < 0) {
                for (std::size_t q = 0; q < g.data.size(); ++q) input_grad.data[q] += g.data[q];
                continue;
            }
            const auto us = static_cast<std::size_t>(s);
            if (!has[us]) {
                grads[us] = std::move(g);
                has[us] = true;
            } else {
                for (std::size_t q = 0; q < g.data.size(); ++q) grads[us].data[q] += g.data[q];
            }
        }
    }
    if (net.input_scale != 1.0)
        for (auto& v : input_grad.data) v *= static_cast<T>(net.input_scale);
    return input_grad;
}

std::string to_manifest(const std::vector<NetworkSpec>& nets) {
    std::ostringstream os;
    os << "sbmatch-manifest 1\n";
    for (const auto& net : nets) {
        os << "network " << net.name << "\n";
        os << "input " << net.in_channels << ' ' << net.in_height << ' ' << net.in_width << "\n";
        os << "input_scale " << format_double(net.input_scale) << "\n";
        for (const auto& l : net.layers) {
            os << "layer " << kind_name(l.kind) << ' ' << l.tag;
            if (l.kind == LayerKind::conv2d) {
                os << " in=" << l.in_channels << " out=" << l.out_channels << " stride=" << l.stride
                   << " dilation=" << l.dilation << " pad=" << (l.padding == Padding::valid ? "valid" : "same");
            } else if (l.kind == LayerKind::fully_connected) {
                os << " in=" << l.in_channels << " out=" << l.out_channels;
            }
            if (!l.sources.empty()) {
                os << " src=";
                for (std::size_t i = 0; i < l.sources.size(); ++i) os << (i ? "," : "") << l.sources[i];
            }
            if (l.zero_init) os << " init=zero";
            os << "\n";
        }
        if (!net.output.empty()) os << "output " << net.output << "\n";
        os << "end\n";
    }
    return os.str();
}

std::vector<NetworkSpec> parse_manifest(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    if (!std::getline(is, line) || line != "sbmatch-manifest 1")
        throw FormatError("manifest: missing 'sbmatch-manifest 1' header");
    std::vector<NetworkSpec> nets;
    NetworkSpec* cur = nullptr;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "network") {
            nets.emplace_back();
            cur = &nets.back();
            ls >> cur->name;
            continue;
        }
        if (!cur) throw FormatError("manifest: '" + key + "' outside a network block");
        if (key == "input") {
            ls >> cur->in_channels >> cur->in_height >> cur->in_width;
        } else if (key == "input_scale") {
            std::string v;
            ls >> v;
            cur->input_scale = std::stod(v);
        } else if (key == "layer") {
            std::string kind;
            LayerSpec l;
            ls >> kind >> l.tag;
            if (kind == "conv2d") l.kind = LayerKind::conv2d;
            else if (kind == "fc") l.kind = LayerKind::fully_connected;
            else if (kind == "relu") l.kind = LayerKind::relu;
            else if (kind == "sigmoid") l.kind = LayerKind::sigmoid;
            else if (kind == "concat") l.kind = LayerKind::concat;
            else throw FormatError("manifest: unknown layer kind '" + kind + "'");
            std::string attr;
            while (ls >> attr) {
                const auto eq = attr.find('=');
                if (eq == std::string::npos) throw FormatError("manifest: bad attribute '" + attr + "'");
                const std::string k = attr.substr(0, eq), v = attr.substr(eq + 1);
                if (k == "in") l.in_channels = parse_int(v, k);
                else if (k == "out") l.out_channels = parse_int(v, k);
                else if (k == "stride") l.stride = parse_int(v, k);
                else if (k == "dilation") l.dilation = parse_int(v, k);
                else if (k == "pad") {
                    if (v == "same") l.padding = Padding::same_zero;
                    else if (v == "valid") l.padding = Padding::valid;
                    else throw FormatError("manifest: bad padding '" + v + "'");
                } else if (k == "src") l.sources = split(v, ',');
                else if (k == "init") {
                    if (v != "zero") throw FormatError("manifest: bad init '" + v + "'");
                    l.zero_init = true;
                } else throw FormatError("manifest: unknown attribute '" + k + "'");
            }
            cur->layers.push_back(std::move(l));
        } else if (key == "output") {
            ls >> cur->output;
        } else if (key == "end") {
            cur = nullptr;
        } else {
            throw FormatError("manifest: unknown directive '" + key + "'");
        }
    }
    try {
        for (const auto& n : nets) n.validate();
    } catch (const ContractError& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return nets;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

#define SBM_INSTANTIATE_NETWORK(T)                                                                      \
    template void init_network_params<T>(const NetworkSpec&, ParamStore<T>&, std::mt19937_64&);         \
    template Tensor<T> network_forward<T>(const NetworkSpec&, const Tensor<T>&, const ParamStore<T>&,  \
                                          Trace<T>*);                                                   \
    template Tensor<T> network_backward<T>(const NetworkSpec&, const Tensor<T>&, const Trace<T>&,      \
                                           ParamStore<T>&);

SBM_INSTANTIATE_NETWORK(float)
SBM_INSTANTIATE_NETWORK(double)

}  // namespace sbm::nn
