#include "generator.hpp"

#include "error.hpp"
#include "rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace segedit {

namespace {

constexpr double kSlope = 0.2;
constexpr double kInitGain = 2.0;

double lrelu(double x) { return x > 0.0 ? x : kSlope * x; }
double lrelu_grad(double x) { return x > 0.0 ? 1.0 : kSlope; }

std::vector<double> draw(SplitMix64& rng, std::size_t n, double fan_in, double offset = 0.0) {
    const double bound = kInitGain / std::sqrt(fan_in);
    std::vector<double> out(n);
    for (auto& v : out)
        v = offset + rng.uniform(-bound, bound);
    return out;
}

// y = M x + b with M stored row-major (rows x cols).
std::vector<double> affine(std::span<const double> m, std::span<const double> b, std::span<const double> x) {
    const std::size_t rows = b.size(), cols = x.size();
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* row = m.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c)
            acc += row[c] * x[c];
        y[r] += acc;
    }
    return y;
}

// x^T M, i.e. M^T g.
std::vector<double> affine_transpose(std::span<const double> m, std::span<const double> g, std::size_t cols) {
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < g.size(); ++r) {
        const double* row = m.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c)
            out[c] += row[c] * g[r];
    }
    return out;
}

// 1-D taps for bilinear x2 upsampling with half-pixel centres and edge
// clamping: output X samples source coordinate (X + 0.5) / 2 - 0.5.
struct Tap {
    int i0, i1;
    double w0, w1;
};

std::vector<Tap> upsample_taps(int src) {
    std::vector<Tap> taps(static_cast<std::size_t>(src) * 2);
    for (int j = 0; j < src; ++j) {
        taps[2 * j] = {std::max(j - 1, 0), j, 0.25, 0.75};
        taps[2 * j + 1] = {j, std::min(j + 1, src - 1), 0.75, 0.25};
    }
    return taps;
}

std::vector<double> upsample(std::span<const double> in, int channels, int src) {
    const int dst = src * 2;
    const auto taps = upsample_taps(src);
    std::vector<double> out(static_cast<std::size_t>(channels) * dst * dst);
    for (int c = 0; c < channels; ++c) {
        const double* plane = in.data() + static_cast<std::size_t>(c) * src * src;
        double* o = out.data() + static_cast<std::size_t>(c) * dst * dst;
        for (int y = 0; y < dst; ++y) {
            const Tap& ty = taps[y];
            for (int x = 0; x < dst; ++x) {
                const Tap& tx = taps[x];
                o[y * dst + x] = ty.w0 * (tx.w0 * plane[ty.i0 * src + tx.i0] + tx.w1 * plane[ty.i0 * src + tx.i1]) +
                                 ty.w1 * (tx.w0 * plane[ty.i1 * src + tx.i0] + tx.w1 * plane[ty.i1 * src + tx.i1]);
            }
        }
    }
    return out;
}

std::vector<double> upsample_transpose(std::span<const double> grad, int channels, int src) {
    const int dst = src * 2;
    const auto taps = upsample_taps(src);
    std::vector<double> out(static_cast<std::size_t>(channels) * src * src, 0.0);
    for (int c = 0; c < channels; ++c) {
        const double* g = grad.data() + static_cast<std::size_t>(c) * dst * dst;
        double* o = out.data() + static_cast<std::size_t>(c) * src * src;
        for (int y = 0; y < dst; ++y) {
            const Tap& ty = taps[y];
            for (int x = 0; x < dst; ++x) {
                const Tap& tx = taps[x];
                const double v = g[y * dst + x];
                o[ty.i0 * src + tx.i0] += ty.w0 * tx.w0 * v;
                o[ty.i0 * src + tx.i1] += ty.w0 * tx.w1 * v;
                o[ty.i1 * src + tx.i0] += ty.w1 * tx.w0 * v;
                o[ty.i1 * src + tx.i1] += ty.w1 * tx.w1 * v;
            }
        }
    }
    return out;
}

// Valid output range for a kernel offset d in {-1, 0, 1} with zero padding.
struct Span {
    int lo, hi;
};
Span valid(int d, int res) { return {std::max(0, -d), std::min(res, res - d)}; }

std::vector<double> conv3x3(std::span<const double> in, int in_ch, int out_ch, int res,
                            std::span<const double> kernel, std::span<const double> bias) {
    const std::size_t plane = static_cast<std::size_t>(res) * res;
    std::vector<double> out(out_ch * plane);
    for (int o = 0; o < out_ch; ++o) {
        double* dst = out.data() + o * plane;
        std::fill(dst, dst + plane, bias[o]);
        for (int i = 0; i < in_ch; ++i) {
            const double* src = in.data() + i * plane;
            const double* k = kernel.data() + (static_cast<std::size_t>(o) * in_ch + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const auto [y0, y1] = valid(dy, res);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const auto [x0, x1] = valid(dx, res);
                    const double w = k[ky * 3 + kx];
                    for (int y = y0; y < y1; ++y) {
                        double* drow = dst + y * res;
                        const double* srow = src + (y + dy) * res + dx;
                        for (int x = x0; x < x1; ++x)
                            drow[x] += w * srow[x];
                    }
                }
            }
        }
    }
    return out;
}

// Gradient with respect to the convolution input.
std::vector<double> conv3x3_input_grad(std::span<const double> grad_out, int in_ch, int out_ch, int res,
                                       std::span<const double> kernel) {
    const std::size_t plane = static_cast<std::size_t>(res) * res;
    std::vector<double> grad_in(in_ch * plane, 0.0);
    for (int o = 0; o < out_ch; ++o) {
        const double* g = grad_out.data() + o * plane;
        for (int i = 0; i < in_ch; ++i) {
            double* dst = grad_in.data() + i * plane;
            const double* k = kernel.data() + (static_cast<std::size_t>(o) * in_ch + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const auto [y0, y1] = valid(dy, res);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const auto [x0, x1] = valid(dx, res);
                    const double w = k[ky * 3 + kx];
                    for (int y = y0; y < y1; ++y) {
                        const double* grow = g + y * res;
                        double* drow = dst + (y + dy) * res + dx;
                        for (int x = x0; x < x1; ++x)
                            drow[x] += w * grow[x];
                    }
                }
            }
        }
    }
    return grad_in;
}

void conv3x3_weight_grad(std::span<const double> grad_out, std::span<const double> in, int in_ch, int out_ch,
                         int res, std::span<double> grad_kernel, std::span<double> grad_bias) {
    const std::size_t plane = static_cast<std::size_t>(res) * res;
    for (int o = 0; o < out_ch; ++o) {
        const double* g = grad_out.data() + o * plane;
        double b = 0.0;
        for (std::size_t p = 0; p < plane; ++p)
            b += g[p];
        grad_bias[o] = b;
        for (int i = 0; i < in_ch; ++i) {
            const double* src = in.data() + i * plane;
            double* k = grad_kernel.data() + (static_cast<std::size_t>(o) * in_ch + i) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const auto [y0, y1] = valid(dy, res);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const auto [x0, x1] = valid(dx, res);
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* grow = g + y * res;
                        const double* srow = src + (y + dy) * res + dx;
                        for (int x = x0; x < x1; ++x)
                            acc += grow[x] * srow[x];
                    }
                    k[ky * 3 + kx] = acc;
                }
            }
        }
    }
}

} // namespace

std::string_view to_string(LatentSpace space) {
    switch (space) {
    case LatentSpace::Z: return "Z";
    case LatentSpace::W: return "W";
    case LatentSpace::WPlus: return "WPlus";
    case LatentSpace::SSpace: return "SSpace";
    }
    return "?";
}

LatentSpace parse_space(std::string_view name) {
    if (name == "Z" || name == "z") return LatentSpace::Z;
    if (name == "W" || name == "w") return LatentSpace::W;
    if (name == "WPlus" || name == "W+" || name == "wplus") return LatentSpace::WPlus;
    if (name == "SSpace" || name == "S" || name == "s") return LatentSpace::SSpace;
    fail(ErrorCode::InvalidArgument, "unknown latent space '" + std::string(name) + "'");
}

std::string_view to_string(WeightSubset subset) {
    return subset == WeightSubset::FinalLayer ? "final_layer" : "rgb_projection";
}

WeightSubset parse_weight_subset(std::string_view name) {
    if (name == "final_layer") return WeightSubset::FinalLayer;
    if (name == "rgb_projection") return WeightSubset::RgbProjection;
    fail(ErrorCode::InvalidArgument, "unknown weight subset '" + std::string(name) + "'");
}

std::size_t LatentCode::value_count() const {
    std::size_t n = 0;
    for (const auto& r : rows)
        n += r.size();
    return n;
}

bool LatentCode::all_finite() const {
    for (const auto& r : rows)
        for (double v : r)
            if (!std::isfinite(v))
                return false;
    return true;
}

void GeneratorConfig::validate() const {
    if (latent_dim < 1 || layer_count < 1 || base_resolution < 1)
        fail(ErrorCode::InvalidArgument, "generator dimensions must be >= 1");
    if (static_cast<int>(channels.size()) != layer_count)
        fail(ErrorCode::InvalidArgument, "channels_per_layer must have layer_count entries");
    for (int c : channels)
        if (c < 1)
            fail(ErrorCode::InvalidArgument, "channel counts must be >= 1");
    if (layer_count > 12)
        fail(ErrorCode::InvalidArgument, "layer_count too large");
}

ToyGenerator::ToyGenerator(GeneratorConfig config) : config_(std::move(config)) {
    config_.validate();
    SplitMix64 rng(config_.seed);
    const int d = config_.latent_dim;
    const std::size_t dd = static_cast<std::size_t>(d) * d;
    map1_ = draw(rng, dd, d);
    map1_bias_ = draw(rng, d, d);
    map2_ = draw(rng, dd, d);
    map2_bias_ = draw(rng, d, d);
    const int base = config_.base_resolution;
    constant_ = draw(rng, static_cast<std::size_t>(config_.channels[0]) * base * base, 1.0);

    int in_ch = config_.channels[0];
    int res = base;
    for (int l = 0; l < config_.layer_count; ++l) {
        if (l > 0)
            res *= 2;
        Layer layer;
        layer.in_channels = in_ch;
        layer.out_channels = config_.channels[l];
        layer.resolution = res;
        const double conv_fan = 9.0 * in_ch;
        layer.kernel = draw(rng, static_cast<std::size_t>(layer.out_channels) * in_ch * 9, conv_fan);
        layer.bias = draw(rng, layer.out_channels, conv_fan);
        layer.style_weight = draw(rng, static_cast<std::size_t>(layer.out_channels) * d, d);
        layer.style_bias = draw(rng, layer.out_channels, d, 1.0);
        layers_.push_back(std::move(layer));
        in_ch = config_.channels[l];
    }
    rgb_weight_ = draw(rng, static_cast<std::size_t>(3) * in_ch, in_ch);
    rgb_bias_ = draw(rng, 3, in_ch);
}

std::size_t ToyGenerator::parameter_count() const {
    return flat_weights().size();
}

std::vector<double> ToyGenerator::flat_weights() const {
    std::vector<double> out;
    auto append = [&](const std::vector<double>& v) { out.insert(out.end(), v.begin(), v.end()); };
    append(map1_);
    append(map1_bias_);
    append(map2_);
    append(map2_bias_);
    append(constant_);
    for (const auto& l : layers_) {
        append(l.kernel);
        append(l.bias);
        append(l.style_weight);
        append(l.style_bias);
    }
    append(rgb_weight_);
    append(rgb_bias_);
    return out;
}

LatentCode ToyGenerator::zero_code(LatentSpace space) const {
    LatentCode code{space, {}};
    const auto d = static_cast<std::size_t>(config_.latent_dim);
    switch (space) {
    case LatentSpace::Z:
    case LatentSpace::W:
        code.rows.assign(1, std::vector<double>(d, 0.0));
        break;
    case LatentSpace::WPlus:
        code.rows.assign(config_.layer_count, std::vector<double>(d, 0.0));
        break;
    case LatentSpace::SSpace:
        for (int c : config_.channels)
            code.rows.emplace_back(c, 0.0);
        break;
    }
    return code;
}

void ToyGenerator::check_code(const LatentCode& code) const {
    const LatentCode ref = zero_code(code.space);
    if (code.rows.size() != ref.rows.size())
        fail(ErrorCode::DimensionMismatch, "latent code has wrong row count for space " +
                                               std::string(to_string(code.space)));
    for (std::size_t r = 0; r < ref.rows.size(); ++r)
        if (code.rows[r].size() != ref.rows[r].size())
            fail(ErrorCode::DimensionMismatch, "latent code row " + std::to_string(r) + " has wrong length");
    if (!code.all_finite())
        fail(ErrorCode::NonFinite, "latent code contains non-finite values");
}

LatentCode ToyGenerator::map_z_to_w(const LatentCode& z) const {
    if (z.space != LatentSpace::Z)
        fail(ErrorCode::SpaceMismatch, "map_z_to_w expects a Z code");
    check_code(z);
    auto h = affine(map1_, map1_bias_, z.rows[0]);
    for (auto& v : h)
        v = lrelu(v);
    return {LatentSpace::W, {affine(map2_, map2_bias_, h)}};
}

std::vector<double> ToyGenerator::style_of(int layer, std::span<const double> w) const {
    const auto& l = layers_[layer];
    return affine(l.style_weight, l.style_bias, w);
}

LatentCode ToyGenerator::promote(const LatentCode& code, LatentSpace target) const {
    check_code(code);
    if (static_cast<int>(target) < static_cast<int>(code.space))
        fail(ErrorCode::SpaceMismatch, "cannot demote a " + std::string(to_string(code.space)) +
                                           " code to " + std::string(to_string(target)));
    LatentCode cur = code;
    while (cur.space != target) {
        switch (cur.space) {
        case LatentSpace::Z:
            cur = map_z_to_w(cur);
            break;
        case LatentSpace::W:
            cur = {LatentSpace::WPlus, std::vector<std::vector<double>>(config_.layer_count, cur.rows[0])};
            break;
        case LatentSpace::WPlus: {
            LatentCode s{LatentSpace::SSpace, {}};
            for (int l = 0; l < config_.layer_count; ++l)
                s.rows.push_back(style_of(l, cur.rows[l]));
            cur = std::move(s);
            break;
        }
        case LatentSpace::SSpace:
            break;
        }
    }
    return cur;
}

LatentCode ToyGenerator::to_sspace(const LatentCode& code) const {
    return code.space == LatentSpace::SSpace ? (check_code(code), code) : promote(code, LatentSpace::SSpace);
}

ForwardTrace ToyGenerator::forward(const LatentCode& code) const {
    ForwardTrace t;
    t.styles = to_sspace(code).rows;
    std::vector<double> x = constant_;
    int prev_ch = config_.channels[0];
    for (int l = 0; l < config_.layer_count; ++l) {
        const Layer& layer = layers_[l];
        if (l > 0)
            x = upsample(x, prev_ch, layer.resolution / 2);
        const std::size_t plane = static_cast<std::size_t>(layer.resolution) * layer.resolution;
        auto pre = conv3x3(x, layer.in_channels, layer.out_channels, layer.resolution, layer.kernel, layer.bias);
        std::vector<double> mod(pre.size());
        std::vector<double> act(pre.size());
        for (int c = 0; c < layer.out_channels; ++c) {
            const double s = t.styles[l][c];
            for (std::size_t p = 0; p < plane; ++p) {
                const std::size_t i = c * plane + p;
                mod[i] = pre[i] * s;
                act[i] = lrelu(mod[i]);
            }
        }
        t.inputs.push_back(std::move(x));
        t.preact.push_back(std::move(pre));
        t.modulated.push_back(std::move(mod));
        x = std::move(act);
        prev_ch = layer.out_channels;
    }
    t.last_activation = std::move(x);

    const int res = config_.output_resolution();
    const std::size_t plane = static_cast<std::size_t>(res) * res;
    t.image = ImageBuffer(res, res);
    auto out = t.image.data();
    for (int c = 0; c < 3; ++c) {
        const double* wrow = rgb_weight_.data() + static_cast<std::size_t>(c) * prev_ch;
        for (std::size_t p = 0; p < plane; ++p) {
            double v = rgb_bias_[c];
            for (int k = 0; k < prev_ch; ++k)
                v += wrow[k] * t.last_activation[k * plane + p];
            out[p * 3 + c] = 1.0 / (1.0 + std::exp(-v));
        }
    }
    return t;
}

std::vector<bool> ToyGenerator::activation_pattern(const LatentCode& code) const {
    std::vector<bool> pattern;
    if (code.space == LatentSpace::Z) {
        check_code(code);
        for (double h : affine(map1_, map1_bias_, code.rows[0]))
            pattern.push_back(h > 0.0);
    }
    const ForwardTrace t = forward(code);
    for (const auto& layer : t.modulated)
        for (double v : layer)
            pattern.push_back(v > 0.0);
    return pattern;
}

ImageBuffer ToyGenerator::synthesize(const LatentCode& code) const {
    return forward(code).image;
}

namespace {

void check_upstream(std::span<const double> upstream, std::size_t expected) {
    if (upstream.size() != expected)
        fail(ErrorCode::DimensionMismatch, "upstream gradient has wrong size");
    for (double v : upstream)
        if (!std::isfinite(v))
            fail(ErrorCode::NonFinite, "upstream gradient contains non-finite values");
}

} // namespace

LatentCode ToyGenerator::backward_code(const LatentCode& code, const ForwardTrace& t,
                                       std::span<const double> upstream) const {
    const int res = config_.output_resolution();
    const std::size_t plane = static_cast<std::size_t>(res) * res;
    check_upstream(upstream, plane * 3);
    const int last_ch = config_.channels.back();
    auto img = t.image.data();

    // Through the logistic and the RGB projection.
    std::vector<double> grad(static_cast<std::size_t>(last_ch) * plane, 0.0);
    for (int c = 0; c < 3; ++c) {
        const double* wrow = rgb_weight_.data() + static_cast<std::size_t>(c) * last_ch;
        for (std::size_t p = 0; p < plane; ++p) {
            const double y = img[p * 3 + c];
            const double g = upstream[p * 3 + c] * y * (1.0 - y);
            for (int k = 0; k < last_ch; ++k)
                grad[k * plane + p] += wrow[k] * g;
        }
    }

    LatentCode gs{LatentSpace::SSpace, std::vector<std::vector<double>>(config_.layer_count)};
    for (int l = config_.layer_count - 1; l >= 0; --l) {
        const Layer& layer = layers_[l];
        const std::size_t lp = static_cast<std::size_t>(layer.resolution) * layer.resolution;
        auto& gs_l = gs.rows[l];
        gs_l.assign(layer.out_channels, 0.0);
        for (int c = 0; c < layer.out_channels; ++c) {
            const double s = t.styles[l][c];
            double acc = 0.0;
            for (std::size_t p = 0; p < lp; ++p) {
                const std::size_t i = c * lp + p;
                const double gm = grad[i] * lrelu_grad(t.modulated[l][i]);
                acc += gm * t.preact[l][i];
                grad[i] = gm * s;
            }
            gs_l[c] = acc;
        }
        if (l == 0)
            break;
        auto gin = conv3x3_input_grad(grad, layer.in_channels, layer.out_channels, layer.resolution, layer.kernel);
        grad = upsample_transpose(gin, layer.in_channels, layer.resolution / 2);
    }

    if (code.space == LatentSpace::SSpace)
        return gs;

    LatentCode gwp{LatentSpace::WPlus, {}};
    const auto d = static_cast<std::size_t>(config_.latent_dim);
    for (int l = 0; l < config_.layer_count; ++l)
        gwp.rows.push_back(affine_transpose(layers_[l].style_weight, gs.rows[l], d));
    if (code.space == LatentSpace::WPlus)
        return gwp;

    LatentCode gw{LatentSpace::W, {std::vector<double>(d, 0.0)}};
    for (const auto& row : gwp.rows)
        for (std::size_t i = 0; i < d; ++i)
            gw.rows[0][i] += row[i];
    if (code.space == LatentSpace::W)
        return gw;

    // Z: back through the mapping network.
    auto h = affine(map1_, map1_bias_, code.rows[0]);
    auto ga = affine_transpose(map2_, gw.rows[0], d);
    for (std::size_t i = 0; i < d; ++i)
        ga[i] *= lrelu_grad(h[i]);
    return {LatentSpace::Z, {affine_transpose(map1_, ga, d)}};
}

LatentCode ToyGenerator::grad_code(const LatentCode& code, std::span<const double> upstream) const {
    return backward_code(code, forward(code), upstream);
}

TunableWeights ToyGenerator::backward_tunable(const ForwardTrace& t, std::span<const double> upstream) const {
    const int res = config_.output_resolution();
    const std::size_t plane = static_cast<std::size_t>(res) * res;
    check_upstream(upstream, plane * 3);
    const int last_ch = config_.channels.back();
    auto img = t.image.data();

    TunableWeights g;
    g.rgb_weight.assign(static_cast<std::size_t>(3) * last_ch, 0.0);
    g.rgb_bias.assign(3, 0.0);
    std::vector<double> grad(static_cast<std::size_t>(last_ch) * plane, 0.0);
    for (int c = 0; c < 3; ++c) {
        const double* wrow = rgb_weight_.data() + static_cast<std::size_t>(c) * last_ch;
        double* gw = g.rgb_weight.data() + static_cast<std::size_t>(c) * last_ch;
        for (std::size_t p = 0; p < plane; ++p) {
            const double y = img[p * 3 + c];
            const double gr = upstream[p * 3 + c] * y * (1.0 - y);
            g.rgb_bias[c] += gr;
            for (int k = 0; k < last_ch; ++k) {
                gw[k] += gr * t.last_activation[k * plane + p];
                grad[k * plane + p] += wrow[k] * gr;
            }
        }
    }

    const int l = config_.layer_count - 1;
    const Layer& layer = layers_[l];
    for (int c = 0; c < layer.out_channels; ++c) {
        const double s = t.styles[l][c];
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t i = c * plane + p;
            grad[i] *= lrelu_grad(t.modulated[l][i]) * s;
        }
    }
    g.final_kernel.assign(layer.kernel.size(), 0.0);
    g.final_bias.assign(layer.bias.size(), 0.0);
    conv3x3_weight_grad(grad, t.inputs[l], layer.in_channels, layer.out_channels, layer.resolution,
                        g.final_kernel, g.final_bias);
    return g;
}

std::vector<double> ToyGenerator::grad_weights(const LatentCode& code, std::span<const double> upstream,
                                               WeightSubset subset) const {
    const auto g = backward_tunable(forward(code), upstream);
    std::vector<double> out;
    if (subset == WeightSubset::FinalLayer) {
        out = g.final_kernel;
        out.insert(out.end(), g.final_bias.begin(), g.final_bias.end());
    } else {
        out = g.rgb_weight;
        out.insert(out.end(), g.rgb_bias.begin(), g.rgb_bias.end());
    }
    return out;
}

TunableWeights ToyGenerator::tunable_weights() const {
    const Layer& last = layers_.back();
    return {last.kernel, last.bias, rgb_weight_, rgb_bias_};
}

ToyGenerator ToyGenerator::with_tunable_weights(const TunableWeights& w) const {
    const Layer& last = layers_.back();
    if (w.final_kernel.size() != last.kernel.size() || w.final_bias.size() != last.bias.size() ||
        w.rgb_weight.size() != rgb_weight_.size() || w.rgb_bias.size() != rgb_bias_.size())
        fail(ErrorCode::DimensionMismatch, "tunable weights do not match the generator architecture");
    for (const auto* v : {&w.final_kernel, &w.final_bias, &w.rgb_weight, &w.rgb_bias})
        for (double x : *v)
            if (!std::isfinite(x))
                fail(ErrorCode::NonFinite, "tunable weights contain non-finite values");
    ToyGenerator out = *this;
    out.layers_.back().kernel = w.final_kernel;
    out.layers_.back().bias = w.final_bias;
    out.rgb_weight_ = w.rgb_weight;
    out.rgb_bias_ = w.rgb_bias;
    return out;
}

} // namespace segedit
