#pragma once

#include "image.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace segedit {

enum class LatentSpace { Z, W, WPlus, SSpace };

std::string_view to_string(LatentSpace space);
LatentSpace parse_space(std::string_view name);

struct GeneratorConfig {
    int latent_dim = 32;
    int layer_count = 4;
    int base_resolution = 4;
    std::vector<int> channels{16, 16, 8, 8};
    std::uint64_t seed = 1;

    int output_resolution() const { return base_resolution << (layer_count - 1); }
    void validate() const;
};

// A code in one of the four input spaces. Z and W hold one row of
// latent_dim values; WPlus holds layer_count such rows; SSpace holds one
// row per layer with channels[l] values.
struct LatentCode {
    LatentSpace space = LatentSpace::W;
    std::vector<std::vector<double>> rows;

    std::size_t value_count() const;
    bool all_finite() const;

    friend bool operator==(const LatentCode&, const LatentCode&) = default;
};

enum class WeightSubset { FinalLayer, RgbProjection };

std::string_view to_string(WeightSubset subset);
WeightSubset parse_weight_subset(std::string_view name);

// The fine-tunable part of the generator: the last 3x3 convolution and the
// 1x1 RGB projection.
struct TunableWeights {
    std::vector<double> final_kernel;
    std::vector<double> final_bias;
    std::vector<double> rgb_weight;
    std::vector<double> rgb_bias;

    friend bool operator==(const TunableWeights&, const TunableWeights&) = default;
};

// Intermediate values of one synthesis, kept for the reverse pass.
struct ForwardTrace {
    std::vector<std::vector<double>> styles;   // s_l per layer
    std::vector<std::vector<double>> inputs;   // conv input per layer (after upsampling)
    std::vector<std::vector<double>> preact;   // conv output + bias per layer
    std::vector<std::vector<double>> modulated;
    std::vector<double> last_activation;
    ImageBuffer image;
};

// Style-based toy decoder:
//   mapping  z -> w : affine, leaky-ReLU(0.2), affine
//   styles   s_l = A_l w_l + b_l
//   synthesis: learned constant -> per layer l: (bilinear x2 upsample for
//   l > 0) -> 3x3 conv, zero padding, + bias -> * s_l per channel ->
//   leaky-ReLU(0.2); then a 1x1 RGB projection and the logistic function.
//
// Weights are drawn from SplitMix64(seed) as uniform(-g, g) with
// g = 2/sqrt(fan_in), in this order:
//   mapping M1 (D x D, fan_in D), c1 (D), M2 (D x D), c2 (D);
//   constant tensor (channels[0] x base^2, fan_in 1);
//   for each layer l: kernel (c_l x c_in x 3 x 3, fan_in 9 c_in), conv bias
//   (c_l, same fan_in), style weight A_l (c_l x D, fan_in D), style bias
//   b_l (c_l, fan_in D, plus a constant offset of 1);
//   RGB weight (3 x c_last, fan_in c_last), RGB bias (3).
// Layer 0 reads channels[0] channels from the constant tensor.
class ToyGenerator {
public:
    explicit ToyGenerator(GeneratorConfig config);

    const GeneratorConfig& config() const noexcept { return config_; }

    std::size_t parameter_count() const;
    // All weights concatenated in draw order.
    std::vector<double> flat_weights() const;

    LatentCode map_z_to_w(const LatentCode& z) const;
    LatentCode promote(const LatentCode& code, LatentSpace target) const;

    ImageBuffer synthesize(const LatentCode& code) const;
    ForwardTrace forward(const LatentCode& code) const;

    // Reverse-mode gradient of <upstream, synthesize(code)> with respect to
    // the code payload, in the code's own space.
    LatentCode grad_code(const LatentCode& code, std::span<const double> upstream) const;
    LatentCode backward_code(const LatentCode& code, const ForwardTrace& trace,
                             std::span<const double> upstream) const;

    // Gradient with respect to one fine-tunable subset. Layout: kernel then
    // bias for FinalLayer; weight (3 x c_last, row-major) then bias for
    // RgbProjection.
    std::vector<double> grad_weights(const LatentCode& code, std::span<const double> upstream,
                                     WeightSubset subset) const;
    TunableWeights backward_tunable(const ForwardTrace& trace, std::span<const double> upstream) const;

    TunableWeights tunable_weights() const;
    ToyGenerator with_tunable_weights(const TunableWeights& weights) const;

    // Sign of every leaky-ReLU input visited by synthesize(code), including
    // the mapping network's hidden layer for Z codes. Two codes with equal
    // patterns lie in the same smooth piece of the piecewise-smooth map.
    std::vector<bool> activation_pattern(const LatentCode& code) const;

    // Throws SpaceMismatch / DimensionMismatch / NonFinite.
    void check_code(const LatentCode& code) const;
    LatentCode zero_code(LatentSpace space) const;

    int output_size() const noexcept { return config_.output_resolution(); }

private:
    struct Layer {
        int in_channels = 0;
        int out_channels = 0;
        int resolution = 0;
        std::vector<double> kernel;
        std::vector<double> bias;
        std::vector<double> style_weight;
        std::vector<double> style_bias;
    };

    LatentCode to_sspace(const LatentCode& code) const;
    std::vector<double> style_of(int layer, std::span<const double> w) const;

    GeneratorConfig config_;
    std::vector<double> map1_, map1_bias_, map2_, map2_bias_;
    std::vector<double> constant_;
    std::vector<Layer> layers_;
    std::vector<double> rgb_weight_, rgb_bias_;
};

} // namespace segedit
