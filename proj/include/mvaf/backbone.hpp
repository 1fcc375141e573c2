#pragma once

#include <string>

#include "mvaf/autodiff.hpp"
#include "mvaf/config.hpp"
#include "mvaf/optim.hpp"

namespace mvaf {

struct ViewFeatureMap {
    ad::Var map;     // (C, H, W)
    int stride = 1;  // relative to the backbone input
};

// Top-down / upsample-concat network: blocks of (3x3 conv + norm + leaky
// ReLU) with a stride-2 first conv per block, each block output mapped back
// to the common stride with a transposed conv and concatenated channel-wise.
class Backbone {
public:
    // Registers parameters under `prefix.` in `store`.
    // `first_up_block`: index of the first block contributing to the
    // upsample-concat stage (1 for the CV backbone, whose first block sits
    // below the common stride).
    Backbone() = default;
    Backbone(ParamStore* store, const std::string& prefix, const BackboneConfig& cfg,
             int in_channels, const std::string& norm_mode, double leaky_slope, Rng* rng,
             int first_up_block = 0);

    ViewFeatureMap forward(const ad::Var& input, bool training);

    int output_channels() const;
    int output_stride() const { return cfg_.up_stride; }

private:
    struct Layer {
        ad::Var w, b, gamma, beta;
        int stride = 1;
        std::shared_ptr<ad::NormState> norm;
    };
    struct Block {
        std::vector<Layer> convs;
        Layer up;  // transposed conv back to up_stride
        int up_factor = 1;
    };

    ad::Var norm_act(const Layer& l, const ad::Var& x, bool training);

    BackboneConfig cfg_;
    std::string norm_mode_;
    double leaky_slope_ = 0.1;
    std::vector<Block> blocks_;
    int first_up_block_ = 0;
};

// Initializers shared with the pointwise MLPs.
Tensor he_init(std::vector<int> shape, int fan_in, Rng* rng);

}  // namespace mvaf
