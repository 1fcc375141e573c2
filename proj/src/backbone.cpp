#include "mvaf/backbone.hpp"

#include <cmath>

namespace mvaf {

Tensor he_init(std::vector<int> shape, int fan_in, Rng* rng) {
    Tensor t(std::move(shape));
    double s = std::sqrt(2.0 / std::max(1, fan_in));
    for (double& v : t.data) v = s * rng->gauss();
    return t;
}

Backbone::Backbone(ParamStore* store, const std::string& prefix, const BackboneConfig& cfg,
                   int in_channels, const std::string& norm_mode, double leaky_slope, Rng* rng,
                   int first_up_block)
    : cfg_(cfg), norm_mode_(norm_mode), leaky_slope_(leaky_slope), first_up_block_(first_up_block) {
    int cin = in_channels;
    int block_stride = 1;
    for (size_t bi = 0; bi < cfg.blocks.size(); ++bi) {
        Block block;
        int cout = cfg.channels[bi];
        for (int li = 0; li < cfg.blocks[bi]; ++li) {
            Layer l;
            std::string base =
                prefix + ".b" + std::to_string(bi) + ".conv" + std::to_string(li);
            l.stride = li == 0 ? 2 : 1;
            l.w = store->create(base + ".w", he_init({cout, cin, 3, 3}, cin * 9, rng));
            l.b = store->create(base + ".b", Tensor({cout}));
            l.gamma = store->create(base + ".gamma", Tensor::full({cout}, 1.0));
            l.beta = store->create(base + ".beta", Tensor({cout}));
            l.norm = std::make_shared<ad::NormState>();
            block.convs.push_back(std::move(l));
            cin = cout;
        }
        block_stride *= 2;
        if (static_cast<int>(bi) >= first_up_block) {
            if (block_stride % cfg.up_stride != 0)
                throw ConfigError(prefix + ": block stride " + std::to_string(block_stride) +
                                  " not a multiple of up_stride " + std::to_string(cfg.up_stride));
            block.up_factor = block_stride / cfg.up_stride;
            int k = block.up_factor;
            std::string base = prefix + ".b" + std::to_string(bi) + ".up";
            Layer up;
            up.w = store->create(base + ".w",
                                 he_init({cout, cfg.up_channels, k, k}, cout * k * k, rng));
            up.b = store->create(base + ".b", Tensor({cfg.up_channels}));
            up.gamma = store->create(base + ".gamma", Tensor::full({cfg.up_channels}, 1.0));
            up.beta = store->create(base + ".beta", Tensor({cfg.up_channels}));
            up.norm = std::make_shared<ad::NormState>();
            block.up = std::move(up);
        }
        blocks_.push_back(std::move(block));
    }
}

ad::Var Backbone::norm_act(const Layer& l, const ad::Var& x, bool training) {
    ad::Var n = norm_mode_ == "batch" ? ad::batch_norm(x, l.gamma, l.beta, l.norm.get(), training)
                                      : ad::channel_affine(x, l.gamma, l.beta);
    return ad::leaky_relu(n, leaky_slope_);
}

ViewFeatureMap Backbone::forward(const ad::Var& input, bool training) {
    const Tensor& in = input.value();
    int total_stride = 1 << static_cast<int>(blocks_.size());
    if (in.ndim() != 3 || in.dim(1) % total_stride || in.dim(2) % total_stride)
        throw ShapeError("backbone input " + in.shape_str() + " not divisible by stride " +
                         std::to_string(total_stride));
    ad::Var x = input;
    std::vector<ad::Var> ups;
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
        for (const Layer& l : blocks_[bi].convs) {
            x = ad::conv2d(x, l.w, l.b, l.stride, 1);
            x = norm_act(l, x, training);
        }
        if (static_cast<int>(bi) >= first_up_block_) {
            const Layer& up = blocks_[bi].up;
            ad::Var u = ad::transposed_conv2d(x, up.w, up.b, blocks_[bi].up_factor);
            ups.push_back(norm_act(up, u, training));
        }
    }
    ViewFeatureMap out;
    out.map = ups.size() == 1 ? ups[0] : ad::concat_channels(ups);
    out.stride = cfg_.up_stride;
    return out;
}

int Backbone::output_channels() const {
    return cfg_.up_channels * (static_cast<int>(cfg_.blocks.size()) - first_up_block_);
}

}  // namespace mvaf
