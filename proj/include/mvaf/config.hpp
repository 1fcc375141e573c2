#pragma once

#include <string>

#include "mvaf/voxelizer.hpp"

namespace mvaf {

struct BackboneConfig {
    std::vector<int> blocks;    // conv layers per block; first conv of each block has stride 2
    std::vector<int> channels;  // output channels per block
    int up_channels = 8;        // channels each block contributes after upsampling
    int up_stride = 2;          // common output stride
};

// Fully resolved run settings. Serialized as versioned JSON next to every
// command's outputs.
struct RunConfig {
    int schema_version = 1;

    std::string dataset_root;
    std::string split = "train.txt";
    uint64_t seed = 0;

    VoxelGridSpec bev_grid;
    VoxelGridSpec rv_grid;
    int image_width = 128;
    int image_height = 64;

    int point_feat_dim = 32;  // pillar encoder output width (64 at paper scale)
    int common_dim = 16;      // per-view point feature width C before APF
    int raw_dim = 16;         // MLP_Raw output width
    int apf_hidden = 24;      // APF MLP hidden width (3C/2)
    int mid_hidden = 32;      // APW trunk width

    BackboneConfig bev_backbone, rv_backbone, cv_backbone, fusion_backbone;

    std::string fusion_variant = "apf";  // apf | es | sc
    bool apw_cls = true;
    bool apw_ctr = true;
    bool apw_weighting = true;
    bool apw_after_enrich = true;  // whether APW consumes raw-enriched features

    double anchor_w = 1.6, anchor_l = 3.9, anchor_h = 1.56;
    double anchor_z_bottom = -1.78;
    // Soft matching thresholds: gt yaws are arbitrary while anchors are
    // axis-aligned, so demanding high anchor-gt IoU starves the box head.
    double pos_iou = 0.45, neg_iou = 0.3;
    double nms_iou = 0.1, score_thr = 0.05;

    double beta_loc = 10, beta_cls = 1, beta_dir = 0.2, beta_fore = 1, beta_ctr = 1;

    double max_lr = 2e-2;
    double weight_decay = 0.01;
    int batch_size = 2;
    long long train_steps = 500;
    std::string norm_mode = "batch";  // batch | affine
    double leaky_slope = 0.1;

    bool augment = false;
    double aug_rot = kPi / 4;
    double aug_scale_lo = 0.95, aug_scale_hi = 1.05;

    // Desk-scale defaults: small grids and channel widths, CPU-trainable in
    // minutes.
    static RunConfig toy();
    // Paper grids (400x352 BEV, 80x1280 RV) and wide channels.
    static RunConfig paper_scale();

    void validate() const;  // throws ConfigError
};

std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& json_text);
RunConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const RunConfig& cfg);

}  // namespace mvaf
