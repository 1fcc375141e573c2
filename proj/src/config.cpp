#include "mvaf/config.hpp"

#include <fstream>

#include <json.hpp>

namespace mvaf {

using nlohmann::json;

namespace {

json grid_to_json(const VoxelGridSpec& g) {
    return json{{"kind", g.kind == ViewKind::BEV ? "bev" : "rv"},
                {"row_range", {g.row_min, g.row_max}},
                {"col_range", {g.col_min, g.col_max}},
                {"aux_range", {g.aux_min, g.aux_max}},
                {"cell", {g.row_cell, g.col_cell}}};
}

VoxelGridSpec grid_from_json(const json& j) {
    VoxelGridSpec g;
    g.kind = j.at("kind").get<std::string>() == "rv" ? ViewKind::RV : ViewKind::BEV;
    g.row_min = j.at("row_range")[0];
    g.row_max = j.at("row_range")[1];
    g.col_min = j.at("col_range")[0];
    g.col_max = j.at("col_range")[1];
    g.aux_min = j.at("aux_range")[0];
    g.aux_max = j.at("aux_range")[1];
    g.row_cell = j.at("cell")[0];
    g.col_cell = j.at("cell")[1];
    return g;
}

json backbone_to_json(const BackboneConfig& b) {
    return json{{"blocks", b.blocks},
                {"channels", b.channels},
                {"up_channels", b.up_channels},
                {"up_stride", b.up_stride}};
}

BackboneConfig backbone_from_json(const json& j) {
    BackboneConfig b;
    b.blocks = j.at("blocks").get<std::vector<int>>();
    b.channels = j.at("channels").get<std::vector<int>>();
    b.up_channels = j.at("up_channels");
    b.up_stride = j.at("up_stride");
    return b;
}

}  // namespace

RunConfig RunConfig::toy() {
    RunConfig c;
    c.bev_grid.kind = ViewKind::BEV;
    c.bev_grid.row_min = -25.6;
    c.bev_grid.row_max = 25.6;
    c.bev_grid.col_min = 0;
    c.bev_grid.col_max = 51.2;
    c.bev_grid.aux_min = -1;
    c.bev_grid.aux_max = 3;
    c.bev_grid.row_cell = 0.8;
    c.bev_grid.col_cell = 0.8;  // 64 x 64

    c.rv_grid.kind = ViewKind::RV;
    c.rv_grid.row_min = -1;
    c.rv_grid.row_max = 3;
    c.rv_grid.col_min = -kPi / 2;
    c.rv_grid.col_max = kPi / 2;
    c.rv_grid.row_cell = 0.5;        // 8 rows
    c.rv_grid.col_cell = kPi / 64;   // 64 cols

    c.bev_backbone = {{1, 1, 1}, {8, 16, 32}, 8, 2};
    c.rv_backbone = {{1, 1, 1}, {8, 16, 32}, 8, 2};
    c.cv_backbone = {{1, 1, 1, 1}, {8, 16, 32, 32}, 8, 4};
    c.fusion_backbone = {{1, 1, 1}, {32, 64, 64}, 16, 2};

    c.anchor_z_bottom = -0.9;  // synthetic ground height
    return c;
}

RunConfig RunConfig::paper_scale() {
    RunConfig c = toy();
    c.bev_grid = VoxelGridSpec::paper_bev();
    c.rv_grid = VoxelGridSpec::paper_rv();
    c.point_feat_dim = 64;
    c.common_dim = 64;
    c.raw_dim = 64;
    c.apf_hidden = 96;
    c.mid_hidden = 64;
    c.bev_backbone = {{4, 6, 6}, {64, 128, 256}, 128, 2};
    c.rv_backbone = {{4, 6, 6}, {64, 128, 256}, 128, 2};
    c.cv_backbone = {{2, 2, 2, 2}, {32, 64, 128, 256}, 64, 4};
    c.fusion_backbone = {{4, 6, 6}, {64, 128, 256}, 128, 2};
    c.image_width = 1248;
    c.image_height = 384;
    c.anchor_z_bottom = -1.78;
    return c;
}

void RunConfig::validate() const {
    auto check_backbone = [](const BackboneConfig& b, const char* name, size_t want_blocks) {
        if (b.blocks.size() != b.channels.size())
            throw ConfigError(std::string(name) + ": blocks/channels length mismatch");
        if (b.blocks.size() != want_blocks)
            throw ConfigError(std::string(name) + ": expected " + std::to_string(want_blocks) +
                              " blocks");
        for (int n : b.blocks)
            if (n < 1) throw ConfigError(std::string(name) + ": empty block");
        if (b.up_channels < 1 || b.up_stride < 1)
            throw ConfigError(std::string(name) + ": bad upsample settings");
    };
    check_backbone(bev_backbone, "bev_backbone", 3);
    check_backbone(rv_backbone, "rv_backbone", 3);
    check_backbone(cv_backbone, "cv_backbone", 4);
    check_backbone(fusion_backbone, "fusion_backbone", 3);
    if (bev_grid.rows() % 8 || bev_grid.cols() % 8)
        throw ConfigError("BEV grid dims must be divisible by 8");
    if (rv_grid.rows() % 8 || rv_grid.cols() % 8)
        throw ConfigError("RV grid dims must be divisible by 8");
    if (image_width % 16 || image_height % 16)
        throw ConfigError("image dims must be divisible by 16");
    if (fusion_variant != "apf" && fusion_variant != "es" && fusion_variant != "sc")
        throw ConfigError("fusion_variant must be apf, es or sc");
    if (norm_mode != "batch" && norm_mode != "affine")
        throw ConfigError("norm_mode must be batch or affine");
    if (anchor_w <= 0 || anchor_l <= 0 || anchor_h <= 0) throw ConfigError("anchor dims must be positive");
    if (beta_loc < 0 || beta_cls < 0 || beta_dir < 0 || beta_fore < 0 || beta_ctr < 0)
        throw ConfigError("loss weights must be nonnegative");
    if (batch_size < 1 || train_steps < 1) throw ConfigError("bad optimizer settings");
    if (aug_rot < 0 || aug_rot > kPi / 4 + 1e-12) throw ConfigError("aug_rot outside [0, pi/4]");
    if (aug_scale_lo > aug_scale_hi || aug_scale_lo < 0.5)
        throw ConfigError("bad augmentation scale range");
}

std::string config_to_json(const RunConfig& c) {
    json j{{"schema_version", c.schema_version},
           {"dataset", {{"root", c.dataset_root}, {"split", c.split}}},
           {"seed", c.seed},
           {"bev_grid", grid_to_json(c.bev_grid)},
           {"rv_grid", grid_to_json(c.rv_grid)},
           {"image", {{"width", c.image_width}, {"height", c.image_height}}},
           {"widths",
            {{"point_feat", c.point_feat_dim},
             {"common", c.common_dim},
             {"raw", c.raw_dim},
             {"apf_hidden", c.apf_hidden},
             {"mid_hidden", c.mid_hidden}}},
           {"backbones",
            {{"bev", backbone_to_json(c.bev_backbone)},
             {"rv", backbone_to_json(c.rv_backbone)},
             {"cv", backbone_to_json(c.cv_backbone)},
             {"fusion", backbone_to_json(c.fusion_backbone)}}},
           {"fusion",
            {{"variant", c.fusion_variant},
             {"apw_cls", c.apw_cls},
             {"apw_ctr", c.apw_ctr},
             {"apw_weighting", c.apw_weighting},
             {"apw_after_enrich", c.apw_after_enrich}}},
           {"anchors",
            {{"w", c.anchor_w}, {"l", c.anchor_l}, {"h", c.anchor_h}, {"z_bottom", c.anchor_z_bottom}}},
           {"matching",
            {{"pos_iou", c.pos_iou}, {"neg_iou", c.neg_iou}, {"nms_iou", c.nms_iou}, {"score_thr", c.score_thr}}},
           {"loss_weights",
            {{"loc", c.beta_loc}, {"cls", c.beta_cls}, {"dir", c.beta_dir}, {"fore", c.beta_fore}, {"ctr", c.beta_ctr}}},
           {"optimizer",
            {{"max_lr", c.max_lr},
             {"weight_decay", c.weight_decay},
             {"batch_size", c.batch_size},
             {"train_steps", c.train_steps}}},
           {"norm_mode", c.norm_mode},
           {"leaky_slope", c.leaky_slope},
           {"augment",
            {{"enabled", c.augment},
             {"rot", c.aug_rot},
             {"scale", {c.aug_scale_lo, c.aug_scale_hi}}}}};
    return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config parse error: ") + e.what());
    }
    RunConfig c = RunConfig::toy();
    try {
        if (j.at("schema_version").get<int>() != 1)
            throw ConfigError("unsupported config schema_version");
        c.dataset_root = j.at("dataset").at("root");
        c.split = j.at("dataset").at("split");
        c.seed = j.at("seed");
        c.bev_grid = grid_from_json(j.at("bev_grid"));
        c.rv_grid = grid_from_json(j.at("rv_grid"));
        c.image_width = j.at("image").at("width");
        c.image_height = j.at("image").at("height");
        const json& w = j.at("widths");
        c.point_feat_dim = w.at("point_feat");
        c.common_dim = w.at("common");
        c.raw_dim = w.at("raw");
        c.apf_hidden = w.at("apf_hidden");
        c.mid_hidden = w.at("mid_hidden");
        const json& b = j.at("backbones");
        c.bev_backbone = backbone_from_json(b.at("bev"));
        c.rv_backbone = backbone_from_json(b.at("rv"));
        c.cv_backbone = backbone_from_json(b.at("cv"));
        c.fusion_backbone = backbone_from_json(b.at("fusion"));
        const json& fu = j.at("fusion");
        c.fusion_variant = fu.at("variant");
        c.apw_cls = fu.at("apw_cls");
        c.apw_ctr = fu.at("apw_ctr");
        c.apw_weighting = fu.at("apw_weighting");
        c.apw_after_enrich = fu.at("apw_after_enrich");
        const json& a = j.at("anchors");
        c.anchor_w = a.at("w");
        c.anchor_l = a.at("l");
        c.anchor_h = a.at("h");
        c.anchor_z_bottom = a.at("z_bottom");
        const json& m = j.at("matching");
        c.pos_iou = m.at("pos_iou");
        c.neg_iou = m.at("neg_iou");
        c.nms_iou = m.at("nms_iou");
        c.score_thr = m.at("score_thr");
        const json& lw = j.at("loss_weights");
        c.beta_loc = lw.at("loc");
        c.beta_cls = lw.at("cls");
        c.beta_dir = lw.at("dir");
        c.beta_fore = lw.at("fore");
        c.beta_ctr = lw.at("ctr");
        const json& o = j.at("optimizer");
        c.max_lr = o.at("max_lr");
        c.weight_decay = o.at("weight_decay");
        c.batch_size = o.at("batch_size");
        c.train_steps = o.at("train_steps");
        c.norm_mode = j.at("norm_mode");
        c.leaky_slope = j.at("leaky_slope");
        const json& au = j.at("augment");
        c.augment = au.at("enabled");
        c.aug_rot = au.at("rot");
        c.aug_scale_lo = au.at("scale")[0];
        c.aug_scale_hi = au.at("scale")[1];
    } catch (const json::exception& e) {
        throw FormatError(std::string("config field error: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return config_from_json(ss.str());
}

void save_config_file(const std::string& path, const RunConfig& cfg) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write config: " + path);
    f << config_to_json(cfg);
}

}  // namespace mvaf
