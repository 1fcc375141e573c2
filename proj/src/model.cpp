#include "mvaf/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace mvaf {

namespace fs = std::filesystem;

Sample make_sample(std::string id, const SyntheticScene& scene) {
    Sample s;
    s.id = std::move(id);
    s.cloud = scene.cloud;
    s.image = scene.image;
    s.calib = scene.calib;
    s.labels = scene.labels;
    for (const auto& label : scene.labels)
        if (!label.dont_care()) s.gt_boxes.push_back(camera_label_to_lidar_box(label, s.calib));
    return s;
}

Sample load_sample(const std::string& root, const std::string& id) {
    Sample s;
    s.id = id;
    s.cloud = read_point_cloud(root + "/velodyne/" + id + ".bin");
    s.calib = read_calib(root + "/calib/" + id + ".txt");
    s.labels = read_labels(root + "/label_2/" + id + ".txt");
    s.image = read_image_ppm(root + "/image_2/" + id + ".ppm");
    for (const auto& label : s.labels)
        if (!label.dont_care()) s.gt_boxes.push_back(camera_label_to_lidar_box(label, s.calib));
    return s;
}

namespace {

Tensor points_to_tensor(const std::vector<Point>& points) {
    Tensor t({static_cast<int>(points.size()), 4});
    for (size_t i = 0; i < points.size(); ++i) {
        t.data[i * 4 + 0] = points[i].x;
        t.data[i * 4 + 1] = points[i].y;
        t.data[i * 4 + 2] = points[i].z;
        t.data[i * 4 + 3] = points[i].intensity;
    }
    return t;
}

Tensor image_to_tensor(const Image& img) {
    Tensor t({3, img.height, img.width});
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            for (int ch = 0; ch < 3; ++ch)
                t.data[(static_cast<size_t>(ch) * img.height + r) * img.width + c] =
                    img.at(r, c, ch);
    return t;
}

int fused_width(const RunConfig& cfg) {
    return cfg.fusion_variant == "es" ? cfg.common_dim : 3 * cfg.common_dim;
}

}  // namespace

MvafModel::MvafModel(const RunConfig& cfg, Rng* rng) : cfg_(cfg) {
    cfg_.validate();
    head_stride_ = cfg_.fusion_backbone.up_stride;
    anchors_ = generate_anchors(cfg_.bev_grid, head_stride_, cfg_.anchor_w, cfg_.anchor_l,
                                cfg_.anchor_h, cfg_.anchor_z_bottom);

    bev_pillar_enc_ = RawEncoder(&store_, "svfe.bev", cfg_.point_feat_dim, cfg_.norm_mode, rng);
    rv_pillar_enc_ = RawEncoder(&store_, "svfe.rv", cfg_.point_feat_dim, cfg_.norm_mode, rng);
    bev_backbone_ = Backbone(&store_, "bb.bev", cfg_.bev_backbone, cfg_.point_feat_dim,
                             cfg_.norm_mode, cfg_.leaky_slope, rng);
    rv_backbone_ = Backbone(&store_, "bb.rv", cfg_.rv_backbone, cfg_.point_feat_dim, cfg_.norm_mode,
                            cfg_.leaky_slope, rng);
    cv_backbone_ = Backbone(&store_, "bb.cv", cfg_.cv_backbone, 3, cfg_.norm_mode, cfg_.leaky_slope,
                            rng, /*first_up_block=*/1);
    projector_ = ViewProjector(&store_, "proj", cv_backbone_.output_channels(),
                               bev_backbone_.output_channels(), rv_backbone_.output_channels(),
                               cfg_.common_dim, rng);
    apf_ = ApfModule(&store_, "apf", cfg_.common_dim, cfg_.apf_hidden, rng);
    raw_enc_ = RawEncoder(&store_, "raw", cfg_.raw_dim, cfg_.norm_mode, rng);
    apw_ = ApwModule(&store_, "apw", fused_width(cfg_) + cfg_.raw_dim, cfg_.mid_hidden, rng);

    fusion_backbone_ = Backbone(&store_, "bb.fusion", cfg_.fusion_backbone,
                                fused_width(cfg_) + cfg_.raw_dim, cfg_.norm_mode, cfg_.leaky_slope,
                                rng);
    const int head_in = fusion_backbone_.output_channels();
    auto head = [&](const std::string& name, int out, double bias) {
        ad::Var w = store_.create("head." + name + ".w",
                                  he_init({out, head_in, 1, 1}, head_in, rng));
        ad::Var b = store_.create("head." + name + ".b", Tensor::full({out}, bias));
        return std::make_pair(w, b);
    };
    // sigmoid(-log 99) ~ 0.01: start the objectness heads near the foreground prior
    std::tie(head_cls_w_, head_cls_b_) = head("cls", AnchorGrid::kPerCell * 1, -std::log(99.0));
    std::tie(head_box_w_, head_box_b_) = head("box", AnchorGrid::kPerCell * 7, 0.0);
    std::tie(head_dir_w_, head_dir_b_) = head("dir", AnchorGrid::kPerCell * 2, 0.0);
}

ForwardOutputs MvafModel::forward(const Sample& sample, bool training) {
    ForwardOutputs out;

    // SVFE: BEV pillar stream (its point set is carried through fusion)
    auto [bev_idx, bev_points] = crop_points(sample.cloud, cfg_.bev_grid);
    (void)bev_idx;
    if (bev_points.empty()) throw NumericError("forward: no points inside the BEV range");
    out.points = std::move(bev_points);
    out.bev_pillars = assign_pillars(out.points, cfg_.bev_grid);
    ad::Var raw = ad::make_leaf(points_to_tensor(out.points));
    ad::Var bev_pf = bev_pillar_enc_.forward(raw, training);
    ad::Var bev_img = scatter_to_pseudo_image(pillar_max_pool(bev_pf, out.bev_pillars),
                                              out.bev_pillars, cfg_.bev_grid);
    ViewFeatureMap bev_map = bev_backbone_.forward(bev_img, training);

    // SVFE: RV pillar stream
    auto [rv_idx, rv_points] = crop_points(sample.cloud, cfg_.rv_grid);
    (void)rv_idx;
    ViewFeatureMap rv_map;
    {
        PillarAssignment rv_assign = assign_pillars(rv_points, cfg_.rv_grid);
        ad::Var rv_raw = ad::make_leaf(points_to_tensor(rv_points));
        ad::Var rv_pf = rv_pillar_enc_.forward(rv_raw, training);
        ad::Var rv_img =
            scatter_to_pseudo_image(pillar_max_pool(rv_pf, rv_assign), rv_assign, cfg_.rv_grid);
        rv_map = rv_backbone_.forward(rv_img, training);
    }

    // SVFE: camera stream
    ad::Var image = ad::make_leaf(image_to_tensor(sample.image));
    ViewFeatureMap cv_map = cv_backbone_.forward(image, training);

    // MVFF: project the BEV point set into each feature map and gather
    ViewMapping bev_vm = view_mapping_of(cfg_.bev_grid, bev_map.stride);
    ViewMapping rv_vm = view_mapping_of(cfg_.rv_grid, rv_map.stride);
    ViewMapping cv_vm;
    cv_vm.kind = ViewKind::CV;
    cv_vm.stride = cv_map.stride;
    cv_vm.m_cv = sample.calib.composite();
    cv_vm.image_width = sample.image.width;
    cv_vm.image_height = sample.image.height;
    ad::GatherCoords bev_coords, rv_coords, cv_coords;
    for (const Point& p : out.points) {
        bev_coords.push_back(project_to_view(p, bev_vm));
        rv_coords.push_back(project_to_view(p, rv_vm));
        cv_coords.push_back(project_to_view(p, cv_vm));
    }
    out.views = projector_.forward(ad::bilinear_gather(cv_map.map, cv_coords),
                                   ad::bilinear_gather(bev_map.map, bev_coords),
                                   ad::bilinear_gather(rv_map.map, rv_coords));

    if (cfg_.fusion_variant == "apf")
        out.fused = apf_.forward(out.views);
    else if (cfg_.fusion_variant == "es")
        out.fused = fusion_variant_es(out.views);
    else
        out.fused = fusion_variant_sc(out.views);

    ad::Var raw_mapped = raw_enc_.forward(raw, training);
    const bool weighting = cfg_.apw_weighting && cfg_.apw_cls;
    ad::Var ffd_input;
    if (cfg_.apw_after_enrich) {
        ad::Var enriched = enrich_with_raw(out.fused.fused, raw_mapped);
        out.apw = apw_.forward(enriched, weighting);
        ffd_input = out.apw.weighted;
    } else {
        out.apw = apw_.forward(out.fused.fused, weighting);
        ffd_input = enrich_with_raw(out.apw.weighted, raw_mapped);
    }

    // FFD: fused point features back onto the BEV grid, then the anchor heads
    ad::Var ffd_img = scatter_to_pseudo_image(pillar_max_pool(ffd_input, out.bev_pillars),
                                              out.bev_pillars, cfg_.bev_grid);
    ViewFeatureMap fused_map = fusion_backbone_.forward(ffd_img, training);
    out.cls_logits = ad::head_reshape(ad::conv2d(fused_map.map, head_cls_w_, head_cls_b_, 1, 0),
                                      AnchorGrid::kPerCell, 1);
    out.box_pred = ad::head_reshape(ad::conv2d(fused_map.map, head_box_w_, head_box_b_, 1, 0),
                                    AnchorGrid::kPerCell, 7);
    out.dir_logits = ad::head_reshape(ad::conv2d(fused_map.map, head_dir_w_, head_dir_b_, 1, 0),
                                      AnchorGrid::kPerCell, 2);
    return out;
}

ad::Var model_loss(const ForwardOutputs& out, const Sample& sample, const RunConfig& cfg,
                   const AnchorGrid& anchors, std::map<std::string, double>* parts_out) {
    const TargetAssignment assign =
        assign_targets(anchors, sample.gt_boxes, out.points, cfg.pos_iou, cfg.neg_iou);
    const size_t na = anchors.anchors.size();
    const double anchor_norm = std::max(1, assign.num_positive);

    std::vector<double> cls_targets(na, 0.0), cls_weights(na, 1.0);
    Tensor loc_targets({static_cast<int>(na), 7});
    std::vector<double> loc_weights(na * 7, 0.0);
    std::vector<int> dir_targets(na, 0);
    std::vector<double> dir_weights(na, 0.0);
    for (size_t i = 0; i < na; ++i) {
        const int g = assign.anchor_gt[i];
        if (g == -2) {
            cls_weights[i] = 0.0;
            continue;
        }
        if (g < 0) continue;
        cls_targets[i] = 1.0;
        const Box3D& anchor = anchors.anchors[i];
        const BoxEncoding enc = encode_box(sample.gt_boxes[static_cast<size_t>(g)], anchor);
        for (int k = 0; k < 7; ++k) {
            loc_targets.data[i * 7 + static_cast<size_t>(k)] = enc.v[static_cast<size_t>(k)];
            loc_weights[i * 7 + static_cast<size_t>(k)] = 1.0;
        }
        dir_targets[i] = direction_bin(sample.gt_boxes[static_cast<size_t>(g)].yaw, anchor.yaw);
        dir_weights[i] = 1.0;
    }

    std::vector<std::pair<std::string, ad::Var>> parts;
    std::vector<double> weights;
    parts.emplace_back("loc", ad::smooth_l1(out.box_pred, loc_targets, loc_weights, anchor_norm));
    weights.push_back(cfg.beta_loc);
    parts.emplace_back("cls", ad::focal_loss(ad::sigmoid(out.cls_logits), cls_targets, cls_weights,
                                             0.25, 2.0, anchor_norm));
    weights.push_back(cfg.beta_cls);
    parts.emplace_back("dir",
                       ad::softmax_cross_entropy(out.dir_logits, dir_targets, dir_weights, anchor_norm));
    weights.push_back(cfg.beta_dir);

    const size_t np = out.points.size();
    const double fg_count = std::accumulate(assign.point_foreground.begin(),
                                            assign.point_foreground.end(), 0.0);
    const double point_norm = std::max(1.0, fg_count);
    if (cfg.apw_cls) {
        std::vector<double> ones(np, 1.0);
        parts.emplace_back("fore", ad::focal_loss(out.apw.cls, assign.point_foreground, ones, 0.25,
                                                  2.0, point_norm));
        weights.push_back(cfg.beta_fore);
    }
    if (cfg.apw_ctr) {
        Tensor ctr_targets({static_cast<int>(np), 3});
        std::vector<double> ctr_weights(np * 3, 0.0);
        for (size_t i = 0; i < np; ++i) {
            if (assign.point_foreground[i] == 0.0) continue;
            for (int k = 0; k < 3; ++k) {
                ctr_targets.data[i * 3 + static_cast<size_t>(k)] =
                    assign.point_center[i][static_cast<size_t>(k)];
                ctr_weights[i * 3 + static_cast<size_t>(k)] = 1.0;
            }
        }
        parts.emplace_back("ctr", ad::smooth_l1(out.apw.ctr, ctr_targets, ctr_weights, point_norm));
        weights.push_back(cfg.beta_ctr);
    }

    if (parts_out)
        for (const auto& [name, v] : parts) (*parts_out)[name] = v.value().data[0];
    return total_loss(parts, weights);
}

std::vector<Detection> predict(MvafModel& model, const Sample& sample) {
    ForwardOutputs out = model.forward(sample, /*training=*/false);
    std::vector<Detection> dets =
        decode_predictions(out.cls_logits.value(), out.box_pred.value(), out.dir_logits.value(),
                           model.anchors(), model.config().score_thr);
    return nms_bev(dets, model.config().nms_iou);
}

std::vector<Label> detections_to_labels(const std::vector<Detection>& dets, const Calib& calib) {
    std::vector<Label> labels;
    for (const auto& d : dets) {
        Label l = lidar_box_to_camera_label(d.box, calib, "Car");
        l.score = d.score;
        labels.push_back(l);
    }
    return labels;
}

// ---- checkpoints ----

namespace {

constexpr char kCkptMagic[8] = {'M', 'V', 'A', 'F', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T take(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("checkpoint: truncated file");
    return v;
}
void put_string(std::ostream& out, const std::string& s) {
    put<uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string take_string(std::istream& in) {
    const uint64_t n = take<uint64_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw FormatError("checkpoint: truncated string");
    return s;
}
void put_tensor(std::ostream& out, const Tensor& t) {
    put<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) put<int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}
Tensor take_tensor(std::istream& in) {
    const uint32_t nd = take<uint32_t>(in);
    std::vector<int> shape(nd);
    for (auto& d : shape) d = take<int32_t>(in);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw FormatError("checkpoint: truncated tensor payload");
    return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store, Adam& adam,
                     long long global_step, const std::string& config_json) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
    out.write(kCkptMagic, sizeof(kCkptMagic));
    put_string(out, config_json);
    put<int64_t>(out, global_step);
    put<uint64_t>(out, store.size());
    for (const auto& name : store.names()) {
        put_string(out, name);
        put_tensor(out, store.get(name).value());
    }
    put<int64_t>(out, adam.step_count());
    for (const auto& m : adam.moments_m()) put_tensor(out, m);
    for (const auto& v : adam.moments_v()) put_tensor(out, v);
    if (!out) throw IoError("checkpoint: write failed for " + path);
}

long long load_checkpoint(const std::string& path, ParamStore& store, Adam* adam,
                          std::string* config_json_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    const std::string config_json = take_string(in);
    if (config_json_out) *config_json_out = config_json;
    const long long global_step = take<int64_t>(in);
    const uint64_t n = take<uint64_t>(in);
    if (n != store.size())
        throw FormatError("checkpoint: parameter count " + std::to_string(n) +
                          " does not match the model's " + std::to_string(store.size()));
    for (uint64_t i = 0; i < n; ++i) {
        const std::string name = take_string(in);
        Tensor t = take_tensor(in);
        if (name != store.names()[i])
            throw FormatError("checkpoint: parameter '" + name + "' where '" + store.names()[i] +
                              "' was expected");
        ad::Var p = store.get(name);
        if (t.shape != p.value().shape)
            throw FormatError("checkpoint: shape mismatch for '" + name + "' (" + t.shape_str() +
                              " vs " + p.value().shape_str() + ")");
        p.value() = std::move(t);
    }
    const long long t_adam = take<int64_t>(in);
    if (adam) {
        adam->set_step_count(t_adam);
        for (auto& m : adam->moments_m()) m = take_tensor(in);
        for (auto& v : adam->moments_v()) v = take_tensor(in);
    }
    return global_step;
}

// ---- training ----

TrainResult train_model(MvafModel& model, const std::vector<Sample>& samples,
                        const std::string& out_dir, std::ostream* log) {
    const RunConfig& cfg = model.config();
    if (samples.empty()) throw ConfigError("train: no samples");
    if (!out_dir.empty()) fs::create_directories(out_dir);

    ParamStore& store = model.params();
    AdamConfig acfg;
    acfg.weight_decay = cfg.weight_decay;
    Adam adam(&store, acfg);
    OneCycleSchedule sched;
    sched.max_lr = cfg.max_lr;
    sched.total_steps = cfg.train_steps;
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    // last-good snapshot for the NaN abort path
    std::vector<Tensor> good_vals, good_m, good_v;
    long long good_step = 0;
    auto snapshot = [&] {
        good_vals.clear();
        for (const auto& name : store.names()) good_vals.push_back(store.get(name).value());
        good_m = adam.moments_m();
        good_v = adam.moments_v();
        good_step = adam.step_count();
    };
    auto restore_and_save = [&] {
        if (good_vals.empty() || out_dir.empty()) return;
        size_t i = 0;
        for (const auto& name : store.names()) store.get(name).value() = good_vals[i++];
        adam.moments_m() = good_m;
        adam.moments_v() = good_v;
        adam.set_step_count(good_step);
        save_checkpoint(out_dir + "/last_good.ckpt", store, adam, good_step,
                        config_to_json(cfg));
    };

    TrainResult result;
    size_t cursor = 0;
    for (long long step = 1; step <= cfg.train_steps; ++step) {
        const auto [lr, momentum] = one_cycle_lr(step - 1, sched);

        ad::Var batch_loss;
        std::map<std::string, double> parts;
        for (int k = 0; k < cfg.batch_size; ++k) {
            Sample sample = samples[cursor % samples.size()];
            ++cursor;
            if (cfg.augment) {
                AugmentParams aug;
                aug.flip = rng.coin();
                aug.theta = rng.uniform(-cfg.aug_rot, cfg.aug_rot);
                aug.scale = rng.uniform(cfg.aug_scale_lo, cfg.aug_scale_hi);
                augment_scene(sample.cloud.points, sample.gt_boxes, aug);
            }
            ForwardOutputs out = model.forward(sample, /*training=*/true);
            std::map<std::string, double> sample_parts;
            ad::Var loss = model_loss(out, sample, cfg, model.anchors(), &sample_parts);
            for (const auto& [name, v] : sample_parts) parts[name] += v / cfg.batch_size;
            batch_loss = k == 0 ? loss : ad::add(batch_loss, loss);
        }
        batch_loss = ad::scale(batch_loss, 1.0 / cfg.batch_size);
        const double loss_value = batch_loss.value().data[0];
        if (!std::isfinite(loss_value)) {
            restore_and_save();
            throw NumericError("train: non-finite loss at step " + std::to_string(step));
        }

        store.zero_grads();
        ad::backward(batch_loss);
        adam.step(lr, momentum);
        snapshot();

        if (step == 1) result.first_loss = loss_value;
        result.final_loss = loss_value;
        result.loss_curve.push_back(loss_value);
        if (log) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", loss_value);
            (*log) << "step " << step << " lr " << lr << " total " << buf;
            for (const auto& [name, v] : parts) (*log) << " " << name << " " << v;
            (*log) << "\n";
        }
        if (!out_dir.empty() && (step % 100 == 0 || step == cfg.train_steps))
            save_checkpoint(out_dir + "/model.ckpt", store, adam, step, config_to_json(cfg));
    }
    result.steps = cfg.train_steps;
    return result;
}

std::vector<EvalFrame> run_inference(MvafModel& model, const std::vector<Sample>& samples) {
    std::vector<EvalFrame> frames;
    for (const auto& sample : samples) {
        EvalFrame f;
        f.detections = predict(model, sample);
        f.gts = labels_to_gt(sample.labels, sample.calib);
        frames.push_back(std::move(f));
    }
    return frames;
}

AblationReport run_ablation(const std::vector<std::pair<std::string, RunConfig>>& variants,
                            const std::vector<Sample>& samples, std::ostream* log) {
    AblationReport report;
    for (const auto& [name, cfg] : variants) {
        AblationRow row;
        row.name = name;
        try {
            Rng rng(cfg.seed);
            MvafModel model(cfg, &rng);
            TrainResult tr = train_model(model, samples, "", log);
            row.final_loss = tr.final_loss;
            std::vector<EvalFrame> frames = run_inference(model, samples);
            const IouFn bev = [](const Box3D& a, const Box3D& b) { return rotated_iou_bev(a, b); };
            row.ap_all = ap_40(frames, bev, 0.5, Difficulty::All).ap;
            row.ap_easy = ap_40(frames, bev, 0.5, Difficulty::Easy).ap;
            row.ap_moderate = ap_40(frames, bev, 0.5, Difficulty::Moderate).ap;
            row.ap_hard = ap_40(frames, bev, 0.5, Difficulty::Hard).ap;
        } catch (const std::exception& e) {
            row.failed = true;
            if (log) (*log) << "variant " << name << " failed: " << e.what() << "\n";
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::vector<std::pair<std::string, RunConfig>> standard_ablation_variants(const RunConfig& base) {
    std::vector<std::pair<std::string, RunConfig>> variants;
    auto push = [&](const std::string& name, const std::string& fusion, bool cls, bool ctr,
                    bool weighting) {
        RunConfig cfg = base;
        cfg.fusion_variant = fusion;
        cfg.apw_cls = cls;
        cfg.apw_ctr = ctr;
        cfg.apw_weighting = weighting;
        variants.emplace_back(name, cfg);
    };
    push("es", "es", true, true, true);
    push("sc", "sc", true, true, true);
    push("apf", "apf", true, true, true);  // full model; also the full-APW row
    push("apf_apw_none", "apf", false, false, false);
    push("apf_apw_cls", "apf", true, false, false);
    push("apf_apw_cls_ctr", "apf", true, true, false);
    return variants;
}

void dump_visualizations(MvafModel& model, const Sample& sample, const std::string& out_dir) {
    fs::create_directories(out_dir);
    ForwardOutputs out = model.forward(sample, /*training=*/false);
    const VoxelGridSpec& grid = model.config().bev_grid;
    const int rows = grid.rows(), cols = grid.cols();

    auto render = [&](const std::string& name, const std::vector<double>& per_point) {
        std::vector<double> img(static_cast<size_t>(rows) * cols, 0.0);
        double peak = 0;
        for (size_t p = 0; p < per_point.size(); ++p) {
            const int cell = out.bev_pillars.point_pillar[p];
            if (cell < 0) continue;
            const auto [r, c] = out.bev_pillars.cells[static_cast<size_t>(cell)];
            auto& px = img[static_cast<size_t>(r) * cols + c];
            px = std::max(px, per_point[p]);
            peak = std::max(peak, px);
        }
        if (peak > 0)
            for (auto& v : img) v /= peak;
        write_pgm(out_dir + "/" + sample.id + "_" + name + ".pgm", img, rows, cols);
    };
    auto row_norms = [](const Tensor& t) {
        const int n = t.dim(0), c = t.dim(1);
        std::vector<double> norms(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < c; ++j) s += t.at(i, j) * t.at(i, j);
            norms[static_cast<size_t>(i)] = std::sqrt(s);
        }
        return norms;
    };
    render("cv_points", row_norms(out.views.cv.value()));
    render("bev_points", row_norms(out.views.bev.value()));
    render("rv_points", row_norms(out.views.rv.value()));
    render("fused_points", row_norms(out.fused.fused.value()));
    render("apw_weights", row_norms(out.apw.cls.value()));
}

}  // namespace mvaf
