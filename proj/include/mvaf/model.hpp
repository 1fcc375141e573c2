#pragma once

#include <iosfwd>
#include <map>

#include "mvaf/backbone.hpp"
#include "mvaf/config.hpp"
#include "mvaf/detection.hpp"
#include "mvaf/eval.hpp"
#include "mvaf/fusion.hpp"

namespace mvaf {

// One training/eval sample in LiDAR space.
struct Sample {
    std::string id;
    PointCloud cloud;
    Image image;
    Calib calib;
    std::vector<Label> labels;      // original camera-frame labels
    std::vector<Box3D> gt_boxes;    // non-DontCare boxes in LiDAR frame
};

Sample make_sample(std::string id, const SyntheticScene& scene);
Sample load_sample(const std::string& root, const std::string& id);

struct ForwardOutputs {
    std::vector<Point> points;      // BEV-cropped points carried through fusion
    PillarAssignment bev_pillars;   // their pillar assignment (reused by FFD)
    MultiViewPointFeatures views;   // per-view common-width point features
    FusedPointFeatures fused;
    APWOutputs apw;
    ad::Var cls_logits;  // (A, 1)
    ad::Var box_pred;    // (A, 7)
    ad::Var dir_logits;  // (A, 2)
};

// SVFE (per-view pillar encoding + backbones), MVFF (projection, gather,
// attentive fusion, raw enrichment, pointwise weighting), FFD (re-voxelized
// fused features through the fusion backbone into the anchor heads).
class MvafModel {
public:
    MvafModel(const RunConfig& cfg, Rng* rng);

    ForwardOutputs forward(const Sample& sample, bool training);

    ParamStore& params() { return store_; }
    const RunConfig& config() const { return cfg_; }
    const AnchorGrid& anchors() const { return anchors_; }

private:
    RunConfig cfg_;
    ParamStore store_;
    AnchorGrid anchors_;
    int head_stride_ = 1;

    RawEncoder bev_pillar_enc_, rv_pillar_enc_, raw_enc_;
    Backbone bev_backbone_, rv_backbone_, cv_backbone_, fusion_backbone_;
    ViewProjector projector_;
    ApfModule apf_;
    ApwModule apw_;
    ad::Var head_cls_w_, head_cls_b_, head_box_w_, head_box_b_, head_dir_w_, head_dir_b_;
};

// Eq. 5 assembly; also reports the unweighted value of each part.
ad::Var model_loss(const ForwardOutputs& out, const Sample& sample, const RunConfig& cfg,
                   const AnchorGrid& anchors, std::map<std::string, double>* parts_out = nullptr);

std::vector<Detection> predict(MvafModel& model, const Sample& sample);

// Detections back to camera-frame KITTI labels (with scores).
std::vector<Label> detections_to_labels(const std::vector<Detection>& dets, const Calib& calib);

// ---- checkpoints ----
void save_checkpoint(const std::string& path, const ParamStore& store, Adam& adam,
                     long long global_step, const std::string& config_json);
// Validates names and shapes against the existing store; a divergent entry
// throws FormatError naming it. Returns the stored global step.
long long load_checkpoint(const std::string& path, ParamStore& store, Adam* adam,
                          std::string* config_json_out = nullptr);

// ---- training ----
struct TrainResult {
    double first_loss = 0;
    double final_loss = 0;
    long long steps = 0;
    std::vector<double> loss_curve;
};

// Adam + one-cycle over cyclically batched samples. Non-finite loss aborts
// with NumericError after writing <out_dir>/last_good.ckpt (when out_dir is
// set). Logs one line per step to `log` when provided.
TrainResult train_model(MvafModel& model, const std::vector<Sample>& samples,
                        const std::string& out_dir, std::ostream* log);

std::vector<EvalFrame> run_inference(MvafModel& model, const std::vector<Sample>& samples);

// Trains and evaluates each (name, config) variant with a shared seed; a
// variant that throws is marked failed and the run continues.
AblationReport run_ablation(const std::vector<std::pair<std::string, RunConfig>>& variants,
                            const std::vector<Sample>& samples, std::ostream* log);

// {es, sc, apf} with full APW plus the APW component ladder on APF.
std::vector<std::pair<std::string, RunConfig>> standard_ablation_variants(const RunConfig& base);

// Per-view point-feature magnitude maps (before fusion), fused magnitudes and
// APW foreground weights over the BEV grid; each PGM is max-normalized.
void dump_visualizations(MvafModel& model, const Sample& sample, const std::string& out_dir);

}  // namespace mvaf
