#pragma once

#include <array>
#include <functional>
#include <string>

#include "mvaf/detection.hpp"

namespace mvaf {

enum class Difficulty { Easy = 0, Moderate = 1, Hard = 2, None = 3, All = 4 };

// KITTI devkit thresholds on 2D bbox height / occlusion / truncation; returns
// the easiest level the label qualifies for.
Difficulty difficulty_of(const Label& label);

struct GtBox {
    Box3D box;
    Difficulty difficulty = Difficulty::None;
    bool dont_care = false;
};

struct EvalFrame {
    std::vector<Detection> detections;
    std::vector<GtBox> gts;
};

using IouFn = std::function<double(const Box3D&, const Box3D&)>;

struct PrCurve {
    double ap = 0;
    std::array<double, 40> recall{};     // 1/40 .. 40/40
    std::array<double, 40> precision{};  // interpolated (non-increasing)
};

// Greedy score-ordered matching, each gt matched at most once; detections
// whose best match is a DontCare or off-difficulty gt are dropped from the
// PR sweep. Interpolated precision averaged over 40 recall positions.
PrCurve ap_40(const std::vector<EvalFrame>& frames, const IouFn& iou_fn, double iou_thr,
              Difficulty difficulty);

struct EvalResult {
    // indexed easy / moderate / hard
    std::array<PrCurve, 3> bev;
    std::array<PrCurve, 3> box3d;
    PrCurve bev_all, box3d_all;  // no difficulty filter
};

EvalResult evaluate_frames(const std::vector<EvalFrame>& frames, double iou_thr);

std::vector<GtBox> labels_to_gt(const std::vector<Label>& labels, const Calib& calib);

struct AblationRow {
    std::string name;
    bool failed = false;
    double final_loss = 0;
    double ap_all = 0, ap_easy = 0, ap_moderate = 0, ap_hard = 0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    std::string to_csv() const;
};

// Grayscale P5 PGM, values clipped to [0, 1] then scaled to 0..255.
void write_pgm(const std::string& path, const std::vector<double>& values, int rows, int cols);

}  // namespace mvaf
