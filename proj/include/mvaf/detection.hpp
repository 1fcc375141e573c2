#pragma once

#include <array>
#include <string>

#include "mvaf/autodiff.hpp"
#include "mvaf/voxelizer.hpp"

namespace mvaf {

// Two anchors (yaw 0 and pi/2) per head cell, row-major over the head grid,
// matching the head tensor layout.
struct AnchorGrid {
    std::vector<Box3D> anchors;
    int rows = 0, cols = 0;
    static constexpr int kPerCell = 2;
};

AnchorGrid generate_anchors(const VoxelGridSpec& bev, int head_stride, double w, double l, double h,
                            double z_bottom);

// Diagonal-normalized center offsets, log size ratios and a raw yaw residual.
struct BoxEncoding {
    std::array<double, 7> v{};  // dx, dy, dz, dl, dw, dh, dyaw
};

BoxEncoding encode_box(const Box3D& gt, const Box3D& anchor);
Box3D decode_box(const BoxEncoding& enc, const Box3D& anchor);

// Direction bin: 1 when sin(yaw - anchor yaw) >= 0.
int direction_bin(double yaw, double anchor_yaw);

struct TargetAssignment {
    // per anchor: gt index, or -1 negative, -2 ignore
    std::vector<int> anchor_gt;
    int num_positive = 0;
    // per point
    std::vector<double> point_foreground;               // 0/1
    std::vector<std::array<double, 3>> point_center;    // offsets to owning box center
};

// BEV-IoU matching with forced best-anchor positives; per-point foreground
// flags and center offsets from point_in_box.
TargetAssignment assign_targets(const AnchorGrid& anchors, const std::vector<Box3D>& gt_boxes,
                                const std::vector<Point>& points, double pos_iou, double neg_iou);

// Weighted sum of named loss parts; throws NumericError naming the first
// non-finite part.
ad::Var total_loss(const std::vector<std::pair<std::string, ad::Var>>& parts,
                   const std::vector<double>& weights);

struct Detection {
    Box3D box;
    double score = 0;
};

// Sigmoid scores, residual decoding, direction flip by pi when the predicted
// bin disagrees with the decoded yaw.
std::vector<Detection> decode_predictions(const Tensor& cls_logits, const Tensor& box_residuals,
                                          const Tensor& dir_logits, const AnchorGrid& anchors,
                                          double score_thr);

// Greedy rotated-BEV NMS by descending score; equal scores keep the lowest
// index first. Returns kept detections in suppression order.
std::vector<Detection> nms_bev(const std::vector<Detection>& dets, double iou_thr);

}  // namespace mvaf
