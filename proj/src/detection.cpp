#include "mvaf/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvaf/common.hpp"

namespace mvaf {

AnchorGrid generate_anchors(const VoxelGridSpec& bev, int head_stride, double w, double l, double h,
                            double z_bottom) {
    if (head_stride <= 0 || bev.rows() % head_stride != 0 || bev.cols() % head_stride != 0)
        throw ConfigError("anchor grid: head stride must divide the BEV grid");
    AnchorGrid grid;
    grid.rows = bev.rows() / head_stride;
    grid.cols = bev.cols() / head_stride;
    const double cell_r = bev.row_cell * head_stride;
    const double cell_c = bev.col_cell * head_stride;
    grid.anchors.reserve(static_cast<size_t>(grid.rows) * grid.cols * AnchorGrid::kPerCell);
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            const double y = bev.row_min + (r + 0.5) * cell_r;
            const double x = bev.col_min + (c + 0.5) * cell_c;
            for (int a = 0; a < AnchorGrid::kPerCell; ++a) {
                Box3D box;
                box.cx = x;
                box.cy = y;
                box.cz = z_bottom + 0.5 * h;
                box.l = l;
                box.w = w;
                box.h = h;
                box.yaw = a == 0 ? 0.0 : kPi / 2;
                grid.anchors.push_back(box);
            }
        }
    }
    return grid;
}

BoxEncoding encode_box(const Box3D& gt, const Box3D& anchor) {
    if (gt.l <= 0 || gt.w <= 0 || gt.h <= 0 || anchor.l <= 0 || anchor.w <= 0 || anchor.h <= 0)
        throw NumericError("encode_box: non-positive box dimensions");
    const double d = std::sqrt(anchor.l * anchor.l + anchor.w * anchor.w);
    BoxEncoding e;
    e.v[0] = (gt.cx - anchor.cx) / d;
    e.v[1] = (gt.cy - anchor.cy) / d;
    e.v[2] = (gt.cz - anchor.cz) / anchor.h;
    e.v[3] = std::log(gt.l / anchor.l);
    e.v[4] = std::log(gt.w / anchor.w);
    e.v[5] = std::log(gt.h / anchor.h);
    e.v[6] = gt.yaw - anchor.yaw;
    return e;
}

Box3D decode_box(const BoxEncoding& enc, const Box3D& anchor) {
    const double d = std::sqrt(anchor.l * anchor.l + anchor.w * anchor.w);
    Box3D b;
    b.cx = enc.v[0] * d + anchor.cx;
    b.cy = enc.v[1] * d + anchor.cy;
    b.cz = enc.v[2] * anchor.h + anchor.cz;
    b.l = std::exp(enc.v[3]) * anchor.l;
    b.w = std::exp(enc.v[4]) * anchor.w;
    b.h = std::exp(enc.v[5]) * anchor.h;
    b.yaw = enc.v[6] + anchor.yaw;
    return b;
}

int direction_bin(double yaw, double anchor_yaw) {
    return std::sin(yaw - anchor_yaw) >= 0 ? 1 : 0;
}

TargetAssignment assign_targets(const AnchorGrid& anchors, const std::vector<Box3D>& gt_boxes,
                                const std::vector<Point>& points, double pos_iou, double neg_iou) {
    const size_t na = anchors.anchors.size();
    const size_t ng = gt_boxes.size();
    TargetAssignment out;
    out.anchor_gt.assign(na, -1);

    std::vector<double> best_iou(na, 0.0);
    std::vector<int> best_gt(na, -1);
    std::vector<double> gt_best_iou(ng, -1.0);
    std::vector<int> gt_best_anchor(ng, -1);
    for (size_t i = 0; i < na; ++i) {
        for (size_t g = 0; g < ng; ++g) {
            const double iou = rotated_iou_bev(anchors.anchors[i], gt_boxes[g]);
            if (iou > best_iou[i]) {
                best_iou[i] = iou;
                best_gt[i] = static_cast<int>(g);
            }
            if (iou > gt_best_iou[g]) {
                gt_best_iou[g] = iou;
                gt_best_anchor[g] = static_cast<int>(i);
            }
        }
    }
    for (size_t i = 0; i < na; ++i) {
        if (best_gt[i] >= 0 && best_iou[i] >= pos_iou)
            out.anchor_gt[i] = best_gt[i];
        else if (best_iou[i] >= neg_iou)
            out.anchor_gt[i] = -2;
    }
    // every gt claims its best-overlapping anchor even below the threshold
    for (size_t g = 0; g < ng; ++g) {
        if (gt_best_anchor[g] >= 0 && gt_best_iou[g] > 0)
            out.anchor_gt[static_cast<size_t>(gt_best_anchor[g])] = static_cast<int>(g);
    }
    out.num_positive = static_cast<int>(std::count_if(out.anchor_gt.begin(), out.anchor_gt.end(),
                                                      [](int v) { return v >= 0; }));

    out.point_foreground.assign(points.size(), 0.0);
    out.point_center.assign(points.size(), {0.0, 0.0, 0.0});
    for (size_t p = 0; p < points.size(); ++p) {
        for (size_t g = 0; g < ng; ++g) {
            if (point_in_box(points[p], gt_boxes[g])) {
                out.point_foreground[p] = 1.0;
                out.point_center[p] = center_offset(points[p], gt_boxes[g]);
                break;
            }
        }
    }
    return out;
}

ad::Var total_loss(const std::vector<std::pair<std::string, ad::Var>>& parts,
                   const std::vector<double>& weights) {
    if (parts.empty() || parts.size() != weights.size())
        throw ConfigError("total_loss: parts and weights must align and be non-empty");
    ad::Var total;
    for (size_t i = 0; i < parts.size(); ++i) {
        const ad::Var& part = parts[i].second;
        if (part.value().data.size() != 1)
            throw ShapeError("total_loss: part '" + parts[i].first + "' is not scalar");
        if (!std::isfinite(part.value().data[0]))
            throw NumericError("total_loss: non-finite loss part '" + parts[i].first + "'");
        ad::Var term = ad::scale(part, weights[i]);
        total = i == 0 ? term : ad::add(total, term);
    }
    return total;
}

std::vector<Detection> decode_predictions(const Tensor& cls_logits, const Tensor& box_residuals,
                                          const Tensor& dir_logits, const AnchorGrid& anchors,
                                          double score_thr) {
    const int n = static_cast<int>(anchors.anchors.size());
    if (cls_logits.shape != std::vector<int>{n, 1} || box_residuals.shape != std::vector<int>{n, 7} ||
        dir_logits.shape != std::vector<int>{n, 2})
        throw ShapeError("decode_predictions: head tensors do not match the anchor grid");
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
        const double score = 1.0 / (1.0 + std::exp(-cls_logits.at(i, 0)));
        if (score < score_thr) continue;
        BoxEncoding e;
        for (int k = 0; k < 7; ++k) e.v[static_cast<size_t>(k)] = box_residuals.at(i, k);
        Detection d;
        d.box = decode_box(e, anchors.anchors[static_cast<size_t>(i)]);
        d.score = score;
        const int bin = dir_logits.at(i, 1) >= dir_logits.at(i, 0) ? 1 : 0;
        if (direction_bin(d.box.yaw, anchors.anchors[static_cast<size_t>(i)].yaw) != bin)
            d.box.yaw += kPi;
        d.box.yaw = normalize_angle(d.box.yaw);
        dets.push_back(d);
    }
    return dets;
}

std::vector<Detection> nms_bev(const std::vector<Detection>& dets, double iou_thr) {
    std::vector<int> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return dets[static_cast<size_t>(a)].score > dets[static_cast<size_t>(b)].score;
    });
    std::vector<Detection> kept;
    std::vector<char> removed(dets.size(), 0);
    for (size_t oi = 0; oi < order.size(); ++oi) {
        const int i = order[oi];
        if (removed[static_cast<size_t>(i)]) continue;
        kept.push_back(dets[static_cast<size_t>(i)]);
        for (size_t oj = oi + 1; oj < order.size(); ++oj) {
            const int j = order[oj];
            if (removed[static_cast<size_t>(j)]) continue;
            if (rotated_iou_bev(dets[static_cast<size_t>(i)].box, dets[static_cast<size_t>(j)].box) >
                iou_thr)
                removed[static_cast<size_t>(j)] = 1;
        }
    }
    return kept;
}

}  // namespace mvaf
