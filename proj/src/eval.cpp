#include "mvaf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mvaf/common.hpp"

namespace mvaf {

Difficulty difficulty_of(const Label& label) {
    const double height = label.bbox[3] - label.bbox[1];
    if (height >= 40 && label.occlusion == 0 && label.truncation <= 0.15) return Difficulty::Easy;
    if (height >= 25 && label.occlusion <= 1 && label.truncation <= 0.30) return Difficulty::Moderate;
    if (height >= 25 && label.occlusion <= 2 && label.truncation <= 0.50) return Difficulty::Hard;
    return Difficulty::None;
}

namespace {

bool is_target(const GtBox& gt, Difficulty level) {
    if (gt.dont_care) return false;
    if (level == Difficulty::All) return true;
    return gt.difficulty != Difficulty::None &&
           static_cast<int>(gt.difficulty) <= static_cast<int>(level);
}

struct Det {
    int frame;
    int index;
    double score;
};

}  // namespace

PrCurve ap_40(const std::vector<EvalFrame>& frames, const IouFn& iou_fn, double iou_thr,
              Difficulty difficulty) {
    int num_targets = 0;
    for (const auto& f : frames)
        for (const auto& gt : f.gts)
            if (is_target(gt, difficulty)) ++num_targets;

    std::vector<Det> order;
    for (int fi = 0; fi < static_cast<int>(frames.size()); ++fi)
        for (int di = 0; di < static_cast<int>(frames[fi].detections.size()); ++di)
            order.push_back({fi, di, frames[fi].detections[di].score});
    // tie-break on geometry so the result does not depend on input order
    std::sort(order.begin(), order.end(), [&](const Det& a, const Det& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.frame != b.frame) return a.frame < b.frame;
        const Box3D& ba = frames[a.frame].detections[a.index].box;
        const Box3D& bb = frames[b.frame].detections[b.index].box;
        return std::tie(ba.cx, ba.cy, ba.cz, ba.yaw, ba.l, ba.w, ba.h) <
               std::tie(bb.cx, bb.cy, bb.cz, bb.yaw, bb.l, bb.w, bb.h);
    });

    std::vector<std::vector<char>> matched(frames.size());
    for (size_t fi = 0; fi < frames.size(); ++fi) matched[fi].assign(frames[fi].gts.size(), 0);

    std::vector<std::pair<double, double>> sweep;  // (recall, precision) after each counted det
    int tp = 0, fp = 0;
    for (const Det& d : order) {
        const EvalFrame& frame = frames[static_cast<size_t>(d.frame)];
        const Box3D& box = frame.detections[static_cast<size_t>(d.index)].box;
        double best_iou = 0;
        int best_gt = -1;
        for (int g = 0; g < static_cast<int>(frame.gts.size()); ++g) {
            if (matched[static_cast<size_t>(d.frame)][static_cast<size_t>(g)]) continue;
            if (!is_target(frame.gts[static_cast<size_t>(g)], difficulty)) continue;
            const double iou = iou_fn(box, frame.gts[static_cast<size_t>(g)].box);
            if (iou > best_iou) {
                best_iou = iou;
                best_gt = g;
            }
        }
        if (best_gt >= 0 && best_iou >= iou_thr) {
            matched[static_cast<size_t>(d.frame)][static_cast<size_t>(best_gt)] = 1;
            ++tp;
        } else {
            // overlap with an ignored gt (DontCare / off-difficulty) drops the
            // detection from the sweep entirely
            bool ignored = false;
            for (const auto& gt : frame.gts) {
                if (is_target(gt, difficulty)) continue;
                if (iou_fn(box, gt.box) >= iou_thr) {
                    ignored = true;
                    break;
                }
            }
            if (ignored) continue;
            ++fp;
        }
        if (num_targets > 0)
            sweep.emplace_back(static_cast<double>(tp) / num_targets,
                               static_cast<double>(tp) / (tp + fp));
    }

    PrCurve curve;
    for (int k = 0; k < 40; ++k) {
        const double r = (k + 1) / 40.0;
        double p = 0;
        for (const auto& [rec, prec] : sweep)
            if (rec >= r - 1e-12) p = std::max(p, prec);
        curve.recall[static_cast<size_t>(k)] = r;
        curve.precision[static_cast<size_t>(k)] = p;
        curve.ap += p / 40.0;
    }
    return curve;
}

EvalResult evaluate_frames(const std::vector<EvalFrame>& frames, double iou_thr) {
    EvalResult res;
    const IouFn bev = [](const Box3D& a, const Box3D& b) { return rotated_iou_bev(a, b); };
    const IouFn full = [](const Box3D& a, const Box3D& b) { return iou_3d(a, b); };
    const Difficulty levels[3] = {Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard};
    for (int i = 0; i < 3; ++i) {
        res.bev[static_cast<size_t>(i)] = ap_40(frames, bev, iou_thr, levels[i]);
        res.box3d[static_cast<size_t>(i)] = ap_40(frames, full, iou_thr, levels[i]);
    }
    res.bev_all = ap_40(frames, bev, iou_thr, Difficulty::All);
    res.box3d_all = ap_40(frames, full, iou_thr, Difficulty::All);
    return res;
}

std::vector<GtBox> labels_to_gt(const std::vector<Label>& labels, const Calib& calib) {
    std::vector<GtBox> gts;
    for (const auto& label : labels) {
        GtBox gt;
        gt.dont_care = label.dont_care();
        gt.difficulty = difficulty_of(label);
        if (!gt.dont_care) gt.box = camera_label_to_lidar_box(label, calib);
        gts.push_back(gt);
    }
    return gts;
}

std::string AblationReport::to_csv() const {
    std::ostringstream out;
    out << "variant,status,final_loss,ap_all,ap_easy,ap_moderate,ap_hard\n";
    for (const auto& row : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%s,%.6g,%.6g,%.6g,%.6g,%.6g\n", row.name.c_str(),
                      row.failed ? "failed" : "ok", row.final_loss, row.ap_all, row.ap_easy,
                      row.ap_moderate, row.ap_hard);
        out << buf;
    }
    return out.str();
}

void write_pgm(const std::string& path, const std::vector<double>& values, int rows, int cols) {
    if (static_cast<int>(values.size()) != rows * cols)
        throw ShapeError("write_pgm: value count does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path);
    out << "P5\n" << cols << " " << rows << "\n255\n";
    for (double v : values) {
        const double c = std::clamp(v, 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
    }
    if (!out) throw IoError("write_pgm: write failed for " + path);
}

}  // namespace mvaf
