#include "mvaf/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace mvaf {

namespace {

struct Vec3 {
    double x, y, z;
};

struct Mat3 {
    std::array<double, 9> m;
    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
};

Mat3 invert3(const std::array<double, 9>& a) {
    double det = a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
                 a[2] * (a[3] * a[7] - a[4] * a[6]);
    if (std::abs(det) < 1e-12) throw NumericError("singular 3x3 matrix");
    double d = 1.0 / det;
    return Mat3{{(a[4] * a[8] - a[5] * a[7]) * d, (a[2] * a[7] - a[1] * a[8]) * d,
                 (a[1] * a[5] - a[2] * a[4]) * d, (a[5] * a[6] - a[3] * a[8]) * d,
                 (a[0] * a[8] - a[2] * a[6]) * d, (a[2] * a[3] - a[0] * a[5]) * d,
                 (a[3] * a[7] - a[4] * a[6]) * d, (a[1] * a[6] - a[0] * a[7]) * d,
                 (a[0] * a[4] - a[1] * a[3]) * d}};
}

}  // namespace

CylindricalCoord to_cylindrical(const Point& p) {
    CylindricalCoord c;
    c.rho = std::sqrt(p.x * p.x + p.y * p.y);
    c.phi = (c.rho == 0.0) ? 0.0 : std::atan2(p.y, p.x);
    if (c.phi >= kPi) c.phi -= 2 * kPi;
    c.z = p.z;
    return c;
}

std::optional<std::pair<double, double>> project_to_view(const Point& p, const ViewMapping& m) {
    if (m.kind == ViewKind::CV) {
        const auto& M = m.m_cv;
        double u = M[0] * p.x + M[1] * p.y + M[2] * p.z + M[3];
        double v = M[4] * p.x + M[5] * p.y + M[6] * p.z + M[7];
        double d = M[8] * p.x + M[9] * p.y + M[10] * p.z + M[11];
        if (d <= 0) return std::nullopt;
        u /= d;
        v /= d;
        if (u < 0 || u >= m.image_width || v < 0 || v >= m.image_height) return std::nullopt;
        return std::make_pair(v / m.stride, u / m.stride);
    }
    double rcoord, ccoord;
    if (m.kind == ViewKind::BEV) {
        rcoord = p.y;
        ccoord = p.x;
    } else {
        CylindricalCoord cyl = to_cylindrical(p);
        rcoord = cyl.z;
        ccoord = cyl.phi;
    }
    double r = (rcoord - m.row_origin) / m.row_cell;
    double c = (ccoord - m.col_origin) / m.col_cell;
    if (r < 0 || r >= m.rows || c < 0 || c >= m.cols) return std::nullopt;
    return std::make_pair(r / m.stride, c / m.stride);
}

bool point_in_box(const Point& p, const Box3D& b) {
    double dx = p.x - b.cx, dy = p.y - b.cy, dz = p.z - b.cz;
    double cs = std::cos(b.yaw), sn = std::sin(b.yaw);
    double lx = cs * dx + sn * dy;   // along heading
    double ly = -sn * dx + cs * dy;  // lateral
    return std::abs(lx) <= b.l / 2 && std::abs(ly) <= b.w / 2 && std::abs(dz) <= b.h / 2;
}

std::array<double, 3> center_offset(const Point& p, const Box3D& b) {
    return {b.cx - p.x, b.cy - p.y, b.cz - p.z};
}

std::array<std::pair<double, double>, 4> box_corners_bev(const Box3D& b) {
    double cs = std::cos(b.yaw), sn = std::sin(b.yaw);
    double hl = b.l / 2, hw = b.w / 2;
    const double local[4][2] = {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}};  // CCW
    std::array<std::pair<double, double>, 4> out;
    for (int i = 0; i < 4; ++i)
        out[static_cast<size_t>(i)] = {b.cx + cs * local[i][0] - sn * local[i][1],
                                       b.cy + sn * local[i][0] + cs * local[i][1]};
    return out;
}

namespace {

using Poly = std::vector<std::pair<double, double>>;

double shoelace_area(const Poly& p) {
    double a = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        auto [x1, y1] = p[i];
        auto [x2, y2] = p[(i + 1) % p.size()];
        a += x1 * y2 - x2 * y1;
    }
    return std::abs(a) / 2;
}

// Sutherland-Hodgman: clip CCW subject polygon by CCW clip polygon
Poly clip_polygon(Poly subject, const Poly& clip) {
    for (size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        auto [ax, ay] = clip[e];
        auto [bx, by] = clip[(e + 1) % clip.size()];
        double ex = bx - ax, ey = by - ay;
        auto inside = [&](double px, double py) { return ex * (py - ay) - ey * (px - ax) >= 0; };
        Poly out;
        for (size_t i = 0; i < subject.size(); ++i) {
            auto [px, py] = subject[i];
            auto [qx, qy] = subject[(i + 1) % subject.size()];
            bool pin = inside(px, py), qin = inside(qx, qy);
            if (pin) out.push_back({px, py});
            if (pin != qin) {
                double denom = ex * (qy - py) - ey * (qx - px);
                if (denom != 0) {
                    double t = (ex * (ay - py) - ey * (ax - px)) / denom;
                    out.push_back({px + t * (qx - px), py + t * (qy - py)});
                }
            }
        }
        subject = std::move(out);
    }
    return subject;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
    auto ca = box_corners_bev(a);
    auto cb = box_corners_bev(b);
    Poly pa(ca.begin(), ca.end()), pb(cb.begin(), cb.end());
    Poly inter = clip_polygon(pa, pb);
    if (inter.size() < 3) return 0;
    return shoelace_area(inter);
}

}  // namespace

double rotated_iou_bev(const Box3D& a, const Box3D& b) {
    double area_a = a.l * a.w, area_b = b.l * b.w;
    if (area_a <= 0 || area_b <= 0) return 0;
    double inter = bev_intersection_area(a, b);
    double uni = area_a + area_b - inter;
    return uni > 0 ? inter / uni : 0;
}

double iou_3d(const Box3D& a, const Box3D& b) {
    double vol_a = a.l * a.w * a.h, vol_b = b.l * b.w * b.h;
    if (vol_a <= 0 || vol_b <= 0) return 0;
    double zlo = std::max(a.cz - a.h / 2, b.cz - b.h / 2);
    double zhi = std::min(a.cz + a.h / 2, b.cz + b.h / 2);
    double dz = zhi - zlo;
    if (dz <= 0) return 0;
    double inter = bev_intersection_area(a, b) * dz;
    double uni = vol_a + vol_b - inter;
    return uni > 0 ? inter / uni : 0;
}

void augment_scene(std::vector<Point>& points, std::vector<Box3D>& boxes,
                   const AugmentParams& params) {
    if (params.flip) {
        for (Point& p : points) p.y = -p.y;
        for (Box3D& b : boxes) {
            b.cy = -b.cy;
            b.yaw = normalize_angle(-b.yaw);
        }
    }
    if (params.theta != 0.0) {
        double cs = std::cos(params.theta), sn = std::sin(params.theta);
        for (Point& p : points) {
            double x = cs * p.x - sn * p.y, y = sn * p.x + cs * p.y;
            p.x = x;
            p.y = y;
        }
        for (Box3D& b : boxes) {
            double x = cs * b.cx - sn * b.cy, y = sn * b.cx + cs * b.cy;
            b.cx = x;
            b.cy = y;
            b.yaw = normalize_angle(b.yaw + params.theta);
        }
    }
    if (params.scale != 1.0) {
        double s = params.scale;
        for (Point& p : points) {
            p.x *= s;
            p.y *= s;
            p.z *= s;
        }
        for (Box3D& b : boxes) {
            b.cx *= s;
            b.cy *= s;
            b.cz *= s;
            b.l *= s;
            b.w *= s;
            b.h *= s;
        }
    }
}

Box3D camera_label_to_lidar_box(const Label& label, const Calib& calib) {
    // cam = R0 * (R_tr * velo + t_tr); invert the chain
    Mat3 r0_inv = invert3(calib.R0_rect);
    std::array<double, 9> rtr{calib.Tr_velo_to_cam[0], calib.Tr_velo_to_cam[1],
                              calib.Tr_velo_to_cam[2],  calib.Tr_velo_to_cam[4],
                              calib.Tr_velo_to_cam[5],  calib.Tr_velo_to_cam[6],
                              calib.Tr_velo_to_cam[8],  calib.Tr_velo_to_cam[9],
                              calib.Tr_velo_to_cam[10]};
    Vec3 t{calib.Tr_velo_to_cam[3], calib.Tr_velo_to_cam[7], calib.Tr_velo_to_cam[11]};
    Mat3 rtr_inv = invert3(rtr);
    Vec3 unrect = r0_inv.apply({label.x, label.y, label.z});
    Vec3 velo = rtr_inv.apply({unrect.x - t.x, unrect.y - t.y, unrect.z - t.z});
    Box3D b;
    b.cx = velo.x;
    b.cy = velo.y;
    b.cz = velo.z + label.h / 2;  // bottom center -> geometric center
    b.l = label.l;
    b.w = label.w;
    b.h = label.h;
    b.yaw = normalize_angle(-label.rotation_y - kPi / 2);
    return b;
}

Label lidar_box_to_camera_label(const Box3D& box, const Calib& calib, const std::string& type) {
    Mat3 rtr{{calib.Tr_velo_to_cam[0], calib.Tr_velo_to_cam[1], calib.Tr_velo_to_cam[2],
              calib.Tr_velo_to_cam[4], calib.Tr_velo_to_cam[5], calib.Tr_velo_to_cam[6],
              calib.Tr_velo_to_cam[8], calib.Tr_velo_to_cam[9], calib.Tr_velo_to_cam[10]}};
    Mat3 r0{calib.R0_rect};
    Vec3 bottom{box.cx, box.cy, box.cz - box.h / 2};
    Vec3 v = rtr.apply(bottom);
    v.x += calib.Tr_velo_to_cam[3];
    v.y += calib.Tr_velo_to_cam[7];
    v.z += calib.Tr_velo_to_cam[11];
    Vec3 cam = r0.apply(v);
    Label lbl;
    lbl.type = type;
    lbl.h = box.h;
    lbl.w = box.w;
    lbl.l = box.l;
    lbl.x = cam.x;
    lbl.y = cam.y;
    lbl.z = cam.z;
    lbl.rotation_y = normalize_angle(-box.yaw - kPi / 2);
    lbl.alpha = normalize_angle(lbl.rotation_y - std::atan2(cam.x, cam.z));
    // 2D bbox from the projected 3D corners (unclipped; callers clip to the image)
    const auto M = calib.composite();
    double u0 = 1e18, v0 = 1e18, u1 = -1e18, v1 = -1e18;
    auto corners = box_corners_bev(box);
    bool any = false;
    for (int zi = 0; zi < 2; ++zi)
        for (const auto& [cx, cy] : corners) {
            double cz = box.cz + (zi ? box.h / 2 : -box.h / 2);
            double u = M[0] * cx + M[1] * cy + M[2] * cz + M[3];
            double vv = M[4] * cx + M[5] * cy + M[6] * cz + M[7];
            double d = M[8] * cx + M[9] * cy + M[10] * cz + M[11];
            if (d <= 0) continue;
            any = true;
            u0 = std::min(u0, u / d);
            u1 = std::max(u1, u / d);
            v0 = std::min(v0, vv / d);
            v1 = std::max(v1, vv / d);
        }
    if (any) {
        lbl.bbox[0] = u0;
        lbl.bbox[1] = v0;
        lbl.bbox[2] = u1;
        lbl.bbox[3] = v1;
    }
    return lbl;
}

}  // namespace mvaf
