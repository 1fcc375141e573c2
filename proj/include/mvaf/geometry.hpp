#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "mvaf/kitti_io.hpp"

namespace mvaf {

// Axis conventions: LiDAR frame, x forward, y left, z up. Yaw rotates about
// +z, zero along +x, stored normalized to [-pi, pi).
struct Box3D {
    double cx = 0, cy = 0, cz = 0;  // geometric center
    double l = 0, w = 0, h = 0;     // length (along heading), width, height
    double yaw = 0;
};

struct CylindricalCoord {
    double rho = 0;
    double phi = 0;  // [-pi, pi)
    double z = 0;
};

enum class ViewKind { BEV, RV, CV };

// Maps a LiDAR point into continuous (row, col) feature-map coordinates.
struct ViewMapping {
    ViewKind kind = ViewKind::BEV;
    int stride = 1;

    // CV
    std::array<double, 12> m_cv{};  // composite 3x4
    int image_width = 0, image_height = 0;

    // BEV: rows index y, cols index x. RV: rows index z, cols index phi.
    double row_origin = 0, col_origin = 0;
    double row_cell = 1, col_cell = 1;
    int rows = 0, cols = 0;
};

CylindricalCoord to_cylindrical(const Point& p);

// Absent when behind the camera (depth <= 0) or outside the view extent.
std::optional<std::pair<double, double>> project_to_view(const Point& p, const ViewMapping& m);

// Boundary inclusive.
bool point_in_box(const Point& p, const Box3D& b);

// box.center - point
std::array<double, 3> center_offset(const Point& p, const Box3D& b);

// Rotated-rectangle footprint IoU via convex polygon clipping.
double rotated_iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

// BEV footprint corners, CCW.
std::array<std::pair<double, double>, 4> box_corners_bev(const Box3D& b);

struct AugmentParams {
    bool flip = false;   // negate y
    double theta = 0;    // global rotation about z
    double scale = 1.0;  // global scaling
};

void augment_scene(std::vector<Point>& points, std::vector<Box3D>& boxes,
                   const AugmentParams& params);

// KITTI devkit convention: camera location is the box bottom center;
// yaw = -rotation_y - pi/2 after the camera->LiDAR axis change.
Box3D camera_label_to_lidar_box(const Label& label, const Calib& calib);
Label lidar_box_to_camera_label(const Box3D& box, const Calib& calib, const std::string& type);

}  // namespace mvaf
