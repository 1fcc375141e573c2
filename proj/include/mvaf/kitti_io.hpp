#pragma once

#include <array>
#include <string>
#include <vector>

#include "mvaf/common.hpp"

namespace mvaf {

struct Point {
    double x = 0, y = 0, z = 0;
    double intensity = 0;  // clamped to [0,1] at load
};

struct PointCloud {
    std::vector<Point> points;
    size_t size() const { return points.size(); }
};

struct Calib {
    // row-major
    std::array<double, 12> P2{};             // 3x4 camera projection
    std::array<double, 9> R0_rect{};         // 3x3 rectification
    std::array<double, 12> Tr_velo_to_cam{}; // 3x4 rigid transform

    // M_CV = P2 * [R0|0] * [Tr; 0 0 0 1], 3x4
    std::array<double, 12> composite() const;
};

struct Label {
    std::string type;  // "Car", "DontCare", ...
    double truncation = 0;
    int occlusion = 0;
    double alpha = 0;
    double bbox[4] = {0, 0, 0, 0};  // left, top, right, bottom (pixels)
    double h = 0, w = 0, l = 0;     // meters
    double x = 0, y = 0, z = 0;     // location, camera frame
    double rotation_y = 0;
    double score = 0;  // only meaningful for detection results

    bool dont_care() const { return type == "DontCare"; }
};

struct Image {
    int width = 0, height = 0;
    std::vector<double> data;  // height*width*3, row-major RGB in [0,1]

    double at(int row, int col, int ch) const {
        return data[(static_cast<size_t>(row) * width + col) * 3 + ch];
    }
    double& at(int row, int col, int ch) {
        return data[(static_cast<size_t>(row) * width + col) * 3 + ch];
    }
};

// Velodyne scan: flat little-endian float32 quadruples (x,y,z,intensity).
PointCloud read_point_cloud(const std::string& path);
void write_point_cloud(const std::string& path, const PointCloud& cloud);

// KITTI calib text: "KEY: v1 v2 ...". Requires P2, R0_rect, Tr_velo_to_cam.
Calib read_calib(const std::string& path);
void write_calib(const std::string& path, const Calib& calib);

// KITTI 15-column label lines (16 with score). DontCare rows are retained.
std::vector<Label> read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<Label>& labels, bool with_score = false);

// Binary P6 PPM, maxval 255.
Image read_image_ppm(const std::string& path);
void write_image_ppm(const std::string& path, const Image& image);

// Split file: one frame id per line.
std::vector<std::string> read_split(const std::string& path);

struct SyntheticScene {
    PointCloud cloud;
    Image image;
    Calib calib;
    std::vector<Label> labels;  // camera-frame, KITTI convention
};

// Deterministic desk-scale scene: cuboid cars on a ground plane inside the
// crop ranges, LiDAR points on car surfaces plus ground, image rendering
// through the calibrated projection.
SyntheticScene generate_synthetic_scene(uint64_t seed, int n_cars);

}  // namespace mvaf
