#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mvaf/kitti_io.hpp"

using namespace mvaf;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("mvaf_io_" + name)).string();
}

}  // namespace

TEST_CASE("point cloud binary roundtrip") {
    PointCloud cloud;
    cloud.points = {{1.5, -2.25, 0.5, 0.25}, {100.0, 0.0, -1.0, 1.0}, {0.0, 0.0, 0.0, 0.0}};
    const std::string path = temp_path("cloud.bin");
    write_point_cloud(path, cloud);
    PointCloud back = read_point_cloud(path);
    REQUIRE(back.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(back.points[i].x == cloud.points[i].x);
        CHECK(back.points[i].y == cloud.points[i].y);
        CHECK(back.points[i].z == cloud.points[i].z);
        CHECK(back.points[i].intensity == cloud.points[i].intensity);
    }
    fs::remove(path);
}

TEST_CASE("truncated scan rejected") {
    const std::string path = temp_path("bad.bin");
    std::ofstream out(path, std::ios::binary);
    out.write("12345", 5);  // not a multiple of 16 bytes
    out.close();
    CHECK_THROWS_AS(read_point_cloud(path), FormatError);
    fs::remove(path);
}

TEST_CASE("intensity clamped to [0,1] at load") {
    const std::string path = temp_path("clamp.bin");
    std::ofstream out(path, std::ios::binary);
    const float quad[4] = {1.0f, 2.0f, 3.0f, 7.5f};
    out.write(reinterpret_cast<const char*>(quad), sizeof(quad));
    out.close();
    CHECK(read_point_cloud(path).points[0].intensity == 1.0);
    fs::remove(path);
}

TEST_CASE("calib roundtrip and required keys") {
    Calib calib;
    for (int i = 0; i < 12; ++i) calib.P2[static_cast<size_t>(i)] = 0.125 * i;
    for (int i = 0; i < 9; ++i) calib.R0_rect[static_cast<size_t>(i)] = i == 0 || i == 4 || i == 8;
    for (int i = 0; i < 12; ++i) calib.Tr_velo_to_cam[static_cast<size_t>(i)] = -0.5 + 0.0625 * i;
    const std::string path = temp_path("calib.txt");
    write_calib(path, calib);
    Calib back = read_calib(path);
    CHECK(back.P2 == calib.P2);
    CHECK(back.R0_rect == calib.R0_rect);
    CHECK(back.Tr_velo_to_cam == calib.Tr_velo_to_cam);

    std::ofstream out(path);
    out << "P2: 1 2 3 4 5 6 7 8 9 10 11 12\n";  // missing the other keys
    out.close();
    CHECK_THROWS_AS(read_calib(path), FormatError);
    fs::remove(path);
}

TEST_CASE("composite projection is P2 * R0 * Tr") {
    Calib calib;
    // P2 = [I|0], R0 = I, Tr = translation (1,2,3)
    calib.P2 = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
    calib.R0_rect = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    calib.Tr_velo_to_cam = {1, 0, 0, 1, 0, 1, 0, 2, 0, 0, 1, 3};
    const auto m = calib.composite();
    CHECK(m[3] == 1.0);
    CHECK(m[7] == 2.0);
    CHECK(m[11] == 3.0);
    CHECK(m[0] == 1.0);
}

TEST_CASE("label roundtrip, 15 and 16 columns") {
    std::vector<Label> labels(2);
    labels[0].type = "Car";
    labels[0].truncation = 0.1;
    labels[0].occlusion = 1;
    labels[0].alpha = -0.5;
    labels[0].bbox[0] = 10;
    labels[0].bbox[1] = 20;
    labels[0].bbox[2] = 110;
    labels[0].bbox[3] = 80;
    labels[0].h = 1.5;
    labels[0].w = 1.6;
    labels[0].l = 3.9;
    labels[0].x = 1;
    labels[0].y = 2;
    labels[0].z = 20;
    labels[0].rotation_y = 0.25;
    labels[1].type = "DontCare";

    const std::string path = temp_path("labels.txt");
    write_labels(path, labels);
    std::vector<Label> back = read_labels(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].type == "Car");
    CHECK(back[0].rotation_y == doctest::Approx(0.25));
    CHECK(back[1].dont_care());

    labels[0].score = 0.75;
    write_labels(path, labels, /*with_score=*/true);
    back = read_labels(path);
    CHECK(back[0].score == doctest::Approx(0.75));
    fs::remove(path);
}

TEST_CASE("ppm image roundtrip") {
    Image img;
    img.width = 4;
    img.height = 3;
    img.data.assign(static_cast<size_t>(4 * 3 * 3), 0.0);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = (i % 256) / 255.0;
    const std::string path = temp_path("img.ppm");
    write_image_ppm(path, img);
    Image back = read_image_ppm(path);
    CHECK(back.width == 4);
    CHECK(back.height == 3);
    for (size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == doctest::Approx(img.data[i]));
    fs::remove(path);
}

TEST_CASE("split file parsing") {
    const std::string path = temp_path("split.txt");
    std::ofstream out(path);
    out << "000001\n000005\n\n000002\n";
    out.close();
    CHECK(read_split(path) == std::vector<std::string>{"000001", "000005", "000002"});
    fs::remove(path);
}

TEST_CASE("synthetic scenes are deterministic and well-formed") {
    SyntheticScene a = generate_synthetic_scene(42, 2);
    SyntheticScene b = generate_synthetic_scene(42, 2);
    REQUIRE(a.cloud.size() == b.cloud.size());
    for (size_t i = 0; i < a.cloud.size(); ++i) {
        CHECK(a.cloud.points[i].x == b.cloud.points[i].x);
        CHECK(a.cloud.points[i].intensity == b.cloud.points[i].intensity);
    }
    CHECK(a.labels.size() == 2);
    for (const auto& label : a.labels) {
        CHECK(label.type == "Car");
        CHECK(label.l > 3.0);
        CHECK(label.h > 1.0);
    }
    CHECK(a.image.width == 128);
    CHECK(a.image.height == 64);

    SyntheticScene c = generate_synthetic_scene(43, 2);
    CHECK(a.cloud.points[0].x != c.cloud.points[0].x);
}

TEST_CASE("synthetic scene roundtrips through the writers losslessly") {
    SyntheticScene scene = generate_synthetic_scene(7, 1);
    const std::string cloud_path = temp_path("synth.bin");
    write_point_cloud(cloud_path, scene.cloud);
    PointCloud back = read_point_cloud(cloud_path);
    REQUIRE(back.size() == scene.cloud.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back.points[i].x == scene.cloud.points[i].x);
        CHECK(back.points[i].z == scene.cloud.points[i].z);
    }
    fs::remove(cloud_path);
}
