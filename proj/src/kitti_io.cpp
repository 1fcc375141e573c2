#include "mvaf/kitti_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mvaf/geometry.hpp"

namespace mvaf {

std::array<double, 12> Calib::composite() const {
    // R0_ext = [R0|0; 0 0 0 1], Tr_ext = [Tr; 0 0 0 1]; M = P2 * R0_ext * Tr_ext
    std::array<double, 16> tr_ext{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) tr_ext[static_cast<size_t>(r) * 4 + c] = Tr_velo_to_cam[static_cast<size_t>(r) * 4 + c];
    tr_ext[15] = 1;
    std::array<double, 16> r0_ext{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) r0_ext[static_cast<size_t>(r) * 4 + c] = R0_rect[static_cast<size_t>(r) * 3 + c];
    r0_ext[15] = 1;
    std::array<double, 16> rt{};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += r0_ext[static_cast<size_t>(r) * 4 + k] * tr_ext[static_cast<size_t>(k) * 4 + c];
            rt[static_cast<size_t>(r) * 4 + c] = s;
        }
    std::array<double, 12> m{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += P2[static_cast<size_t>(r) * 4 + k] * rt[static_cast<size_t>(k) * 4 + c];
            m[static_cast<size_t>(r) * 4 + c] = s;
        }
    return m;
}

PointCloud read_point_cloud(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open point cloud: " + path);
    f.seekg(0, std::ios::end);
    long long bytes = f.tellg();
    f.seekg(0);
    if (bytes % 16 != 0)
        throw FormatError("point cloud byte length " + std::to_string(bytes) +
                          " is not a multiple of 16: " + path);
    PointCloud cloud;
    cloud.points.resize(static_cast<size_t>(bytes / 16));
    std::vector<float> buf(static_cast<size_t>(bytes / 4));
    if (bytes > 0) f.read(reinterpret_cast<char*>(buf.data()), bytes);
    if (bytes > 0 && !f) throw IoError("short read on point cloud: " + path);
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        Point& p = cloud.points[i];
        p.x = buf[i * 4 + 0];
        p.y = buf[i * 4 + 1];
        p.z = buf[i * 4 + 2];
        p.intensity = std::clamp(static_cast<double>(buf[i * 4 + 3]), 0.0, 1.0);
    }
    return cloud;
}

void write_point_cloud(const std::string& path, const PointCloud& cloud) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write point cloud: " + path);
    std::vector<float> buf(cloud.points.size() * 4);
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const Point& p = cloud.points[i];
        buf[i * 4 + 0] = static_cast<float>(p.x);
        buf[i * 4 + 1] = static_cast<float>(p.y);
        buf[i * 4 + 2] = static_cast<float>(p.z);
        buf[i * 4 + 3] = static_cast<float>(p.intensity);
    }
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<long>(buf.size() * 4));
}

namespace {

bool parse_values(const std::string& line, const std::string& key, std::vector<double>* out) {
    if (line.rfind(key + ":", 0) != 0) return false;
    std::istringstream is(line.substr(key.size() + 1));
    double v;
    out->clear();
    while (is >> v) out->push_back(v);
    return true;
}

}  // namespace

Calib read_calib(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open calib: " + path);
    Calib c;
    bool have_p2 = false, have_r0 = false, have_tr = false;
    std::string line;
    std::vector<double> vals;
    while (std::getline(f, line)) {
        if (parse_values(line, "P2", &vals)) {
            if (vals.size() < 12) throw FormatError("short P2 line in " + path);
            std::copy_n(vals.begin(), 12, c.P2.begin());
            have_p2 = true;
        } else if (parse_values(line, "R0_rect", &vals)) {
            if (vals.size() < 9) throw FormatError("short R0_rect line in " + path);
            std::copy_n(vals.begin(), 9, c.R0_rect.begin());
            have_r0 = true;
        } else if (parse_values(line, "Tr_velo_to_cam", &vals)) {
            if (vals.size() < 12) throw FormatError("short Tr_velo_to_cam line in " + path);
            std::copy_n(vals.begin(), 12, c.Tr_velo_to_cam.begin());
            have_tr = true;
        }
    }
    if (!have_p2) throw FormatError("calib missing P2: " + path);
    if (!have_r0) throw FormatError("calib missing R0_rect: " + path);
    if (!have_tr) throw FormatError("calib missing Tr_velo_to_cam: " + path);
    return c;
}

void write_calib(const std::string& path, const Calib& calib) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write calib: " + path);
    auto emit = [&f](const char* key, const double* v, int n) {
        f << key << ":";
        char buf[40];
        for (int i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof buf, " %.12g", v[i]);
            f << buf;
        }
        f << "\n";
    };
    emit("P2", calib.P2.data(), 12);
    emit("R0_rect", calib.R0_rect.data(), 9);
    emit("Tr_velo_to_cam", calib.Tr_velo_to_cam.data(), 12);
}

std::vector<Label> read_labels(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open labels: " + path);
    std::vector<Label> labels;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::vector<std::string> tok;
        std::string t;
        while (is >> t) tok.push_back(t);
        if (tok.size() != 15 && tok.size() != 16)
            throw FormatError("label line " + std::to_string(lineno) + " has " +
                              std::to_string(tok.size()) + " columns (want 15 or 16): " + path);
        Label l;
        l.type = tok[0];
        l.truncation = std::stod(tok[1]);
        l.occlusion = std::stoi(tok[2]);
        l.alpha = std::stod(tok[3]);
        for (int i = 0; i < 4; ++i) l.bbox[i] = std::stod(tok[static_cast<size_t>(4 + i)]);
        l.h = std::stod(tok[8]);
        l.w = std::stod(tok[9]);
        l.l = std::stod(tok[10]);
        l.x = std::stod(tok[11]);
        l.y = std::stod(tok[12]);
        l.z = std::stod(tok[13]);
        l.rotation_y = std::stod(tok[14]);
        if (tok.size() == 16) l.score = std::stod(tok[15]);
        if (!l.dont_care() && (l.h <= 0 || l.w <= 0 || l.l <= 0))
            throw FormatError("nonpositive dims on label line " + std::to_string(lineno) + ": " +
                              path);
        labels.push_back(std::move(l));
    }
    return labels;
}

void write_labels(const std::string& path, const std::vector<Label>& labels, bool with_score) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write labels: " + path);
    char buf[512];
    for (const Label& l : labels) {
        std::snprintf(buf, sizeof buf,
                      "%s %.6f %d %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f",
                      l.type.c_str(), l.truncation, l.occlusion, l.alpha, l.bbox[0], l.bbox[1],
                      l.bbox[2], l.bbox[3], l.h, l.w, l.l, l.x, l.y, l.z, l.rotation_y);
        f << buf;
        if (with_score) {
            std::snprintf(buf, sizeof buf, " %.6f", l.score);
            f << buf;
        }
        f << "\n";
    }
}

Image read_image_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open image: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw FormatError("not a binary P6 PPM: " + path);
    auto next_int = [&f, &path]() {
        // skip whitespace and # comments
        int c;
        while ((c = f.peek()) != EOF) {
            if (c == '#') {
                std::string dummy;
                std::getline(f, dummy);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        int v;
        if (!(f >> v)) throw FormatError("truncated PPM header: " + path);
        return v;
    };
    int w = next_int(), h = next_int(), maxval = next_int();
    if (maxval != 255) throw FormatError("PPM maxval must be 255: " + path);
    f.get();  // single whitespace after maxval
    Image img;
    img.width = w;
    img.height = h;
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<long>(raw.size()));
    if (!f) throw FormatError("truncated PPM pixel data: " + path);
    img.data.resize(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
    return img;
}

void write_image_ppm(const std::string& path, const Image& image) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write image: " + path);
    f << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<unsigned char> raw(image.data.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        double v = std::clamp(image.data[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(raw.data()), static_cast<long>(raw.size()));
}

std::vector<std::string> read_split(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open split file: " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(f, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

namespace {

constexpr int kSynthImageWidth = 128;
constexpr int kSynthImageHeight = 64;
constexpr double kSynthGroundZ = -0.9;

Calib synth_calib() {
    Calib c{};
    double f = 100.0, cx = kSynthImageWidth / 2.0, cy = kSynthImageHeight / 2.0;
    c.P2 = {f, 0, cx, 0, 0, f, cy, 0, 0, 0, 1, 0};
    c.R0_rect = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    // cam x = -y_lidar, cam y = -z_lidar, cam z = x_lidar
    c.Tr_velo_to_cam = {0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0};
    return c;
}

}  // namespace

SyntheticScene generate_synthetic_scene(uint64_t seed, int n_cars) {
    Rng rng(seed * 0x100003ull + 17);
    SyntheticScene s;
    s.calib = synth_calib();

    // cars, rejection-sampled to stay separated
    std::vector<Box3D> boxes;
    for (int i = 0; i < n_cars; ++i) {
        for (int attempt = 0; attempt < 100; ++attempt) {
            Box3D b;
            b.l = 3.9 * rng.uniform(0.9, 1.1);
            b.w = 1.6 * rng.uniform(0.9, 1.1);
            b.h = 1.56 * rng.uniform(0.9, 1.1);
            b.cx = rng.uniform(6.0, 46.0);
            b.cy = rng.uniform(-20.0, 20.0);
            b.cz = kSynthGroundZ + b.h / 2;
            b.yaw = rng.uniform(-kPi, kPi);
            bool ok = true;
            for (const Box3D& o : boxes)
                if (std::hypot(o.cx - b.cx, o.cy - b.cy) < 7.0) ok = false;
            if (ok) {
                boxes.push_back(b);
                break;
            }
        }
    }

    // ground returns
    const int n_ground = 700;
    for (int i = 0; i < n_ground; ++i) {
        Point p;
        p.x = rng.uniform(0.5, 51.0);
        p.y = rng.uniform(-25.5, 25.5);
        p.z = kSynthGroundZ + 0.03 * rng.gauss();
        p.intensity = rng.uniform(0.05, 0.3);
        s.cloud.points.push_back(p);
    }

    // car surfaces: 4 sides + roof
    for (const Box3D& b : boxes) {
        double cs = std::cos(b.yaw), sn = std::sin(b.yaw);
        for (int i = 0; i < 160; ++i) {
            int face = rng.uniform_int(5);
            double lx = 0, ly = 0, lz = 0;
            switch (face) {
                case 0: lx = b.l / 2; ly = rng.uniform(-b.w / 2, b.w / 2); lz = rng.uniform(-b.h / 2, b.h / 2); break;
                case 1: lx = -b.l / 2; ly = rng.uniform(-b.w / 2, b.w / 2); lz = rng.uniform(-b.h / 2, b.h / 2); break;
                case 2: ly = b.w / 2; lx = rng.uniform(-b.l / 2, b.l / 2); lz = rng.uniform(-b.h / 2, b.h / 2); break;
                case 3: ly = -b.w / 2; lx = rng.uniform(-b.l / 2, b.l / 2); lz = rng.uniform(-b.h / 2, b.h / 2); break;
                default: lz = b.h / 2; lx = rng.uniform(-b.l / 2, b.l / 2); ly = rng.uniform(-b.w / 2, b.w / 2); break;
            }
            Point p;
            p.x = b.cx + cs * lx - sn * ly;
            p.y = b.cy + sn * lx + cs * ly;
            p.z = b.cz + lz;
            p.intensity = rng.uniform(0.6, 0.9);
            s.cloud.points.push_back(p);
        }
    }

    // image: sky/ground split plus one filled rectangle per visible car
    s.image.width = kSynthImageWidth;
    s.image.height = kSynthImageHeight;
    s.image.data.assign(static_cast<size_t>(kSynthImageWidth) * kSynthImageHeight * 3, 0.0);
    for (int r = 0; r < kSynthImageHeight; ++r)
        for (int c = 0; c < kSynthImageWidth; ++c) {
            bool sky = r < kSynthImageHeight / 2;
            s.image.at(r, c, 0) = sky ? 0.55 : 0.35;
            s.image.at(r, c, 1) = sky ? 0.65 : 0.32;
            s.image.at(r, c, 2) = sky ? 0.80 : 0.30;
        }

    for (const Box3D& b : boxes) {
        Label lbl = lidar_box_to_camera_label(b, s.calib, "Car");
        double col[3] = {rng.uniform(0.5, 1.0), rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5)};
        // clip bbox to image
        double u0 = std::max(0.0, lbl.bbox[0]), v0 = std::max(0.0, lbl.bbox[1]);
        double u1 = std::min<double>(kSynthImageWidth - 1, lbl.bbox[2]);
        double v1 = std::min<double>(kSynthImageHeight - 1, lbl.bbox[3]);
        if (u1 > u0 && v1 > v0 && lbl.z > 0) {
            for (int r = static_cast<int>(v0); r <= static_cast<int>(v1); ++r)
                for (int c = static_cast<int>(u0); c <= static_cast<int>(u1); ++c)
                    for (int ch = 0; ch < 3; ++ch) s.image.at(r, c, ch) = col[ch];
            lbl.bbox[0] = u0;
            lbl.bbox[1] = v0;
            lbl.bbox[2] = u1;
            lbl.bbox[3] = v1;
        } else {
            lbl.bbox[0] = lbl.bbox[1] = lbl.bbox[2] = lbl.bbox[3] = 0;
        }
        s.labels.push_back(std::move(lbl));
    }

    // snap to float32 so the on-disk velodyne encoding is lossless
    for (Point& p : s.cloud.points) {
        p.x = static_cast<float>(p.x);
        p.y = static_cast<float>(p.y);
        p.z = static_cast<float>(p.z);
        p.intensity = static_cast<float>(p.intensity);
    }
    return s;
}

}  // namespace mvaf
