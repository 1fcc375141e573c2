#include "mvaf/voxelizer.hpp"

#include <cmath>
#include <unordered_map>

namespace mvaf {

namespace {

// Grid dimension from range and cell size. round() rather than ceil(): the
// published cell sizes describe the published grid dims only up to the
// last digit (pi / 0.002454 = 1280.2), and exact divisions are immune to
// float round-off either way.
int grid_dim(double lo, double hi, double cell) {
    if (cell <= 0) throw ConfigError("grid cell size must be positive");
    int d = static_cast<int>(std::llround((hi - lo) / cell));
    if (d <= 0) throw ConfigError("grid range shorter than one cell");
    return d;
}

}  // namespace

int VoxelGridSpec::rows() const { return grid_dim(row_min, row_max, row_cell); }
int VoxelGridSpec::cols() const { return grid_dim(col_min, col_max, col_cell); }

VoxelGridSpec VoxelGridSpec::paper_bev() {
    VoxelGridSpec s;
    s.kind = ViewKind::BEV;
    s.row_min = -40.0;
    s.row_max = 40.0;
    s.col_min = 0.0;
    s.col_max = 70.4;
    s.aux_min = -1.0;
    s.aux_max = 3.0;
    s.row_cell = 0.2;  // the stated 0.05 m contradicts the stated 400x352 grid
    s.col_cell = 0.2;
    return s;
}

VoxelGridSpec VoxelGridSpec::paper_rv() {
    VoxelGridSpec s;
    s.kind = ViewKind::RV;
    s.row_min = -1.0;
    s.row_max = 3.0;
    s.col_min = -kPi / 2;
    s.col_max = kPi / 2;
    s.row_cell = 0.05;
    s.col_cell = 0.002454;
    return s;
}

namespace {

// (row coord, col coord, aux coord) of a point under a spec
void spec_coords(const Point& p, const VoxelGridSpec& spec, double* r, double* c, double* a) {
    if (spec.kind == ViewKind::BEV) {
        *r = p.y;
        *c = p.x;
        *a = p.z;
    } else {
        CylindricalCoord cyl = to_cylindrical(p);
        *r = cyl.z;
        *c = cyl.phi;
        *a = 0;
    }
}

}  // namespace

std::pair<std::vector<int>, std::vector<Point>> crop_points(const PointCloud& cloud,
                                                            const VoxelGridSpec& spec) {
    std::vector<int> idx;
    std::vector<Point> kept;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const Point& p = cloud.points[i];
        double r, c, a;
        spec_coords(p, spec, &r, &c, &a);
        bool in = r >= spec.row_min && r < spec.row_max && c >= spec.col_min && c < spec.col_max;
        if (spec.kind == ViewKind::BEV) in = in && a >= spec.aux_min && a < spec.aux_max;
        if (in) {
            idx.push_back(static_cast<int>(i));
            kept.push_back(p);
        }
    }
    return {std::move(idx), std::move(kept)};
}

PillarAssignment assign_pillars(const std::vector<Point>& points, const VoxelGridSpec& spec) {
    PillarAssignment out;
    int rows = spec.rows(), cols = spec.cols();
    std::unordered_map<long long, int> cell_to_pillar;
    out.point_pillar.resize(points.size(), -1);
    for (size_t i = 0; i < points.size(); ++i) {
        double rc, cc, ac;
        spec_coords(points[i], spec, &rc, &cc, &ac);
        int r = static_cast<int>(std::floor((rc - spec.row_min) / spec.row_cell));
        int c = static_cast<int>(std::floor((cc - spec.col_min) / spec.col_cell));
        // in-range coordinate can bin one past the end when the range is not
        // an exact multiple of the cell (rounded dims) or from round-off
        r = std::min(std::max(r, 0), rows - 1);
        c = std::min(std::max(c, 0), cols - 1);
        long long key = static_cast<long long>(r) * cols + c;
        auto it = cell_to_pillar.find(key);
        int pillar;
        if (it == cell_to_pillar.end()) {
            pillar = static_cast<int>(out.cells.size());
            cell_to_pillar.emplace(key, pillar);
            out.cells.push_back({r, c});
            out.groups.emplace_back();
        } else {
            pillar = it->second;
        }
        out.point_pillar[i] = pillar;
        out.groups[static_cast<size_t>(pillar)].push_back(static_cast<int>(i));
    }
    return out;
}

ad::Var pillar_max_pool(const ad::Var& point_features, const PillarAssignment& assignment) {
    if (point_features.value().dim(0) != static_cast<int>(assignment.point_pillar.size()))
        throw ShapeError("pillar_max_pool: point count mismatch");
    return ad::grouped_max(point_features, assignment.groups);
}

ad::Var scatter_to_pseudo_image(const ad::Var& pillar_features, const PillarAssignment& assignment,
                                const VoxelGridSpec& spec) {
    return ad::scatter_rows(pillar_features, assignment.cells, spec.rows(), spec.cols());
}

ViewMapping view_mapping_of(const VoxelGridSpec& spec, int stride) {
    ViewMapping m;
    m.kind = spec.kind;
    m.stride = stride;
    m.row_origin = spec.row_min;
    m.col_origin = spec.col_min;
    m.row_cell = spec.row_cell;
    m.col_cell = spec.col_cell;
    m.rows = spec.rows();
    m.cols = spec.cols();
    return m;
}

}  // namespace mvaf
