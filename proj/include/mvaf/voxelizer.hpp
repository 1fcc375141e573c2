#pragma once

#include <vector>

#include "mvaf/autodiff.hpp"
#include "mvaf/geometry.hpp"

namespace mvaf {

// Pillar grid over two planar axes plus a vertical crop axis.
// BEV: rows index y, cols index x, crop axis z.
// RV: rows index z, cols index phi, crop axis rho (unbounded: [0, inf)).
struct VoxelGridSpec {
    ViewKind kind = ViewKind::BEV;
    double row_min = 0, row_max = 0;
    double col_min = 0, col_max = 0;
    double aux_min = 0, aux_max = 0;  // z crop for BEV; unused for RV
    double row_cell = 1, col_cell = 1;

    int rows() const;
    int cols() const;

    // Paper settings, exposed for tests and the default full-scale config.
    static VoxelGridSpec paper_bev();  // 400 x 352
    static VoxelGridSpec paper_rv();   // 80 x 1280
};

struct PillarAssignment {
    std::vector<int> point_pillar;                  // per-point index into `cells`, -1 if cropped
    std::vector<std::pair<int, int>> cells;         // occupied (row, col), unique, first-seen order
    std::vector<std::vector<int>> groups;           // member point rows per occupied pillar
};

// Keeps points with every coordinate in [min, max) for the spec's axes
// (BEV: x,y,z; RV: phi,z). Order preserved.
std::pair<std::vector<int>, std::vector<Point>> crop_points(const PointCloud& cloud,
                                                            const VoxelGridSpec& spec);

// floor((coord - min) / cell) binning of already-cropped points; no capacity
// limit, no padding. Cells landing exactly on the far edge from float
// round-off clamp to the last bin.
PillarAssignment assign_pillars(const std::vector<Point>& points, const VoxelGridSpec& spec);

// Channel-wise max over each pillar's member points (differentiable).
ad::Var pillar_max_pool(const ad::Var& point_features, const PillarAssignment& assignment);

// Dense (C, rows, cols) image; unoccupied cells are exactly zero.
ad::Var scatter_to_pseudo_image(const ad::Var& pillar_features, const PillarAssignment& assignment,
                                const VoxelGridSpec& spec);

ViewMapping view_mapping_of(const VoxelGridSpec& spec, int stride);

}  // namespace mvaf
