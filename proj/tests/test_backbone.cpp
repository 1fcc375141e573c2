#include <doctest.h>

#include "fd_check.hpp"
#include "mvaf/backbone.hpp"

using namespace mvaf;

namespace {

BackboneConfig small_cfg() {
    BackboneConfig cfg;
    cfg.blocks = {1, 1, 1};
    cfg.channels = {4, 6, 8};
    cfg.up_channels = 4;
    cfg.up_stride = 2;
    return cfg;
}

}  // namespace

TEST_CASE("backbone output shape, stride and channel count") {
    Rng rng(31);
    ParamStore store;
    Backbone bb(&store, "t", small_cfg(), 3, "affine", 0.1, &rng);
    CHECK(bb.output_channels() == 12);  // 3 blocks x 4 up channels
    CHECK(bb.output_stride() == 2);

    ad::Var x = ad::make_leaf(test::random_tensor({3, 16, 16}, rng));
    ViewFeatureMap out = bb.forward(x, true);
    CHECK(out.stride == 2);
    CHECK(out.map.value().shape == std::vector<int>{12, 8, 8});
}

TEST_CASE("cv-style backbone skips the first block in the upsample stage") {
    Rng rng(32);
    BackboneConfig cfg;
    cfg.blocks = {1, 1, 1, 1};
    cfg.channels = {4, 4, 6, 8};
    cfg.up_channels = 4;
    cfg.up_stride = 4;
    ParamStore store;
    Backbone bb(&store, "cv", cfg, 3, "affine", 0.1, &rng, /*first_up_block=*/1);
    CHECK(bb.output_channels() == 12);  // only 3 of 4 blocks contribute
    CHECK(!store.has("cv.b0.up.w"));
    CHECK(store.has("cv.b1.up.w"));

    ad::Var x = ad::make_leaf(test::random_tensor({3, 32, 16}, rng));
    ViewFeatureMap out = bb.forward(x, true);
    CHECK(out.map.value().shape == std::vector<int>{12, 8, 4});
    CHECK(out.stride == 4);
}

TEST_CASE("input not divisible by the total stride is rejected") {
    Rng rng(33);
    ParamStore store;
    Backbone bb(&store, "t", small_cfg(), 3, "affine", 0.1, &rng);
    ad::Var x = ad::make_leaf(test::random_tensor({3, 12, 16}, rng));  // 12 % 8 != 0
    CHECK_THROWS_AS(bb.forward(x, true), ShapeError);
}

TEST_CASE("backbone gradients reach the input") {
    Rng rng(34);
    BackboneConfig cfg;
    cfg.blocks = {1, 1};
    cfg.channels = {3, 4};
    cfg.up_channels = 2;
    cfg.up_stride = 2;
    auto build = [&](const std::vector<ad::Var>& v) {
        ParamStore store;
        Rng prng(99);  // same weights every call
        Backbone bb(&store, "g", cfg, 2, "affine", 0.1, &prng);
        return ad::sum(bb.forward(v[0], true).map);
    };
    CHECK(test::fd_max_rel_err(build, {test::random_tensor({2, 8, 8}, rng)}) < 1e-5);
}
