#include <doctest.h>

#include "fd_check.hpp"
#include "mvaf/fusion.hpp"

using namespace mvaf;

namespace {

MultiViewPointFeatures random_views(Rng& rng, int n, int c) {
    MultiViewPointFeatures mv;
    mv.cv = ad::make_leaf(test::random_tensor({n, c}, rng));
    mv.bev = ad::make_leaf(test::random_tensor({n, c}, rng));
    mv.rv = ad::make_leaf(test::random_tensor({n, c}, rng));
    return mv;
}

}  // namespace

TEST_CASE("zero-parameter attention gates sit at one half") {
    Rng rng(41);
    ParamStore store;
    ApfModule apf(&store, "apf", 4, 6, &rng);
    for (const auto& name : store.names()) {
        Tensor& t = store.get(name).value();
        std::fill(t.data.begin(), t.data.end(), 0.0);
    }
    MultiViewPointFeatures mv = random_views(rng, 5, 4);
    FusedPointFeatures out = apf.forward(mv);
    for (const ad::Var* gate : {&out.gate_cv, &out.gate_bev, &out.gate_rv})
        for (double v : gate->value().data) CHECK(v == 0.5);
    // fused output is then exactly half the per-view features
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(out.fused.value().at(i, j) == 0.5 * mv.cv.value().at(i, j));
}

TEST_CASE("apf shapes and gradients") {
    Rng rng(42);
    ParamStore store;
    ApfModule apf(&store, "apf", 3, 4, &rng);
    MultiViewPointFeatures mv = random_views(rng, 6, 3);
    FusedPointFeatures out = apf.forward(mv);
    CHECK(out.extended.value().shape == std::vector<int>{6, 9});
    CHECK(out.fused.value().shape == std::vector<int>{6, 9});

    auto build = [&](const std::vector<ad::Var>& v) {
        MultiViewPointFeatures m{v[0], v[1], v[2]};
        return ad::sum(apf.forward(m).fused);
    };
    CHECK(test::fd_max_rel_err(build,
                               {test::random_tensor({4, 3}, rng), test::random_tensor({4, 3}, rng),
                                test::random_tensor({4, 3}, rng)}) < 1e-5);
}

TEST_CASE("summation and concatenation variants") {
    Rng rng(43);
    MultiViewPointFeatures mv = random_views(rng, 4, 3);
    FusedPointFeatures es = fusion_variant_es(mv);
    CHECK(es.fused.value().shape == std::vector<int>{4, 3});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(es.fused.value().at(i, j) ==
                  doctest::Approx(mv.cv.value().at(i, j) + mv.bev.value().at(i, j) +
                                  mv.rv.value().at(i, j)));

    FusedPointFeatures sc = fusion_variant_sc(mv);
    CHECK(sc.fused.value().shape == std::vector<int>{4, 9});
    CHECK(sc.fused.value().at(2, 5) == mv.bev.value().at(2, 2));
}

TEST_CASE("bilinear gather is linear in the map") {
    Rng rng(44);
    Tensor a = test::random_tensor({2, 5, 6}, rng);
    Tensor b = test::random_tensor({2, 5, 6}, rng);
    ad::GatherCoords coords;
    for (int i = 0; i < 30; ++i)
        coords.push_back(std::make_pair(rng.uniform(-0.5, 4.5), rng.uniform(-0.5, 5.5)));
    coords.push_back(std::nullopt);

    const double alpha = 1.7, beta = -0.4;
    Tensor mix({2, 5, 6});
    for (size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = alpha * a.data[i] + beta * b.data[i];

    Tensor ga = ad::bilinear_gather(ad::make_leaf(a), coords).value();
    Tensor gb = ad::bilinear_gather(ad::make_leaf(b), coords).value();
    Tensor gm = ad::bilinear_gather(ad::make_leaf(mix), coords).value();
    for (size_t i = 0; i < gm.data.size(); ++i)
        CHECK(std::abs(gm.data[i] - (alpha * ga.data[i] + beta * gb.data[i])) < 1e-12);
}

TEST_CASE("raw encoder and enrichment") {
    Rng rng(45);
    ParamStore store;
    RawEncoder enc(&store, "raw", 5, "affine", &rng);
    ad::Var raw = ad::make_leaf(test::random_tensor({7, 4}, rng));
    ad::Var mapped = enc.forward(raw, true);
    CHECK(mapped.value().shape == std::vector<int>{7, 5});
    for (double v : mapped.value().data) CHECK(v >= 0.0);  // ReLU output

    ad::Var fused = ad::make_leaf(test::random_tensor({7, 9}, rng));
    ad::Var enriched = enrich_with_raw(fused, mapped);
    CHECK(enriched.value().shape == std::vector<int>{7, 14});
    CHECK(enriched.value().at(3, 2) == fused.value().at(3, 2));
    CHECK(enriched.value().at(3, 9) == mapped.value().at(3, 0));

    ad::Var wrong = ad::make_leaf(test::random_tensor({6, 5}, rng));
    CHECK_THROWS_AS(enrich_with_raw(fused, wrong), ShapeError);
}

TEST_CASE("apw weighting is an exact row scale") {
    Rng rng(46);
    ParamStore store;
    ApwModule apw(&store, "apw", 6, 8, &rng);
    ad::Var features = ad::make_leaf(test::random_tensor({9, 6}, rng));
    APWOutputs out = apw.forward(features, true);
    CHECK(out.cls.value().shape == std::vector<int>{9, 1});
    CHECK(out.ctr.value().shape == std::vector<int>{9, 3});
    for (double v : out.cls.value().data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 6; ++j)
            CHECK(out.weighted.value().at(i, j) ==
                  features.value().at(i, j) * out.cls.value().at(i, 0));

    APWOutputs plain = apw.forward(features, false);
    for (size_t i = 0; i < features.value().data.size(); ++i)
        CHECK(plain.weighted.value().data[i] == features.value().data[i]);
}

TEST_CASE("apw gradients") {
    Rng rng(47);
    ParamStore store;
    ApwModule apw(&store, "apw", 4, 5, &rng);
    auto build = [&](const std::vector<ad::Var>& v) {
        return ad::sum(apw.forward(v[0], true).weighted);
    };
    CHECK(test::fd_max_rel_err(build, {test::random_tensor({5, 4}, rng)}) < 1e-5);
}
