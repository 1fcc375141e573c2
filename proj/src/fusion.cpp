#include "mvaf/fusion.hpp"

#include "mvaf/backbone.hpp"

namespace mvaf {

LinearLayer::LinearLayer(ParamStore* store, const std::string& prefix, int in, int out, Rng* rng) {
    w = store->create(prefix + ".w", he_init({in, out}, in, rng));
    b = store->create(prefix + ".b", Tensor({out}));
}

ViewProjector::ViewProjector(ParamStore* store, const std::string& prefix, int cv_in, int bev_in,
                             int rv_in, int common, Rng* rng)
    : cv(store, prefix + ".cv", cv_in, common, rng),
      bev(store, prefix + ".bev", bev_in, common, rng),
      rv(store, prefix + ".rv", rv_in, common, rng) {}

MultiViewPointFeatures ViewProjector::forward(const ad::Var& cv_feats, const ad::Var& bev_feats,
                                              const ad::Var& rv_feats) const {
    return {cv.forward(cv_feats), bev.forward(bev_feats), rv.forward(rv_feats)};
}

ApfModule::ApfModule(ParamStore* store, const std::string& prefix, int common, int hidden,
                     Rng* rng) {
    const char* views[3] = {"cv", "bev", "rv"};
    for (int k = 0; k < 3; ++k) {
        mlp1_[k] = LinearLayer(store, prefix + "." + views[k] + ".l1", 3 * common, hidden, rng);
        mlp2_[k] = LinearLayer(store, prefix + "." + views[k] + ".l2", hidden, common, rng);
    }
}

FusedPointFeatures ApfModule::forward(const MultiViewPointFeatures& mv) const {
    FusedPointFeatures out;
    out.extended = ad::concat_cols({mv.cv, mv.bev, mv.rv});
    const ad::Var* feats[3] = {&mv.cv, &mv.bev, &mv.rv};
    ad::Var gates[3], attended[3];
    for (int k = 0; k < 3; ++k) {
        gates[k] = ad::sigmoid(mlp2_[k].forward(ad::relu(mlp1_[k].forward(out.extended))));
        attended[k] = ad::mul(*feats[k], gates[k]);
    }
    out.gate_cv = gates[0];
    out.gate_bev = gates[1];
    out.gate_rv = gates[2];
    out.fused = ad::concat_cols({attended[0], attended[1], attended[2]});
    return out;
}

FusedPointFeatures fusion_variant_es(const MultiViewPointFeatures& mv) {
    FusedPointFeatures out;
    out.extended = ad::concat_cols({mv.cv, mv.bev, mv.rv});
    out.fused = ad::add(ad::add(mv.cv, mv.bev), mv.rv);
    return out;
}

FusedPointFeatures fusion_variant_sc(const MultiViewPointFeatures& mv) {
    FusedPointFeatures out;
    out.extended = ad::concat_cols({mv.cv, mv.bev, mv.rv});
    out.fused = out.extended;
    return out;
}

RawEncoder::RawEncoder(ParamStore* store, const std::string& prefix, int out,
                       const std::string& norm_mode, Rng* rng)
    : lin_(store, prefix + ".lin", 4, out, rng), norm_mode_(norm_mode) {
    gamma_ = store->create(prefix + ".gamma", Tensor::full({out}, 1.0));
    beta_ = store->create(prefix + ".beta", Tensor({out}));
    norm_ = std::make_shared<ad::NormState>();
}

ad::Var RawEncoder::forward(const ad::Var& raw, bool training) const {
    ad::Var x = lin_.forward(raw);
    x = norm_mode_ == "batch" ? ad::batch_norm(x, gamma_, beta_, norm_.get(), training)
                              : ad::channel_affine(x, gamma_, beta_);
    return ad::relu(x);
}

ad::Var enrich_with_raw(const ad::Var& fused, const ad::Var& raw_mapped) {
    if (fused.value().dim(0) != raw_mapped.value().dim(0))
        throw ShapeError("enrich_with_raw: point count mismatch");
    return ad::concat_cols({fused, raw_mapped});
}

ApwModule::ApwModule(ParamStore* store, const std::string& prefix, int in, int hidden, Rng* rng)
    : trunk_(store, prefix + ".mid", in, hidden, rng),
      cls_(store, prefix + ".cls", hidden, 1, rng),
      ctr_(store, prefix + ".ctr", hidden, 3, rng) {}

APWOutputs ApwModule::forward(const ad::Var& features, bool apply_weighting) const {
    APWOutputs out;
    ad::Var mid = ad::relu(trunk_.forward(features));
    out.cls = ad::sigmoid(cls_.forward(mid));
    out.ctr = ctr_.forward(mid);
    out.weighted = apply_weighting ? ad::row_scale(features, out.cls) : features;
    return out;
}

}  // namespace mvaf
