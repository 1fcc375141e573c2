#pragma once

#include <string>

#include "mvaf/autodiff.hpp"
#include "mvaf/optim.hpp"

namespace mvaf {

// Per-point features gathered from the three view feature maps, already
// mapped to a common width C.
struct MultiViewPointFeatures {
    ad::Var cv, bev, rv;  // (N, C) each
};

struct FusedPointFeatures {
    ad::Var extended;                       // F_P_E: (N, 3C)
    ad::Var fused;                          // F_P_Fusion: (N, 3C) for APF/SC, (N, C) for ES
    ad::Var gate_cv, gate_bev, gate_rv;     // APF only, for inspection dumps
};

struct APWOutputs {
    ad::Var cls;       // (N, 1) foreground probability
    ad::Var ctr;       // (N, 3) center offsets
    ad::Var weighted;  // input features scaled rowwise by cls
};

struct LinearLayer {
    ad::Var w, b;
    LinearLayer() = default;
    LinearLayer(ParamStore* store, const std::string& prefix, int in, int out, Rng* rng);
    ad::Var forward(const ad::Var& x) const { return ad::linear(x, w, b); }
};

// Maps each view's gathered backbone features to the common width C.
struct ViewProjector {
    LinearLayer cv, bev, rv;
    ViewProjector() = default;
    ViewProjector(ParamStore* store, const std::string& prefix, int cv_in, int bev_in, int rv_in,
                  int common, Rng* rng);
    MultiViewPointFeatures forward(const ad::Var& cv_feats, const ad::Var& bev_feats,
                                   const ad::Var& rv_feats) const;
};

// Attentive pointwise fusion: three sigmoid channel-attention branches over
// the concatenated extended features, each gating its own view.
class ApfModule {
public:
    ApfModule() = default;
    ApfModule(ParamStore* store, const std::string& prefix, int common, int hidden, Rng* rng);
    FusedPointFeatures forward(const MultiViewPointFeatures& mv) const;

private:
    LinearLayer mlp1_[3], mlp2_[3];  // cv, bev, rv
};

// Ablation variants: per-view features summed / concatenated, no gates.
FusedPointFeatures fusion_variant_es(const MultiViewPointFeatures& mv);
FusedPointFeatures fusion_variant_sc(const MultiViewPointFeatures& mv);

// linear + norm + ReLU over raw (x,y,z,intensity) rows.
class RawEncoder {
public:
    RawEncoder() = default;
    RawEncoder(ParamStore* store, const std::string& prefix, int out, const std::string& norm_mode,
               Rng* rng);
    ad::Var forward(const ad::Var& raw, bool training) const;

private:
    LinearLayer lin_;
    ad::Var gamma_, beta_;
    std::shared_ptr<ad::NormState> norm_;
    std::string norm_mode_;
};

ad::Var enrich_with_raw(const ad::Var& fused, const ad::Var& raw_mapped);

// Attentive pointwise weighting: shared trunk, sigmoid foreground head,
// linear center head; foreground probability reweights the features.
class ApwModule {
public:
    ApwModule() = default;
    ApwModule(ParamStore* store, const std::string& prefix, int in, int hidden, Rng* rng);
    APWOutputs forward(const ad::Var& features, bool apply_weighting) const;

private:
    LinearLayer trunk_, cls_, ctr_;
};

}  // namespace mvaf
