#pragma once

#include "ssn/alif_rsnn.hpp"

namespace ssn {

enum class FieldScale { Quarter, Full };

/// Horizontal disparity in pixels, right-image column = j - d.
struct DisparityField {
    Tensor values;  // [H, W]
    FieldScale scale = FieldScale::Full;
};

struct RigCalibration {
    double baseline_m = 0.08;
    double focal_px = 1000.0;
    double principal_offset_px = 0.0;  // c_x1 - c_x0

    void validate() const;
};

inline constexpr std::size_t kUpsampleFactor = 4;
inline constexpr std::size_t kMaskChannels = 9 * kUpsampleFactor * kUpsampleFactor;

/// Two-conv heads on the 1/4 layer's membrane potential.
class RefinementHead {
public:
    RefinementHead() = default;
    RefinementHead(ParamStore& ps, Initializer& init, const NetConfig& cfg);

    struct Output {
        Var delta;  // [1, H4, W4]
        Var mask;   // [144, H4, W4] logits
    };
    Output operator()(const AlifLayerState& quarter_state) const;

    /// Sets the residual branch's last conv to zero (delta == 0 until trained).
    void zero_residual_output();

private:
    Conv2d disp1_, disp2_, mask1_, mask2_;
};

inline RefinementHead::Output predict_residual(const RefinementHead& head, const AlifLayerState& state) {
    return head(state);
}

/// Full-resolution disparity as a convex combination of the replicate-padded
/// 3x3 coarse neighbourhood, with disparities scaled by 4. Mask channel for
/// neighbour k = (dy+1)*3 + (dx+1) and sub-pixel (sy, sx) is k*16 + sy*4 + sx.
Var convex_upsample(const Var& disparity, const Var& mask_logits);

/// Clamp to d >= 0.
DisparityField project_nonnegative(DisparityField d);

struct DepthMap {
    Tensor depth_m;           // [H, W], 0 where invalid
    std::vector<std::uint8_t> valid;
};

/// Z = B f / (d + offset); pixels with denominator <= eps are invalid.
DepthMap disparity_to_depth(const DisparityField& d, const RigCalibration& rig, double eps = 1e-9);
/// d = B f / Z - offset; Z <= 0 gives 0.
DisparityField depth_to_disparity(const Tensor& depth_m, const RigCalibration& rig);

}  // namespace ssn
