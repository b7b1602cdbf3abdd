#pragma once

// Video-level geometric augmentation: with probability p one transform
// (horizontal shift <=5%, rotation <=5 degrees, or scale 0.95..1.05) is drawn
// and applied with identical parameters to every frame of the video.

#include <vector>

#include "mmslt/image.hpp"
#include "mmslt/rng.hpp"

namespace mmslt {

inline std::vector<Image> augment_video(const std::vector<Image>& frames, double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("augment_video: p out of [0,1]");
    if (frames.empty() || rng.uniform() >= p) return frames;
    AffineParams params;
    switch (rng.uniform_int(3)) {
        case 0:
            params.shift_x = rng.uniform(-0.05, 0.05) * frames.front().width;
            break;
        case 1:
            params.angle = rng.uniform(-5.0, 5.0) * 0.017453292519943295;
            break;
        default:
            params.scale = rng.uniform(0.95, 1.05);
            break;
    }
    std::vector<Image> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(warp_affine(f, params));
    return out;
}

}  // namespace mmslt
