#pragma once

#include "jointrl/image.hpp"
#include "jointrl/rng.hpp"

namespace jointrl::aug {

enum class AugKind { random_crop, random_translate, center_crop, none };

// One branch's augmentation: m is the pre-crop source size (the searched
// magnitude), out the final size fed to the encoder.
struct AugmentationSpec {
  AugKind kind = AugKind::random_crop;
  int m = 100;
  int out = 84;

  void validate() const;
};

// Contiguous out x out window at a per-image uniform offset.
ImageBatch random_crop(const ImageBatch& batch, int out, RandomStream& rng);

// Image placed at a uniform offset on a zero m x m canvas, then center-cropped
// back to out. h = m = out is the identity.
ImageBatch random_translate(const ImageBatch& batch, int m, int out, RandomStream& rng);

ImageBatch center_crop(const ImageBatch& batch, int out);

// Center-crop (m <= source) or symmetric zero-pad (m > source) to m x m;
// realizes the magnitude before the final random crop.
ImageBatch resize_to_magnitude(const ImageBatch& batch, int m);

ImageBatch apply(const AugmentationSpec& spec, const ImageBatch& batch, RandomStream& rng);

struct BranchViews {
  ImageBatch s_a, s_a_next;  // online/RL branch (spec1)
  ImageBatch s_p, s_p_next;  // momentum/SSL branch (spec2)
};

// Four independently augmented views of (s, s'), one spec per branch.
BranchViews make_branch_views(const ImageBatch& s, const ImageBatch& s_next,
                              const AugmentationSpec& spec1, const AugmentationSpec& spec2,
                              RandomStream& rng);

}  // namespace jointrl::aug
