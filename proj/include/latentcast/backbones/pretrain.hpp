#pragma once

#include "latentcast/backbones/encoder.hpp"
#include "latentcast/synthworld/dataset.hpp"

#include <vector>

namespace latentcast::backbones {

struct PretrainReport {
    std::vector<double> losses;  // masked-patch reconstruction MSE per step
};

/// Masked-patch reconstruction. video-mae masks tubes that span a window of
/// spec.window frames and decodes the window jointly; image-mae masks and
/// decodes every frame on its own. With mask_ratio 0 every patch is a target.
/// The decoder is discarded afterwards.
///
/// Throws std::invalid_argument for variants that have no pretraining and
/// numkit::TrainingDiverged if the loss goes non-finite.
PretrainReport pretrain_encoder(Encoder& encoder, const synthworld::Dataset& train);

}  // namespace latentcast::backbones
