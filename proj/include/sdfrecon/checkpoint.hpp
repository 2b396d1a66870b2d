#pragma once

#include <cstdint>
#include <string>

#include "sdfrecon/decoder.hpp"
#include "sdfrecon/grid.hpp"

namespace sdfrecon {

// Full trainable state plus the training cursor. Tensors are stored as
// little-endian f32 on disk; save(load(save(x))) is byte-identical.
struct Checkpoint {
    SparseGrid grid;
    DecoderMlp mlp;
    int lod_cursor = 0;     // index into the schedule's LOD list
    int64_t iteration = 0;  // iterations completed within that LOD
    uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace sdfrecon
