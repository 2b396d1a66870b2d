#pragma once

#include <ostream>

#include "sdfrecon/checkpoint.hpp"
#include "sdfrecon/dataset.hpp"
#include "sdfrecon/schedule.hpp"

namespace sdfrecon {

struct TrainStats {
    long steps_run = 0;
    double final_psnr = 0.0; // batch in-mask PSNR of the last step
};

// Full coarse-to-fine training loop. `ckpt` carries the state in and out and
// resumes from its LOD cursor. Emits one line per step to `log` when given:
//   step <n> lod <l> photo <..> sdf <..> eik <..> normal <..> features <..>
//   probes <..> total <..> psnr <..>
TrainStats train(const Dataset& ds, const TrainSchedule& sched, Checkpoint& ckpt,
                 std::ostream* log = nullptr);

} // namespace sdfrecon
