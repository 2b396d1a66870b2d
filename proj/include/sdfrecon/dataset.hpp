#pragma once

#include <string>
#include <vector>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/image.hpp"

namespace sdfrecon {

struct DatasetView {
    Camera camera;
    ImageRGB image;
    ImageGray mask;
};

struct Dataset {
    std::vector<DatasetView> views;
};

// Layout: <root>/cameras.txt (one line per camera: id fx fy cx cy w h followed
// by 12 pose floats, row-major world-from-camera rotation then position),
// <root>/images/<id>.png, <root>/masks/<id>.png (8-bit, >127 = foreground).
Dataset load_dataset(const std::string& root);
void save_dataset(const std::string& root, const Dataset& ds);

} // namespace sdfrecon
