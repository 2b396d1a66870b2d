#include "sdfrecon/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sdfrecon {

namespace fs = std::filesystem;

Dataset load_dataset(const std::string& root) {
    const fs::path base(root);
    std::ifstream cams(base / "cameras.txt");
    if (!cams) throw std::runtime_error("dataset: cannot open " + (base / "cameras.txt").string());
    Dataset ds;
    std::string line;
    int lineno = 0;
    while (std::getline(cams, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Camera c;
        ss >> c.id >> c.fx >> c.fy >> c.cx >> c.cy >> c.width >> c.height;
        for (double& r : c.rot) ss >> r;
        ss >> c.pos.x >> c.pos.y >> c.pos.z;
        if (!ss)
            throw std::runtime_error("dataset: malformed camera line " + std::to_string(lineno) +
                                     " in cameras.txt");
        if (c.orthonormality_error() > 1e-4)
            throw std::runtime_error("dataset: non-orthonormal pose for camera " +
                                     std::to_string(c.id));
        if (c.width <= 0 || c.height <= 0 || c.fx <= 0.0 || c.fy <= 0.0)
            throw std::runtime_error("dataset: invalid intrinsics for camera " +
                                     std::to_string(c.id));
        DatasetView view;
        view.camera = c;
        const std::string name = std::to_string(c.id) + ".png";
        view.image = read_png_rgb((base / "images" / name).string());
        view.mask = read_png_gray((base / "masks" / name).string());
        if (view.image.width != c.width || view.image.height != c.height ||
            view.mask.width != c.width || view.mask.height != c.height)
            throw std::runtime_error("dataset: image/mask dimensions do not match camera " +
                                     std::to_string(c.id));
        ds.views.push_back(std::move(view));
    }
    if (ds.views.empty()) throw std::runtime_error("dataset: no cameras in " + root);
    return ds;
}

void save_dataset(const std::string& root, const Dataset& ds) {
    const fs::path base(root);
    fs::create_directories(base / "images");
    fs::create_directories(base / "masks");
    std::ofstream cams(base / "cameras.txt");
    if (!cams) throw std::runtime_error("dataset: cannot write " + (base / "cameras.txt").string());
    cams << std::setprecision(17);
    for (const DatasetView& v : ds.views) {
        const Camera& c = v.camera;
        cams << c.id << ' ' << c.fx << ' ' << c.fy << ' ' << c.cx << ' ' << c.cy << ' ' << c.width
             << ' ' << c.height;
        for (double r : c.rot) cams << ' ' << r;
        cams << ' ' << c.pos.x << ' ' << c.pos.y << ' ' << c.pos.z << '\n';
        const std::string name = std::to_string(c.id) + ".png";
        write_png_rgb((base / "images" / name).string(), v.image);
        write_png_gray((base / "masks" / name).string(), v.mask);
    }
    if (!cams) throw std::runtime_error("dataset: failed while writing cameras.txt");
}

} // namespace sdfrecon
