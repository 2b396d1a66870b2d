#include "sdfrecon/schedule.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sdfrecon {

namespace {

using nlohmann::json;

Bracket parse_bracket(const json& j) {
    if (j.is_number()) return Bracket(j.get<double>());
    if (j.is_array() && j.size() == 2)
        return Bracket(j[0].get<double>(), j[1].get<double>());
    throw std::runtime_error("schedule: bracket must be a number or a [start, end] pair");
}

json dump_bracket(const Bracket& b) {
    if (b.a == b.b) return json(b.a);
    return json::array({b.a, b.b});
}

void read_bracket(const json& j, const char* key, Bracket& out) {
    if (j.contains(key)) out = parse_bracket(j.at(key));
}

} // namespace

TrainSchedule TrainSchedule::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("schedule: invalid JSON: ") + e.what());
    }
    TrainSchedule s;
    s.lambda_photo = j.value("lambda_photo", 40.0);
    s.camera_bias = j.value("camera_bias", false);
    if (!j.contains("lods") || !j.at("lods").is_array())
        throw std::runtime_error("schedule: missing 'lods' array");
    for (const json& jl : j.at("lods")) {
        LodSchedule l;
        l.iterations = jl.value("iterations", 0);
        l.images_per_batch = jl.value("images_per_batch", 1);
        l.sh_order = jl.value("sh_order", 2);
        l.image_divisor = jl.value("image_divisor", 1);
        read_bracket(jl, "lr_voxels", l.lr_voxels);
        read_bracket(jl, "lr_mlp", l.lr_mlp);
        read_bracket(jl, "lambda_eik", l.lambda_eik);
        read_bracket(jl, "lambda_sdf", l.lambda_sdf);
        read_bracket(jl, "lambda_features", l.lambda_features);
        read_bracket(jl, "lambda_normal", l.lambda_normal);
        read_bracket(jl, "lambda_probes", l.lambda_probes);
        read_bracket(jl, "tau", l.tau);
        if (l.iterations < 0) throw std::runtime_error("schedule: negative iteration count");
        if (l.images_per_batch < 1) throw std::runtime_error("schedule: images_per_batch < 1");
        if (l.sh_order < 1 || l.sh_order > 4)
            throw std::runtime_error("schedule: sh_order out of range [1,4]");
        if (l.image_divisor < 1) throw std::runtime_error("schedule: image_divisor < 1");
        if (l.tau.a <= 0.0 || l.tau.b <= 0.0)
            throw std::runtime_error("schedule: tau must be positive");
        s.lods.push_back(l);
    }
    if (s.lods.empty()) throw std::runtime_error("schedule: 'lods' is empty");
    for (size_t i = 1; i < s.lods.size(); ++i)
        if (s.lods[i].sh_order < s.lods[i - 1].sh_order)
            throw std::runtime_error("schedule: sh_order must be non-decreasing across LODs");
    return s;
}

TrainSchedule TrainSchedule::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("schedule: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

std::string TrainSchedule::to_json_text() const {
    json j;
    j["lambda_photo"] = lambda_photo;
    j["camera_bias"] = camera_bias;
    j["lods"] = json::array();
    for (const LodSchedule& l : lods) {
        json jl;
        jl["iterations"] = l.iterations;
        jl["images_per_batch"] = l.images_per_batch;
        jl["sh_order"] = l.sh_order;
        jl["image_divisor"] = l.image_divisor;
        jl["lr_voxels"] = dump_bracket(l.lr_voxels);
        jl["lr_mlp"] = dump_bracket(l.lr_mlp);
        jl["lambda_eik"] = dump_bracket(l.lambda_eik);
        jl["lambda_sdf"] = dump_bracket(l.lambda_sdf);
        jl["lambda_features"] = dump_bracket(l.lambda_features);
        jl["lambda_normal"] = dump_bracket(l.lambda_normal);
        jl["lambda_probes"] = dump_bracket(l.lambda_probes);
        jl["tau"] = dump_bracket(l.tau);
        j["lods"].push_back(jl);
    }
    return j.dump(2);
}

} // namespace sdfrecon
