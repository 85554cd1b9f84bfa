#include "vseg/cli.hpp"

#include <json.hpp>

#include <cstdlib>

namespace vseg {

using nlohmann::json;

namespace {

template <class T>
void read_opt(const json& j, const char* key, T& value) {
    if (j.contains(key)) value = j.at(key).get<T>();
}

ObjectSpec object_from(const json& j) {
    ObjectSpec o;
    if (j.contains("shape")) o.shape = shape_from_string(j.at("shape").get<std::string>());
    read_opt(j, "x", o.x);
    read_opt(j, "y", o.y);
    read_opt(j, "half_width", o.half_width);
    read_opt(j, "half_height", o.half_height);
    read_opt(j, "vx", o.vx);
    read_opt(j, "vy", o.vy);
    read_opt(j, "color", o.color);
    o.color2 = o.color;
    read_opt(j, "color2", o.color2);
    read_opt(j, "depth", o.depth);
    read_opt(j, "depth_slope", o.depth_slope);
    read_opt(j, "noise", o.noise);
    return o;
}

CorruptionSpec corruption_from(const json& j) {
    CorruptionSpec c;
    c.mode = corruption_mode_from_string(j.at("mode").get<std::string>());
    read_opt(j, "amount", c.amount);
    read_opt(j, "pairs", c.pairs);
    read_opt(j, "target", c.target);
    read_opt(j, "frame", c.frame);
    read_opt(j, "seed", c.seed);
    return c;
}

} // namespace

std::vector<int> default_annotated_frames(int frames) {
    std::vector<int> out;
    for (int t = 0; t < frames; t += 2) out.push_back(t);
    if (out.back() != frames - 1) out.push_back(frames - 1);
    return out;
}

SynthConfig synth_config_from_text(const std::string& text) {
    SynthConfig c;
    try {
        const json j = json::parse(text);
        read_opt(j, "video", c.video);
        const auto& g = j.at("grid");
        c.scene.grid = {g.at("width").get<int>(), g.at("height").get<int>(), g.at("frames").get<int>()};
        read_opt(j, "seed", c.scene.seed);
        if (j.contains("background")) {
            const auto& b = j.at("background");
            read_opt(b, "color", c.scene.background.color);
            read_opt(b, "depth", c.scene.background.depth);
            read_opt(b, "depth_slope", c.scene.background.depth_slope);
            read_opt(b, "noise", c.scene.background.noise);
        }
        for (const auto& o : j.at("objects")) c.scene.objects.push_back(object_from(o));
        for (const auto& o : j.at("outputs")) {
            OutputSpec s;
            s.name = o.at("name").get<std::string>();
            s.kind = output_kind_from_string(o.value("kind", std::string("video")));
            if (o.contains("corruptions"))
                for (const auto& cj : o.at("corruptions")) s.corruptions.push_back(corruption_from(cj));
            c.outputs.push_back(std::move(s));
        }
        read_opt(j, "annotated_frames", c.annotated_frames);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("scene config: ") + e.what());
    }
    c.scene.validate();
    if (c.outputs.empty()) throw Error(ErrorCode::invalid_argument, "scene config: no pooled outputs");
    if (c.annotated_frames.empty()) c.annotated_frames = default_annotated_frames(c.scene.grid.frames);
    return c;
}

SynthConfig preset_config(const std::string& name, std::uint64_t seed) {
    SynthConfig c;
    c.video = name;
    c.scene = preset_scene(name, seed);
    c.outputs = preset_pool(name, seed);
    c.annotated_frames = default_annotated_frames(c.scene.grid.frames);
    return c;
}

std::filesystem::path scratch_dir() {
    if (const char* s = std::getenv("VSEG_SCRATCH"); s && *s) return s;
    return std::filesystem::temp_directory_path() / "vseg";
}

} // namespace vseg
