#include "vseg/synth.hpp"
#include "vseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace vseg {

const char* to_string(Shape shape) { return shape == Shape::rectangle ? "rectangle" : "ellipse"; }

Shape shape_from_string(const std::string& text) {
    if (text == "rectangle" || text == "rect") return Shape::rectangle;
    if (text == "ellipse") return Shape::ellipse;
    throw Error(ErrorCode::invalid_argument, "unknown shape '" + text + "'");
}

const char* to_string(CorruptionMode mode) {
    switch (mode) {
    case CorruptionMode::oversplit: return "oversplit";
    case CorruptionMode::merge: return "merge";
    case CorruptionMode::boundary_jitter: return "boundary_jitter";
    case CorruptionMode::drop_object: return "drop_object";
    case CorruptionMode::temporal_break: return "temporal_break";
    }
    return "?";
}

CorruptionMode corruption_mode_from_string(const std::string& text) {
    for (auto m : {CorruptionMode::oversplit, CorruptionMode::merge, CorruptionMode::boundary_jitter,
                   CorruptionMode::drop_object, CorruptionMode::temporal_break})
        if (text == to_string(m)) return m;
    throw Error(ErrorCode::invalid_argument, "unknown corruption '" + text + "'");
}

void SceneSpec::validate() const {
    grid.validate();
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        if (!(o.half_width > 0.0 && o.half_height > 0.0))
            throw Error(ErrorCode::invalid_argument, "object " + std::to_string(i + 1) + ": non-positive size");
        for (int t : {0, grid.frames - 1}) {
            const double cx = o.x + o.vx * t, cy = o.y + o.vy * t;
            if (cx - o.half_width < -0.5 || cy - o.half_height < -0.5 || cx + o.half_width > grid.width - 0.5 ||
                cy + o.half_height > grid.height - 0.5)
                throw Error(ErrorCode::invalid_argument,
                            "object " + std::to_string(i + 1) + " leaves the grid at frame " + std::to_string(t));
        }
    }
}

namespace {

bool covers(const ObjectSpec& o, double cx, double cy, int x, int y) {
    const double dx = (x - cx) / o.half_width, dy = (y - cy) / o.half_height;
    if (o.shape == Shape::rectangle) return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
    return dx * dx + dy * dy <= 1.0;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

} // namespace

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    const VoxelGrid& g = spec.grid;
    Scene scene{CueVolumes(g), LabelVolume()};
    std::vector<Label> labels(g.voxels(), 0);

    std::vector<std::size_t> order(spec.objects.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return spec.objects[a].depth < spec.objects[b].depth; });

    std::mt19937_64 rng(derive_seed(spec.seed, {0x5ce7e}));
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& bg = spec.background;
    for (int t = 0; t < g.frames; ++t)
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) {
                const std::size_t v = g.index(x, y, t);
                int owner = -1;
                for (auto i : order) {
                    const auto& o = spec.objects[i];
                    if (covers(o, o.x + o.vx * t, o.y + o.vy * t, x, y)) owner = int(i);
                }
                std::array<double, 3> color = bg.color;
                double noise = bg.noise, depth = bg.depth + bg.depth_slope * (x - 0.5 * (g.width - 1));
                double u = 0.0, w = 0.0;
                if (owner >= 0) {
                    const auto& o = spec.objects[std::size_t(owner)];
                    const double cx = o.x + o.vx * t;
                    color = x < cx ? o.color : o.color2;
                    noise = o.noise;
                    depth = o.depth + o.depth_slope * (x - cx);
                    u = o.vx;
                    w = o.vy;
                    labels[v] = Label(owner + 1);
                }
                for (int ch = 0; ch < 3; ++ch) {
                    const double n = normal(rng);
                    scene.cues.channel(Cue::color, ch)[v] = float(clamp01(color[std::size_t(ch)] + noise * n));
                }
                scene.cues.channel(Cue::flow, 0)[v] = float(u);
                scene.cues.channel(Cue::flow, 1)[v] = float(w);
                scene.cues.channel(Cue::depth, 0)[v] = float(clamp01(depth));
            }
    scene.labels = LabelVolume(g, std::move(labels));
    return scene;
}

namespace {

std::set<Label> present(const LabelVolume& v) { return std::set<Label>(v.labels().begin(), v.labels().end()); }

void require_object(const std::set<Label>& ids, Label id, const char* what) {
    if (!ids.count(id)) throw Error(ErrorCode::invalid_argument, std::string(what) + ": no segment with id " + std::to_string(id));
}

LabelVolume oversplit(const LabelVolume& in, int pieces) {
    if (pieces < 1) throw Error(ErrorCode::invalid_argument, "oversplit needs n >= 1");
    const VoxelGrid& g = in.grid();
    struct Box {
        int x0, y0, x1, y1;
    };
    std::map<Label, std::pair<int, int>> extent;  // widest frame extent in x and y
    std::vector<std::map<Label, Box>> boxes(std::size_t(g.frames));
    for (int t = 0; t < g.frames; ++t)
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) {
                const Label l = in.at(x, y, t);
                auto [it, fresh] = boxes[std::size_t(t)].try_emplace(l, Box{x, y, x, y});
                if (!fresh) {
                    auto& b = it->second;
                    b.x0 = std::min(b.x0, x);
                    b.y0 = std::min(b.y0, y);
                    b.x1 = std::max(b.x1, x);
                    b.y1 = std::max(b.y1, y);
                }
            }
    for (const auto& frame : boxes)
        for (const auto& [l, b] : frame) {
            auto& e = extent[l];
            e.first = std::max(e.first, b.x1 - b.x0 + 1);
            e.second = std::max(e.second, b.y1 - b.y0 + 1);
        }
    std::vector<Label> out(g.voxels());
    for (int t = 0; t < g.frames; ++t)
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) {
                const Label l = in.at(x, y, t);
                const Box& b = boxes[std::size_t(t)].at(l);
                const bool along_x = extent[l].first >= extent[l].second;
                const int lo = along_x ? b.x0 : b.y0, hi = along_x ? b.x1 : b.y1, p = along_x ? x : y;
                const int piece = std::min(pieces - 1, (p - lo) * pieces / (hi - lo + 1));
                out[g.index(x, y, t)] = l * Label(pieces) + Label(piece);
            }
    return LabelVolume(g, std::move(out));
}

LabelVolume jitter(const LabelVolume& in, int px, std::uint64_t seed) {
    if (px < 0) throw Error(ErrorCode::invalid_argument, "boundary_jitter needs px >= 0");
    const VoxelGrid& g = in.grid();
    std::vector<Label> out(g.voxels());
    for (int t = 0; t < g.frames; ++t) {
        std::mt19937_64 rng(derive_seed(seed, {std::uint64_t(t)}));
        std::uniform_int_distribution<int> start(-px, px), step(-1, 1);
        auto walk = [&](int n) {
            std::vector<int> o(static_cast<std::size_t>(n));
            int cur = start(rng);
            for (auto& v : o) {
                v = cur;
                cur = std::clamp(cur + step(rng), -px, px);
            }
            return o;
        };
        const auto ox = walk(g.height), oy = walk(g.width);
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) {
                const int sx = std::clamp(x + ox[std::size_t(y)], 0, g.width - 1);
                const int sy = std::clamp(y + oy[std::size_t(x)], 0, g.height - 1);
                out[g.index(x, y, t)] = in.at(sx, sy, t);
            }
    }
    return LabelVolume(g, std::move(out));
}

} // namespace

LabelVolume apply_corruption(const LabelVolume& labels, const CorruptionSpec& spec) {
    const VoxelGrid& g = labels.grid();
    std::vector<Label> out(labels.labels().begin(), labels.labels().end());
    const auto ids = present(labels);
    switch (spec.mode) {
    case CorruptionMode::oversplit: return oversplit(labels, spec.amount);
    case CorruptionMode::boundary_jitter: return jitter(labels, spec.amount, spec.seed);
    case CorruptionMode::merge: {
        std::map<Label, Label> into;
        for (auto [a, b] : spec.pairs) {
            require_object(ids, a, "merge");
            require_object(ids, b, "merge");
            into[b] = a;
        }
        for (auto& l : out) {
            // Follow chains such as (1,2),(0,1).
            for (int hop = 0; hop < int(into.size()) && into.count(l); ++hop) l = into[l];
        }
        break;
    }
    case CorruptionMode::drop_object:
        if (spec.target >= 0) require_object(ids, Label(spec.target), "drop_object");
        for (auto& l : out)
            if (spec.target < 0 ? l != 0 : l == Label(spec.target)) l = 0;
        break;
    case CorruptionMode::temporal_break: {
        if (spec.target >= 0) require_object(ids, Label(spec.target), "temporal_break");
        if (spec.frame < 0 || spec.frame >= g.frames)
            throw Error(ErrorCode::invalid_argument, "temporal_break frame outside the video");
        const Label offset = Label(labels.label_bound());
        for (std::size_t v = std::size_t(spec.frame) * g.frame_size(); v < out.size(); ++v)
            if (spec.target < 0 ? out[v] != 0 : out[v] == Label(spec.target)) out[v] += offset;
        break;
    }
    }
    return LabelVolume(g, std::move(out));
}

SegmentationPool simulate_pool(const LabelVolume& truth, std::span<const OutputSpec> specs) {
    if (specs.empty()) throw Error(ErrorCode::invalid_argument, "simulate_pool: no outputs requested");
    const VoxelGrid& g = truth.grid();
    std::vector<PooledOutput> outputs;
    for (const auto& spec : specs) {
        LabelVolume cur = truth;
        for (const auto& c : spec.corruptions) cur = apply_corruption(cur, c);
        if (spec.kind == OutputKind::image) {
            const Label bound = Label(cur.label_bound());
            std::vector<Label> per_frame(cur.labels().begin(), cur.labels().end());
            for (std::size_t v = 0; v < per_frame.size(); ++v) per_frame[v] += Label(g.frame_of(v)) * bound;
            cur = LabelVolume(g, std::move(per_frame));
        }
        outputs.push_back({normalize_labels(cur), spec.kind, spec.name});
    }
    return SegmentationPool(std::move(outputs));
}

std::vector<std::string> preset_names() { return {"two-moving-rects"}; }

std::vector<OutputSpec> preset_pool(const std::string& name, std::uint64_t seed) {
    if (name != "two-moving-rects") throw Error(ErrorCode::invalid_argument, "unknown preset '" + name + "'");
    CorruptionSpec split{CorruptionMode::oversplit, 2, {}, -1, 0, 0};
    CorruptionSpec shake{CorruptionMode::boundary_jitter, 1, {}, -1, 0, derive_seed(seed, {1})};
    CorruptionSpec fuse{CorruptionMode::merge, 0, {{1, 2}}, -1, 0, 0};
    return {{"motion", OutputKind::video, {}},
            {"color", OutputKind::image, {split, shake}},
            {"stereo", OutputKind::image, {fuse}}};
}

SceneSpec preset_scene(const std::string& name, std::uint64_t seed, VoxelGrid grid) {
    if (name != "two-moving-rects") throw Error(ErrorCode::invalid_argument, "unknown preset '" + name + "'");
    grid.validate();
    SceneSpec s;
    s.grid = grid;
    s.seed = seed;
    s.background = {{0.25, 0.45, 0.5}, 0.15, 0.0, 0.02};
    const double w = grid.width, h = grid.height, travel = std::max(1, grid.frames - 1);
    ObjectSpec a;
    a.half_width = w / 8;
    a.half_height = h / 6;
    a.x = a.half_width;
    a.y = h / 3;
    a.vx = (w / 2 - 2 * a.half_width) / travel;
    a.color = a.color2 = {0.8, 0.3, 0.6};
    a.depth = 0.6;
    a.noise = 0.02;
    ObjectSpec b = a;
    b.x = w - 1 - b.half_width;
    b.y = 2 * h / 3;
    b.vx = -a.vx;
    b.vy = 0.0;
    b.color = b.color2 = {0.55, 0.7, 0.2};
    b.depth = 0.8;
    s.objects = {a, b};
    return s;
}

namespace {

std::array<double, 3> offset_color(const std::array<double, 3>& base, double magnitude, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<double, 3> d{};
    double n = 0.0;
    for (auto& v : d) {
        v = normal(rng);
        n += v * v;
    }
    n = std::sqrt(n);
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) out[std::size_t(i)] = clamp01(base[std::size_t(i)] + magnitude * d[std::size_t(i)] / n);
    return out;
}

SceneSpec population_scene(int population, const VoxelGrid& grid, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, {0xb0b}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    SceneSpec s;
    s.grid = grid;
    s.seed = derive_seed(seed, {0xc0101});
    s.background.color = {uniform(0.35, 0.65), uniform(0.35, 0.65), uniform(0.35, 0.65)};
    s.background.noise = 0.02;
    const double travel = std::max(1, grid.frames - 1);
    if (population == 0) {
        s.background.depth = uniform(0.3, 0.4);
        s.background.depth_slope = 0.02;
    } else {
        s.background.depth = uniform(0.1, 0.2);
    }
    // Two objects, one in each horizontal half, so they never overlap.
    for (int i = 0; i < 2; ++i) {
        ObjectSpec o;
        o.shape = unit(rng) < 0.5 ? Shape::rectangle : Shape::ellipse;
        o.half_width = uniform(0.14, 0.2) * grid.width;
        o.half_height = uniform(0.25, 0.32) * grid.height;
        o.noise = 0.02;
        const double lane_lo = i == 0 ? 0.0 : grid.width / 2.0, lane_hi = lane_lo + grid.width / 2.0 - 1.0;
        if (population == 0) {
            const double speed = uniform(0.8, 1.2) * (unit(rng) < 0.5 ? -1.0 : 1.0);
            o.vx = speed * std::min(1.0, (lane_hi - lane_lo - 2 * o.half_width) / (std::abs(speed) * travel));
            o.vy = uniform(-0.5, 0.5) * std::min(1.0, (grid.height - 1 - 2 * o.half_height) / travel);
            const double x0 = lane_lo + o.half_width, x1 = lane_hi - o.half_width;
            o.x = o.vx >= 0 ? x0 : x1;
            const double y_lo = o.half_height - std::min(0.0, o.vy * travel);
            const double y_hi = grid.height - 1 - o.half_height - std::max(0.0, o.vy * travel);
            o.y = uniform(y_lo, std::max(y_lo, y_hi));
            o.color = o.color2 = offset_color(s.background.color, uniform(0.3, 0.4), rng);
            o.depth = s.background.depth + uniform(0.0, 0.08);
            o.depth_slope = 0.05;
        } else {
            o.x = uniform(lane_lo + o.half_width, std::max(lane_lo + o.half_width, lane_hi - o.half_width));
            o.y = uniform(o.half_height, grid.height - 1 - o.half_height);
            const double m = uniform(0.3, 0.4);
            // Halves mirrored around the background colour: the mean matches it.
            o.color = offset_color(s.background.color, m, rng);
            for (int c = 0; c < 3; ++c)
                o.color2[std::size_t(c)] = clamp01(2.0 * s.background.color[std::size_t(c)] - o.color[std::size_t(c)]);
            o.depth = uniform(0.6, 0.9);
        }
        s.objects.push_back(o);
    }
    return s;
}

} // namespace

std::vector<OutputSpec> population_pool(int population, std::uint64_t seed) {
    auto cs = [&](CorruptionMode m, int amount, std::uint64_t key) {
        CorruptionSpec c;
        c.mode = m;
        c.amount = amount;
        c.seed = derive_seed(seed, {key});
        return c;
    };
    CorruptionSpec drop_all;
    drop_all.mode = CorruptionMode::drop_object;
    drop_all.target = -1;
    CorruptionSpec merge_one;
    merge_one.mode = CorruptionMode::merge;
    merge_one.pairs = {{0, Label(1 + population)}};

    // The output matching the population's distinguishing cue is exact; the
    // other cue-specific output sees no objects and cuts the frame into bands.
    const auto blind = [&](int pieces, std::uint64_t key) {
        return std::vector<CorruptionSpec>{drop_all, cs(CorruptionMode::oversplit, pieces, key)};
    };
    std::vector<OutputSpec> out(4);
    out[0] = {"motion", OutputKind::video, population == 0 ? std::vector<CorruptionSpec>{} : blind(2, 0)};
    out[1] = {"color", OutputKind::video, {merge_one, cs(CorruptionMode::oversplit, 2, 1)}};
    out[2] = {"stereo", OutputKind::image, population == 1 ? std::vector<CorruptionSpec>{} : blind(3, 2)};
    out[3] = {"superpixel", OutputKind::image, {cs(CorruptionMode::oversplit, 2, 3)}};
    return out;
}

SyntheticVideo make_video(const std::string& id, int population, const SceneSpec& spec,
                          std::span<const OutputSpec> outputs, std::span<const int> annotated_frames) {
    SyntheticVideo v;
    v.id = id;
    v.population = population;
    v.spec = spec;
    v.scene = generate_scene(spec);
    v.pool = simulate_pool(v.scene.labels, outputs);
    v.truth = v.scene.dense_truth().sparse(annotated_frames);
    return v;
}

std::vector<SyntheticVideo> two_population_corpus(const CorpusOptions& options) {
    std::vector<SyntheticVideo> out;
    for (std::size_t i = 0; i < options.videos; ++i) {
        const int population = int(i % 2);
        const auto seed = derive_seed(options.seed, {i});
        const auto spec = population_scene(population, options.grid, seed);
        const auto pool = population_pool(population, seed);
        out.push_back(make_video("video" + std::to_string(i), population, spec, pool, options.annotated_frames));
    }
    return out;
}

} // namespace vseg
