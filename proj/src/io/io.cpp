#include "vseg/io.hpp"

#include <json.hpp>

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::missing_file, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::missing_file, "cannot write " + path.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw Error(ErrorCode::missing_file, "write failed for " + path.string());
}

/// Netpbm-style header tokens: whitespace separated, '#' starts a comment.
class HeaderReader {
public:
    HeaderReader(const std::string& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

    std::string token() {
        skip();
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        if (start == pos_) fail("truncated header");
        return bytes_.substr(start, pos_ - start);
    }

    long integer() {
        const std::string t = token();
        char* end = nullptr;
        const long v = std::strtol(t.c_str(), &end, 10);
        if (*end != '\0' || v <= 0) fail("bad header field '" + t + "'");
        return v;
    }

    /// Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_start() {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            fail("missing separator before raster");
        return pos_ + 1;
    }

    [[noreturn]] void fail(const std::string& why) const {
        throw Error(ErrorCode::malformed_header, path_.string() + ": " + why);
    }

private:
    void skip() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::string& bytes_;
    const fs::path& path_;
    std::size_t pos_ = 0;
};

std::string frame_name(int t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%03d.pgm", t);
    return buf;
}

void check_dims(const fs::path& path, int w, int h, const VoxelGrid& grid) {
    if (w != grid.width || h != grid.height)
        throw Error(ErrorCode::dim_mismatch, path.string() + ": " + std::to_string(w) + "x" + std::to_string(h) +
                                                 " does not match the manifest grid " + to_string(grid));
}

} // namespace

Graymap read_pgm(const fs::path& path) {
    const std::string bytes = read_file(path);
    HeaderReader header(bytes, path);
    if (header.token() != "P5") header.fail("not a binary graymap (P5)");
    Graymap g;
    g.width = int(header.integer());
    g.height = int(header.integer());
    const long maxval = header.integer();
    if (maxval > 65535) header.fail("maxval above 65535");
    const std::size_t start = header.raster_start();
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t n = std::size_t(g.width) * std::size_t(g.height);
    if (bytes.size() - start < n * bps) header.fail("raster shorter than " + std::to_string(n) + " samples");
    g.values.resize(n);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start);
    for (std::size_t i = 0; i < n; ++i) {
        const Label v = bps == 2 ? Label((p[2 * i] << 8) | p[2 * i + 1]) : Label(p[i]);
        if (v > Label(maxval)) header.fail("sample exceeds maxval");
        g.values[i] = v;
    }
    return g;
}

void write_pgm(const fs::path& path, int width, int height, std::span<const Label> values) {
    if (values.size() != std::size_t(width) * std::size_t(height))
        throw Error(ErrorCode::dim_mismatch, path.string() + ": sample count does not match " + std::to_string(width) +
                                                 "x" + std::to_string(height));
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
    const std::size_t header = out.size();
    out.resize(header + 2 * values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] > 65535)
            throw Error(ErrorCode::invalid_argument, path.string() + ": label " + std::to_string(values[i]) +
                                                         " does not fit in 16 bits");
        out[header + 2 * i] = char(values[i] >> 8);
        out[header + 2 * i + 1] = char(values[i] & 0xff);
    }
    write_file(path, out);
}

Floatmap read_pfm(const fs::path& path) {
    const std::string bytes = read_file(path);
    HeaderReader header(bytes, path);
    if (header.token() != "Pf") header.fail("not a single-channel floatmap (Pf)");
    Floatmap f;
    f.width = int(header.integer());
    f.height = int(header.integer());
    const std::string scale_text = header.token();
    char* end = nullptr;
    const double scale = std::strtod(scale_text.c_str(), &end);
    if (*end != '\0' || scale == 0.0) header.fail("bad scale '" + scale_text + "'");
    const bool little = scale < 0.0;
    const std::size_t start = header.raster_start();
    const std::size_t n = std::size_t(f.width) * std::size_t(f.height);
    if (bytes.size() - start < 4 * n) header.fail("raster shorter than " + std::to_string(n) + " samples");
    f.values.resize(n);
    const bool swap = little != (std::endian::native == std::endian::little);
    for (int row = 0; row < f.height; ++row) {
        const int y = f.height - 1 - row;  // stored bottom to top
        for (int x = 0; x < f.width; ++x) {
            unsigned char b[4];
            std::memcpy(b, bytes.data() + start + 4 * (std::size_t(row) * std::size_t(f.width) + std::size_t(x)), 4);
            if (swap) {
                std::swap(b[0], b[3]);
                std::swap(b[1], b[2]);
            }
            float v;
            std::memcpy(&v, b, 4);
            f.values[std::size_t(y) * std::size_t(f.width) + std::size_t(x)] = v;
        }
    }
    return f;
}

void write_pfm(const fs::path& path, int width, int height, std::span<const float> values) {
    if (values.size() != std::size_t(width) * std::size_t(height))
        throw Error(ErrorCode::dim_mismatch, path.string() + ": sample count does not match " + std::to_string(width) +
                                                 "x" + std::to_string(height));
    std::string out = "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
    const std::size_t header = out.size();
    out.resize(header + 4 * values.size());
    const bool swap = std::endian::native != std::endian::little;
    for (int row = 0; row < height; ++row) {
        const int y = height - 1 - row;
        for (int x = 0; x < width; ++x) {
            unsigned char b[4];
            std::memcpy(b, &values[std::size_t(y) * std::size_t(width) + std::size_t(x)], 4);
            if (swap) {
                std::swap(b[0], b[3]);
                std::swap(b[1], b[2]);
            }
            std::memcpy(out.data() + header + 4 * (std::size_t(row) * std::size_t(width) + std::size_t(x)), b, 4);
        }
    }
    write_file(path, out);
}

WorkspaceManifest WorkspaceManifest::load(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::malformed_header, path.string() + ": " + e.what());
    }
    WorkspaceManifest m;
    try {
        m.version = j.at("version").get<int>();
        if (m.version != kManifestVersion)
            throw Error(ErrorCode::version_mismatch, path.string() + ": manifest version " + std::to_string(m.version) +
                                                         " (expected " + std::to_string(kManifestVersion) + ")");
        m.video = j.at("video").get<std::string>();
        const auto& g = j.at("grid");
        m.grid = {g.at("width").get<int>(), g.at("height").get<int>(), g.at("frames").get<int>()};
        for (const auto& o : j.at("outputs"))
            m.outputs.push_back({o.at("name").get<std::string>(), output_kind_from_string(o.at("kind").get<std::string>()),
                                 o.at("frames").get<std::vector<std::string>>()});
        const auto& cues = j.at("cues");
        for (int c = 0; c < kNumCues; ++c)
            m.cue_files.push_back(cues.at(kCueNames[std::size_t(c)]).get<std::vector<std::vector<std::string>>>());
        const auto& gt = j.at("ground_truth");
        m.annotated_frames = gt.at("annotated_frames").get<std::vector<int>>();
        m.truth_files = gt.at("frames").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::malformed_header, path.string() + ": " + e.what());
    }
    try {
        m.grid.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::malformed_header, path.string() + ": " + e.what());
    }
    const auto frames = std::size_t(m.grid.frames);
    for (const auto& o : m.outputs)
        if (o.frames.size() != frames)
            throw Error(ErrorCode::dim_mismatch, path.string() + ": output '" + o.name + "' lists " +
                                                     std::to_string(o.frames.size()) + " frames, grid has " +
                                                     std::to_string(frames));
    for (int c = 0; c < kNumCues; ++c) {
        const auto& files = m.cue_files[std::size_t(c)];
        if (files.size() != std::size_t(kCueChannels[std::size_t(c)]))
            throw Error(ErrorCode::dim_mismatch, path.string() + ": cue '" + kCueNames[std::size_t(c)] + "' needs " +
                                                     std::to_string(kCueChannels[std::size_t(c)]) + " channels");
        for (const auto& ch : files)
            if (ch.size() != frames)
                throw Error(ErrorCode::dim_mismatch,
                            path.string() + ": cue '" + kCueNames[std::size_t(c)] + "' frame count mismatch");
    }
    if (m.truth_files.size() != m.annotated_frames.size())
        throw Error(ErrorCode::dim_mismatch, path.string() + ": ground truth lists " +
                                                 std::to_string(m.truth_files.size()) + " files for " +
                                                 std::to_string(m.annotated_frames.size()) + " annotated frames");
    return m;
}

void WorkspaceManifest::save(const fs::path& path) const {
    json j;
    j["version"] = version;
    j["video"] = video;
    j["grid"] = {{"width", grid.width}, {"height", grid.height}, {"frames", grid.frames}};
    j["outputs"] = json::array();
    for (const auto& o : outputs) j["outputs"].push_back({{"name", o.name}, {"kind", to_string(o.kind)}, {"frames", o.frames}});
    json cues = json::object();
    for (int c = 0; c < kNumCues; ++c) cues[kCueNames[std::size_t(c)]] = cue_files[std::size_t(c)];
    j["cues"] = cues;
    j["ground_truth"] = {{"annotated_frames", annotated_frames}, {"frames", truth_files}};
    write_file(path, j.dump(2) + "\n");
}

Workspace load_workspace(const fs::path& manifest_path) {
    Workspace ws;
    ws.manifest = WorkspaceManifest::load(manifest_path);
    ws.root = manifest_path.parent_path();
    const auto& m = ws.manifest;
    const VoxelGrid& grid = m.grid;
    const std::size_t fs_ = grid.frame_size();

    std::vector<PooledOutput> outputs;
    for (const auto& o : m.outputs) {
        std::vector<Label> labels(grid.voxels());
        Label offset = 0;
        for (int t = 0; t < grid.frames; ++t) {
            const fs::path file = ws.root / o.frames[std::size_t(t)];
            const Graymap g = read_pgm(file);
            check_dims(file, g.width, g.height, grid);
            if (o.kind == OutputKind::image) {
                auto local = normalize_labels(g.values);
                Label top = 0;
                for (auto& v : local) {
                    top = std::max(top, v + 1);
                    v += offset;
                }
                offset += top;
                std::copy(local.begin(), local.end(), labels.begin() + std::ptrdiff_t(std::size_t(t) * fs_));
            } else {
                std::copy(g.values.begin(), g.values.end(), labels.begin() + std::ptrdiff_t(std::size_t(t) * fs_));
            }
        }
        outputs.push_back({normalize_labels(LabelVolume(grid, std::move(labels))), o.kind, o.name});
    }
    ws.pool = SegmentationPool(std::move(outputs));

    ws.cues = CueVolumes(grid);
    for (int c = 0; c < kNumCues; ++c)
        for (int ch = 0; ch < kCueChannels[std::size_t(c)]; ++ch) {
            auto dst = ws.cues.channel(Cue(c), ch);
            for (int t = 0; t < grid.frames; ++t) {
                const fs::path file = ws.root / m.cue_files[std::size_t(c)][std::size_t(ch)][std::size_t(t)];
                const Floatmap f = read_pfm(file);
                check_dims(file, f.width, f.height, grid);
                std::copy(f.values.begin(), f.values.end(), dst.begin() + std::ptrdiff_t(std::size_t(t) * fs_));
            }
        }
    ws.cues.validate();

    ws.truth.grid = grid;
    ws.truth.annotated_frames = m.annotated_frames;
    for (std::size_t i = 0; i < m.truth_files.size(); ++i) {
        const fs::path file = ws.root / m.truth_files[i];
        Graymap g = read_pgm(file);
        check_dims(file, g.width, g.height, grid);
        ws.truth.labels.push_back(std::move(g.values));
    }
    ws.truth.validate();
    return ws;
}

fs::path save_workspace(const fs::path& dir, const std::string& video, const SegmentationPool& pool,
                        const CueVolumes& cues, const GroundTruth& truth) {
    const VoxelGrid& grid = pool.grid();
    if (!(cues.grid() == grid) || !(truth.grid == grid))
        throw Error(ErrorCode::dim_mismatch, "save_workspace: pool, cues and ground truth disagree on the grid");
    WorkspaceManifest m;
    m.video = video;
    m.grid = grid;
    const std::size_t fs_ = grid.frame_size();
    char name[64];
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const auto& out = pool[k];
        OutputEntry e{out.name.empty() ? "output" + std::to_string(k) : out.name, out.kind, {}};
        const LabelVolume labels = out.kind == OutputKind::video ? normalize_labels(out.labels) : out.labels;
        for (int t = 0; t < grid.frames; ++t) {
            std::snprintf(name, sizeof name, "pool/%02zu/frame_%03d.pgm", k, t);
            auto frame = labels.frame(t);
            if (out.kind == OutputKind::image) {
                const auto local = normalize_labels(frame);
                write_pgm(dir / name, grid.width, grid.height, local);
            } else {
                write_pgm(dir / name, grid.width, grid.height, frame);
            }
            e.frames.push_back(name);
        }
        m.outputs.push_back(std::move(e));
    }
    m.cue_files.resize(kNumCues);
    for (int c = 0; c < kNumCues; ++c)
        for (int ch = 0; ch < kCueChannels[std::size_t(c)]; ++ch) {
            std::vector<std::string> files;
            const auto src = cues.channel(Cue(c), ch);
            for (int t = 0; t < grid.frames; ++t) {
                std::snprintf(name, sizeof name, "cues/%s%d/frame_%03d.pfm", kCueNames[std::size_t(c)], ch, t);
                write_pfm(dir / name, grid.width, grid.height, src.subspan(std::size_t(t) * fs_, fs_));
                files.push_back(name);
            }
            m.cue_files[std::size_t(c)].push_back(std::move(files));
        }
    m.annotated_frames = truth.annotated_frames;
    for (std::size_t i = 0; i < truth.annotated_frames.size(); ++i) {
        std::snprintf(name, sizeof name, "truth/frame_%03d.pgm", truth.annotated_frames[i]);
        write_pgm(dir / name, grid.width, grid.height, truth.labels[i]);
        m.truth_files.push_back(name);
    }
    const fs::path manifest = dir / "manifest.json";
    m.save(manifest);
    return manifest;
}

void write_label_frames(const fs::path& dir, const LabelVolume& labels) {
    const VoxelGrid& g = labels.grid();
    for (int t = 0; t < g.frames; ++t) write_pgm(dir / frame_name(t), g.width, g.height, labels.frame(t));
}

LabelVolume read_label_frames(const fs::path& dir, const VoxelGrid& grid) {
    std::vector<std::string> missing;
    for (int t = 0; t < grid.frames; ++t)
        if (!fs::exists(dir / frame_name(t))) missing.push_back(frame_name(t));
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw Error(ErrorCode::missing_file, dir.string() + ": missing predicted frames: " + list);
    }
    std::vector<Label> labels(grid.voxels());
    for (int t = 0; t < grid.frames; ++t) {
        const fs::path file = dir / frame_name(t);
        const Graymap g = read_pgm(file);
        check_dims(file, g.width, g.height, grid);
        std::copy(g.values.begin(), g.values.end(), labels.begin() + std::ptrdiff_t(std::size_t(t) * grid.frame_size()));
    }
    return LabelVolume(grid, std::move(labels));
}

std::vector<fs::path> load_corpus_list(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::malformed_header, path.string() + ": " + e.what());
    }
    std::vector<fs::path> out;
    try {
        for (const auto& m : j.at("manifests")) out.push_back(path.parent_path() / m.get<std::string>());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::malformed_header, path.string() + ": " + e.what());
    }
    if (out.empty()) throw Error(ErrorCode::invalid_argument, path.string() + ": corpus lists no manifests");
    return out;
}

void save_corpus_list(const fs::path& path, std::span<const fs::path> manifests) {
    json j;
    j["manifests"] = json::array();
    for (const auto& m : manifests) j["manifests"].push_back(fs::relative(m, path.parent_path()).generic_string());
    write_file(path, j.dump(2) + "\n");
}

} // namespace vseg
