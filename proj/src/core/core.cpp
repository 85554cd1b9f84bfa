#include "vseg/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace vseg {

void VoxelGrid::validate() const {
    if (!valid()) throw Error(ErrorCode::invalid_argument, "invalid voxel grid " + to_string(*this));
}

std::string to_string(const VoxelGrid& grid) {
    std::ostringstream os;
    os << grid.width << "x" << grid.height << "x" << grid.frames;
    return os.str();
}

LabelVolume::LabelVolume(VoxelGrid grid, std::vector<Label> labels) : grid_(grid), labels_(std::move(labels)) {
    grid_.validate();
    if (labels_.size() != grid_.voxels())
        throw Error(ErrorCode::dim_mismatch, "label volume has " + std::to_string(labels_.size()) +
                                                 " labels for grid " + to_string(grid_));
}

std::size_t LabelVolume::label_bound() const {
    if (labels_.empty()) return 0;
    return std::size_t(*std::max_element(labels_.begin(), labels_.end())) + 1;
}

std::vector<Label> normalize_labels(std::span<const Label> labels) {
    std::unordered_map<Label, Label> recode;
    std::vector<Label> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = recode.try_emplace(labels[i], Label(recode.size()));
        out[i] = it->second;
    }
    return out;
}

LabelVolume normalize_labels(const LabelVolume& volume) {
    return LabelVolume(volume.grid(), normalize_labels(volume.labels()));
}

CueVolumes::CueVolumes(VoxelGrid grid) : grid_(grid) {
    grid_.validate();
    for (auto& ch : channels_) ch.assign(grid_.voxels(), 0.0f);
}

std::size_t CueVolumes::slot(Cue cue, int ch) {
    static constexpr std::array<std::size_t, kNumCues> offset = {0, 3, 5};
    const auto c = std::size_t(cue);
    if (ch < 0 || ch >= kCueChannels[c]) throw Error(ErrorCode::invalid_argument, "cue channel out of range");
    return offset[c] + std::size_t(ch);
}

void CueVolumes::validate() const {
    grid_.validate();
    for (const auto& ch : channels_) {
        if (ch.size() != grid_.voxels()) throw Error(ErrorCode::dim_mismatch, "cue channel size mismatch");
        for (float v : ch)
            if (!std::isfinite(v)) throw Error(ErrorCode::numerical, "non-finite cue value");
    }
}

CueVolumes CueVolumes::frames(int first, int last) const {
    if (first < 0 || last >= grid_.frames || first > last)
        throw Error(ErrorCode::invalid_argument, "frame range out of bounds");
    CueVolumes out(VoxelGrid{grid_.width, grid_.height, last - first + 1});
    const std::size_t fs = grid_.frame_size();
    for (std::size_t s = 0; s < channels_.size(); ++s)
        std::copy(channels_[s].begin() + std::ptrdiff_t(std::size_t(first) * fs),
                  channels_[s].begin() + std::ptrdiff_t(std::size_t(last + 1) * fs), out.channels_[s].begin());
    return out;
}

const char* to_string(OutputKind kind) { return kind == OutputKind::image ? "image" : "video"; }

OutputKind output_kind_from_string(const std::string& text) {
    if (text == "image") return OutputKind::image;
    if (text == "video") return OutputKind::video;
    throw Error(ErrorCode::invalid_argument, "unknown output kind '" + text + "'");
}

bool is_frame_local(const LabelVolume& volume) {
    std::unordered_map<Label, int> frame_of;
    const auto& g = volume.grid();
    for (int t = 0; t < g.frames; ++t)
        for (Label l : volume.frame(t)) {
            auto [it, inserted] = frame_of.try_emplace(l, t);
            if (it->second != t) return false;
        }
    return true;
}

SegmentationPool::SegmentationPool(std::vector<PooledOutput> outputs) : outputs_(std::move(outputs)) {
    if (outputs_.empty()) throw Error(ErrorCode::invalid_argument, "segmentation pool needs at least one output");
    const VoxelGrid grid = outputs_.front().labels.grid();
    for (const auto& out : outputs_) {
        if (!(out.labels.grid() == grid))
            throw Error(ErrorCode::dim_mismatch, "pooled output '" + out.name + "' has grid " +
                                                     to_string(out.labels.grid()) + ", expected " + to_string(grid));
        if (out.kind == OutputKind::image && !is_frame_local(out.labels))
            throw Error(ErrorCode::invalid_argument,
                        "image-level output '" + out.name + "' has a segment spanning two frames");
    }
}

SegmentationPool SegmentationPool::frames(int first, int last) const {
    const auto& g = grid();
    if (first < 0 || last >= g.frames || first > last)
        throw Error(ErrorCode::invalid_argument, "frame range out of bounds");
    std::vector<PooledOutput> outs;
    for (const auto& out : outputs_) {
        auto all = out.labels.labels();
        std::vector<Label> sub(all.begin() + std::ptrdiff_t(std::size_t(first) * g.frame_size()),
                               all.begin() + std::ptrdiff_t(std::size_t(last + 1) * g.frame_size()));
        outs.push_back({normalize_labels(LabelVolume({g.width, g.height, last - first + 1}, std::move(sub))),
                        out.kind, out.name});
    }
    return SegmentationPool(std::move(outs));
}

std::vector<double> CombinationParams::flat() const {
    std::vector<double> theta(alpha);
    theta.insert(theta.end(), beta.begin(), beta.end());
    return theta;
}

CombinationParams CombinationParams::from_flat(std::span<const double> theta, std::size_t num_alpha) {
    if (num_alpha > theta.size()) throw Error(ErrorCode::invalid_argument, "parameter vector too short");
    CombinationParams p;
    p.alpha.assign(theta.begin(), theta.begin() + std::ptrdiff_t(num_alpha));
    p.beta.assign(theta.begin() + std::ptrdiff_t(num_alpha), theta.end());
    return p;
}

void CombinationParams::validate() const {
    if (alpha.empty()) throw Error(ErrorCode::invalid_argument, "no alpha parameters");
    for (double v : flat())
        if (!std::isfinite(v) || v < kParamFloor * (1.0 - 1e-12))
            throw Error(ErrorCode::invalid_argument, "combination parameter out of range: " + to_string(*this));
}

CombinationParams CombinationParams::clamped(double lo, double hi) const {
    CombinationParams p = *this;
    for (auto* v : {&p.alpha, &p.beta})
        for (double& x : *v) x = std::isfinite(x) ? std::clamp(x, lo, hi) : lo;
    return p;
}

CombinationParams CombinationParams::uniform(std::size_t num_alpha, std::size_t num_beta) {
    CombinationParams p;
    p.alpha.assign(num_alpha, 1.0 / double(num_alpha));
    p.beta.assign(num_beta, 1.0 / double(num_beta));
    return p;
}

std::string to_string(const CombinationParams& params) {
    std::ostringstream os;
    os.precision(6);
    os << "alpha=(";
    for (std::size_t i = 0; i < params.alpha.size(); ++i) os << (i ? "," : "") << params.alpha[i];
    os << ") beta=(";
    for (std::size_t i = 0; i < params.beta.size(); ++i) os << (i ? "," : "") << params.beta[i];
    os << ")";
    return os.str();
}

void GroundTruth::validate() const {
    grid.validate();
    if (annotated_frames.size() != labels.size())
        throw Error(ErrorCode::dim_mismatch, "ground truth: annotated frame count does not match label maps");
    for (std::size_t i = 0; i < annotated_frames.size(); ++i) {
        if (annotated_frames[i] < 0 || annotated_frames[i] >= grid.frames)
            throw Error(ErrorCode::invalid_argument, "ground truth: annotated frame out of range");
        if (i > 0 && annotated_frames[i] <= annotated_frames[i - 1])
            throw Error(ErrorCode::invalid_argument, "ground truth: annotated frames must be strictly increasing");
        if (labels[i].size() != grid.frame_size())
            throw Error(ErrorCode::dim_mismatch, "ground truth: label map of frame " +
                                                     std::to_string(annotated_frames[i]) + " has wrong size");
    }
    if (!links.empty()) {
        if (links.size() != grid.voxels()) throw Error(ErrorCode::dim_mismatch, "ground truth: link table size");
        for (auto l : links)
            if (l >= 0 && !is_annotated(grid.frame_of(std::size_t(l))))
                throw Error(ErrorCode::invalid_argument, "ground truth: link to an unannotated frame");
    }
}

bool GroundTruth::is_annotated(int frame) const { return annotated_slot(frame) >= 0; }

int GroundTruth::annotated_slot(int frame) const {
    auto it = std::lower_bound(annotated_frames.begin(), annotated_frames.end(), frame);
    if (it == annotated_frames.end() || *it != frame) return -1;
    return int(it - annotated_frames.begin());
}

GroundTruth GroundTruth::dense(const LabelVolume& volume) {
    GroundTruth gt;
    gt.grid = volume.grid();
    for (int t = 0; t < gt.grid.frames; ++t) {
        gt.annotated_frames.push_back(t);
        auto f = volume.frame(t);
        gt.labels.emplace_back(f.begin(), f.end());
    }
    return gt;
}

GroundTruth GroundTruth::sparse(std::span<const int> frames) const {
    GroundTruth gt;
    gt.grid = grid;
    for (int f : frames) {
        int slot = annotated_slot(f);
        if (slot < 0) throw Error(ErrorCode::invalid_argument, "frame " + std::to_string(f) + " is not annotated");
        gt.annotated_frames.push_back(f);
        gt.labels.push_back(labels[std::size_t(slot)]);
    }
    gt.validate();
    return gt;
}

GroundTruth GroundTruth::frames(int first, int last) const {
    if (first < 0 || last >= grid.frames || first > last)
        throw Error(ErrorCode::invalid_argument, "frame range out of bounds");
    GroundTruth gt;
    gt.grid = {grid.width, grid.height, last - first + 1};
    for (std::size_t i = 0; i < annotated_frames.size(); ++i)
        if (annotated_frames[i] >= first && annotated_frames[i] <= last) {
            gt.annotated_frames.push_back(annotated_frames[i] - first);
            gt.labels.push_back(labels[i]);
        }
    if (!links.empty()) {
        const auto fs = std::int64_t(grid.frame_size());
        const auto lo = std::int64_t(first) * fs, hi = std::int64_t(last + 1) * fs;
        gt.links.assign(gt.grid.voxels(), -1);
        for (std::size_t v = 0; v < gt.links.size(); ++v) {
            auto l = links[std::size_t(lo) + v];
            if (l >= lo && l < hi) gt.links[v] = l - lo;
        }
    }
    return gt;
}

std::size_t GroundTruth::num_labels() const {
    std::unordered_set<Label> seen;
    for (const auto& m : labels) seen.insert(m.begin(), m.end());
    return seen.size();
}

} // namespace vseg
