#include "vseg/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace vseg {

namespace {

bool follow_flow(const CueVolumes& cues, int t, int target, double& px, double& py) {
    const VoxelGrid& g = cues.grid();
    auto inside = [&](long x, long y) { return x >= 0 && y >= 0 && x < g.width && y < g.height; };
    auto flow_at = [&](int frame, double x, double y, double& u, double& v) {
        const long xi = std::lround(x), yi = std::lround(y);
        if (!inside(xi, yi)) return false;
        const auto idx = g.index(int(xi), int(yi), frame);
        u = cues.value(Cue::flow, 0, idx);
        v = cues.value(Cue::flow, 1, idx);
        return true;
    };
    double u = 0.0, v = 0.0;
    if (target > t) {
        for (int s = t; s < target; ++s) {
            if (!flow_at(s, px, py, u, v)) return false;
            px += u;
            py += v;
        }
    } else {
        for (int s = t; s > target; --s) {
            if (!flow_at(s - 1, px, py, u, v)) return false;
            px -= u;
            py -= v;
        }
    }
    return inside(std::lround(px), std::lround(py));
}

} // namespace

void link_by_flow(GroundTruth& gt, const CueVolumes& cues) {
    if (!(cues.grid() == gt.grid)) throw Error(ErrorCode::dim_mismatch, "link_by_flow: grid mismatch");
    if (gt.annotated_frames.empty()) throw Error(ErrorCode::invalid_argument, "link_by_flow: no annotated frames");
    const VoxelGrid& g = gt.grid;
    gt.links.assign(g.voxels(), -1);
    for (int t = 0; t < g.frames; ++t) {
        if (gt.is_annotated(t)) continue;
        std::vector<int> targets(gt.annotated_frames);
        std::stable_sort(targets.begin(), targets.end(),
                         [t](int a, int b) { return std::abs(a - t) < std::abs(b - t); });
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x)
                for (int target : targets) {
                    double px = x, py = y;
                    if (!follow_flow(cues, t, target, px, py)) continue;
                    gt.links[g.index(x, y, t)] =
                        std::int64_t(g.index(int(std::lround(px)), int(std::lround(py)), target));
                    break;
                }
    }
}

std::size_t GtIndicator::labelled() const {
    return std::size_t(std::count_if(node_labels.begin(), node_labels.end(), [](int l) { return l >= 0; }));
}

GtIndicator gt_indicators(const MinOverlapSuperpixels& sp, const GroundTruth& gt, const GraphStructure* structure) {
    if (!(sp.grid == gt.grid)) throw Error(ErrorCode::dim_mismatch, "gt_indicators: grid mismatch");
    const VoxelGrid& g = gt.grid;
    const std::size_t fs = g.frame_size();

    std::vector<std::pair<std::uint32_t, Label>> direct, linked;
    for (std::size_t i = 0; i < gt.annotated_frames.size(); ++i) {
        const std::size_t base = std::size_t(gt.annotated_frames[i]) * fs;
        for (std::size_t p = 0; p < fs; ++p) direct.emplace_back(sp.assignment[base + p], gt.labels[i][p]);
    }
    if (!gt.links.empty())
        for (std::size_t v = 0; v < g.voxels(); ++v) {
            const auto l = gt.links[v];
            if (l < 0) continue;
            const int slot = gt.annotated_slot(g.frame_of(std::size_t(l)));
            linked.emplace_back(sp.assignment[v], gt.labels[std::size_t(slot)][std::size_t(l) % fs]);
        }

    // Majority vote per node; ties go to the smaller label.
    auto vote = [&](std::vector<std::pair<std::uint32_t, Label>>& pairs, std::vector<std::int64_t>& out) {
        std::sort(pairs.begin(), pairs.end());
        std::vector<std::size_t> best_count(out.size(), 0);
        for (std::size_t i = 0; i < pairs.size();) {
            std::size_t j = i;
            while (j < pairs.size() && pairs[j] == pairs[i]) ++j;
            const auto node = pairs[i].first;
            if (j - i > best_count[node]) {
                best_count[node] = j - i;
                out[node] = pairs[i].second;
            }
            i = j;
        }
    };
    std::vector<std::int64_t> raw(sp.count(), -1), via_links(sp.count(), -1);
    vote(direct, raw);
    vote(linked, via_links);
    for (std::size_t I = 0; I < raw.size(); ++I)
        if (raw[I] < 0) raw[I] = via_links[I];

    std::size_t total = sp.count() + (structure ? structure->num_grouping : 0);
    std::vector<std::int64_t> all(total, -1);
    std::copy(raw.begin(), raw.end(), all.begin());
    if (structure) {
        if (structure->num_super != sp.count()) throw Error(ErrorCode::invalid_argument, "structure/superpixel mismatch");
        std::vector<std::map<std::int64_t, double>> mass(structure->num_grouping);
        for (std::size_t I = 0; I < sp.count(); ++I) {
            if (raw[I] < 0) continue;
            for (std::size_t k = 0; k < structure->num_outputs; ++k) {
                const auto node = structure->membership[I * structure->num_outputs + k] - structure->num_super;
                mass[node][raw[I]] += structure->super_sizes[I];
            }
        }
        for (std::size_t gidx = 0; gidx < mass.size(); ++gidx) {
            double best = 0.0;
            for (const auto& [label, m] : mass[gidx])
                if (m > best) {
                    best = m;
                    all[sp.count() + gidx] = label;
                }
        }
    }

    GtIndicator ind;
    ind.node_labels.assign(total, -1);
    std::map<std::int64_t, int> dense;
    for (std::size_t i = 0; i < total; ++i) {
        if (all[i] < 0) continue;
        auto [it, inserted] = dense.try_emplace(all[i], int(dense.size()));
        ind.node_labels[i] = it->second;
    }
    ind.clusters = dense.size();
    if (ind.clusters == 0) throw Error(ErrorCode::invalid_argument, "gt_indicators: no super-node carries an annotation");
    return ind;
}

} // namespace vseg
