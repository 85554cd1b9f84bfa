#include "vseg/graph.hpp"

#include "vseg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vseg {

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t(0)); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    // The smaller root wins so representatives are scan-order minima.
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b)
            parent_[b] = a;
        else
            parent_[a] = b;
    }

private:
    std::vector<std::size_t> parent_;
};

bool same_tuple(const SegmentationPool& pool, std::size_t a, std::size_t b) {
    for (const auto& out : pool.outputs())
        if (out.labels[a] != out.labels[b]) return false;
    return true;
}

double median(std::vector<double> values) {
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + std::ptrdiff_t(mid), values.end());
    double m = values[mid];
    if (values.size() % 2 == 0) {
        std::nth_element(values.begin(), values.begin() + std::ptrdiff_t(mid - 1), values.end());
        m = 0.5 * (m + values[mid - 1]);
    }
    return m;
}

constexpr std::array<int, kNumCues> kCueOffset = {0, 3, 5};

} // namespace

MinOverlapSuperpixels compute_min_overlap_superpixels(const SegmentationPool& pool) {
    const VoxelGrid g = pool.grid();
    const std::size_t fs = g.frame_size();
    std::vector<std::uint32_t> local(g.voxels());

    // In-frame components, one frame per task; ids are frame-local scan-order roots.
    parallel_for(std::size_t(g.frames), [&](std::size_t t) {
        DisjointSets sets(fs);
        const std::size_t base = t * fs;
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) {
                const std::size_t p = std::size_t(y) * std::size_t(g.width) + std::size_t(x);
                if (x + 1 < g.width && same_tuple(pool, base + p, base + p + 1)) sets.unite(p, p + 1);
                if (y + 1 < g.height && same_tuple(pool, base + p, base + p + std::size_t(g.width)))
                    sets.unite(p, p + std::size_t(g.width));
            }
        for (std::size_t p = 0; p < fs; ++p) local[base + p] = std::uint32_t(sets.find(p));
    });

    // Temporal unions on top of the frame components.
    DisjointSets sets(g.voxels());
    for (std::size_t v = 0; v < g.voxels(); ++v) {
        const std::size_t root = (v / fs) * fs + local[v];
        sets.unite(v, root);
    }
    for (int t = 0; t + 1 < g.frames; ++t)
        for (std::size_t p = 0; p < fs; ++p) {
            const std::size_t a = std::size_t(t) * fs + p, b = a + fs;
            if (same_tuple(pool, a, b)) sets.unite(a, b);
        }

    MinOverlapSuperpixels sp;
    sp.grid = g;
    sp.assignment.assign(g.voxels(), 0);
    std::vector<std::uint32_t> id_of_root(g.voxels(), std::uint32_t(-1));
    for (std::size_t v = 0; v < g.voxels(); ++v) {
        const std::size_t r = sets.find(v);
        if (id_of_root[r] == std::uint32_t(-1)) {
            id_of_root[r] = std::uint32_t(sp.sizes.size());
            sp.sizes.push_back(0);
            sp.first_voxel.push_back(v);
        }
        sp.assignment[v] = id_of_root[r];
        ++sp.sizes[id_of_root[r]];
    }
    return sp;
}

std::vector<GroupingNode> grouping_nodes(const SegmentationPool& pool, const CueVolumes& cues) {
    const VoxelGrid g = pool.grid();
    if (!(cues.grid() == g))
        throw Error(ErrorCode::dim_mismatch, "cue grid " + to_string(cues.grid()) + " does not match pool grid " +
                                                 to_string(g));
    std::vector<GroupingNode> nodes;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const auto& out = pool[k];
        const std::size_t offset = nodes.size();
        const std::size_t count = out.labels.label_bound();
        nodes.resize(offset + count);
        std::vector<std::array<double, 6>> sums(count, std::array<double, 6>{});
        for (std::size_t v = 0; v < g.voxels(); ++v) {
            const Label l = out.labels[v];
            auto& node = nodes[offset + l];
            ++node.size;
            for (int c = 0; c < kNumCues; ++c)
                for (int ch = 0; ch < kCueChannels[std::size_t(c)]; ++ch)
                    sums[l][std::size_t(kCueOffset[std::size_t(c)] + ch)] += cues.value(Cue(c), ch, v);
        }
        for (std::size_t l = 0; l < count; ++l) {
            auto& node = nodes[offset + l];
            node.pool_index = std::uint32_t(k);
            node.segment_id = Label(l);
            if (node.size == 0)
                throw Error(ErrorCode::invalid_argument, "pooled output '" + out.name + "' has empty segment " +
                                                             std::to_string(l));
            for (std::size_t j = 0; j < 6; ++j) node.mean_features[j] = sums[l][j] / double(node.size);
        }

        std::vector<std::pair<Label, Label>> pairs;
        auto visit = [&](std::size_t a, std::size_t b) {
            Label la = out.labels[a], lb = out.labels[b];
            if (la == lb) return;
            pairs.emplace_back(std::min(la, lb), std::max(la, lb));
        };
        for (int t = 0; t < g.frames; ++t)
            for (int y = 0; y < g.height; ++y)
                for (int x = 0; x < g.width; ++x) {
                    const std::size_t v = g.index(x, y, t);
                    if (x + 1 < g.width) visit(v, v + 1);
                    if (y + 1 < g.height) visit(v, v + std::size_t(g.width));
                    if (out.kind == OutputKind::video && t + 1 < g.frames) visit(v, v + g.frame_size());
                }
        std::sort(pairs.begin(), pairs.end());
        pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
        for (auto [a, b] : pairs) {
            nodes[offset + a].neighbors.push_back(std::uint32_t(offset + b));
            nodes[offset + b].neighbors.push_back(std::uint32_t(offset + a));
        }
    }
    for (auto& n : nodes) std::sort(n.neighbors.begin(), n.neighbors.end());
    return nodes;
}

double raw_cue_distance(const CueMeans& a, const CueMeans& b, int cue) {
    if (cue < 0 || cue >= kNumCues) throw Error(ErrorCode::invalid_argument, "cue index out of range");
    double s = 0.0;
    const int off = kCueOffset[std::size_t(cue)];
    for (int ch = 0; ch < kCueChannels[std::size_t(cue)]; ++ch) {
        const double d = a[std::size_t(off + ch)] - b[std::size_t(off + ch)];
        s += d * d;
    }
    return std::sqrt(s);
}

double cue_distance(const GroupingNode& a, const GroupingNode& b, int cue, const CueScales& scales) {
    if (cue < 0 || cue >= kNumCues) throw Error(ErrorCode::invalid_argument, "cue index out of range");
    return raw_cue_distance(a.mean_features, b.mean_features, cue) / scales.sigma[std::size_t(cue)];
}

double beta_edge_weight(const std::array<double, kNumCues>& distances, std::span<const double> beta) {
    double e = 0.0;
    for (int c = 0; c < kNumCues; ++c) e += beta[std::size_t(c)] * distances[std::size_t(c)];
    return std::exp(-e);
}

double beta_edge_weight(const GroupingNode& a, const GroupingNode& b, const CombinationParams& params,
                        const CueScales& scales) {
    if (params.beta.size() != std::size_t(kNumCues))
        throw Error(ErrorCode::invalid_argument, "expected one beta per cue");
    std::array<double, kNumCues> d{};
    for (int c = 0; c < kNumCues; ++c) d[std::size_t(c)] = cue_distance(a, b, c, scales);
    return beta_edge_weight(d, params.beta);
}

CueScales estimate_cue_scales(std::span<const std::vector<GroupingNode>> node_sets) {
    std::array<std::vector<double>, kNumCues> dists;
    for (const auto& nodes : node_sets)
        for (std::size_t i = 0; i < nodes.size(); ++i)
            for (auto j : nodes[i].neighbors) {
                if (j <= i) continue;
                for (int c = 0; c < kNumCues; ++c) {
                    const double d = raw_cue_distance(nodes[i].mean_features, nodes[j].mean_features, c);
                    if (d > 0.0) dists[std::size_t(c)].push_back(d);
                }
            }
    CueScales scales;
    for (int c = 0; c < kNumCues; ++c)
        if (!dists[std::size_t(c)].empty()) scales.sigma[std::size_t(c)] = median(std::move(dists[std::size_t(c)]));
    return scales;
}

GraphStructure build_graph_structure(const MinOverlapSuperpixels& sp, const SegmentationPool& pool,
                                     const std::vector<GroupingNode>& nodes, const CueScales& scales) {
    if (!(sp.grid == pool.grid())) throw Error(ErrorCode::dim_mismatch, "superpixels and pool grids differ");
    GraphStructure s;
    s.num_outputs = pool.size();
    s.num_super = sp.count();
    s.num_grouping = nodes.size();
    s.super_sizes.assign(sp.sizes.begin(), sp.sizes.end());

    std::vector<std::size_t> offset(pool.size() + 1, 0);
    for (const auto& n : nodes) ++offset[n.pool_index + 1];
    std::partial_sum(offset.begin(), offset.end(), offset.begin());

    s.membership.resize(s.num_super * s.num_outputs);
    for (std::size_t I = 0; I < s.num_super; ++I)
        for (std::size_t k = 0; k < s.num_outputs; ++k) {
            const Label l = pool[k].labels[sp.first_voxel[I]];
            s.membership[I * s.num_outputs + k] = std::uint32_t(s.num_super + offset[k] + l);
        }
    s.grouping_output.reserve(nodes.size());
    for (const auto& n : nodes) s.grouping_output.push_back(n.pool_index);

    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (auto j : nodes[i].neighbors) {
            if (j <= i) continue;
            GraphStructure::BetaEdge e;
            e.a = std::uint32_t(s.num_super + i);
            e.b = std::uint32_t(s.num_super + j);
            e.output = nodes[i].pool_index;
            for (int c = 0; c < kNumCues; ++c) e.distance[std::size_t(c)] = cue_distance(nodes[i], nodes[j], c, scales);
            s.beta_edges.push_back(e);
        }
    return s;
}

void AffinityGraph::multiply(std::span<const double> x, std::span<double> y) const {
    std::fill(y.begin(), y.end(), 0.0);
    for (const auto& e : edges) {
        y[e.u] += e.w * x[e.v];
        y[e.v] += e.w * x[e.u];
    }
}

void AffinityGraph::recompute_volumes() {
    volume.assign(n, 0.0);
    for (const auto& e : edges) {
        volume[e.u] += e.w;
        volume[e.v] += e.w;
    }
}

ReducedGraph::ReducedGraph(std::shared_ptr<const GraphStructure> structure, CombinationParams params)
    : structure_(std::move(structure)), params_(std::move(params)) {
    const auto& s = *structure_;
    if (params_.alpha.size() != s.num_outputs)
        throw Error(ErrorCode::invalid_argument, "expected " + std::to_string(s.num_outputs) + " alpha parameters, got " +
                                                     std::to_string(params_.alpha.size()));
    if (params_.beta.size() != std::size_t(kNumCues))
        throw Error(ErrorCode::invalid_argument, "expected one beta per cue");
    params_.validate();

    affinity_.n = s.num_nodes();
    affinity_.edges.reserve(s.num_super * s.num_outputs + s.beta_edges.size());
    alpha_edge_begin_.resize(s.num_super);
    for (std::size_t I = 0; I < s.num_super; ++I) {
        alpha_edge_begin_[I] = affinity_.edges.size();
        for (std::size_t k = 0; k < s.num_outputs; ++k)
            affinity_.edges.push_back({std::uint32_t(I), s.membership[I * s.num_outputs + k],
                                       s.super_sizes[I] * params_.alpha[k]});
    }
    beta_edge_begin_ = affinity_.edges.size();
    for (const auto& e : s.beta_edges) affinity_.edges.push_back({e.a, e.b, beta_edge_weight(e.distance, params_.beta)});
    finish();
}

void ReducedGraph::finish() {
    affinity_.recompute_volumes();
    const std::size_t n = affinity_.n;
    self_.assign(n, 0.0);
    degree_.assign(n, 0.0);
    warnings_.clear();
    for (std::size_t I = 0; I < n; ++I) {
        // No voxel-voxel edges exist, so the within-I term of the self-edge vanishes.
        const double size = node_size(I);
        const double outside = affinity_.volume[I];
        self_[I] = -((size - 1.0) / size) * outside;
        degree_[I] = outside + self_[I];
        if (!(outside > 0.0)) warnings_.push_back("node " + std::to_string(I) + " has no incident edge weight");
    }
}

std::vector<WeightedEdge> ReducedGraph::weight_derivative(std::size_t theta) const {
    const auto& s = *structure_;
    std::vector<WeightedEdge> d;
    if (theta < s.num_outputs) {
        d.reserve(s.num_super);
        for (std::size_t I = 0; I < s.num_super; ++I) {
            const auto& e = affinity_.edges[alpha_edge_begin_[I] + theta];
            d.push_back({e.u, e.v, e.w / params_.alpha[theta]});
        }
    } else if (theta < s.num_outputs + std::size_t(kNumCues)) {
        const std::size_t c = theta - s.num_outputs;
        d.reserve(s.beta_edges.size());
        for (std::size_t i = 0; i < s.beta_edges.size(); ++i) {
            const auto& e = affinity_.edges[beta_edge_begin_ + i];
            d.push_back({e.u, e.v, -s.beta_edges[i].distance[c] * e.w});
        }
    } else {
        throw Error(ErrorCode::invalid_argument, "parameter index out of range");
    }
    return d;
}

ReducedGraph ReducedGraph::scaled(double c) const {
    ReducedGraph out = *this;
    for (auto& e : out.affinity_.edges) e.w *= c;
    out.finish();
    return out;
}

ReducedGraph build_reduced_graph(const MinOverlapSuperpixels& sp, const SegmentationPool& pool,
                                 const CueVolumes& cues, const CombinationParams& params, const CueScales& scales) {
    const auto nodes = grouping_nodes(pool, cues);
    auto structure = std::make_shared<const GraphStructure>(build_graph_structure(sp, pool, nodes, scales));
    return ReducedGraph(std::move(structure), params);
}

} // namespace vseg
