#include "vseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

namespace vseg {

double f_measure(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

const char* to_string(MetricKind kind) {
    switch (kind) {
    case MetricKind::bpr: return "bpr";
    case MetricKind::vpr: return "vpr";
    case MetricKind::am: return "am";
    case MetricKind::hm: return "hm";
    }
    return "?";
}

MetricKind metric_kind_from_string(const std::string& text) {
    if (text == "bpr") return MetricKind::bpr;
    if (text == "vpr") return MetricKind::vpr;
    if (text == "am") return MetricKind::am;
    if (text == "hm") return MetricKind::hm;
    throw Error(ErrorCode::invalid_argument, "unknown metric '" + text + "' (expected bpr, vpr, am or hm)");
}

double MetricReport::score(MetricKind kind) const {
    switch (kind) {
    case MetricKind::bpr: return bpr.f;
    case MetricKind::vpr: return vpr.f;
    case MetricKind::am: return am_bvpr;
    case MetricKind::hm: return hm_bvpr;
    }
    return 0.0;
}

Fusion fuse(double bpr_f, double vpr_f) {
    Fusion out;
    out.am = 0.5 * (bpr_f + vpr_f);
    out.hm = f_measure(bpr_f, vpr_f);
    return out;
}

std::vector<bool> boundary_map(std::span<const Label> labels, int width, int height) {
    if (labels.size() != std::size_t(width) * std::size_t(height))
        throw Error(ErrorCode::dim_mismatch, "boundary_map: label map size mismatch");
    std::vector<bool> b(labels.size(), false);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const std::size_t i = std::size_t(y) * std::size_t(width) + std::size_t(x);
            if (x + 1 < width && labels[i] != labels[i + 1]) b[i] = b[i + 1] = true;
            if (y + 1 < height && labels[i] != labels[i + std::size_t(width)]) b[i] = b[i + std::size_t(width)] = true;
        }
    return b;
}

namespace {

struct Candidate {
    long d2;
    std::uint32_t p, q;
};

// Maximum bipartite matching (Hopcroft-Karp) on the candidate graph.
std::size_t max_matching(std::size_t np, std::size_t nq, const std::vector<std::vector<std::uint32_t>>& adj) {
    constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> match_p(np, kNone), match_q(nq, kNone), dist(np);
    std::size_t matching = 0;
    auto bfs = [&] {
        std::queue<std::uint32_t> queue;
        bool found = false;
        for (std::uint32_t p = 0; p < np; ++p) {
            if (match_p[p] == kNone) {
                dist[p] = 0;
                queue.push(p);
            } else {
                dist[p] = kNone;
            }
        }
        while (!queue.empty()) {
            auto p = queue.front();
            queue.pop();
            for (auto q : adj[p]) {
                auto p2 = match_q[q];
                if (p2 == kNone) {
                    found = true;
                } else if (dist[p2] == kNone) {
                    dist[p2] = dist[p] + 1;
                    queue.push(p2);
                }
            }
        }
        return found;
    };
    std::vector<std::size_t> it(np);
    auto dfs = [&](auto&& self, std::uint32_t p) -> bool {
        for (; it[p] < adj[p].size(); ++it[p]) {
            auto q = adj[p][it[p]];
            auto p2 = match_q[q];
            if (p2 == kNone || (dist[p2] == dist[p] + 1 && self(self, p2))) {
                match_p[p] = q;
                match_q[q] = p;
                return true;
            }
        }
        dist[p] = kNone;
        return false;
    };
    while (bfs()) {
        std::fill(it.begin(), it.end(), 0);
        for (std::uint32_t p = 0; p < np; ++p)
            if (match_p[p] == kNone && dfs(dfs, p)) ++matching;
    }
    return matching;
}

} // namespace

std::size_t match_boundaries(const std::vector<bool>& predicted, const std::vector<bool>& ground_truth, int width,
                             int height, double radius, bool exact) {
    std::vector<std::uint32_t> p_pix, q_pix;
    std::vector<std::int32_t> q_index(ground_truth.size(), -1);
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i]) p_pix.push_back(std::uint32_t(i));
    for (std::size_t i = 0; i < ground_truth.size(); ++i)
        if (ground_truth[i]) {
            q_index[i] = std::int32_t(q_pix.size());
            q_pix.push_back(std::uint32_t(i));
        }
    if (p_pix.empty() || q_pix.empty() || radius < 0.0) return 0;

    const int win = int(std::floor(radius));
    const double r2 = radius * radius;
    std::vector<Candidate> cands;
    for (std::uint32_t pi = 0; pi < p_pix.size(); ++pi) {
        const int px = int(p_pix[pi] % std::uint32_t(width)), py = int(p_pix[pi] / std::uint32_t(width));
        for (int dy = -win; dy <= win; ++dy)
            for (int dx = -win; dx <= win; ++dx) {
                const int x = px + dx, y = py + dy;
                if (x < 0 || y < 0 || x >= width || y >= height) continue;
                const long d2 = long(dx) * dx + long(dy) * dy;
                if (double(d2) > r2 + 1e-9) continue;
                const auto qi = q_index[std::size_t(y) * std::size_t(width) + std::size_t(x)];
                if (qi >= 0) cands.push_back({d2, pi, std::uint32_t(qi)});
            }
    }
    if (exact) {
        std::vector<std::vector<std::uint32_t>> adj(p_pix.size());
        for (const auto& c : cands) adj[c.p].push_back(c.q);
        return max_matching(p_pix.size(), q_pix.size(), adj);
    }
    // Ties ordered by the unordered pixel pair so the count is symmetric in the two maps.
    std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        const auto a_lo = std::min(p_pix[a.p], q_pix[a.q]), a_hi = std::max(p_pix[a.p], q_pix[a.q]);
        const auto b_lo = std::min(p_pix[b.p], q_pix[b.q]), b_hi = std::max(p_pix[b.p], q_pix[b.q]);
        if (a_lo != b_lo) return a_lo < b_lo;
        if (a_hi != b_hi) return a_hi < b_hi;
        return p_pix[a.p] < p_pix[b.p];
    });
    std::vector<bool> used_p(p_pix.size(), false), used_q(q_pix.size(), false);
    std::size_t matched = 0;
    for (const auto& c : cands) {
        if (used_p[c.p] || used_q[c.q]) continue;
        used_p[c.p] = used_q[c.q] = true;
        ++matched;
    }
    return matched;
}

namespace {

void check_inputs(const LabelVolume& pred, const GroundTruth& gt) {
    if (!(pred.grid() == gt.grid))
        throw Error(ErrorCode::dim_mismatch, "prediction grid " + to_string(pred.grid()) + " does not match ground truth " +
                                                 to_string(gt.grid));
    if (gt.annotated_frames.empty()) throw Error(ErrorCode::invalid_argument, "ground truth has no annotated frames");
}

} // namespace

PrecisionRecall bpr(const LabelVolume& pred, const GroundTruth& gt, const BoundaryOptions& options,
                    std::vector<FrameBoundaryCounts>* per_frame) {
    check_inputs(pred, gt);
    const int w = gt.grid.width, h = gt.grid.height;
    const double radius = options.tolerance * std::sqrt(double(w) * w + double(h) * h);
    std::size_t matched = 0, n_pred = 0, n_gt = 0;
    for (std::size_t i = 0; i < gt.annotated_frames.size(); ++i) {
        const int t = gt.annotated_frames[i];
        const auto bp = boundary_map(pred.frame(t), w, h);
        const auto bg = boundary_map(gt.labels[i], w, h);
        FrameBoundaryCounts c;
        c.frame = t;
        c.predicted = std::size_t(std::count(bp.begin(), bp.end(), true));
        c.ground_truth = std::size_t(std::count(bg.begin(), bg.end(), true));
        c.matched = match_boundaries(bp, bg, w, h, radius, options.exact_matching);
        matched += c.matched;
        n_pred += c.predicted;
        n_gt += c.ground_truth;
        if (per_frame) per_frame->push_back(c);
    }
    PrecisionRecall pr;
    pr.precision = n_pred == 0 ? 1.0 : double(matched) / double(n_pred);
    pr.recall = n_gt == 0 ? 1.0 : double(matched) / double(n_gt);
    pr.f = f_measure(pr.precision, pr.recall);
    return pr;
}

PrecisionRecall vpr(const LabelVolume& pred, const GroundTruth& gt) {
    check_inputs(pred, gt);
    std::unordered_map<std::uint64_t, std::size_t> overlap;
    std::unordered_map<Label, std::size_t> best_pred, best_gt;
    std::size_t total = 0;
    for (std::size_t i = 0; i < gt.annotated_frames.size(); ++i) {
        const auto p = pred.frame(gt.annotated_frames[i]);
        const auto& g = gt.labels[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            ++overlap[(std::uint64_t(p[j]) << 32) | g[j]];
            ++total;
        }
    }
    for (const auto& [key, count] : overlap) {
        const Label s = Label(key >> 32), g = Label(key & 0xffffffffu);
        best_pred[s] = std::max(best_pred[s], count);
        best_gt[g] = std::max(best_gt[g], count);
    }
    std::size_t sum_p = 0, sum_g = 0;
    for (const auto& [s, c] : best_pred) sum_p += c;
    for (const auto& [g, c] : best_gt) sum_g += c;
    PrecisionRecall pr;
    pr.precision = double(sum_p) / double(total);
    pr.recall = double(sum_g) / double(total);
    pr.f = f_measure(pr.precision, pr.recall);
    return pr;
}

MetricReport evaluate(const LabelVolume& pred, const GroundTruth& gt, const BoundaryOptions& options) {
    MetricReport r;
    r.bpr = bpr(pred, gt, options, &r.per_frame);
    r.vpr = vpr(pred, gt);
    const auto f = fuse(r.bpr.f, r.vpr.f);
    r.am_bvpr = f.am;
    r.hm_bvpr = f.hm;
    return r;
}

MetricReport average(std::span<const MetricReport> reports) {
    MetricReport out;
    if (reports.empty()) return out;
    const double n = double(reports.size());
    for (const auto& r : reports) {
        out.bpr.precision += r.bpr.precision / n;
        out.bpr.recall += r.bpr.recall / n;
        out.bpr.f += r.bpr.f / n;
        out.vpr.precision += r.vpr.precision / n;
        out.vpr.recall += r.vpr.recall / n;
        out.vpr.f += r.vpr.f / n;
        out.am_bvpr += r.am_bvpr / n;
        out.hm_bvpr += r.hm_bvpr / n;
    }
    return out;
}

} // namespace vseg
