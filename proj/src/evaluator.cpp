#include "cowgraph/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cowgraph/radii.hpp"
#include "cowgraph/volume_ops.hpp"

namespace cow {

double dice(const Mask& a, const Mask& b)
{
    if (!same_grid(a.geometry, b.geometry)) throw std::invalid_argument("dice: grid mismatch");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool x = a.data[i] != 0, y = b.data[i] != 0;
        na += x;
        nb += y;
        both += x && y;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

int betti0_error(const Mask& a, const Mask& b)
{
    return std::abs(count_components(a) - count_components(b));
}

Thickness skeleton_thickness(const Mask& skeleton)
{
    const GridGeometry& g = skeleton.geometry;
    const double sp[3] = {g.spacing.x, g.spacing.y, g.spacing.z};
    // Per voxel: shortest axis-aligned run of foreground through it.
    std::vector<double> r;
    for (std::size_t i = 0; i < skeleton.size(); ++i) {
        if (!skeleton[i]) continue;
        const Index3 v = g.unflat(i);
        double best = std::numeric_limits<double>::infinity();
        for (int ax = 0; ax < 3; ++ax) {
            int n = 1;
            for (int step : {-1, 1}) {
                Index3 w = v;
                for (;;) {
                    w[static_cast<std::size_t>(ax)] += step;
                    if (!skeleton.get_or_zero(w[0], w[1], w[2])) break;
                    ++n;
                }
            }
            best = std::min(best, n * sp[ax]);
        }
        r.push_back(best);
    }
    if (r.empty()) throw std::invalid_argument("skeleton_thickness: empty skeleton");
    Thickness t;
    double sum = 0.0;
    for (double x : r) sum += x;
    t.mean_mm = sum / static_cast<double>(r.size());
    t.p99_mm = percentile(r, 99.0);
    return t;
}

bool is_major_bifurcation(const AnatomicalNode& n)
{
    return n.type == NodeType::Bifurcation && (n.name == "BA bifurcation" || n.name == "ICA bifurcation");
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost)
{
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    const int m = static_cast<int>(cost[0].size());
    if (n > m) throw std::invalid_argument("hungarian: more rows than columns");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1)), v(static_cast<std::size_t>(m + 1));
    std::vector<int> p(static_cast<std::size_t>(m + 1)), way(static_cast<std::size_t>(m + 1));
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<std::size_t>(j)] > 0) assign[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return assign;
}

namespace {

DistanceStats summarize(const std::vector<double>& d)
{
    DistanceStats s;
    s.support = static_cast<int>(d.size());
    if (d.empty()) return s;
    double sum = 0.0;
    for (double x : d) sum += x;
    s.mean_mm = sum / static_cast<double>(d.size());
    if (d.size() > 1) {
        double ss = 0.0;
        for (double x : d) ss += (x - s.mean_mm) * (x - s.mean_mm);
        s.sd_mm = std::sqrt(ss / static_cast<double>(d.size() - 1));
    }
    return s;
}

}  // namespace

NodeDistanceReport node_distance_stats(const std::vector<AnatomicalNode>& pred, const std::vector<AnatomicalNode>& ref)
{
    using Key = std::pair<Label, std::string>;
    auto counted = [](const AnatomicalNode& n) { return n.type == NodeType::Bifurcation || n.type == NodeType::Boundary; };
    std::map<Key, std::vector<const AnatomicalNode*>> P, R;
    for (const auto& n : pred)
        if (counted(n)) P[{n.label, n.name}].push_back(&n);
    for (const auto& n : ref)
        if (counted(n)) R[{n.label, n.name}].push_back(&n);

    NodeDistanceReport out;
    std::vector<double> major, minor, boundary, overall;
    auto record = [&](const AnatomicalNode& r, double d) {
        overall.push_back(d);
        if (r.type == NodeType::Boundary)
            boundary.push_back(d);
        else if (is_major_bifurcation(r))
            major.push_back(d);
        else
            minor.push_back(d);
    };
    for (const auto& [key, refs] : R) {
        const auto it = P.find(key);
        if (it == P.end()) {
            out.unmatched_ref += static_cast<int>(refs.size());
            continue;
        }
        const auto& preds = it->second;
        const bool rows_are_ref = refs.size() <= preds.size();
        const auto& rows = rows_are_ref ? refs : preds;
        const auto& cols = rows_are_ref ? preds : refs;
        std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) cost[i][j] = distance(rows[i]->pos, cols[j]->pos);
        const auto assign = hungarian(cost);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const AnatomicalNode& r = rows_are_ref ? *rows[i] : *cols[static_cast<std::size_t>(assign[i])];
            record(r, cost[i][static_cast<std::size_t>(assign[i])]);
        }
        const int diff = static_cast<int>(preds.size()) - static_cast<int>(refs.size());
        if (diff > 0) out.unmatched_pred += diff;
        if (diff < 0) out.unmatched_ref -= diff;
    }
    for (const auto& [key, preds] : P)
        if (!R.count(key)) out.unmatched_pred += static_cast<int>(preds.size());
    out.major = summarize(major);
    out.minor = summarize(minor);
    out.boundary = summarize(boundary);
    out.overall = summarize(overall);
    return out;
}

double variant_f1(const std::vector<VariantReport>& pred, const std::vector<VariantReport>& ref)
{
    if (pred.size() != ref.size()) throw std::invalid_argument("variant_f1: case count mismatch");
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t c = 0; c < pred.size(); ++c) {
        const auto ps = pred[c].slots(), rs = ref[c].slots();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            tp += ps[i].second && rs[i].second;
            fp += ps[i].second && !rs[i].second;
            fn += !ps[i].second && rs[i].second;
        }
    }
    if (tp + fp + fn == 0) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

Agreement feature_agreement(const std::vector<double>& pred, const std::vector<double>& ref)
{
    if (pred.size() != ref.size()) throw std::invalid_argument("feature_agreement: length mismatch");
    Agreement a;
    a.pairs = static_cast<int>(pred.size());
    std::vector<double> rel;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (ref[i] == 0.0) {
            ++a.excluded_zero_ref;
            continue;
        }
        rel.push_back(std::abs(pred[i] - ref[i]) / std::abs(ref[i]));
    }
    if (!rel.empty()) a.medre = percentile(rel, 50.0);
    if (pred.size() >= 2) {
        const double n = static_cast<double>(pred.size());
        double mp = 0.0, mr = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            mp += pred[i];
            mr += ref[i];
        }
        mp /= n;
        mr /= n;
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            sxy += (pred[i] - mp) * (ref[i] - mr);
            sxx += (pred[i] - mp) * (pred[i] - mp);
            syy += (ref[i] - mr) * (ref[i] - mr);
        }
        if (sxx > 0.0 && syy > 0.0) a.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    }
    return a;
}

}  // namespace cow
