#include "cowgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

namespace cow {

double polyline_length(const std::vector<Vec3>& pts)
{
    double l = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) l += distance(pts[i - 1], pts[i]);
    return l;
}

double GraphEdge::length() const { return polyline_length(points); }

void CenterlineGraph::recompute_degrees()
{
    for (auto& n : nodes) n.degree = 0;
    for (const auto& e : edges) {
        ++nodes[static_cast<std::size_t>(e.a)].degree;
        ++nodes[static_cast<std::size_t>(e.b)].degree;
    }
}

std::vector<int> CenterlineGraph::incident(int node) const
{
    std::vector<int> r;
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (edges[i].a == node || edges[i].b == node) r.push_back(static_cast<int>(i));
    return r;
}

namespace {

struct UnionFind {
    std::vector<int> p;
    explicit UnionFind(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x)
    {
        while (p[static_cast<std::size_t>(x)] != x) x = p[static_cast<std::size_t>(x)] = p[static_cast<std::size_t>(p[static_cast<std::size_t>(x)])];
        return x;
    }
    void unite(int a, int b)
    {
        a = find(a);
        b = find(b);
        if (a != b) p[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
};

}  // namespace

int CenterlineGraph::component_count() const
{
    UnionFind uf(nodes.size());
    for (const auto& e : edges) uf.unite(e.a, e.b);
    int c = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (uf.find(static_cast<int>(i)) == static_cast<int>(i)) ++c;
    return c;
}

int CenterlineGraph::cycle_rank() const
{
    return static_cast<int>(edges.size()) - static_cast<int>(nodes.size()) + component_count();
}

void CenterlineGraph::remove_edges(const std::vector<char>& drop, bool drop_isolated)
{
    std::vector<GraphEdge> kept;
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (i >= drop.size() || !drop[i]) kept.push_back(std::move(edges[i]));
    edges = std::move(kept);
    recompute_degrees();
    if (!drop_isolated) return;
    std::vector<int> remap(nodes.size(), -1);
    std::vector<GraphNode> nn;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].degree == 0) continue;
        remap[i] = static_cast<int>(nn.size());
        nn.push_back(nodes[i]);
    }
    nodes = std::move(nn);
    for (auto& e : edges) {
        e.a = remap[static_cast<std::size_t>(e.a)];
        e.b = remap[static_cast<std::size_t>(e.b)];
    }
}

// ---------------------------------------------------------------------------------------------
// Graph construction

namespace {

Label majority_label(const std::vector<Label>& labels)
{
    std::map<Label, int> count;
    for (Label l : labels) ++count[l];
    Label best = label::Background;
    int best_n = -1;
    for (const auto& [l, n] : count)
        if (n > best_n) {  // map order makes ties resolve to the smaller code
            best = l;
            best_n = n;
        }
    return best;
}

// Per-voxel labels after absorbing short runs; the result is piecewise constant.
std::vector<Label> clean_runs(std::vector<Label> seq, int min_run)
{
    const auto n = static_cast<int>(seq.size());
    if (n == 0) return seq;
    if (n < 2 * min_run) {
        const Label l = majority_label(seq);
        std::fill(seq.begin(), seq.end(), l);
        return seq;
    }
    for (;;) {
        struct Run {
            Label l;
            int start, len;
        };
        std::vector<Run> runs;
        for (int i = 0; i < n; ++i) {
            if (runs.empty() || runs.back().l != seq[static_cast<std::size_t>(i)])
                runs.push_back({seq[static_cast<std::size_t>(i)], i, 1});
            else
                ++runs.back().len;
        }
        if (runs.size() <= 1) break;
        std::size_t shortest = runs.size();
        for (std::size_t r = 0; r < runs.size(); ++r)
            if (runs[r].len < min_run && (shortest == runs.size() || runs[r].len < runs[shortest].len)) shortest = r;
        if (shortest == runs.size()) break;
        Label into;
        if (shortest == 0)
            into = runs[1].l;
        else if (shortest + 1 == runs.size())
            into = runs[shortest - 1].l;
        else
            into = runs[shortest + 1].len > runs[shortest - 1].len ? runs[shortest + 1].l : runs[shortest - 1].l;
        for (int i = runs[shortest].start; i < runs[shortest].start + runs[shortest].len; ++i)
            seq[static_cast<std::size_t>(i)] = into;
    }
    return seq;
}

struct Chain {
    int a, b;
    std::vector<std::size_t> voxels;  // interior voxels only
    std::size_t first, last;          // node voxels at both ends
};

}  // namespace

CenterlineGraph build_graph(const Mask& s, const BuildOptions& opt)
{
    CenterlineGraph graph;
    const GridGeometry& g = s.geometry;
    std::vector<std::size_t> vox;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] != 0) vox.push_back(i);
    if (vox.empty()) return graph;

    std::unordered_map<std::size_t, std::size_t> pos;
    pos.reserve(vox.size() * 2);
    for (std::size_t i = 0; i < vox.size(); ++i) pos[vox[i]] = i;

    std::vector<std::vector<std::size_t>> nbr(vox.size());
    for (std::size_t i = 0; i < vox.size(); ++i) {
        const Index3 v = g.unflat(vox[i]);
        for (const auto& o : neighbor_offsets_26()) {
            const int x = v[0] + o[0], y = v[1] + o[1], z = v[2] + o[2];
            if (!g.contains(x, y, z)) continue;
            const auto it = pos.find(g.flat(x, y, z));
            if (it != pos.end()) nbr[i].push_back(it->second);
        }
        std::sort(nbr[i].begin(), nbr[i].end());
    }

    // Node voxels: ends (<= 1 neighbour) individually, junction voxels clustered.
    std::vector<int> node_of(vox.size(), -1);
    UnionFind uf(vox.size());
    for (std::size_t i = 0; i < vox.size(); ++i)
        if (nbr[i].size() >= 3)
            for (std::size_t j : nbr[i])
                if (nbr[j].size() >= 3) uf.unite(static_cast<int>(i), static_cast<int>(j));
    std::map<int, std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < vox.size(); ++i) {
        if (nbr[i].size() >= 3)
            clusters[uf.find(static_cast<int>(i))].push_back(i);
        else if (nbr[i].size() <= 1)
            clusters[static_cast<int>(i)].push_back(i);
    }
    // Nodes in order of their first voxel for determinism.
    std::vector<std::vector<std::size_t>> ordered;
    for (auto& [root, members] : clusters) ordered.push_back(members);
    std::sort(ordered.begin(), ordered.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
    for (const auto& members : ordered) {
        Vec3 c{};
        for (std::size_t m : members) c += g.to_world(vox[m]);
        c /= static_cast<double>(members.size());
        std::size_t rep = members.front();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m : members) {
            const double d = distance(g.to_world(vox[m]), c);
            if (d < best - 1e-12) {
                best = d;
                rep = m;
            }
        }
        const int id = static_cast<int>(graph.nodes.size());
        graph.nodes.push_back({g.to_world(vox[rep]), 0});
        for (std::size_t m : members) node_of[m] = id;
    }

    std::vector<Chain> chains;
    std::vector<char> visited(vox.size(), 0);
    std::set<std::pair<std::size_t, std::size_t>> direct;
    for (std::size_t u = 0; u < vox.size(); ++u) {
        if (node_of[u] < 0) continue;
        for (std::size_t w : nbr[u]) {
            if (node_of[w] >= 0) {
                if (node_of[w] != node_of[u] && direct.insert({std::min(u, w), std::max(u, w)}).second)
                    chains.push_back({node_of[u], node_of[w], {}, u, w});
                continue;
            }
            if (visited[w]) continue;
            Chain c{node_of[u], -1, {}, u, 0};
            std::size_t prev = u, cur = w;
            for (;;) {
                visited[cur] = 1;
                c.voxels.push_back(cur);
                const std::size_t next = nbr[cur][0] == prev ? nbr[cur][1] : nbr[cur][0];
                prev = cur;
                cur = next;
                if (node_of[cur] >= 0) {
                    c.b = node_of[cur];
                    c.last = cur;
                    break;
                }
                if (visited[cur]) {  // should not happen for a consistent skeleton
                    c.b = c.a;
                    c.last = u;
                    break;
                }
            }
            chains.push_back(std::move(c));
        }
    }

    // Remaining degree-2 voxels form closed rings; anchor each at its smallest voxel.
    for (std::size_t u = 0; u < vox.size(); ++u) {
        if (node_of[u] >= 0 || visited[u]) continue;
        const int id = static_cast<int>(graph.nodes.size());
        graph.nodes.push_back({g.to_world(vox[u]), 0});
        node_of[u] = id;
        visited[u] = 1;
        Chain c{id, id, {}, u, u};
        std::size_t prev = u, cur = nbr[u][0];
        while (cur != u) {
            visited[cur] = 1;
            c.voxels.push_back(cur);
            const std::size_t next = nbr[cur][0] == prev ? nbr[cur][1] : nbr[cur][0];
            prev = cur;
            cur = next;
            if (visited[cur] && cur != u) break;
        }
        chains.push_back(std::move(c));
    }

    for (const Chain& c : chains) {
        std::vector<Vec3> pts;
        pts.push_back(graph.nodes[static_cast<std::size_t>(c.a)].pos);
        for (std::size_t v : c.voxels) pts.push_back(g.to_world(vox[v]));
        pts.push_back(graph.nodes[static_cast<std::size_t>(c.b)].pos);

        std::vector<Label> seq;
        for (std::size_t v : c.voxels) seq.push_back(s[vox[v]]);
        if (seq.empty()) {
            const Label la = s[vox[c.first]], lb = s[vox[c.last]];
            const Label l = (nbr[c.first].size() <= 1) ? la : (nbr[c.last].size() <= 1 ? lb : std::min(la, lb));
            graph.edges.push_back({c.a, c.b, pts, l, {}, {}});
            continue;
        }
        const std::vector<Label> runs = clean_runs(seq, opt.min_label_run);
        int start_node = c.a;
        std::size_t start_pt = 0;
        for (std::size_t i = 1; i < runs.size(); ++i) {
            if (runs[i] == runs[i - 1]) continue;
            // New run starts at chain voxel i, i.e. polyline point i + 1.
            const int split = static_cast<int>(graph.nodes.size());
            graph.nodes.push_back({pts[i + 1], 0});
            std::vector<Vec3> part(pts.begin() + static_cast<std::ptrdiff_t>(start_pt),
                                   pts.begin() + static_cast<std::ptrdiff_t>(i + 2));
            graph.edges.push_back({start_node, split, std::move(part), runs[i - 1], {}, {}});
            start_node = split;
            start_pt = i + 1;
        }
        std::vector<Vec3> part(pts.begin() + static_cast<std::ptrdiff_t>(start_pt), pts.end());
        graph.edges.push_back({start_node, c.b, std::move(part), runs.back(), {}, {}});
    }
    graph.recompute_degrees();
    return graph;
}

// ---------------------------------------------------------------------------------------------
// Anatomical nodes

const char* node_type_name(NodeType t)
{
    switch (t) {
    case NodeType::Start: return "start";
    case NodeType::End: return "end";
    case NodeType::Bifurcation: return "bifurcation";
    case NodeType::Boundary: return "boundary";
    }
    return "unknown";
}

namespace {

std::string boundary_name(Label segment, Label other)
{
    const std::string_view t = vessel_type(segment);
    if (t == "BA" || t == "Acom") return std::string(label_name(other)) + " boundary";
    return std::string(vessel_type(other)) + " boundary";
}

std::optional<std::pair<std::string, NodeType>> terminal_name(Label l)
{
    const std::string_view t = vessel_type(l);
    if (t == "BA" || t == "ICA") return std::pair{std::string(t) + " start", NodeType::Start};
    if (t == "PCA" || t == "MCA" || t == "ACA" || t == "3rd-A2") return std::pair{std::string(t) + " end", NodeType::End};
    return std::nullopt;
}

// First label different from `owner` met when walking from `node` along edge `e` through degree-2 nodes.
std::optional<Label> child_label(const CenterlineGraph& g, int node, int e, Label owner, double max_mm)
{
    double walked = 0.0;
    int cur = node;
    for (int guard = 0; guard < 1000; ++guard) {
        const GraphEdge& edge = g.edges[static_cast<std::size_t>(e)];
        if (edge.label != owner) return edge.label;
        walked += edge.length();
        const int next = edge.other(cur);
        if (next == node || g.nodes[static_cast<std::size_t>(next)].degree != 2 || walked > max_mm) return std::nullopt;
        const auto inc = g.incident(next);
        int ne = -1;
        for (int x : inc)
            if (x != e) ne = x;
        if (ne < 0) return std::nullopt;
        cur = next;
        e = ne;
    }
    return std::nullopt;
}

}  // namespace

NodeExtraction extract_anatomical_nodes(const CenterlineGraph& g)
{
    NodeExtraction out;
    Vec3 centroid{};
    for (const auto& n : g.nodes) centroid += n.pos;
    if (!g.nodes.empty()) centroid /= static_cast<double>(g.nodes.size());

    auto diag = [&out](int id, const std::string& msg) {
        out.diagnostics.push_back("node " + std::to_string(id) + ": " + msg);
    };
    auto emit = [&](int id, Label seg, NodeType type, const std::string& name) {
        const GraphNode& n = g.nodes[static_cast<std::size_t>(id)];
        if (!in_vocabulary(seg, name)) {
            diag(id, "'" + name + "' is not a node of " + std::string(label_name(seg)));
            return;
        }
        out.nodes.push_back({id, n.degree, seg, type, name, n.pos});
    };

    std::map<Label, std::vector<int>> terminals;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const int id = static_cast<int>(i);
        const auto inc = g.incident(id);
        const int deg = g.nodes[i].degree;
        if (deg == 1) {
            terminals[g.edges[static_cast<std::size_t>(inc[0])].label].push_back(id);
        } else if (deg == 2 && inc.size() == 2) {
            const Label l1 = g.edges[static_cast<std::size_t>(inc[0])].label;
            const Label l2 = g.edges[static_cast<std::size_t>(inc[1])].label;
            if (l1 == l2) continue;
            if (!labels_adjacent(l1, l2))
                diag(id, "boundary between non-adjacent " + std::string(label_name(l1)) + " and " +
                             std::string(label_name(l2)));
            emit(id, l1, NodeType::Boundary, boundary_name(l1, l2));
            emit(id, l2, NodeType::Boundary, boundary_name(l2, l1));
        } else if (deg >= 3) {
            std::vector<Label> ls;
            for (int e : inc) ls.push_back(g.edges[static_cast<std::size_t>(e)].label);
            const Label owner = majority_label(ls);
            std::set<std::string_view> kids;
            for (int e : inc)
                if (auto c = child_label(g, id, e, owner, 10.0)) kids.insert(vessel_type(*c));
            const std::string_view t = vessel_type(owner);
            std::string name;
            if (t == "BA" && kids.count("PCA"))
                name = "BA bifurcation";
            else if (t == "ICA" && (kids.count("MCA") || kids.count("ACA")))
                name = "ICA bifurcation";
            else if ((t == "ICA" || t == "PCA") && kids.count("Pcom"))
                name = "Pcom bifurcation";
            else if (t == "ACA" && kids.count("Acom"))
                name = "Acom bifurcation";
            else if (t == "Acom" && kids.count("3rd-A2"))
                name = "3rd-A2 bifurcation";
            if (name.empty()) {
                diag(id, "junction of " + std::string(label_name(owner)) + " matches no named bifurcation");
                continue;
            }
            if (deg > 3) diag(id, name + " has degree " + std::to_string(deg));
            emit(id, owner, NodeType::Bifurcation, name);
        }
    }
    for (const auto& [l, ids] : terminals) {
        const auto tn = terminal_name(l);
        if (!tn) {
            for (int id : ids) diag(id, "degree-1 node on " + std::string(label_name(l)));
            continue;
        }
        int best = ids.front();
        double best_d = -1.0;
        for (int id : ids) {
            const double d = distance(g.nodes[static_cast<std::size_t>(id)].pos, centroid);
            if (d > best_d + 1e-12) {
                best = id;
                best_d = d;
            }
        }
        for (int id : ids)
            if (id != best) diag(id, "extra terminal on " + std::string(label_name(l)));
        emit(best, l, tn->second, tn->first);
    }
    std::stable_sort(out.nodes.begin(), out.nodes.end(), [](const AnatomicalNode& a, const AnatomicalNode& b) {
        return a.label != b.label ? a.label < b.label : a.id < b.id;
    });
    return out;
}

std::optional<AnatomicalNode> find_node(const std::vector<AnatomicalNode>& nodes, Label segment,
                                        const std::string& name)
{
    for (const auto& n : nodes)
        if (n.label == segment && n.name == name) return n;
    return std::nullopt;
}

// ---------------------------------------------------------------------------------------------
// Cleanup rules

double sample_distance(const DistanceField& dist, const Vec3& p)
{
    const auto v = dist.geometry.nearest_voxel(p);
    return v ? static_cast<double>(dist(( *v)[0], (*v)[1], (*v)[2])) : 0.0;
}

namespace {

double mean_distance(const GraphEdge& e, const DistanceField& dist)
{
    if (e.points.empty()) return 0.0;
    double s = 0.0;
    for (const Vec3& p : e.points) s += sample_distance(dist, p);
    return s / static_cast<double>(e.points.size());
}

bool rule_self_loops(CenterlineGraph& g, const DistanceField& dist, const RuleOptions& opt)
{
    std::vector<char> drop(g.edges.size(), 0);
    bool any = false;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const GraphEdge& e = g.edges[i];
        if (!e.is_loop()) continue;
        const double r = sample_distance(dist, g.nodes[static_cast<std::size_t>(e.a)].pos);
        if (e.length() < opt.self_loop_factor * r) drop[i] = any = true;
    }
    if (any) g.remove_edges(drop, false);
    return any;
}

bool rule_parallel(CenterlineGraph& g, const DistanceField& dist, const RuleOptions& opt)
{
    std::map<std::tuple<int, int, Label>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const GraphEdge& e = g.edges[i];
        if (e.is_loop()) continue;
        groups[{std::min(e.a, e.b), std::max(e.a, e.b), e.label}].push_back(i);
    }
    std::vector<char> drop(g.edges.size(), 0);
    bool any = false;
    for (const auto& [key, ids] : groups) {
        if (ids.size() < 2) continue;
        std::vector<double> len;
        for (std::size_t i : ids) len.push_back(g.edges[i].length());
        std::sort(len.begin(), len.end());
        const double r = std::max(sample_distance(dist, g.nodes[static_cast<std::size_t>(std::get<0>(key))].pos),
                                  sample_distance(dist, g.nodes[static_cast<std::size_t>(std::get<1>(key))].pos));
        if (len[0] + len[1] >= opt.parallel_factor * r) continue;  // a genuine split, keep
        std::size_t best = ids.front();
        double best_m = -1.0;
        for (std::size_t i : ids) {
            const double m = mean_distance(g.edges[i], dist);
            if (m > best_m + 1e-12) {
                best = i;
                best_m = m;
            }
        }
        for (std::size_t i : ids)
            if (i != best) drop[i] = any = true;
    }
    if (any) g.remove_edges(drop, false);
    return any;
}

bool rule_incompatible(CenterlineGraph& g)
{
    // Edges conflicting at both ends go first, so a bypass is removed before the branches it touches.
    std::vector<std::pair<int, std::size_t>> order;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const GraphEdge& e = g.edges[i];
        if (e.is_loop()) continue;
        int bad = 0;
        for (int w : {e.a, e.b}) {
            const auto inc = g.incident(w);
            if (inc.size() < 2) continue;
            bool compatible = false;
            for (int o : inc) {
                if (o == static_cast<int>(i)) continue;
                const Label ol = g.edges[static_cast<std::size_t>(o)].label;
                if (ol == e.label || labels_adjacent(ol, e.label)) compatible = true;
            }
            if (!compatible) ++bad;
        }
        if (bad > 0) order.emplace_back(-bad, i);
    }
    std::stable_sort(order.begin(), order.end());
    for (const auto& [neg, i] : order) {
        CenterlineGraph trial = g;
        std::vector<char> drop(g.edges.size(), 0);
        drop[i] = 1;
        trial.remove_edges(drop, false);
        if (trial.component_count() > g.component_count()) continue;
        g = std::move(trial);
        return true;
    }
    return false;
}

}  // namespace

CenterlineGraph merge_degree2_nodes(const CenterlineGraph& in)
{
    CenterlineGraph g = in;
    g.recompute_degrees();
    for (;;) {
        bool merged = false;
        for (std::size_t n = 0; n < g.nodes.size() && !merged; ++n) {
            if (g.nodes[n].degree != 2) continue;
            const auto inc = g.incident(static_cast<int>(n));
            if (inc.size() != 2) continue;
            GraphEdge& e1 = g.edges[static_cast<std::size_t>(inc[0])];
            GraphEdge& e2 = g.edges[static_cast<std::size_t>(inc[1])];
            if (e1.label != e2.label) continue;
            const int node = static_cast<int>(n);
            // Orient e1 to end at n and e2 to start at n.
            auto reversed = [](GraphEdge e) {
                std::swap(e.a, e.b);
                std::reverse(e.points.begin(), e.points.end());
                std::reverse(e.ce_radius.begin(), e.ce_radius.end());
                std::reverse(e.mis_radius.begin(), e.mis_radius.end());
                return e;
            };
            GraphEdge x = e1.b == node ? e1 : reversed(e1);
            GraphEdge y = e2.a == node ? e2 : reversed(e2);
            GraphEdge joined{x.a, y.b, x.points, x.label, {}, {}};
            joined.points.insert(joined.points.end(), y.points.begin() + 1, y.points.end());
            if (x.ce_radius.size() == x.points.size() && y.ce_radius.size() == y.points.size()) {
                joined.ce_radius = x.ce_radius;
                joined.ce_radius.insert(joined.ce_radius.end(), y.ce_radius.begin() + 1, y.ce_radius.end());
                joined.mis_radius = x.mis_radius;
                joined.mis_radius.insert(joined.mis_radius.end(), y.mis_radius.begin() + 1, y.mis_radius.end());
            }
            std::vector<char> drop(g.edges.size(), 0);
            drop[static_cast<std::size_t>(inc[1])] = 1;
            g.edges[static_cast<std::size_t>(inc[0])] = std::move(joined);
            g.remove_edges(drop, true);
            merged = true;
        }
        if (!merged) break;
    }
    return g;
}

CenterlineGraph remove_spurious_edges(const CenterlineGraph& in, const DistanceField& dist, const RuleOptions& opt)
{
    CenterlineGraph g = in;
    g.recompute_degrees();
    for (int iter = 0; iter < 10000; ++iter) {
        bool changed = rule_self_loops(g, dist, opt);
        changed = rule_parallel(g, dist, opt) || changed;
        changed = rule_incompatible(g) || changed;
        const std::size_t before_nodes = g.nodes.size(), before_edges = g.edges.size();
        g.remove_edges(std::vector<char>(g.edges.size(), 0), true);
        g = merge_degree2_nodes(g);
        if (g.nodes.size() != before_nodes || g.edges.size() != before_edges) changed = true;
        if (!changed) break;
    }
    return g;
}

MergeResult merge_single_label_graphs(const CenterlineGraph& main, const std::vector<CenterlineGraph>& parts,
                                      double snap_mm)
{
    MergeResult r{main, {}};
    CenterlineGraph& g = r.graph;
    bool spliced = false;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const CenterlineGraph& part = parts[pi];
        std::set<Label> part_labels;
        for (const auto& e : part.edges) part_labels.insert(e.label);
        if (part_labels.empty()) continue;

        // Candidate anchors: main nodes touching at least one edge that survives the replacement.
        std::vector<char> anchor(g.nodes.size(), 0);
        for (const auto& e : g.edges)
            if (!part_labels.count(e.label)) anchor[static_cast<std::size_t>(e.a)] = anchor[static_cast<std::size_t>(e.b)] = 1;

        std::map<int, int> snapped;
        for (std::size_t n = 0; n < part.nodes.size(); ++n) {
            if (part.nodes[n].degree != 1) continue;
            int best = -1;
            double best_d = snap_mm;
            for (std::size_t m = 0; m < g.nodes.size(); ++m) {
                if (!anchor[m]) continue;
                const double d = distance(part.nodes[n].pos, g.nodes[m].pos);
                if (d < best_d) {
                    best = static_cast<int>(m);
                    best_d = d;
                }
            }
            if (best >= 0) snapped[static_cast<int>(n)] = best;
        }
        if (snapped.empty()) {
            r.diagnostics.push_back("part " + std::to_string(pi) + " skipped: no end within " +
                                    std::to_string(snap_mm) + " mm of a main-graph node");
            continue;
        }
        std::vector<char> drop(g.edges.size(), 0);
        for (std::size_t i = 0; i < g.edges.size(); ++i) drop[i] = part_labels.count(g.edges[i].label) ? 1 : 0;
        g.remove_edges(drop, false);

        std::vector<int> remap(part.nodes.size(), -1);
        for (std::size_t n = 0; n < part.nodes.size(); ++n) {
            const auto it = snapped.find(static_cast<int>(n));
            if (it != snapped.end()) {
                remap[n] = it->second;
            } else {
                remap[n] = static_cast<int>(g.nodes.size());
                g.nodes.push_back({part.nodes[n].pos, 0});
            }
        }
        for (const auto& e : part.edges) {
            GraphEdge ne = e;
            ne.a = remap[static_cast<std::size_t>(e.a)];
            ne.b = remap[static_cast<std::size_t>(e.b)];
            if (!ne.points.empty()) {
                ne.points.front() = g.nodes[static_cast<std::size_t>(ne.a)].pos;
                ne.points.back() = g.nodes[static_cast<std::size_t>(ne.b)].pos;
            }
            g.edges.push_back(std::move(ne));
        }
        spliced = true;
    }
    if (!spliced) return r;
    g.recompute_degrees();
    g.remove_edges(std::vector<char>(g.edges.size(), 0), true);
    r.graph = merge_degree2_nodes(g);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Trimming and smoothing

std::vector<Vec3> moving_average(const std::vector<Vec3>& pts, int window)
{
    if (window < 3 || window % 2 == 0) throw std::invalid_argument("moving_average: window must be odd and >= 3");
    std::vector<Vec3> out = pts;
    const int n = static_cast<int>(pts.size());
    const int h = window / 2;
    for (int i = 1; i + 1 < n; ++i) {
        Vec3 s{};
        int c = 0;
        for (int j = std::max(0, i - h); j <= std::min(n - 1, i + h); ++j) {
            s += pts[static_cast<std::size_t>(j)];
            ++c;
        }
        out[static_cast<std::size_t>(i)] = s / static_cast<double>(c);
    }
    return out;
}

std::vector<Vec3> trim_front(const std::vector<Vec3>& pts, double amount)
{
    if (pts.size() < 2 || amount <= 0.0) return pts;
    double acc = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double seg = distance(pts[i - 1], pts[i]);
        if (acc + seg >= amount) {
            const double t = seg > 0.0 ? (amount - acc) / seg : 0.0;
            std::vector<Vec3> out;
            out.push_back(pts[i - 1] + (pts[i] - pts[i - 1]) * t);
            // Drop a point that coincides with the new start.
            const std::size_t from = t >= 1.0 - 1e-12 ? i + 1 : i;
            out.insert(out.end(), pts.begin() + static_cast<std::ptrdiff_t>(from), pts.end());
            if (out.size() < 2) out.push_back(pts.back());
            return out;
        }
        acc += seg;
    }
    return {pts[pts.size() - 2], pts.back()};
}

CenterlineGraph trim_and_smooth(const CenterlineGraph& in, const DistanceField& dist, const SmoothOptions& opt)
{
    if (opt.window < 3 || opt.window % 2 == 0) throw std::invalid_argument("trim_and_smooth: window must be odd and >= 3");
    CenterlineGraph g = in;
    g.recompute_degrees();
    for (auto& e : g.edges) {
        if (e.points.size() < 2 || e.is_loop()) continue;
        const double len = e.length();
        const bool trim_a = g.nodes[static_cast<std::size_t>(e.a)].degree == 1;
        const bool trim_b = g.nodes[static_cast<std::size_t>(e.b)].degree == 1;
        // Never consume more than a third of the edge per end.
        auto amount = [&](int node) {
            return std::min({sample_distance(dist, g.nodes[static_cast<std::size_t>(node)].pos), opt.trim_cap_mm,
                             len / 3.0});
        };
        if (trim_a) {
            e.points = trim_front(e.points, amount(e.a));
            g.nodes[static_cast<std::size_t>(e.a)].pos = e.points.front();
        }
        if (trim_b) {
            std::reverse(e.points.begin(), e.points.end());
            e.points = trim_front(e.points, amount(e.b));
            std::reverse(e.points.begin(), e.points.end());
            g.nodes[static_cast<std::size_t>(e.b)].pos = e.points.back();
        }
        e.ce_radius.clear();
        e.mis_radius.clear();
    }
    for (auto& e : g.edges) {
        if (e.points.size() <= 2) continue;
        e.points = moving_average(e.points, opt.window);
    }
    return g;
}

}  // namespace cow
