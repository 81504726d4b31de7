#include "cowgraph/morphometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <variant>

#include "cowgraph/radii.hpp"

namespace cow {

namespace {

constexpr int kDegree = 3;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

int find_span(const std::vector<double>& U, int ncontrol, double u)
{
    const int n = ncontrol - 1;
    if (u >= U[static_cast<std::size_t>(n + 1)]) return n;
    if (u <= U[kDegree]) return kDegree;
    int lo = kDegree, hi = n + 1;
    int mid = (lo + hi) / 2;
    while (u < U[static_cast<std::size_t>(mid)] || u >= U[static_cast<std::size_t>(mid + 1)]) {
        if (u < U[static_cast<std::size_t>(mid)])
            hi = mid;
        else
            lo = mid;
        mid = (lo + hi) / 2;
    }
    return mid;
}

// Basis function values and derivatives up to order 3 at u (Piegl & Tiller A2.3).
std::array<std::array<double, 4>, 4> basis_derivatives(const std::vector<double>& U, int span, double u)
{
    constexpr int p = kDegree;
    double ndu[p + 1][p + 1];
    double left[p + 1], right[p + 1];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u - U[static_cast<std::size_t>(span + 1 - j)];
        right[j] = U[static_cast<std::size_t>(span + j)] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    std::array<std::array<double, 4>, 4> ders{};
    for (int j = 0; j <= p; ++j) ders[0][static_cast<std::size_t>(j)] = ndu[j][p];
    double a[2][p + 1];
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= p; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)] = d;
            std::swap(s1, s2);
        }
    }
    int r = p;
    for (int k = 1; k <= p; ++k) {
        for (int j = 0; j <= p; ++j) ders[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] *= r;
        r *= (p - k);
    }
    return ders;
}

}  // namespace

SplineCurve::SplineCurve(std::vector<double> knots, std::vector<Vec3> control)
    : knots_(std::move(knots)), control_(std::move(control))
{
    if (control_.size() < kDegree + 1 || knots_.size() != control_.size() + kDegree + 1)
        throw std::invalid_argument("spline: knot/control count mismatch");
}

Vec3 SplineCurve::derivative(double u, int order) const
{
    if (control_.empty()) return {};
    u = std::clamp(u, 0.0, 1.0);
    const int span = find_span(knots_, static_cast<int>(control_.size()), u);
    const auto d = basis_derivatives(knots_, span, u);
    Vec3 out;
    for (int j = 0; j <= kDegree; ++j)
        out += control_[static_cast<std::size_t>(span - kDegree + j)] *
               d[static_cast<std::size_t>(order)][static_cast<std::size_t>(j)];
    return out;
}

Vec3 SplineCurve::point(double u) const { return derivative(u, 0); }

double SplineCurve::length(int samples) const
{
    double len = 0.0;
    Vec3 prev = point(0.0);
    for (int k = 1; k < samples; ++k) {
        const Vec3 p = point(static_cast<double>(k) / (samples - 1));
        len += distance(prev, p);
        prev = p;
    }
    return len;
}

double SplineCurve::mean_curvature(int samples) const
{
    double sum = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double u = static_cast<double>(k) / (samples - 1);
        const Vec3 d1 = derivative(u, 1);
        const Vec3 d2 = derivative(u, 2);
        const double s = norm(d1);
        if (s > 0.0) sum += norm(cross(d1, d2)) / (s * s * s);
    }
    return sum / samples;
}

SplineCurve fit_segment_spline(const std::vector<Vec3>& pts, const SplineOptions& opt)
{
    if (pts.empty()) throw std::invalid_argument("spline: no points");
    const std::size_t n = pts.size();
    std::vector<double> u(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) u[i] = u[i - 1] + distance(pts[i - 1], pts[i]);
    const double total = u.back();

    const Vec3 a = pts.front(), b = pts.back();
    if (n < 4 || total <= 0.0) {
        // Straight cubic with uniform speed.
        return SplineCurve({0, 0, 0, 0, 1, 1, 1, 1}, {a, a + (b - a) / 3.0, a + (b - a) * (2.0 / 3.0), b});
    }
    for (double& x : u) x /= total;

    std::vector<double> knots(kDegree + 1, 0.0);
    const std::size_t every = static_cast<std::size_t>(std::max(1, opt.knot_every));
    for (std::size_t idx = every; idx + 2 <= n - 1; idx += every)
        if (u[idx] > knots.back() + 1e-9 && u[idx] < 1.0 - 1e-9) knots.push_back(u[idx]);
    knots.insert(knots.end(), kDegree + 1, 1.0);
    const int m = static_cast<int>(knots.size()) - kDegree - 1;

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const int span = find_span(knots, m, u[i]);
        const auto d = basis_derivatives(knots, span, u[i]);
        for (int r = 0; r <= kDegree; ++r) {
            const int ir = span - kDegree + r;
            const double br = d[0][static_cast<std::size_t>(r)];
            for (int c = 0; c <= kDegree; ++c) H(ir, span - kDegree + c) += br * d[0][static_cast<std::size_t>(c)];
            for (int k = 0; k < 3; ++k) rhs(ir, k) += br * pts[i][k];
        }
    }
    if (opt.smoothing_mm > 0.0) {
        // lambda * density * integral of |third derivative in arc length|^2
        const double lambda = std::pow(opt.smoothing_mm, 6.0);
        const double scale = lambda * static_cast<double>(n) / std::pow(total, 6.0);
        for (std::size_t s = kDegree; s + kDegree + 1 < knots.size(); ++s) {
            const double du = knots[s + 1] - knots[s];
            if (du <= 0.0) continue;
            const double mid = 0.5 * (knots[s] + knots[s + 1]);
            const int span = static_cast<int>(s);
            const auto d = basis_derivatives(knots, span, mid);
            for (int r = 0; r <= kDegree; ++r)
                for (int c = 0; c <= kDegree; ++c)
                    H(span - kDegree + r, span - kDegree + c) +=
                        scale * du * d[3][static_cast<std::size_t>(r)] * d[3][static_cast<std::size_t>(c)];
        }
    }

    // Endpoints are interpolated: fix the first and last control points.
    std::vector<Vec3> ctrl(static_cast<std::size_t>(m));
    ctrl.front() = a;
    ctrl.back() = b;
    const int k = m - 2;
    Eigen::MatrixXd Hii = H.block(1, 1, k, k);
    Eigen::MatrixXd r = rhs.block(1, 0, k, 3);
    for (int c = 0; c < 3; ++c) {
        r.col(c) -= H.block(1, 0, k, 1) * a[c];
        r.col(c) -= H.block(1, m - 1, k, 1) * b[c];
    }
    const Eigen::MatrixXd sol = Hii.colPivHouseholderQr().solve(r);
    for (int i = 0; i < k; ++i) ctrl[static_cast<std::size_t>(i + 1)] = {sol(i, 0), sol(i, 1), sol(i, 2)};
    return SplineCurve(std::move(knots), std::move(ctrl));
}

const char* modality_name(Modality m) { return m == Modality::CTA ? "CTA" : "MRA"; }

// ---------------------------------------------------------------------------------------------------------------
// Node resolution and path extraction

namespace {

Label side_label(Label segment, std::string_view type)
{
    const Label direct = label_from_name(type);
    if (direct != label::Background) return direct;
    const std::string_view seg = label_name(segment);
    if (seg.size() > 2 && (seg[0] == 'R' || seg[0] == 'L') && seg[1] == '-')
        return label_from_name(std::string(seg.substr(0, 2)) + std::string(type));
    return label::Background;
}

// Graph node incident to edges of both labels, lowest degree first.
std::optional<int> junction_between(const CenterlineGraph& g, Label a, Label b)
{
    std::optional<int> best;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        bool ha = false, hb = false;
        for (int e : g.incident(static_cast<int>(i))) {
            ha |= g.edges[static_cast<std::size_t>(e)].label == a;
            hb |= g.edges[static_cast<std::size_t>(e)].label == b;
        }
        if (ha && hb && (!best || g.nodes[i].degree < g.nodes[static_cast<std::size_t>(*best)].degree))
            best = static_cast<int>(i);
    }
    return best;
}

}  // namespace

std::optional<int> resolve_node(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes, Label segment,
                                const std::string& name)
{
    if (auto n = find_node(nodes, segment, name)) return n->id;
    constexpr std::string_view suffix = " boundary";
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        const Label other = side_label(segment, std::string_view(name).substr(0, name.size() - suffix.size()));
        if (other != label::Background) return junction_between(g, segment, other);
    }
    return std::nullopt;
}

namespace {

struct Step {
    int edge;
    bool forward;  // a -> b
};

// Shortest node path restricted to edges accepted by `allow`.
std::optional<std::vector<Step>> shortest_path(const CenterlineGraph& g, int from, int to,
                                               const std::function<bool(const GraphEdge&)>& allow)
{
    const std::size_t nn = g.nodes.size();
    std::vector<double> d(nn, std::numeric_limits<double>::infinity());
    std::vector<Step> via(nn, {-1, true});
    using QE = std::pair<double, int>;
    std::priority_queue<QE, std::vector<QE>, std::greater<>> q;
    d[static_cast<std::size_t>(from)] = 0.0;
    q.emplace(0.0, from);
    while (!q.empty()) {
        const auto [du, u] = q.top();
        q.pop();
        if (du > d[static_cast<std::size_t>(u)]) continue;
        if (u == to) break;
        for (int e : g.incident(u)) {
            const GraphEdge& edge = g.edges[static_cast<std::size_t>(e)];
            if (edge.is_loop() || !allow(edge)) continue;
            const int v = edge.other(u);
            const double nd = du + edge.length();
            if (nd < d[static_cast<std::size_t>(v)]) {
                d[static_cast<std::size_t>(v)] = nd;
                via[static_cast<std::size_t>(v)] = {e, edge.a == u};
                q.emplace(nd, v);
            }
        }
    }
    if (!std::isfinite(d[static_cast<std::size_t>(to)])) return std::nullopt;
    std::vector<Step> steps;
    for (int v = to; v != from;) {
        const Step s = via[static_cast<std::size_t>(v)];
        steps.push_back(s);
        const GraphEdge& e = g.edges[static_cast<std::size_t>(s.edge)];
        v = s.forward ? e.a : e.b;
    }
    std::reverse(steps.begin(), steps.end());
    return steps;
}

double at_or_nan(const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : kNaN; }

SegmentPath concatenate(const CenterlineGraph& g, const std::vector<Step>& steps, int from)
{
    SegmentPath p;
    std::vector<int> path_nodes{from};
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const GraphEdge& e = g.edges[static_cast<std::size_t>(steps[s].edge)];
        const std::size_t n = e.points.size();
        for (std::size_t k = (s == 0 ? 0 : 1); k < n; ++k) {
            const std::size_t i = steps[s].forward ? k : n - 1 - k;
            p.points.push_back(e.points[i]);
            p.ce.push_back(at_or_nan(e.ce_radius, i));
            p.mis.push_back(at_or_nan(e.mis_radius, i));
        }
        path_nodes.push_back(steps[s].forward ? e.b : e.a);
    }
    // Points within two local radii of a junction on the path see the neighbouring branch in their section.
    p.near_junction.assign(p.points.size(), 0);
    for (int nid : path_nodes) {
        if (g.nodes[static_cast<std::size_t>(nid)].degree < 3) continue;
        const Vec3 c = g.nodes[static_cast<std::size_t>(nid)].pos;
        for (std::size_t i = 0; i < p.points.size(); ++i)
            if (!std::isnan(p.ce[i]) && distance(p.points[i], c) < 2.0 * p.ce[i]) p.near_junction[i] = 1;
    }
    return p;
}

double lerp(double a, double b, double t)
{
    if (std::isnan(a)) return b;
    if (std::isnan(b)) return a;
    return a + (b - a) * t;
}

// Sub-path between arc positions s0 < s1.
SegmentPath cut(const SegmentPath& in, double s0, double s1)
{
    SegmentPath out;
    std::vector<double> arc(in.points.size(), 0.0);
    for (std::size_t i = 1; i < in.points.size(); ++i) arc[i] = arc[i - 1] + distance(in.points[i - 1], in.points[i]);
    auto push_interp = [&](double s) {
        auto it = std::upper_bound(arc.begin(), arc.end(), s);
        std::size_t hi = static_cast<std::size_t>(it - arc.begin());
        if (hi == 0) hi = 1;
        if (hi >= arc.size()) hi = arc.size() - 1;
        const std::size_t lo = hi - 1;
        const double len = arc[hi] - arc[lo];
        const double t = len > 0.0 ? std::clamp((s - arc[lo]) / len, 0.0, 1.0) : 0.0;
        out.points.push_back(in.points[lo] + (in.points[hi] - in.points[lo]) * t);
        out.ce.push_back(lerp(in.ce[lo], in.ce[hi], t));
        out.mis.push_back(lerp(in.mis[lo], in.mis[hi], t));
        out.near_junction.push_back(t < 0.5 ? in.near_junction[lo] : in.near_junction[hi]);
    };
    constexpr double eps = 1e-9;
    push_interp(s0);
    for (std::size_t i = 0; i < in.points.size(); ++i) {
        if (arc[i] > s0 + eps && arc[i] < s1 - eps) {
            out.points.push_back(in.points[i]);
            out.ce.push_back(in.ce[i]);
            out.mis.push_back(in.mis[i]);
            out.near_junction.push_back(in.near_junction[i]);
        }
    }
    push_interp(s1);
    return out;
}

}  // namespace

std::optional<SegmentPath> extract_segment_path(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                                const SegmentDefinition& def)
{
    const auto from = resolve_node(g, nodes, def.origin_segment, def.origin_node);
    const auto to = resolve_node(g, nodes, def.target_segment, def.target_node);
    if (!from || !to || *from == *to) return std::nullopt;
    const auto steps = shortest_path(g, *from, *to, [&](const GraphEdge& e) { return e.label == def.label; });
    if (!steps || steps->empty()) return std::nullopt;
    SegmentPath full = concatenate(g, *steps, *from);
    const double total = polyline_length(full.points);
    const double s0 = def.offset_mm;
    const double s1 = def.max_length_mm ? std::min(total, s0 + *def.max_length_mm) : total;
    if (s0 >= total || s1 - s0 <= 1e-9) return std::nullopt;
    if (s0 <= 0.0 && s1 >= total) return full;
    return cut(full, s0, s1);
}

SegmentFeatures features_from_path(const std::string& name, const SegmentPath& path, const SplineOptions& opt)
{
    SegmentFeatures f;
    f.name = name;
    if (path.points.size() < 2) return f;
    f.present = true;
    const SplineCurve sp = fit_segment_spline(path.points, opt);
    f.length_mm = sp.length();
    f.endpoint_distance_mm = distance(path.points.front(), path.points.back());
    f.tortuosity = f.endpoint_distance_mm > 0.0 ? f.length_mm / f.endpoint_distance_mm - 1.0 : kNaN;
    f.mean_curvature_per_mm = sp.mean_curvature();

    if (path.ce.size() == path.points.size()) {
        std::vector<double> core, all;
        for (std::size_t i = 0; i < path.ce.size(); ++i) {
            if (std::isnan(path.ce[i])) continue;
            all.push_back(path.ce[i]);
            if (i >= path.near_junction.size() || !path.near_junction[i]) core.push_back(path.ce[i]);
        }
        if (core.empty()) core = all;
        if (!core.empty()) f.median_radius_mm = percentile(core, 50.0);
        if (all.size() == path.ce.size()) {
            double vol = 0.0;
            for (std::size_t i = 0; i + 1 < path.points.size(); ++i) {
                const double r0 = path.ce[i], r1 = path.ce[i + 1];
                vol += M_PI * (r0 * r0 + r1 * r1) / 2.0 * distance(path.points[i], path.points[i + 1]);
            }
            f.volume_mm3 = vol;
        }
    }
    return f;
}

SegmentFeatures compute_segment_features(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                         const SegmentDefinition& def, const SplineOptions& opt)
{
    const auto path = extract_segment_path(g, nodes, def);
    if (!path) {
        SegmentFeatures f;
        f.name = def.name;
        return f;
    }
    return features_from_path(def.name, *path, opt);
}

std::vector<SegmentDefinition> define_subsegments(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                                  const VariantReport& variants, Modality modality)
{
    (void)g;
    std::vector<SegmentDefinition> defs;
    auto add = [&defs](std::string name, Label l, Label os, std::string on, Label ts, std::string tn, double offset,
                       std::optional<double> cap) {
        defs.push_back({std::move(name), l, os, std::move(on), ts, std::move(tn), offset, cap});
    };
    const double c6_cap = modality == Modality::CTA ? kC6CapCtaMm : kCapMm;

    add("BA", label::BA, label::BA, "BA bifurcation", label::BA, "BA start", 0.0, kCapMm);
    for (Side s : {Side::Right, Side::Left}) {
        const std::string p = s == Side::Right ? "R-" : "L-";
        const Label P = pca(s);
        if (find_node(nodes, P, "Pcom bifurcation")) {
            add(p + "P1", P, P, "BA boundary", P, "Pcom bifurcation", 0.0, std::nullopt);
            add(p + "P2", P, P, "Pcom bifurcation", P, "PCA end", 0.0, kCapMm);
        } else {
            add(p + "P1", P, P, "BA boundary", P, "PCA end", 0.0, kP1FallbackMm);
            add(p + "P2", P, P, "BA boundary", P, "PCA end", kP1FallbackMm, kCapMm);
        }
    }
    for (Side s : {Side::Right, Side::Left}) {
        const std::string p = s == Side::Right ? "R-" : "L-";
        const Label I = ica(s);
        if (find_node(nodes, I, "Pcom bifurcation")) {
            add(p + "C6", I, I, "Pcom bifurcation", I, "ICA start", 0.0, c6_cap);
            add(p + "C7", I, I, "Pcom bifurcation", I, "ICA bifurcation", 0.0, std::nullopt);
        } else {
            add(p + "C6", I, I, "ICA bifurcation", I, "ICA start", kC7FallbackMm, c6_cap);
            add(p + "C7", I, I, "ICA bifurcation", I, "ICA start", 0.0, kC7FallbackMm);
        }
    }
    for (Side s : {Side::Right, Side::Left}) {
        const std::string p = s == Side::Right ? "R-" : "L-";
        add(p + "MCA", mca(s), mca(s), "ICA boundary", mca(s), "MCA end", 0.0, kCapMm);
    }
    for (Side s : {Side::Right, Side::Left}) {
        const bool present = s == Side::Right ? variants.r_pcom : variants.l_pcom;
        const std::string p = s == Side::Right ? "R-" : "L-";
        if (present) add(p + "Pcom", pcom(s), pcom(s), "ICA boundary", pcom(s), "PCA boundary", 0.0, std::nullopt);
    }
    if (variants.acom)
        add("Acom", label::Acom, label::Acom, "R-ACA boundary", label::Acom, "L-ACA boundary", 0.0, std::nullopt);
    for (Side s : {Side::Right, Side::Left}) {
        const std::string p = s == Side::Right ? "R-" : "L-";
        const Label A = aca(s);
        if (find_node(nodes, A, "Acom bifurcation")) {
            add(p + "A1", A, A, "ICA boundary", A, "Acom bifurcation", 0.0, std::nullopt);
            add(p + "A2", A, A, "Acom bifurcation", A, "ACA end", 0.0, kCapMm);
        } else {
            add(p + "A1", A, A, "ICA boundary", A, "ACA end", 0.0, kA1FallbackMm);
            add(p + "A2", A, A, "ICA boundary", A, "ACA end", kA1FallbackMm, kCapMm);
        }
    }
    if (variants.third_a2)
        add("3rd-A2", label::ThirdA2, label::ThirdA2, "Acom boundary", label::ThirdA2, "3rd-A2 end", 0.0, kCapMm);
    return defs;
}

// ---------------------------------------------------------------------------------------------------------------
// Bifurcations

double exponent_residual(double r_p, double r_c1, double r_c2, double x)
{
    return std::abs(1.0 - std::pow(r_c1 / r_p, x) - std::pow(r_c2 / r_p, x));
}

double solve_bifurcation_exponent(double r_p, double r_c1, double r_c2)
{
    if (!(r_p > 0.0 && r_c1 > 0.0 && r_c2 > 0.0)) throw NoExponent("radii must be positive");
    if (!(r_p > std::max(r_c1, r_c2))) throw NoExponent("r_p > max(r_c1, r_c2) violated");
    if (!(r_c1 + r_c2 > r_p)) throw NoExponent("r_c1 + r_c2 > r_p violated");
    // f decreases in x; f(1) > 0 from the second condition.
    auto f = [&](double x) { return std::pow(r_c1 / r_p, x) + std::pow(r_c2 / r_p, x) - 1.0; };
    double lo = 0.1, hi = 20.0;
    if (f(lo) < 0.0 || f(hi) > 0.0) throw NoExponent("no root on [0.1, 20]");
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double v = f(mid);
        if (std::abs(v) < 1e-12 || hi - lo < 1e-15) break;
        (v > 0.0 ? lo : hi) = mid;
    }
    if (exponent_residual(r_p, r_c1, r_c2, mid) >= 1e-9) throw NoExponent("bisection did not converge");
    return mid;
}

namespace {

struct Branch {
    std::vector<Vec3> points;
    std::vector<double> ce;
    std::vector<double> arc;
    std::vector<Label> label;
    double boundary = -1.0;  // arc length where the label first differs from the owner
    Label child = 0;         // first label differing from the owner
};

// Polyline leaving `node` along edge `e`, continued through degree-2 nodes up to `max_mm`.
// Points shared by two edges take the later edge's values once the owner label is left.
Branch walk_branch(const CenterlineGraph& g, int node, int e, Label owner, double max_mm)
{
    Branch b;
    b.points.push_back(g.nodes[static_cast<std::size_t>(node)].pos);
    b.arc.push_back(0.0);
    int cur = node;
    for (int guard = 0; guard < 10000; ++guard) {
        const GraphEdge& edge = g.edges[static_cast<std::size_t>(e)];
        if (b.boundary < 0.0 && edge.label != owner) {
            b.boundary = b.arc.back();
            b.child = edge.label;
        }
        const bool fwd = edge.a == cur;
        const std::size_t n = edge.points.size();
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = fwd ? k : n - 1 - k;
            if (k == 0) {
                if (b.ce.empty() || edge.label != owner) {
                    if (b.ce.empty()) {
                        b.ce.push_back(0.0);
                        b.label.push_back(0);
                    }
                    b.ce.back() = at_or_nan(edge.ce_radius, i);
                    b.label.back() = edge.label;
                }
                continue;
            }
            b.arc.push_back(b.arc.back() + distance(b.points.back(), edge.points[i]));
            b.points.push_back(edge.points[i]);
            b.ce.push_back(at_or_nan(edge.ce_radius, i));
            b.label.push_back(edge.label);
        }
        const int next = edge.other(cur);
        if (b.arc.back() >= max_mm || next == node || g.nodes[static_cast<std::size_t>(next)].degree != 2) break;
        int ne = -1;
        for (int x : g.incident(next))
            if (x != e) ne = x;
        if (ne < 0) break;
        cur = next;
        e = ne;
    }
    return b;
}

Vec3 point_at(const Branch& b, double s, bool* reduced)
{
    if (s >= b.arc.back()) {
        if (reduced && s > b.arc.back() + 1e-9) *reduced = true;
        return b.points.back();
    }
    const auto it = std::upper_bound(b.arc.begin(), b.arc.end(), s);
    const std::size_t hi = static_cast<std::size_t>(it - b.arc.begin());
    const std::size_t lo = hi - 1;
    const double t = (s - b.arc[lo]) / (b.arc[hi] - b.arc[lo]);
    return b.points[lo] + (b.points[hi] - b.points[lo]) * t;
}

// Mean CE of three consecutive points carrying `want`, centred on the one nearest to arc s.
std::optional<double> radius_at(const Branch& b, double s, Label want, int* used)
{
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < b.arc.size(); ++i)
        if (b.label[i] == want) idx.push_back(i);
    if (used) *used = 0;
    if (idx.empty()) return std::nullopt;
    std::size_t best = 0;
    for (std::size_t j = 1; j < idx.size(); ++j)
        if (std::abs(b.arc[idx[j]] - s) < std::abs(b.arc[idx[best]] - s)) best = j;
    const std::size_t m = idx.size();
    const std::size_t lo = m < 3 ? 0 : std::min(best > 0 ? best - 1 : 0, m - 3);
    const std::size_t hi = std::min(lo + 2, m - 1);
    double sum = 0.0;
    int n = 0;
    for (std::size_t j = lo; j <= hi; ++j)
        if (!std::isnan(b.ce[idx[j]])) {
            sum += b.ce[idx[j]];
            ++n;
        }
    if (used) *used = n;
    if (n == 0) return std::nullopt;
    return sum / n;
}

Label owner_label(const CenterlineGraph& g, const BifurcationRoles& r)
{
    return g.edges[static_cast<std::size_t>(r.parent)].label;
}

}  // namespace

std::array<double, 3> compute_bifurcation_angles(const CenterlineGraph& g, const BifurcationRoles& roles,
                                                 double offset_mm, bool* reduced)
{
    const Label owner = owner_label(g, roles);
    const Vec3 c = g.nodes[static_cast<std::size_t>(roles.node)].pos;
    bool red = false;
    auto dir = [&](int e) {
        const Branch b = walk_branch(g, roles.node, e, owner, offset_mm + 1.0);
        return point_at(b, offset_mm, &red) - c;
    };
    const Vec3 p = dir(roles.parent), c1 = dir(roles.child1), c2 = dir(roles.child2);
    if (reduced) *reduced = red;
    return {angle_deg(p, c1), angle_deg(p, c2), angle_deg(c1, c2)};
}

void compute_bifurcation_radius_features(const CenterlineGraph& g, const BifurcationRoles& roles,
                                         BifurcationFeatures& out)
{
    constexpr double kSearchMm = 30.0;
    const Label owner = owner_label(g, roles);
    const Branch bp = walk_branch(g, roles.node, roles.parent, owner, kSearchMm);
    const Branch b1 = walk_branch(g, roles.node, roles.child1, owner, kSearchMm);
    const Branch b2 = walk_branch(g, roles.node, roles.child2, owner, kSearchMm);
    if (b1.boundary < 0.0 || b2.boundary < 0.0) {
        out.flags.push_back("child label boundary not found");
        return;
    }
    out.d1 = b1.boundary;
    out.d2 = b2.boundary;
    const double D = std::max(out.d1, out.d2);
    for (const Branch* b : {&bp, &b1, &b2})
        if (D > b->arc.back()) out.flags.push_back("branch shorter than sampling distance");
    int n0 = 0, n1 = 0, n2 = 0;
    const auto rp = radius_at(bp, D, owner, &n0);
    const auto r1 = radius_at(b1, D, b1.child, &n1);
    const auto r2 = radius_at(b2, D, b2.child, &n2);
    if (!rp || !r1 || !r2) {
        out.flags.push_back("radius unavailable");
        return;
    }
    out.n_average = std::min({n0, n1, n2});
    out.has_radius = true;
    out.r_p = *rp;
    out.r_c1 = *r1;
    out.r_c2 = *r2;
    out.ratio_c1_p = out.r_c1 / out.r_p;
    out.ratio_c2_p = out.r_c2 / out.r_p;
    out.ratio_c1_c2 = out.r_c1 / out.r_c2;
    out.radius_sum_ratio = out.r_p / (out.r_c1 + out.r_c2);
    out.area_sum_ratio = (out.r_p * out.r_p) / (out.r_c1 * out.r_c1 + out.r_c2 * out.r_c2);
    try {
        out.exponent = solve_bifurcation_exponent(out.r_p, out.r_c1, out.r_c2);
    } catch (const NoExponent& e) {
        out.flags.push_back(std::string("no exponent: ") + e.what());
    }
}

namespace {

struct Remaining {};
using RoleTarget = std::variant<Label, std::pair<Label, std::string>, Remaining>;

// First edge leaving `node` on the shortest route to each target.
std::optional<int> first_edge_toward(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes, int node,
                                     const RoleTarget& target)
{
    const std::size_t nn = g.nodes.size();
    std::vector<double> d(nn, std::numeric_limits<double>::infinity());
    std::vector<int> first(nn, -1);
    using QE = std::pair<double, int>;
    std::priority_queue<QE, std::vector<QE>, std::greater<>> q;
    d[static_cast<std::size_t>(node)] = 0.0;
    q.emplace(0.0, node);
    while (!q.empty()) {
        const auto [du, u] = q.top();
        q.pop();
        if (du > d[static_cast<std::size_t>(u)]) continue;
        for (int e : g.incident(u)) {
            const GraphEdge& edge = g.edges[static_cast<std::size_t>(e)];
            if (edge.is_loop()) continue;
            const int v = edge.other(u);
            const double nd = du + edge.length();
            if (nd < d[static_cast<std::size_t>(v)]) {
                d[static_cast<std::size_t>(v)] = nd;
                first[static_cast<std::size_t>(v)] = u == node ? e : first[static_cast<std::size_t>(u)];
                q.emplace(nd, v);
            }
        }
    }
    if (const auto* l = std::get_if<Label>(&target)) {
        double best = std::numeric_limits<double>::infinity();
        int best_e = -1;
        for (std::size_t i = 0; i < g.edges.size(); ++i) {
            const GraphEdge& e = g.edges[i];
            if (e.label != *l || e.is_loop()) continue;
            double cost;
            int fe;
            if (e.a == node || e.b == node) {
                cost = 0.0;
                fe = static_cast<int>(i);
            } else {
                const int near = d[static_cast<std::size_t>(e.a)] <= d[static_cast<std::size_t>(e.b)] ? e.a : e.b;
                cost = d[static_cast<std::size_t>(near)];
                fe = first[static_cast<std::size_t>(near)];
            }
            if (fe >= 0 && cost < best) {
                best = cost;
                best_e = fe;
            }
        }
        if (best_e >= 0) return best_e;
        return std::nullopt;
    }
    if (const auto* nt = std::get_if<std::pair<Label, std::string>>(&target)) {
        const auto id = resolve_node(g, nodes, nt->first, nt->second);
        if (!id || *id == node || first[static_cast<std::size_t>(*id)] < 0) return std::nullopt;
        return first[static_cast<std::size_t>(*id)];
    }
    return std::nullopt;
}

}  // namespace

std::optional<BifurcationRoles> bifurcation_roles(const CenterlineGraph& g, const std::vector<AnatomicalNode>& nodes,
                                                  const std::string& which, Side side)
{
    Label seg;
    std::string node_name;
    RoleTarget p, c1, c2;
    if (which == "BA") {
        seg = label::BA;
        node_name = "BA bifurcation";
        p = std::pair{label::BA, std::string("BA start")};
        c1 = label::RPCA;
        c2 = label::LPCA;
    } else if (which == "ICA") {
        seg = ica(side);
        node_name = "ICA bifurcation";
        p = std::pair{seg, std::string("ICA start")};
        c1 = mca(side);
        c2 = aca(side);
    } else if (which == "PCA-Pcom") {
        seg = pca(side);
        node_name = "Pcom bifurcation";
        p = label::BA;
        c1 = Remaining{};
        c2 = pcom(side);
    } else if (which == "ICA-Pcom") {
        seg = ica(side);
        node_name = "Pcom bifurcation";
        p = std::pair{seg, std::string("ICA start")};
        c1 = Remaining{};
        c2 = pcom(side);
    } else if (which == "ACA-Acom") {
        seg = aca(side);
        node_name = "Acom bifurcation";
        p = ica(side);
        c1 = Remaining{};
        c2 = label::Acom;
    } else {
        throw std::invalid_argument("unknown bifurcation '" + which + "'");
    }
    const auto an = find_node(nodes, seg, node_name);
    if (!an) return std::nullopt;
    BifurcationRoles r;
    r.node = an->id;
    std::vector<int> used;
    auto resolve = [&](const RoleTarget& t) -> int {
        if (std::holds_alternative<Remaining>(t)) return -1;
        const auto e = first_edge_toward(g, nodes, r.node, t);
        if (!e || std::find(used.begin(), used.end(), *e) != used.end()) return -2;
        used.push_back(*e);
        return *e;
    };
    r.parent = resolve(p);
    r.child1 = resolve(c1);
    r.child2 = resolve(c2);
    for (int* slot : {&r.parent, &r.child1, &r.child2}) {
        if (*slot != -1) continue;
        for (int e : g.incident(r.node)) {
            if (g.edges[static_cast<std::size_t>(e)].is_loop()) continue;
            if (std::find(used.begin(), used.end(), e) == used.end()) {
                *slot = e;
                used.push_back(e);
                break;
            }
        }
    }
    if (r.parent < 0 || r.child1 < 0 || r.child2 < 0) return std::nullopt;
    return r;
}

std::vector<BifurcationFeatures> compute_all_bifurcations(const CenterlineGraph& g,
                                                          const std::vector<AnatomicalNode>& nodes)
{
    struct Item {
        std::string name, which;
        Side side;
        bool major;
    };
    const std::vector<Item> items{
        {"BA bifurcation", "BA", Side::Right, true},
        {"R-ICA bifurcation", "ICA", Side::Right, true},
        {"L-ICA bifurcation", "ICA", Side::Left, true},
        {"R-PCA Pcom bifurcation", "PCA-Pcom", Side::Right, false},
        {"L-PCA Pcom bifurcation", "PCA-Pcom", Side::Left, false},
        {"R-ICA Pcom bifurcation", "ICA-Pcom", Side::Right, false},
        {"L-ICA Pcom bifurcation", "ICA-Pcom", Side::Left, false},
        {"R-ACA Acom bifurcation", "ACA-Acom", Side::Right, false},
        {"L-ACA Acom bifurcation", "ACA-Acom", Side::Left, false},
    };
    std::vector<BifurcationFeatures> out;
    for (const Item& it : items) {
        BifurcationFeatures f;
        f.name = it.name;
        f.major = it.major;
        const auto roles = bifurcation_roles(g, nodes, it.which, it.side);
        if (roles) {
            f.present = true;
            f.angles_deg = compute_bifurcation_angles(g, *roles, 1.0, &f.reduced_offset);
            if (f.reduced_offset) f.flags.push_back("reduced angle offset");
            if (it.major) compute_bifurcation_radius_features(g, *roles, f);
        }
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace cow
