#include "retscreen/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "retscreen/error.hpp"

namespace retscreen::attribution {

void ClusterParams::validate() const {
    require(eps > 0.0, "cluster eps must be > 0");
    require(min_size >= 2, "cluster min_size must be >= 2");
    require(salience_percentile >= 0.0 && salience_percentile <= 100.0, "salience percentile must lie in [0,100]");
    require(max_points >= 1, "max_points must be >= 1");
}

std::vector<QuadratureNode> gauss_legendre_unit(int n) {
    require(n >= 1, "quadrature needs at least one node");
    std::vector<QuadratureNode> nodes(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Legendre recurrence for P_n(x) and P_n'(x)
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double pn = n == 1 ? x : p1;
            const double pn_1 = n == 1 ? 1.0 : p0;
            dp = n * (x * pn - pn_1) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[static_cast<std::size_t>(n - 1 - i)] = {(x + 1.0) / 2.0, w / 2.0};
    }
    return nodes;
}

AttributionMap integrated_gradients(const inference::InferenceBackend& backend, const inference::Tensor& input,
                                    const inference::Tensor& baseline, inference::OutputSelector output, int steps) {
    if (!backend.supports_gradients()) {
        fail(ErrorKind::Unsupported, "backend '" + backend.name() + "' does not provide gradient attribution");
    }
    require(input.same_shape(baseline), "integrated gradients: baseline shape differs from input");
    require(steps >= 1, "integrated gradients: steps must be >= 1");

    std::vector<double> avg_grad(input.values.size(), 0.0);
    inference::Tensor point(input.height, input.width, input.channels);
    for (const auto& node : gauss_legendre_unit(steps)) {
        for (std::size_t i = 0; i < point.values.size(); ++i) {
            point.values[i] = baseline.values[i] + node.alpha * (input.values[i] - baseline.values[i]);
        }
        const auto grad = backend.gradient(point, output);
        require(grad.same_shape(input), "backend gradient has the wrong shape");
        for (std::size_t i = 0; i < avg_grad.size(); ++i) avg_grad[i] += node.weight * grad.values[i];
    }

    AttributionMap map;
    map.height = input.height;
    map.width = input.width;
    map.values.assign(static_cast<std::size_t>(input.height) * input.width, 0.0);
    for (std::size_t p = 0; p < map.values.size(); ++p) {
        double acc = 0.0;
        for (int c = 0; c < input.channels; ++c) {
            const std::size_t i = p * input.channels + c;
            acc += (input.values[i] - baseline.values[i]) * avg_grad[i];
        }
        map.values[p] = acc;
    }
    return map;
}

AttributionMap integrated_gradients(const inference::InferenceBackend& backend, const RgbImage& image,
                                    inference::OutputSelector output, int steps) {
    if (!backend.supports_gradients()) {
        fail(ErrorKind::Unsupported, "backend '" + backend.name() + "' does not provide gradient attribution");
    }
    const auto input = backend.model_input(image);
    const inference::Tensor baseline(input.height, input.width, input.channels, 0.0);
    auto map = integrated_gradients(backend, input, baseline, output, steps);
    map.baseline_id = "black";
    return map;
}

std::vector<Point> extract_salient_points(const AttributionMap& map, const ClusterParams& params) {
    params.validate();
    std::vector<double> positive;
    for (double v : map.values) {
        if (v > 0.0) positive.push_back(v);
    }
    if (positive.empty()) return {};
    std::sort(positive.begin(), positive.end());
    const double n = static_cast<double>(positive.size());
    auto rank = static_cast<std::size_t>(std::ceil(params.salience_percentile * n / 100.0 - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, positive.size());
    const double cutoff = positive[rank - 1];

    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (map.values[i] > 0.0 && map.values[i] >= cutoff) selected.push_back(i);
    }
    if (selected.size() > params.max_points) {
        std::stable_sort(selected.begin(), selected.end(),
                         [&](auto a, auto b) { return map.values[a] > map.values[b]; });
        selected.resize(params.max_points);
        std::sort(selected.begin(), selected.end());
    }
    std::vector<Point> points;
    points.reserve(selected.size());
    for (auto i : selected) {
        points.push_back({static_cast<double>(i % map.width), static_cast<double>(i / map.width)});
    }
    return points;
}

namespace {

struct Neighbor {
    std::size_t index;
    double distance;
};

// Radius neighbourhoods (self included) via a uniform grid of cell size eps.
std::vector<std::vector<Neighbor>> radius_neighbors(std::span<const Point> points, double eps) {
    struct CellKey {
        long long x, y;
        bool operator==(const CellKey&) const = default;
    };
    struct CellHash {
        std::size_t operator()(const CellKey& k) const {
            return std::hash<long long>()(k.x * 73856093LL ^ k.y * 19349663LL);
        }
    };
    std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
    auto cell_of = [eps](const Point& p) {
        return CellKey{static_cast<long long>(std::floor(p.x / eps)), static_cast<long long>(std::floor(p.y / eps))};
    };
    for (std::size_t i = 0; i < points.size(); ++i) grid[cell_of(points[i])].push_back(i);

    std::vector<std::vector<Neighbor>> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto c = cell_of(points[i]);
        for (long long dy = -1; dy <= 1; ++dy) {
            for (long long dx = -1; dx <= 1; ++dx) {
                const auto it = grid.find({c.x + dx, c.y + dy});
                if (it == grid.end()) continue;
                for (auto j : it->second) {
                    const double d = std::hypot(points[i].x - points[j].x, points[i].y - points[j].y);
                    if (d <= eps) out[i].push_back({j, d});
                }
            }
        }
        std::sort(out[i].begin(), out[i].end(), [](const Neighbor& a, const Neighbor& b) {
            return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
        });
    }
    return out;
}

}  // namespace

OpticsResult optics(std::span<const Point> points, double eps, int min_samples) {
    require(eps > 0.0 && min_samples >= 1, "optics: eps must be > 0 and min_samples >= 1");
    const std::size_t n = points.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    OpticsResult result;
    result.reachability.assign(n, inf);
    result.core_distance.assign(n, inf);
    result.ordering.reserve(n);
    if (n == 0) return result;

    const auto neighbors = radius_neighbors(points, eps);
    for (std::size_t i = 0; i < n; ++i) {
        if (neighbors[i].size() >= static_cast<std::size_t>(min_samples)) {
            result.core_distance[i] = neighbors[i][static_cast<std::size_t>(min_samples) - 1].distance;
        }
    }

    std::vector<bool> processed(n, false);
    for (std::size_t step = 0; step < n; ++step) {
        // Unprocessed point with the smallest reachability; lowest index on ties.
        std::size_t point = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (processed[i]) continue;
            if (point == n || result.reachability[i] < result.reachability[point]) point = i;
        }
        processed[point] = true;
        result.ordering.push_back(point);
        const double core = result.core_distance[point];
        if (core == inf) continue;
        for (const auto& nb : neighbors[point]) {
            if (processed[nb.index]) continue;
            const double reach = std::max(core, nb.distance);
            if (reach < result.reachability[nb.index]) result.reachability[nb.index] = reach;
        }
    }
    return result;
}

namespace {

bool point_less(const Point& a, const Point& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; }

// Kuhn augmenting path: gives `slot` a border point, displacing earlier
// choices when they have an alternative.
bool augment(std::size_t slot, const std::vector<std::vector<std::size_t>>& options,
             std::vector<std::ptrdiff_t>& owner, std::vector<bool>& visited) {
    for (auto b : options[slot]) {
        if (visited[b]) continue;
        visited[b] = true;
        if (owner[b] < 0 || augment(static_cast<std::size_t>(owner[b]), options, owner, visited)) {
            owner[b] = static_cast<std::ptrdiff_t>(slot);
            return true;
        }
    }
    return false;
}

}  // namespace

Clustering cluster_points(std::span<const Point> points, const ClusterParams& params) {
    params.validate();
    const std::size_t n = points.size();
    Clustering out;
    out.labels.assign(n, -1);
    if (n == 0) return out;

    // Core points grouped by the eps cut of the reachability ordering.
    const auto res = optics(points, params.eps, params.min_size);
    std::vector<std::vector<std::size_t>> cores;
    std::vector<int> core_group(n, -1);
    for (auto p : res.ordering) {
        if (res.core_distance[p] > params.eps) continue;
        if (res.reachability[p] > params.eps || cores.empty()) cores.emplace_back();
        cores.back().push_back(p);
        core_group[p] = static_cast<int>(cores.size()) - 1;
    }

    // Number groups by their smallest point so the result ignores input order.
    std::vector<std::size_t> rank(cores.size());
    {
        std::vector<std::size_t> order(cores.size());
        std::iota(order.begin(), order.end(), 0);
        auto lowest = [&](std::size_t g) {
            return *std::min_element(cores[g].begin(), cores[g].end(), [&](auto a, auto b) {
                return point_less(points[a], points[b]) || (!point_less(points[b], points[a]) && a < b);
            });
        };
        std::vector<std::size_t> low(cores.size());
        for (std::size_t g = 0; g < cores.size(); ++g) low[g] = lowest(g);
        std::sort(order.begin(), order.end(),
                  [&](auto a, auto b) { return point_less(points[low[a]], points[low[b]]); });
        for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
    }
    std::vector<std::vector<std::size_t>> groups(cores.size());
    for (std::size_t g = 0; g < cores.size(); ++g) groups[rank[g]] = cores[g];
    for (std::size_t i = 0; i < n; ++i) {
        if (core_group[i] >= 0) core_group[i] = static_cast<int>(rank[static_cast<std::size_t>(core_group[i])]);
    }

    // Border points and the groups they could join.
    const auto neighbors = radius_neighbors(points, params.eps);
    std::vector<std::vector<std::size_t>> candidates(n);
    std::vector<std::size_t> borders;
    for (std::size_t i = 0; i < n; ++i) {
        if (core_group[i] >= 0) continue;
        for (const auto& nb : neighbors[i]) {
            const int g = core_group[nb.index];
            if (g >= 0 && std::find(candidates[i].begin(), candidates[i].end(), g) == candidates[i].end()) {
                candidates[i].push_back(static_cast<std::size_t>(g));
            }
        }
        if (!candidates[i].empty()) borders.push_back(i);
    }
    std::sort(borders.begin(), borders.end(), [&](auto a, auto b) {
        return point_less(points[a], points[b]) || (!point_less(points[b], points[a]) && a < b);
    });

    // First satisfy the minimum size of every group from its possible borders,
    // then send the rest to the group of the nearest core point.
    const auto min_size = static_cast<std::size_t>(params.min_size);
    std::vector<std::size_t> slot_group;
    std::vector<std::vector<std::size_t>> slot_options;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() >= min_size) continue;
        std::vector<std::size_t> options;
        for (auto b : borders) {
            if (std::find(candidates[b].begin(), candidates[b].end(), g) != candidates[b].end()) options.push_back(b);
        }
        for (std::size_t k = groups[g].size(); k < min_size; ++k) {
            slot_group.push_back(g);
            slot_options.push_back(options);
        }
    }
    std::vector<std::ptrdiff_t> owner(n, -1);
    for (std::size_t slot = 0; slot < slot_group.size(); ++slot) {
        std::vector<bool> visited(n, false);
        augment(slot, slot_options, owner, visited);
    }
    for (auto b : borders) {
        if (owner[b] >= 0) {
            groups[slot_group[static_cast<std::size_t>(owner[b])]].push_back(b);
            continue;
        }
        std::size_t best = candidates[b].front();
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& nb : neighbors[b]) {
            const int g = core_group[nb.index];
            if (g < 0) continue;
            if (nb.distance < best_d || (nb.distance == best_d && static_cast<std::size_t>(g) < best)) {
                best_d = nb.distance;
                best = static_cast<std::size_t>(g);
            }
        }
        groups[best].push_back(b);
    }

    // A group can still be short when its only borders are needed elsewhere.
    for (auto& members : groups) {
        if (members.size() < min_size) continue;
        std::sort(members.begin(), members.end());
        const int id = static_cast<int>(out.clusters.size());
        for (auto m : members) out.labels[m] = id;
        out.clusters.push_back(std::move(members));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (out.labels[i] < 0) out.noise.push_back(i);
    }
    return out;
}

std::vector<AnnotationCircle> clusters_to_annotations(const std::vector<std::vector<Point>>& clusters) {
    std::vector<std::size_t> order(clusters.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return clusters[a].size() > clusters[b].size(); });
    std::vector<AnnotationCircle> circles;
    for (auto k : order) {
        const auto& members = clusters[k];
        require(!members.empty(), "cannot annotate an empty cluster");
        double cx = 0.0, cy = 0.0;
        for (const auto& p : members) {
            cx += p.x;
            cy += p.y;
        }
        cx /= static_cast<double>(members.size());
        cy /= static_cast<double>(members.size());
        double spread = 0.0;
        for (const auto& p : members) spread = std::max(spread, std::hypot(p.x - cx, p.y - cy));
        circles.push_back({cx, cy, std::max(kMinAnnotationRadius, spread + kAnnotationPadding)});
    }
    return circles;
}

std::vector<AnnotationCircle> annotate(const AttributionMap& map, const ClusterParams& params) {
    const auto points = extract_salient_points(map, params);
    const auto clustering = cluster_points(points, params);
    std::vector<std::vector<Point>> groups;
    groups.reserve(clustering.clusters.size());
    for (const auto& c : clustering.clusters) {
        auto& g = groups.emplace_back();
        for (auto i : c) g.push_back(points[i]);
    }
    return clusters_to_annotations(groups);
}

}  // namespace retscreen::attribution
