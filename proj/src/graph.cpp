#include "whflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace whflow {

std::optional<std::string> validate(int n_nodes, const std::vector<Edge>& edges) {
    if (n_nodes < 1) return "graph must have at least one node";
    std::set<std::pair<int, int>> seen;
    for (const Edge& e : edges) {
        if (e.i < 0 || e.i >= n_nodes || e.j < 0 || e.j >= n_nodes)
            return "edge (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                   ") references a node outside [0," + std::to_string(n_nodes - 1) + "]";
        if (e.i == e.j)
            return "self-loop at node " + std::to_string(e.i);
        auto key = std::minmax(e.i, e.j);
        if (!seen.insert(key).second)
            return "duplicate edge (" + std::to_string(key.first) + "," +
                   std::to_string(key.second) + ")";
        if (!(e.omega > 0.0) || !(e.omega_tilde > 0.0))
            return "nonpositive weight on edge (" + std::to_string(e.i) + "," +
                   std::to_string(e.j) + ")";
    }
    // connectivity by BFS from node 0
    std::vector<std::vector<int>> adj(static_cast<size_t>(n_nodes));
    for (const Edge& e : edges) {
        adj[static_cast<size_t>(e.i)].push_back(e.j);
        adj[static_cast<size_t>(e.j)].push_back(e.i);
    }
    std::vector<char> visited(static_cast<size_t>(n_nodes), 0);
    std::deque<int> queue{0};
    visited[0] = 1;
    int reached = 1;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int w : adj[static_cast<size_t>(v)]) {
            if (!visited[static_cast<size_t>(w)]) {
                visited[static_cast<size_t>(w)] = 1;
                ++reached;
                queue.push_back(w);
            }
        }
    }
    if (reached != n_nodes) return "graph is disconnected";
    return std::nullopt;
}

WeightedGraph::WeightedGraph(int n_nodes, std::vector<Edge> edges,
                             std::vector<double> node_positions)
    : n_nodes_(n_nodes), edges_(std::move(edges)),
      node_positions_(std::move(node_positions)) {
    for (Edge& e : edges_) {
        if (e.i > e.j) std::swap(e.i, e.j);
    }
    if (auto violation = validate(n_nodes_, edges_))
        throw std::invalid_argument("invalid graph: " + *violation);
    if (!node_positions_.empty() &&
        node_positions_.size() != static_cast<size_t>(n_nodes_))
        throw std::invalid_argument("node_positions size does not match n_nodes");

    adjacency_.assign(static_cast<size_t>(n_nodes_), {});
    min_omega_ = edges_.empty() ? 1.0 : edges_.front().omega;
    min_omega_tilde_ = edges_.empty() ? 1.0 : edges_.front().omega_tilde;
    for (size_t k = 0; k < edges_.size(); ++k) {
        const Edge& e = edges_[k];
        adjacency_[static_cast<size_t>(e.i)].emplace_back(e.j, static_cast<int>(k));
        adjacency_[static_cast<size_t>(e.j)].emplace_back(e.i, static_cast<int>(k));
        min_omega_ = std::min(min_omega_, e.omega);
        min_omega_tilde_ = std::min(min_omega_tilde_, e.omega_tilde);
    }
    for (int v = 0; v < n_nodes_; ++v)
        if (degree(v) == 1) boundary_nodes_.push_back(v);
}

std::optional<std::string> validate(const WeightedGraph& g) {
    return validate(g.n_nodes(), g.edges());
}

WeightedGraph build_lattice_1d(int n, double h, LatticeBoundary boundary) {
    if (!(h > 0.0)) throw std::invalid_argument("lattice spacing h must be positive");
    int min_n = boundary == LatticeBoundary::Periodic ? 3 : 2;
    if (n < min_n)
        throw std::invalid_argument("lattice needs at least " + std::to_string(min_n) +
                                    " nodes");
    const double w = 1.0 / (h * h);
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, w, w});
    if (boundary == LatticeBoundary::Periodic) edges.push_back({0, n - 1, w, w});
    std::vector<double> pos(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) pos[static_cast<size_t>(i)] = i * h;
    return WeightedGraph(n, std::move(edges), std::move(pos));
}

std::vector<int> bfs_distances(const WeightedGraph& g, int source) {
    std::vector<int> dist(static_cast<size_t>(g.n_nodes()), -1);
    std::deque<int> queue{source};
    dist[static_cast<size_t>(source)] = 0;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (const auto& [w, e] : g.neighbors(v)) {
            if (dist[static_cast<size_t>(w)] < 0) {
                dist[static_cast<size_t>(w)] = dist[static_cast<size_t>(v)] + 1;
                queue.push_back(w);
            }
        }
    }
    return dist;
}

BoundaryMetrics boundary_metrics(const WeightedGraph& g) {
    BoundaryMetrics m;
    m.kappa = static_cast<int>(g.boundary_nodes().size());
    if (m.kappa >= 2) {
        for (int b : g.boundary_nodes()) {
            auto dist = bfs_distances(g, b);
            for (int c : g.boundary_nodes())
                m.d_max = std::max(m.d_max, dist[static_cast<size_t>(c)]);
        }
    } else {
        // No boundary pair exists (e.g. periodic lattice); report the diameter
        // and let the lower-bound module route to the periodic formula.
        for (int v = 0; v < g.n_nodes(); ++v) {
            auto dist = bfs_distances(g, v);
            m.d_max = std::max(m.d_max, *std::max_element(dist.begin(), dist.end()));
        }
    }
    return m;
}

WeightedGraph read_graph(std::istream& in) {
    std::string line;
    int n_nodes = -1;
    std::vector<Edge> edges;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;  // blank
        if (first == "nodes") {
            if (!(ls >> n_nodes))
                throw std::invalid_argument("graph line " + std::to_string(line_no) +
                                            ": malformed nodes header");
            continue;
        }
        Edge e;
        std::istringstream es(line);
        if (!(es >> e.i >> e.j >> e.omega >> e.omega_tilde))
            throw std::invalid_argument("graph line " + std::to_string(line_no) +
                                        ": expected `i j omega omega_tilde`");
        edges.push_back(e);
    }
    if (n_nodes < 0)
        throw std::invalid_argument("graph file is missing the `nodes N` header");
    return WeightedGraph(n_nodes, std::move(edges));
}

WeightedGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open graph file: " + path);
    return read_graph(in);
}

void write_graph(std::ostream& out, const WeightedGraph& g) {
    out << "nodes " << g.n_nodes() << "\n";
    out.precision(17);
    for (const Edge& e : g.edges())
        out << e.i << " " << e.j << " " << e.omega << " " << e.omega_tilde << "\n";
}

}  // namespace whflow
