#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace whflow {

/// Undirected edge stored once per unordered pair, i < j.  `omega` is the
/// kinetic edge weight, `omega_tilde` the Fisher-information edge weight.
struct Edge {
    int i = 0;
    int j = 0;
    double omega = 1.0;
    double omega_tilde = 1.0;
};

/// First violated invariant of (n_nodes, edges), or nullopt if the data
/// describes a valid graph: no self loops, no duplicate edges, strictly
/// positive weights, one connected component.
std::optional<std::string> validate(int n_nodes, const std::vector<Edge>& edges);

/// Connected weighted graph.  Immutable after construction; safe to share
/// across threads.
class WeightedGraph {
public:
    /// Builds adjacency and the boundary-node set (nodes of degree one).
    /// Edges with i > j are normalized to i < j.  Throws std::invalid_argument
    /// on any violated invariant.
    WeightedGraph(int n_nodes, std::vector<Edge> edges,
                  std::vector<double> node_positions = {});

    int n_nodes() const { return n_nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }

    /// Per-node list of (neighbor index, edge index).
    const std::vector<std::pair<int, int>>& neighbors(int node) const {
        return adjacency_[static_cast<size_t>(node)];
    }
    int degree(int node) const {
        return static_cast<int>(adjacency_[static_cast<size_t>(node)].size());
    }

    /// Nodes with exactly one incident edge (the set V_B).
    const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }

    bool has_positions() const { return !node_positions_.empty(); }
    const std::vector<double>& node_positions() const { return node_positions_; }

    double min_omega() const { return min_omega_; }
    double min_omega_tilde() const { return min_omega_tilde_; }

private:
    int n_nodes_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::pair<int, int>>> adjacency_;
    std::vector<int> boundary_nodes_;
    std::vector<double> node_positions_;
    double min_omega_ = 0.0;
    double min_omega_tilde_ = 0.0;
};

std::optional<std::string> validate(const WeightedGraph& g);

enum class LatticeBoundary { Periodic, Path };

/// 1-D lattice with spacing h and uniform weights omega = omega_tilde = 1/h^2.
/// Periodic lattices have n edges (cycle, n >= 3); path lattices n-1 edges
/// with boundary nodes {0, n-1} (n >= 2).  Node positions are i*h.
WeightedGraph build_lattice_1d(int n, double h, LatticeBoundary boundary);

/// BFS edge-count distances from `source` to every node.
std::vector<int> bfs_distances(const WeightedGraph& g, int source);

struct BoundaryMetrics {
    int kappa = 0;  ///< number of boundary nodes
    int d_max = 0;  ///< max distance between boundary nodes; graph diameter when kappa < 2
};

BoundaryMetrics boundary_metrics(const WeightedGraph& g);

/// Plain-text edge list: header line `nodes N`, then one `i j omega omega_tilde`
/// per line (0-based, whitespace separated, `#` comments allowed).
WeightedGraph read_graph(std::istream& in);
WeightedGraph load_graph(const std::string& path);
void write_graph(std::ostream& out, const WeightedGraph& g);

}  // namespace whflow
