#pragma once

// DAG representation, reachability, d-separation and the adjustment-set
// criterion, plus the two structural baselines SHD and SID.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contsid/errors.hpp"

namespace contsid {

using Node = std::size_t;
using Edge = std::pair<Node, Node>;

/// Sorted set of node indices.
class NodeSet {
public:
    NodeSet() = default;
    NodeSet(std::initializer_list<Node> nodes) : members_(nodes) { normalize(); }
    explicit NodeSet(std::vector<Node> nodes) : members_(std::move(nodes)) { normalize(); }

    [[nodiscard]] bool contains(Node v) const {
        return std::binary_search(members_.begin(), members_.end(), v);
    }
    [[nodiscard]] bool empty() const noexcept { return members_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return members_.size(); }
    [[nodiscard]] auto begin() const noexcept { return members_.begin(); }
    [[nodiscard]] auto end() const noexcept { return members_.end(); }
    [[nodiscard]] const std::vector<Node> &members() const noexcept { return members_; }

    void insert(Node v) {
        auto it = std::lower_bound(members_.begin(), members_.end(), v);
        if (it == members_.end() || *it != v) { members_.insert(it, v); }
    }

    [[nodiscard]] bool intersects(const NodeSet &other) const {
        return std::ranges::any_of(members_, [&](Node v) { return other.contains(v); });
    }

    friend bool operator==(const NodeSet &, const NodeSet &) = default;

private:
    void normalize() {
        std::ranges::sort(members_);
        members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    }

    std::vector<Node> members_;
};

/// Immutable directed acyclic graph over nodes 0..num_nodes-1.
class Dag {
public:
    /// Validates the edge list. Throws IndexError, CycleError (including
    /// self-loops) or DomainError (duplicate edge, zero nodes).
    Dag(std::size_t num_nodes, std::span<const Edge> edges)
        : num_nodes_(num_nodes), adjacency_(num_nodes * num_nodes, 0), parents_(num_nodes),
          children_(num_nodes) {
        if (num_nodes == 0) { throw DomainError("a DAG needs at least one node"); }
        for (const auto &[from, to] : edges) {
            if (from >= num_nodes || to >= num_nodes) {
                throw IndexError("edge " + std::to_string(from) + " -> " + std::to_string(to) +
                                 " out of range for " + std::to_string(num_nodes) + " nodes");
            }
            if (from == to) { throw CycleError("self-loop on node " + std::to_string(from)); }
            auto &cell = adjacency_[from * num_nodes + to];
            if (cell != 0) {
                throw DomainError("duplicate edge " + std::to_string(from) + " -> " + std::to_string(to));
            }
            cell = 1;
        }
        for (Node from = 0; from < num_nodes; ++from) {
            for (Node to = 0; to < num_nodes; ++to) {
                if (adjacency_[from * num_nodes + to] != 0) {
                    children_[from].push_back(to);
                    parents_[to].push_back(from);
                }
            }
        }
        compute_topological_order();
    }

    [[nodiscard]] std::size_t num_nodes() const noexcept { return num_nodes_; }

    [[nodiscard]] bool has_edge(Node from, Node to) const {
        check_node(from);
        check_node(to);
        return adjacency_[from * num_nodes_ + to] != 0;
    }

    [[nodiscard]] const std::vector<Node> &children(Node v) const {
        check_node(v);
        return children_[v];
    }

    [[nodiscard]] NodeSet parents(Node v) const {
        check_node(v);
        return NodeSet(parents_[v]);
    }

    [[nodiscard]] const std::vector<Node> &parent_list(Node v) const {
        check_node(v);
        return parents_[v];
    }

    /// Edges in row-major (from, to) order.
    [[nodiscard]] std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (Node from = 0; from < num_nodes_; ++from) {
            for (Node to : children_[from]) { out.emplace_back(from, to); }
        }
        return out;
    }

    [[nodiscard]] std::size_t num_edges() const {
        std::size_t count = 0;
        for (const auto &c : children_) { count += c.size(); }
        return count;
    }

    [[nodiscard]] const std::vector<Node> &topological_order() const noexcept { return topo_; }

    void check_node(Node v) const {
        if (v >= num_nodes_) {
            throw IndexError("node " + std::to_string(v) + " out of range for " +
                             std::to_string(num_nodes_) + " nodes");
        }
    }

    friend bool operator==(const Dag &a, const Dag &b) {
        return a.num_nodes_ == b.num_nodes_ && a.adjacency_ == b.adjacency_;
    }

private:
    void compute_topological_order() {
        std::vector<std::size_t> in_degree(num_nodes_);
        for (Node v = 0; v < num_nodes_; ++v) { in_degree[v] = parents_[v].size(); }
        std::deque<Node> ready;
        for (Node v = 0; v < num_nodes_; ++v) {
            if (in_degree[v] == 0) { ready.push_back(v); }
        }
        while (!ready.empty()) {
            const Node v = ready.front();
            ready.pop_front();
            topo_.push_back(v);
            for (Node c : children_[v]) {
                if (--in_degree[c] == 0) { ready.push_back(c); }
            }
        }
        if (topo_.size() != num_nodes_) { throw CycleError("edge set contains a directed cycle"); }
    }

    std::size_t num_nodes_;
    std::vector<std::uint8_t> adjacency_;
    std::vector<std::vector<Node>> parents_;
    std::vector<std::vector<Node>> children_;
    std::vector<Node> topo_;
};

inline Dag build_dag(std::size_t num_nodes, std::span<const Edge> edges) { return Dag(num_nodes, edges); }

inline Dag build_dag(std::size_t num_nodes, std::initializer_list<Edge> edges) {
    return Dag(num_nodes, std::span<const Edge>(edges.begin(), edges.size()));
}

namespace detail {

inline void require_distinct(Node i, Node j) {
    if (i == j) { throw DomainError("intervened and target node must differ"); }
}

template<typename Next>
NodeSet reach(const Dag &g, const NodeSet &start, Next &&next) {
    std::vector<std::uint8_t> seen(g.num_nodes(), 0);
    std::vector<Node> stack(start.begin(), start.end());
    for (Node v : start) {
        g.check_node(v);
        seen[v] = 1;
    }
    while (!stack.empty()) {
        const Node v = stack.back();
        stack.pop_back();
        for (Node w : next(v)) {
            if (seen[w] == 0) {
                seen[w] = 1;
                stack.push_back(w);
            }
        }
    }
    std::vector<Node> out;
    for (Node v = 0; v < g.num_nodes(); ++v) {
        if (seen[v] != 0) { out.push_back(v); }
    }
    return NodeSet(std::move(out));
}

}  // namespace detail

/// Descendants of every node in `start`, the nodes themselves included.
inline NodeSet descendants(const Dag &g, const NodeSet &start) {
    return detail::reach(g, start, [&](Node v) -> const std::vector<Node> & { return g.children(v); });
}

/// Ancestors of every node in `start`, the nodes themselves included.
inline NodeSet ancestors(const Dag &g, const NodeSet &start) {
    return detail::reach(g, start, [&](Node v) -> const std::vector<Node> & { return g.parent_list(v); });
}

inline bool has_directed_path(const Dag &g, Node i, Node j) {
    g.check_node(i);
    g.check_node(j);
    detail::require_distinct(i, j);
    return descendants(g, {i}).contains(j);
}

/// Nodes lying on at least one directed path i -> ... -> j (both endpoints
/// included), or the empty set when there is no such path.
inline NodeSet causal_nodes(const Dag &g, Node i, Node j) {
    g.check_node(i);
    g.check_node(j);
    detail::require_distinct(i, j);
    const NodeSet down = descendants(g, {i});
    if (!down.contains(j)) { return {}; }
    const NodeSet up = ancestors(g, {j});
    std::vector<Node> out;
    std::ranges::set_intersection(down.members(), up.members(), std::back_inserter(out));
    return NodeSet(std::move(out));
}

/// d-separation of x and y given z, by the reachable-trail ("Bayes ball")
/// traversal. x and y must not be members of z.
inline bool d_separated(const Dag &g, Node x, Node y, const NodeSet &z) {
    g.check_node(x);
    g.check_node(y);
    for (Node v : z) { g.check_node(v); }
    const NodeSet z_ancestors = ancestors(g, z);

    // State: node plus direction of arrival. kUp: reached from a child,
    // kDown: reached from a parent.
    enum Direction : std::uint8_t { kUp = 0, kDown = 1 };
    const std::size_t n = g.num_nodes();
    std::vector<std::uint8_t> visited(2 * n, 0);
    std::vector<std::pair<Node, Direction>> stack{{x, kUp}};
    while (!stack.empty()) {
        const auto [v, dir] = stack.back();
        stack.pop_back();
        if (visited[2 * v + dir] != 0) { continue; }
        visited[2 * v + dir] = 1;
        const bool observed = z.contains(v);
        if (!observed && v == y) { return false; }
        if (dir == kUp) {
            if (observed) { continue; }
            for (Node p : g.parent_list(v)) { stack.emplace_back(p, kUp); }
            for (Node c : g.children(v)) { stack.emplace_back(c, kDown); }
        } else {
            if (!observed) {
                for (Node c : g.children(v)) { stack.emplace_back(c, kDown); }
            }
            if (z_ancestors.contains(v)) {
                for (Node p : g.parent_list(v)) { stack.emplace_back(p, kUp); }
            }
        }
    }
    return true;
}

/// Graphical adjustment criterion for the ordered pair (i, j):
///  (a) no member of z descends from a node on a directed i -> j path other
///      than i itself;
///  (b) z d-separates i and j once the first edge of every directed i -> j
///      path has been removed (the proper back-door graph).
/// Throws OverlapError when z contains i or j.
inline bool is_valid_adjustment(const Dag &g, Node i, Node j, const NodeSet &z) {
    g.check_node(i);
    g.check_node(j);
    detail::require_distinct(i, j);
    for (Node v : z) { g.check_node(v); }
    if (z.contains(i) || z.contains(j)) {
        throw OverlapError("adjustment set must not contain the intervened or target node");
    }

    NodeSet on_path = causal_nodes(g, i, j);
    std::vector<Node> beyond_source;
    for (Node v : on_path) {
        if (v != i) { beyond_source.push_back(v); }
    }
    const NodeSet forbidden = descendants(g, NodeSet(beyond_source));
    if (z.intersects(forbidden)) { return false; }

    std::vector<Edge> kept;
    for (const Edge &e : g.edges()) {
        if (e.first == i && on_path.contains(e.second)) { continue; }
        kept.push_back(e);
    }
    const Dag back_door(g.num_nodes(), kept);
    return d_separated(back_door, i, j, z);
}

inline void require_same_size(const Dag &a, const Dag &b) {
    if (a.num_nodes() != b.num_nodes()) {
        throw SizeMismatchError("graphs have " + std::to_string(a.num_nodes()) + " and " +
                                std::to_string(b.num_nodes()) + " nodes");
    }
}

/// Structural Hamming distance: unordered node pairs whose edge status
/// (absent, forward, backward) differs; a reversal counts once.
inline std::size_t shd(const Dag &g1, const Dag &g2) {
    require_same_size(g1, g2);
    const auto status = [](const Dag &g, Node a, Node b) {
        return g.has_edge(a, b) ? 1 : (g.has_edge(b, a) ? 2 : 0);
    };
    std::size_t count = 0;
    for (Node a = 0; a < g1.num_nodes(); ++a) {
        for (Node b = a + 1; b < g1.num_nodes(); ++b) {
            if (status(g1, a, b) != status(g2, a, b)) { ++count; }
        }
    }
    return count;
}

/// Structural intervention distance: ordered pairs (i, j) for which the
/// learnt graph's parent adjustment of i mispredicts the effect on j under
/// the true graph. When j is a learnt parent of i the learnt graph predicts
/// no effect, which is wrong iff j descends from i in the true graph.
inline std::size_t sid(const Dag &g_true, const Dag &g_learnt) {
    require_same_size(g_true, g_learnt);
    const std::size_t n = g_true.num_nodes();
    std::size_t mistakes = 0;
    for (Node i = 0; i < n; ++i) {
        const NodeSet learnt_parents = g_learnt.parents(i);
        const NodeSet true_descendants = descendants(g_true, {i});
        for (Node j = 0; j < n; ++j) {
            if (j == i) { continue; }
            if (learnt_parents.contains(j)) {
                if (true_descendants.contains(j)) { ++mistakes; }
            } else if (!is_valid_adjustment(g_true, i, j, learnt_parents)) {
                ++mistakes;
            }
        }
    }
    return mistakes;
}

}  // namespace contsid
