#pragma once

#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mrfscreen/csv.hpp"
#include "mrfscreen/grise.hpp"
#include "mrfscreen/model.hpp"

namespace mrfscreen {

/// Unordered edges (i < j), 0-based.
using EdgeSet = std::set<std::pair<int, int>>;

namespace detail {

/// Edge decision from one node's stacked estimate: any block entry with
/// magnitude strictly above theta_min/3.
inline bool edge_present(const Eigen::VectorXd& vertex, const VertexLayout& layout, int j,
                         double theta_min) {
    const int off = layout.edge_offset(j);
    for (int l = 0; l < layout.k * layout.k; ++l)
        if (std::abs(vertex[off + l]) > theta_min / 3.0) return true;
    return false;
}

}  // namespace detail

/// Thresholded structure estimate: edge (i, j) is kept iff the lower-indexed
/// node's block has an entry strictly above theta_min/3. When the two nodes'
/// decisions differ, disagreements (if provided) counts the pairs.
inline EdgeSet recover_edges(const std::vector<GriseSolution>& solutions, int k,
                             double theta_min, long* disagreements = nullptr) {
    const int p = static_cast<int>(solutions.size());
    for (int i = 0; i < p; ++i) {
        VertexLayout layout(p, k, i);
        if (solutions[i].vertex.size() != layout.dim())
            throw std::invalid_argument("solution dimension does not match p, k");
    }
    if (disagreements) *disagreements = 0;
    EdgeSet edges;
    for (int i = 0; i < p; ++i) {
        VertexLayout li(p, k, i);
        for (int j = i + 1; j < p; ++j) {
            const bool from_i = detail::edge_present(solutions[i].vertex, li, j, theta_min);
            if (from_i) edges.insert({i, j});
            if (disagreements) {
                VertexLayout lj(p, k, j);
                const bool from_j =
                    detail::edge_present(solutions[j].vertex, lj, i, theta_min);
                if (from_i != from_j) ++*disagreements;
            }
        }
    }
    return edges;
}

struct RecoveryScore {
    double precision = 0.0;
    double recall = 0.0;
    bool exact = false;
};

inline RecoveryScore score_recovery(const EdgeSet& truth, const EdgeSet& estimate) {
    long hits = 0;
    for (const auto& e : estimate)
        if (truth.count(e)) ++hits;
    RecoveryScore s;
    s.precision = estimate.empty() ? (truth.empty() ? 1.0 : 0.0)
                                   : double(hits) / double(estimate.size());
    s.recall = truth.empty() ? 1.0 : double(hits) / double(truth.size());
    s.exact = truth == estimate;
    return s;
}

inline EdgeSet edge_set_of(const ModelSpec& model) {
    EdgeSet out;
    for (const auto& [key, blk] : model.edges) {
        (void)blk;
        out.insert(key);
    }
    return out;
}

/// Edge-list CSV: header "i,j", 1-based, i < j.
inline void write_edges_csv(const EdgeSet& edges, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [i, j] : edges)
        rows.push_back({std::to_string(i + 1), std::to_string(j + 1)});
    write_csv(path, {"i", "j"}, rows);
}

}  // namespace mrfscreen
