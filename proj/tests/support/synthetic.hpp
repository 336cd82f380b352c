#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dagcn/graph_io.hpp"
#include "dagcn/rng.hpp"

namespace dagcn::testsupport {

/// Two-class toy set in TU conventions (raw graph labels -1 / +1). Class +1
/// graphs carry one or two nodes with node label 2; class -1 graphs never do.
/// Structure is a random tree plus a few chords.
inline Dataset synthetic_dataset(std::size_t num_graphs, std::uint64_t seed, std::size_t min_nodes = 4,
                                 std::size_t max_nodes = 12, std::string name = "SYNTH") {
    Rng rng(seed);
    std::vector<Graph> graphs;
    std::vector<long> raw;
    for (std::size_t gi = 0; gi < num_graphs; ++gi) {
        const std::size_t n = min_nodes + static_cast<std::size_t>(uniform_index(rng, max_nodes - min_nodes + 1));
        std::vector<std::pair<std::size_t, std::size_t>> edges;
        for (std::size_t v = 1; v < n; ++v) edges.emplace_back(static_cast<std::size_t>(uniform_index(rng, v)), v);
        for (std::size_t extra = 0; extra < n / 3; ++extra) {
            edges.emplace_back(static_cast<std::size_t>(uniform_index(rng, n)),
                               static_cast<std::size_t>(uniform_index(rng, n)));
        }
        Graph g = graph_from_edges(n, edges);
        g.node_labels.resize(n);
        for (long& l : g.node_labels) l = static_cast<long>(uniform_index(rng, 2));
        const bool positive = gi % 2 == 1;
        if (positive) {
            const std::size_t marks = 1 + static_cast<std::size_t>(uniform_index(rng, 2));
            for (std::size_t k = 0; k < marks; ++k) g.node_labels[static_cast<std::size_t>(uniform_index(rng, n))] = 2;
        }
        graphs.push_back(std::move(g));
        raw.push_back(positive ? 1 : -1);
    }
    return make_dataset(std::move(name), std::move(graphs), raw);
}

}  // namespace dagcn::testsupport
