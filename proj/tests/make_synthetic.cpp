// Writes the synthetic two-class toy set in TU format: make_synthetic <dir> [graphs] [seed]
#include <cstdio>
#include <cstdlib>
#include <string>

#include "support/synthetic.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <dir> [graphs] [seed]\n", argv[0]);
        return 2;
    }
    const std::size_t graphs = argc > 2 ? std::stoul(argv[2]) : 40;
    const std::uint64_t seed = argc > 3 ? std::stoull(argv[3]) : 1;
    dagcn::write_tu_dataset(dagcn::testsupport::synthetic_dataset(graphs, seed), argv[1]);
    return 0;
}
