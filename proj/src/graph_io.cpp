#include "dagcn/graph_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <string_view>

#include "dagcn/rng.hpp"

namespace dagcn {

namespace {

struct LineFile {
    std::string path;
    std::vector<std::string> lines;
};

LineFile read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    LineFile f{path.string(), {}};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        f.lines.push_back(std::move(line));
    }
    auto blank = [](const std::string& s) {
        return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
    };
    while (!f.lines.empty() && blank(f.lines.back())) f.lines.pop_back();
    return f;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string where(const LineFile& f, std::size_t line_index) {
    return f.path + ":" + std::to_string(line_index + 1);
}

long parse_long(std::string_view token, const LineFile& f, std::size_t line_index) {
    token = trim(token);
    long value = 0;
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (token.empty() || ec != std::errc() || ptr != end) {
        throw ParseError(where(f, line_index) + ": expected an integer, got '" + std::string(token) + "'");
    }
    return value;
}

std::vector<long> read_int_column(const std::filesystem::path& path) {
    const LineFile f = read_lines(path);
    std::vector<long> out;
    out.reserve(f.lines.size());
    for (std::size_t i = 0; i < f.lines.size(); ++i) out.push_back(parse_long(f.lines[i], f, i));
    return out;
}

void add_edge(Graph& g, std::size_t u, std::size_t v) {
    if (u == v) return;
    g.neighbors[u].push_back(static_cast<std::uint32_t>(v));
    g.neighbors[v].push_back(static_cast<std::uint32_t>(u));
}

void canonicalize(Graph& g) {
    for (auto& nb : g.neighbors) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
}

}  // namespace

std::size_t Graph::num_edges() const noexcept {
    std::size_t twice = 0;
    for (const auto& nb : neighbors) twice += nb.size();
    return twice / 2;
}

Matrix Graph::adjacency_matrix() const {
    const std::size_t n = num_nodes();
    Matrix a(n, n);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::uint32_t v : neighbors[u]) a(u, v) = 1.0;
    }
    return a;
}

std::vector<std::size_t> Dataset::labels() const {
    std::vector<std::size_t> out;
    out.reserve(graphs.size());
    for (const Graph& g : graphs) out.push_back(g.label);
    return out;
}

Matrix normalize_adjacency(const Matrix& adjacency) {
    const std::size_t n = adjacency.rows();
    if (adjacency.cols() != n) throw DimensionError("normalize_adjacency: not square " + adjacency.shape());
    for (std::size_t i = 0; i < n; ++i) {
        if (adjacency(i, i) != 0.0) {
            throw ContractError("normalize_adjacency: nonzero diagonal at node " + std::to_string(i));
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double v = adjacency(i, j);
            if (v != 0.0 && v != 1.0) {
                throw ContractError("normalize_adjacency: non-binary entry at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
            }
            if (v != adjacency(j, i)) {
                throw ContractError("normalize_adjacency: asymmetric at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
            }
        }
    }
    Matrix out(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double degree = 1.0;
        for (std::size_t i = 0; i < n; ++i) degree += adjacency(i, j);
        for (std::size_t i = 0; i < n; ++i) {
            const double a_tilde = adjacency(i, j) + (i == j ? 1.0 : 0.0);
            out(i, j) = a_tilde / degree;
        }
    }
    return out;
}

Matrix build_features(std::span<const long> node_labels, std::span<const std::vector<std::uint32_t>> neighbors,
                      FeatureScheme scheme, std::span<const long> alphabet, std::size_t degree_cap) {
    const std::size_t n = neighbors.size();
    switch (scheme) {
        case FeatureScheme::OneHot: {
            if (node_labels.size() != n || (n > 0 && alphabet.empty())) {
                throw ConfigError("build_features: one-hot features requested but node labels are absent");
            }
            Matrix x(n, alphabet.size());
            for (std::size_t v = 0; v < n; ++v) {
                auto it = std::lower_bound(alphabet.begin(), alphabet.end(), node_labels[v]);
                if (it == alphabet.end() || *it != node_labels[v]) {
                    throw ConfigError("build_features: node label " + std::to_string(node_labels[v]) +
                                      " missing from the label alphabet");
                }
                x(v, static_cast<std::size_t>(it - alphabet.begin())) = 1.0;
            }
            return x;
        }
        case FeatureScheme::Degree: {
            Matrix x(n, degree_cap + 1);
            for (std::size_t v = 0; v < n; ++v) x(v, std::min(neighbors[v].size(), degree_cap)) = 1.0;
            return x;
        }
        case FeatureScheme::Auto: break;
    }
    throw ConfigError("build_features: scheme must be resolved to one-hot or degree");
}

Dataset make_dataset(std::string name, std::vector<Graph> graphs, std::span<const long> raw_graph_labels,
                     const LoadOptions& options) {
    if (raw_graph_labels.size() != graphs.size()) {
        throw FormatError(name + ": " + std::to_string(raw_graph_labels.size()) + " graph labels for " +
                          std::to_string(graphs.size()) + " graphs");
    }
    Dataset ds;
    ds.name = std::move(name);

    std::set<long> distinct(raw_graph_labels.begin(), raw_graph_labels.end());
    std::size_t next = 0;
    for (long l : distinct) ds.label_map[l] = next++;
    ds.num_classes = ds.label_map.size();

    const bool have_labels = !graphs.empty() && std::all_of(graphs.begin(), graphs.end(), [](const Graph& g) {
        return g.node_labels.size() == g.num_nodes();
    });
    std::set<long> alphabet;
    if (have_labels) {
        for (const Graph& g : graphs) alphabet.insert(g.node_labels.begin(), g.node_labels.end());
    }
    ds.node_label_alphabet.assign(alphabet.begin(), alphabet.end());

    ds.scheme = options.scheme;
    if (ds.scheme == FeatureScheme::Auto) ds.scheme = have_labels ? FeatureScheme::OneHot : FeatureScheme::Degree;
    if (ds.scheme == FeatureScheme::OneHot && !have_labels) {
        throw ConfigError(ds.name + ": one-hot features requested but the dataset has no node labels");
    }

    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        Graph& g = graphs[gi];
        canonicalize(g);
        g.label = ds.label_map.at(raw_graph_labels[gi]);
        g.features = build_features(g.node_labels, g.neighbors, ds.scheme, ds.node_label_alphabet, options.degree_cap);
    }
    ds.feature_dim = ds.scheme == FeatureScheme::OneHot ? ds.node_label_alphabet.size() : options.degree_cap + 1;
    ds.graphs = std::move(graphs);
    return ds;
}

Dataset load_tu_dataset(const std::filesystem::path& directory, const std::string& name, const LoadOptions& options) {
    if (!std::filesystem::is_directory(directory)) {
        throw IoError("dataset directory not found: " + directory.string());
    }
    const auto file = [&](const char* suffix) { return directory / (name + suffix); };

    const std::vector<long> indicator = read_int_column(file("_graph_indicator.txt"));
    const std::vector<long> graph_labels = read_int_column(file("_graph_labels.txt"));
    const LineFile edges = read_lines(file("_A.txt"));

    const std::size_t num_graphs = graph_labels.size();
    std::vector<Graph> graphs(num_graphs);
    // global node t (0-based) -> (graph, local index)
    std::vector<std::pair<std::size_t, std::uint32_t>> local(indicator.size());
    {
        const LineFile probe{file("_graph_indicator.txt").string(), {}};
        for (std::size_t t = 0; t < indicator.size(); ++t) {
            const long gid = indicator[t];
            if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs) {
                throw FormatError(where(probe, t) + ": graph id " + std::to_string(gid) + " outside 1.." +
                                  std::to_string(num_graphs));
            }
            Graph& g = graphs[static_cast<std::size_t>(gid - 1)];
            local[t] = {static_cast<std::size_t>(gid - 1), static_cast<std::uint32_t>(g.neighbors.size())};
            g.neighbors.emplace_back();
        }
    }

    const std::size_t total_nodes = indicator.size();
    for (std::size_t li = 0; li < edges.lines.size(); ++li) {
        const std::string& line = edges.lines[li];
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError(where(edges, li) + ": expected 'i, j', got '" + line + "'");
        }
        const long i = parse_long(std::string_view(line).substr(0, comma), edges, li);
        const long j = parse_long(std::string_view(line).substr(comma + 1), edges, li);
        for (long v : {i, j}) {
            if (v < 1 || static_cast<std::size_t>(v) > total_nodes) {
                throw FormatError(where(edges, li) + ": node " + std::to_string(v) + " outside 1.." +
                                  std::to_string(total_nodes));
            }
        }
        const auto [gi, ui] = local[static_cast<std::size_t>(i - 1)];
        const auto [gj, uj] = local[static_cast<std::size_t>(j - 1)];
        if (gi != gj) {
            throw FormatError(where(edges, li) + ": edge (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") references a node outside its graph " + std::to_string(gi + 1));
        }
        add_edge(graphs[gi], ui, uj);
    }

    const auto node_label_path = file("_node_labels.txt");
    if (std::filesystem::exists(node_label_path)) {
        const std::vector<long> node_labels = read_int_column(node_label_path);
        if (node_labels.size() != total_nodes) {
            throw FormatError(node_label_path.string() + ": " + std::to_string(node_labels.size()) +
                              " node labels for " + std::to_string(total_nodes) + " nodes");
        }
        for (std::size_t t = 0; t < total_nodes; ++t) graphs[local[t].first].node_labels.push_back(node_labels[t]);
    }

    return make_dataset(name, std::move(graphs), graph_labels, options);
}

void write_tu_dataset(const Dataset& dataset, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    const auto open = [&](const char* suffix) {
        const auto p = directory / (dataset.name + suffix);
        std::ofstream out(p);
        if (!out) throw IoError("cannot write " + p.string());
        return out;
    };
    std::map<std::size_t, long> inverse;
    for (const auto& [raw, idx] : dataset.label_map) inverse[idx] = raw;

    auto a = open("_A.txt");
    auto ind = open("_graph_indicator.txt");
    auto gl = open("_graph_labels.txt");
    const bool labels = !dataset.graphs.empty() &&
                        std::all_of(dataset.graphs.begin(), dataset.graphs.end(),
                                    [](const Graph& g) { return g.node_labels.size() == g.num_nodes(); });
    std::ofstream nl;
    if (labels) nl = open("_node_labels.txt");

    std::size_t offset = 1;
    for (std::size_t gi = 0; gi < dataset.graphs.size(); ++gi) {
        const Graph& g = dataset.graphs[gi];
        gl << (inverse.count(g.label) ? inverse[g.label] : static_cast<long>(g.label)) << '\n';
        for (std::size_t v = 0; v < g.num_nodes(); ++v) {
            ind << gi + 1 << '\n';
            if (labels) nl << g.node_labels[v] << '\n';
            for (std::uint32_t u : g.neighbors[v]) a << offset + v << ", " << offset + u << '\n';
        }
        offset += g.num_nodes();
    }
}

std::vector<Split> stratified_kfold(std::span<const std::size_t> labels, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ContractError("stratified_kfold: need at least 2 folds, got " + std::to_string(folds));
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [cls, members] : by_class) {
        if (members.size() < folds) {
            throw StratificationError("stratified_kfold: class " + std::to_string(cls) + " has " +
                                      std::to_string(members.size()) + " members, fewer than " +
                                      std::to_string(folds) + " folds");
        }
    }

    Rng rng(seed);
    std::vector<std::size_t> fold_of(labels.size());
    std::size_t offset = 0;
    for (auto& [cls, members] : by_class) {
        shuffle(std::span(members), rng);
        for (std::size_t i = 0; i < members.size(); ++i) fold_of[members[i]] = (offset + i) % folds;
        offset += members.size();
    }

    std::vector<Split> splits(folds);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t f = 0; f < folds; ++f) (f == fold_of[i] ? splits[f].test : splits[f].train).push_back(i);
    }
    return splits;
}

std::vector<Split> stratified_kfold(const Dataset& dataset, std::size_t folds, std::uint64_t seed) {
    const auto labels = dataset.labels();
    return stratified_kfold(labels, folds, seed);
}

DatasetStats compute_stats(const Dataset& dataset) {
    DatasetStats s;
    s.graphs = dataset.graphs.size();
    s.feature_dim = dataset.feature_dim;
    s.class_histogram.assign(dataset.num_classes, 0);
    std::size_t total = 0;
    for (const Graph& g : dataset.graphs) {
        s.max_nodes = std::max(s.max_nodes, g.num_nodes());
        total += g.num_nodes();
        if (g.label < s.class_histogram.size()) ++s.class_histogram[g.label];
    }
    s.mean_nodes = s.graphs == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(s.graphs);
    return s;
}

Graph permute_graph(const Graph& g, std::span<const std::size_t> perm) {
    const std::size_t n = g.num_nodes();
    if (perm.size() != n) throw DimensionError("permute_graph: permutation length does not match node count");
    Graph out;
    out.label = g.label;
    out.neighbors.resize(n);
    if (!g.node_labels.empty()) out.node_labels.resize(n);
    out.features = Matrix(n, g.features.cols());
    for (std::size_t v = 0; v < n; ++v) {
        const std::size_t pv = perm[v];
        for (std::uint32_t u : g.neighbors[v]) out.neighbors[pv].push_back(static_cast<std::uint32_t>(perm[u]));
        if (!g.node_labels.empty()) out.node_labels[pv] = g.node_labels[v];
        if (!g.features.empty()) {
            std::copy(g.features.row(v).begin(), g.features.row(v).end(), out.features.row(pv).begin());
        }
    }
    canonicalize(out);
    return out;
}

Graph graph_from_edges(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges) {
    Graph g;
    g.neighbors.resize(n);
    for (const auto& [u, v] : edges) {
        if (u >= n || v >= n) throw ContractError("graph_from_edges: edge endpoint out of range");
        add_edge(g, u, v);
    }
    canonicalize(g);
    return g;
}

}  // namespace dagcn
