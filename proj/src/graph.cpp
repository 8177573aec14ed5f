#include "unprompt/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "unprompt/error.hpp"

namespace unprompt {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!field.empty() || c == ',') fields.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (!field.empty()) fields.push_back(trim(field));
    return fields;
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return in;
}

std::string location(const std::filesystem::path& path, std::size_t line_no) {
    return path.string() + ":" + std::to_string(line_no);
}

std::vector<Edge> read_edges(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<Edge> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_fields(line);
        if (line_no == 1 && fields.size() == 2 && fields[0] == "src" && fields[1] == "dst")
            continue;
        long long u = 0, v = 0;
        if (fields.size() != 2 || !parse_number(fields[0], u) || !parse_number(fields[1], v))
            throw Error(ErrorKind::Parse, location(path, line_no) + ": expected two integer columns");
        if (u < 0 || v < 0)
            throw Error(ErrorKind::MalformedGraph, location(path, line_no) + ": negative node id");
        edges.emplace_back(static_cast<Index>(u), static_cast<Index>(v));
    }
    return edges;
}

Matrix read_attributes(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (rows == 0) cols = fields.size();
        if (fields.size() != cols)
            throw Error(ErrorKind::Parse, location(path, line_no) + ": ragged attribute row (expected " +
                                              std::to_string(cols) + " values, got " +
                                              std::to_string(fields.size()) + ")");
        for (const auto& f : fields) {
            double x = 0.0;
            if (!parse_number(f, x))
                throw Error(ErrorKind::Parse, location(path, line_no) + ": not a real number: '" + f + "'");
            values.push_back(x);
        }
        ++rows;
    }
    if (rows == 0) throw Error(ErrorKind::Parse, path.string() + ": no attribute rows");
    Matrix attrs(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            attrs(static_cast<Index>(i), static_cast<Index>(j)) = values[i * cols + j];
    return attrs;
}

Labels read_labels(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<int> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        int y = 0;
        if (!parse_number(line, y))
            throw Error(ErrorKind::Parse, location(path, line_no) + ": expected an integer label");
        values.push_back(y);
    }
    return Eigen::Map<Labels>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

std::vector<Edge> AttributedGraph::edge_list() const {
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(num_edges()));
    for (Index u = 0; u < adjacency.outerSize(); ++u)
        for (SparseMatrix::InnerIterator it(adjacency, u); it; ++it)
            if (u < it.col()) edges.emplace_back(u, it.col());
    return edges;
}

SparseMatrix build_adjacency(Index num_nodes, const std::vector<Edge>& edges) {
    std::vector<Edge> directed;
    directed.reserve(edges.size() * 2);
    for (const auto& [u, v] : edges) {
        if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
            throw Error(ErrorKind::MalformedGraph, "edge (" + std::to_string(u) + "," + std::to_string(v) +
                                                       ") has an endpoint outside [0, " +
                                                       std::to_string(num_nodes) + ")");
        if (u == v) continue;
        directed.emplace_back(u, v);
        directed.emplace_back(v, u);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    std::vector<Eigen::Triplet<Real>> triplets;
    triplets.reserve(directed.size());
    for (const auto& [u, v] : directed) triplets.emplace_back(u, v, 1.0);
    SparseMatrix adjacency(num_nodes, num_nodes);
    adjacency.setFromTriplets(triplets.begin(), triplets.end());
    adjacency.makeCompressed();
    return adjacency;
}

AttributedGraph make_graph(Matrix attributes, const std::vector<Edge>& edges, std::optional<Labels> labels) {
    const Index n = attributes.rows();
    if (labels) {
        if (labels->size() != n)
            throw Error(ErrorKind::Shape, "label count " + std::to_string(labels->size()) +
                                              " does not match node count " + std::to_string(n));
        for (Index i = 0; i < n; ++i)
            if ((*labels)(i) != 0 && (*labels)(i) != 1)
                throw Error(ErrorKind::Label, "label of node " + std::to_string(i) + " is not 0/1");
    }
    AttributedGraph g;
    g.adjacency = build_adjacency(n, edges);
    g.attributes = std::move(attributes);
    g.labels = std::move(labels);
    return g;
}

RowNormalizedAdjacency row_normalize(const SparseMatrix& adjacency) {
    RowNormalizedAdjacency out;
    out.matrix = adjacency;
    out.isolated.resize(adjacency.rows());
    for (Index u = 0; u < out.matrix.outerSize(); ++u) {
        const Index deg = adjacency.outerIndexPtr()[u + 1] - adjacency.outerIndexPtr()[u];
        out.isolated(u) = deg == 0;
        for (SparseMatrix::InnerIterator it(out.matrix, u); it; ++it)
            it.valueRef() = 1.0 / static_cast<Real>(deg);
    }
    return out;
}

Matrix sparse_matmul(const RowNormalizedAdjacency& adj, const Matrix& m) {
    if (adj.matrix.cols() != m.rows())
        throw Error(ErrorKind::Shape, "sparse_matmul: adjacency has " + std::to_string(adj.matrix.cols()) +
                                          " columns but operand has " + std::to_string(m.rows()) + " rows");
    return adj.matrix * m;
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw Error(ErrorKind::NonFinite, std::string(what) + " contains NaN or Inf");
}

AttributedGraph load_graph(const std::filesystem::path& edge_path, const std::filesystem::path& attr_path,
                           const std::optional<std::filesystem::path>& label_path) {
    Matrix attrs = read_attributes(attr_path);
    require_finite(attrs, attr_path.string().c_str());
    const auto edges = read_edges(edge_path);
    std::optional<Labels> labels;
    if (label_path) labels = read_labels(*label_path);
    return make_graph(std::move(attrs), edges, std::move(labels));
}

AttributedGraph load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw Error(ErrorKind::Io, "dataset directory not found: " + dir.string());
    std::optional<std::filesystem::path> labels;
    if (std::filesystem::exists(dir / "labels.csv")) labels = dir / "labels.csv";
    return load_graph(dir / "edges.csv", dir / "attrs.csv", labels);
}

void save_dataset(const AttributedGraph& g, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open_output = [](const std::filesystem::path& path) {
        std::ofstream out(path);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
        return out;
    };

    auto edges = open_output(dir / "edges.csv");
    edges << "src,dst\n";
    for (const auto& [u, v] : g.edge_list()) edges << u << ',' << v << '\n';

    auto attrs = open_output(dir / "attrs.csv");
    char buf[32];
    for (Index i = 0; i < g.num_nodes(); ++i) {
        for (Index j = 0; j < g.num_attributes(); ++j) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), g.attributes(i, j));
            if (j) attrs << ',';
            attrs.write(buf, ptr - buf);
        }
        attrs << '\n';
    }

    if (g.labels) {
        auto labels = open_output(dir / "labels.csv");
        for (Index i = 0; i < g.labels->size(); ++i) labels << (*g.labels)(i) << '\n';
    } else if (std::filesystem::exists(dir / "labels.csv")) {
        std::filesystem::remove(dir / "labels.csv");
    }
}

}  // namespace unprompt
