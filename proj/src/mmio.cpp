#include "ess/mmio.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace ess {

namespace {

struct Header {
    bool coordinate = true;
    bool symmetric = false;
};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

Header read_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("empty Matrix Market stream");
    std::istringstream hs(line);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || lower(object) != "matrix")
        throw Error("malformed Matrix Market header: " + line);
    format = lower(format);
    field = lower(field);
    symmetry = lower(symmetry);
    Header h;
    if (format == "coordinate") h.coordinate = true;
    else if (format == "array") h.coordinate = false;
    else throw Error("unsupported Matrix Market format: " + format);
    if (field != "real" && field != "integer" && field != "double")
        throw Error("unsupported Matrix Market field: " + field);
    if (symmetry == "general") h.symmetric = false;
    else if (symmetry == "symmetric") h.symmetric = true;
    else throw Error("unsupported Matrix Market symmetry: " + symmetry);
    return h;
}

// Next non-comment, non-blank line.
bool data_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '%') continue;
        return true;
    }
    return false;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

CscMatrix read_matrix_market(std::istream& in) {
    Header h = read_header(in);
    if (!h.coordinate) throw Error("expected a coordinate Matrix Market file");
    std::string line;
    if (!data_line(in, line)) throw Error("missing size line");
    long long rows = 0, cols = 0, nnz = 0;
    {
        std::istringstream ss(line);
        if (!(ss >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
            throw Error("malformed size line: " + line);
    }
    if (rows != cols) throw Error("matrix is not square");
    const Index n = static_cast<Index>(rows);

    std::vector<CscMatrix::Triplet> entries;
    entries.reserve(static_cast<std::size_t>(h.symmetric ? 2 * nnz : nnz));
    for (long long k = 0; k < nnz; ++k) {
        if (!data_line(in, line)) throw Error("expected " + std::to_string(nnz) + " entries, got " + std::to_string(k));
        std::istringstream ss(line);
        long long i = 0, j = 0;
        double v = 0.0;
        if (!(ss >> i >> j >> v)) throw Error("malformed entry: " + line);
        if (i < 1 || i > rows || j < 1 || j > cols)
            throw Error("entry index out of bounds: " + line);
        entries.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1), v});
        if (h.symmetric && i != j) entries.push_back({static_cast<Index>(j - 1), static_cast<Index>(i - 1), v});
    }
    return CscMatrix::from_triplets(n, entries);
}

CscMatrix load_matrix_market(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_matrix_market(in);
}

void write_matrix_market(const CscMatrix& a, std::ostream& out) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.n() << ' ' << a.n() << ' ' << a.nnz() << '\n';
    for (Index j = 0; j < a.n(); ++j) {
        auto rows = a.col_rows(j);
        auto vals = a.col_values(j);
        for (std::size_t p = 0; p < rows.size(); ++p)
            out << rows[p] + 1 << ' ' << j + 1 << ' ' << fmt17(vals[p]) << '\n';
    }
}

void save_matrix_market(const CscMatrix& a, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_matrix_market(a, out);
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<double> load_vector(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    Header h = read_header(in);
    std::string line;
    if (!data_line(in, line)) throw Error("missing size line");
    std::istringstream ss(line);
    long long rows = 0, cols = 0, nnz = 0;
    if (!(ss >> rows >> cols)) throw Error("malformed size line: " + line);
    if (cols != 1) throw Error("expected a single column vector");
    std::vector<double> v(static_cast<std::size_t>(rows), 0.0);
    if (!h.coordinate) {
        for (auto& e : v) {
            if (!data_line(in, line)) throw Error("vector file truncated");
            e = std::stod(line);
        }
        return v;
    }
    if (!(ss >> nnz)) throw Error("malformed size line: " + line);
    for (long long k = 0; k < nnz; ++k) {
        if (!data_line(in, line)) throw Error("vector file truncated");
        std::istringstream es(line);
        long long i = 0, j = 0;
        double x = 0.0;
        if (!(es >> i >> j >> x) || i < 1 || i > rows || j != 1) throw Error("malformed entry: " + line);
        v[static_cast<std::size_t>(i - 1)] += x;
    }
    return v;
}

void save_vector(std::span<const double> v, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "%%MatrixMarket matrix array real general\n" << v.size() << " 1\n";
    for (double e : v) out << fmt17(e) << '\n';
}

}  // namespace ess
