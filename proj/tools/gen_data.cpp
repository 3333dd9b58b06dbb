// Deterministic stand-in datasets for the benchmark suite.
//
// The real evaluation datasets (a1a, colon-cancer, housing) live in the
// LIBSVM repository and are not redistributed here; see docs/datasets.md for
// their URLs. This tool generates synthetic files with the same shapes,
// sparsity patterns and label conventions so the test and acceptance suites
// are self-contained. Drop the real files into the data directory under the
// same names to benchmark against them instead.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "tp/dataio.hpp"
#include "tp/rng.hpp"

namespace {

using tp::Rng;
using tp::SparseDataset;
using tp::Vec;

double round6(double v) { return std::round(v * 1e6) / 1e6; }

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void append_row(SparseDataset& ds, const std::vector<std::pair<std::int64_t, double>>& row,
                double label) {
    for (const auto& [col, val] : row) {
        ds.features.col_indices.push_back(static_cast<std::int32_t>(col));
        ds.features.values.push_back(val);
    }
    ds.features.row_offsets.push_back(ds.features.nnz());
    ds.labels.push_back(label);
    ++ds.features.n_rows;
}

// Binary classification, 1605 x 119, 0/1 categorical-style features
// (10..17 active per row), ~25% positive labels, logistic label noise.
SparseDataset make_a1a_like() {
    const std::int64_t n = 1605, d = 119;
    Rng rng = Rng::stream(7001, 1);
    Vec w(static_cast<std::size_t>(d), 0.0);
    for (int k = 0; k < 40; ++k) w[rng.below(d)] = 1.5 * rng.normal();
    const double bias = -1.1;

    SparseDataset ds;
    ds.features.n_cols = d;
    ds.features.row_offsets.assign(1, 0);
    std::vector<std::int64_t> cols(static_cast<std::size_t>(d));
    for (std::int64_t j = 0; j < d; ++j) cols[j] = j;
    for (std::int64_t i = 0; i < n; ++i) {
        rng.shuffle(cols);
        const std::size_t active = 10 + rng.below(8);
        std::vector<std::int64_t> picked(cols.begin(), cols.begin() + active);
        std::sort(picked.begin(), picked.end());
        std::vector<std::pair<std::int64_t, double>> row;
        double margin = bias;
        for (std::int64_t c : picked) {
            row.emplace_back(c, 1.0);
            margin += w[c];
        }
        const double label = rng.uniform01() < sigmoid(1.6 * margin) ? 1.0 : -1.0;
        append_row(ds, row, label);
    }
    return ds;
}

// Binary classification, 62 x 2000, dense real-valued features.
SparseDataset make_colon_like() {
    const std::int64_t n = 62, d = 2000;
    Rng rng = Rng::stream(7001, 2);
    Vec w(static_cast<std::size_t>(d), 0.0);
    for (int k = 0; k < 60; ++k) w[rng.below(d)] = rng.normal();

    SparseDataset ds;
    ds.features.n_cols = d;
    ds.features.row_offsets.assign(1, 0);
    for (std::int64_t i = 0; i < n; ++i) {
        std::vector<std::pair<std::int64_t, double>> row;
        row.reserve(static_cast<std::size_t>(d));
        double margin = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double v = round6(0.35 * rng.normal());
            row.emplace_back(j, v);
            margin += w[j] * v;
        }
        const double label = (margin + 1.2 * rng.normal()) >= 0.0 ? 1.0 : -1.0;
        append_row(ds, row, label);
    }
    return ds;
}

// Regression, 506 x 13, dense features, real labels with additive noise.
SparseDataset make_housing_like() {
    const std::int64_t n = 506, d = 13;
    Rng rng = Rng::stream(7001, 3);
    Vec w(static_cast<std::size_t>(d));
    for (auto& c : w) c = 3.0 * rng.normal();

    SparseDataset ds;
    ds.features.n_cols = d;
    ds.features.row_offsets.assign(1, 0);
    for (std::int64_t i = 0; i < n; ++i) {
        std::vector<std::pair<std::int64_t, double>> row;
        double margin = 22.0;  // typical label scale
        for (std::int64_t j = 0; j < d; ++j) {
            const double v = round6(rng.normal());
            row.emplace_back(j, v);
            margin += w[j] * v / std::sqrt(static_cast<double>(d));
        }
        append_row(ds, row, round6(margin + 2.0 * rng.normal()));
    }
    return ds;
}

void write(const SparseDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::cerr << "cannot open " << path << '\n';
        std::exit(3);
    }
    out << tp::serialize_libsvm(ds);
    std::cout << path << ": " << ds.n_examples() << " x " << ds.n_features() << ", nnz "
              << ds.features.nnz() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    std::string out_dir = "data";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out-dir" && i + 1 < argc) {
            out_dir = argv[++i];
        } else {
            std::cerr << "usage: gen_data [--out-dir DIR]\n";
            return 2;
        }
    }
    std::filesystem::create_directories(out_dir);
    write(make_a1a_like(), out_dir + "/a1a.libsvm");
    write(make_colon_like(), out_dir + "/colon-cancer.libsvm");
    write(make_housing_like(), out_dir + "/housing.libsvm");
    return 0;
}
