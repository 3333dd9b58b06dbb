#include "tp/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include "tp/rng.hpp"

namespace tp {

namespace {

bool parse_double_token(const std::string& tok, double& out) {
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    if (begin != end && *begin == '+') ++begin;  // from_chars rejects a leading '+'
    if (begin == end) return false;
    auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

bool parse_int_token(const char* begin, const char* end, std::int64_t& out) {
    if (begin != end && *begin == '+') ++begin;
    if (begin == end) return false;
    auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

std::string read_gz_file(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::string out;
    char buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool bad = n < 0;
    gzclose(f);
    if (bad) throw IoError("gzip read error in " + path);
    return out;
}

SparseDataset from_rows(std::vector<std::vector<std::pair<std::int64_t, double>>>&& rows,
                        Vec&& labels, std::int64_t n_cols) {
    SparseDataset ds;
    ds.features.n_rows = static_cast<std::int64_t>(rows.size());
    ds.features.n_cols = n_cols;
    ds.features.row_offsets.assign(1, 0);
    for (auto& row : rows) {
        for (auto& [col, val] : row) {
            ds.features.col_indices.push_back(static_cast<std::int32_t>(col));
            ds.features.values.push_back(val);
        }
        ds.features.row_offsets.push_back(ds.features.nnz());
    }
    ds.labels = std::move(labels);
    ds.features.validate();
    return ds;
}

}  // namespace

SparseDataset parse_libsvm(std::istream& in, const ParseOptions& opts,
                           std::vector<ParseWarning>* warnings) {
    std::vector<std::vector<std::pair<std::int64_t, double>>> rows;
    Vec labels;
    std::int64_t max_index = 0;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;

        std::istringstream toks(line);
        std::string tok;
        toks >> tok;
        double label;
        if (!parse_double_token(tok, label))
            throw ParseError(line_no, "malformed label '" + tok + "'");
        if (!std::isfinite(label))
            throw ParseError(line_no, "non-finite label");

        std::vector<std::pair<std::int64_t, double>> row;
        while (toks >> tok) {
            if (!tok.empty() && tok[0] == '#')
                throw ParseError(line_no, "malformed token '" + tok + "'");
            const std::size_t colon = tok.find(':');
            if (colon == std::string::npos)
                throw ParseError(line_no, "malformed token '" + tok + "' (expected index:value)");
            std::int64_t index;
            if (!parse_int_token(tok.data(), tok.data() + colon, index))
                throw ParseError(line_no, "malformed feature index in '" + tok + "'");
            if (index <= 0)
                throw ParseError(line_no, "feature index must be >= 1, got " +
                                              std::to_string(index));
            if (index > std::numeric_limits<std::int32_t>::max())
                throw ParseError(line_no, "feature index " + std::to_string(index) +
                                              " exceeds the supported range");
            double value;
            if (!parse_double_token(tok.substr(colon + 1), value))
                throw ParseError(line_no, "malformed feature value in '" + tok + "'");
            if (!std::isfinite(value))
                throw ParseError(line_no, "non-finite feature value in '" + tok + "'");
            row.emplace_back(index - 1, value);  // to 0-based columns
            max_index = std::max(max_index, index);
        }

        if (!std::is_sorted(row.begin(), row.end(),
                            [](const auto& a, const auto& b) { return a.first < b.first; })) {
            std::stable_sort(row.begin(), row.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            if (warnings)
                warnings->push_back({line_no, "feature indices out of order; reordered"});
        }
        std::vector<std::pair<std::int64_t, double>> dedup;
        for (const auto& [col, val] : row) {
            if (!dedup.empty() && dedup.back().first == col) {
                dedup.back().second += val;
                if (warnings)
                    warnings->push_back({line_no, "duplicate feature index " +
                                                      std::to_string(col + 1) + "; values summed"});
            } else {
                dedup.emplace_back(col, val);
            }
        }

        rows.push_back(std::move(dedup));
        labels.push_back(label);
    }

    std::int64_t n_cols = max_index;
    if (opts.n_features_override > 0) {
        if (max_index > opts.n_features_override)
            throw ParseError(line_no, "feature index " + std::to_string(max_index) +
                                          " exceeds requested dimension " +
                                          std::to_string(opts.n_features_override));
        n_cols = opts.n_features_override;
    }
    return from_rows(std::move(rows), std::move(labels), n_cols);
}

SparseDataset load_libsvm_file(const std::string& path, const ParseOptions& opts,
                               std::vector<ParseWarning>* warnings) {
    if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
        std::istringstream in(read_gz_file(path));
        return parse_libsvm(in, opts, warnings);
    }
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_libsvm(in, opts, warnings);
}

std::string serialize_libsvm(const SparseDataset& ds) {
    std::string out;
    char buf[64];
    auto append_double = [&](double v) {
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        out.append(buf, res.ptr);
    };
    for (std::int64_t i = 0; i < ds.n_examples(); ++i) {
        append_double(ds.labels[i]);
        for (std::int64_t k = ds.features.row_offsets[i]; k < ds.features.row_offsets[i + 1]; ++k) {
            out.push_back(' ');
            auto res = std::to_chars(buf, buf + sizeof(buf),
                                     ds.features.col_indices[k] + 1);  // back to 1-based
            out.append(buf, res.ptr);
            out.push_back(':');
            append_double(ds.features.values[k]);
        }
        out.push_back('\n');
    }
    return out;
}

bool labels_are_binary(const SparseDataset& ds) {
    for (double l : ds.labels)
        if (l != -1.0 && l != 1.0) return false;
    return !ds.labels.empty();
}

SparseDataset normalize_labels_binary(const SparseDataset& ds) {
    std::set<double> distinct(ds.labels.begin(), ds.labels.end());
    if (distinct.size() != 2)
        throw NormalizationError("expected exactly 2 distinct labels, found " +
                                 std::to_string(distinct.size()));
    const double lo = *distinct.begin();
    SparseDataset out = ds;
    for (double& l : out.labels) l = (l == lo) ? -1.0 : 1.0;
    return out;
}

namespace {

SparseDataset take_rows(const SparseDataset& ds, const std::vector<std::int64_t>& rows) {
    SparseDataset out;
    out.features.n_rows = static_cast<std::int64_t>(rows.size());
    out.features.n_cols = ds.n_features();
    out.features.row_offsets.assign(1, 0);
    for (std::int64_t r : rows) {
        for (std::int64_t k = ds.features.row_offsets[r]; k < ds.features.row_offsets[r + 1]; ++k) {
            out.features.col_indices.push_back(ds.features.col_indices[k]);
            out.features.values.push_back(ds.features.values[k]);
        }
        out.features.row_offsets.push_back(out.features.nnz());
        out.labels.push_back(ds.labels[r]);
    }
    return out;
}

}  // namespace

std::pair<SparseDataset, SparseDataset> split(const SparseDataset& ds, double test_fraction,
                                              std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ConfigError("test_fraction must be in [0, 1)");
    if (test_fraction == 0.0) {
        SparseDataset empty;
        empty.features.n_cols = ds.n_features();
        empty.features.row_offsets.assign(1, 0);
        return {ds, empty};
    }
    const std::int64_t n = ds.n_examples();
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng = Rng::stream(seed, 0x5b117);
    rng.shuffle(perm);
    const auto train_n =
        static_cast<std::int64_t>(std::ceil(static_cast<double>(n) * (1.0 - test_fraction)));
    std::vector<std::int64_t> train_rows(perm.begin(), perm.begin() + train_n);
    std::vector<std::int64_t> test_rows(perm.begin() + train_n, perm.end());
    return {take_rows(ds, train_rows), take_rows(ds, test_rows)};
}

SparseDataset scale_features_maxabs(const SparseDataset& ds) {
    Vec max_abs(static_cast<std::size_t>(ds.n_features()), 0.0);
    for (std::size_t k = 0; k < ds.features.values.size(); ++k) {
        const auto col = static_cast<std::size_t>(ds.features.col_indices[k]);
        max_abs[col] = std::max(max_abs[col], std::abs(ds.features.values[k]));
    }
    SparseDataset out = ds;
    for (std::size_t k = 0; k < out.features.values.size(); ++k) {
        const auto col = static_cast<std::size_t>(out.features.col_indices[k]);
        if (max_abs[col] > 0.0) out.features.values[k] /= max_abs[col];
    }
    return out;
}

}  // namespace tp
