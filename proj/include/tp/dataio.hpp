#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "tp/numkit.hpp"

namespace tp {

/// Immutable example matrix (CSR) plus one label per row.
struct SparseDataset {
    SparseMatrixCSR features;
    Vec labels;

    std::int64_t n_examples() const { return features.n_rows; }
    std::int64_t n_features() const { return features.n_cols; }
};

struct ParseOptions {
    // 0 means "dimension = max feature index seen"; a positive value pins the
    // feature count so that e.g. train and test files share one dimension.
    std::int64_t n_features_override = 0;
};

struct ParseWarning {
    std::size_t line;
    std::string message;
};

/// Parses LIBSVM text: `<label> <index>:<value> ...` with 1-based feature
/// indices, one example per line. Blank lines and `#` comment lines are
/// skipped. Duplicate indices within a line are summed and out-of-order
/// indices reordered, each with a warning. Malformed tokens, indices < 1 and
/// non-finite values raise ParseError with the offending line number.
SparseDataset parse_libsvm(std::istream& in, const ParseOptions& opts = {},
                           std::vector<ParseWarning>* warnings = nullptr);

/// File variant; transparently inflates `.gz` inputs.
SparseDataset load_libsvm_file(const std::string& path, const ParseOptions& opts = {},
                               std::vector<ParseWarning>* warnings = nullptr);

std::string serialize_libsvm(const SparseDataset& ds);

/// Maps the smaller of exactly two distinct raw labels to -1 and the larger
/// to +1. Anything other than two classes is an error.
SparseDataset normalize_labels_binary(const SparseDataset& ds);

bool labels_are_binary(const SparseDataset& ds);

/// Deterministic shuffled split. The first ceil(n*(1-test_fraction)) rows of
/// the seeded permutation form the train set. test_fraction = 0 returns the
/// dataset unchanged plus an empty test set.
std::pair<SparseDataset, SparseDataset> split(const SparseDataset& ds,
                                              double test_fraction,
                                              std::uint64_t seed);

/// Opt-in per-feature max-abs scaling (features only, labels untouched).
SparseDataset scale_features_maxabs(const SparseDataset& ds);

}  // namespace tp
