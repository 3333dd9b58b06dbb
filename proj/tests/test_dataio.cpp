#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <sstream>

#include "oracles.hpp"
#include "tp/dataio.hpp"
#include "tp/errors.hpp"

using namespace tp;

namespace {

SparseDataset parse_str(const std::string& text, std::vector<ParseWarning>* warnings = nullptr,
                        std::int64_t override_features = 0) {
    std::istringstream in(text);
    ParseOptions opts;
    opts.n_features_override = override_features;
    return parse_libsvm(in, opts, warnings);
}

bool datasets_equal(const SparseDataset& a, const SparseDataset& b) {
    return a.features.row_offsets == b.features.row_offsets &&
           a.features.col_indices == b.features.col_indices &&
           a.features.values == b.features.values && a.labels == b.labels &&
           a.features.n_rows == b.features.n_rows && a.features.n_cols == b.features.n_cols;
}

}  // namespace

TEST_CASE("direct parse") {
    const auto ds = parse_str("+1 1:0.5 3:2.0\n-1 2:1.0\n");
    CHECK(ds.n_examples() == 2);
    CHECK(ds.n_features() == 3);
    CHECK(ds.labels == Vec{1.0, -1.0});
    CHECK(ds.features.row_offsets == std::vector<std::int64_t>{0, 2, 3});
    CHECK(ds.features.col_indices == std::vector<std::int32_t>{0, 2, 1});
    CHECK(ds.features.values == Vec{0.5, 2.0, 1.0});
}

TEST_CASE("empty stream parses to an empty dataset") {
    const auto ds = parse_str("");
    CHECK(ds.n_examples() == 0);
    CHECK(ds.n_features() == 0);
}

TEST_CASE("blank lines and comments are skipped") {
    const auto ds = parse_str("# header\n\n   \n+1 1:1\n# trailing\n");
    CHECK(ds.n_examples() == 1);
}

TEST_CASE("duplicate indices are summed with a warning") {
    std::vector<ParseWarning> warnings;
    const auto ds = parse_str("1 1:2.0 1:3.0 2:1.0\n", &warnings);
    CHECK(ds.features.values == Vec{5.0, 1.0});
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].line == 1);
}

TEST_CASE("out-of-order indices are reordered with a warning") {
    std::vector<ParseWarning> warnings;
    const auto ds = parse_str("1 3:3.0 1:1.0\n", &warnings);
    CHECK(ds.features.col_indices == std::vector<std::int32_t>{0, 2});
    CHECK(ds.features.values == Vec{1.0, 3.0});
    CHECK(warnings.size() == 1);
}

TEST_CASE("malformed inputs carry line numbers") {
    try {
        parse_str("+1 1:1\nbad:token line\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
    CHECK_THROWS_AS(parse_str("1 0:1.0\n"), ParseError);   // index 0
    CHECK_THROWS_AS(parse_str("1 -3:1.0\n"), ParseError);  // negative index
    CHECK_THROWS_AS(parse_str("1 2:inf\n"), ParseError);   // non-finite value
    CHECK_THROWS_AS(parse_str("1 2:nan\n"), ParseError);
    CHECK_THROWS_AS(parse_str("x 1:1\n"), ParseError);  // bad label
    CHECK_THROWS_AS(parse_str("1 5\n"), ParseError);    // missing colon
    CHECK_THROWS_AS(parse_str("1 1:1 # inline\n"), ParseError);
}

TEST_CASE("hostile tokens are parse errors, not undefined behavior") {
    CHECK_THROWS_AS(parse_str("1 99999999999999999999:1\n"), ParseError);  // int64 overflow
    CHECK_THROWS_AS(parse_str("1 3000000000:1\n"), ParseError);  // beyond the index range
    CHECK_THROWS_AS(parse_str("1 2:3:4\n"), ParseError);
    CHECK_THROWS_AS(parse_str("+\n"), ParseError);
    CHECK_THROWS_AS(parse_str("1 +:1\n"), ParseError);
    // tabs are ordinary whitespace
    const auto ds = parse_str("1\t1:1\t2:2\n");
    CHECK(ds.features.nnz() == 2);
}

TEST_CASE("feature override pins the dimension") {
    const auto ds = parse_str("1 2:1.0\n", nullptr, 10);
    CHECK(ds.n_features() == 10);
    CHECK_THROWS_AS(parse_str("1 11:1.0\n", nullptr, 10), ParseError);
}

TEST_CASE("label normalization") {
    const auto ds = parse_str("0 1:1\n1 1:2\n1 1:3\n");
    const auto norm = normalize_labels_binary(ds);
    CHECK(norm.labels == Vec{-1.0, 1.0, 1.0});

    const auto already = parse_str("-1 1:1\n+1 1:2\n");
    CHECK(normalize_labels_binary(already).labels == already.labels);

    CHECK_THROWS_AS(normalize_labels_binary(parse_str("3 1:1.0\n")), NormalizationError);
    CHECK_THROWS_AS(normalize_labels_binary(parse_str("1 1:1\n2 1:1\n3 1:1\n")),
                    NormalizationError);
}

TEST_CASE("round-trip identity") {
    const auto ds = parse_str("1 1:0.1 7:-2.5e-3\n-1 2:1.0\n2.5 1:3\n");
    std::istringstream back(serialize_libsvm(ds));
    const auto ds2 = parse_libsvm(back);
    CHECK(datasets_equal(ds, ds2));
}

TEST_CASE("round-trip identity on the generated benchmark datasets") {
    for (const char* name : {"a1a.libsvm", "colon-cancer.libsvm", "housing.libsvm"}) {
        std::vector<ParseWarning> warnings;
        const auto ds = load_libsvm_file(oracles::data_dir() + "/" + name, {}, &warnings);
        CHECK(warnings.empty());
        CHECK(ds.n_examples() > 0);
        std::istringstream back(serialize_libsvm(ds));
        const auto ds2 = parse_libsvm(back);
        CHECK(datasets_equal(ds, ds2));
    }
}

TEST_CASE("split") {
    const auto ds = parse_str(
        "1 1:1\n2 1:2\n3 1:3\n4 1:4\n5 1:5\n6 1:6\n7 1:7\n8 1:8\n9 1:9\n10 1:10\n");
    SUBCASE("degenerate split returns the dataset unchanged") {
        const auto [train, test] = split(ds, 0.0, 0);
        CHECK(datasets_equal(train, ds));
        CHECK(test.n_examples() == 0);
        CHECK(test.n_features() == ds.n_features());
    }
    SUBCASE("sizes and determinism") {
        const auto [train, test] = split(ds, 0.3, 0);
        CHECK(train.n_examples() == 7);
        CHECK(test.n_examples() == 3);
        const auto [train2, test2] = split(ds, 0.3, 0);
        CHECK(datasets_equal(train, train2));
        CHECK(datasets_equal(test, test2));
        const auto [train3, test3] = split(ds, 0.3, 1);
        CHECK(!datasets_equal(train, train3));
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(split(ds, 1.0, 0), ConfigError);
        CHECK_THROWS_AS(split(ds, -0.1, 0), ConfigError);
    }
}

TEST_CASE("max-abs feature scaling") {
    const auto ds = parse_str("1 1:2 2:-8\n1 1:-4\n");
    const auto scaled = scale_features_maxabs(ds);
    CHECK(scaled.features.values == Vec{0.5, -1.0, -1.0});
    CHECK(scaled.labels == ds.labels);
}

TEST_CASE("missing dataset file") {
    CHECK_THROWS_AS(load_libsvm_file("/no/such/data.libsvm"), IoError);
    CHECK_THROWS_AS(load_libsvm_file("/no/such/data.libsvm.gz"), IoError);
}

TEST_CASE("gzip input by extension") {
    const std::string path = "/tmp/tp_test_gzip.libsvm.gz";
    {
        gzFile f = gzopen(path.c_str(), "wb");
        REQUIRE(f != nullptr);
        const std::string text = "+1 1:0.5 3:2.0\n-1 2:1.0\n";
        gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
        gzclose(f);
    }
    const auto ds = load_libsvm_file(path);
    CHECK(ds.n_examples() == 2);
    CHECK(ds.n_features() == 3);
    CHECK(datasets_equal(ds, parse_str("+1 1:0.5 3:2.0\n-1 2:1.0\n")));
}
