#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "tp/dataio.hpp"
#include "tp/harness.hpp"
#include "tp/rng.hpp"

using namespace tp;

namespace {

std::string a1a_path() { return oracles::data_dir() + "/a1a.libsvm"; }

RunConfig quad_tp_config() {
    RunConfig c;
    c.method = Method::tp;
    c.objective_kind = "quadratic";
    c.quad_spectrum = {1.0, 1.0};
    c.quad_offset = 0.0;
    c.seeds = {0};
    c.epochs = 3;
    c.batch_size = 0;
    c.init_mode = InitMode::provided;
    c.x0_provided = {2.0, 0.0};
    c.y0_provided = {1.0, 0.0};
    return c;
}

}  // namespace

TEST_CASE("batch scheduler: partition per epoch, deterministic, method-independent") {
    BatchScheduler a(7, 100, 32);
    BatchScheduler b(7, 100, 32);
    CHECK(a.steps_per_epoch() == 4);  // ceil(100 / 32)
    for (int epoch = 0; epoch < 3; ++epoch) {
        a.next_epoch();
        b.next_epoch();
        std::vector<bool> seen(100, false);
        for (std::int64_t s = 0; s < a.steps_per_epoch(); ++s) {
            const auto ba = a.batch(s);
            const auto bb = b.batch(s);
            REQUIRE(ba.has_value());
            CHECK(ba->idx == bb->idx);  // same seed, same sequence
            CHECK(std::is_sorted(ba->idx.begin(), ba->idx.end()));
            for (const auto i : ba->idx) {
                CHECK(!seen[static_cast<std::size_t>(i)]);
                seen[static_cast<std::size_t>(i)] = true;
            }
        }
        CHECK(std::count(seen.begin(), seen.end(), true) == 100);  // without replacement
    }
    // full-batch mode
    BatchScheduler full(0, 100, 0);
    CHECK(full.steps_per_epoch() == 1);
    full.next_epoch();
    CHECK(!full.batch(0).has_value());
}

TEST_CASE("running_average") {
    CHECK(running_average({4, 7, 1}, 1) == std::vector<double>{4, 7, 1});
    CHECK(running_average({1, 2, 3}, 2) == std::vector<double>{1, 1.5, 2.5});
    CHECK(running_average({5, 5, 5, 5}, 3) == std::vector<double>{5, 5, 5, 5});
    CHECK_THROWS_AS(running_average({1}, 0), ConfigError);
}

TEST_CASE("test_accuracy") {
    std::istringstream in("+1 1:1\n+1 1:2\n-1 1:-1\n");
    const auto ds = parse_libsvm(in);
    SUBCASE("zero model predicts +1 everywhere") {
        CHECK(test_accuracy({0.0}, ds) == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("separating model is perfect") { CHECK(test_accuracy({1.0}, ds) == 1.0); }
    SUBCASE("flipped model is the complement when no zero margins exist") {
        CHECK(test_accuracy({-1.0}, ds) == doctest::Approx(1.0 - 1.0));
    }
    SUBCASE("empty test set is undefined") {
        SparseDataset empty;
        empty.features.n_cols = 1;
        empty.features.row_offsets = {0};
        CHECK_THROWS_AS(test_accuracy({0.0}, empty), MetricError);
    }
}

TEST_CASE("deterministic twin run reproduces the hand trajectory") {
    const RunConfig config = quad_tp_config();
    const auto traces = run_all(config);
    REQUIRE(traces.size() == 1);
    const auto& rows = traces[0].rows;
    REQUIRE(rows.size() == 3);
    // f-values before each step: (2, 0.5) -> (0.125, 0.5) -> (0.125, 0.03125)
    CHECK(*rows[0].rec.f_full_x == 0.125);
    CHECK(*rows[0].rec.f_full_y == 0.5);
    CHECK(rows[0].rec.mover == Mover::x);
    CHECK(rows[0].rec.eta == 0.75);
    CHECK(*rows[1].rec.f_full_x == 0.125);
    CHECK(*rows[1].rec.f_full_y == 0.03125);
    CHECK(rows[1].rec.mover == Mover::y);
    CHECK(*rows[2].rec.f_full_x == 0.0078125);
    CHECK(rows[2].rec.mover == Mover::x);
    CHECK(traces[0].returned_point == Mover::x);
}

TEST_CASE("identical config and seed give byte-identical CSV") {
    RunConfig config;
    config.method = Method::stpm;
    config.objective_kind = "logistic";
    config.dataset_path = a1a_path();
    config.seeds = {3};
    config.epochs = 2;
    config.batch_size = 32;
    config.test_fraction = 0.2;
    config.fstar_mode = FstarMode::provided;
    config.fstar_provided = 0.0;
    const auto t1 = run_all(config);
    const auto t2 = run_all(config);
    CHECK(trace_to_csv(t1[0]) == trace_to_csv(t2[0]));
    CHECK(!trace_to_csv(t1[0]).empty());
}

TEST_CASE("epoch accounting is exact") {
    // 320 examples at batch 32: exactly 10 steps per epoch
    const std::string path = "/tmp/tp_n320.libsvm";
    {
        std::ofstream out(path);
        Rng rng(1);
        for (int i = 0; i < 320; ++i)
            out << (rng.uniform01() < 0.5 ? "+1" : "-1") << " 1:" << (i % 7) << " 2:1\n";
    }
    RunConfig config;
    config.method = Method::sgd;
    config.objective_kind = "logistic";
    config.dataset_path = path;
    config.params.eta = 0.1;
    config.seeds = {0};
    config.epochs = 4;
    config.batch_size = 32;
    const PreparedProblem prob = prepare(config);
    CHECK(prob.steps_per_epoch == 10);
    const auto traces = run_all(config, prob);
    CHECK(traces[0].rows.size() == 40);
    // metrics only at epoch boundaries
    int with_metrics = 0;
    for (const auto& row : traces[0].rows)
        if (row.rec.f_full_x) ++with_metrics;
    CHECK(with_metrics == 4);
}

TEST_CASE("uneven final block") {
    RunConfig config;
    config.method = Method::sgd;
    config.objective_kind = "logistic";
    config.dataset_path = a1a_path();  // 1605 rows
    config.params.eta = 0.01;
    config.seeds = {0};
    config.epochs = 1;
    config.batch_size = 32;
    const PreparedProblem prob = prepare(config);
    CHECK(prob.steps_per_epoch == 51);  // ceil(1605 / 32)
}

TEST_CASE("certificate suboptimality stays nonnegative for sgd") {
    RunConfig config;
    config.method = Method::sgd;
    config.objective_kind = "logistic";
    config.dataset_path = a1a_path();
    config.seeds = {0, 1};
    config.epochs = 3;
    config.batch_size = 32;
    config.fstar_mode = FstarMode::certificate;
    config.fstar_grad_tol = 1e-8;
    config.fstar_max_iter = 50000;
    const auto traces = run_all(config);
    int boundary_count = 0;
    for (const auto& t : traces)
        for (const auto& row : t.rows)
            if (row.subopt) {
                CHECK(*row.subopt >= 0.0);
                ++boundary_count;
            }
    CHECK(boundary_count == 6);
}

TEST_CASE("divergence truncates the trace and flags it") {
    RunConfig config;
    config.method = Method::gd;
    config.objective_kind = "least_squares";
    config.dataset_path = oracles::data_dir() + "/housing.libsvm";
    config.params.eta = 1e6;  // far beyond 2/L
    config.seeds = {0};
    config.epochs = 200;
    config.batch_size = 0;
    const auto traces = run_all(config);
    REQUIRE(traces.size() == 1);
    CHECK(traces[0].diverged);
    CHECK(traces[0].rows.size() < 200);
    CHECK((traces[0].rows.back().rec.flags & kFlagDiverged) != 0);
    // no non-finite cell ever reaches the CSV
    const std::string csv = trace_to_csv(traces[0]);
    CHECK(csv.find("inf") == std::string::npos);
    CHECK(csv.find("nan") == std::string::npos);
}

TEST_CASE("csv emission and metadata sidecar") {
    RunConfig config = quad_tp_config();
    config.seeds = {0, 1};
    config.init_mode = InitMode::gaussian;
    config.output_path = "/tmp/tp_emit_test";
    const auto traces = run_all(config);
    REQUIRE(traces.size() == 2);

    std::ifstream csv("/tmp/tp_emit_test_seed0.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "seed,step,epoch,mover,eta,f_full_x,f_full_y,subopt,subopt_runavg,grad_sq_norm,"
          "test_acc,wall_ms,flags");
    std::string row;
    std::getline(csv, row);
    // no fstar configured: subopt fields are empty, not zero
    CHECK(row.find(",,") != std::string::npos);

    const auto meta = KvMap::parse_file("/tmp/tp_emit_test.meta");
    CHECK(meta.get("method") == "tp");
    CHECK(meta.get("library.version") == std::string("0.1.0"));
    CHECK_THROWS_AS([&] {
        RunConfig bad = quad_tp_config();
        bad.output_path = "/dev/null/xyz/out";  // parent cannot be a directory
        run_all(bad);
    }(), IoError);
}

TEST_CASE("config round trip and validation") {
    const auto kv = KvMap::parse(
        "method = spsmax\nobjective = logistic\ndataset = d.libsvm\ngamma = 2.5\n"
        "seeds = 0,1\nepochs = 7\nbatch_size = 16\n");
    const RunConfig config = RunConfig::from_kv(kv);
    CHECK(config.method == Method::spsmax);
    CHECK(*config.params.gamma == 2.5);
    CHECK(config.epochs == 7);
    const KvMap out = config.to_kv();
    CHECK(out.get("method") == "spsmax");
    CHECK(out.get_double("gamma") == 2.5);

    CHECK_THROWS_AS(RunConfig::from_kv(KvMap::parse("methd = tp\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_kv(KvMap::parse("objective = cubic\n")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_kv(KvMap::parse("seeds = \n")), ConfigError);

    // unspecified batch size defaults to 32 on data, full batch on quadratics
    CHECK(RunConfig::from_kv(KvMap::parse("objective = logistic\ndataset = d\n")).batch_size ==
          32);
    CHECK(RunConfig::from_kv(KvMap::parse("objective = quadratic\n")).batch_size == 0);

    RunConfig quad_batched = quad_tp_config();
    quad_batched.batch_size = 4;
    CHECK_THROWS_AS(prepare(quad_batched), ConfigError);

    RunConfig oversized;
    oversized.method = Method::sgd;
    oversized.params.eta = 0.1;
    oversized.objective_kind = "logistic";
    oversized.dataset_path = a1a_path();
    oversized.batch_size = 100000;
    CHECK_THROWS_AS(prepare(oversized), ConfigError);

    // deterministic methods refuse mini-batches (polyak would otherwise hit
    // routine batch values below the full-objective f*)
    RunConfig batched_tp;
    batched_tp.method = Method::tp;
    batched_tp.objective_kind = "logistic";
    batched_tp.dataset_path = a1a_path();
    batched_tp.batch_size = 32;
    CHECK_THROWS_AS(prepare(batched_tp), ConfigError);

    RunConfig batched_polyak = batched_tp;
    batched_polyak.method = Method::polyak;
    batched_polyak.params.fstar = 0.0;
    CHECK_THROWS_AS(prepare(batched_polyak), ConfigError);

    // provided initial points must match the objective dimension
    RunConfig bad_init = quad_tp_config();
    bad_init.x0_provided = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(run_all(bad_init), ConfigError);
}

TEST_CASE("polyak run against a certificate reaches the optimum fast") {
    RunConfig config;
    config.method = Method::polyak;
    config.objective_kind = "quadratic";
    config.quad_spectrum = {4.0, 1.0, 0.5};
    config.quad_offset = 2.0;
    config.seeds = {0};
    config.epochs = 500;
    config.batch_size = 0;
    config.fstar_mode = FstarMode::provided;
    config.fstar_provided = 2.0;  // the offset is the optimal value
    const auto traces = run_all(config);
    REQUIRE(!traces[0].diverged);
    CHECK(*traces[0].final_subopt <= 1e-10);
}

TEST_CASE("parallel seeds produce the same traces as sequential") {
    RunConfig config;
    config.method = Method::stp;
    config.objective_kind = "logistic";
    config.dataset_path = a1a_path();
    config.seeds = {0, 1, 2, 3};
    config.epochs = 2;
    config.batch_size = 64;
    config.jobs = 1;
    const auto seq = run_all(config);
    config.jobs = 4;
    const auto par = run_all(config);
    REQUIRE(seq.size() == par.size());
    for (std::size_t i = 0; i < seq.size(); ++i)
        CHECK(trace_to_csv(seq[i]) == trace_to_csv(par[i]));
}

TEST_CASE("wrap transform keeps the mover sequence in a full harness run") {
    RunConfig base;
    base.method = Method::stp;
    base.objective_kind = "logistic";
    base.dataset_path = a1a_path();
    base.seeds = {1};
    base.epochs = 2;
    base.batch_size = 32;
    RunConfig wrapped = base;
    wrapped.wrap_c = 1000.0;
    wrapped.wrap_d = -7.0;
    const auto a = run_all(base);
    const auto b = run_all(wrapped);
    REQUIRE(a[0].rows.size() == b[0].rows.size());
    for (std::size_t i = 0; i < a[0].rows.size(); ++i)
        CHECK(a[0].rows[i].rec.mover == b[0].rows[i].rec.mover);
}
