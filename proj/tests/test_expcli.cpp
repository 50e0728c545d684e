#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <vector>

#include "otvq/expcli.hpp"

using namespace otvq;
using namespace otvq::expcli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "otvq_test_expcli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string line; std::getline(ss, line);) out.push_back(line);
    return out;
}

// Tag-balance check: every element opened is closed in order, and there is a
// single <svg> root.
bool well_formed_svg(const std::string& s) {
    std::vector<std::string> stack;
    int roots = 0;
    const std::regex tag(R"(<(/?)([a-zA-Z]+)[^>]*?(/?)>)");
    for (auto it = std::sregex_iterator(s.begin(), s.end(), tag); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        const std::string name = m[2];
        if (m[1].length() > 0) {
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (m[3].length() == 0) {
            if (name == "svg") {
                if (!stack.empty()) return false;
                ++roots;
            }
            stack.push_back(name);
        }
    }
    return stack.empty() && roots == 1;
}

std::size_t count_of(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

// Small, fast run on a 4-cluster mixture.
TrainConfig tiny_run(std::size_t iters) {
    TrainConfig c = parse_config_json(R"({"n_clusters": 4, "points_per_cluster": 20, "K": 6, "n_z": 2,
        "hidden": [8], "batch_size": 8, "lr": 0.001, "phi_lr": 0.5, "lambda": 0.05, "log_every": 5, "seed": 3})");
    c.iters = iters;
    return c;
}

// Compares against tests/data/<name>; OTVQ_BLESS=1 rewrites the file instead.
void expect_golden(const std::string& name, const std::string& text) {
    const fs::path p = fs::path(OTVQ_TEST_DATA_DIR) / name;
    if (const char* bless = std::getenv("OTVQ_BLESS"); bless && std::string(bless) == "1") {
        write_text_file(p, text);
    }
    ASSERT_TRUE(fs::exists(p)) << "missing golden file " << p;
    EXPECT_EQ(slurp(p), text) << "golden mismatch for " << name;
}

}  // namespace

// ---- config ----

TEST(Config, EmptyObjectGivesDefaults) {
    const TrainConfig c = parse_config_json("{}");
    const models::ModelConfig d;
    EXPECT_EQ(c.model.method, models::Method::VqWae);
    EXPECT_EQ(c.model.batch_size, 32u);
    EXPECT_EQ(c.model.weights.lambda, 1e-3);
    EXPECT_EQ(c.model.weights.lambda_r, 1.0);
    EXPECT_EQ(c.model.weights.beta, 0.25);
    EXPECT_EQ(c.model.weights.eps, 0.1);
    EXPECT_EQ(c.model.phi_iters, 5u);
    EXPECT_EQ(c.model.K, d.K);
    EXPECT_EQ(c.model.hidden, d.hidden);
    EXPECT_EQ(c.dataset, DatasetKind::GaussianMixture);
    EXPECT_EQ(c.log_every, 50u);
    EXPECT_FALSE(c.wallclock);
}

TEST(Config, SingleKeyOverridesOnlyThatField) {
    const TrainConfig c = parse_config_json(R"({"lambda": 0.01})");
    EXPECT_EQ(c.model.weights.lambda, 0.01);
    const TrainConfig d = parse_config_json("{}");
    EXPECT_EQ(c.model.lr, d.model.lr);
    EXPECT_EQ(c.model.weights.eps, d.model.weights.eps);
    EXPECT_EQ(c.iters, d.iters);
}

TEST(Config, AllKeysParse) {
    const TrainConfig c = parse_config_json(R"({"method": "vqvae", "dataset": "gaussian_mixture", "n_clusters": 3,
        "points_per_cluster": 7, "spread": 0.2, "data_dim": 3, "data_seed": 9, "limit": 4, "K": 5, "M": 2, "n_z": 3,
        "hidden": [4, 6], "batch_size": 2, "iters": 11, "lr": 0.002, "phi_lr": 0.3, "lambda": 0.5, "lambda_r": 2.0,
        "beta": 0.5, "eps": 0.05, "phi_iters": 3, "seed": 42, "log_every": 7, "wallclock": true, "out_dir": "o"})",
                                            "base");
    EXPECT_EQ(c.model.method, models::Method::VqVae);
    EXPECT_EQ(c.n_clusters, 3u);
    EXPECT_EQ(c.points_per_cluster, 7u);
    EXPECT_EQ(c.spread, 0.2);
    EXPECT_EQ(c.data_dim, 3u);
    EXPECT_EQ(c.data_seed, 9u);
    EXPECT_EQ(c.limit, 4u);
    EXPECT_EQ(c.model.K, 5u);
    EXPECT_EQ(c.model.M, 2u);
    EXPECT_EQ(c.model.n_z, 3u);
    EXPECT_EQ(c.model.hidden, (std::vector<std::size_t>{4, 6}));
    EXPECT_EQ(c.model.batch_size, 2u);
    EXPECT_EQ(c.iters, 11u);
    EXPECT_EQ(c.model.lr, 0.002);
    EXPECT_EQ(c.model.phi_lr, 0.3);
    EXPECT_EQ(c.model.weights.lambda, 0.5);
    EXPECT_EQ(c.model.weights.lambda_r, 2.0);
    EXPECT_EQ(c.model.weights.beta, 0.5);
    EXPECT_EQ(c.model.weights.eps, 0.05);
    EXPECT_EQ(c.model.phi_iters, 3u);
    EXPECT_EQ(c.model.seed, 42u);
    EXPECT_EQ(c.log_every, 7u);
    EXPECT_TRUE(c.wallclock);
    EXPECT_EQ(c.out_dir, fs::path("base") / "o");
}

TEST(Config, UnknownMethodRejected) {
    try {
        parse_config_json(R"({"method": "sqvae"})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("unknown method"), std::string::npos);
    }
}

TEST(Config, UnknownKeyNamed) {
    try {
        parse_config_json(R"({"lamda": 0.01})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("'lamda'"), std::string::npos);
    }
}

TEST(Config, TypeMismatchNamesKey) {
    for (const auto& [text, key] : std::vector<std::pair<std::string, std::string>>{
             {R"({"lambda": "big"})", "'lambda'"},
             {R"({"K": 2.5})", "'K'"},
             {R"({"K": -3})", "'K'"},
             {R"({"hidden": 4})", "'hidden'"},
             {R"({"wallclock": 1})", "'wallclock'"},
             {R"({"method": 3})", "'method'"}}) {
        try {
            parse_config_json(text);
            ADD_FAILURE() << "accepted " << text;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
        }
    }
}

TEST(Config, MalformedAndNonObjectRejected) {
    EXPECT_THROW(parse_config_json("{\"K\": "), ConfigError);
    EXPECT_THROW(parse_config_json("[1, 2]"), ConfigError);
}

TEST(Config, NonPositiveValuesRejected) {
    for (const char* text : {R"({"K": 0})", R"({"M": 0})", R"({"batch_size": 0})", R"({"eps": 0})",
                             R"({"hidden": [4, 0]})", R"({"lr": -1})", R"({"log_every": 0})"}) {
        EXPECT_THROW(parse_config_json(text), ConfigError) << text;
    }
}

TEST(Config, IdxNeedsImages) {
    EXPECT_THROW(parse_config_json(R"({"dataset": "idx"})"), ConfigError);
    EXPECT_THROW(parse_config_json(R"({"dataset": "cifar"})"), ConfigError);
}

TEST(Config, FileRelativePathsAndMissingFile) {
    const auto dir = fresh_dir("config_file");
    write_text_file(dir / "c.json", R"({"dataset": "idx", "images": "imgs.idx"})");
    const TrainConfig c = parse_config(dir / "c.json");
    EXPECT_EQ(c.images, dir / "imgs.idx");
    EXPECT_THROW(parse_config(dir / "absent.json"), IoError);
}

TEST(Config, BatchLargerThanDatasetRejected) {
    TrainConfig c = parse_config_json(R"({"n_clusters": 2, "points_per_cluster": 3, "batch_size": 7})");
    EXPECT_THROW(load_dataset(c), ConfigError);
}

// ---- metrics.csv ----

TEST(Metrics, HeaderIsExactColumnList) {
    EXPECT_EQ(metrics_header(1), "iter,recon_mse,ws_term,kl_term,total_loss,perplexity_m0,wallclock_ms");
    EXPECT_EQ(metrics_header(3),
              "iter,recon_mse,ws_term,kl_term,total_loss,perplexity_m0,perplexity_m1,perplexity_m2,wallclock_ms");
}

TEST(Metrics, RowRoundTripsExactly) {
    const MetricsRow r{50, 0.1 + 0.2, 1.0 / 3.0, 1e-300, -2.5, {15.999999999, 1.0}, 1234};
    const std::string line = format_metrics_row(r);
    EXPECT_EQ(parse_metrics_row(line, 2), r);
    EXPECT_THROW(parse_metrics_row(line, 1), FormatError);
    EXPECT_THROW(parse_metrics_row("1,a,0,0,0,1,0", 1), FormatError);
    EXPECT_THROW(parse_metrics_row("1.5,0,0,0,0,1,0", 1), FormatError);
}

// ---- run_experiment ----

TEST(Run, ZeroIterationsGivesEmptyBodyAndValidArtifacts) {
    const auto dir = fresh_dir("zero");
    const auto r = run_experiment(tiny_run(0), dir);
    EXPECT_TRUE(r.rows.empty());
    const auto csv = lines_of(slurp(dir / kMetricsFile));
    ASSERT_EQ(csv.size(), 1u);
    EXPECT_EQ(csv[0], metrics_header(1));
    for (const auto* f : {kLossCurveFile, "usage_hist_m0.svg"}) {
        EXPECT_TRUE(well_formed_svg(slurp(dir / f))) << f;
    }
    EXPECT_TRUE(fs::exists(dir / kCheckpointFile));
    const auto summary = nlohmann::json::parse(slurp(dir / kSummaryFile));
    EXPECT_EQ(summary["iterations"], 0);
    EXPECT_EQ(summary["recon_mse"].get<double>(), r.final_metrics.mse);
    EXPECT_EQ(summary["perplexity"].size(), 1u);
    EXPECT_TRUE(summary.contains("psnr"));
}

TEST(Run, RowsFollowLoggingIntervalAndParse) {
    const auto dir = fresh_dir("rows");
    const auto r = run_experiment(tiny_run(12), dir);
    const auto csv = lines_of(slurp(dir / kMetricsFile));
    ASSERT_EQ(csv.size(), 4u);  // header, 5, 10, 12
    EXPECT_EQ(csv[0], metrics_header(1));
    std::vector<std::uint64_t> iters;
    for (std::size_t i = 1; i < csv.size(); ++i) {
        const auto row = parse_metrics_row(csv[i], 1);
        EXPECT_EQ(row, r.rows[i - 1]);
        EXPECT_EQ(row.wallclock_ms, 0u);
        EXPECT_GE(row.perplexity[0], 1.0);
        EXPECT_LE(row.perplexity[0], 6.0);
        iters.push_back(row.iter);
    }
    EXPECT_EQ(iters, (std::vector<std::uint64_t>{5, 10, 12}));
    const auto svg = slurp(dir / kLossCurveFile);
    EXPECT_TRUE(well_formed_svg(svg));
    EXPECT_EQ(count_of(svg, "<polyline"), 1u);
    const auto ckpt = models::load_checkpoint(dir / kCheckpointFile);
    EXPECT_EQ(ckpt.iteration, 12u);
}

TEST(Run, IntervalRowIsMeanOfStepLosses) {
    // Replays the run's steps by hand and averages the first interval.
    TrainConfig c = tiny_run(5);
    const auto r = run_experiment(c, fresh_dir("mean"));
    const data::Dataset d = load_dataset(c);
    auto s = models::init_state(c.model);
    data::BatchStream stream(d, c.model.batch_size, models::derive_seed(c.model.seed, models::kBatchSeed), true);
    double recon = 0.0, total = 0.0;
    for (int i = 0; i < 5; ++i) {
        const auto p = models::train_step(s, stream.next());
        recon += p.recon;
        total += p.total;
    }
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(r.rows[0].recon_mse, recon / 5);
    EXPECT_DOUBLE_EQ(r.rows[0].total_loss, total / 5);
}

TEST(Run, SameConfigAndSeedGiveIdenticalMetrics) {
    const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
    run_experiment(tiny_run(20), a);
    run_experiment(tiny_run(20), b);
    EXPECT_EQ(slurp(a / kMetricsFile), slurp(b / kMetricsFile));
    EXPECT_EQ(slurp(a / kCheckpointFile), slurp(b / kCheckpointFile));
}

TEST(Run, DifferentSeedsDiffer) {
    const auto a = fresh_dir("seed_a"), b = fresh_dir("seed_b");
    TrainConfig c = tiny_run(10);
    run_experiment(c, a);
    c.model.seed = 4;
    run_experiment(c, b);
    EXPECT_NE(slurp(a / kMetricsFile), slurp(b / kMetricsFile));
}

TEST(Run, VqVaeRunHasZeroOtColumns) {
    TrainConfig c = tiny_run(5);
    c.model.method = models::Method::VqVae;
    const auto r = run_experiment(c, fresh_dir("vqvae"));
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].ws_term, 0.0);
    EXPECT_EQ(r.rows[0].kl_term, 0.0);
}

TEST(Run, NumericFailureExitsTwoAndKeepsPartialMetrics) {
    const auto dir = fresh_dir("blowup");
    TrainConfig c = tiny_run(50);
    c.log_every = 1;
    c.model.lr = 1e300;  // first Adam step moves weights by ~1e300
    std::ostringstream err;
    EXPECT_EQ(guarded([&] { run_experiment(c, dir); }, err), kExitNumeric);
    EXPECT_NE(err.str().find("numeric"), std::string::npos);
    const auto csv = lines_of(slurp(dir / kMetricsFile));
    ASSERT_GE(csv.size(), 2u);
    EXPECT_LT(csv.size(), 51u);
    EXPECT_EQ(csv[0], metrics_header(1));
    EXPECT_NO_THROW(parse_metrics_row(csv[1], 1));
    EXPECT_FALSE(fs::exists(dir / kSummaryFile));
}

TEST(Run, ExitCodesByErrorKind) {
    std::ostringstream err;
    EXPECT_EQ(guarded([] {}, err), kExitOk);
    EXPECT_EQ(guarded([] { parse_config_json(R"({"method": "x"})"); }, err), kExitConfig);
    EXPECT_EQ(guarded([] { throw NumericError("nan"); }, err), kExitNumeric);
    EXPECT_EQ(guarded([] { parse_config("/nonexistent/otvq.json"); }, err), kExitIo);
    EXPECT_EQ(guarded([] { throw FormatError("bad checkpoint"); }, err), kExitIo);
}

TEST(Run, UnwritableOutputIsIoError) {
    const auto dir = fresh_dir("blocked");
    write_text_file(dir / "file", "x");
    std::ostringstream err;
    EXPECT_EQ(guarded([&] { run_experiment(tiny_run(1), dir / "file" / "sub"); }, err), kExitIo);
}

TEST(Run, EnvironmentOverridesOutputDirectory) {
    TrainConfig c;
    c.out_dir = "configured";
    ::unsetenv("OTVQ_OUT");
    EXPECT_EQ(resolve_out_dir(c), fs::path("configured"));
    ::setenv("OTVQ_OUT", "/tmp/elsewhere", 1);
    EXPECT_EQ(resolve_out_dir(c), fs::path("/tmp/elsewhere"));
    ::unsetenv("OTVQ_OUT");
}

TEST(Run, SeedSweepWritesOneDirectoryPerSeed) {
    const auto root = fresh_dir("sweep");
    EXPECT_EQ(run_seed_sweep(tiny_run(5), {7, 8}, root, 2), kExitOk);
    for (const char* s : {"seed_7", "seed_8"}) {
        EXPECT_TRUE(fs::exists(root / s / kSummaryFile)) << s;
    }
    EXPECT_NE(slurp(root / "seed_7" / kMetricsFile), slurp(root / "seed_8" / kMetricsFile));
    // A child that fails reports its exit code.
    TrainConfig bad = tiny_run(5);
    bad.model.lr = 1e300;
    EXPECT_EQ(run_seed_sweep(bad, {1}, fresh_dir("sweep_bad")), kExitNumeric);
}

// ---- SVG ----

TEST(Svg, SinglePointSeriesHasOneVertex) {
    const std::vector<double> x{3.0}, y{0.5};
    const auto s = line_chart_svg(x, y, "one", "iter", "loss");
    EXPECT_TRUE(well_formed_svg(s));
    EXPECT_EQ(count_of(s, "<polyline"), 1u);
    const auto start = s.find("points=\"") + 8;
    const auto pts = s.substr(start, s.find('"', start) - start);
    EXPECT_EQ(count_of(pts, ","), 1u) << pts;
    EXPECT_EQ(count_of(pts, " "), 0u) << pts;
}

TEST(Svg, UniformHistogramHasKEqualBars) {
    const std::vector<std::uint64_t> counts(7, 40);
    const auto s = histogram_svg(counts, "usage", "codeword", "count");
    EXPECT_TRUE(well_formed_svg(s));
    const std::regex bar(R"re(<rect x="[0-9.]+" y="([0-9.]+)" width="[0-9.]+" height="([0-9.]+)"/>)re");
    std::set<std::string> heights, tops;
    std::size_t bars = 0;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), bar); it != std::sregex_iterator(); ++it) {
        ++bars;
        tops.insert((*it)[1]);
        heights.insert((*it)[2]);
    }
    EXPECT_EQ(bars, 7u);
    EXPECT_EQ(heights.size(), 1u);
    EXPECT_EQ(tops.size(), 1u);
}

TEST(Svg, BarHeightsProportionalToCounts) {
    const std::vector<std::uint64_t> counts{0, 5, 10};
    const auto s = histogram_svg(counts, "h", "x", "y");
    const double full = svg::kHeight - svg::kTop - svg::kBottom;
    EXPECT_NE(s.find("height=\"" + svg::num(0.0) + "\""), std::string::npos);
    EXPECT_NE(s.find("height=\"" + svg::num(full / 2) + "\""), std::string::npos);
    EXPECT_NE(s.find("height=\"" + svg::num(full) + "\""), std::string::npos);
}

TEST(Svg, TitlesAreEscaped) {
    const std::vector<double> x{0, 1}, y{0, 1};
    const auto s = line_chart_svg(x, y, "a<b & \"c\"", "x", "y");
    EXPECT_NE(s.find("a&lt;b &amp; &quot;c&quot;"), std::string::npos);
    EXPECT_TRUE(well_formed_svg(s));
}

TEST(Svg, BadInputsRejected) {
    const std::vector<double> empty, one{1.0}, two{1.0, 2.0}, nan{std::nan("")};
    EXPECT_THROW(line_chart_svg(empty, empty, "t", "x", "y"), ValueError);
    EXPECT_THROW(line_chart_svg(one, two, "t", "x", "y"), ValueError);
    EXPECT_THROW(line_chart_svg(one, nan, "t", "x", "y"), NumericError);
    EXPECT_THROW(histogram_svg(std::vector<std::uint64_t>{}, "t", "x", "y"), ValueError);
    EXPECT_THROW(write_text_file("/nonexistent/dir/f.svg", "x"), IoError);
}

TEST(Svg, FixtureOutputsMatchGoldenFiles) {
    const std::vector<double> x{50, 100, 150, 200, 250}, y{0.9, 0.5, 0.31, 0.27, 0.26};
    expect_golden("golden_loss_curve.svg", line_chart_svg(x, y, "fixture loss", "iteration", "total loss"));
    const std::vector<std::uint64_t> counts{12, 0, 30, 7, 7, 19, 1, 24};
    expect_golden("golden_usage_hist.svg", histogram_svg(counts, "fixture usage", "codeword", "count"));
    expect_golden("golden_empty_chart.svg", empty_chart_svg("fixture empty", "iteration", "total loss"));
}

// ---- ot_bench ----

TEST(OtBench, OneByOneAllValuesEqualTheCost) {
    BenchOptions o;
    o.sizes = {{1, 1}};
    o.seed = 5;
    const auto rows = ot_bench(o);
    ASSERT_EQ(rows.size(), 2 * o.eps.size());
    for (const auto& r : rows) {
        if (r.instance != "1x1") continue;
        EXPECT_GT(r.exact, 0.0);
        EXPECT_NEAR(r.sinkhorn_cost, r.exact, 1e-15);
        EXPECT_NEAR(r.sinkhorn_entropic, r.exact, 1e-15);
        EXPECT_NEAR(r.semi_dual, r.exact, 1e-12);
    }
}

TEST(OtBench, OneByOneValueIsTheSquaredDistance) {
    std::mt19937_64 rng(11);
    const auto inst = random_bench_instance({1, 1}, 2, rng);
    const double dx = inst.mu.atoms[0] - inst.nu.atoms[0], dy = inst.mu.atoms[1] - inst.nu.atoms[1];
    const auto r = bench_row("1x1", inst, 0.01, BenchOptions{});
    EXPECT_DOUBLE_EQ(r.exact, dx * dx + dy * dy);
}

TEST(OtBench, IdenticalDistributionsHaveZeroExactValue) {
    const auto rows = ot_bench(BenchOptions{});
    std::size_t seen = 0;
    for (const auto& r : rows) {
        if (r.instance != "identical") continue;
        ++seen;
        EXPECT_NEAR(r.exact, 0.0, 1e-15);
    }
    EXPECT_EQ(seen, BenchOptions{}.eps.size());
}

TEST(OtBench, SmallEpsGapBelowOnePercent) {
    BenchOptions o;
    o.sizes = {{6, 4}};
    o.eps = {1e-3};
    for (std::uint64_t seed : {0, 1, 2, 3}) {
        o.seed = seed;
        const auto r = ot_bench(o).front();
        EXPECT_EQ(r.instance, "6x4");
        EXPECT_LT(r.cost_gap, 1e-2) << "seed " << seed;
        EXPECT_LT(r.dual_gap, 1e-5) << "seed " << seed;
    }
}

TEST(OtBench, CsvHasOneLinePerRow) {
    const auto rows = ot_bench(BenchOptions{});
    const auto csv = lines_of(bench_csv(rows));
    EXPECT_EQ(csv.size(), rows.size() + 1);
    EXPECT_EQ(csv[0].rfind("instance,n,k,eps,exact", 0), 0u);
}

TEST(OtBench, SizeParsing) {
    const auto s = parse_bench_sizes("1x1,6x4,10x3");
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[1].n, 6u);
    EXPECT_EQ(s[1].k, 4u);
    EXPECT_EQ(s[2].k, 3u);
    for (const char* bad : {"6", "6x", "x4", "6x4x", "6y4", "6x4,"}) {
        EXPECT_THROW(parse_bench_sizes(bad), ConfigError) << bad;
    }
    std::mt19937_64 rng(0);
    EXPECT_THROW(random_bench_instance({30, 30}, 2, rng), ValueError);
}
