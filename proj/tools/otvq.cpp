#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "otvq/expcli.hpp"

namespace fs = std::filesystem;
using namespace otvq;
using namespace otvq::expcli;

namespace {

int cmd_train(const fs::path& config_path, const std::vector<std::uint64_t>& seeds, const std::string& out,
              std::size_t jobs) {
    TrainConfig c;
    if (int code = guarded([&] { c = parse_config(config_path); })) return code;
    if (!out.empty()) c.out_dir = out;
    const fs::path out_dir = resolve_out_dir(c);
    if (!seeds.empty()) {
        const int code = run_seed_sweep(c, seeds, out_dir, jobs);
        std::cout << "sweep of " << seeds.size() << " seeds into " << out_dir.string() << " exited " << code << '\n';
        return code;
    }
    return guarded([&] {
        const auto r = run_experiment(c, out_dir);
        std::cout << eval_json(r.final_metrics).dump() << '\n';
        std::cout << "artifacts in " << out_dir.string() << '\n';
    });
}

int cmd_eval(const fs::path& checkpoint, const fs::path& config_path) {
    return guarded([&] {
        TrainConfig c = parse_config(config_path);
        const data::Dataset d = load_dataset(c);
        const models::TrainState s = models::load_checkpoint(checkpoint);
        auto j = eval_json(models::evaluate(s, d));
        j["method"] = models::method_name(s.config.method);
        j["iterations"] = s.iteration;
        std::cout << j.dump(2) << '\n';
    });
}

int cmd_bench(const std::string& sizes, const std::vector<double>& eps, std::uint64_t seed, const std::string& out) {
    return guarded([&] {
        BenchOptions o;
        o.sizes = parse_bench_sizes(sizes);
        o.eps = eps;
        o.seed = seed;
        for (double e : o.eps) {
            if (!(e > 0.0)) throw ConfigError("--eps values must be positive");
        }
        const auto rows = ot_bench(o);
        std::cout << bench_table(rows);
        fs::path dir = out.empty() ? resolve_out_dir(TrainConfig{}) : fs::path(out);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
        write_text_file(dir / "ot_bench.csv", bench_csv(rows));
        std::cout << "wrote " << (dir / "ot_bench.csv").string() << '\n';
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal-transport vector quantization experiments"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "Train from a JSON config");
    std::string train_config, train_out;
    std::vector<std::uint64_t> seeds;
    std::size_t jobs = 1;
    train->add_option("config", train_config, "Config JSON")->required()->check(CLI::ExistingFile);
    train->add_option("--seeds", seeds, "Seed sweep, one run per seed in <out>/seed_<s>")->delimiter(',');
    train->add_option("--out", train_out, "Output directory (overrides config and OTVQ_OUT)");
    train->add_option("--jobs", jobs, "Concurrent sweep runs")->check(CLI::PositiveNumber);

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the config's dataset");
    std::string ckpt, eval_config;
    eval->add_option("checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("config", eval_config, "Config JSON")->required()->check(CLI::ExistingFile);

    auto* bench = app.add_subcommand("ot-bench", "Exact vs Sinkhorn vs semi-dual values on random instances");
    std::string sizes = "1x1,6x4,10x10", bench_out;
    std::vector<double> eps{1e-1, 1e-2, 1e-3};
    std::uint64_t bench_seed = 0;
    bench->add_option("--sizes", sizes, "Comma-separated NxK sizes")->capture_default_str();
    bench->add_option("--eps", eps, "Comma-separated regularization values")->delimiter(',')->capture_default_str();
    bench->add_option("--seed", bench_seed, "Instance seed")->capture_default_str();
    bench->add_option("--out", bench_out, "Directory for ot_bench.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (*train) return cmd_train(train_config, seeds, train_out, jobs);
    if (*eval) return cmd_eval(ckpt, eval_config);
    return cmd_bench(sizes, eps, bench_seed, bench_out);
}
