#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "otvq/data.hpp"
#include "otvq/expcli/config.hpp"
#include "otvq/expcli/metrics.hpp"
#include "otvq/expcli/svg.hpp"
#include "otvq/models.hpp"

namespace otvq::expcli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumeric = 2, kExitIo = 3 };

inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kLossCurveFile = "loss_curve.svg";

inline std::string usage_hist_file(std::size_t m) { return "usage_hist_m" + std::to_string(m) + ".svg"; }

// $OTVQ_OUT when set and nonempty, else the configured directory.
inline std::filesystem::path resolve_out_dir(const TrainConfig& c) {
    const char* env = std::getenv("OTVQ_OUT");
    return env && *env ? std::filesystem::path(env) : c.out_dir;
}

struct RunResult {
    models::EvalMetrics final_metrics;
    std::vector<MetricsRow> rows;
    std::uint64_t runtime_ms = 0;
};

inline nlohmann::json eval_json(const models::EvalMetrics& e) {
    nlohmann::json j;
    j["recon_mse"] = e.mse;
    j["psnr_infinite"] = std::isinf(e.psnr);
    j["psnr"] = std::isinf(e.psnr) ? nlohmann::json(nullptr) : nlohmann::json(e.psnr);
    j["perplexity"] = e.perplexities;
    j["usage"] = e.usage.counts;
    return j;
}

namespace detail {

// Running sums for one logging interval.
struct IntervalAccumulator {
    std::size_t steps = 0;
    models::LossBreakdown sum;
    vq::UsageStats usage;

    void add(const models::LossBreakdown& p, const std::vector<std::size_t>& indices) {
        ++steps;
        sum.recon += p.recon;
        sum.ws_term += p.ws_term;
        sum.kl_term += p.kl_term;
        sum.total += p.total;
        usage.add(indices);
    }

    MetricsRow row(std::uint64_t iter, std::uint64_t wallclock_ms) const {
        const double n = static_cast<double>(steps);
        return MetricsRow{iter, sum.recon / n, sum.ws_term / n, sum.kl_term / n, sum.total / n, usage.perplexities(),
                          wallclock_ms};
    }
};

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    return out;
}

}  // namespace detail

/// Trains per the config and writes metrics.csv, checkpoint.bin,
/// summary.json, loss_curve.svg and usage_hist_m{m}.svg into `out_dir`.
/// metrics.csv is flushed row by row, so a run aborted by a NumericError
/// keeps the rows logged before the failure.
inline RunResult run_experiment(TrainConfig c, const std::filesystem::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count());
    };
    const data::Dataset dataset = load_dataset(c);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());

    models::TrainState state = models::init_state(c.model);
    data::BatchStream stream(dataset, c.model.batch_size, models::derive_seed(c.model.seed, models::kBatchSeed), true);
    const std::size_t comps = c.model.M;

    RunResult result;
    auto csv = detail::open_out(out_dir / kMetricsFile);
    csv << metrics_header(comps) << '\n' << std::flush;

    detail::IntervalAccumulator acc{0, {}, vq::UsageStats(comps, c.model.K)};
    std::vector<std::size_t> indices;
    for (std::size_t it = 1; it <= c.iters; ++it) {
        const auto parts = models::train_step(state, stream.next(), &indices);
        acc.add(parts, indices);
        if (it % c.log_every == 0 || it == c.iters) {
            result.rows.push_back(acc.row(it, c.wallclock ? elapsed_ms() : 0));
            csv << format_metrics_row(result.rows.back()) << '\n' << std::flush;
            acc = detail::IntervalAccumulator{0, {}, vq::UsageStats(comps, c.model.K)};
        }
    }
    if (!csv) throw IoError("write failed for metrics.csv");
    state.sampler_state = stream.save_state();
    models::save_checkpoint(out_dir / kCheckpointFile, state);

    result.final_metrics = models::evaluate(state, dataset);
    const std::string method = models::method_name(c.model.method);
    if (result.rows.empty()) {
        write_text_file(out_dir / kLossCurveFile, empty_chart_svg(method + " training loss", "iteration", "total loss"));
    } else {
        std::vector<double> x, y;
        for (const auto& r : result.rows) {
            x.push_back(static_cast<double>(r.iter));
            y.push_back(r.total_loss);
        }
        write_text_file(out_dir / kLossCurveFile, line_chart_svg(x, y, method + " training loss", "iteration", "total loss"));
    }
    for (std::size_t m = 0; m < comps; ++m) {
        write_text_file(out_dir / usage_hist_file(m),
                        histogram_svg(result.final_metrics.usage.counts[m],
                                      method + " codeword usage, component " + std::to_string(m), "codeword", "count"));
    }

    result.runtime_ms = elapsed_ms();
    nlohmann::json summary = eval_json(result.final_metrics);
    summary["method"] = method;
    summary["seed"] = c.model.seed;
    summary["iterations"] = state.iteration;
    summary["dataset"] = dataset.name;
    summary["n_samples"] = dataset.size();
    summary["K"] = c.model.K;
    summary["M"] = c.model.M;
    summary["runtime_ms"] = result.runtime_ms;
    write_text_file(out_dir / kSummaryFile, summary.dump(2) + "\n");
    return result;
}

/// Runs `body`, reporting failures on `err` and mapping them to exit codes.
template <class Fn>
int guarded(Fn&& body, std::ostream& err = std::cerr) {
    try {
        body();
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const FormatError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
}

/// One child process per seed, writing into out_root/seed_<s>; at most `jobs`
/// run at once. Returns the largest child exit code.
inline int run_seed_sweep(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                          const std::filesystem::path& out_root, std::size_t jobs = 1) {
    jobs = std::max<std::size_t>(1, jobs);
    int worst = kExitOk;
    std::size_t running = 0;
    auto reap = [&] {
        int status = 0;
        if (::wait(&status) > 0) {
            const int code = WIFEXITED(status) ? WEXITSTATUS(status) : kExitNumeric;
            worst = std::max(worst, code);
            --running;
        }
    };
    for (std::uint64_t seed : seeds) {
        if (running == jobs) reap();
        std::cout.flush();
        std::cerr.flush();
        const pid_t pid = ::fork();
        if (pid < 0) throw IoError("fork failed");
        if (pid == 0) {
            TrainConfig c = base;
            c.model.seed = seed;
            const int code = guarded([&] { run_experiment(c, out_root / ("seed_" + std::to_string(seed))); });
            std::cout.flush();
            std::cerr.flush();
            ::_exit(code);
        }
        ++running;
    }
    while (running > 0) reap();
    return worst;
}

}  // namespace otvq::expcli
