#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esrnn/commands.hpp"
#include "esrnn/config.hpp"
#include "esrnn/errors.hpp"

namespace {

struct SharedOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> checkpoint;
    std::optional<std::string> out;
};

void add_shared(CLI::App* cmd, SharedOptions& opts) {
    cmd->add_option("--config", opts.config_path, "Run configuration file")->required();
    cmd->add_option("--seed", opts.seed, "Override train.seed");
    cmd->add_option("--checkpoint", opts.checkpoint, "Override paths.checkpoint");
    cmd->add_option("--out", opts.out, "Override paths.output_dir");
}

esrnn::RunConfig resolve(const SharedOptions& opts) {
    esrnn::RunConfig cfg = esrnn::load_run_config(opts.config_path);
    if (opts.seed) cfg.train.seed = *opts.seed;
    if (opts.checkpoint) cfg.checkpoint = *opts.checkpoint;
    if (opts.out) cfg.output_dir = *opts.out;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ES-RNN hybrid forecasting engine"};
    app.require_subcommand(1);

    SharedOptions prepare_opts, train_opts, evaluate_opts, forecast_opts, benchmark_opts;
    std::vector<std::string> forecast_ids;

    add_shared(app.add_subcommand("prepare", "Ingest, filter, equalize and bundle the dataset"),
               prepare_opts);
    add_shared(app.add_subcommand("train", "Train the model and save the best checkpoint"),
               train_opts);
    add_shared(app.add_subcommand("evaluate", "Score the test split against the baseline"),
               evaluate_opts);
    CLI::App* forecast = app.add_subcommand("forecast", "Write real-scale forecasts");
    add_shared(forecast, forecast_opts);
    forecast->add_option("--ids", forecast_ids, "Forecast only these series ids")->delimiter(',');
    add_shared(app.add_subcommand("benchmark", "Time one epoch batched vs per-series"),
               benchmark_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("prepare")) esrnn::cmd_prepare(resolve(prepare_opts));
        else if (app.got_subcommand("train")) esrnn::cmd_train(resolve(train_opts));
        else if (app.got_subcommand("evaluate")) esrnn::cmd_evaluate(resolve(evaluate_opts));
        else if (app.got_subcommand("forecast")) esrnn::cmd_forecast(resolve(forecast_opts), forecast_ids);
        else if (app.got_subcommand("benchmark")) esrnn::cmd_benchmark(resolve(benchmark_opts));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
