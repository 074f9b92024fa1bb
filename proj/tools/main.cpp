#include "ampf/clock.hpp"
#include "ampf/errors.hpp"
#include "ampf/evaluate.hpp"
#include "ampf/format.hpp"
#include "ampf/monitor.hpp"
#include "ampf/sources.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace ampf;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

void write_file_or_throw(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path);
    os << content;
    if (!os) throw IoError("write failed: " + path);
}

struct ModelFlags {
    std::string kind = "neural";
    ForecastModelConfig cfg;
    std::vector<double> quantiles{0.05, 0.25, 0.5, 0.75, 0.95};

    void attach(CLI::App* cmd) {
        cmd->add_option("--kind", kind, "Forecaster kind")
            ->check(CLI::IsMember({"neural", "seasonal_naive"}))
            ->capture_default_str();
        cmd->add_option("-L,--input-window", cfg.input_window, "Input window length")
            ->capture_default_str();
        cmd->add_option("-K,--horizon", cfg.horizon, "Forecast horizon length")
            ->capture_default_str();
        cmd->add_option("--hidden-dim", cfg.hidden_dim)->capture_default_str();
        cmd->add_option("--batch-size", cfg.batch_size)->capture_default_str();
        cmd->add_option("--dropout", cfg.dropout_rate)->capture_default_str();
        cmd->add_option("--learning-rate", cfg.learning_rate)->capture_default_str();
        cmd->add_option("--max-epochs", cfg.max_epochs)->capture_default_str();
        cmd->add_option("--window-stride", cfg.window_stride)->capture_default_str();
        cmd->add_option("--seasonal-period", cfg.seasonal_period,
                        "seasonal_naive lag; 0 = min(L, one day)")
            ->capture_default_str();
        cmd->add_option("--quantiles", quantiles, "Quantile levels (must include 0.5)")
            ->delimiter(',');
        cmd->add_flag("--no-calendar-features", "Disable calendar covariates");
        cmd->add_option("--model-seed", cfg.seed, "Training seed")->capture_default_str();
    }

    ForecastModelConfig resolve(const CLI::App* cmd) const {
        ForecastModelConfig out = cfg;
        out.kind = kind == "neural" ? ForecastKind::neural : ForecastKind::seasonal_naive;
        out.quantiles = QuantileSet::make(quantiles);
        if (cmd->count("--no-calendar-features") > 0)
            out.features = FeatureEncodingConfig{false, false, false, false};
        return out;
    }
};

struct SyntheticFlags {
    SyntheticWorkloadConfig cfg;
    std::vector<std::string> sinusoids; // amp:period pairs

    void attach(CLI::App* cmd) {
        cmd->add_option("--seed", cfg.seed, "Generator seed")->capture_default_str();
        cmd->add_option("--duration", cfg.duration, "Steps at 1 Hz")->capture_default_str();
        cmd->add_option("--start-timestamp", cfg.start_timestamp)->capture_default_str();
        cmd->add_option("--base-rate", cfg.base_rate)->capture_default_str();
        cmd->add_option("--rate-noise", cfg.rate_noise)->capture_default_str();
        cmd->add_option("--cpu-noise", cfg.cpu_noise)->capture_default_str();
        cmd->add_option("--mem-noise", cfg.mem_noise)->capture_default_str();
        cmd->add_option("--net-noise", cfg.net_noise)->capture_default_str();
        cmd->add_option("--sinusoid", sinusoids,
                        "Rate component AMPLITUDE:PERIOD_SECONDS (repeatable; default "
                        "daily and weekly)");
    }

    SyntheticWorkloadConfig resolve() const {
        SyntheticWorkloadConfig out = cfg;
        if (!sinusoids.empty()) {
            out.sinusoids.clear();
            for (const auto& s : sinusoids) {
                const auto colon = s.find(':');
                if (colon == std::string::npos)
                    throw ConfigError("sinusoid must be AMPLITUDE:PERIOD_SECONDS: " + s);
                Sinusoid sin_cfg;
                try {
                    sin_cfg.amplitude = std::stod(s.substr(0, colon));
                    sin_cfg.period_seconds = std::stod(s.substr(colon + 1));
                } catch (const std::exception&) {
                    throw ConfigError("malformed sinusoid argument: " + s);
                }
                if (sin_cfg.period_seconds <= 0.0)
                    throw ConfigError("sinusoid period must be positive");
                out.sinusoids.push_back(sin_cfg);
            }
        }
        return out;
    }
};

// train/validation split of one file by temporally contiguous fractions
std::pair<MultivariateSeries, MultivariateSeries> split_two(const MultivariateSeries& data,
                                                            double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train fraction must lie in (0, 1)");
    const std::size_t t1 =
        static_cast<std::size_t>(static_cast<double>(data.rows()) * train_fraction);
    if (t1 < 1 || t1 + 1 >= data.rows()) throw DataError("dataset too short to split");
    return {slice(data, 0, t1 - 1), slice(data, t1, data.rows() - 1)};
}

int run_app(int argc, char** argv) {
    CLI::App app{"Sampling-based adaptive monitoring with probabilistic forecasts"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file; flags override config keys");
    app.get_config_formatter_base()->section("");

    // generate ----------------------------------------------------------
    auto* generate = app.add_subcommand("generate", "Write a synthetic workload CSV");
    SyntheticFlags gen_flags;
    gen_flags.attach(generate);
    std::string gen_out = "dataset.csv";
    generate->add_option("--out", gen_out, "Output CSV path")->capture_default_str();

    // train ---------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "Fit a forecaster and serialize it");
    ModelFlags train_model;
    train_model.attach(train_cmd);
    std::string train_data, train_out = "model.bin";
    double train_fraction_2way = 0.75;
    train_cmd->add_option("--data", train_data, "Input CSV")->required();
    train_cmd->add_option("--out", train_out, "Model file")->capture_default_str();
    train_cmd->add_option("--train-fraction", train_fraction_2way,
                          "Temporal share used for training; rest validates")
        ->capture_default_str();

    // hyperopt -----------------------------------------------------------
    auto* hyperopt = app.add_subcommand("hyperopt", "Grid search over the tuning space");
    ModelFlags hyper_model;
    hyper_model.attach(hyperopt);
    std::string hyper_data, hyper_out;
    double hyper_fraction = 0.75;
    GridSearchSpace space;
    hyperopt->add_option("--data", hyper_data, "Input CSV")->required();
    hyperopt->add_option("--train-fraction", hyper_fraction)->capture_default_str();
    hyperopt->add_option("--input-windows", space.input_windows, "Candidate L values")
        ->delimiter(',');
    hyperopt->add_option("--horizons", space.horizons, "Candidate K values")->delimiter(',');
    hyperopt->add_option("--hidden-dims", space.hidden_dims)->delimiter(',');
    hyperopt->add_option("--batch-sizes", space.batch_sizes)->delimiter(',');
    hyperopt->add_option("--dropout-rates", space.dropout_rates)->delimiter(',');
    hyperopt->add_option("--search-epochs", space.search_epochs,
                         "Epoch budget per candidate")
        ->capture_default_str();
    hyperopt->add_option("--out", hyper_out, "Train the winner fully and save it here");

    // run ------------------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "Adaptive monitoring loop");
    std::string run_model_path, run_data, run_endpoint, run_policy = "feedback";
    std::string ledger_out, decisions_out, recon_out;
    MonitorConfig run_monitor_cfg;
    std::size_t run_horizons = 0;
    run_cmd->add_option("--model", run_model_path, "Trained model file")->required();
    run_cmd->add_option("--data", run_data, "Replay CSV (simulated clock)");
    run_cmd->add_option("--endpoint", run_endpoint, "Live scrape endpoint (wall clock)");
    run_cmd->add_option("--threshold", run_monitor_cfg.threshold, "Uncertainty threshold")
        ->capture_default_str();
    run_cmd->add_option("--n-samples", run_monitor_cfg.n_samples)->capture_default_str();
    run_cmd->add_option("--retrain-window", run_monitor_cfg.retrain_window,
                        "Horizon decisions considered; 0 disables retraining")
        ->capture_default_str();
    run_cmd->add_option("--retrain-fraction", run_monitor_cfg.retrain_fraction)
        ->capture_default_str();
    run_cmd->add_option("--fetch-retries", run_monitor_cfg.fetch_retries)
        ->capture_default_str();
    run_cmd->add_option("--seed", run_monitor_cfg.seed, "Sampling seed")->capture_default_str();
    run_cmd->add_option("--horizons", run_horizons, "Loop iterations; 0 = as many as replay allows")
        ->capture_default_str();
    run_cmd->add_option("--input-policy", run_policy, "feedback or replay")
        ->check(CLI::IsMember({"feedback", "replay"}))
        ->capture_default_str();
    run_cmd->add_option("--ledger-out", ledger_out, "Transmission ledger CSV");
    run_cmd->add_option("--decisions-out", decisions_out, "Per-horizon decision CSV");
    run_cmd->add_option("--recon-out", recon_out, "Reconstructed series CSV");

    // baseline ---------------------------------------------------------------
    auto* baseline = app.add_subcommand("baseline", "Single dual-prediction run");
    std::string base_data, base_ledger_out, base_recon_out;
    DualPredictorConfig dual;
    double base_bounds_fraction = 0.6;
    baseline->add_option("--data", base_data, "Input CSV")->required();
    baseline->add_option("--e-max", dual.e_max, "Allowed prediction error")->required();
    baseline->add_option("--filter-order", dual.filter_order)->capture_default_str();
    baseline->add_option("--step-size", dual.step_size)->capture_default_str();
    baseline->add_option("--refresh-interval", dual.refresh_interval,
                         "Scheduled refresh cadence; 0 adapts on transmissions")
        ->capture_default_str();
    baseline->add_option("--bounds-fraction", base_bounds_fraction,
                         "Leading share that fits the normalization bounds; the run "
                         "covers the rest")
        ->capture_default_str();
    baseline->add_option("--ledger-out", base_ledger_out, "Ledger CSV");
    baseline->add_option("--recon-out", base_recon_out, "Reconstruction CSV, original units");

    // sweep -------------------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand("sweep", "Threshold sweep over both methods");
    SweepConfig sweep_cfg;
    ModelFlags sweep_model;
    sweep_model.cfg.input_window = 48;
    sweep_model.cfg.horizon = 24;
    sweep_model.cfg.hidden_dim = 32;
    sweep_model.attach(sweep_cmd);
    SyntheticFlags sweep_synth;
    sweep_synth.attach(sweep_cmd);
    std::vector<std::string> sweep_methods{"ampf", "amdr"};
    std::string sweep_out_dir = "report";
    bool sweep_hyperopt = false;
    sweep_cmd->add_option("--data", sweep_cfg.csv_path,
                          "Input CSV; omitted means synthetic generation");
    sweep_cmd->add_option("--model", sweep_cfg.model_path,
                          "Pre-trained model file; skips training");
    sweep_cmd->add_option("--methods", sweep_methods, "Subset of ampf,amdr")
        ->delimiter(',');
    sweep_cmd->add_option("--thresholds", sweep_cfg.thresholds, "Sweep thresholds")
        ->delimiter(',');
    sweep_cmd->add_option("--train-fraction", sweep_cfg.train_fraction)->capture_default_str();
    sweep_cmd->add_option("--validation-fraction", sweep_cfg.validation_fraction)
        ->capture_default_str();
    sweep_cmd->add_option("--sweep-seed", sweep_cfg.seed, "Sampling seed")
        ->capture_default_str();
    sweep_cmd->add_option("--n-samples", sweep_cfg.n_samples)->capture_default_str();
    sweep_cmd->add_option("--filter-order", sweep_cfg.dual.filter_order)->capture_default_str();
    sweep_cmd->add_option("--step-size", sweep_cfg.dual.step_size)->capture_default_str();
    sweep_cmd->add_option("--refresh-interval", sweep_cfg.dual.refresh_interval)
        ->capture_default_str();
    sweep_cmd->add_flag("--hyperopt", sweep_hyperopt, "Grid-search the model config first");
    sweep_cmd->add_option("--out-dir", sweep_out_dir, "Report directory")
        ->capture_default_str();

    // report ---------------------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "Charts from an existing sweep.csv");
    std::string report_in, report_out_dir = "report";
    report_cmd->add_option("--in", report_in, "sweep.csv path")->required();
    report_cmd->add_option("--out-dir", report_out_dir)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e); // prints help or the parse error
        return rc == 0 ? kExitOk : kExitConfig;
    }

    if (generate->parsed()) {
        const SyntheticWorkloadConfig cfg = gen_flags.resolve();
        const MultivariateSeries data = generate_synthetic(cfg);
        write_csv(data, gen_out);
        write_file_or_throw(gen_out + ".meta.txt", describe_synthetic(cfg));
        std::cout << "wrote " << data.rows() << " rows to " << gen_out << "\n";
        return kExitOk;
    }

    if (train_cmd->parsed()) {
        const auto data = load_csv(train_data);
        const auto [tr, va] = split_two(data, train_fraction_2way);
        const auto model = train(tr, va, train_model.resolve(train_cmd));
        model.save(train_out);
        const auto& rep = model.report();
        std::cout << "trained " << (model.kind() == ForecastKind::neural ? "neural" : "seasonal_naive")
                  << " forecaster: " << rep.stopped_epoch << " epochs, best epoch "
                  << rep.best_epoch << ", validation loss "
                  << format_double(rep.validation_loss[rep.best_epoch - 1]) << "\n";
        std::cout << "saved to " << train_out << "\n";
        return kExitOk;
    }

    if (hyperopt->parsed()) {
        const auto data = load_csv(hyper_data);
        const auto [tr, va] = split_two(data, hyper_fraction);
        const auto base = hyper_model.resolve(hyperopt);
        const auto result = grid_search(tr, va, base, space);
        std::cout << "input_window,horizon,hidden_dim,batch_size,dropout_rate,validation_loss\n";
        for (const auto& e : result.entries)
            std::cout << e.config.input_window << ',' << e.config.horizon << ','
                      << e.config.hidden_dim << ',' << e.config.batch_size << ','
                      << format_double(e.config.dropout_rate) << ','
                      << format_double(e.validation_loss) << "\n";
        std::cout << "best: L=" << result.best.input_window << " K=" << result.best.horizon
                  << " hidden=" << result.best.hidden_dim << " batch=" << result.best.batch_size
                  << " dropout=" << format_double(result.best.dropout_rate) << "\n";
        if (!hyper_out.empty()) {
            const auto model = train(tr, va, result.best);
            model.save(hyper_out);
            std::cout << "saved fully trained winner to " << hyper_out << "\n";
        }
        return kExitOk;
    }

    if (run_cmd->parsed()) {
        if (run_data.empty() == run_endpoint.empty())
            throw ConfigError("run needs exactly one of --data or --endpoint");
        TrainedForecaster model = TrainedForecaster::load(run_model_path);
        run_monitor_cfg.input_window = model.config().input_window;
        run_monitor_cfg.horizon = model.config().horizon;
        run_monitor_cfg.input_policy =
            run_policy == "replay" ? InputPolicy::replay_truth : InputPolicy::resolved_feedback;

        std::unique_ptr<MetricSource> source;
        std::unique_ptr<Clock> clock;
        std::size_t horizons = run_horizons;
        if (!run_data.empty()) {
            auto replay = std::make_unique<ReplaySource>(load_csv(run_data));
            const auto& series = replay->series();
            const std::size_t L = run_monitor_cfg.input_window;
            const std::size_t K = run_monitor_cfg.horizon;
            if (series.rows() < L + K) throw DataError("replay shorter than L + K");
            const std::size_t max_h = (series.rows() - L) / K;
            if (horizons == 0 || horizons > max_h) horizons = max_h;
            clock = std::make_unique<SimulatedClock>(series.timestamp_at(L - 1));
            source = std::move(replay);
        } else {
            if (run_monitor_cfg.input_policy == InputPolicy::replay_truth)
                throw ConfigError("replay input policy requires --data");
            if (horizons == 0) throw ConfigError("live runs need an explicit --horizons");
            source = std::make_unique<HttpSource>(run_endpoint);
            clock = std::make_unique<WallClock>();
        }

        auto [state, final_model] =
            run_monitor(*source, std::move(model), run_monitor_cfg, *clock, horizons);
        std::cout << state.ledger.to_csv();
        if (!ledger_out.empty()) write_file_or_throw(ledger_out, state.ledger.to_csv());
        if (!decisions_out.empty())
            write_file_or_throw(decisions_out, state.ledger.decisions_csv());
        if (!recon_out.empty()) write_csv(reconstruct(state), recon_out);
        (void)final_model;
        return kExitOk;
    }

    if (baseline->parsed()) {
        const auto data = load_csv(base_data);
        const auto [head, tail] = split_two(data, base_bounds_fraction);
        const NormalizationBounds bounds = fit_bounds(head);
        const auto result = run_dual_prediction(normalize(tail, bounds), dual);
        std::cout << result.ledger_csv();
        if (!base_ledger_out.empty()) write_file_or_throw(base_ledger_out, result.ledger_csv());
        if (!base_recon_out.empty())
            write_csv(denormalize(result.reconstruction, bounds), base_recon_out);
        return kExitOk;
    }

    if (sweep_cmd->parsed()) {
        sweep_cfg.model = sweep_model.resolve(sweep_cmd);
        sweep_cfg.synthetic = sweep_synth.resolve();
        sweep_cfg.hyperopt = sweep_hyperopt;
        sweep_cfg.run_ampf = false;
        sweep_cfg.run_amdr = false;
        for (const auto& m : sweep_methods) {
            if (m == "ampf") sweep_cfg.run_ampf = true;
            else if (m == "amdr") sweep_cfg.run_amdr = true;
            else throw ConfigError("unknown method: " + m);
        }
        const auto result = run_sweep(sweep_cfg);
        emit_report(result, sweep_out_dir);
        std::cout << "wrote " << result.rows.size() << " sweep rows to " << sweep_out_dir
                  << "/sweep.csv\n";
        return kExitOk;
    }

    if (report_cmd->parsed()) {
        std::ifstream is(report_in, std::ios::binary);
        if (!is) throw IoError("cannot open " + report_in);
        std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        emit_report(SweepResult::from_csv(text), report_out_dir);
        std::cout << "charts written to " << report_out_dir << "\n";
        return kExitOk;
    }

    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_app(argc, argv);
    } catch (const ampf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ampf::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ampf::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ampf::OrderError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ampf::SchemaError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ampf::ShapeError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ampf::IndexError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ampf::DomainError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ampf::MissingMetricError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const ampf::Error& e) { // FetchError, IoError, TrainingDiverged, ...
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
