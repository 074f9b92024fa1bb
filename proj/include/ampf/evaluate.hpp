#pragma once

#include "ampf/amdr.hpp"
#include "ampf/forecast.hpp"
#include "ampf/monitor.hpp"
#include "ampf/sources.hpp"

#include <string>
#include <vector>

namespace ampf {

// (1/n) * sum 2|y_hat - y| / (|y| + |y_hat|), zero terms for 0/0; in [0, 2].
double smape(const MultivariateSeries& truth, const MultivariateSeries& recon,
             const std::string& metric);

double mse(const MultivariateSeries& truth, const MultivariateSeries& recon,
           const std::string& metric);

// 0.005 .. 0.05 in steps of 0.0025 (19 values).
std::vector<double> default_thresholds();

struct SweepConfig {
    // the sweep protocol wants exactly monotone amdr curves
    SweepConfig() { dual.refresh_interval = 16; }

    std::vector<double> thresholds = default_thresholds();
    bool run_ampf = true;
    bool run_amdr = true;

    std::string csv_path; // when set, replaces the synthetic dataset
    SyntheticWorkloadConfig synthetic;

    double train_fraction = 0.6;
    double validation_fraction = 0.2; // test gets the rest
    std::uint64_t seed = 0;

    ForecastModelConfig model; // ampf forecaster
    std::string model_path;    // when set, load this model instead of training
    bool hyperopt = false;     // grid-search the model config first
    GridSearchSpace space;
    std::size_t n_samples = 30;
    std::size_t fetch_retries = 3;

    DualPredictorConfig dual; // amdr filter parameters (e_max comes per threshold)

    void validate() const;
};

struct SweepRow {
    std::string method; // "ampf" or "amdr"
    double threshold = 0.0;
    std::string metric;
    double transmitted_fraction = 0.0;
    double smape = 0.0;
    double mse = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows; // sorted by (method, threshold, metric)

    std::string to_csv() const; // method,threshold,metric,transmitted_fraction,smape,mse
    static SweepResult from_csv(const std::string& text);
};

// Trains once (per the frozen-model protocol), then evaluates every
// (method, threshold, metric) cell on the test split. Deterministic per seed.
SweepResult run_sweep(const SweepConfig& cfg);

// Writes sweep.csv plus transmitted.svg / smape.svg line charts (threshold on
// the x axis, one line per method and metric, data table embedded).
void emit_report(const SweepResult& result, const std::string& out_dir);

} // namespace ampf
