#include "ampf/amdr.hpp"

#include "ampf/errors.hpp"
#include "ampf/format.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace ampf {

namespace {

// Scalar NLMS filter over the last M chain values, newest first. Starts as
// the persistence predictor so early predictions are usable immediately.
struct NlmsFilter {
    std::vector<double> w;
    double mu, eps;

    NlmsFilter(std::size_t order, double mu_, double eps_) : w(order, 0.0), mu(mu_), eps(eps_) {
        w[0] = 1.0;
    }

    double predict(const double* history_newest_first) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * history_newest_first[i];
        return acc;
    }

    void adapt(const double* history_newest_first, double target, double prediction) {
        double energy = eps;
        for (std::size_t i = 0; i < w.size(); ++i)
            energy += history_newest_first[i] * history_newest_first[i];
        const double g = mu * (target - prediction) / energy;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += g * history_newest_first[i];
    }
};

} // namespace

std::string DualRunResult::ledger_csv() const {
    std::ostringstream os;
    os << "method,metric,fetched,substituted,degraded,transmitted_fraction\n";
    const std::size_t d = metric_names.size();
    const std::size_t rows = transmitted.size() / d;
    for (std::size_t m = 0; m < d; ++m) {
        std::uint64_t fetched = 0;
        for (std::size_t r = 0; r < rows; ++r)
            if (transmitted[r * d + m]) ++fetched;
        os << "amdr," << metric_names[m] << ',' << fetched << ',' << (rows - fetched) << ",0,"
           << format_double(transmitted_fraction[m]) << '\n';
    }
    return os.str();
}

DualRunResult run_dual_prediction(const MultivariateSeries& source,
                                  const DualPredictorConfig& cfg) {
    const std::size_t M = cfg.filter_order;
    if (M < 1) throw ConfigError("filter order must be >= 1");
    if (!(cfg.step_size > 0.0)) throw ConfigError("step size must be positive");
    if (cfg.e_max < 0.0) throw ConfigError("e_max must be >= 0");
    const std::size_t T = source.rows();
    const std::size_t d = source.dims();
    if (T <= M) throw DataError("series must be longer than the filter order");

    DualRunResult result;
    result.metric_names = source.metric_names();
    result.transmitted.assign(T * d, 0);
    result.transmitted_fraction.assign(d, 0.0);
    result.e_max = cfg.e_max;
    std::vector<double> recon(source.values());

    const bool scheduled = cfg.refresh_interval > 0;
    std::vector<double> lag(M);
    std::vector<double> chain(T); // predictor input stream, per metric
    for (std::size_t m = 0; m < d; ++m) {
        NlmsFilter source_filter(M, cfg.step_size, cfg.epsilon);
        NlmsFilter sink_filter(M, cfg.step_size, cfg.epsilon);
        std::uint64_t sent = 0;

        for (std::size_t t = 0; t < T; ++t) {
            const double actual = source.at(t, m);
            if (t < M) { // warm-up: both ends see real data
                result.transmitted[t * d + m] = 1;
                ++sent;
                chain[t] = actual;
                continue;
            }
            for (std::size_t i = 0; i < M; ++i) lag[i] = chain[t - 1 - i];
            const double source_pred = source_filter.predict(lag.data());
            const double sink_pred = sink_filter.predict(lag.data());

            const bool refresh = scheduled && t % cfg.refresh_interval == 0;
            const bool violation = std::abs(source_pred - actual) > cfg.e_max;
            const bool transmit = refresh || violation;
            if (transmit) {
                result.transmitted[t * d + m] = 1;
                ++sent;
            }
            recon[t * d + m] = transmit ? actual : sink_pred;

            if (scheduled) {
                // threshold-independent predictor chain; adapt on refreshes only
                chain[t] = refresh ? actual : sink_pred;
                if (refresh) {
                    source_filter.adapt(lag.data(), actual, source_pred);
                    sink_filter.adapt(lag.data(), actual, sink_pred);
                }
            } else {
                // both ends adapt toward the reconstructed value every step
                chain[t] = recon[t * d + m];
                source_filter.adapt(lag.data(), chain[t], source_pred);
                sink_filter.adapt(lag.data(), chain[t], sink_pred);
            }
            if (std::memcmp(source_filter.w.data(), sink_filter.w.data(),
                            M * sizeof(double)) != 0)
                result.filters_synchronized = false;
        }
        result.transmitted_fraction[m] =
            static_cast<double>(sent) / static_cast<double>(T);
    }

    result.reconstruction = MultivariateSeries::make(source.start_timestamp(), source.step(),
                                                     source.metric_names(), std::move(recon));
    return result;
}

std::vector<DualRunResult> sweep_dual(const MultivariateSeries& source,
                                      const DualPredictorConfig& base,
                                      const std::vector<double>& thresholds) {
    if (thresholds.empty()) throw ConfigError("threshold list must not be empty");
    std::vector<DualRunResult> results;
    results.reserve(thresholds.size());
    for (double t : thresholds) {
        DualPredictorConfig cfg = base;
        cfg.e_max = t;
        results.push_back(run_dual_prediction(source, cfg));
    }
    return results;
}

} // namespace ampf
