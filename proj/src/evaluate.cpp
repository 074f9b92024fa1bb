#include "ampf/evaluate.hpp"

#include "ampf/errors.hpp"
#include "ampf/format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ampf {

namespace {

void check_aligned(const MultivariateSeries& truth, const MultivariateSeries& recon) {
    if (truth.rows() != recon.rows() || truth.start_timestamp() != recon.start_timestamp() ||
        truth.step() != recon.step())
        throw ShapeError("truth and reconstruction are not aligned");
}

} // namespace

double smape(const MultivariateSeries& truth, const MultivariateSeries& recon,
             const std::string& metric) {
    check_aligned(truth, recon);
    const std::size_t ct = truth.metric_index(metric);
    const std::size_t cr = recon.metric_index(metric);
    double sum = 0.0;
    for (std::size_t r = 0; r < truth.rows(); ++r) {
        const double y = truth.at(r, ct);
        const double yh = recon.at(r, cr);
        const double den = std::abs(y) + std::abs(yh);
        if (den > 0.0) sum += 2.0 * std::abs(yh - y) / den; // 0/0 term counts as 0
    }
    return sum / static_cast<double>(truth.rows());
}

double mse(const MultivariateSeries& truth, const MultivariateSeries& recon,
           const std::string& metric) {
    check_aligned(truth, recon);
    const std::size_t ct = truth.metric_index(metric);
    const std::size_t cr = recon.metric_index(metric);
    double sum = 0.0;
    for (std::size_t r = 0; r < truth.rows(); ++r) {
        const double d = recon.at(r, cr) - truth.at(r, ct);
        sum += d * d;
    }
    return sum / static_cast<double>(truth.rows());
}

std::vector<double> default_thresholds() {
    std::vector<double> t;
    t.reserve(19);
    for (int i = 0; i < 19; ++i) t.push_back(static_cast<double>(50 + 25 * i) / 10000.0);
    return t;
}

void SweepConfig::validate() const {
    if (thresholds.empty()) throw ConfigError("threshold list must not be empty");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0)) throw ConfigError("thresholds must be positive");
        if (i > 0 && thresholds[i] < thresholds[i - 1])
            throw ConfigError("thresholds must be sorted ascending");
    }
    if (!run_ampf && !run_amdr) throw ConfigError("no method selected");
    if (!(train_fraction > 0.0 && validation_fraction > 0.0 &&
          train_fraction + validation_fraction < 1.0))
        throw ConfigError("split fractions must be positive and sum below 1");
}

std::string SweepResult::to_csv() const {
    std::ostringstream os;
    os << "method,threshold,metric,transmitted_fraction,smape,mse\n";
    for (const SweepRow& r : rows)
        os << r.method << ',' << format_double(r.threshold) << ',' << r.metric << ','
           << format_double(r.transmitted_fraction) << ',' << format_double(r.smape) << ','
           << format_double(r.mse) << '\n';
    return os.str();
}

namespace {

double parse_csv_double(std::string_view f, const char* what) {
    double v = 0.0;
    auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
        throw ParseError(std::string("bad sweep csv field: ") + what);
    return v;
}

} // namespace

SweepResult SweepResult::from_csv(const std::string& text) {
    SweepResult out;
    std::istringstream is(text);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            if (line != "method,threshold,metric,transmitted_fraction,smape,mse")
                throw ParseError("unexpected sweep csv header");
            header = false;
            continue;
        }
        std::vector<std::string_view> fields;
        std::string_view sv(line);
        std::size_t pos = 0;
        while (true) {
            std::size_t comma = sv.find(',', pos);
            if (comma == std::string_view::npos) {
                fields.push_back(sv.substr(pos));
                break;
            }
            fields.push_back(sv.substr(pos, comma - pos));
            pos = comma + 1;
        }
        if (fields.size() != 6) throw ParseError("sweep csv row needs 6 fields");
        SweepRow r;
        r.method = std::string(fields[0]);
        r.threshold = parse_csv_double(fields[1], "threshold");
        r.metric = std::string(fields[2]);
        r.transmitted_fraction = parse_csv_double(fields[3], "transmitted_fraction");
        r.smape = parse_csv_double(fields[4], "smape");
        r.mse = parse_csv_double(fields[5], "mse");
        out.rows.push_back(std::move(r));
    }
    if (header) throw ParseError("empty sweep csv");
    return out;
}

SweepResult run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    const MultivariateSeries data =
        cfg.csv_path.empty() ? generate_synthetic(cfg.synthetic) : load_csv(cfg.csv_path);
    const std::size_t T = data.rows();
    const std::size_t t1 = static_cast<std::size_t>(static_cast<double>(T) * cfg.train_fraction);
    const std::size_t t2 = static_cast<std::size_t>(
        static_cast<double>(T) * (cfg.train_fraction + cfg.validation_fraction));
    if (t1 < 2 || t2 <= t1 || t2 >= T) throw DataError("dataset too short for the splits");
    const MultivariateSeries train_split = slice(data, 0, t1 - 1);
    const MultivariateSeries val_split = slice(data, t1, t2 - 1);
    const MultivariateSeries test_split = slice(data, t2, T - 1);

    SweepResult result;

    if (cfg.run_ampf) {
        TrainedForecaster model;
        if (!cfg.model_path.empty()) {
            model = TrainedForecaster::load(cfg.model_path);
            if (model.metric_names() != data.metric_names())
                throw SchemaError("loaded model does not match the dataset metrics");
        } else {
            ForecastModelConfig model_cfg = cfg.model;
            if (cfg.hyperopt)
                model_cfg = grid_search(train_split, val_split, cfg.model, cfg.space).best;
            model = train(train_split, val_split, model_cfg);
        }
        const std::size_t L = model.config().input_window;
        const std::size_t K = model.config().horizon;
        if (test_split.rows() < L + K) throw DataError("test split shorter than L + K");
        const std::size_t n_horizons = (test_split.rows() - L) / K;

        for (double tau : cfg.thresholds) {
            ReplaySource source(test_split);
            SimulatedClock clock(test_split.timestamp_at(L - 1));
            MonitorConfig mc;
            mc.input_window = L;
            mc.horizon = K;
            mc.threshold = tau;
            mc.n_samples = cfg.n_samples;
            mc.retrain_window = 0; // frozen model across the sweep
            mc.fetch_retries = cfg.fetch_retries;
            mc.seed = cfg.seed;
            mc.input_policy = InputPolicy::replay_truth;
            auto [state, unused] = run_monitor(source, model, mc, clock, n_horizons);
            (void)unused;
            const MultivariateSeries recon = reconstruct(state);
            const MultivariateSeries truth = slice(test_split, 0, recon.rows() - 1);
            for (std::size_t m = 0; m < recon.dims(); ++m) {
                SweepRow row;
                row.method = "ampf";
                row.threshold = tau;
                row.metric = recon.metric_names()[m];
                row.transmitted_fraction = state.ledger.transmitted_fraction(m);
                row.smape = smape(truth, recon, row.metric);
                row.mse = mse(truth, recon, row.metric);
                result.rows.push_back(std::move(row));
            }
        }
    }

    if (cfg.run_amdr) {
        // same scale as the primary method: normalized with train-split bounds
        const NormalizationBounds bounds = fit_bounds(train_split);
        const MultivariateSeries test_norm = normalize(test_split, bounds);
        for (double tau : cfg.thresholds) {
            DualPredictorConfig dc = cfg.dual;
            dc.e_max = tau;
            const DualRunResult run = run_dual_prediction(test_norm, dc);
            const MultivariateSeries recon = denormalize(run.reconstruction, bounds);
            for (std::size_t m = 0; m < recon.dims(); ++m) {
                SweepRow row;
                row.method = "amdr";
                row.threshold = tau;
                row.metric = recon.metric_names()[m];
                row.transmitted_fraction = run.transmitted_fraction[m];
                row.smape = smape(test_split, recon, row.metric);
                row.mse = mse(test_split, recon, row.metric);
                result.rows.push_back(std::move(row));
            }
        }
    }

    std::sort(result.rows.begin(), result.rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.method != b.method) return a.method < b.method;
        if (a.threshold != b.threshold) return a.threshold < b.threshold;
        return a.metric < b.metric;
    });
    return result;
}

// ---------------------------------------------------------------------------
// report emission

namespace {

struct ChartSeries {
    std::string label;
    std::string color;
    bool dashed = false;
    std::vector<std::pair<double, double>> points;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string svg_line_chart(const std::string& title, const std::string& y_label,
                           const std::vector<ChartSeries>& series) {
    const double width = 820, height = 480;
    const double ml = 70, mr = 180, mt = 40, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = 0, xmax = 1, ymax = 0;
    bool first = true;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (first) {
                xmin = xmax = x;
                first = false;
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymax = std::max(ymax, y);
        }
    if (xmax <= xmin) xmax = xmin + 1e-9;
    if (ymax <= 0.0) ymax = 1.0;
    ymax *= 1.05;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - y / ymax * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<desc>\n";
    for (const auto& s : series) {
        os << s.label << ':';
        for (const auto& [x, y] : s.points)
            os << ' ' << format_double(x) << ',' << format_double(y);
        os << '\n';
    }
    os << "</desc>\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << ml << "\" y=\"24\" font-size=\"15\">" << title << "</text>\n";
    // axes
    os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
       << mt + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
       << "\" stroke=\"black\"/>\n";
    // x ticks at exactly the swept range
    os << "<text x=\"" << px(xmin) << "\" y=\"" << mt + ph + 18
       << "\" text-anchor=\"middle\">" << format_double(xmin) << "</text>\n";
    os << "<text x=\"" << px(xmax) << "\" y=\"" << mt + ph + 18
       << "\" text-anchor=\"middle\">" << format_double(xmax) << "</text>\n";
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
       << "\" text-anchor=\"middle\">threshold</text>\n";
    os << "<text x=\"18\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << mt + ph / 2 << ")\">" << y_label << "</text>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(0) + 4 << "\" text-anchor=\"end\">0</text>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(ymax) + 4 << "\" text-anchor=\"end\">"
       << format_double(ymax) << "</text>\n";

    double legend_y = mt + 8;
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\"";
        if (s.dashed) os << " stroke-dasharray=\"6 3\"";
        os << " stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points) os << px(x) << ',' << py(y) << ' ';
        os << "\"/>\n";
        os << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << legend_y << "\" x2=\""
           << ml + pw + 36 << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color << "\"";
        if (s.dashed) os << " stroke-dasharray=\"6 3\"";
        os << " stroke-width=\"1.5\"/>\n";
        os << "<text x=\"" << ml + pw + 42 << "\" y=\"" << legend_y + 4 << "\">" << s.label
           << "</text>\n";
        legend_y += 18;
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<ChartSeries> collect_series(const SweepResult& result,
                                        double SweepRow::* field) {
    std::vector<ChartSeries> out;
    std::vector<std::string> metrics;
    for (const SweepRow& r : result.rows)
        if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end())
            metrics.push_back(r.metric);
    std::sort(metrics.begin(), metrics.end());
    for (const char* method : {"ampf", "amdr"}) {
        for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
            ChartSeries s;
            s.label = std::string(method) + " " + metrics[mi];
            s.color = kPalette[mi % (sizeof(kPalette) / sizeof(kPalette[0]))];
            s.dashed = std::string(method) == "amdr";
            for (const SweepRow& r : result.rows)
                if (r.method == method && r.metric == metrics[mi])
                    s.points.emplace_back(r.threshold, r.*field);
            std::sort(s.points.begin(), s.points.end());
            if (!s.points.empty()) out.push_back(std::move(s));
        }
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << content;
    if (!os) throw IoError("write failed: " + path.string());
}

} // namespace

void emit_report(const SweepResult& result, const std::string& out_dir) {
    if (result.rows.empty()) throw DataError("nothing to report");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const std::filesystem::path dir(out_dir);
    write_text_file(dir / "sweep.csv", result.to_csv());
    write_text_file(dir / "transmitted.svg",
                    svg_line_chart("Transmitted fraction vs threshold", "transmitted fraction",
                                   collect_series(result, &SweepRow::transmitted_fraction)));
    write_text_file(dir / "smape.svg",
                    svg_line_chart("SMAPE vs threshold", "SMAPE",
                                   collect_series(result, &SweepRow::smape)));
}

} // namespace ampf
