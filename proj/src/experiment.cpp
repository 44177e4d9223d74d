#include "rofsl/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "rofsl/errors.hpp"

namespace rofsl {

std::vector<double> rolling_mean(const std::vector<double>& values, int window) {
    if (window < 1) throw ConfigError("run.rolling_window: must be >= 1");
    std::vector<double> out(values.size());
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t t = 0; t < values.size(); ++t) {
        const std::size_t first = t + 1 >= w ? t + 1 - w : 0;
        double s = 0.0;
        for (std::size_t k = first; k <= t; ++k) s += values[k];
        out[t] = s / static_cast<double>(t + 1 - first);
    }
    return out;
}

double AccuracySummary::final_mean() const { return mean.empty() ? 0.0 : mean.back(); }
double AccuracySummary::final_min() const { return min.empty() ? 0.0 : min.back(); }
double AccuracySummary::final_max() const { return max.empty() ? 0.0 : max.back(); }

AccuracySummary summarize(const std::vector<std::vector<RoundRecord>>& repeats, int rolling_window) {
    AccuracySummary s;
    s.repeats = static_cast<int>(repeats.size());
    s.rolling_window = rolling_window;
    if (repeats.empty()) return s;

    std::vector<std::vector<double>> series;
    for (const auto& records : repeats) {
        std::vector<double> acc;
        acc.reserve(records.size());
        for (const auto& r : records) acc.push_back(r.test_accuracy);
        series.push_back(rolling_mean(acc, rolling_window));
    }
    const std::size_t rounds = series.front().size();
    for (std::size_t t = 0; t < rounds; ++t) {
        double sum = 0.0;
        double lo = series.front()[t];
        double hi = lo;
        for (const auto& r : series) {
            sum += r[t];
            lo = std::min(lo, r[t]);
            hi = std::max(hi, r[t]);
        }
        s.mean.push_back(sum / static_cast<double>(series.size()));
        s.min.push_back(lo);
        s.max.push_back(hi);
    }
    return s;
}

ExperimentResult run_repeats(const ExperimentConfig& config) {
    config.validate();
    ExperimentResult result;
    for (int r = 0; r < config.run.repeats; ++r) {
        result.repeats.push_back(run_experiment(config, r));
    }
    result.summary = summarize(result.repeats, config.run.rolling_window);
    return result;
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void write_metrics_csv(std::ostream& out, const ExperimentResult& result, const ExperimentConfig& config) {
    const bool objective = config.run.log_honest_objective;
    out << kMetricsHeader << (objective ? ",honest_objective" : "") << '\n';
    for (std::size_t r = 0; r < result.repeats.size(); ++r) {
        for (const auto& rec : result.repeats[r]) {
            out << r << ',' << rec.round << ',' << num(rec.test_accuracy) << ',' << num(rec.test_loss) << ','
                << rec.accepted_ids.size() << ',' << rec.num_malicious_sampled << ',' << rec.num_malicious_accepted
                << ',' << num(rec.aggregate_update_norm) << ',' << num(rec.server_update_norm);
            if (objective) out << ',' << num(rec.honest_objective);
            out << '\n';
        }
    }
}

std::string summary_json(const AccuracySummary& s) {
    nlohmann::json j;
    j["repeats"] = s.repeats;
    j["rolling_window"] = s.rolling_window;
    j["rounds"] = s.mean.size();
    j["rolling_accuracy"] = {{"mean", s.mean}, {"min", s.min}, {"max", s.max}};
    j["final_accuracy"] = {{"mean", s.final_mean()}, {"min", s.final_min()}, {"max", s.final_max()}};
    return j.dump(2) + "\n";
}

void persist(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream metrics;
    write_metrics_csv(metrics, result, config);
    write_text(out_dir / "metrics.csv", metrics.str());
    write_text(out_dir / "summary.json", summary_json(result.summary));
    write_text(out_dir / "config.resolved", to_config_text(config));
}

int run_and_persist(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    try {
        persist(run_repeats(config), config, out_dir);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<double>& values,
                            const std::filesystem::path& out_dir) {
    // Validate every point before running any of them.
    std::vector<ExperimentConfig> points;
    for (double v : values) {
        ExperimentConfig c = base;
        set_axis(c, axis, v);
        points.push_back(std::move(c));
    }

    std::filesystem::create_directories(out_dir);
    std::vector<SweepRow> rows;
    std::ostringstream table;
    table << kSweepHeader << '\n';
    for (std::size_t k = 0; k < points.size(); ++k) {
        const ExperimentResult result = run_repeats(points[k]);
        persist(result, points[k], out_dir / fmt::format("{}_{}", axis, k));
        const SweepRow row{values[k], result.summary.final_mean(), result.summary.final_min(),
                           result.summary.final_max()};
        table << num(row.value) << ',' << num(row.final_mean) << ',' << num(row.final_min) << ','
              << num(row.final_max) << '\n';
        rows.push_back(row);
    }
    write_text(out_dir / "sweep.csv", table.str());
    return rows;
}

int sweep_and_persist(const ExperimentConfig& base, const std::string& axis, const std::vector<double>& values,
                      const std::filesystem::path& out_dir) {
    try {
        sweep(base, axis, values, out_dir);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace rofsl
