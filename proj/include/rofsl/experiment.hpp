#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rofsl/config.hpp"
#include "rofsl/orchestrator.hpp"

namespace rofsl {

/// Trailing mean over `window` rounds; the first rounds average whatever is
/// available.
std::vector<double> rolling_mean(const std::vector<double>& values, int window);

struct AccuracySummary {
    int repeats = 0;
    int rolling_window = 1;
    // Per round, across repeats, of the rolling-window accuracy.
    std::vector<double> mean;
    std::vector<double> min;
    std::vector<double> max;

    double final_mean() const;
    double final_min() const;
    double final_max() const;
};

AccuracySummary summarize(const std::vector<std::vector<RoundRecord>>& repeats, int rolling_window);

struct ExperimentResult {
    std::vector<std::vector<RoundRecord>> repeats;
    AccuracySummary summary;
};

/// Runs config.run.repeats repeats, seeding repeat r with repeat_seed(seed, r).
ExperimentResult run_repeats(const ExperimentConfig& config);

inline constexpr const char* kMetricsHeader =
    "repeat,round,test_accuracy,test_loss,accepted_count,malicious_sampled,malicious_accepted,agg_update_norm,"
    "server_update_norm";
inline constexpr const char* kSweepHeader = "value,final_acc_mean,final_acc_min,final_acc_max";

/// Floats use 17 significant digits. An honest_objective column is appended
/// when the config enables it.
void write_metrics_csv(std::ostream& out, const ExperimentResult& result, const ExperimentConfig& config);
std::string summary_json(const AccuracySummary& summary);

/// Writes metrics.csv, summary.json and config.resolved into out_dir.
void persist(const ExperimentResult& result, const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Runs and persists; returns a process exit status, printing errors to stderr.
int run_and_persist(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct SweepRow {
    double value = 0.0;
    double final_mean = 0.0;
    double final_min = 0.0;
    double final_max = 0.0;
};

/// One experiment per value, all under the base config's master seed. Each
/// point is persisted to out_dir/<axis>_<index>/ and the table to sweep.csv.
std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<double>& values,
                            const std::filesystem::path& out_dir);

int sweep_and_persist(const ExperimentConfig& base, const std::string& axis, const std::vector<double>& values,
                      const std::filesystem::path& out_dir);

}  // namespace rofsl
