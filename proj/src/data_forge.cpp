#include "rofsl/data_forge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "rofsl/errors.hpp"

namespace rofsl {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.num_classes = num_classes;
    out.examples.reserve(indices.size());
    for (std::size_t i : indices) {
        out.examples.push_back(examples.at(i));
    }
    return out;
}

std::vector<std::size_t> Dataset::label_histogram() const {
    std::vector<std::size_t> hist(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
    for (const auto& ex : examples) {
        ++hist.at(static_cast<std::size_t>(ex.label));
    }
    return hist;
}

namespace {

// Fixed seed for class-mean directions past the +/- axis placements, so the
// blob geometry never depends on an experiment seed.
constexpr std::uint64_t kMeanDirectionSeed = 0x5eed0fb10b5ULL;

std::vector<double> random_unit_vector(int dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(dim));
    double n2 = 0.0;
    while (n2 < 1e-24) {
        n2 = 0.0;
        for (auto& x : v) {
            x = normal(rng);
            n2 += x * x;
        }
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& x : v) x *= inv;
    return v;
}

LabeledExample draw_example(const std::vector<double>& mean, double spread, int label, Rng& rng) {
    std::normal_distribution<double> normal(0.0, spread);
    LabeledExample ex;
    ex.label = label;
    ex.features.resize(mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j) {
        ex.features[j] = mean[j] + normal(rng);
    }
    return ex;
}

}  // namespace

BlobModel make_blob_model(int num_classes, int input_dim, double spread) {
    if (num_classes < 2) throw ConfigError("blobs: num_classes must be >= 2");
    if (input_dim < 2) throw ConfigError("blobs: input_dim must be >= 2");
    if (!(spread > 0.0)) throw ConfigError("blobs: spread must be > 0");

    BlobModel model{num_classes, input_dim, spread, {}};
    Rng direction_rng(kMeanDirectionSeed);
    for (int c = 0; c < num_classes; ++c) {
        std::vector<double> mu(static_cast<std::size_t>(input_dim), 0.0);
        if (c < input_dim) {
            mu[static_cast<std::size_t>(c)] = kBlobRadius;
        } else if (c < 2 * input_dim) {
            mu[static_cast<std::size_t>(c - input_dim)] = -kBlobRadius;
        } else {
            mu = random_unit_vector(input_dim, direction_rng);
            for (auto& x : mu) x *= kBlobRadius;
        }
        model.means.push_back(std::move(mu));
    }
    return model;
}

Dataset sample_blobs(const BlobModel& model, int per_class, Rng& rng) {
    if (per_class < 1) throw ConfigError("blobs: per_class must be >= 1");
    Dataset data;
    data.num_classes = model.num_classes;
    data.examples.reserve(static_cast<std::size_t>(per_class) * static_cast<std::size_t>(model.num_classes));
    for (int c = 0; c < model.num_classes; ++c) {
        for (int k = 0; k < per_class; ++k) {
            data.examples.push_back(draw_example(model.means[static_cast<std::size_t>(c)], model.spread, c, rng));
        }
    }
    std::shuffle(data.examples.begin(), data.examples.end(), rng);
    return data;
}

Dataset make_blobs(int num_classes, int input_dim, int per_class, double spread, Rng& rng) {
    return sample_blobs(make_blob_model(num_classes, input_dim, spread), per_class, rng);
}

PartitionPlan dirichlet_partition(const Dataset& data, std::size_t num_clients, double alpha, Rng& rng) {
    if (num_clients < 1) throw ConfigError("partition: num_clients must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("partition: alpha must be > 0");
    if (data.size() < num_clients) {
        throw ConfigError(fmt::format("partition: {} examples cannot fill {} clients", data.size(), num_clients));
    }

    PartitionPlan plan;
    plan.alpha = alpha;
    plan.num_clients = num_clients;
    plan.shards.assign(num_clients, {});

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_class.at(static_cast<std::size_t>(data.examples[i].label)).push_back(i);
    }

    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> proportions(num_clients);
    std::vector<std::size_t> counts(num_clients);
    std::vector<std::size_t> order(num_clients);

    for (auto& members : by_class) {
        // Draw unconditionally so empty classes still advance the stream.
        double total = 0.0;
        for (auto& p : proportions) {
            p = gamma(rng);
            total += p;
        }
        std::shuffle(members.begin(), members.end(), rng);
        if (members.empty()) continue;

        const std::size_t n_c = members.size();
        if (!(total > 0.0)) {
            // Every gamma draw underflowed (tiny alpha): the class goes to one client.
            std::uniform_int_distribution<std::size_t> pick(0, num_clients - 1);
            std::fill(proportions.begin(), proportions.end(), 0.0);
            proportions[pick(rng)] = 1.0;
            total = 1.0;
        }

        std::size_t assigned = 0;
        std::vector<double> remainder(num_clients);
        for (std::size_t j = 0; j < num_clients; ++j) {
            const double quota = proportions[j] / total * static_cast<double>(n_c);
            counts[j] = static_cast<std::size_t>(std::floor(quota));
            remainder[j] = quota - static_cast<double>(counts[j]);
            assigned += counts[j];
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
        for (std::size_t k = 0; assigned < n_c; k = (k + 1) % num_clients) {
            ++counts[order[k]];
            ++assigned;
        }

        std::size_t cursor = 0;
        for (std::size_t j = 0; j < num_clients; ++j) {
            for (std::size_t k = 0; k < counts[j]; ++k) {
                plan.shards[j].push_back(members[cursor++]);
            }
        }
    }

    for (auto& shard : plan.shards) {
        std::sort(shard.begin(), shard.end());
    }

    for (std::size_t j = 0; j < num_clients; ++j) {
        if (!plan.shards[j].empty()) continue;
        auto largest = std::max_element(plan.shards.begin(), plan.shards.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        plan.shards[j].push_back(largest->back());
        largest->pop_back();
    }
    return plan;
}

Dataset shift_labels(const Dataset& data, int shift) {
    Dataset out = data;
    const int c = data.num_classes;
    if (c <= 0) return out;
    const int s = ((shift % c) + c) % c;
    for (auto& ex : out.examples) {
        ex.label = (ex.label + s) % c;
    }
    return out;
}

Dataset make_server_dataset(const BlobModel& model, int n0, double mean_shift, const std::set<int>& drop_classes,
                            Rng& rng) {
    if (n0 < 1) throw ConfigError("server_data.n0: must be >= 1");
    if (!(mean_shift >= 0.0)) throw ConfigError("server_data.mean_shift: must be >= 0");
    std::vector<int> kept;
    for (int c = 0; c < model.num_classes; ++c) {
        if (!drop_classes.contains(c)) kept.push_back(c);
    }
    for (int c : drop_classes) {
        if (c < 0 || c >= model.num_classes) {
            throw ConfigError(fmt::format("server_data.drop_classes: class {} outside [0, {})", c, model.num_classes));
        }
    }
    if (kept.empty()) throw ConfigError("server_data.drop_classes: cannot drop every class");

    // Directions are drawn for every class, dropped or not, so the shift of a
    // kept class does not depend on which others are dropped.
    std::vector<std::vector<double>> means = model.means;
    for (auto& mu : means) {
        const auto dir = random_unit_vector(model.input_dim, rng);
        for (std::size_t j = 0; j < mu.size(); ++j) mu[j] += mean_shift * dir[j];
    }

    Dataset data;
    data.num_classes = model.num_classes;
    data.examples.reserve(static_cast<std::size_t>(n0));
    for (int k = 0; k < n0; ++k) {
        const int c = kept[static_cast<std::size_t>(k) % kept.size()];
        data.examples.push_back(draw_example(means[static_cast<std::size_t>(c)], model.spread, c, rng));
    }
    std::shuffle(data.examples.begin(), data.examples.end(), rng);
    return data;
}

Dataset read_csv_dataset(std::istream& in, int num_classes) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: missing header row");

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 2 || header.back() != "label") {
        throw std::runtime_error("csv: header must be f0,...,f{m-1},label");
    }
    const std::size_t m = header.size() - 1;
    for (std::size_t j = 0; j < m; ++j) {
        if (header[j] != fmt::format("f{}", j)) {
            throw std::runtime_error(fmt::format("csv: header column {} should be f{}, got '{}'", j, j, header[j]));
        }
    }

    Dataset data;
    int max_label = -1;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string cell;
        LabeledExample ex;
        ex.features.reserve(m);
        std::size_t col = 0;
        try {
            while (std::getline(ss, cell, ',')) {
                if (col < m) {
                    ex.features.push_back(std::stod(cell));
                } else if (col == m) {
                    std::size_t pos = 0;
                    ex.label = std::stoi(cell, &pos);
                    if (cell.find_first_not_of(" \r", pos) != std::string::npos) throw std::invalid_argument(cell);
                }
                ++col;
            }
        } catch (const std::exception&) {
            throw std::runtime_error(fmt::format("csv: line {}: cannot parse '{}'", line_no, cell));
        }
        if (col != m + 1) {
            throw std::runtime_error(fmt::format("csv: line {}: expected {} columns, got {}", line_no, m + 1, col));
        }
        for (double v : ex.features) {
            if (!std::isfinite(v)) throw std::runtime_error(fmt::format("csv: line {}: non-finite feature", line_no));
        }
        if (ex.label < 0) throw std::runtime_error(fmt::format("csv: line {}: negative label", line_no));
        max_label = std::max(max_label, ex.label);
        data.examples.push_back(std::move(ex));
    }
    data.num_classes = num_classes > 0 ? num_classes : max_label + 1;
    if (max_label >= data.num_classes) {
        throw std::runtime_error(fmt::format("csv: label {} outside [0, {})", max_label, data.num_classes));
    }
    return data;
}

Dataset load_csv_dataset(const std::filesystem::path& path, int num_classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path.string());
    return read_csv_dataset(in, num_classes);
}

void write_csv_dataset(std::ostream& out, const Dataset& data) {
    const std::size_t m = data.input_dim();
    for (std::size_t j = 0; j < m; ++j) out << 'f' << j << ',';
    out << "label\n";
    for (const auto& ex : data.examples) {
        for (double v : ex.features) out << fmt::format("{:.17g},", v);
        out << ex.label << '\n';
    }
}

}  // namespace rofsl
