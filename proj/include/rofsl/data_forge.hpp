#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <vector>

#include "rofsl/rng.hpp"

namespace rofsl {

struct LabeledExample {
    std::vector<double> features;
    int label = 0;

    bool operator==(const LabeledExample&) const = default;
};

struct Dataset {
    std::vector<LabeledExample> examples;
    int num_classes = 0;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
    std::size_t input_dim() const { return examples.empty() ? 0 : examples.front().features.size(); }

    /// Copy of the examples at the given indices, in that order.
    Dataset subset(std::span<const std::size_t> indices) const;

    /// Number of examples per label.
    std::vector<std::size_t> label_histogram() const;

    bool operator==(const Dataset&) const = default;
};

struct PartitionPlan {
    double alpha = 0.0;
    std::size_t num_clients = 0;
    std::vector<std::vector<std::size_t>> shards;
};

/// Gaussian mixture with one isotropic component per class. Class means sit
/// at distinct points on a sphere of radius 3.
struct BlobModel {
    int num_classes = 0;
    int input_dim = 0;
    double spread = 1.0;
    std::vector<std::vector<double>> means;
};

inline constexpr double kBlobRadius = 3.0;

/// Class means: +3e_c for c < m, -3e_{c-m} for c < 2m, and fixed pseudo-random
/// directions beyond that. Independent of any experiment seed.
BlobModel make_blob_model(int num_classes, int input_dim, double spread);

/// per_class examples per class, shuffled with rng.
Dataset sample_blobs(const BlobModel& model, int per_class, Rng& rng);

Dataset make_blobs(int num_classes, int input_dim, int per_class, double spread, Rng& rng);

/// Splits data across num_clients by drawing, for every class, client
/// proportions from Dirichlet(alpha). Counts use largest-remainder rounding
/// and empty shards take one example from the largest shard.
PartitionPlan dirichlet_partition(const Dataset& data, std::size_t num_clients, double alpha, Rng& rng);

/// Label c becomes (c + shift) mod C.
Dataset shift_labels(const Dataset& data, int shift);

/// Server dataset with distribution shift: every class mean is moved by
/// mean_shift along a random unit direction and the classes in drop_classes
/// produce no examples. n0 examples are spread evenly over the kept classes.
Dataset make_server_dataset(const BlobModel& model, int n0, double mean_shift, const std::set<int>& drop_classes,
                            Rng& rng);

/// CSV with header `f0,...,f{m-1},label`. num_classes is max label + 1 unless
/// given explicitly.
Dataset read_csv_dataset(std::istream& in, int num_classes = 0);
Dataset load_csv_dataset(const std::filesystem::path& path, int num_classes = 0);
void write_csv_dataset(std::ostream& out, const Dataset& data);

}  // namespace rofsl
