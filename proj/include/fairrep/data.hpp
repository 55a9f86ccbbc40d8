#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairrep/tensor.hpp"

namespace fairrep {

enum class ColumnRole { Continuous, Categorical, Sensitive, Label, Drop };

struct ColumnSpec {
    std::string name;
    ColumnRole role = ColumnRole::Continuous;
    std::vector<std::string> vocabulary;    // categorical/sensitive; built from data when empty
    std::vector<double> thresholds;         // numeric sensitive: bucket boundaries (ascending)
    std::string positive_label;             // label columns: value mapped to 1
};

/// Per-column role declarations for the generic CSV path. Multiple sensitive
/// columns form a composite attribute via cross-product bucketing.
struct ColumnSchema {
    std::vector<ColumnSpec> columns;

    static ColumnSchema from_json_file(const std::string& path);
    static ColumnSchema from_json_text(const std::string& text);
    std::string to_json_text() const;
    void validate() const;
};

/// Preprocessed observations: standardized continuous + one-hot categorical
/// features, discrete sensitive groups, optional binary labels.
struct TabularDataset {
    Tensor x;                               // N x d
    std::vector<int> u;
    int group_count = 0;
    std::vector<int> y;                     // empty when has_labels is false
    bool has_labels = false;
    std::vector<uint8_t> binary_feature_mask;  // 1 = binary feature
    std::vector<std::string> feature_names;
    std::string provenance;

    int n() const { return x.rows(); }
    int x_dim() const { return x.cols(); }
    uint64_t schema_fingerprint() const;
    void validate() const;
};

struct DataSplit {
    TabularDataset train;
    TabularDataset test;
};

/// UCI Adult loader: adult.data / adult.test under `dir`, standard partition
/// preserved, gender as the binary sensitive attribute, income > 50K as label.
DataSplit load_adult(const std::string& dir);

/// UCI German credit loader (german.data): exactly 1000 rows, u = age above
/// threshold (default 25), label = credit decision. Returns an unsplit
/// dataset with continuous features raw; split() standardizes.
TabularDataset load_german(const std::string& path, double age_threshold = 25.0);

/// Generic schema-driven CSV loader (header row required). Continuous
/// features are left raw; split() standardizes them with train statistics.
TabularDataset load_csv(const std::string& path, const ColumnSchema& schema);

struct SyntheticSpec {
    int n = 2000;
    int x_dim = 6;
    double rho = 0.5;       // dependence between u and the latent factor of x
    bool with_labels = true;
};

struct SyntheticData {
    TabularDataset data;        // unstandardized; split() standardizes
    std::vector<int> factor;    // realized binary latent factor per row
    // realized joint counts over (factor, u), for the discrete MI oracle
    double joint_counts[2][2] = {{0, 0}, {0, 0}};
};

SyntheticData synthetic_gen(const SyntheticSpec& spec, uint64_t seed);

/// Disjoint, exhaustive, seed-deterministic split. Standardization statistics
/// for continuous (non-binary) features are computed on the train part and
/// applied to both.
DataSplit split(const TabularDataset& data, double train_fraction, uint64_t seed);

/// Processed-dataset cache: binary container keyed by a source/schema hash.
void save_dataset_cache(const TabularDataset& data, uint64_t source_hash, const std::string& path);
std::optional<TabularDataset> load_dataset_cache(uint64_t source_hash, const std::string& path);

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 1469598103934665603ULL);
uint64_t hash_file(const std::string& path);

}  // namespace fairrep
