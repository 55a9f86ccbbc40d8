#include "fairrep/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fairrep/rng.hpp"

namespace fairrep {

using nlohmann::json;

// ---------------------------------------------------------------- hashing

uint64_t fnv1a(const void* data, size_t len, uint64_t h) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

static uint64_t fnv1a_str(const std::string& s, uint64_t h) { return fnv1a(s.data(), s.size(), h); }

uint64_t hash_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("hash_file: cannot open " + path);
    uint64_t h = 1469598103934665603ULL;
    char buf[65536];
    while (f) {
        f.read(buf, sizeof(buf));
        h = fnv1a(buf, static_cast<size_t>(f.gcount()), h);
    }
    return h;
}

uint64_t TabularDataset::schema_fingerprint() const {
    uint64_t h = 1469598103934665603ULL;
    int64_t meta[3] = {x_dim(), group_count, has_labels ? 1 : 0};
    h = fnv1a(meta, sizeof(meta), h);
    h = fnv1a(binary_feature_mask.data(), binary_feature_mask.size(), h);
    for (const auto& name : feature_names) h = fnv1a_str(name + "\x1f", h);
    return h;
}

void TabularDataset::validate() const {
    if (n() == 0) throw std::runtime_error("TabularDataset: empty");
    if (static_cast<int>(u.size()) != n()) throw std::runtime_error("TabularDataset: u length mismatch");
    if (group_count < 2) throw std::runtime_error("TabularDataset: need >= 2 groups");
    for (int g : u)
        if (g < 0 || g >= group_count) throw std::runtime_error("TabularDataset: group id out of range");
    if (has_labels && static_cast<int>(y.size()) != n()) throw std::runtime_error("TabularDataset: y length mismatch");
    if (static_cast<int>(binary_feature_mask.size()) != x_dim())
        throw std::runtime_error("TabularDataset: feature mask length mismatch");
    x.require_finite("TabularDataset.x");
}

// ---------------------------------------------------------------- schema

static ColumnRole role_from_string(const std::string& s) {
    if (s == "continuous") return ColumnRole::Continuous;
    if (s == "categorical") return ColumnRole::Categorical;
    if (s == "sensitive") return ColumnRole::Sensitive;
    if (s == "label") return ColumnRole::Label;
    if (s == "drop") return ColumnRole::Drop;
    throw std::runtime_error("schema: unknown column role '" + s + "'");
}

static std::string role_to_string(ColumnRole r) {
    switch (r) {
        case ColumnRole::Continuous: return "continuous";
        case ColumnRole::Categorical: return "categorical";
        case ColumnRole::Sensitive: return "sensitive";
        case ColumnRole::Label: return "label";
        case ColumnRole::Drop: return "drop";
    }
    return "?";
}

ColumnSchema ColumnSchema::from_json_text(const std::string& text) {
    json j = json::parse(text);
    ColumnSchema s;
    for (const auto& jc : j.at("columns")) {
        ColumnSpec c;
        c.name = jc.at("name").get<std::string>();
        c.role = role_from_string(jc.at("role").get<std::string>());
        if (jc.contains("vocabulary")) c.vocabulary = jc["vocabulary"].get<std::vector<std::string>>();
        if (jc.contains("thresholds")) c.thresholds = jc["thresholds"].get<std::vector<double>>();
        if (jc.contains("positive")) c.positive_label = jc["positive"].get<std::string>();
        s.columns.push_back(std::move(c));
    }
    s.validate();
    return s;
}

ColumnSchema ColumnSchema::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("schema: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

std::string ColumnSchema::to_json_text() const {
    json cols = json::array();
    for (const auto& c : columns) {
        json jc;
        jc["name"] = c.name;
        jc["role"] = role_to_string(c.role);
        if (!c.vocabulary.empty()) jc["vocabulary"] = c.vocabulary;
        if (!c.thresholds.empty()) jc["thresholds"] = c.thresholds;
        if (!c.positive_label.empty()) jc["positive"] = c.positive_label;
        cols.push_back(jc);
    }
    return json{{"columns", cols}}.dump(2);
}

void ColumnSchema::validate() const {
    int sensitive = 0, labels = 0;
    for (const auto& c : columns) {
        if (c.role == ColumnRole::Sensitive) ++sensitive;
        if (c.role == ColumnRole::Label) ++labels;
    }
    if (sensitive == 0) throw std::runtime_error("schema: no sensitive column declared");
    if (labels > 1) throw std::runtime_error("schema: at most one label column allowed");
}

// ---------------------------------------------------------------- parsing

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
    return out;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "?" || cell == "NA"; }

struct RawTable {
    std::vector<std::vector<std::string>> rows;
    int skipped = 0;
};

RawTable read_delimited(const std::string& path, char delim, size_t expected_cols, bool skip_pipe_header) {
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot open " + path +
                                 "; place the raw file there (UCI archives are not auto-downloaded; "
                                 "fetch from https://archive.ics.uci.edu/ml/datasets)");
    RawTable t;
    std::string line;
    while (std::getline(f, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (skip_pipe_header && line[0] == '|') continue;
        auto cells = split_line(line, delim);
        if (cells.size() != expected_cols) {
            ++t.skipped;
            continue;
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

// Encoding statistics computed from the training rows only.
struct ColumnCodec {
    struct Col {
        ColumnSpec spec;
        // categorical / sensitive-categorical
        std::vector<std::string> vocab;
        bool has_unknown = false;
        // continuous
        double mean = 0.0;
        bool has_missing = false;
    };
    std::vector<Col> cols;
    std::vector<int> sensitive_cols;      // column indices
    std::vector<int> sensitive_sizes;     // bucket counts per sensitive column
    int label_col = -1;
    int group_count = 0;
};

int sensitive_bucket(const ColumnCodec::Col& c, const std::string& cell) {
    if (!c.spec.thresholds.empty()) {
        double v = std::stod(cell);
        int b = 0;
        for (double t : c.spec.thresholds)
            if (v > t) ++b;
        return b;
    }
    auto it = std::find(c.vocab.begin(), c.vocab.end(), cell);
    if (it == c.vocab.end()) throw std::runtime_error("sensitive value '" + cell + "' not in vocabulary");
    return static_cast<int>(it - c.vocab.begin());
}

ColumnCodec fit_codec(const ColumnSchema& schema, const std::vector<std::vector<std::string>>& train_rows) {
    ColumnCodec codec;
    codec.cols.resize(schema.columns.size());
    for (size_t ci = 0; ci < schema.columns.size(); ++ci) {
        auto& col = codec.cols[ci];
        col.spec = schema.columns[ci];
        switch (col.spec.role) {
            case ColumnRole::Drop:
                break;
            case ColumnRole::Label:
                codec.label_col = static_cast<int>(ci);
                break;
            case ColumnRole::Continuous: {
                double sum = 0.0;
                int cnt = 0;
                for (const auto& r : train_rows) {
                    if (is_missing(r[ci])) {
                        col.has_missing = true;
                    } else {
                        sum += std::stod(r[ci]);
                        ++cnt;
                    }
                }
                if (cnt == 0) throw std::runtime_error("column '" + col.spec.name + "': all values missing");
                col.mean = sum / cnt;
                break;
            }
            case ColumnRole::Categorical: {
                col.vocab = col.spec.vocabulary;
                if (col.vocab.empty()) {
                    std::map<std::string, int> seen;
                    for (const auto& r : train_rows)
                        if (!is_missing(r[ci])) seen.emplace(r[ci], 1);
                    for (auto& [v, _] : seen) col.vocab.push_back(v);
                }
                col.has_unknown = true;  // missing or unseen-at-test values
                break;
            }
            case ColumnRole::Sensitive: {
                codec.sensitive_cols.push_back(static_cast<int>(ci));
                if (col.spec.thresholds.empty()) {
                    col.vocab = col.spec.vocabulary;
                    if (col.vocab.empty()) {
                        std::map<std::string, int> seen;
                        for (const auto& r : train_rows) seen.emplace(r[ci], 1);
                        for (auto& [v, _] : seen) col.vocab.push_back(v);
                    }
                    codec.sensitive_sizes.push_back(static_cast<int>(col.vocab.size()));
                } else {
                    codec.sensitive_sizes.push_back(static_cast<int>(col.spec.thresholds.size()) + 1);
                }
                break;
            }
        }
    }
    codec.group_count = 1;
    for (int s : codec.sensitive_sizes) codec.group_count *= s;
    if (codec.group_count < 2) throw std::runtime_error("schema: sensitive configuration yields < 2 groups");
    return codec;
}

TabularDataset encode_rows(const ColumnCodec& codec, const std::vector<std::vector<std::string>>& rows,
                           const std::string& provenance) {
    TabularDataset d;
    d.provenance = provenance;
    d.group_count = codec.group_count;
    d.has_labels = codec.label_col >= 0;

    // feature layout
    for (const auto& col : codec.cols) {
        switch (col.spec.role) {
            case ColumnRole::Continuous:
                d.feature_names.push_back(col.spec.name);
                d.binary_feature_mask.push_back(0);
                if (col.has_missing) {
                    d.feature_names.push_back(col.spec.name + ":missing");
                    d.binary_feature_mask.push_back(1);
                }
                break;
            case ColumnRole::Categorical:
                for (const auto& v : col.vocab) {
                    d.feature_names.push_back(col.spec.name + "=" + v);
                    d.binary_feature_mask.push_back(1);
                }
                if (col.has_unknown) {
                    d.feature_names.push_back(col.spec.name + "=<unknown>");
                    d.binary_feature_mask.push_back(1);
                }
                break;
            default:
                break;
        }
    }

    int dim = static_cast<int>(d.feature_names.size());
    d.x = Tensor(static_cast<int>(rows.size()), dim);
    d.u.resize(rows.size());
    if (d.has_labels) d.y.resize(rows.size());

    for (size_t ri = 0; ri < rows.size(); ++ri) {
        const auto& r = rows[ri];
        int fi = 0;
        for (size_t ci = 0; ci < codec.cols.size(); ++ci) {
            const auto& col = codec.cols[ci];
            const std::string& cell = r[ci];
            switch (col.spec.role) {
                case ColumnRole::Continuous:
                    if (is_missing(cell)) {
                        d.x.at(static_cast<int>(ri), fi) = col.mean;
                        if (col.has_missing) d.x.at(static_cast<int>(ri), fi + 1) = 1.0;
                    } else {
                        d.x.at(static_cast<int>(ri), fi) = std::stod(cell);
                    }
                    fi += 1 + (col.has_missing ? 1 : 0);
                    break;
                case ColumnRole::Categorical: {
                    int slot = static_cast<int>(col.vocab.size());  // unknown bucket
                    if (!is_missing(cell)) {
                        auto it = std::find(col.vocab.begin(), col.vocab.end(), cell);
                        if (it != col.vocab.end()) slot = static_cast<int>(it - col.vocab.begin());
                    }
                    d.x.at(static_cast<int>(ri), fi + slot) = 1.0;
                    fi += static_cast<int>(col.vocab.size()) + 1;
                    break;
                }
                default:
                    break;
            }
        }
        int group = 0;
        for (size_t si = 0; si < codec.sensitive_cols.size(); ++si) {
            const auto& col = codec.cols[codec.sensitive_cols[si]];
            group = group * codec.sensitive_sizes[si] + sensitive_bucket(col, r[codec.sensitive_cols[si]]);
        }
        d.u[ri] = group;
        if (d.has_labels) {
            std::string cell = r[codec.label_col];
            d.y[ri] = (cell == codec.cols[codec.label_col].spec.positive_label) ? 1 : 0;
        }
    }
    return d;
}

// Standardize continuous features with train statistics, applied to both splits.
void standardize_with_train_stats(TabularDataset& train, TabularDataset* test) {
    for (int c = 0; c < train.x_dim(); ++c) {
        if (train.binary_feature_mask[c]) continue;
        double sum = 0.0, sq = 0.0;
        for (int r = 0; r < train.n(); ++r) sum += train.x.at(r, c);
        double mean = sum / train.n();
        for (int r = 0; r < train.n(); ++r) {
            double dlt = train.x.at(r, c) - mean;
            sq += dlt * dlt;
        }
        double sd = std::sqrt(sq / train.n());
        if (sd < 1e-12) sd = 1.0;  // constant column: centered only
        for (int r = 0; r < train.n(); ++r) train.x.at(r, c) = (train.x.at(r, c) - mean) / sd;
        if (test)
            for (int r = 0; r < test->n(); ++r) test->x.at(r, c) = (test->x.at(r, c) - mean) / sd;
    }
}

void check_group_coverage(const DataSplit& s) {
    std::vector<int> train_cnt(s.train.group_count, 0), test_cnt(s.test.group_count, 0);
    for (int g : s.train.u) ++train_cnt[g];
    for (int g : s.test.u) ++test_cnt[g];
    for (int g = 0; g < s.train.group_count; ++g)
        if ((train_cnt[g] == 0) != (test_cnt[g] == 0))
            throw std::runtime_error("split: group " + std::to_string(g) +
                                     " present in only one of train/test");
    for (int g : s.test.u)
        if (train_cnt[g] == 0)
            throw std::runtime_error("split: test group " + std::to_string(g) + " absent from training data");
}

}  // namespace

// ---------------------------------------------------------------- loaders

DataSplit load_adult(const std::string& dir) {
    const size_t kCols = 15;
    RawTable train_t = read_delimited(dir + "/adult.data", ',', kCols, true);
    RawTable test_t = read_delimited(dir + "/adult.test", ',', kCols, true);
    // adult.test labels carry a trailing period
    for (auto& r : test_t.rows) {
        std::string& lab = r.back();
        if (!lab.empty() && lab.back() == '.') lab.pop_back();
    }

    ColumnSchema schema;
    auto cont = [](const char* n) { return ColumnSpec{n, ColumnRole::Continuous, {}, {}, ""}; };
    auto cat = [](const char* n) { return ColumnSpec{n, ColumnRole::Categorical, {}, {}, ""}; };
    schema.columns = {
        cont("age"), cat("workclass"), cont("fnlwgt"), cat("education"), cont("education-num"),
        cat("marital-status"), cat("occupation"), cat("relationship"), cat("race"),
        ColumnSpec{"sex", ColumnRole::Sensitive, {}, {}, ""},
        cont("capital-gain"), cont("capital-loss"), cont("hours-per-week"), cat("native-country"),
        ColumnSpec{"income", ColumnRole::Label, {}, {}, ">50K"},
    };

    ColumnCodec codec = fit_codec(schema, train_t.rows);
    DataSplit s;
    s.train = encode_rows(codec, train_t.rows, "adult:train skipped=" + std::to_string(train_t.skipped));
    s.test = encode_rows(codec, test_t.rows, "adult:test skipped=" + std::to_string(test_t.skipped));
    standardize_with_train_stats(s.train, &s.test);
    s.train.validate();
    s.test.validate();
    check_group_coverage(s);
    return s;
}

TabularDataset load_german(const std::string& path, double age_threshold) {
    const size_t kCols = 21;
    RawTable t = read_delimited(path, ' ', kCols, false);
    if (t.rows.size() != 1000)
        throw std::runtime_error("load_german: expected 1000 rows, got " + std::to_string(t.rows.size()));

    ColumnSchema schema;
    // numbered attributes of german.data; attribute 13 is age
    for (int i = 1; i <= 20; ++i) {
        std::string name = "attr" + std::to_string(i);
        bool numeric = (i == 2 || i == 5 || i == 8 || i == 11 || i == 16 || i == 18);
        if (i == 13) {
            schema.columns.push_back(ColumnSpec{"age", ColumnRole::Sensitive, {}, {age_threshold}, ""});
        } else if (numeric) {
            schema.columns.push_back(ColumnSpec{name, ColumnRole::Continuous, {}, {}, ""});
        } else {
            schema.columns.push_back(ColumnSpec{name, ColumnRole::Categorical, {}, {}, ""});
        }
    }
    schema.columns.push_back(ColumnSpec{"credit", ColumnRole::Label, {}, {}, "1"});

    ColumnCodec codec = fit_codec(schema, t.rows);
    TabularDataset d = encode_rows(codec, t.rows, "german age_threshold=" + std::to_string(age_threshold));
    d.validate();
    return d;
}

TabularDataset load_csv(const std::string& path, const ColumnSchema& schema) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_csv: cannot open " + path);
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("load_csv: empty file " + path);
    auto names = split_line(header, ',');
    if (names.size() != schema.columns.size())
        throw std::runtime_error("load_csv: header has " + std::to_string(names.size()) +
                                 " columns, schema declares " + std::to_string(schema.columns.size()));
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] != schema.columns[i].name)
            throw std::runtime_error("load_csv: column '" + names[i] + "' does not match schema '" +
                                     schema.columns[i].name + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    int skipped = 0;
    while (std::getline(f, line)) {
        line = trim(line);
        if (line.empty()) continue;
        auto cells = split_line(line, ',');
        if (cells.size() != names.size()) {
            ++skipped;
            continue;
        }
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);
    ColumnCodec codec = fit_codec(schema, rows);
    TabularDataset d = encode_rows(codec, rows, "csv:" + path + " skipped=" + std::to_string(skipped));
    d.validate();
    return d;
}

SyntheticData synthetic_gen(const SyntheticSpec& spec, uint64_t seed) {
    if (spec.rho < 0.0 || spec.rho > 1.0) throw std::invalid_argument("synthetic_gen: rho must be in [0,1]");
    if (spec.x_dim < 2) throw std::invalid_argument("synthetic_gen: x_dim must be >= 2");
    RngStream rng(seed);
    SyntheticData out;
    TabularDataset& d = out.data;
    d.provenance = "synthetic rho=" + std::to_string(spec.rho);
    d.group_count = 2;
    d.x = Tensor(spec.n, spec.x_dim);
    d.u.resize(spec.n);
    out.factor.resize(spec.n);
    d.has_labels = spec.with_labels;
    if (spec.with_labels) d.y.resize(spec.n);
    d.binary_feature_mask.assign(spec.x_dim, 0);
    for (int j = 0; j < spec.x_dim; ++j) d.feature_names.push_back("f" + std::to_string(j));

    // f copies u through a binary symmetric channel with flip prob (1-rho)/2;
    // x0 carries f with noise small enough that sign(x0) recovers it exactly
    double flip = (1.0 - spec.rho) / 2.0;
    for (int i = 0; i < spec.n; ++i) {
        int u = rng.uniform() < 0.5 ? 0 : 1;
        int f = (rng.uniform() < flip) ? 1 - u : u;
        d.u[i] = u;
        out.factor[i] = f;
        out.joint_counts[f][u] += 1.0;
        d.x.at(i, 0) = (2.0 * f - 1.0) + 0.3 * rng.normal();
        for (int j = 1; j < spec.x_dim; ++j) d.x.at(i, j) = rng.normal();
        if (spec.with_labels) {
            double score = d.x.at(i, 1) + 0.5 * d.x.at(i, 0) + 0.3 * rng.normal();
            d.y[i] = score > 0.0 ? 1 : 0;
        }
    }
    d.validate();
    return out;
}

DataSplit split(const TabularDataset& data, double train_fraction, uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: fraction must be in (0,1)");
    int n = data.n();
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    RngStream rng(seed);
    for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(static_cast<uint64_t>(i) + 1)]);

    int n_train = static_cast<int>(std::lround(train_fraction * n));
    n_train = std::clamp(n_train, 1, n - 1);

    auto take = [&](int from, int count) {
        TabularDataset part;
        part.group_count = data.group_count;
        part.has_labels = data.has_labels;
        part.binary_feature_mask = data.binary_feature_mask;
        part.feature_names = data.feature_names;
        part.provenance = data.provenance;
        part.x = Tensor(count, data.x_dim());
        part.u.resize(count);
        if (data.has_labels) part.y.resize(count);
        for (int i = 0; i < count; ++i) {
            int src = idx[from + i];
            std::memcpy(part.x.data() + static_cast<size_t>(i) * data.x_dim(),
                        data.x.data() + static_cast<size_t>(src) * data.x_dim(),
                        sizeof(double) * data.x_dim());
            part.u[i] = data.u[src];
            if (data.has_labels) part.y[i] = data.y[src];
        }
        return part;
    };

    DataSplit s;
    s.train = take(0, n_train);
    s.test = take(n_train, n - n_train);
    standardize_with_train_stats(s.train, &s.test);
    s.train.validate();
    s.test.validate();
    check_group_coverage(s);
    return s;
}

// ---------------------------------------------------------------- cache

namespace {
constexpr char kCacheMagic[8] = {'F', 'R', 'D', 'C', '0', '0', '0', '1'};

template <typename T>
void put(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void get(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
}
void put_str(std::ofstream& f, const std::string& s) {
    uint32_t n = static_cast<uint32_t>(s.size());
    put(f, n);
    f.write(s.data(), n);
}
std::string get_str(std::ifstream& f) {
    uint32_t n = 0;
    get(f, n);
    std::string s(n, '\0');
    f.read(s.data(), n);
    return s;
}
}  // namespace

void save_dataset_cache(const TabularDataset& d, uint64_t source_hash, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_dataset_cache: cannot open " + path);
    f.write(kCacheMagic, sizeof(kCacheMagic));
    put(f, source_hash);
    uint64_t fp = d.schema_fingerprint();
    put(f, fp);
    int64_t n = d.n(), dim = d.x_dim(), gc = d.group_count, hl = d.has_labels ? 1 : 0;
    put(f, n);
    put(f, dim);
    put(f, gc);
    put(f, hl);
    f.write(reinterpret_cast<const char*>(d.x.data()), sizeof(double) * d.x.size());
    f.write(reinterpret_cast<const char*>(d.u.data()), sizeof(int) * d.u.size());
    if (d.has_labels) f.write(reinterpret_cast<const char*>(d.y.data()), sizeof(int) * d.y.size());
    f.write(reinterpret_cast<const char*>(d.binary_feature_mask.data()), d.binary_feature_mask.size());
    uint32_t nn = static_cast<uint32_t>(d.feature_names.size());
    put(f, nn);
    for (const auto& s : d.feature_names) put_str(f, s);
    put_str(f, d.provenance);
}

std::optional<TabularDataset> load_dataset_cache(uint64_t source_hash, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) return std::nullopt;
    uint64_t src = 0, fp = 0;
    get(f, src);
    get(f, fp);
    if (src != source_hash) return std::nullopt;  // stale cache
    int64_t n = 0, dim = 0, gc = 0, hl = 0;
    get(f, n);
    get(f, dim);
    get(f, gc);
    get(f, hl);
    TabularDataset d;
    d.x = Tensor(static_cast<int>(n), static_cast<int>(dim));
    d.group_count = static_cast<int>(gc);
    d.has_labels = hl != 0;
    f.read(reinterpret_cast<char*>(d.x.data()), sizeof(double) * d.x.size());
    d.u.resize(n);
    f.read(reinterpret_cast<char*>(d.u.data()), sizeof(int) * d.u.size());
    if (d.has_labels) {
        d.y.resize(n);
        f.read(reinterpret_cast<char*>(d.y.data()), sizeof(int) * d.y.size());
    }
    d.binary_feature_mask.resize(dim);
    f.read(reinterpret_cast<char*>(d.binary_feature_mask.data()), d.binary_feature_mask.size());
    uint32_t nn = 0;
    get(f, nn);
    for (uint32_t i = 0; i < nn; ++i) d.feature_names.push_back(get_str(f));
    d.provenance = get_str(f);
    if (!f) return std::nullopt;
    if (d.schema_fingerprint() != fp) return std::nullopt;
    return d;
}

}  // namespace fairrep
