// fairrep: train/evaluate controllable fair representation models.
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairrep/data.hpp"
#include "fairrep/eval.hpp"
#include "fairrep/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fairrep;

namespace {

// user/config problem -> exit 2; anything else escaping main -> exit 1
struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) throw UserError("config: " + ctx + " must be an object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw UserError("config: unknown key \"" + item.key() + "\" in " + ctx);
}

struct DatasetConfig {
    std::string kind = "synthetic";
    std::string path;         // german / csv
    std::string schema_path;  // csv
    std::string data_dir;     // adult; falls back to FAIRREP_DATA_DIR
    double age_threshold = 25.0;
    SyntheticSpec synth;
    uint64_t synth_seed = 0;
    double train_fraction = 0.8;
    uint64_t split_seed = 0;
};

struct RunConfig {
    DatasetConfig dataset;
    TrainConfig train;
    std::string output_dir = "run";
    MIOptions mi;
    double downstream_l2 = 1.0;
};

struct SweepGrid {
    std::vector<double> lambda1{0.0, 0.1, 0.2, 1.0, 2.0};  // MIFR
    std::vector<double> lambda2{0.1, 0.2, 1.0, 2.0, 5.0};
    std::vector<double> eps1{10.0};                         // L-MIFR
    std::vector<double> eps2{0.05, 0.10, 0.20, 0.40};
    int parallelism = 0;  // 0 = hardware concurrency
};

DatasetConfig parse_dataset(const json& j) {
    check_keys(j,
               {"kind", "path", "schema", "data_dir", "age_threshold", "n", "x_dim", "rho",
                "with_labels", "synthetic_seed", "train_fraction", "split_seed"},
               "dataset");
    DatasetConfig d;
    d.kind = j.value("kind", d.kind);
    if (d.kind != "adult" && d.kind != "german" && d.kind != "csv" && d.kind != "synthetic")
        throw UserError("config: dataset.kind must be adult, german, csv, or synthetic");
    d.path = j.value("path", d.path);
    d.schema_path = j.value("schema", d.schema_path);
    d.data_dir = j.value("data_dir", d.data_dir);
    d.age_threshold = j.value("age_threshold", d.age_threshold);
    d.synth.n = j.value("n", d.synth.n);
    d.synth.x_dim = j.value("x_dim", d.synth.x_dim);
    d.synth.rho = j.value("rho", d.synth.rho);
    d.synth.with_labels = j.value("with_labels", d.synth.with_labels);
    d.synth_seed = j.value("synthetic_seed", d.synth_seed);
    d.train_fraction = j.value("train_fraction", d.train_fraction);
    d.split_seed = j.value("split_seed", d.split_seed);
    return d;
}

double parse_eps(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::infinity();
    return j.at(key).get<double>();
}

TrainConfig parse_train(const json& j) {
    check_keys(j,
               {"mode", "epochs", "batch_size", "adversary_steps", "lr", "eta_lambda", "seed",
                "constraints", "initial_lambda", "model", "ema_alpha", "raw_constraint_ascent",
                "log_every"},
               "train");
    TrainConfig c;
    std::string mode = j.value("mode", std::string("lmifr"));
    if (mode == "mifr")
        c.mode = TrainMode::MIFR;
    else if (mode == "lmifr")
        c.mode = TrainMode::LMIFR;
    else
        throw UserError("config: train.mode must be \"mifr\" or \"lmifr\"");
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.adversary_steps = j.value("adversary_steps", c.adversary_steps);
    if (j.contains("lr")) {
        const json& lr = j.at("lr");
        check_keys(lr, {"base_lr", "decay_factor", "decay_every"}, "train.lr");
        c.lr.base_lr = lr.value("base_lr", c.lr.base_lr);
        c.lr.decay_factor = lr.value("decay_factor", c.lr.decay_factor);
        c.lr.decay_every = lr.value("decay_every", c.lr.decay_every);
    }
    c.eta_lambda = j.value("eta_lambda", c.eta_lambda);
    c.seed = j.value("seed", c.seed);
    if (j.contains("constraints")) {
        const json& eps = j.at("constraints");
        check_keys(eps, {"c1", "c2", "eo", "eopp"}, "train.constraints");
        c.constraints.eps_c1 = parse_eps(eps, "c1");
        c.constraints.eps_c2 = parse_eps(eps, "c2");
        c.constraints.eps_eo = parse_eps(eps, "eo");
        c.constraints.eps_eopp = parse_eps(eps, "eopp");
    }
    if (j.contains("initial_lambda")) {
        const json& lam = j.at("initial_lambda");
        check_keys(lam, {"c1", "c2", "eo", "eopp"}, "train.initial_lambda");
        c.initial_lambda.c1 = lam.value("c1", c.initial_lambda.c1);
        c.initial_lambda.c2 = lam.value("c2", c.initial_lambda.c2);
        c.initial_lambda.eo = lam.value("eo", c.initial_lambda.eo);
        c.initial_lambda.eopp = lam.value("eopp", c.initial_lambda.eopp);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"z_dim", "hidden_dim"}, "train.model");
        c.model.z_dim = m.value("z_dim", c.model.z_dim);
        c.model.hidden_dim = m.value("hidden_dim", c.model.hidden_dim);
    }
    c.ema_alpha = j.value("ema_alpha", c.ema_alpha);
    c.raw_constraint_ascent = j.value("raw_constraint_ascent", c.raw_constraint_ascent);
    c.log_every = j.value("log_every", c.log_every);
    return c;
}

RunConfig parse_run_config(const json& j) {
    check_keys(j, {"dataset", "train", "output_dir", "eval", "sweep"}, "run config");
    RunConfig rc;
    if (j.contains("dataset")) rc.dataset = parse_dataset(j.at("dataset"));
    if (j.contains("train")) rc.train = parse_train(j.at("train"));
    rc.output_dir = j.value("output_dir", rc.output_dir);
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_keys(e, {"subsample", "seed", "downstream_l2"}, "eval");
        rc.mi.subsample = e.value("subsample", rc.mi.subsample);
        rc.mi.seed = e.value("seed", rc.mi.seed);
        rc.downstream_l2 = e.value("downstream_l2", rc.downstream_l2);
    }
    return rc;
}

SweepGrid parse_sweep(const json& j) {
    SweepGrid g;
    if (!j.contains("sweep")) return g;
    const json& s = j.at("sweep");
    check_keys(s, {"lambda1", "lambda2", "eps1", "eps2", "parallelism"}, "sweep");
    if (s.contains("lambda1")) g.lambda1 = s.at("lambda1").get<std::vector<double>>();
    if (s.contains("lambda2")) g.lambda2 = s.at("lambda2").get<std::vector<double>>();
    if (s.contains("eps1")) g.eps1 = s.at("eps1").get<std::vector<double>>();
    if (s.contains("eps2")) g.eps2 = s.at("eps2").get<std::vector<double>>();
    g.parallelism = s.value("parallelism", g.parallelism);
    return g;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UserError("config parse error in " + path + ": " + e.what());
    }
    try {
        return parse_run_config(j);
    } catch (const json::exception& e) {
        throw UserError("config error in " + path + ": " + e.what());
    }
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UserError("config parse error in " + path + ": " + e.what());
    }
    return j;
}

DataSplit load_split(const DatasetConfig& d) {
    if (d.kind == "adult") {
        std::string dir = d.data_dir;
        if (dir.empty()) {
            const char* env = std::getenv("FAIRREP_DATA_DIR");
            if (env) dir = env;
        }
        if (dir.empty())
            throw UserError(
                "adult dataset: no data directory. Set dataset.data_dir or FAIRREP_DATA_DIR to a "
                "directory containing adult.data and adult.test (download both from "
                "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/).");
        try {
            return load_adult(dir);
        } catch (const std::exception& e) {
            throw UserError(e.what());
        }
    }
    if (d.kind == "german") {
        if (d.path.empty()) throw UserError("german dataset: dataset.path is required");
        try {
            return split(load_german(d.path, d.age_threshold), d.train_fraction, d.split_seed);
        } catch (const std::exception& e) {
            throw UserError(e.what());
        }
    }
    if (d.kind == "csv") {
        if (d.path.empty() || d.schema_path.empty())
            throw UserError("csv dataset: dataset.path and dataset.schema are required");
        try {
            ColumnSchema schema = ColumnSchema::from_json_file(d.schema_path);
            return split(load_csv(d.path, schema), d.train_fraction, d.split_seed);
        } catch (const std::exception& e) {
            throw UserError(e.what());
        }
    }
    return split(synthetic_gen(d.synth, d.synth_seed).data, d.train_fraction, d.split_seed);
}

void resolve_model(RunConfig& rc, const TabularDataset& train_data) {
    rc.train.model.x_dim = train_data.x_dim();
    rc.train.model.u_group_count = train_data.group_count;
    rc.train.model.binary_feature_mask = train_data.binary_feature_mask;
    rc.train.model.label_conditioned_adversaries = rc.train.constraints.needs_labels();
}

json resolved_config_json(const RunConfig& rc) {
    json j;
    json d;
    d["kind"] = rc.dataset.kind;
    if (!rc.dataset.path.empty()) d["path"] = rc.dataset.path;
    if (!rc.dataset.schema_path.empty()) d["schema"] = rc.dataset.schema_path;
    if (!rc.dataset.data_dir.empty()) d["data_dir"] = rc.dataset.data_dir;
    if (rc.dataset.kind == "german") d["age_threshold"] = rc.dataset.age_threshold;
    if (rc.dataset.kind == "synthetic") {
        d["n"] = rc.dataset.synth.n;
        d["x_dim"] = rc.dataset.synth.x_dim;
        d["rho"] = rc.dataset.synth.rho;
        d["with_labels"] = rc.dataset.synth.with_labels;
        d["synthetic_seed"] = rc.dataset.synth_seed;
    }
    d["train_fraction"] = rc.dataset.train_fraction;
    d["split_seed"] = rc.dataset.split_seed;
    j["dataset"] = d;
    j["train"] = json::parse(train_config_to_json(rc.train));
    j["output_dir"] = rc.output_dir;
    j["eval"] = {{"subsample", rc.mi.subsample},
                 {"seed", rc.mi.seed},
                 {"downstream_l2", rc.downstream_l2}};
    return j;
}

void make_run_dir(const fs::path& dir, bool overwrite) {
    std::error_code ec;
    if (fs::exists(dir)) {
        if (!overwrite)
            throw UserError("output directory exists: " + dir.string() +
                            " (pass --overwrite to replace it)");
        fs::remove_all(dir, ec);
    }
    fs::create_directories(dir, ec);
    if (ec) throw UserError("cannot create output directory: " + dir.string());
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string report_text(const RunConfig& rc, const TrainResult& r, const EvalReport& rep) {
    std::ostringstream out;
    out << "# fair representation evaluation report\n";
    out << "# units: mutual information and C values in nats; AUC and delta metrics are "
           "probabilities\n";
    out << render_report(rep);
    out << "terminal_L_r_nats = " << fmt(r.state.ema.l_r) << "\n";
    out << "terminal_C1_nats = " << fmt(r.state.ema.c1) << "\n";
    out << "terminal_C2_nats = " << fmt(r.state.ema.c2) << "\n";
    if (rc.train.model.label_conditioned_adversaries) {
        out << "terminal_C_EO_nats = " << fmt(r.state.ema.c_eo) << "\n";
        out << "terminal_C_EOpp_nats = " << fmt(r.state.ema.c_eopp) << "\n";
    }
    out << "lambda1 = " << fmt(r.state.lambda.c1) << "\n";
    out << "lambda2 = " << fmt(r.state.lambda.c2) << "\n";
    out << "lambda_EO = " << fmt(r.state.lambda.eo) << "\n";
    out << "lambda_EOpp = " << fmt(r.state.lambda.eopp) << "\n";
    out << "iterations = " << r.state.iteration << "\n";
    return out.str();
}

struct RunArtifacts {
    TrainResult result;
    EvalReport report;
};

// one complete training run with all four declared artifacts
RunArtifacts run_one(const RunConfig& rc, const DataSplit& ds, bool overwrite) {
    fs::path dir(rc.output_dir);
    make_run_dir(dir, overwrite);

    {
        std::ofstream cfg(dir / "config.json");
        cfg << resolved_config_json(rc).dump(2) << "\n";
    }
    RunArtifacts out;
    {
        std::ofstream metrics(dir / "metrics.csv");
        out.result = train(rc.train, ds.train, &metrics, std::nullopt,
                           (dir / "diagnostic_checkpoint.bin").string());
    }
    save_checkpoint(out.result.state, rc.train, ds.train.schema_fingerprint(),
                    (dir / "checkpoint.bin").string());
    out.report = evaluate(out.result.state.params, rc.train.model, ds, rc.mi, rc.downstream_l2);
    {
        std::ofstream rep(dir / "report.txt");
        rep << report_text(rc, out.result, out.report);
    }
    return out;
}

// ------------------------------------------------------------- subcommands

int cmd_train(const RunConfig& rc_in, bool overwrite) {
    RunConfig rc = rc_in;
    DataSplit ds = load_split(rc.dataset);
    resolve_model(rc, ds.train);
    RunArtifacts a = run_one(rc, ds, overwrite);
    std::cout << "run complete: " << rc.output_dir << "\n";
    std::cout << report_text(rc, a.result, a.report);
    return 0;
}

struct SweepRow {
    int index = 0;
    bool ok = false;
    std::string error;
    double lambda1 = 0, lambda2 = 0;
    double eps1 = std::numeric_limits<double>::quiet_NaN();
    double eps2 = std::numeric_limits<double>::quiet_NaN();
    double l_r = 0, c1 = 0, c2 = 0, mi_xz = 0, mi_zu = 0;
    std::optional<double> auc_v, dp;
};

int cmd_sweep(const RunConfig& base, const SweepGrid& grid, bool overwrite) {
    DataSplit ds = load_split(base.dataset);

    std::vector<RunConfig> points;
    std::vector<SweepRow> rows;
    bool mifr = base.train.mode == TrainMode::MIFR;
    const auto& xs = mifr ? grid.lambda1 : grid.eps1;
    const auto& ys = mifr ? grid.lambda2 : grid.eps2;
    if (xs.empty() || ys.empty()) throw UserError("sweep: empty grid");

    fs::path root(base.output_dir);
    make_run_dir(root, overwrite);

    int index = 0;
    for (double a : xs) {
        for (double b : ys) {
            RunConfig rc = base;
            rc.train.seed = base.train.seed + static_cast<uint64_t>(index);
            rc.output_dir = (root / ("point_" + std::to_string(index))).string();
            SweepRow row;
            row.index = index;
            if (mifr) {
                rc.train.initial_lambda = Multipliers{a, b, 0.0, 0.0};
                rc.train.constraints = ConstraintSpec{};
                row.lambda1 = a;
                row.lambda2 = b;
            } else {
                rc.train.constraints.eps_c1 = a;
                rc.train.constraints.eps_c2 = b;
                row.eps1 = a;
                row.eps2 = b;
            }
            resolve_model(rc, ds.train);
            points.push_back(std::move(rc));
            rows.push_back(row);
            ++index;
        }
    }

    int workers = grid.parallelism > 0 ? grid.parallelism
                                       : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<int>(workers, static_cast<int>(points.size()));
    std::atomic<size_t> next{0};
    std::mutex mu;
    auto worker = [&]() {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            try {
                RunArtifacts a = run_one(points[i], ds, true);
                std::lock_guard<std::mutex> lock(mu);
                SweepRow& row = rows[i];
                row.ok = true;
                row.l_r = a.result.state.ema.l_r;
                row.c1 = a.result.state.ema.c1;
                row.c2 = a.result.state.ema.c2;
                row.mi_xz = a.report.mi.i_xz_given_u;
                row.mi_zu = a.report.mi.i_zu;
                if (a.report.has_downstream) {
                    row.auc_v = a.report.downstream.test_auc;
                    row.dp = a.report.fairness.dp;
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                rows[i].error = e.what();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    std::ofstream table(root / "sweep.csv");
    table << "# units: L_r/C1/C2/mi columns in nats; auc/delta_dp are probabilities\n";
    table << "index,status,lambda1,lambda2,eps1,eps2,L_r,C1,C2,mi_xz_given_u,mi_zu,auc,delta_dp\n";
    int completed = 0;
    auto cell = [&](double v) { return std::isnan(v) ? std::string("n/a") : fmt(v); };
    auto opt_cell = [&](const std::optional<double>& v) {
        return v ? fmt(*v) : std::string("n/a");
    };
    for (const SweepRow& row : rows) {
        table << row.index << "," << (row.ok ? "ok" : "failed") << "," << fmt(row.lambda1) << ","
              << fmt(row.lambda2) << "," << cell(row.eps1) << "," << cell(row.eps2) << ",";
        if (row.ok) {
            table << fmt(row.l_r) << "," << fmt(row.c1) << "," << fmt(row.c2) << ","
                  << fmt(row.mi_xz) << "," << fmt(row.mi_zu) << "," << opt_cell(row.auc_v) << ","
                  << opt_cell(row.dp) << "\n";
            ++completed;
        } else {
            table << "n/a,n/a,n/a,n/a,n/a,n/a,n/a\n";
            std::cerr << "sweep point " << row.index << " failed: " << row.error << "\n";
        }
    }
    std::cout << "sweep complete: " << completed << "/" << rows.size() << " runs, table at "
              << (root / "sweep.csv").string() << "\n";
    return 0;
}

int cmd_tune_mifr(const RunConfig& base, bool overwrite) {
    if (!base.train.constraints.any_enabled())
        throw UserError("tune-mifr: at least one constraint budget must be set");
    DataSplit ds = load_split(base.dataset);

    RunConfig rc = base;
    resolve_model(rc, ds.train);
    rc.train.mode = TrainMode::MIFR;
    for (ConstraintId id : kAllConstraints)
        rc.train.initial_lambda.set(id, rc.train.constraints.enabled(id) ? 0.1 : 0.0);

    const int kMaxDoublings = 12;
    int retrains = 0;
    int doublings[4] = {0, 0, 0, 0};
    std::ostringstream log;
    std::optional<RunArtifacts> final_run;

    while (true) {
        RunConfig attempt = rc;
        attempt.output_dir = rc.output_dir;
        RunArtifacts a = run_one(attempt, ds, retrains > 0 ? true : overwrite);
        ++retrains;

        std::vector<ConstraintId> violated;
        for (ConstraintId id : kAllConstraints) {
            if (!rc.train.constraints.enabled(id)) continue;
            double c = a.result.state.ema.constraint(id);
            double eps = rc.train.constraints.eps(id);
            log << "run " << retrains << ": constraint " << static_cast<int>(id) << " C="
                << fmt(c) << " eps=" << fmt(eps) << " lambda="
                << fmt(rc.train.initial_lambda.get(id)) << (c <= eps ? " ok" : " violated")
                << "\n";
            if (c > eps) violated.push_back(id);
        }
        if (violated.empty()) {
            final_run = std::move(a);
            break;
        }
        bool capped = false;
        for (ConstraintId id : violated) {
            int slot = static_cast<int>(id);
            if (doublings[slot] >= kMaxDoublings) {
                capped = true;
                continue;
            }
            ++doublings[slot];
            rc.train.initial_lambda.set(id, rc.train.initial_lambda.get(id) * 2.0);
        }
        if (capped) {
            log << "FAILED: doubling cap (" << kMaxDoublings << ") reached with constraints still "
                << "violated\n";
            std::ofstream tune(fs::path(rc.output_dir) / "tune.txt");
            tune << log.str() << "retrains = " << retrains << "\n";
            std::cerr << "tune-mifr failed after " << retrains << " runs; see "
                      << (fs::path(rc.output_dir) / "tune.txt").string() << "\n";
            return 1;
        }
    }

    log << "feasible after " << retrains << " runs\n";
    for (ConstraintId id : kAllConstraints)
        if (rc.train.constraints.enabled(id))
            log << "final lambda[" << static_cast<int>(id)
                << "] = " << fmt(rc.train.initial_lambda.get(id)) << " after "
                << doublings[static_cast<int>(id)] << " doublings\n";
    log << "retrains = " << retrains << "\n";
    log << "cost_multiple_vs_single_run = " << retrains << "\n";
    std::ofstream tune(fs::path(rc.output_dir) / "tune.txt");
    tune << log.str();
    std::cout << log.str();
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path, int pca_k) {
    LoadedCheckpoint ck;
    try {
        ck = load_checkpoint(checkpoint_path);
    } catch (const std::exception& e) {
        throw UserError(e.what());
    }
    RunConfig rc = load_run_config(config_path);
    DataSplit ds = load_split(rc.dataset);
    if (ds.train.schema_fingerprint() != ck.schema_fingerprint)
        throw UserError("eval: checkpoint schema fingerprint does not match the dataset");

    EvalReport rep =
        evaluate(ck.state.params, ck.config.model, ds, rc.mi, rc.downstream_l2);
    std::cout << "# units: mutual information and C values in nats; AUC and delta metrics are "
                 "probabilities\n";
    std::cout << render_report(rep);

    // constraint values on the full test set, one fresh z sample per row
    RngStream noise(rc.mi.seed);
    std::vector<int> all(ds.test.n());
    for (int i = 0; i < ds.test.n(); ++i) all[i] = i;
    BatchTensors batch = make_batch(ds.test.x, ds.test.u, ds.test.y, all, ds.test.group_count,
                                    ck.config.model.z_dim, noise);
    EmpiricalCategorical p_u = fit_empirical(ds.train.u, ds.train.group_count);
    std::cout << "C1_nats = " << fmt(c1_term(batch, ck.state.params, ck.config.model)) << "\n";
    std::cout << "C2_nats = " << fmt(c2_term(batch, ck.state.params, ck.config.model, p_u))
              << "\n";
    if (ck.state.params.adv_y && ds.test.has_labels) {
        double pos = 0.0;
        for (int v : ds.train.y) pos += v;
        pos /= ds.train.n();
        std::cout << "C_EO_nats = "
                  << fmt(ceo_term(batch, ck.state.params, ck.config.model, p_u, pos)) << "\n";
        std::cout << "C_EOpp_nats = "
                  << fmt(ceopp_term(batch, ck.state.params, ck.config.model, p_u)) << "\n";
    }

    if (pca_k > 0 && ds.train.has_labels) {
        PcaResult pca = pca_features(ds.train.x, pca_k);
        DownstreamResult lr = fit_logistic_regression(pca.projected, ds.train.y, rc.downstream_l2);
        Tensor test_proj(ds.test.n(), pca_k);
        for (int r = 0; r < ds.test.n(); ++r)
            for (int j = 0; j < pca_k; ++j) {
                double s = 0.0;
                for (int c = 0; c < ds.test.x_dim(); ++c)
                    s += (ds.test.x.at(r, c) - pca.mean.at(0, c)) * pca.components.at(j, c);
                test_proj.at(r, j) = s;
            }
        std::vector<double> preds = predict_logistic(lr.weights, test_proj);
        std::cout << "pca_auc = " << fmt(auc(preds, ds.test.y)) << "\n";
        std::optional<double> dp = delta_dp(preds, ds.test.u, ds.test.group_count);
        std::cout << "pca_delta_dp = " << (dp ? fmt(*dp) : std::string("n/a")) << "\n";
    }
    return 0;
}

int cmd_estimate_eps(const RunConfig& rc_in, int probe_epochs, const std::string& out_path) {
    RunConfig rc = rc_in;
    DataSplit ds = load_split(rc.dataset);
    resolve_model(rc, ds.train);
    TrainConfig probe = rc.train;
    probe.epochs = probe_epochs;
    FeasibleEps eps = estimate_feasible_eps(probe, ds.train);

    json fragment;
    fragment["train"]["constraints"] = {{"c1", eps.eps1_floor}, {"c2", eps.eps2_ceiling}};
    std::string text = fragment.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path);
        if (!out) throw UserError("cannot write " + out_path);
        out << text;
        std::cout << "wrote " << out_path << "\n";
    }
    std::cout << "# eps1 floor (terminal probe C1, nats) = " << fmt(eps.eps1_floor) << "\n";
    std::cout << "# eps2 ceiling (H(u), nats) = " << fmt(eps.eps2_ceiling) << "\n";
    return 0;
}

// sweep.csv parsing for the report command
struct TableRow {
    std::map<std::string, std::string> cells;
};

std::vector<TableRow> read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open table: " + path);
    std::string line;
    std::vector<std::string> header;
    std::vector<TableRow> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (header.empty()) {
            header = cells;
            continue;
        }
        if (cells.size() != header.size())
            throw UserError("malformed table row in " + path + ": " + line);
        TableRow row;
        for (size_t i = 0; i < header.size(); ++i) row.cells[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_series(const fs::path& path, const std::string& x_label, const std::string& y_label,
                  const std::vector<std::pair<double, double>>& points) {
    std::ofstream out(path);
    out << "# x: " << x_label << "\n";
    out << "# y: " << y_label << "\n";
    out << "x,y\n";
    for (const auto& [x, y] : points) out << fmt(x) << "," << fmt(y) << "\n";
}

int cmd_report(const std::string& sweep_path, const std::string& out_dir, bool overwrite) {
    std::vector<TableRow> rows = read_table(sweep_path);
    const char* needed[] = {"status", "eps2",  "C2", "mi_xz_given_u",
                            "mi_zu",  "auc", "delta_dp"};
    for (const TableRow& row : rows)
        for (const char* col : needed)
            if (!row.cells.count(col))
                throw UserError(std::string("report: missing column \"") + col + "\" in " +
                                sweep_path);

    auto num = [](const std::string& s, double* out_v) {
        if (s == "n/a" || s.empty()) return false;
        *out_v = std::strtod(s.c_str(), nullptr);
        return true;
    };

    std::vector<std::pair<double, double>> mi_auc, mi_dp, c2_eps2, dp_eps2, expr_eps2;
    for (const TableRow& row : rows) {
        if (row.cells.at("status") != "ok") continue;
        double mi_xz, mi_zu, auc_v, dp, c2, eps2;
        bool has_mi_xz = num(row.cells.at("mi_xz_given_u"), &mi_xz);
        bool has_mi_zu = num(row.cells.at("mi_zu"), &mi_zu);
        bool has_auc = num(row.cells.at("auc"), &auc_v);
        bool has_dp = num(row.cells.at("delta_dp"), &dp);
        bool has_c2 = num(row.cells.at("C2"), &c2);
        bool has_eps2 = num(row.cells.at("eps2"), &eps2);
        if (has_mi_xz && has_auc) mi_auc.emplace_back(mi_xz, auc_v);
        if (has_mi_zu && has_dp) mi_dp.emplace_back(mi_zu, dp);
        if (has_eps2 && has_c2) c2_eps2.emplace_back(eps2, c2);
        if (has_eps2 && has_dp) dp_eps2.emplace_back(eps2, dp);
        if (has_eps2 && has_mi_xz) expr_eps2.emplace_back(eps2, mi_xz);
    }
    auto by_x = [](auto& v) {
        std::sort(v.begin(), v.end());
    };
    by_x(c2_eps2);
    by_x(dp_eps2);
    by_x(expr_eps2);

    fs::path dir(out_dir);
    make_run_dir(dir, overwrite);
    write_series(dir / "fig1_expressiveness_vs_auc.csv", "mi_xz_given_u (nats)",
                 "test AUC (probability)", mi_auc);
    write_series(dir / "fig1_mi_zu_vs_delta_dp.csv", "mi_zu (nats)", "delta_dp (probability)",
                 mi_dp);
    write_series(dir / "fig2_c2_vs_eps2.csv", "eps2 (nats); rows grouped by eps2", "C2 (nats)",
                 c2_eps2);
    write_series(dir / "fig3_delta_dp_vs_eps2.csv", "eps2 (nats)", "delta_dp (probability)",
                 dp_eps2);
    write_series(dir / "fig4_expressiveness_vs_eps2.csv", "eps2 (nats)", "mi_xz_given_u (nats)",
                 expr_eps2);
    std::cout << "report series written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fair representation learning with controllable constraints"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, sweep_path, out_path;
    bool overwrite = false;
    int pca_k = 0;
    int probe_epochs = 200;
    // flag overrides applied on top of the config file (flags win)
    std::optional<uint64_t> seed_override;
    std::optional<int> epochs_override;
    std::optional<std::string> output_override, mode_override;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run config file (JSON)")->required();
        cmd->add_flag("--overwrite", overwrite, "replace an existing output directory");
        cmd->add_option("--seed", seed_override, "override train.seed");
        cmd->add_option("--epochs", epochs_override, "override train.epochs");
        cmd->add_option("--output", output_override, "override output_dir");
        cmd->add_option("--mode", mode_override, "override train.mode (mifr|lmifr)");
    };

    CLI::App* c_train = app.add_subcommand("train", "run one training job");
    add_common(c_train);
    CLI::App* c_sweep = app.add_subcommand("sweep", "grid sweep over multipliers or budgets");
    add_common(c_sweep);
    CLI::App* c_tune = app.add_subcommand("tune-mifr", "lambda-doubling feasibility search");
    add_common(c_tune);
    CLI::App* c_eps = app.add_subcommand("estimate-eps", "suggest feasible constraint budgets");
    add_common(c_eps);
    c_eps->add_option("--probe-epochs", probe_epochs, "probe run length (epochs)");
    c_eps->add_option("--out", out_path, "write the config fragment here");

    CLI::App* c_eval = app.add_subcommand("eval", "evaluate a checkpoint");
    c_eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    c_eval->add_option("--config", config_path, "run config file (JSON)")->required();
    c_eval->add_option("--pca", pca_k, "include a k-component PCA baseline");

    CLI::App* c_report = app.add_subcommand("report", "emit plot-ready data series");
    c_report->add_option("--sweep", sweep_path, "sweep table (sweep.csv)")->required();
    c_report->add_option("--out", out_path, "output directory")->required();
    c_report->add_flag("--overwrite", overwrite, "replace an existing output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto load_with_overrides = [&]() {
            RunConfig rc = load_run_config(config_path);
            if (seed_override) rc.train.seed = *seed_override;
            if (epochs_override) rc.train.epochs = *epochs_override;
            if (output_override) rc.output_dir = *output_override;
            if (mode_override) {
                if (*mode_override == "mifr")
                    rc.train.mode = TrainMode::MIFR;
                else if (*mode_override == "lmifr")
                    rc.train.mode = TrainMode::LMIFR;
                else
                    throw UserError("--mode must be mifr or lmifr");
            }
            return rc;
        };
        if (*c_train) return cmd_train(load_with_overrides(), overwrite);
        if (*c_sweep)
            return cmd_sweep(load_with_overrides(), parse_sweep(read_json_file(config_path)),
                             overwrite);
        if (*c_tune) return cmd_tune_mifr(load_with_overrides(), overwrite);
        if (*c_eval) return cmd_eval(checkpoint_path, config_path, pca_k);
        if (*c_eps) return cmd_estimate_eps(load_with_overrides(), probe_epochs, out_path);
        if (*c_report) return cmd_report(sweep_path, out_path, overwrite);
        return 2;
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
