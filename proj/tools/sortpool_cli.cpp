#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sortpool/experiment.hpp"
#include "sortpool/gradcheck.hpp"
#include "sortpool/optim.hpp"

using namespace sortpool;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> subset;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "flat key=value config file");
    cmd->add_option("--set", opts.overrides, "config override, key=value (repeatable)");
    cmd->add_option("--seed", opts.seed, "base RNG seed");
    cmd->add_option("--out-dir", opts.out_dir, "output directory");
    cmd->add_option("--subset", opts.subset, "cap on training examples (0 = all)");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = parse_config(opts.config_path);
    for (const std::string& ov : opts.overrides) {
        std::size_t eq = ov.find('=');
        if (eq == std::string::npos) throw Error("--set expects key=value, got '" + ov + "'");
        cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
    }
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    if (opts.subset) cfg.subset = *opts.subset;
    cfg.validate();
    return cfg;
}

std::ofstream open_csv(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    std::string path = cfg.out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);  // binary keeps line endings fixed
    if (!out) throw Error("cannot write " + path);
    std::cout << "writing " << path << "\n";
    return out;
}

std::string variant_name(const ExperimentConfig& cfg) {
    if (cfg.mode == "kth-max") return "k=" + std::to_string(cfg.k);
    if (cfg.mode == "sorted") return "sorted(K=" + std::to_string(cfg.K) + ")";
    return cfg.mode;
}

int cmd_train(const CommonOpts& opts) {
    ExperimentConfig cfg = resolve_config(opts);
    auto [train_ds, test_ds] = load_datasets(cfg);
    std::cout << "training " << variant_name(cfg) << " on " << train_ds.size()
              << " samples, " << cfg.epochs << " epoch(s)\n";
    LayerGraph graph = build_network(cfg, train_ds.images.extent(2), train_ds.images.extent(3));
    std::ofstream csv = open_csv(cfg, "train.csv");
    TrainResult res = train(cfg, graph, train_ds, test_ds, &csv, variant_name(cfg), cfg.seed);
    std::string ckpt = cfg.out_dir + "/checkpoint.bin";
    save_checkpoint(graph, ckpt, config_hash(cfg));
    std::cout << "final test error: " << res.final_test_err_pct << "%\n"
              << "checkpoint: " << ckpt << "\n";
    return 0;
}

int cmd_sweep_k(const CommonOpts& opts) {
    ExperimentConfig cfg = resolve_config(opts);
    std::vector<SweepVariant> variants;
    for (std::size_t k = 1; k <= 4; ++k) {
        variants.push_back({"k=" + std::to_string(k), "kth-max", k, 1});
    }
    std::ofstream csv = open_csv(cfg, "sweep_k.csv");
    std::vector<SweepRun> runs = sweep(cfg, variants, &csv);
    for (const SweepVariant& v : variants) {
        double sum_first = 0.0, sum_last = 0.0;
        std::size_t n = 0;
        for (const SweepRun& r : runs) {
            if (r.variant != v.name) continue;
            sum_first += r.result.epochs.front().test_err_pct;
            sum_last += r.result.epochs.back().test_err_pct;
            ++n;
        }
        std::cout << v.name << ": mean test error " << sum_first / n << "% @epoch 1, "
                  << sum_last / n << "% @epoch " << cfg.epochs << "\n";
    }
    return 0;
}

int cmd_compare_sorted(const CommonOpts& opts) {
    ExperimentConfig cfg = resolve_config(opts);
    std::vector<SweepVariant> variants{
        {"max", "max", 1, 1},
        {"sorted(K=" + std::to_string(cfg.K) + ")", "sorted", 1, cfg.K},
    };
    std::ofstream csv = open_csv(cfg, "compare_sorted.csv");
    std::vector<SweepRun> runs = sweep(cfg, variants, &csv);
    for (const SweepVariant& v : variants) {
        double sum_last = 0.0;
        std::size_t n = 0;
        for (const SweepRun& r : runs) {
            if (r.variant != v.name) continue;
            sum_last += r.result.epochs.back().test_err_pct;
            ++n;
        }
        std::cout << v.name << ": mean test error " << sum_last / n << "% @epoch "
                  << cfg.epochs << "\n";
    }
    return 0;
}

int cmd_episodic(const CommonOpts& opts, const std::string& checkpoint, std::size_t episodes) {
    ExperimentConfig cfg = resolve_config(opts);
    auto [train_full, test_full] = load_datasets(cfg);
    std::vector<std::size_t> train_classes{0, 1, 2, 3, 4};
    std::vector<std::size_t> heldout_classes{5, 6, 7, 8, 9};
    Dataset train_ds = train_full.filter_classes(train_classes);
    Dataset heldout = test_full.filter_classes(heldout_classes);

    LayerGraph graph = build_network(cfg, train_ds.images.extent(2), train_ds.images.extent(3));
    if (!checkpoint.empty()) {
        load_checkpoint(graph, checkpoint, config_hash(cfg));
        std::cout << "loaded " << checkpoint << "\n";
    } else {
        // the embedding still classifies 10 ways; only classes 0-4 appear
        std::cout << "training " << variant_name(cfg) << " embedding on classes 0-4\n";
        Dataset eval5 = test_full.filter_classes(train_classes);
        train(cfg, graph, train_ds, eval5, nullptr, variant_name(cfg), cfg.seed);
    }
    EpisodicResult res = episodic_eval(graph, heldout, 5, episodes, cfg.seed);
    std::cout << "5-way 1-shot accuracy on held-out classes 5-9: "
              << 100.0 * res.accuracy << "% +/- " << 100.0 * res.std_error
              << "% over " << res.episodes << " episodes\n";
    return 0;
}

int cmd_gradcheck(const CommonOpts& opts) {
    ExperimentConfig cfg = resolve_config(opts);
    SplitMix64 rng(cfg.seed);
    bool ok = true;
    auto report = [&](const std::string& name, double err, double tol) {
        bool pass = err < tol;
        ok = ok && pass;
        std::cout << (pass ? "PASS" : "FAIL") << "  " << name << "  max rel err " << err
                  << " (tolerance " << tol << ")\n";
    };

    for (std::size_t k : {1, 2, 3, 4}) {
        PoolConfig pcfg = PoolConfig::kth_max(3, 3, 2, 2, k);
        Tensor x = tie_free_random({1, 2, 7, 7}, rng);
        auto [out, saved] = kth_max_forward(x, pcfg);
        Tensor analytic = kth_max_backward(Tensor::full(out.shape(), 1.0), saved, x.shape());
        auto f = [&](const Tensor& t) {
            auto [o, s] = kth_max_forward(t, pcfg);
            return sum(o);
        };
        report("kth_max(k=" + std::to_string(k) + ")",
               compare(analytic, finite_diff(f, x)).max_relative_error, 1e-5);
    }
    for (std::size_t K : {1, 2, 4, 9}) {
        PoolConfig pcfg = PoolConfig::sorted(3, 3, 2, 2, K);
        Tensor x = tie_free_random({1, 2, 7, 7}, rng);
        SortedPoolParams p;
        p.raw_weights = Tensor::zeros({2, K});
        p.grad = Tensor::zeros({2, K});
        for (std::size_t i = 0; i < p.raw_weights.size(); ++i) p.raw_weights[i] = rng.uniform(-1, 1);
        auto [out, saved] = sorted_pool_forward(x, p, pcfg);
        SortedPoolParams pw = p;
        Tensor analytic = sorted_pool_backward(Tensor::full(out.shape(), 1.0), saved, pw, x.shape());
        auto f_in = [&](const Tensor& t) {
            auto [o, s] = sorted_pool_forward(t, p, pcfg);
            return sum(o);
        };
        auto f_w = [&](const Tensor& w) {
            SortedPoolParams q{w, Tensor::zeros(w.shape())};
            auto [o, s] = sorted_pool_forward(x, q, pcfg);
            return sum(o);
        };
        report("sorted(K=" + std::to_string(K) + ") input grad",
               compare(analytic, finite_diff(f_in, x)).max_relative_error, 1e-5);
        report("sorted(K=" + std::to_string(K) + ") weight grad",
               compare(pw.grad, finite_diff(f_w, p.raw_weights)).max_relative_error, 1e-5);
    }
    return ok ? 0 : 1;
}

int cmd_print_config(const CommonOpts& opts) {
    std::cout << resolve_config(opts).to_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kth-max / sorted pooling experiment harness"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string checkpoint;
    std::size_t episodes = 1000;

    CLI::App* c_train = app.add_subcommand("train", "train one network, write CSV and checkpoint");
    add_common(c_train, opts);
    CLI::App* c_sweep = app.add_subcommand("sweep-k", "compare kth-max pooling for k=1..4");
    add_common(c_sweep, opts);
    CLI::App* c_cmp = app.add_subcommand("compare-sorted", "compare max vs sorted pooling");
    add_common(c_cmp, opts);
    CLI::App* c_epi = app.add_subcommand("episodic", "5-way 1-shot evaluation on held-out classes");
    add_common(c_epi, opts);
    c_epi->add_option("--checkpoint", checkpoint, "evaluate an existing checkpoint");
    c_epi->add_option("--episodes", episodes, "number of evaluation episodes");
    CLI::App* c_gc = app.add_subcommand("gradcheck", "finite-difference checks of the pooling backward passes");
    add_common(c_gc, opts);
    CLI::App* c_pc = app.add_subcommand("print-config", "echo the resolved configuration");
    add_common(c_pc, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_train->parsed()) return cmd_train(opts);
        if (c_sweep->parsed()) return cmd_sweep_k(opts);
        if (c_cmp->parsed()) return cmd_compare_sorted(opts);
        if (c_epi->parsed()) return cmd_episodic(opts, checkpoint, episodes);
        if (c_gc->parsed()) return cmd_gradcheck(opts);
        if (c_pc->parsed()) return cmd_print_config(opts);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
