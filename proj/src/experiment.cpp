#include "sortpool/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sortpool/optim.hpp"

namespace sortpool {

namespace {

constexpr std::uint64_t kSyntheticTrainSeed = 0xDA7A5EEDULL;
constexpr std::uint64_t kSyntheticTestSeed = 0xDA7A5EEEULL;

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        long long v = std::stoll(value);
        if (v < 0) throw Error("config: " + key + " must be non-negative");
        return static_cast<std::size_t>(v);
    } catch (const std::invalid_argument&) {
        throw Error("config: " + key + " expects an integer, got '" + value + "'");
    } catch (const std::out_of_range&) {
        throw Error("config: " + key + " out of range: '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        return std::stod(value);
    } catch (const std::exception&) {
        throw Error("config: " + key + " expects a number, got '" + value + "'");
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (dataset != "synthetic" && dataset != "mnist") {
        throw Error("config: dataset must be 'synthetic' or 'mnist', got '" + dataset + "'");
    }
    if (mode != "max" && mode != "avg" && mode != "kth-max" && mode != "sorted") {
        throw Error("config: mode must be max|avg|kth-max|sorted, got '" + mode + "'");
    }
    if (weight_init != "uniform" && weight_init != "expdecay") {
        throw Error("config: weight_init must be uniform|expdecay, got '" + weight_init + "'");
    }
    if (epochs < 1 || batch_size < 1 || replicates < 1 || k < 1 || K < 1) {
        throw Error("config: epochs, batch_size, replicates, k and K must be positive");
    }
    if (!(learning_rate > 0.0)) throw Error("config: learning_rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw Error("config: momentum must be in [0,1)");
    if (pool_learning_rate < 0.0) throw Error("config: pool_learning_rate must be >= 0");
    if (weight_decay < 0.0) throw Error("config: weight_decay must be >= 0");
    if (!(expdecay_lambda > 0.0)) throw Error("config: expdecay_lambda must be positive");
    if (synthetic_train < 1 || synthetic_test < 1) {
        throw Error("config: synthetic dataset sizes must be positive");
    }
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key == "dataset") dataset = value;
    else if (key == "data_dir") data_dir = value;
    else if (key == "synthetic_train") synthetic_train = parse_size(key, value);
    else if (key == "synthetic_test") synthetic_test = parse_size(key, value);
    else if (key == "subset") subset = parse_size(key, value);
    else if (key == "mode") mode = value;
    else if (key == "k") k = parse_size(key, value);
    else if (key == "K") K = parse_size(key, value);
    else if (key == "weight_init") weight_init = value;
    else if (key == "expdecay_lambda") expdecay_lambda = parse_double(key, value);
    else if (key == "epochs") epochs = parse_size(key, value);
    else if (key == "batch_size") batch_size = parse_size(key, value);
    else if (key == "learning_rate") learning_rate = parse_double(key, value);
    else if (key == "momentum") momentum = parse_double(key, value);
    else if (key == "pool_learning_rate") pool_learning_rate = parse_double(key, value);
    else if (key == "weight_decay") weight_decay = parse_double(key, value);
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_size(key, value));
    else if (key == "replicates") replicates = parse_size(key, value);
    else if (key == "train_eval_cap") train_eval_cap = parse_size(key, value);
    else if (key == "out_dir") out_dir = value;
    else throw Error("config: unknown key '" + key + "'");
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream os;
    os << "dataset=" << dataset << "\n"
       << "data_dir=" << data_dir << "\n"
       << "synthetic_train=" << synthetic_train << "\n"
       << "synthetic_test=" << synthetic_test << "\n"
       << "subset=" << subset << "\n"
       << "mode=" << mode << "\n"
       << "k=" << k << "\n"
       << "K=" << K << "\n"
       << "weight_init=" << weight_init << "\n"
       << "expdecay_lambda=" << fmt(expdecay_lambda) << "\n"
       << "epochs=" << epochs << "\n"
       << "batch_size=" << batch_size << "\n"
       << "learning_rate=" << fmt(learning_rate) << "\n"
       << "momentum=" << fmt(momentum) << "\n"
       << "pool_learning_rate=" << fmt(pool_learning_rate) << "\n"
       << "weight_decay=" << fmt(weight_decay) << "\n"
       << "seed=" << seed << "\n"
       << "replicates=" << replicates << "\n"
       << "train_eval_cap=" << train_eval_cap << "\n"
       << "out_dir=" << out_dir << "\n";
    return os.str();
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path);
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        auto notspace = [](unsigned char c) { return !std::isspace(c); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
        line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error("config " + path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
        value.erase(value.begin(), std::find_if(value.begin(), value.end(), notspace));
        cfg.set(key, value);
    }
    return cfg;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::string desc = "arch-v1|mode=" + cfg.mode;
    if (cfg.mode == "kth-max") desc += "|k=" + std::to_string(cfg.k);
    if (cfg.mode == "sorted") desc += "|K=" + std::to_string(cfg.K);
    desc += "|conv=8,32,64|dense=10";
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : desc) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

LayerGraph build_network(const ExperimentConfig& cfg, std::size_t in_h, std::size_t in_w) {
    cfg.validate();
    SplitMix64 rng(cfg.seed);
    LayerGraph g;
    const std::size_t conv_channels[3] = {8, 32, 64};
    std::size_t in_c = 1, h = in_h, w = in_w;
    for (std::size_t stage = 0; stage < 3; ++stage) {
        std::size_t out_c = conv_channels[stage];
        if (h < 3 || w < 3) {
            throw Error("build_network: input too small for three conv/pool stages");
        }
        g.add(std::make_unique<Conv2D>(in_c, out_c, 3, 3, 1, rng));
        h -= 2;
        w -= 2;
        g.add(std::make_unique<ReLU>());
        // 3x3 stride-2 valid pooling while it fits, 2x2 for the last stage
        std::size_t pk = (h >= 3 && w >= 3) ? 3 : 2;
        if (h < pk || w < pk) throw Error("build_network: input too small for pooling stage");
        PoolConfig pc;
        if (cfg.mode == "max") pc = PoolConfig::max(pk, pk, 2, 2);
        else if (cfg.mode == "avg") pc = PoolConfig::avg(pk, pk, 2, 2);
        else if (cfg.mode == "kth-max") {
            // on a smaller window keep the same order-statistic quantile
            // (k of 9 on 3x3 -> rank ceil(k*4/9) of 4 on 2x2) instead of
            // letting k saturate into min pooling
            std::size_t win = pk * pk;
            std::size_t ks = (cfg.k * win + 8) / 9;
            pc = PoolConfig::kth_max(pk, pk, 2, 2, std::clamp<std::size_t>(ks, 1, win));
        }
        else pc = PoolConfig::sorted(pk, pk, 2, 2, std::min(cfg.K, pk * pk));
        auto pool = std::make_unique<Pool>(pc, out_c);
        if (cfg.mode == "sorted" && cfg.weight_init == "expdecay") {
            pool->sorted_params() = init_weights(out_c, pc.K, WeightInit::ExpDecay,
                                                 cfg.expdecay_lambda);
        }
        g.add(std::move(pool));
        h = valid_out_extent(h, pk, 2);
        w = valid_out_extent(w, pk, 2);
        in_c = out_c;
    }
    g.add(std::make_unique<Flatten>());
    g.add(std::make_unique<Dense>(in_c * h * w, 10, rng));
    return g;
}

std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& cfg) {
    Dataset train, test;
    if (cfg.dataset == "mnist") {
        auto pick = [&](const std::string& base) {
            std::string raw = cfg.data_dir + "/" + base;
            if (std::filesystem::exists(raw)) return raw;
            if (std::filesystem::exists(raw + ".gz")) return raw + ".gz";
            throw Error("MNIST file not found: " + raw + "[.gz]");
        };
        train = load_idx(pick("train-images-idx3-ubyte"), pick("train-labels-idx1-ubyte"));
        test = load_idx(pick("t10k-images-idx3-ubyte"), pick("t10k-labels-idx1-ubyte"));
    } else {
        train = synthetic_dataset(kSyntheticTrainSeed, cfg.synthetic_train, 10);
        test = synthetic_dataset(kSyntheticTestSeed, cfg.synthetic_test, 10);
    }
    if (cfg.subset > 0 && cfg.subset < train.size()) {
        std::vector<std::size_t> head(cfg.subset);
        std::iota(head.begin(), head.end(), 0);
        train = train.subset(head);
    }
    return {std::move(train), std::move(test)};
}

double evaluate_error_pct(LayerGraph& graph, const Dataset& ds, std::size_t batch_size) {
    std::size_t wrong = 0;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        std::size_t len = std::min(batch_size, ds.size() - start);
        std::vector<std::size_t> pos(len);
        std::iota(pos.begin(), pos.end(), start);
        Dataset sub = ds.subset(pos);
        Tensor logits = graph.forward(sub.images);
        std::vector<std::size_t> pred = argmax_along_last(logits);
        for (std::size_t i = 0; i < len; ++i) {
            if (pred[i] != sub.labels[i]) ++wrong;
        }
    }
    return 100.0 * static_cast<double>(wrong) / static_cast<double>(ds.size());
}

namespace {

std::vector<Pool*> sorted_pools(LayerGraph& graph) {
    std::vector<Pool*> pools;
    for (std::size_t i = 0; i < graph.layers(); ++i) {
        auto* p = dynamic_cast<Pool*>(&graph.layer(i));
        if (p && p->config().mode == PoolMode::Sorted) pools.push_back(p);
    }
    return pools;
}

void write_csv_header(std::ostream& os, const std::vector<Pool*>& pools) {
    os << "run_id,seed,variant,epoch,step,train_loss,train_err_pct,test_err_pct";
    for (std::size_t li = 0; li < pools.size(); ++li) {
        for (std::size_t ki = 1; ki <= pools[li]->config().K; ++ki) {
            os << ",w_l" << (li + 1) << "_k" << ki;
        }
    }
    os << "\n";
}

void write_csv_row(std::ostream& os, const std::string& run_id, std::uint64_t seed,
                   const std::string& variant, const EpochStat& st) {
    os << run_id << "," << seed << "," << variant << "," << st.epoch << "," << st.step << ","
       << fmt(st.train_loss) << "," << fmt(st.train_err_pct) << "," << fmt(st.test_err_pct);
    for (const auto& wv : st.mean_weights) {
        for (double w : wv) os << "," << fmt(w);
    }
    os << "\n";
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, LayerGraph& graph,
                  const Dataset& train_ds, const Dataset& test_ds,
                  std::ostream* csv, const std::string& variant, std::uint64_t seed,
                  bool write_header) {
    cfg.validate();
    std::vector<ParamRef> params = graph.params();
    std::vector<ParamRef> base_params, pool_params;
    for (const ParamRef& p : params) {
        if (p.name.find("pool.sorted") != std::string::npos) pool_params.push_back(p);
        else base_params.push_back(p);
    }
    SgdState opt(cfg.learning_rate, cfg.momentum);
    double pool_lr = cfg.pool_learning_rate > 0.0 ? cfg.pool_learning_rate : cfg.learning_rate;
    SgdState pool_opt(pool_lr, cfg.momentum);

    std::vector<Pool*> pools = sorted_pools(graph);
    std::string run_id = variant + "_s" + std::to_string(seed);
    if (csv && write_header) write_csv_header(*csv, pools);

    BatchPlan plan{seed, cfg.batch_size};
    std::size_t bs = std::min(cfg.batch_size, train_ds.size());
    plan.batch_size = bs;

    std::vector<std::size_t> train_eval_pos(std::min(cfg.train_eval_cap, train_ds.size()));
    std::iota(train_eval_pos.begin(), train_eval_pos.end(), 0);
    Dataset train_eval = train_ds.subset(train_eval_pos);

    TrainResult result;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> perm = epoch_permutation(plan, epoch, train_ds.size());
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t start = 0; start < train_ds.size(); start += bs) {
            std::size_t len = std::min(bs, train_ds.size() - start);
            Batch batch = make_batch(train_ds, perm, start, len);
            Tensor logits = graph.forward(batch.images);
            LossResult lr = softmax_cross_entropy(logits, batch.labels);
            ++step;
            if (!std::isfinite(lr.loss)) {
                std::string where = "epoch " + std::to_string(epoch + 1) + " step " + std::to_string(step);
                for (const ParamRef& p : params) {
                    if (!p.value->all_finite()) {
                        where += " (non-finite parameter: " + p.name + ")";
                        break;
                    }
                }
                throw Error("training aborted: non-finite loss at " + where);
            }
            loss_sum += lr.loss * static_cast<double>(len);
            loss_count += len;
            graph.backward(lr.grad_logits);
            if (cfg.weight_decay > 0.0) {
                for (const ParamRef& p : base_params) {
                    for (std::size_t j = 0; j < p.value->size(); ++j) {
                        (*p.grad)[j] += cfg.weight_decay * (*p.value)[j];
                    }
                }
            }
            opt.step(base_params);
            if (!pool_params.empty()) pool_opt.step(pool_params);
        }

        EpochStat st;
        st.epoch = epoch + 1;
        st.step = step;
        st.train_loss = loss_sum / static_cast<double>(loss_count);
        st.train_err_pct = evaluate_error_pct(graph, train_eval, bs);
        st.test_err_pct = evaluate_error_pct(graph, test_ds, bs);
        for (Pool* p : pools) st.mean_weights.push_back(p->mean_normalized_weights());
        if (csv) {
            write_csv_row(*csv, run_id, seed, variant, st);
            csv->flush();
        }
        result.epochs.push_back(std::move(st));
    }
    if (!result.epochs.empty()) result.final_test_err_pct = result.epochs.back().test_err_pct;
    return result;
}

std::vector<SweepRun> sweep(const ExperimentConfig& cfg,
                            const std::vector<SweepVariant>& variants,
                            std::ostream* csv) {
    if (variants.size() < 2) throw Error("sweep: need at least two variants");
    auto [train_ds, test_ds] = load_datasets(cfg);
    std::vector<SweepRun> runs;
    bool header_written = false;
    for (std::size_t rep = 0; rep < cfg.replicates; ++rep) {
        std::uint64_t seed = cfg.seed + rep;
        for (const SweepVariant& v : variants) {
            ExperimentConfig vcfg = cfg;
            vcfg.mode = v.mode;
            vcfg.k = v.k;
            vcfg.K = v.K;
            vcfg.seed = seed;
            LayerGraph graph = build_network(vcfg, train_ds.images.extent(2),
                                             train_ds.images.extent(3));
            TrainResult res = train(vcfg, graph, train_ds, test_ds, csv, v.name, seed,
                                    csv && !header_written);
            if (csv) header_written = true;
            runs.push_back(SweepRun{v.name, seed, std::move(res)});
        }
    }
    return runs;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x53504B31;  // "SPK1"
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v, const std::string& path) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw Error("truncated checkpoint " + path);
}

}  // namespace

void save_checkpoint(LayerGraph& graph, const std::string& path, std::uint64_t cfg_hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write checkpoint " + path);
    std::vector<ParamRef> params = graph.params();
    write_pod(os, kCheckpointMagic);
    write_pod(os, kCheckpointVersion);
    write_pod(os, cfg_hash);
    write_pod(os, static_cast<std::uint32_t>(params.size()));
    for (const ParamRef& p : params) {
        auto nlen = static_cast<std::uint32_t>(p.name.size());
        write_pod(os, nlen);
        os.write(p.name.data(), nlen);
        write_pod(os, static_cast<std::uint32_t>(p.value->ndim()));
        for (std::size_t e : p.value->shape()) write_pod(os, static_cast<std::uint64_t>(e));
        os.write(reinterpret_cast<const char*>(p.value->data()),
                 static_cast<std::streamsize>(p.value->size() * sizeof(double)));
    }
}

void load_checkpoint(LayerGraph& graph, const std::string& path, std::uint64_t cfg_hash) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint " + path);
    std::uint32_t magic = 0, version = 0, count = 0;
    std::uint64_t hash = 0;
    read_pod(is, magic, path);
    if (magic != kCheckpointMagic) throw Error("not a checkpoint file: " + path);
    read_pod(is, version, path);
    if (version != kCheckpointVersion) {
        throw Error("unsupported checkpoint version " + std::to_string(version) + " in " + path);
    }
    read_pod(is, hash, path);
    if (hash != cfg_hash) {
        throw Error("checkpoint " + path + " was written for a different architecture");
    }
    read_pod(is, count, path);
    std::vector<ParamRef> params = graph.params();
    if (count != params.size()) {
        throw Error("checkpoint " + path + " has " + std::to_string(count) +
                    " parameters, network has " + std::to_string(params.size()));
    }
    for (ParamRef& p : params) {
        std::uint32_t nlen = 0;
        read_pod(is, nlen, path);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        if (!is || name != p.name) {
            throw Error("checkpoint " + path + ": parameter order mismatch at " + p.name);
        }
        std::uint32_t ndim = 0;
        read_pod(is, ndim, path);
        std::vector<std::size_t> shape(ndim);
        for (std::uint32_t d = 0; d < ndim; ++d) {
            std::uint64_t e = 0;
            read_pod(is, e, path);
            shape[d] = static_cast<std::size_t>(e);
        }
        if (shape != p.value->shape()) {
            throw Error("checkpoint " + path + ": shape mismatch for " + p.name);
        }
        is.read(reinterpret_cast<char*>(p.value->data()),
                static_cast<std::streamsize>(p.value->size() * sizeof(double)));
        if (!is) throw Error("truncated checkpoint " + path);
    }
}

namespace {

struct Episode {
    std::vector<std::size_t> supports;  // one index per way
    std::size_t query = 0;
    std::size_t query_class = 0;
};

std::vector<Episode> sample_episodes(const Dataset& heldout, std::size_t ways,
                                     std::size_t episodes, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> by_class(ways);
    for (std::size_t i = 0; i < heldout.size(); ++i) {
        if (heldout.labels[i] >= ways) {
            throw Error("episodic_eval: label " + std::to_string(heldout.labels[i]) +
                        " outside 0.." + std::to_string(ways - 1));
        }
        by_class[heldout.labels[i]].push_back(i);
    }
    for (std::size_t c = 0; c < ways; ++c) {
        if (by_class[c].size() < 2) {
            throw Error("episodic_eval: class " + std::to_string(c) + " has fewer than 2 samples");
        }
    }
    SplitMix64 rng(seed);
    std::vector<Episode> eps(episodes);
    for (Episode& ep : eps) {
        ep.supports.resize(ways);
        for (std::size_t c = 0; c < ways; ++c) {
            ep.supports[c] = by_class[c][rng.next_below(by_class[c].size())];
        }
        ep.query_class = static_cast<std::size_t>(rng.next_below(ways));
        const auto& pool = by_class[ep.query_class];
        do {
            ep.query = pool[rng.next_below(pool.size())];
        } while (ep.query == ep.supports[ep.query_class]);
    }
    return eps;
}

// Flatten-layer activations for every sample, row per sample.
Tensor embed_all(LayerGraph& graph, const Dataset& ds, std::size_t batch_size = 64) {
    std::size_t flatten_end = 0;
    for (std::size_t i = 0; i < graph.layers(); ++i) {
        if (graph.layer(i).name() == "flatten") flatten_end = i + 1;
    }
    if (flatten_end == 0) throw Error("episodic_eval: network has no flatten layer");
    Tensor all;
    std::size_t dim = 0;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        std::size_t len = std::min(batch_size, ds.size() - start);
        std::vector<std::size_t> pos(len);
        std::iota(pos.begin(), pos.end(), start);
        Dataset sub = ds.subset(pos);
        Tensor emb = graph.forward_until(sub.images, flatten_end);
        if (start == 0) {
            dim = emb.extent(1);
            all = Tensor::zeros({ds.size(), dim});
        }
        std::copy(emb.data(), emb.data() + len * dim, all.data() + start * dim);
    }
    return all;
}

double cosine(const double* a, const double* b, std::size_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0.0 ? dot / denom : 0.0;
}

EpisodicResult score_episodes(const Tensor& embeddings, const std::vector<Episode>& eps,
                              std::size_t ways) {
    std::size_t dim = embeddings.extent(1);
    std::size_t correct = 0;
    for (const Episode& ep : eps) {
        const double* q = embeddings.data() + ep.query * dim;
        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t c = 0; c < ways; ++c) {
            double sim = cosine(q, embeddings.data() + ep.supports[c] * dim, dim);
            if (sim > best_sim) {
                best_sim = sim;
                best = c;
            }
        }
        if (best == ep.query_class) ++correct;
    }
    EpisodicResult res;
    res.episodes = eps.size();
    res.accuracy = static_cast<double>(correct) / static_cast<double>(eps.size());
    res.std_error = std::sqrt(res.accuracy * (1.0 - res.accuracy) /
                              static_cast<double>(eps.size()));
    return res;
}

}  // namespace

EpisodicResult episodic_eval(LayerGraph& graph, const Dataset& heldout,
                             std::size_t ways, std::size_t episodes, std::uint64_t seed) {
    std::vector<Episode> eps = sample_episodes(heldout, ways, episodes, seed);
    Tensor emb = embed_all(graph, heldout);
    return score_episodes(emb, eps, ways);
}

std::pair<EpisodicResult, EpisodicResult> episodic_eval_paired(
    LayerGraph& a, LayerGraph& b, const Dataset& heldout,
    std::size_t ways, std::size_t episodes, std::uint64_t seed) {
    std::vector<Episode> eps = sample_episodes(heldout, ways, episodes, seed);
    Tensor ea = embed_all(a, heldout);
    Tensor eb = embed_all(b, heldout);
    return {score_episodes(ea, eps, ways), score_episodes(eb, eps, ways)};
}

}  // namespace sortpool
