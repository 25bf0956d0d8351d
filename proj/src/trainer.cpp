#include "bundlecodec/trainer.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace bundlecodec::train {

using namespace bundlecodec;
using codec::BottleneckKind;
using codec::Model;
using diff::Rng;
using diff::Tape;
using diff::Tensor;

codec::Hyper TrainConfig::hyper() const {
    codec::Hyper hp;
    hp.beta_temp = beta_temp;
    hp.sigma_codebook = sigma_codebook;
    hp.lambda_kl = lambda_kl;
    hp.commitment = commitment;
    hp.ema_decay = ema_decay;
    hp.ema_eps = ema_eps;
    return hp;
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["arch"] = codec::kind_name(arch);
    j["iterations"] = iterations;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["seed"] = seed;
    j["beta_temp"] = beta_temp;
    j["sigma_codebook"] = sigma_codebook;
    j["lambda_kl"] = lambda_kl;
    j["commitment"] = commitment;
    j["ema_decay"] = ema_decay;
    j["ema_eps"] = ema_eps;
    j["d"] = d;
    j["k"] = k;
    j["checkpoint_path"] = checkpoint_path;
    j["log_path"] = log_path;
    j["eval_every"] = eval_every;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TrainConfig c;
    if (j.contains("arch")) c.arch = codec::kind_from_name(j["arch"].get<std::string>());
    if (j.contains("iterations")) c.iterations = j["iterations"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("beta_temp")) c.beta_temp = j["beta_temp"].get<double>();
    if (j.contains("sigma_codebook")) c.sigma_codebook = j["sigma_codebook"].get<double>();
    if (j.contains("lambda_kl")) c.lambda_kl = j["lambda_kl"].get<double>();
    if (j.contains("commitment")) c.commitment = j["commitment"].get<double>();
    if (j.contains("ema_decay")) c.ema_decay = j["ema_decay"].get<double>();
    if (j.contains("ema_eps")) c.ema_eps = j["ema_eps"].get<double>();
    if (j.contains("d")) c.d = j["d"].get<int>();
    if (j.contains("k")) c.k = j["k"].get<int>();
    if (j.contains("checkpoint_path")) c.checkpoint_path = j["checkpoint_path"].get<std::string>();
    if (j.contains("log_path")) c.log_path = j["log_path"].get<std::string>();
    if (j.contains("eval_every")) c.eval_every = j["eval_every"].get<int>();
    return c;
}

// ---------------------------------------------------------------------------
// BNC1 checkpoints

namespace {
constexpr std::uint32_t kBncVersion = 1;
}

void write_checkpoint(const Checkpoint& ck, const std::string& path) {
    io::Writer w;
    w.magic("BNC1");
    w.u32(kBncVersion);
    w.str(ck.config.to_json());
    w.u32(static_cast<std::uint32_t>(ck.model.kind));
    w.u32(static_cast<std::uint32_t>(ck.model.points));
    w.u32(static_cast<std::uint32_t>(ck.model.latent_dim));
    w.u32(static_cast<std::uint32_t>(ck.model.codebook_size));
    w.u32(static_cast<std::uint32_t>(ck.model.channels));
    w.u64(ck.completed);
    w.u64(ck.rng_state);
    w.u64(ck.adam.t);
    w.f64(ck.adam.lr);
    w.f64(ck.adam.b1);
    w.f64(ck.adam.b2);
    w.f64(ck.adam.eps);

    Checkpoint& mut = const_cast<Checkpoint&>(ck);
    auto state = mut.model.named_state();
    w.u32(static_cast<std::uint32_t>(state.size()));
    for (auto& [name, t] : state) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) w.u32(static_cast<std::uint32_t>(t.dim(i)));
        w.f64_array(t.data(), t.size());
    }

    auto params = mut.model.named_parameters();
    w.u32(static_cast<std::uint32_t>(ck.adam.m.size()));
    if (!ck.adam.m.empty() && ck.adam.m.size() != params.size())
        throw std::logic_error("checkpoint: optimizer moments misaligned with parameters");
    for (std::size_t i = 0; i < ck.adam.m.size(); ++i) {
        w.f64_array(ck.adam.m[i].data(), ck.adam.m[i].size());
        w.f64_array(ck.adam.v[i].data(), ck.adam.v[i].size());
    }
    w.save(path);
}

Checkpoint read_checkpoint(const std::string& path) {
    io::Reader r = io::Reader::from_file(path);
    r.expect_magic("BNC1", "BNC1");
    const std::uint32_t version = r.u32();
    if (version != kBncVersion)
        throw std::runtime_error("checkpoint: " + path + ": unsupported BNC1 version " +
                                 std::to_string(version));
    Checkpoint ck;
    ck.config = TrainConfig::from_json(r.str());
    const auto kind = static_cast<BottleneckKind>(r.u32());
    const int points = static_cast<int>(r.u32());
    const int d = static_cast<int>(r.u32());
    const int k = static_cast<int>(r.u32());
    const int channels = static_cast<int>(r.u32());
    ck.completed = r.u64();
    ck.rng_state = r.u64();
    ck.adam.t = r.u64();
    ck.adam.lr = r.f64();
    ck.adam.b1 = r.f64();
    ck.adam.b2 = r.f64();
    ck.adam.eps = r.f64();

    if (kind != ck.config.arch)
        throw std::runtime_error("checkpoint: " + path + ": architecture field disagrees with config echo");
    if (points < 4 || points % 4 != 0 || d < 1 || k < 2 || channels < 1)
        throw std::runtime_error("checkpoint: " + path + ": implausible model dimensions");

    Rng dummy(0);
    ck.model = codec::make_model(kind, points, d, k, ck.config.hyper(), dummy);

    const std::uint32_t count = r.u32();
    auto state = ck.model.named_state();
    if (count != state.size())
        throw std::runtime_error("checkpoint: " + path + ": expected " +
                                 std::to_string(state.size()) + " tensors, file has " +
                                 std::to_string(count));
    for (auto& [name, t] : state) {
        const std::string fname = r.str();
        if (fname != name)
            throw std::runtime_error("checkpoint: " + path + ": tensor '" + fname +
                                     "' where '" + name + "' expected");
        const std::uint32_t nd = r.u32();
        if (nd != static_cast<std::uint32_t>(t.ndim()))
            throw std::runtime_error("checkpoint: " + path + ": rank mismatch for " + name);
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < nd; ++i) {
            const std::uint32_t dim = r.u32();
            if (dim != static_cast<std::uint32_t>(t.dim(static_cast<int>(i))))
                throw std::runtime_error("checkpoint: " + path + ": shape mismatch for " + name);
            numel *= dim;
        }
        r.f64_array(t.data(), numel);
    }

    const std::uint32_t moments = r.u32();
    auto params = ck.model.named_parameters();
    if (moments != 0 && moments != params.size())
        throw std::runtime_error("checkpoint: " + path + ": moment count mismatch");
    for (std::uint32_t i = 0; i < moments; ++i) {
        const std::size_t n = params[i].second.size();
        ck.adam.m.emplace_back(n, 0.0);
        ck.adam.v.emplace_back(n, 0.0);
        r.f64_array(ck.adam.m.back().data(), n);
        r.f64_array(ck.adam.v.back().data(), n);
    }
    if (!r.at_end())
        throw std::runtime_error("checkpoint: " + path + ": " + std::to_string(r.remaining()) +
                                 " trailing bytes");
    return ck;
}

// ---------------------------------------------------------------------------
// training loop

namespace {

void check_dataset(const TrainConfig& cfg, const curves::Dataset& ds) {
    if (ds.bundles.empty()) throw std::invalid_argument("trainer: empty training set");
    for (const auto& b : ds.bundles) {
        if (b.size() != static_cast<int>(ds.group_size) ||
            b.points() != static_cast<int>(ds.point_count))
            throw std::invalid_argument("trainer: bundle '" + b.provenance +
                                        "' does not match dataset group/point counts");
    }
    if (cfg.iterations < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("trainer: iterations and batch_size must be >= 1");
}

Tensor build_batch(const curves::Dataset& ds, const std::vector<std::size_t>& picks) {
    const int S = static_cast<int>(ds.group_size), P = static_cast<int>(ds.point_count);
    const int B = static_cast<int>(picks.size());
    Tensor x = Tensor::zeros({B * S, 3, P});
    double* px = x.data();
    for (int b = 0; b < B; ++b) {
        const curves::Bundle& bundle = ds.bundles[picks[static_cast<std::size_t>(b)]];
        for (int s = 0; s < S; ++s)
            for (int p = 0; p < P; ++p)
                for (int c = 0; c < 3; ++c)
                    px[((static_cast<std::size_t>(b) * S + s) * 3 + c) * P + p] =
                        bundle.lines[s].pts[p][c];
    }
    return x;
}

TrainResult run_loop(Checkpoint ck, const curves::Dataset& ds) {
    const TrainConfig& cfg = ck.config;
    check_dataset(cfg, ds);
    if (ck.model.points != static_cast<int>(ds.point_count))
        throw std::invalid_argument("trainer: model expects P=" + std::to_string(ck.model.points) +
                                    ", dataset has " + std::to_string(ds.point_count));

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        const bool fresh = ck.completed == 0;
        log.open(cfg.log_path, fresh ? std::ios::trunc : std::ios::app);
        if (!log) throw std::runtime_error("trainer: cannot open log " + cfg.log_path);
        if (fresh) {
            log << "# config: " << cfg.to_json() << "\n";
            log << "iteration,loss,wall_ms\n";
        }
    }

    Rng loop_rng(0);
    loop_rng.set_state(ck.rng_state);

    auto params_named = ck.model.named_parameters();
    std::vector<Tensor> params;
    for (auto& [name, t] : params_named) params.push_back(t);
    if (!ck.adam.initialized()) ck.adam.init(params);

    TrainResult result;
    double last_finite = std::nan("");

    for (std::uint64_t iter = ck.completed; iter < static_cast<std::uint64_t>(cfg.iterations);
         ++iter) {
        const auto t0 = std::chrono::steady_clock::now();

        std::vector<std::size_t> picks(static_cast<std::size_t>(cfg.batch_size));
        for (auto& p : picks) p = loop_rng.below(ds.bundles.size());
        Tensor x = build_batch(ds, picks);

        Tape tape;
        codec::Forward fwd = codec::model_forward(tape, ck.model, x, codec::Mode::Train, &loop_rng);
        Tensor loss = codec::model_loss(tape, ck.model, fwd, x);
        const double loss_v = loss.value();
        if (!std::isfinite(loss_v))
            throw std::runtime_error("trainer: non-finite loss at iteration " +
                                     std::to_string(iter + 1) + "; last finite loss " +
                                     std::to_string(last_finite));
        last_finite = loss_v;

        for (Tensor& p : params) p.zero_grad();
        tape.backward(loss);
        diff::adam_step(params, ck.adam);

        if (ck.model.kind == BottleneckKind::VQEMA)
            codec::vqema_update(fwd.z, fwd.bn.assignments, ck.model.codebook, ck.model.ema_counts,
                                ck.model.ema_sums, cfg.ema_decay, cfg.ema_eps);

        const double mse_v = ck.model.kind == BottleneckKind::AE ||
                                     ck.model.kind == BottleneckKind::VQDIFF
                                 ? loss_v
                                 : [&] {
                                       Tape t2(false);
                                       return diff::mse_loss(t2, fwd.recon, x).value();
                                   }();
        result.losses.push_back(loss_v);
        result.recon_mse.push_back(mse_v);

        ck.completed = iter + 1;
        ck.rng_state = loop_rng.state();

        const auto t1 = std::chrono::steady_clock::now();
        if (log) {
            log << (iter + 1) << ',' << loss_v << ','
                << std::chrono::duration<double, std::milli>(t1 - t0).count() << "\n";
            if ((iter + 1) % 25 == 0) log.flush();
        }

        const bool at_end = ck.completed == static_cast<std::uint64_t>(cfg.iterations);
        if (!cfg.checkpoint_path.empty() &&
            (at_end || (cfg.eval_every > 0 &&
                        ck.completed % static_cast<std::uint64_t>(cfg.eval_every) == 0)))
            write_checkpoint(ck, cfg.checkpoint_path);
    }

    result.checkpoint = std::move(ck);
    return result;
}

} // namespace

TrainResult train_run(const TrainConfig& config, const curves::Dataset& trainset) {
    Checkpoint ck;
    ck.config = config;
    Rng master(config.seed);
    Rng init_rng = master.fork(0);
    ck.model = codec::make_model(config.arch, static_cast<int>(trainset.point_count), config.d,
                                 config.k, config.hyper(), init_rng);
    ck.adam.lr = config.learning_rate;
    Rng loop = master.fork(1);
    ck.rng_state = loop.state();
    ck.completed = 0;
    return run_loop(std::move(ck), trainset);
}

TrainResult train_continue(Checkpoint ck, const curves::Dataset& trainset) {
    return run_loop(std::move(ck), trainset);
}

EvalResult evaluate_split(Checkpoint& ck, const curves::Dataset& split,
                          const metrics::BuanConfig& cfg) {
    if (split.bundles.empty()) throw std::invalid_argument("evaluate_split: empty split");
    if (ck.model.points != static_cast<int>(split.point_count))
        throw std::invalid_argument("evaluate_split: model/dataset point count mismatch");

    EvalResult out;
    auto recon_fn = [&](const curves::Bundle& b) { return codec::reconstruct(ck.model, b); };
    out.report = metrics::recon_report(recon_fn, split.bundles, split.label_names, cfg);

    double mse_sum = 0.0;
    const bool vq = ck.model.kind == BottleneckKind::VQVAE ||
                    ck.model.kind == BottleneckKind::VQEMA ||
                    ck.model.kind == BottleneckKind::VQDIFF;
    std::vector<double> util(vq ? static_cast<std::size_t>(ck.model.codebook_size) : 0, 0.0);
    std::size_t streamlines = 0;
    for (const curves::Bundle& b : split.bundles) {
        Tape tape(false);
        Tensor x = codec::bundle_to_tensor(b);
        codec::Forward f = codec::model_forward(tape, ck.model, x, codec::Mode::Eval, nullptr);
        mse_sum += diff::mse_loss(tape, f.recon, x).value();
        if (ck.model.kind == BottleneckKind::VQDIFF) {
            const int S = f.bn.weights.dim(0), k = f.bn.weights.dim(1);
            for (int s = 0; s < S; ++s)
                for (int i = 0; i < k; ++i) util[static_cast<std::size_t>(i)] += f.bn.weights.at(s * k + i);
            streamlines += static_cast<std::size_t>(S);
        } else if (vq) {
            for (int idx : f.bn.assignments) util[static_cast<std::size_t>(idx)] += 1.0;
            streamlines += f.bn.assignments.size();
        }
    }
    out.mean_loss = mse_sum / static_cast<double>(split.bundles.size());
    if (vq && streamlines)
        for (double& u : util) u /= static_cast<double>(streamlines);
    out.codebook_utilization = std::move(util);
    return out;
}

io::LatentFile export_latents(Checkpoint& ck, const curves::Dataset& ds) {
    io::LatentFile lf;
    lf.model_tag = codec::kind_name(ck.model.kind);
    lf.group_size = ds.group_size;
    lf.dim = static_cast<std::uint32_t>(ck.model.latent_dim);
    const bool vq = ck.model.kind == BottleneckKind::VQVAE ||
                    ck.model.kind == BottleneckKind::VQEMA ||
                    ck.model.kind == BottleneckKind::VQDIFF;
    for (const curves::Bundle& b : ds.bundles) {
        Tape tape(false);
        Tensor x = codec::bundle_to_tensor(b);
        codec::Forward f = codec::model_forward(tape, ck.model, x, codec::Mode::Eval, nullptr);
        io::LatentRecord rec;
        rec.label = b.label;
        rec.provenance = b.provenance;
        rec.group_size = ds.group_size;
        rec.dim = lf.dim;
        rec.z.assign(f.z.data(), f.z.data() + f.z.size());
        if (vq) {
            rec.has_quantized = true;
            rec.s.assign(f.bn.quantized.data(), f.bn.quantized.data() + f.bn.quantized.size());
        }
        lf.records.push_back(std::move(rec));
    }
    return lf;
}

} // namespace bundlecodec::train
