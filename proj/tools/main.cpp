#include <CLI11.hpp>
#include <json.hpp>

#include "bundlecodec/analysis.hpp"
#include "bundlecodec/dataio.hpp"
#include "bundlecodec/klcheck.hpp"
#include "bundlecodec/probe.hpp"
#include "bundlecodec/trainer.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace bundlecodec;

namespace {

void write_run_record(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cli: cannot write run record " + path);
    f << j.dump(2) << "\n";
}

std::string read_text(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cli: cannot open " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

curves::Dataset load_bnd(const std::string& path) {
    curves::Dataset ds = io::read_bnd(path);
    std::printf("loaded %zu bundles (S=%u, P=%u, %zu classes) from %s\n", ds.bundles.size(),
                ds.group_size, ds.point_count, ds.label_names.size(), path.c_str());
    return ds;
}

struct SynthArgs {
    int families = 4, per_family = 50, group_size = 64, points = 64;
    double noise = 0.5;
    std::uint64_t seed = 0;
    std::string out;
};

struct ImportArgs {
    std::vector<std::string> trk_files;
    std::uint32_t label_id = 0;
    std::string label_name = "imported";
    int points = 64, group_size = 64;
    std::uint64_t seed = 0;
    std::string out;
};

struct PrepArgs {
    std::vector<std::string> inputs;
    double train_fraction = 0.9;
    bool no_balance = false;
    std::uint64_t seed = 0;
    std::string out;
};

struct TrainArgs {
    std::string arch, config_path, data, out, log, resume;
    train::TrainConfig cfg;
    CLI::App* cmd = nullptr;
};

struct EvalArgs {
    std::string ckpt, data, out;
    double theta = 0.05;
    std::uint64_t seed = 0;
};

struct LatentArgs {
    std::string ckpt, data, out;
    std::uint64_t seed = 0;
};

struct PerturbArgs {
    std::string ckpt, data, out_dir;
    int bundle_index = 0;
    std::vector<double> eps = {0.0, 0.1, 0.25, 0.5, 1.0};
    int trials = 10;
    std::uint64_t seed = 0;
    double theta = 0.05;
};

struct ProjectArgs {
    std::string latents, out_dir;
    std::uint64_t seed = 0;
};

struct KlArgs {
    double sigma = 2.0, beta = 10.0;
    std::int64_t mc_n = 1000000;
    std::uint64_t seed = 0;
};

struct GradArgs {
    std::uint64_t seed = 0;
    int streamlines = 2, points = 8, d = 4, k = 4;
    std::size_t max_coords = 256;
};

int run_synth(const SynthArgs& a) {
    curves::Dataset ds =
        curves::synth_dataset(a.families, a.per_family, a.group_size, a.points, a.noise, a.seed);
    io::write_bnd(ds, a.out);
    nlohmann::json j{{"command", "synth"},         {"families", a.families},
                     {"bundles_per_family", a.per_family}, {"group_size", a.group_size},
                     {"points", a.points},         {"noise", a.noise},
                     {"seed", a.seed},             {"out", a.out}};
    write_run_record(a.out + ".run.json", j);
    std::printf("wrote %zu bundles to %s\n", ds.bundles.size(), a.out.c_str());
    std::printf("config: %s\n", j.dump().c_str());
    return 0;
}

int run_import(const ImportArgs& a) {
    diff::Rng rng(a.seed);
    curves::Dataset ds;
    ds.group_size = static_cast<std::uint32_t>(a.group_size);
    ds.point_count = static_cast<std::uint32_t>(a.points);
    ds.label_names[a.label_id] = a.label_name;
    std::size_t total_tracks = 0;
    for (std::size_t fi = 0; fi < a.trk_files.size(); ++fi) {
        auto tracks = io::import_trackvis(a.trk_files[fi]);
        total_tracks += tracks.size();
        std::vector<curves::Streamline> lines;
        lines.reserve(tracks.size());
        for (auto& [line, prov] : tracks) lines.push_back(curves::resample_arclength(line, a.points));
        diff::Rng sub = rng.fork(fi);
        auto groups = curves::make_groups(std::move(lines), a.label_id, a.trk_files[fi],
                                          a.group_size, sub);
        for (auto& g : groups) ds.bundles.push_back(std::move(g));
    }
    io::write_bnd(ds, a.out);
    nlohmann::json j{{"command", "import"}, {"trk", a.trk_files},   {"label_id", a.label_id},
                     {"label_name", a.label_name}, {"points", a.points}, {"group_size", a.group_size},
                     {"seed", a.seed},      {"out", a.out}};
    write_run_record(a.out + ".run.json", j);
    std::printf("imported %zu tracks into %zu bundles -> %s\n", total_tracks, ds.bundles.size(),
                a.out.c_str());
    return 0;
}

int run_prep(const PrepArgs& a) {
    curves::Dataset merged;
    bool first = true;
    for (const std::string& path : a.inputs) {
        curves::Dataset ds = load_bnd(path);
        if (first) {
            merged.group_size = ds.group_size;
            merged.point_count = ds.point_count;
            first = false;
        } else if (merged.group_size != ds.group_size || merged.point_count != ds.point_count) {
            throw std::runtime_error("prep: " + path + " group/point counts disagree with earlier inputs");
        }
        for (auto& [id, name] : ds.label_names) {
            auto it = merged.label_names.find(id);
            if (it != merged.label_names.end() && it->second != name)
                throw std::runtime_error("prep: label id " + std::to_string(id) +
                                         " maps to both '" + it->second + "' and '" + name + "'");
            merged.label_names[id] = name;
        }
        for (auto& b : ds.bundles) merged.bundles.push_back(std::move(b));
    }

    io::SplitSpec spec;
    spec.train_fraction = a.train_fraction;
    spec.seed = a.seed;
    spec.balance = !a.no_balance;
    io::Split split = io::balance_and_split(merged.bundles, spec);
    curves::NormStats st = curves::normalize_splits(split.train, split.val);

    curves::Dataset train_ds, val_ds;
    train_ds.group_size = val_ds.group_size = merged.group_size;
    train_ds.point_count = val_ds.point_count = merged.point_count;
    train_ds.label_names = val_ds.label_names = merged.label_names;
    train_ds.bundles = std::move(split.train);
    val_ds.bundles = std::move(split.val);
    io::write_bnd(train_ds, a.out + ".train.bnd");
    io::write_bnd(val_ds, a.out + ".val.bnd");

    nlohmann::json stats{{"centroid", {st.centroid[0], st.centroid[1], st.centroid[2]}},
                         {"scale", st.scale}};
    write_run_record(a.out + ".norm.json", stats);
    nlohmann::json j{{"command", "prep"},
                     {"in", a.inputs},
                     {"train_fraction", a.train_fraction},
                     {"balance", !a.no_balance},
                     {"seed", a.seed},
                     {"out", a.out}};
    write_run_record(a.out + ".run.json", j);
    std::printf("train %zu / val %zu bundles; norm centroid (%g, %g, %g) scale %g\n",
                train_ds.bundles.size(), val_ds.bundles.size(), st.centroid[0], st.centroid[1],
                st.centroid[2], st.scale);
    return 0;
}

int run_train(TrainArgs& a) {
    if (a.config_path.empty() && a.resume.empty() && a.cmd->count("--arch") == 0) {
        std::fprintf(stderr, "train: provide --arch, --config or --resume\n");
        return 1;
    }
    train::TrainConfig cfg;
    if (!a.config_path.empty()) cfg = train::TrainConfig::from_json(read_text(a.config_path));
    // flags win over the config file
    auto set_if = [&](const char* flag, auto setter) {
        if (a.cmd->count(flag)) setter();
    };
    set_if("--arch", [&] { cfg.arch = codec::kind_from_name(a.arch); });
    set_if("--iterations", [&] { cfg.iterations = a.cfg.iterations; });
    set_if("--batch-size", [&] { cfg.batch_size = a.cfg.batch_size; });
    set_if("--lr", [&] { cfg.learning_rate = a.cfg.learning_rate; });
    set_if("--seed", [&] { cfg.seed = a.cfg.seed; });
    set_if("--beta-temp", [&] { cfg.beta_temp = a.cfg.beta_temp; });
    set_if("--sigma-codebook", [&] { cfg.sigma_codebook = a.cfg.sigma_codebook; });
    set_if("--lambda-kl", [&] { cfg.lambda_kl = a.cfg.lambda_kl; });
    set_if("--commitment", [&] { cfg.commitment = a.cfg.commitment; });
    set_if("--d", [&] { cfg.d = a.cfg.d; });
    set_if("--k", [&] { cfg.k = a.cfg.k; });
    set_if("--eval-every", [&] { cfg.eval_every = a.cfg.eval_every; });
    cfg.checkpoint_path = a.out;
    if (!a.log.empty()) cfg.log_path = a.log;

    curves::Dataset ds = load_bnd(a.data);
    std::printf("config: %s\n", cfg.to_json().c_str());

    train::TrainResult res;
    if (!a.resume.empty()) {
        train::Checkpoint ck = train::read_checkpoint(a.resume);
        ck.config.iterations = cfg.iterations;
        ck.config.checkpoint_path = cfg.checkpoint_path;
        if (!a.log.empty()) ck.config.log_path = cfg.log_path;
        std::printf("resuming from %s at iteration %llu\n", a.resume.c_str(),
                    static_cast<unsigned long long>(ck.completed));
        res = train::train_continue(std::move(ck), ds);
    } else {
        res = train::train_run(cfg, ds);
    }
    if (res.checkpoint.config.checkpoint_path.empty())
        train::write_checkpoint(res.checkpoint, a.out);
    std::printf("trained %s for %llu iterations, final loss %.6g -> %s\n",
                codec::kind_name(res.checkpoint.model.kind),
                static_cast<unsigned long long>(res.checkpoint.completed),
                res.losses.empty() ? 0.0 : res.losses.back(), a.out.c_str());
    return 0;
}

int run_eval(const EvalArgs& a) {
    train::Checkpoint ck = train::read_checkpoint(a.ckpt);
    curves::Dataset ds = load_bnd(a.data);
    metrics::BuanConfig bc;
    bc.theta = a.theta;
    train::EvalResult res = train::evaluate_split(ck, ds, bc);
    std::printf("%s", metrics::format_table(res.report).c_str());
    std::printf("overall mean BUAN %.4f, mean reconstruction MSE %.6g\n",
                res.report.overall_mean_buan(), res.mean_loss);
    if (!res.codebook_utilization.empty()) {
        double mn = 1e300;
        for (double u : res.codebook_utilization) mn = std::min(mn, u);
        const double floor = 1.0 / (10.0 * static_cast<double>(res.codebook_utilization.size()));
        std::printf("codebook utilization: min %.3g over %zu entries (soft floor %.3g): %s\n", mn,
                    res.codebook_utilization.size(), floor,
                    mn > floor ? "all entries in use" : "some entries underused");
    }
    if (!a.out.empty()) {
        metrics::write_csv(res.report, a.out);
        std::printf("report written to %s\n", a.out.c_str());
    }
    return 0;
}

int run_latents(const LatentArgs& a) {
    train::Checkpoint ck = train::read_checkpoint(a.ckpt);
    curves::Dataset ds = load_bnd(a.data);
    io::LatentFile lf = train::export_latents(ck, ds);
    io::write_latents(lf, a.out);
    nlohmann::json j{{"command", "latents"}, {"ckpt", a.ckpt}, {"data", a.data}, {"out", a.out},
                     {"model", lf.model_tag}, {"records", lf.records.size()}};
    write_run_record(a.out + ".run.json", j);
    std::printf("wrote %zu latent records (d=%u) to %s\n", lf.records.size(), lf.dim,
                a.out.c_str());
    return 0;
}

int run_perturb(const PerturbArgs& a) {
    train::Checkpoint ck = train::read_checkpoint(a.ckpt);
    curves::Dataset ds = load_bnd(a.data);
    if (a.bundle_index < 0 || a.bundle_index >= static_cast<int>(ds.bundles.size()))
        throw std::runtime_error("perturb: bundle index " + std::to_string(a.bundle_index) +
                                 " outside dataset of " + std::to_string(ds.bundles.size()));
    std::filesystem::create_directories(a.out_dir);
    analysis::PerturbSpec spec;
    spec.eps_grid = a.eps;
    spec.trials = a.trials;
    spec.noise_seed = a.seed;
    metrics::BuanConfig bc;
    bc.theta = a.theta;
    analysis::SweepTable table = perturb_sweep(ck, ds.bundles[static_cast<std::size_t>(a.bundle_index)], spec, bc);
    const std::string base = a.out_dir + "/perturb_" + table.model_tag + "_b" +
                             std::to_string(a.bundle_index);
    analysis::write_sweep_csv(table, base + ".csv");
    analysis::write_sweep_svg(table, base + ".svg");
    nlohmann::json j{{"command", "perturb"}, {"ckpt", a.ckpt},   {"data", a.data},
                     {"bundle_index", a.bundle_index}, {"eps", a.eps}, {"trials", a.trials},
                     {"seed", a.seed},       {"theta", a.theta}, {"out", a.out_dir}};
    write_run_record(base + ".run.json", j);
    std::printf("eps      mean_buan  mean_mse\n");
    for (const auto& row : table.rows)
        std::printf("%-8.3g %-10.4f %.6g\n", row.eps, row.mean_buan, row.mean_mse);
    std::printf("written to %s.{csv,svg}\n", base.c_str());
    return 0;
}

int run_project(const ProjectArgs& a) {
    io::LatentFile lf = io::read_latents(a.latents);
    if (lf.records.empty()) throw std::runtime_error("project: no latent records in " + a.latents);
    const int d = static_cast<int>(lf.dim);
    const int S = static_cast<int>(lf.group_size);
    std::vector<double> data;
    std::vector<std::uint32_t> labels;
    for (const auto& rec : lf.records) {
        data.insert(data.end(), rec.z.begin(), rec.z.end());
        for (int s = 0; s < S; ++s) labels.push_back(rec.label);
    }
    const int n = static_cast<int>(labels.size());
    analysis::PcaResult res = analysis::pca_project(data, n, d);
    std::filesystem::create_directories(a.out_dir);
    std::vector<analysis::ScatterPoint> pts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        pts[static_cast<std::size_t>(i)] = {res.coords[static_cast<std::size_t>(i) * 2],
                                            res.coords[static_cast<std::size_t>(i) * 2 + 1],
                                            labels[static_cast<std::size_t>(i)]};
    const std::string base = a.out_dir + "/project_" + lf.model_tag;
    analysis::write_scatter_csv(pts, base + ".csv");
    analysis::write_scatter_svg(pts, base + ".svg", lf.model_tag + " latent projection");
    std::printf("projected %d latents (d=%d); explained variance %.3f + %.3f = %.3f\n", n, d,
                res.explained[0], res.explained[1], res.explained[0] + res.explained[1]);
    std::printf("written to %s.{csv,svg}\n", base.c_str());
    return 0;
}

int run_klcheck(const KlArgs& a) {
    kl::KlParams p{a.sigma, a.beta};
    const double cf = kl::kl_closed_form(p);
    const double quad = kl::kl_quadrature(p);
    kl::McResult mc = kl::kl_monte_carlo(p, a.mc_n, a.seed);
    const double moment = kl::gumbel_moment_quadrature(p);
    const double moment_cf = std::exp(a.sigma * a.sigma / (2.0 * a.beta * a.beta));
    std::printf("KL(N(0,%.6g) || Gumbel(0,%.6g)) is constant in the data by construction\n",
                a.sigma, a.beta);
    std::printf("closed form            : %.12f\n", cf);
    std::printf("quadrature             : %.12f   |diff| = %.3e\n", quad, std::abs(quad - cf));
    std::printf("monte carlo (n=%lld)   : %.12f   |diff| = %.3e (se %.3e)\n",
                static_cast<long long>(a.mc_n), mc.value, std::abs(mc.value - cf), mc.std_error);
    std::printf("E_p[exp(-x/beta)]      : %.12f   vs exp(s^2/2b^2) = %.12f   |diff| = %.3e\n",
                moment, moment_cf, std::abs(moment - moment_cf));
    return 0;
}

int run_gradcheck(const GradArgs& a) {
    bool all_pass = true;
    std::printf("primitive finite-difference checks (20 randomized trials each):\n");
    for (const auto& line : probe::primitive_fd_suite(a.seed)) {
        std::printf("  [%s] %-42s max_rel_err %.3e (%zu coords)\n", line.pass ? "PASS" : "FAIL",
                    line.name.c_str(), line.max_rel_err, line.checked);
        all_pass = all_pass && line.pass;
    }
    std::printf("end-to-end losses on a %dx3x%d bundle (d=%d, k=%d):\n", a.streamlines, a.points,
                a.d, a.k);
    for (const auto& line :
         probe::model_fd_suite(a.seed, a.streamlines, a.points, a.d, a.k, a.max_coords)) {
        std::printf("  [%s] %-70s max_rel_err %.3e (%zu coords)\n", line.pass ? "PASS" : "FAIL",
                    line.name.c_str(), line.max_rel_err, line.checked);
        all_pass = all_pass && line.pass;
    }
    if (!all_pass) throw std::runtime_error("gradcheck: finite-difference comparison failed");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    if (const char* t = std::getenv("BUNDLECODEC_THREADS")) diff::set_threads(std::atoi(t));

    CLI::App app{"bundle curve autoencoder workbench"};
    app.require_subcommand(1);

    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "generate a synthetic bundle dataset");
    synth->add_option("--families", sy.families, "number of curve families");
    synth->add_option("--bundles-per-family", sy.per_family, "bundles per family");
    synth->add_option("--group-size", sy.group_size, "streamlines per bundle");
    synth->add_option("--points", sy.points, "points per streamline");
    synth->add_option("--noise", sy.noise, "dispersion level (0 = identical copies)");
    synth->add_option("--seed", sy.seed, "rng seed");
    synth->add_option("--out", sy.out, "output BND1 file")->required();

    ImportArgs im;
    auto* import = app.add_subcommand("import", "import tractography files into BND1");
    import->add_option("--trk", im.trk_files, "tractography file(s)")->required();
    import->add_option("--label-id", im.label_id, "class id for the imported bundles");
    import->add_option("--label-name", im.label_name, "class name");
    import->add_option("--points", im.points, "resample streamlines to this many points");
    import->add_option("--group-size", im.group_size, "streamlines per bundle");
    import->add_option("--seed", im.seed, "rng seed for grouping");
    import->add_option("--out", im.out, "output BND1 file")->required();

    PrepArgs pr;
    auto* prep = app.add_subcommand("prep", "balance, split and normalize datasets");
    prep->add_option("--in", pr.inputs, "input BND1 file(s)")->required();
    prep->add_option("--train-fraction", pr.train_fraction, "train split fraction");
    prep->add_flag("--no-balance", pr.no_balance, "skip per-class down-sampling");
    prep->add_option("--seed", pr.seed, "rng seed");
    prep->add_option("--out", pr.out, "output prefix (.train.bnd/.val.bnd/.norm.json)")->required();

    TrainArgs tr;
    auto* trainc = app.add_subcommand("train", "train one architecture");
    trainc->add_option("--arch", tr.arch, "ae|vae|vqvae|vqema|vqdiff");
    trainc->add_option("--config", tr.config_path, "JSON config (flags win)");
    trainc->add_option("--data", tr.data, "training BND1 file")->required();
    trainc->add_option("--out", tr.out, "checkpoint path")->required();
    trainc->add_option("--log", tr.log, "loss log CSV path");
    trainc->add_option("--resume", tr.resume, "checkpoint to continue from");
    trainc->add_option("--iterations", tr.cfg.iterations, "training iterations");
    trainc->add_option("--batch-size", tr.cfg.batch_size, "bundles per iteration");
    trainc->add_option("--lr", tr.cfg.learning_rate, "Adam learning rate");
    trainc->add_option("--seed", tr.cfg.seed, "master seed");
    trainc->add_option("--beta-temp", tr.cfg.beta_temp, "Gumbel temperature/scale");
    trainc->add_option("--sigma-codebook", tr.cfg.sigma_codebook, "codebook init std");
    trainc->add_option("--lambda-kl", tr.cfg.lambda_kl, "VAE KL weight");
    trainc->add_option("--commitment", tr.cfg.commitment, "VQ commitment weight");
    trainc->add_option("--d", tr.cfg.d, "latent dimension");
    trainc->add_option("--k", tr.cfg.k, "codebook entries");
    trainc->add_option("--eval-every", tr.cfg.eval_every, "checkpoint interval");
    tr.cmd = trainc;

    EvalArgs ev;
    auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    evalc->add_option("--ckpt", ev.ckpt, "checkpoint")->required();
    evalc->add_option("--data", ev.data, "BND1 split")->required();
    evalc->add_option("--theta", ev.theta, "bundle adjacency threshold");
    evalc->add_option("--out", ev.out, "CSV report path");
    evalc->add_option("--seed", ev.seed, "accepted for interface uniformity");

    LatentArgs la;
    auto* latents = app.add_subcommand("latents", "export latent records to BNL1");
    latents->add_option("--ckpt", la.ckpt, "checkpoint")->required();
    latents->add_option("--data", la.data, "BND1 dataset")->required();
    latents->add_option("--out", la.out, "output BNL1 file")->required();
    latents->add_option("--seed", la.seed, "accepted for interface uniformity");

    PerturbArgs pe;
    auto* perturb = app.add_subcommand("perturb", "latent perturbation sweep for one bundle");
    perturb->add_option("--ckpt", pe.ckpt, "checkpoint")->required();
    perturb->add_option("--data", pe.data, "BND1 dataset")->required();
    perturb->add_option("--bundle-index", pe.bundle_index, "bundle to probe");
    perturb->add_option("--eps", pe.eps, "epsilon grid (ascending, contains 0)")->delimiter(',');
    perturb->add_option("--trials", pe.trials, "noise draws per epsilon");
    perturb->add_option("--seed", pe.seed, "noise seed");
    perturb->add_option("--theta", pe.theta, "bundle adjacency threshold");
    perturb->add_option("--out", pe.out_dir, "output directory")->required();

    ProjectArgs pj;
    auto* project = app.add_subcommand("project", "2-D PCA projection of a latent file");
    project->add_option("--latents", pj.latents, "BNL1 file")->required();
    project->add_option("--out", pj.out_dir, "output directory")->required();
    project->add_option("--seed", pj.seed, "accepted for interface uniformity");

    KlArgs ka;
    auto* klc = app.add_subcommand("klcheck", "verify the Gaussian-Gumbel KL constancy");
    klc->add_option("--sigma", ka.sigma, "Gaussian scale");
    klc->add_option("--beta", ka.beta, "Gumbel scale");
    klc->add_option("--mc-n", ka.mc_n, "Monte Carlo sample count");
    klc->add_option("--seed", ka.seed, "Monte Carlo seed");

    GradArgs ga;
    auto* gradc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    gradc->add_option("--seed", ga.seed, "randomization seed");
    gradc->add_option("--streamlines", ga.streamlines, "toy bundle size");
    gradc->add_option("--points", ga.points, "toy point count (multiple of 4)");
    gradc->add_option("--d", ga.d, "toy latent dimension");
    gradc->add_option("--k", ga.k, "toy codebook entries");
    gradc->add_option("--max-coords", ga.max_coords,
                      "coordinates checked per tensor in the model suite (0 = all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) return run_synth(sy);
        if (*import) return run_import(im);
        if (*prep) return run_prep(pr);
        if (*trainc) return run_train(tr);
        if (*evalc) return run_eval(ev);
        if (*latents) return run_latents(la);
        if (*perturb) return run_perturb(pe);
        if (*project) return run_project(pj);
        if (*klc) return run_klcheck(ka);
        if (*gradc) return run_gradcheck(ga);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bundlecodec: error: %s\n", e.what());
        return 2;
    }
    return 1;
}
