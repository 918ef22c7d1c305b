// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/avatar_store.hpp>
#include <splatcp/cp.hpp>
#include <splatcp/dataset.hpp>
#include <splatcp/io/checkpoint.hpp>
#include <splatcp/io/config.hpp>
#include <splatcp/io/dataset_io.hpp>
#include <splatcp/io/metrics_log.hpp>
#include <splatcp/io/netpbm.hpp>
#include <splatcp/losses.hpp>
#include <splatcp/train.hpp>

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace splatcp;

namespace {

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string with_commas(std::uint64_t v) {
    std::string s = std::to_string(v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
    return s;
}

std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Scene for render/animate: from a dataset manifest, a config, or the defaults.
Scene scene_for(const std::string &data_dir, const std::string &config) {
    io::RunConfig cfg;
    if (!data_dir.empty()) {
        cfg = io::load_config(fs::path(data_dir) / "manifest.cfg");
    } else if (!config.empty()) {
        cfg = io::load_config(config);
    }
    return Scene{make_stick_figure(cfg.data.bones), default_viewport(cfg.data.image_size)};
}

FactorizedAvatarStore load_planar(const std::string &path) {
    FactorizedAvatarStore store = io::load_checkpoint(path);
    if (store.layout.id != LayoutId::Planar2D) throw UsageError("checkpoint " + path + " is not a planar Gaussian store");
    return store;
}

void check_identity(const FactorizedAvatarStore &store, std::size_t identity) {
    if (identity >= store.model.u_identity.rows) {
        throw UsageError("identity " + std::to_string(identity) + " out of range (store has " +
                         std::to_string(store.model.u_identity.rows) + ")");
    }
}

int cmd_gen(const std::string &config, const std::string &out) {
    const io::RunConfig cfg = io::load_config(config);
    const SyntheticDataset ds = generate_dataset(cfg.data, cfg.seed);
    io::save_dataset(ds, out);
    std::cout << "wrote " << ds.identities.size() << " identities to " << out << "\n";
    return 0;
}

int cmd_train(const std::string &config, const std::string &data, const std::string &out, const std::string &log) {
    const io::RunConfig cfg = io::load_config(config);
    const SyntheticDataset ds = io::load_dataset(data);
    if (cfg.train.mode == MaskMode::PerIdentity && cfg.train.mode_identity >= ds.identities.size()) {
        throw UsageError("mode per_identity: identity out of range for this dataset");
    }
    const GaussianSet seed_set = seed_gaussians(ds, cfg.seed, cfg.init_jitter, cfg.init_scale);
    const InitResult init = init_store(seed_set, ds.identities.size(), cfg.rank, cfg.seed);
    if (init.report.low_rank_warning) std::cerr << "warning: " << init.report.message << "\n";
    const TrainResult result = train(init.store, ds, cfg.train);
    io::save_checkpoint(result.store, out);

    if (!log.empty()) {
        const std::string csv = io::history_csv(result.history, cfg.log_every);
        io::write_file(log, std::vector<std::uint8_t>(csv.begin(), csv.end()));
    }
    const Metrics m = evaluate(result.store, ds, Split::Train);
    std::cout << "trained " << result.history.size() << " iterations; train PSNR " << fmt("%.3f", m.psnr) << " dB";
    if (result.skipped_gradients) std::cout << "; skipped " << result.skipped_gradients << " non-finite gradients";
    std::cout << "\n";
    return 0;
}

int cmd_eval(const std::string &ckpt, const std::string &data, const std::string &split_name) {
    const FactorizedAvatarStore store = load_planar(ckpt);
    const SyntheticDataset ds = io::load_dataset(data);
    if (store.model.u_identity.rows != ds.identities.size() || store.model.u_gaussian.rows != ds.spec.gaussians) {
        throw UsageError("checkpoint dims do not match the dataset");
    }
    const Split split = split_name == "train" ? Split::Train : Split::HeldOut;
    const Metrics m = evaluate(store, ds, split);
    std::cout << "identity  frames  mse                 psnr_db\n";
    for (std::size_t i = 0; i < ds.identities.size(); ++i) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const FrameMetric &f : m.frames) {
            if (f.identity != i) continue;
            sum += f.mse;
            ++n;
        }
        const double mse = n ? sum / static_cast<double>(n) : 0.0;
        std::printf("%-8zu  %-6zu  %-18.10e  %.4f\n", i, n, mse, psnr_from_mse(mse));
    }
    std::printf("%-8s  %-6zu  %-18.10e  %.4f\n", "all", m.frames.size(), m.mse, m.psnr);
    return 0;
}

int cmd_render(const std::string &ckpt, std::size_t identity, const std::string &pose_file, std::size_t line,
               const Scene &scene, const std::string &out) {
    const FactorizedAvatarStore store = load_planar(ckpt);
    check_identity(store, identity);
    Pose pose;
    pose.angles.assign(scene.skeleton.size(), 0.0);
    if (!pose_file.empty()) {
        const std::vector<Pose> poses = io::read_pose_file(pose_file, scene.skeleton.size());
        if (line >= poses.size()) throw UsageError("pose file has no pose " + std::to_string(line));
        pose = poses[line];
    }
    io::write_ppm(render_identity(store, identity, scene, pose), out);
    return 0;
}

int cmd_animate(const std::string &ckpt, std::size_t identity, const std::string &pose_file, const Scene &scene,
                const std::string &out_dir) {
    const FactorizedAvatarStore store = load_planar(ckpt);
    check_identity(store, identity);
    const std::vector<Pose> poses = io::read_pose_file(pose_file, scene.skeleton.size());
    if (poses.empty()) throw UsageError("pose file " + pose_file + " is empty");
    fs::create_directories(out_dir);
    char name[32];
    for (std::size_t f = 0; f < poses.size(); ++f) {
        std::snprintf(name, sizeof name, "frame_%04zu.ppm", f);
        io::write_ppm(render_identity(store, identity, scene, poses[f]), fs::path(out_dir) / name);
    }
    std::cout << "wrote " << poses.size() << " frames to " << out_dir << "\n";
    return 0;
}

int cmd_decompose(const std::string &input, std::size_t rank, const std::string &method, std::uint64_t seed,
                  std::size_t sweeps, const std::string &out) {
    const Tensor3 t = io::load_tensor(input);
    CPModel model;
    if (method == "als") {
        AlsOptions opts;
        opts.seed = seed;
        opts.max_sweeps = sweeps;
        AlsResult r = cp_als(t, rank, opts);
        std::cout << "sweeps " << r.sweeps << "\n";
        model = std::move(r.model);
    } else {
        PowerOptions opts;
        opts.seed = seed;
        model = cp_power(t, rank, opts);
    }
    const double err = rel_error(t, reconstruct_full(model));
    std::cout << "rel_error " << fmt("%.17g", err) << "\n";
    if (!out.empty()) {
        FactorizedAvatarStore store;
        store.layout = t.dims[2] == 9 ? layout_2d() : layout_generic(t.dims[2]);
        store.model = std::move(model);
        io::save_checkpoint(store, out);
    }
    return 0;
}

void print_counts(std::uint64_t m, std::uint64_t ni, std::uint64_t ng, std::uint64_t r) {
    const ParamCount pc = param_count(m, ni, ng, r);
    std::cout << "dims M=" << m << " N_i=" << ni << " N_g=" << ng << " rank=" << r << "\n";
    std::cout << "factorized " << with_commas(pc.factorized) << " vs dense " << with_commas(pc.dense) << " (ratio "
              << fmt("%.2f", pc.ratio) << ")\n";
}

int cmd_info(const std::string &ckpt, const std::vector<std::uint64_t> &dims, std::uint64_t rank) {
    if (!ckpt.empty()) {
        const FactorizedAvatarStore s = io::load_checkpoint(ckpt);
        print_counts(s.model.u_params.rows, s.model.u_identity.rows, s.model.u_gaussian.rows, s.model.rank);
        std::cout << "layout " << static_cast<int>(s.layout.id)
                  << (s.personalization.empty() ? "" : ", personalization residuals present") << "\n";
        return 0;
    }
    if (dims.size() != 3 || rank == 0) throw UsageError("info needs --checkpoint, or --dims M,N_i,N_g with --rank");
    print_counts(dims[0], dims[1], dims[2], rank);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Multi-identity Gaussian avatars with a shared CP-factorized parameter store"};
    app.require_subcommand(1);

    std::string config, data, out, log, ckpt, pose_file, split = "heldout", method = "als";
    std::size_t identity = 0, line = 0, rank = 0, sweeps = 200;
    std::uint64_t seed = 0, info_rank = 0;
    std::vector<std::uint64_t> dims;

    auto *gen = app.add_subcommand("gen", "Generate a synthetic dataset");
    gen->add_option("-c,--config", config, "Run config")->required()->check(CLI::ExistingFile);
    gen->add_option("-o,--out", out, "Output directory")->required();

    auto *tr = app.add_subcommand("train", "Train a factorized store on a dataset");
    tr->add_option("-c,--config", config, "Run config")->required()->check(CLI::ExistingFile);
    tr->add_option("-d,--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    tr->add_option("-o,--out", out, "Output checkpoint")->required();
    tr->add_option("--log", log, "Metrics CSV");

    auto *ev = app.add_subcommand("eval", "Print PSNR per identity");
    ev->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
    ev->add_option("-d,--data", data)->required()->check(CLI::ExistingDirectory);
    ev->add_option("--split", split)->check(CLI::IsMember({"train", "heldout"}));

    auto add_scene = [&](CLI::App *c) {
        c->add_option("-d,--data", data, "Dataset directory for skeleton and viewport")->check(CLI::ExistingDirectory);
        c->add_option("-c,--config", config, "Run config for skeleton and viewport")->check(CLI::ExistingFile);
    };
    auto *rd = app.add_subcommand("render", "Render one identity in one pose to PPM");
    rd->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
    rd->add_option("-i,--identity", identity);
    rd->add_option("-p,--pose", pose_file, "Pose file (rest pose when omitted)")->check(CLI::ExistingFile);
    rd->add_option("--line", line, "Which pose of the file to use");
    rd->add_option("-o,--out", out)->required();
    add_scene(rd);

    auto *an = app.add_subcommand("animate", "Render a pose sequence to a directory of PPM frames");
    an->add_option("--checkpoint", ckpt)->required()->check(CLI::ExistingFile);
    an->add_option("-i,--identity", identity);
    an->add_option("-p,--poses", pose_file)->required()->check(CLI::ExistingFile);
    an->add_option("-o,--out", out, "Output directory")->required();
    add_scene(an);

    auto *dc = app.add_subcommand("decompose", "CP-decompose a stored tensor");
    dc->add_option("--input", data, "Tensor file")->required()->check(CLI::ExistingFile);
    dc->add_option("-r,--rank", rank)->required()->check(CLI::Range(std::size_t{1}, std::size_t{4096}));
    dc->add_option("--method", method)->check(CLI::IsMember({"als", "power"}));
    dc->add_option("--seed", seed);
    dc->add_option("--sweeps", sweeps)->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    dc->add_option("-o,--out", out, "Output checkpoint");

    auto *in = app.add_subcommand("info", "Print dims and parameter counts");
    in->add_option("--checkpoint", ckpt)->check(CLI::ExistingFile);
    in->add_option("--dims", dims, "M,N_i,N_g")->delimiter(',')->expected(3);
    in->add_option("-r,--rank", info_rank);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.get_exit_code() ? e.get_exit_code() : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(config, out);
        if (tr->parsed()) return cmd_train(config, data, out, log);
        if (ev->parsed()) return cmd_eval(ckpt, data, split);
        if (rd->parsed()) return cmd_render(ckpt, identity, pose_file, line, scene_for(data, config), out);
        if (an->parsed()) return cmd_animate(ckpt, identity, pose_file, scene_for(data, config), out);
        if (dc->parsed()) return cmd_decompose(data, rank, method, seed, sweeps, out);
        if (in->parsed()) return cmd_info(ckpt, dims, info_rank);
    } catch (const std::exception &e) {
        std::string msg = e.what();
        for (char &c : msg)
            if (c == '\n') c = ' ';
        std::cerr << "error: " << msg << "\n";
        return 1;
    }
    return 1;
}
