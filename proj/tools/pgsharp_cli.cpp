#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgsharp.h"

namespace {

using Json = nlohmann::json;

int run(const char* cmd, const Json& opt, bool print_row = false) {
    char* result = nullptr;
    const pgsharp_status st = pgsharp_run(cmd, opt.dump().c_str(), &result);
    if (st != PGSHARP_OK) {
        std::fprintf(stderr, "error: %s\n", pgsharp_last_error());
        return static_cast<int>(st);
    }
    if (print_row && result) {
        const Json r = Json::parse(result);
        std::printf("%s\n", r.value("row", "").c_str());
    }
    pgsharp_free(result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pgsharp: hyperspectral pansharpening toolkit"};
    app.require_subcommand(1);

    // ---- simulate ----------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "Degrade a scene into an aligned HR/LR/PAN set");
    std::string sim_input, sim_synth, sim_srf = "uniform", sim_out;
    int sim_ratio = 16, sim_kernel = 16;
    double sim_sigma = 0.8493, sim_noise = 0.01;
    std::uint64_t sim_seed = 0;
    auto* in_opt = sim->add_option("--input", sim_input, "HR cube file to degrade");
    auto* syn_opt = sim->add_option("--synthetic", sim_synth,
                                    "Generate the HR scene: bands,endmembers,H,W,seed");
    in_opt->excludes(syn_opt);
    syn_opt->excludes(in_opt);
    sim->add_option("--ratio", sim_ratio, "Spatial downsampling ratio");
    sim->add_option("--kernel-size", sim_kernel, "Gaussian blur kernel size");
    sim->add_option("--sigma", sim_sigma, "Gaussian blur standard deviation");
    sim->add_option("--noise-std", sim_noise, "Additive Gaussian noise std");
    sim->add_option("--srf", sim_srf, "'uniform' or a spectral-response CSV");
    sim->add_option("--seed", sim_seed, "Noise (and synthetic scene) seed");
    sim->add_option("--out", sim_out, "Output directory")->required();

    // ---- fish --------------------------------------------------------
    auto* fish = app.add_subcommand("fish", "Abundance-vs-intensity scatter experiment");
    int fish_c = 11, fish_n = 5000, fish_b = 128;
    std::uint64_t fish_seed = 0;
    std::string fish_out;
    fish->add_option("--endmembers", fish_c, "Endmember count");
    fish->add_option("--pixels", fish_n, "Sampled pixel count");
    fish->add_option("--bands", fish_b, "Synthetic endmember band count");
    fish->add_option("--seed", fish_seed, "Sampling seed");
    fish->add_option("--out", fish_out, "Scatter CSV path")->required();

    // ---- train -------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train the fusion network on a simulated set");
    std::string train_data, train_config, train_out;
    train->add_option("--data", train_data, "Dataset directory from `simulate`")->required();
    train->add_option("--config", train_config, "JSON file of model/training options");
    train->add_option("--out", train_out, "Run directory")->required();

    // ---- fuse --------------------------------------------------------
    auto* fuse = app.add_subcommand("fuse", "Fuse an LR cube with a PAN image");
    std::string fuse_model, fuse_lr, fuse_pan, fuse_out;
    fuse->add_option("--model", fuse_model, "Checkpoint file")->required();
    fuse->add_option("--lr", fuse_lr, "LR cube file")->required();
    fuse->add_option("--pan", fuse_pan, "PAN cube file")->required();
    fuse->add_option("--out", fuse_out, "Fused cube path")->required();

    // ---- evaluate ----------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "Score a prediction against a reference");
    std::string ev_pred, ev_ref, ev_out;
    int ev_ratio = 4;
    ev->add_option("--pred", ev_pred, "Predicted cube")->required();
    ev->add_option("--ref", ev_ref, "Reference cube")->required();
    ev->add_option("--ratio", ev_ratio, "Resolution ratio for ERGAS");
    ev->add_option("--out", ev_out, "Metrics CSV path");

    // ---- inspect -----------------------------------------------------
    auto* insp = app.add_subcommand("inspect", "Dump tapped-stage scatters and quicklooks");
    std::string insp_model, insp_lr, insp_pan, insp_out, insp_bands;
    insp->add_option("--model", insp_model, "Checkpoint file")->required();
    insp->add_option("--lr", insp_lr, "LR cube file")->required();
    insp->add_option("--pan", insp_pan, "PAN cube file")->required();
    insp->add_option("--bands", insp_bands, "Quicklook band triple i,j,k");
    insp->add_option("--out", insp_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help and friends
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // bad command line == config error
    }

    if (sim->parsed()) {
        Json opt{{"out", sim_out},       {"ratio", sim_ratio},   {"kernel_size", sim_kernel},
                 {"sigma", sim_sigma},   {"noise_std", sim_noise}, {"srf", sim_srf},
                 {"seed", sim_seed}};
        if (!sim_input.empty()) opt["input"] = sim_input;
        if (!sim_synth.empty()) {
            int b = 0, c = 0, h = 0, w = 0;
            std::uint64_t seed = 0;
            if (std::sscanf(sim_synth.c_str(), "%d,%d,%d,%d,%" SCNu64, &b, &c, &h, &w, &seed) !=
                5) {
                std::fprintf(stderr,
                             "error: --synthetic expects bands,endmembers,H,W,seed\n");
                return 2;
            }
            opt["bands"] = b;
            opt["endmembers"] = c;
            opt["height"] = h;
            opt["width"] = w;
            opt["seed"] = seed;
        }
        return run("simulate", opt);
    }
    if (fish->parsed()) {
        return run("fish", Json{{"out", fish_out},
                                {"endmembers", fish_c},
                                {"pixels", fish_n},
                                {"bands", fish_b},
                                {"seed", fish_seed}});
    }
    if (train->parsed()) {
        Json opt{{"data", train_data}, {"out", train_out}};
        if (!train_config.empty()) opt["config"] = train_config;
        return run("train", opt);
    }
    if (fuse->parsed()) {
        return run("fuse", Json{{"model", fuse_model},
                                {"lr", fuse_lr},
                                {"pan", fuse_pan},
                                {"out", fuse_out}});
    }
    if (ev->parsed()) {
        Json opt{{"pred", ev_pred}, {"ref", ev_ref}, {"ratio", ev_ratio}};
        if (!ev_out.empty()) opt["out"] = ev_out;
        return run("evaluate", opt, true);
    }
    if (insp->parsed()) {
        Json opt{{"model", insp_model}, {"lr", insp_lr}, {"pan", insp_pan}, {"out", insp_out}};
        if (!insp_bands.empty()) {
            int i = 0, j = 0, k = 0;
            if (std::sscanf(insp_bands.c_str(), "%d,%d,%d", &i, &j, &k) != 3) {
                std::fprintf(stderr, "error: --bands expects three indices i,j,k\n");
                return 2;
            }
            opt["bands"] = Json::array({i, j, k});
        }
        return run("inspect", opt);
    }
    return 2;
}
