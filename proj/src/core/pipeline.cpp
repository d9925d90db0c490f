#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "checkpoint.hpp"
#include "training.hpp"
#include "unmix.hpp"

namespace fs = std::filesystem;

namespace pgs {

namespace {

void ensure_object(const Json& opt, const std::string& cmd) {
    if (!opt.is_object()) throw ConfigError(cmd + ": options must be a JSON object");
}

// Reject typo'd options outright: silent fallback to a default would make a
// manifest lie about what actually ran.
void ensure_keys(const Json& opt, std::initializer_list<const char*> allowed,
                 const std::string& cmd) {
    for (const auto& item : opt.items()) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || item.key() == k;
        if (!ok) throw ConfigError(cmd + ": unknown option '" + item.key() + "'");
    }
}

std::string req_str(const Json& opt, const char* key, const std::string& cmd) {
    if (!opt.contains(key) || !opt.at(key).is_string())
        throw ConfigError(cmd + ": missing required string option '" + key + "'");
    return opt.at(key).get<std::string>();
}

int get_int(const Json& opt, const char* key, int dflt) {
    if (!opt.contains(key)) return dflt;
    const Json& v = opt.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError(std::string("option '") + key + "' must be an integer");
    return v.get<int>();
}

double get_num(const Json& opt, const char* key, double dflt) {
    if (!opt.contains(key)) return dflt;
    const Json& v = opt.at(key);
    if (!v.is_number()) throw ConfigError(std::string("option '") + key + "' must be a number");
    return v.get<double>();
}

std::uint64_t get_seed(const Json& opt, const char* key, std::uint64_t dflt) {
    if (!opt.contains(key)) return dflt;
    const Json& v = opt.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(std::string("option '") + key + "' must be a nonnegative integer");
}

std::string get_str(const Json& opt, const char* key, const std::string& dflt) {
    if (!opt.contains(key)) return dflt;
    const Json& v = opt.at(key);
    if (!v.is_string()) throw ConfigError(std::string("option '") + key + "' must be a string");
    return v.get<std::string>();
}

Json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f.good()) throw IoError("cannot open " + path);
    try {
        return Json::parse(f);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream f(path, std::ios::binary);  // binary: LF newlines everywhere
    f << j.dump(2) << "\n";
    if (!f) throw IoError("failed writing " + path);
}

// Whole numbers print with one decimal so an identity row reads
// `psnr=100.0,ssim=1.0,...`; everything else keeps 9 significant digits.
std::string fmt_metric(double v) {
    char buf[48];
    if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15)
        std::snprintf(buf, sizeof buf, "%.1f", v);
    else
        std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string metric_row(const MetricsReport& m) {
    return "psnr=" + fmt_metric(m.psnr) + ",ssim=" + fmt_metric(m.ssim) +
           ",sam=" + fmt_metric(m.sam) + ",ergas=" + fmt_metric(m.ergas) +
           ",scc=" + fmt_metric(m.scc);
}

Json metrics_json(const MetricsReport& m) {
    return Json{{"psnr", m.psnr}, {"ssim", m.ssim}, {"sam", m.sam},
                {"ergas", m.ergas}, {"scc", m.scc}};
}

PanImage read_pan(const std::string& path) {
    const HyperCube c = read_cube(path);
    if (c.bands != 1)
        throw DimensionError("PAN file " + path + " has " + std::to_string(c.bands) +
                             " bands, expected 1");
    return PanImage::from_cube(c);
}

std::array<int, 3> quicklook_bands(const Json& opt, int bands) {
    if (opt.contains("bands")) {
        const Json& v = opt.at("bands");
        if (!v.is_array() || v.size() != 3)
            throw ConfigError("option 'bands' must be an array of three band indices");
        std::array<int, 3> out{};
        for (int i = 0; i < 3; ++i) {
            out[i] = v.at(i).get<int>();
            if (out[i] < 0 || out[i] >= bands)
                throw ConfigError("quicklook band " + std::to_string(out[i]) +
                                  " out of range for " + std::to_string(bands) + " bands");
        }
        return out;
    }
    if (bands > 60) return {20, 40, 60};
    const auto clamp = [bands](int b) { return std::min(std::max(b, 0), bands - 1); };
    return {clamp(bands / 4), clamp(bands / 2), clamp(3 * bands / 4)};
}

}  // namespace

Json cmd_simulate(const Json& opt) {
    ensure_object(opt, "simulate");
    ensure_keys(opt,
                {"out", "input", "bands", "endmembers", "height", "width", "seed", "ratio",
                 "kernel_size", "sigma", "noise_std", "srf"},
                "simulate");
    const std::string out = req_str(opt, "out", "simulate");

    DegradationConfig cfg;
    cfg.ratio = get_int(opt, "ratio", 16);
    cfg.kernel_size = get_int(opt, "kernel_size", 16);
    cfg.kernel_sigma = get_num(opt, "sigma", 0.8493);
    cfg.noise_std = get_num(opt, "noise_std", 0.01);
    cfg.seed = get_seed(opt, "seed", 0);
    if (cfg.noise_std < 0) throw ConfigError("simulate: noise_std must be >= 0");
    const std::string srf_spec = get_str(opt, "srf", "uniform");

    HyperCube hr;
    Json source;
    if (opt.contains("input")) {
        const std::string input = req_str(opt, "input", "simulate");
        hr = read_cube(input);
        source = Json{{"input", input}};
    } else {
        const int bands = get_int(opt, "bands", 32);
        const int endmembers = get_int(opt, "endmembers", 5);
        const int height = get_int(opt, "height", 128);
        const int width = get_int(opt, "width", 128);
        hr = synthetic_scene(bands, endmembers, height, width, cfg.seed);
        source = Json{{"synthetic", Json{{"bands", bands},
                                         {"endmembers", endmembers},
                                         {"height", height},
                                         {"width", width}}}};
    }

    const SrfVector srf = srf_spec == "uniform" ? uniform_srf(hr.bands, hr.wavelengths)
                                                : load_srf_csv(srf_spec, hr.bands);
    const HyperCube lr = add_noise(degrade_spatial(hr, cfg), cfg.noise_std, cfg.seed + 1);
    const PanImage pan = add_noise(synthesize_pan(hr, srf), cfg.noise_std, cfg.seed + 2);

    fs::create_directories(out);
    write_cube(hr, out + "/hr");
    write_cube(lr, out + "/lr");
    write_cube(pan.to_cube(), out + "/pan");

    Json man{{"schema", 1},
             {"command", "simulate"},
             {"source", source},
             {"ratio", cfg.ratio},
             {"kernel_size", cfg.kernel_size},
             {"kernel_sigma", cfg.kernel_sigma},
             {"noise_std", cfg.noise_std},
             {"seed", cfg.seed},
             {"srf", srf_spec},
             {"bands", hr.bands},
             {"height", hr.height},
             {"width", hr.width},
             {"hr", "hr"},
             {"lr", "lr"},
             {"pan", "pan"}};
    write_json_file(out + "/manifest.json", man);
    return man;
}

Json cmd_fish(const Json& opt) {
    ensure_object(opt, "fish");
    ensure_keys(opt, {"out", "endmembers", "pixels", "seed", "bands"}, "fish");
    const std::string out = req_str(opt, "out", "fish");
    const int endmembers = get_int(opt, "endmembers", 11);
    const int pixels = get_int(opt, "pixels", 5000);
    const int bands = get_int(opt, "bands", 128);
    const std::uint64_t seed = get_seed(opt, "seed", 0);
    if (endmembers < 2) throw ConfigError("fish: endmembers must be >= 2");
    if (pixels < 10) throw ConfigError("fish: pixels must be >= 10");
    if (bands <= endmembers) throw ConfigError("fish: bands must exceed endmembers");

    const EndmemberMatrix e = synthetic_endmembers(bands, endmembers, seed);
    const SrfVector s = uniform_srf(bands, wavelength_grid(bands));
    const FishScatter fsc = fish_scatter(e, s, pixels, seed + 1);

    if (!fs::path(out).parent_path().empty()) fs::create_directories(fs::path(out).parent_path());
    std::vector<std::vector<double>> rows(fsc.astd.size());
    for (std::size_t i = 0; i < fsc.astd.size(); ++i) rows[i] = {fsc.astd[i], fsc.intensity[i]};
    write_csv(out, {"astd", "intensity"}, rows);

    const DecileSummary dec = decile_summary(fsc);
    const std::vector<double> sp = effective_srf(s, e);
    double head_oracle = 0.0;
    for (double v : sp) head_oracle += v / endmembers;

    std::string summary_path = out;
    if (summary_path.size() > 4 && summary_path.substr(summary_path.size() - 4) == ".csv")
        summary_path.resize(summary_path.size() - 4);
    summary_path += "_summary.json";

    Json man{{"schema", 1},
             {"command", "fish"},
             {"endmembers", endmembers},
             {"pixels", pixels},
             {"bands", bands},
             {"seed", seed},
             {"csv", out},
             {"decile_spread", dec.spread},
             {"head_tail_ratio", dec.head_tail_ratio},
             {"sharp_head_pass", dec.head_tail_ratio < 0.3},
             {"inversions", dec.inversions},
             {"monotone_pass", dec.inversions <= 1},
             {"head_mean", dec.head_mean},
             {"head_oracle", head_oracle},
             {"head_within_spread", std::fabs(dec.head_mean - head_oracle) <= dec.spread[0]}};
    write_json_file(summary_path, man);
    return man;
}

Json cmd_train(const Json& opt) {
    ensure_object(opt, "train");
    ensure_keys(opt, {"data", "out", "config"}, "train");
    const std::string data = req_str(opt, "data", "train");
    const std::string out = req_str(opt, "out", "train");

    Json user = Json::object();
    if (opt.contains("config")) {
        const Json& c = opt.at("config");
        if (c.is_string())
            user = read_json_file(c.get<std::string>());
        else if (c.is_object())
            user = c;
        else
            throw ConfigError("train: 'config' must be a JSON object or a path to one");
    }
    ensure_keys(user,
                {"hr_patch", "endmembers", "sab_count", "pan_mid_channels",
                 "decoder_mid_channels", "stage_factors", "leaky_slope", "pdin_init",
                 "model_seed", "use_q", "use_pan_weights", "use_bias", "use_residual", "epochs",
                 "batch_size", "lr0", "lr_decay_factor", "lr_decay_every", "alpha", "beta1",
                 "beta2", "eps", "seed"},
                "train config");

    const Json man_in = read_json_file(data + "/manifest.json");
    if (!man_in.contains("ratio") || !man_in.contains("hr"))
        throw ConfigError(data + "/manifest.json does not describe a simulated dataset");
    const int ratio = man_in.at("ratio").get<int>();
    const HyperCube hr = read_cube(data + "/" + man_in.value("hr", "hr"));
    const HyperCube lr = read_cube(data + "/" + man_in.value("lr", "lr"));
    const PanImage pan = read_pan(data + "/" + man_in.value("pan", "pan"));

    const int hr_patch = get_int(user, "hr_patch", 64);
    const std::vector<PatchTriple> patches = patchify(hr, pan, lr, hr_patch, ratio);
    const int grid_h = hr.height / hr_patch;
    const int grid_w = hr.width / hr_patch;

    // 80/20 split on whole patch-grid rows keeps train and test ground
    // footprints disjoint.
    const int train_rows = std::max(1, grid_h * 4 / 5);
    const auto split = patches.begin() + static_cast<std::ptrdiff_t>(train_rows) * grid_w;
    const std::vector<PatchTriple> train_patches(patches.begin(), split);
    const std::vector<PatchTriple> test_patches(split, patches.end());

    Json mj = Json::parse(pgnet_config_json(PgnetConfig{}));
    mj["bands"] = hr.bands;
    mj["ratio"] = ratio;
    mj["endmembers"] = get_int(user, "endmembers", mj["endmembers"].get<int>());
    mj["sab_count"] = get_int(user, "sab_count", mj["sab_count"].get<int>());
    mj["pan_mid_channels"] = get_int(user, "pan_mid_channels", mj["pan_mid_channels"].get<int>());
    mj["decoder_mid_channels"] =
        get_int(user, "decoder_mid_channels", mj["decoder_mid_channels"].get<int>());
    if (user.contains("stage_factors")) mj["stage_factors"] = user.at("stage_factors");
    mj["leaky_slope"] = get_num(user, "leaky_slope", mj["leaky_slope"].get<double>());
    mj["pdin_init"] = get_str(user, "pdin_init", mj["pdin_init"].get<std::string>());
    mj["seed"] = get_seed(user, "model_seed", mj["seed"].get<std::uint64_t>());
    for (const char* flag : {"use_q", "use_pan_weights", "use_bias", "use_residual"}) {
        if (!user.contains(flag)) continue;
        if (!user.at(flag).is_boolean())
            throw ConfigError(std::string("train config: '") + flag + "' must be a boolean");
        mj["ablation"][flag] = user.at(flag);
    }
    const PgnetConfig mcfg = pgnet_config_from_json(mj.dump());

    TrainConfig tcfg;
    tcfg.epochs = get_int(user, "epochs", tcfg.epochs);
    tcfg.batch_size = get_int(user, "batch_size", tcfg.batch_size);
    tcfg.lr0 = get_num(user, "lr0", tcfg.lr0);
    tcfg.lr_decay_factor = get_num(user, "lr_decay_factor", tcfg.lr_decay_factor);
    tcfg.lr_decay_every = get_int(user, "lr_decay_every", tcfg.lr_decay_every);
    tcfg.alpha = get_num(user, "alpha", tcfg.alpha);
    tcfg.beta1 = get_num(user, "beta1", tcfg.beta1);
    tcfg.beta2 = get_num(user, "beta2", tcfg.beta2);
    tcfg.eps = get_num(user, "eps", tcfg.eps);
    tcfg.seed = get_seed(user, "seed", tcfg.seed);

    fs::create_directories(out);
    Pgnet net(mcfg);
    const TrainResult result = train(net, train_patches, tcfg, out);

    std::vector<std::vector<double>> log_rows(result.rows.size());
    for (std::size_t i = 0; i < result.rows.size(); ++i)
        log_rows[i] = {static_cast<double>(result.rows[i].epoch), result.rows[i].loss,
                       result.rows[i].lr};
    write_csv(out + "/train_log.csv", {"epoch", "loss", "lr"}, log_rows);

    Json test_section;
    if (!test_patches.empty()) {
        Pgnet best = load_model(result.best_path);
        std::vector<MetricsReport> per;
        const MetricsReport mean = evaluate_fuser(model_fuser(best), test_patches, ratio, &per);
        std::ofstream csv(out + "/test_metrics.csv", std::ios::binary);
        csv << "patch,psnr,ssim,sam,ergas,scc\n";
        for (std::size_t i = 0; i < per.size(); ++i)
            csv << metrics_csv_row(std::to_string(i), per[i]) << "\n";
        csv << metrics_csv_row("mean", mean) << "\n";
        if (!csv) throw IoError("failed writing " + out + "/test_metrics.csv");
        test_section = metrics_json(mean);
        test_section["csv"] = "test_metrics.csv";
        test_section["patches"] = test_patches.size();
    }

    Json man{{"schema", 1},
             {"command", "train"},
             {"data", data},
             {"ratio", ratio},
             {"hr_patch", hr_patch},
             {"grid", Json{{"rows", grid_h}, {"cols", grid_w}, {"train_rows", train_rows}}},
             {"train_patches", train_patches.size()},
             {"model", Json::parse(pgnet_config_json(mcfg))},
             {"train_config",
              Json{{"epochs", tcfg.epochs},
                   {"batch_size", tcfg.batch_size},
                   {"lr0", tcfg.lr0},
                   {"lr_decay_factor", tcfg.lr_decay_factor},
                   {"lr_decay_every", tcfg.lr_decay_every},
                   {"alpha", tcfg.alpha},
                   {"beta1", tcfg.beta1},
                   {"beta2", tcfg.beta2},
                   {"eps", tcfg.eps},
                   {"seed", tcfg.seed}}},
             {"log", "train_log.csv"},
             {"best", "best.ckpt"},
             {"final", "final.ckpt"},
             {"state", "final.ckpt.state"},
             {"best_epoch", result.best_epoch},
             {"best_psnr", result.best_psnr},
             {"parameters", net.param_count()}};
    if (!test_section.is_null()) man["test"] = test_section;
    write_json_file(out + "/manifest.json", man);
    return man;
}

Json cmd_fuse(const Json& opt) {
    ensure_object(opt, "fuse");
    ensure_keys(opt, {"model", "lr", "pan", "out"}, "fuse");
    Pgnet net = load_model(req_str(opt, "model", "fuse"));
    const HyperCube lr = read_cube(req_str(opt, "lr", "fuse"));
    const PanImage pan = read_pan(req_str(opt, "pan", "fuse"));
    const std::string out = req_str(opt, "out", "fuse");

    const HyperCube fused = fuse_cube(net, lr, pan);
    if (!fs::path(out).parent_path().empty()) fs::create_directories(fs::path(out).parent_path());
    write_cube(fused, out);
    return Json{{"schema", 1},
                {"command", "fuse"},
                {"out", out},
                {"bands", fused.bands},
                {"height", fused.height},
                {"width", fused.width}};
}

Json cmd_evaluate(const Json& opt) {
    ensure_object(opt, "evaluate");
    ensure_keys(opt, {"pred", "ref", "ratio", "out"}, "evaluate");
    const HyperCube pred = read_cube(req_str(opt, "pred", "evaluate"));
    const HyperCube ref = read_cube(req_str(opt, "ref", "evaluate"));
    const int ratio = get_int(opt, "ratio", 4);

    const MetricsReport m = compute_metrics(pred, ref, ratio);
    if (opt.contains("out")) {
        const std::string out = req_str(opt, "out", "evaluate");
        if (!fs::path(out).parent_path().empty())
            fs::create_directories(fs::path(out).parent_path());
        write_csv(out, {"psnr", "ssim", "sam", "ergas", "scc"},
                  {{m.psnr, m.ssim, m.sam, m.ergas, m.scc}});
    }
    Json res = metrics_json(m);
    res["schema"] = 1;
    res["command"] = "evaluate";
    res["ratio"] = ratio;
    res["row"] = metric_row(m);
    return res;
}

Json cmd_inspect(const Json& opt) {
    ensure_object(opt, "inspect");
    ensure_keys(opt, {"model", "lr", "pan", "out", "bands"}, "inspect");
    Pgnet net = load_model(req_str(opt, "model", "inspect"));
    const HyperCube lr = read_cube(req_str(opt, "lr", "inspect"));
    const PanImage pan = read_pan(req_str(opt, "pan", "inspect"));
    const std::string out = req_str(opt, "out", "inspect");
    const std::array<int, 3> ql = quicklook_bands(opt, lr.bands);

    fs::create_directories(out);
    NoGradGuard guard;
    PgnetTaps<float> taps;
    net.forward(lr.to_tensor(), pan.to_cube().to_tensor(), false, &taps);

    const struct {
        const char* name;
        const Tensor* tap;
    } points[3] = {{"pre_pdin", &taps.pre_pdin},
                   {"post_stages", &taps.post_stages},
                   {"post_aggregation", &taps.post_aggregation}};

    Json files = Json::array();
    for (const auto& pt : points) {
        const Tensor& t = *pt.tap;
        const int c = t.shape[1], h = t.shape[2], w = t.shape[3];
        if (h != pan.height || w != pan.width)
            throw DimensionError("inspect: tap extents do not match the PAN raster");

        // Each tap is decoded to spectra; the scatter pairs the tap's
        // per-pixel abundance STD with the PAN intensity synthesized from
        // that decoded cube, so every stage is judged by what it would
        // reconstruct, not by the observed PAN.
        const HyperCube decoded = HyperCube::from_tensor(net.decode(t, false), lr.wavelengths);
        const PanImage synth =
            synthesize_pan(decoded, uniform_srf(decoded.bands, decoded.wavelengths));

        std::vector<std::vector<double>> rows(static_cast<std::size_t>(h) * w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double mean = 0.0;
                for (int j = 0; j < c; ++j)
                    mean += (*t.data)[(static_cast<std::size_t>(j) * h + y) * w + x];
                mean /= c;
                double var = 0.0;
                for (int j = 0; j < c; ++j) {
                    const double d =
                        (*t.data)[(static_cast<std::size_t>(j) * h + y) * w + x] - mean;
                    var += d * d;
                }
                rows[static_cast<std::size_t>(y) * w + x] = {std::sqrt(var / c),
                                                             static_cast<double>(synth.at(y, x))};
            }
        }
        const std::string scatter = "scatter_" + std::string(pt.name) + ".csv";
        write_csv(out + "/" + scatter, {"astd", "intensity"}, rows);

        const std::string quicklook = "quicklook_" + std::string(pt.name) + ".ppm";
        write_quicklook(decoded, ql, out + "/" + quicklook);
        files.push_back(Json{{"point", pt.name}, {"scatter", scatter}, {"quicklook", quicklook}});
    }

    Json man{{"schema", 1},
             {"command", "inspect"},
             {"quicklook_bands", ql},
             {"points", files}};
    write_json_file(out + "/manifest.json", man);
    return man;
}

Json run_command(const std::string& name, const Json& opt) {
    if (name == "simulate") return cmd_simulate(opt);
    if (name == "fish") return cmd_fish(opt);
    if (name == "train") return cmd_train(opt);
    if (name == "fuse") return cmd_fuse(opt);
    if (name == "evaluate") return cmd_evaluate(opt);
    if (name == "inspect") return cmd_inspect(opt);
    throw ConfigError("unknown command '" + name + "'");
}

}  // namespace pgs
