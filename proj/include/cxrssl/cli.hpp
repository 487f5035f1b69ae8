#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "cxrssl/checkpoint.hpp"
#include "cxrssl/explain.hpp"
#include "cxrssl/pipeline.hpp"
#include "cxrssl/synthetic.hpp"

// Command-line front end. Every subcommand writes into a run directory:
//   config.snapshot   resolved TrainConfig, seed included
//   manifest.tsv      the split the run used
//   checkpoints/      *.ckpt envelopes
//   logs/epochs.txt   one JSON record per epoch
//   reports/          CSV tables
//   heatmaps/         overlay PNGs
// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.

namespace cxrssl::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, usage = 1, data_error = 2, numerical = 3 };

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

namespace detail {

inline void write_text_atomic(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) {
            throw DataError("cannot write " + tmp.string());
        }
        f << text;
        if (!f) {
            throw DataError("failed writing " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

inline std::string read_text(const fs::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("cannot open " + path.string());
    }
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Creates the run directory. An existing non-empty directory is refused
/// unless `force` (its contents are then removed) or `resume`.
inline void prepare_run_dir(const fs::path& run, bool force, bool resume) {
    if (resume) {
        if (!fs::is_directory(run)) {
            throw UsageError("cannot resume: run directory " + run.string() + " does not exist");
        }
        return;
    }
    if (fs::exists(run) && !fs::is_empty(run)) {
        if (!force) {
            throw UsageError("run directory " + run.string() + " already exists; pass --force to overwrite");
        }
        fs::remove_all(run);
    }
    for (const char* sub : {"checkpoints", "logs", "reports", "heatmaps"}) {
        fs::create_directories(run / sub);
    }
}

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool force = false;
    bool resume = false;
};

/// Config file overlaid on defaults, then `--seed`, then `inherited`. A missing
/// seed is an error in deterministic mode and is otherwise drawn once and
/// recorded in the snapshot.
inline config::TrainConfig resolve_config(const CommonOptions& o, Streams io,
                                          std::optional<std::uint64_t> inherited = std::nullopt) {
    config::TrainConfig cfg;
    if (!o.config_path.empty()) {
        cfg = config::load_config(o.config_path).config;
    }
    if (o.seed) {
        cfg.seed = o.seed;
    }
    if (!cfg.seed) {
        cfg.seed = inherited;
    }
    if (!cfg.seed) {
        if (pipeline::deterministic_mode()) {
            throw UsageError("CXR_SSLX_DETERMINISTIC=1 requires a seed (--seed or `seed` in the config)");
        }
        std::random_device rd;
        cfg.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        io.err << "no seed given; using " << *cfg.seed << " (recorded in config.snapshot)\n";
    }
    cfg.validate();
    return cfg;
}

inline data::DatasetManifest scan_and_split(const fs::path& root, double ratio, std::uint64_t seed, Streams io) {
    const data::ScanReport scan = data::scan_dataset(root);
    for (const auto& w : scan.warnings) {
        io.err << "warning: " << w << "\n";
    }
    for (const auto& s : scan.skipped) {
        io.err << "skipped " << s.path << ": " << s.reason << "\n";
    }
    if (scan.manifest.records.empty()) {
        throw DataError("no images found under " + root.string());
    }
    return data::split(scan.manifest, ratio, seed);
}

inline std::string fmt(double v, int digits = 4) {
    if (!std::isfinite(v)) {
        return "nan";
    }
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

inline std::string fmt(const metrics::MetricValue& m) { return m.defined ? fmt(m.value) : "undefined"; }

inline std::string report_table(const metrics::EvalReport& r) {
    std::ostringstream ss;
    ss << "Sen " << fmt(r.sen) << "  Spe " << fmt(r.spe) << "  HM " << fmt(r.hm) << "  AUC " << fmt(r.auc) << "  Acc "
       << fmt(r.acc) << "\n";
    return ss.str();
}

inline std::string report_csv(const metrics::EvalReport& r) {
    std::ostringstream ss;
    ss << "metric,value\n";
    ss << "sen," << fmt(r.sen) << "\nspe," << fmt(r.spe) << "\nhm," << fmt(r.hm) << "\nauc," << fmt(r.auc) << "\nacc,"
       << fmt(r.acc) << "\n";
    return ss.str();
}

inline std::string aggregate_csv(const std::map<std::string, pipeline::MeanVariance>& agg) {
    std::ostringstream ss;
    ss << "metric,mean,variance\n";
    for (const auto& name : pipeline::metric_names()) {
        const auto& mv = agg.at(name);
        ss << name << "," << (mv.defined ? fmt(mv.mean, 6) : "undefined") << ","
           << (mv.defined ? fmt(mv.variance, 8) : "undefined") << "\n";
    }
    return ss.str();
}

inline fs::path require_data_root(const std::string& root) {
    if (root.empty()) {
        throw UsageError("--data is required");
    }
    if (!fs::is_directory(root)) {
        throw DataError("data root '" + root + "' does not exist or is not a directory");
    }
    return root;
}

inline std::optional<ParameterSet<float>> load_backbone_weights(const std::string& path) {
    const auto env = checkpoint::load(path);
    checkpoint::require_stage(env, {checkpoint::Stage::external_backbone, checkpoint::Stage::ssl_pretrained},
                              "transfer initialization");
    return pipeline::backbone_from(env);
}

} // namespace detail

// --------------------------------------------------------------------------

struct SslPretrainArgs {
    detail::CommonOptions common;
    std::string data_root;
    std::string backbone_weights;
};

inline int cmd_ssl_pretrain(const SslPretrainArgs& a, Streams io) {
    const fs::path run = a.common.out_dir;
    config::TrainConfig cfg;
    std::optional<checkpoint::CheckpointEnvelope> resume;
    data::DatasetManifest manifest;
    if (a.common.resume) {
        detail::prepare_run_dir(run, false, true);
        resume = checkpoint::load(run / "checkpoints" / "ssl.ckpt");
        cfg = resume->config;
        manifest = data::load_manifest(run / "manifest.tsv");
    } else {
        cfg = detail::resolve_config(a.common, io);
        if (!a.backbone_weights.empty()) {
            cfg.backbone_weights = a.backbone_weights;
        }
        if (!config::uses_ssl(cfg.init_mode)) {
            throw UsageError("init_mode " + config::to_string(cfg.init_mode) +
                             " has no self-supervised stage (use transfer_ssl or ssl_only)");
        }
        if (config::uses_transfer(cfg.init_mode) && cfg.backbone_weights.empty()) {
            throw UsageError("init_mode transfer_ssl needs --backbone-weights or `backbone_weights` in the config");
        }
        manifest = detail::scan_and_split(detail::require_data_root(a.data_root), cfg.train_ratio, cfg.require_seed(), io);
        detail::prepare_run_dir(run, a.common.force, false);
        detail::write_text_atomic(run / "config.snapshot", config::to_text(cfg));
        data::save_manifest(run / "manifest.tsv", manifest);
    }

    pipeline::SslRunOptions opts;
    if (!resume && config::uses_transfer(cfg.init_mode)) {
        opts.initial_backbone = detail::load_backbone_weights(cfg.backbone_weights);
    }
    opts.resume = resume ? &*resume : nullptr;
    opts.on_epoch = [&](std::size_t epoch, double loss, const checkpoint::CheckpointEnvelope& env) {
        checkpoint::save(run / "checkpoints" / "ssl.ckpt", env);
        detail::write_text_atomic(run / "logs" / "epochs.txt", env.log);
        io.out << "ssl epoch " << epoch << "/" << cfg.ssl_epochs << " loss " << detail::fmt(loss, 6) << "\n";
    };
    const auto view = data::unlabeled(manifest, data::Split::train);
    io.out << "self-supervised pre-training on " << view.paths.size() << " unlabeled images\n";
    const auto env = pipeline::run_ssl_pretraining(cfg, view, opts);
    checkpoint::save(run / "checkpoints" / "ssl.ckpt", env);
    detail::write_text_atomic(run / "logs" / "epochs.txt", env.log);
    io.out << "wrote " << (run / "checkpoints" / "ssl.ckpt").string() << "\n";
    return ok;
}

struct FinetuneArgs {
    detail::CommonOptions common;
    std::string data_root;
    std::string init_checkpoint;
    bool scratch = false;
    std::optional<double> label_fraction;
};

inline int cmd_finetune(const FinetuneArgs& a, Streams io) {
    const fs::path run = a.common.out_dir;
    config::TrainConfig cfg;
    std::optional<checkpoint::CheckpointEnvelope> resume;
    std::optional<ParameterSet<float>> backbone;
    data::DatasetManifest manifest;
    if (a.common.resume) {
        detail::prepare_run_dir(run, false, true);
        resume = checkpoint::load(run / "checkpoints" / "finetuned.ckpt");
        cfg = resume->config;
        manifest = data::load_manifest(run / "manifest.tsv");
    } else {
        if (a.scratch == !a.init_checkpoint.empty()) {
            throw UsageError("pass exactly one of --init <checkpoint> or --scratch");
        }
        std::optional<checkpoint::CheckpointEnvelope> init;
        if (!a.scratch) {
            init = checkpoint::load(a.init_checkpoint);
            checkpoint::require_stage(*init, {checkpoint::Stage::external_backbone, checkpoint::Stage::ssl_pretrained},
                                      "fine-tuning");
        }
        cfg = detail::resolve_config(a.common, io, init ? init->config.seed : std::nullopt);
        if (a.label_fraction) {
            cfg.label_fraction = *a.label_fraction;
        }
        // After self-supervised pre-training the split follows that run, so
        // images it held out stay unseen.
        std::uint64_t split_seed = cfg.require_seed();
        if (a.scratch) {
            cfg.init_mode = config::InitMode::scratch;
        } else {
            backbone = pipeline::backbone_from(*init);
            if (init->stage == checkpoint::Stage::external_backbone) {
                cfg.init_mode = config::InitMode::transfer;
            } else {
                cfg.init_mode = init->config.init_mode;
                cfg.backbone_weights = init->config.backbone_weights;
                cfg.train_ratio = init->config.train_ratio;
                split_seed = init->config.require_seed();
            }
        }
        cfg.validate();
        manifest = detail::scan_and_split(detail::require_data_root(a.data_root), cfg.train_ratio, split_seed, io);
        detail::prepare_run_dir(run, a.common.force, false);
        detail::write_text_atomic(run / "config.snapshot", config::to_text(cfg));
        data::save_manifest(run / "manifest.tsv", manifest);
    }

    pipeline::FinetuneRunOptions opts;
    opts.initial_backbone = backbone;
    opts.resume = resume ? &*resume : nullptr;
    opts.on_start = [&](std::size_t train, std::size_t test) {
        io.out << "fine-tuning (" << config::to_string(cfg.init_mode) << ", label fraction "
               << detail::fmt(cfg.label_fraction, 4) << ") on " << train << " training images; evaluating on " << test
               << " test images\n";
    };
    opts.on_epoch = [&](const pipeline::EpochLog& log, const checkpoint::CheckpointEnvelope& env) {
        checkpoint::save(run / "checkpoints" / "finetuned.ckpt", env);
        detail::write_text_atomic(run / "logs" / "epochs.txt", env.log);
        io.out << "epoch " << log.epoch << "/" << cfg.finetune_epochs << " loss " << detail::fmt(log.train_loss, 5)
               << "  " << detail::report_table(log.eval);
    };
    const auto result = pipeline::run_finetune(cfg, manifest, opts);
    checkpoint::save(run / "checkpoints" / "finetuned.ckpt", result.envelope);
    detail::write_text_atomic(run / "logs" / "epochs.txt", result.envelope.log);
    if (!result.logs.empty()) {
        detail::write_text_atomic(run / "reports" / "confusion.csv",
                                  metrics::confusion_csv(result.logs.back().eval.confusion));
        const std::size_t k = std::min(cfg.eval_last_k, result.logs.size());
        if (k < cfg.eval_last_k) {
            io.err << "warning: only " << result.logs.size() << " epochs logged; aggregating the last " << k << "\n";
        }
        const auto agg = pipeline::aggregate_last_k(result.logs, k);
        detail::write_text_atomic(run / "reports" / "last_k.csv", detail::aggregate_csv(agg));
        io.out << "last-" << k << " mean: Sen " << detail::fmt(agg.at("sen").mean) << "  Spe "
               << detail::fmt(agg.at("spe").mean) << "  HM " << detail::fmt(agg.at("hm").mean) << "  AUC "
               << detail::fmt(agg.at("auc").mean) << "  Acc " << detail::fmt(agg.at("acc").mean) << "\n";
    }
    return ok;
}

struct EvaluateArgs {
    std::string checkpoint;
    std::string data_root;
    std::string out_dir;
    bool all_images = false;
};

inline int cmd_evaluate(const EvaluateArgs& a, Streams io) {
    const auto env = checkpoint::load(a.checkpoint);
    const auto model = pipeline::classifier_from(env);
    const config::TrainConfig& cfg = env.config;
    detail::require_data_root(a.data_root);
    std::vector<data::SampleRecord> records;
    if (a.all_images) {
        records = data::scan_dataset(a.data_root).manifest.records;
    } else {
        records = detail::scan_and_split(a.data_root, cfg.train_ratio, cfg.require_seed(), io)
                      .with_split(data::Split::test);
    }
    if (records.empty()) {
        throw DataError("no images to evaluate under " + a.data_root);
    }
    const auto report = pipeline::evaluate_model(model, records, cfg);
    io.out << "evaluated " << records.size() << " images\n" << detail::report_table(report);
    io.out << metrics::confusion_csv(report.confusion);
    if (!a.out_dir.empty()) {
        detail::write_text_atomic(fs::path(a.out_dir) / "eval_report.csv", detail::report_csv(report));
        detail::write_text_atomic(fs::path(a.out_dir) / "confusion.csv", metrics::confusion_csv(report.confusion));
    }
    return ok;
}

struct ExplainArgs {
    std::string checkpoint;
    std::vector<std::string> images;
    std::string out_dir;
    std::string class_name;
    std::string colormap = "jet";
    double alpha = 0.4;
};

inline int cmd_explain(const ExplainArgs& a, Streams io) {
    const auto env = checkpoint::load(a.checkpoint);
    const auto model = pipeline::classifier_from(env);
    const config::TrainConfig& cfg = env.config;
    std::optional<data::ClassLabel> forced;
    if (!a.class_name.empty()) {
        forced = data::parse_class_name(a.class_name);
        if (!forced) {
            throw UsageError("unknown class '" + a.class_name + "'");
        }
    }
    explain::colormap(a.colormap, 0.0f); // validate the name before any work
    for (const auto& path : a.images) {
        const Tensor<float> original = data::load_image(path, cfg.input_channels);
        const Tensor<float> input = pipeline::detail::classifier_input(path, cfg);
        data::ClassLabel cls;
        if (forced) {
            cls = *forced;
        } else {
            auto& params = const_cast<ParameterSet<float>&>(model.params);
            const auto logits = model.arch.seq->forward(
                params, input.reshaped({1, input.dim(0), input.dim(1), input.dim(2)}), nn::Mode::eval);
            cls = metrics::argmax_class(logits.row(0));
        }
        explain::Heatmap hm = explain::gradcampp(model.arch, model.params, input, cls);
        if (hm.degenerate) {
            io.err << "warning: " << path << ": no gradient signal for class " << data::class_name(cls)
                   << "; heatmap is all zeros\n";
        }
        // Render at the source resolution.
        Tensor<float> values({1, hm.height(), hm.width()}, hm.values.storage());
        hm.values = augment::resize_bilinear(values, original.dim(1), original.dim(2))
                        .reshaped({original.dim(1), original.dim(2)});
        const fs::path out = fs::path(a.out_dir) / explain::overlay_filename(path, cls);
        fs::create_directories(a.out_dir);
        explain::overlay(out, original, hm, a.colormap, static_cast<float>(a.alpha));
        io.out << out.string() << "\n";
    }
    return ok;
}

struct ReportArgs {
    std::vector<std::string> runs;
    std::string out_dir;
};

/// Comparison table over fine-tuning runs plus fraction-vs-metric curve data.
inline int cmd_report(const ReportArgs& a, Streams io) {
    std::ostringstream table, curve;
    table << "run,init_mode,label_fraction,epochs,k";
    for (const auto& m : pipeline::metric_names()) {
        table << "," << m << "_mean," << m << "_var";
    }
    table << "\n";
    curve << "init_mode,label_fraction,sen,spe,hm,auc,acc\n";
    for (const auto& run : a.runs) {
        const auto env = checkpoint::load(fs::path(run) / "checkpoints" / "finetuned.ckpt");
        const auto logs = pipeline::parse_records(env.log);
        if (logs.empty()) {
            throw DataError("run " + run + " has no fine-tuning epochs");
        }
        const std::size_t k = std::min(env.config.eval_last_k, logs.size());
        const auto agg = pipeline::aggregate_last_k(logs, k);
        table << fs::path(run).filename().string() << "," << config::to_string(env.config.init_mode) << ","
              << env.config.label_fraction << "," << logs.size() << "," << k;
        for (const auto& m : pipeline::metric_names()) {
            const auto& mv = agg.at(m);
            table << "," << (mv.defined ? detail::fmt(mv.mean, 6) : "undefined") << ","
                  << (mv.defined ? detail::fmt(mv.variance, 8) : "undefined");
        }
        table << "\n";
        curve << config::to_string(env.config.init_mode) << "," << env.config.label_fraction;
        for (const char* m : {"sen", "spe", "hm", "auc", "acc"}) {
            const auto& mv = agg.at(m);
            curve << "," << (mv.defined ? detail::fmt(mv.mean, 6) : "undefined");
        }
        curve << "\n";
    }
    io.out << table.str();
    if (!a.out_dir.empty()) {
        detail::write_text_atomic(fs::path(a.out_dir) / "comparison.csv", table.str());
        detail::write_text_atomic(fs::path(a.out_dir) / "fraction_curve.csv", curve.str());
    }
    return ok;
}

struct ExportArgs {
    std::string checkpoint;
    std::string out;
};

inline int cmd_export_backbone(const ExportArgs& a, Streams io) {
    checkpoint::save(a.out, pipeline::export_backbone(checkpoint::load(a.checkpoint)));
    io.out << "wrote " << a.out << "\n";
    return ok;
}

struct SynthArgs {
    std::string out;
    std::size_t per_class = 100;
    std::size_t size = 128;
    std::uint64_t seed = 0;
    std::string task = "texture";
};

inline int cmd_synth(const SynthArgs& a, Streams io) {
    synthetic::Settings st;
    st.size = a.size;
    st.patch_size = std::min<std::size_t>(st.patch_size, a.size);
    synthetic::Task task;
    if (a.task == "texture") {
        task = synthetic::Task::localized_texture;
    } else if (a.task == "orientation") {
        task = synthetic::Task::global_orientation;
    } else {
        throw UsageError("unknown synthetic task '" + a.task + "' (expected texture or orientation)");
    }
    synthetic::write_dataset(a.out, task, a.per_class, a.seed, st);
    io.out << "wrote " << a.per_class * data::kNumClasses << " images under " << a.out << "\n";
    return ok;
}

// --------------------------------------------------------------------------

/// Parses `args` (args[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, Streams io) {
    CLI::App app{"Self-supervised transfer learning for chest X-ray classification"};
    app.require_subcommand(1);

    auto add_common = [](CLI::App* sub, detail::CommonOptions& c) {
        sub->add_option("--config", c.config_path, "config file (key = value lines)")->check(CLI::ExistingFile);
        sub->add_option("--seed", c.seed, "master seed for every stochastic component");
        sub->add_option("--out", c.out_dir, "run directory")->required();
        sub->add_flag("--force", c.force, "overwrite an existing run directory");
        sub->add_flag("--resume", c.resume, "continue the run in --out from its last checkpoint");
    };

    SslPretrainArgs ssl;
    auto* ssl_cmd = app.add_subcommand("ssl-pretrain", "self-supervised pre-training on unlabeled training images");
    add_common(ssl_cmd, ssl.common);
    ssl_cmd->add_option("--data", ssl.data_root, "dataset root with one directory per class");
    ssl_cmd->add_option("--backbone-weights", ssl.backbone_weights, "external backbone checkpoint (transfer_ssl)");

    FinetuneArgs ft;
    auto* ft_cmd = app.add_subcommand("finetune", "supervised fine-tuning with per-epoch evaluation");
    add_common(ft_cmd, ft.common);
    ft_cmd->add_option("--data", ft.data_root, "dataset root");
    ft_cmd->add_option("--init", ft.init_checkpoint, "SSL or external backbone checkpoint");
    ft_cmd->add_flag("--scratch", ft.scratch, "random initialization");
    ft_cmd->add_option("--label-fraction", ft.label_fraction, "stratified fraction of labeled training data");

    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "metrics of a fine-tuned checkpoint");
    ev_cmd->add_option("--checkpoint", ev.checkpoint)->required();
    ev_cmd->add_option("--data", ev.data_root, "dataset root")->required();
    ev_cmd->add_option("--out", ev.out_dir, "directory for eval_report.csv and confusion.csv");
    ev_cmd->add_flag("--all", ev.all_images, "evaluate every image instead of the held-out split");

    ExplainArgs ex;
    auto* ex_cmd = app.add_subcommand("explain", "Grad-CAM++ overlays");
    ex_cmd->add_option("--checkpoint", ex.checkpoint)->required();
    ex_cmd->add_option("--out", ex.out_dir, "output directory")->required();
    ex_cmd->add_option("--class", ex.class_name, "target class (default: predicted)");
    ex_cmd->add_option("--colormap", ex.colormap, "jet or bluered");
    ex_cmd->add_option("--alpha", ex.alpha, "blend factor")->check(CLI::Range(0.0, 1.0));
    ex_cmd->add_option("images", ex.images, "input PNG files")->required();

    ReportArgs rp;
    auto* rp_cmd = app.add_subcommand("report", "comparison table over fine-tuning runs");
    rp_cmd->add_option("runs", rp.runs, "run directories")->required();
    rp_cmd->add_option("--out", rp.out_dir, "directory for comparison.csv and fraction_curve.csv");

    ExportArgs xb;
    auto* xb_cmd = app.add_subcommand("export-backbone", "extract backbone weights as an external checkpoint");
    xb_cmd->add_option("--checkpoint", xb.checkpoint)->required();
    xb_cmd->add_option("--out", xb.out)->required();

    SynthArgs sy;
    auto* sy_cmd = app.add_subcommand("synth", "write a synthetic 4-class dataset");
    sy_cmd->add_option("--out", sy.out)->required();
    sy_cmd->add_option("--per-class", sy.per_class);
    sy_cmd->add_option("--size", sy.size);
    sy_cmd->add_option("--seed", sy.seed);
    sy_cmd->add_option("--task", sy.task, "texture or orientation");

    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        io.out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        io.out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        io.err << "error: " << e.what() << "\n";
        return usage;
    }

    try {
        if (ssl_cmd->parsed()) return cmd_ssl_pretrain(ssl, io);
        if (ft_cmd->parsed()) return cmd_finetune(ft, io);
        if (ev_cmd->parsed()) return cmd_evaluate(ev, io);
        if (ex_cmd->parsed()) return cmd_explain(ex, io);
        if (rp_cmd->parsed()) return cmd_report(rp, io);
        if (xb_cmd->parsed()) return cmd_export_backbone(xb, io);
        if (sy_cmd->parsed()) return cmd_synth(sy, io);
    } catch (const UsageError& e) {
        io.err << "usage error: " << e.what() << "\n";
        return usage;
    } catch (const NumericalError& e) {
        io.err << "numerical failure: " << e.what() << "\n";
        return numerical;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << "\n";
        return data_error;
    }
    return usage;
}

} // namespace cxrssl::cli
