#include <gtest/gtest.h>

#include <cmath>

#include "pipeline_fixtures.hpp"

namespace cxrssl::pipeline {
namespace {

using config::InitMode;
using testing::synthetic_corpus;
using testing::tiny_config;

TEST(SslPretraining, SmokeEightImages) {
    testing::TempDir dir;
    synthetic::Settings st;
    st.size = 128;
    st.patch_size = 32;
    synthetic::write_dataset(dir.path(), synthetic::Task::localized_texture, 2, 1, st);
    const auto manifest = data::scan_dataset(dir.path()).manifest;
    ASSERT_EQ(manifest.records.size(), 8u);
    auto cfg = tiny_config(128);
    cfg.init_mode = InitMode::ssl_only;
    data::UnlabeledView view;
    for (const auto& r : manifest.records) {
        view.paths.push_back(r.path);
    }
    std::vector<double> seen;
    SslRunOptions opts;
    opts.on_epoch = [&](std::size_t, double loss, const CheckpointEnvelope&) { seen.push_back(loss); };
    const auto env = run_ssl_pretraining(cfg, view, opts);
    EXPECT_EQ(env.stage, Stage::ssl_pretrained);
    EXPECT_EQ(env.epoch, 2u);
    ASSERT_EQ(seen.size(), 2u);
    for (double l : seen) {
        EXPECT_TRUE(std::isfinite(l));
    }
    const auto state = ssl_state_from(env);
    EXPECT_EQ(state.epoch_losses, seen);
    EXPECT_TRUE(env.blobs.contains("predictor.fc1.weight"));
    EXPECT_TRUE(env.blobs.contains("target.backbone.stage0.conv.weight"));
    EXPECT_TRUE(env.blobs.contains("optimizer.velocity.backbone.stage0.conv.weight"));
}

TEST(SslPretraining, DefaultScheduleAndPreconditions) {
    const config::TrainConfig defaults;
    EXPECT_EQ(defaults.ssl_epochs, 40u);
    EXPECT_EQ(defaults.batch_size, 256u);
    auto cfg = tiny_config(16);
    cfg.init_mode = InitMode::transfer;
    EXPECT_THROW(run_ssl_pretraining(cfg, {{"a.png", "b.png"}}), UsageError);
    cfg.init_mode = InitMode::transfer_ssl;
    EXPECT_THROW(run_ssl_pretraining(cfg, {{"a.png", "b.png"}}), UsageError);
    cfg.init_mode = InitMode::ssl_only;
    EXPECT_THROW(run_ssl_pretraining(cfg, {{"a.png"}}), DataError);
    cfg.seed.reset();
    EXPECT_THROW(run_ssl_pretraining(cfg, {{"a.png", "b.png"}}), UsageError);
}

TEST(SslPretraining, DeterministicAndLabelBlind) {
    testing::TempDir dir;
    auto manifest = synthetic_corpus(dir.path(), 4, 24, 3);
    auto cfg = tiny_config(24);
    cfg.init_mode = InitMode::ssl_only;
    const auto a = run_ssl_pretraining(cfg, data::unlabeled(manifest, data::Split::train));
    const auto b = run_ssl_pretraining(cfg, data::unlabeled(manifest, data::Split::train));
    EXPECT_EQ(checkpoint::serialize(a), checkpoint::serialize(b));
    for (auto& r : manifest.records) {
        r.label = data::ClassLabel::normal;
    }
    const auto c = run_ssl_pretraining(cfg, data::unlabeled(manifest, data::Split::train));
    EXPECT_EQ(checkpoint::serialize(a), checkpoint::serialize(c));
    cfg.seed = 8;
    const auto d = run_ssl_pretraining(cfg, data::unlabeled(manifest, data::Split::train));
    EXPECT_NE(checkpoint::serialize(a), checkpoint::serialize(d));
}

TEST(SslPretraining, ResumeMatchesUninterruptedRun) {
    testing::TempDir dir;
    const auto manifest = synthetic_corpus(dir.path(), 3, 24, 5);
    auto cfg = tiny_config(24);
    cfg.init_mode = InitMode::ssl_only;
    cfg.ssl_epochs = 3;
    const auto view = data::unlabeled(manifest, data::Split::train);
    const auto full = run_ssl_pretraining(cfg, view);

    SslRunOptions first;
    first.stop_after_epoch = 1;
    const auto partial = run_ssl_pretraining(cfg, view, first);
    EXPECT_EQ(partial.epoch, 1u);
    checkpoint::save(dir.path() / "ssl.ckpt", partial);
    const auto reloaded = checkpoint::load(dir.path() / "ssl.ckpt");
    SslRunOptions rest;
    rest.resume = &reloaded;
    const auto resumed = run_ssl_pretraining(reloaded.config, view, rest);
    EXPECT_EQ(checkpoint::serialize(resumed), checkpoint::serialize(full));
}

TEST(SslPretraining, TransferWeightsSeedTheOnlineBackbone) {
    testing::TempDir dir;
    const auto manifest = synthetic_corpus(dir.path(), 2, 16, 5);
    auto cfg = tiny_config(16);
    cfg.init_mode = InitMode::transfer_ssl;
    cfg.ssl_epochs = 0;
    Rng rng(4);
    const auto external = nn::init_backbone_params<float>(cfg.backbone_spec(), rng);
    SslRunOptions opts;
    opts.initial_backbone = external;
    const auto env = run_ssl_pretraining(cfg, data::unlabeled(manifest, data::Split::train), opts);
    EXPECT_EQ(backbone_from(env), external);
}

TEST(AttachClassifier, ShapesSeedsAndMismatch) {
    auto cfg = tiny_config(16);
    Rng rng(1);
    const auto bb = nn::init_backbone_params<float>(cfg.backbone_spec(), rng);
    const auto a = attach_classifier(cfg.backbone_spec(), bb, 4, 11);
    const auto b = attach_classifier(cfg.backbone_spec(), bb, 4, 11);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.params.subset("backbone."), bb);
    EXPECT_FALSE(a.params.contains("projector.fc1.weight"));
    auto& p = const_cast<ParameterSet<float>&>(a.params);
    const auto logits = a.arch.seq->forward(p, Tensor<float>({5, 1, 16, 16}), nn::Mode::eval);
    EXPECT_EQ(logits.shape(), (Shape{5, 4}));

    nn::BackboneSpec other = cfg.backbone_spec();
    other.widths = {4, 16};
    EXPECT_THROW(attach_classifier(other, bb, 4, 11), ShapeMismatch);

    CheckpointEnvelope finetuned;
    finetuned.stage = Stage::finetuned;
    finetuned.blobs = bb;
    EXPECT_THROW(attach_classifier(finetuned, cfg.backbone_spec(), 4, 1), UsageError);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
    Rng rng(6);
    Tensor<float> logits({3, 4});
    for (auto& v : logits.values()) {
        v = normal<float>(rng, 0.0f, 2.0f);
    }
    const std::vector<data::ClassLabel> y{data::ClassLabel::covid, data::ClassLabel::normal,
                                          data::ClassLabel::viral_pneumonia};
    Tensor<float> grad;
    cross_entropy(logits, y, grad);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        Tensor<float> hi = logits, lo = logits, scratch;
        hi[i] += 1e-2f;
        lo[i] -= 1e-2f;
        const double fd = (cross_entropy(hi, y, scratch) - cross_entropy(lo, y, scratch)) / 2e-2;
        EXPECT_NEAR(grad[i], fd, 1e-3);
    }
    Tensor<float> uniform_logits({2, 4});
    EXPECT_NEAR(cross_entropy(uniform_logits, std::vector<data::ClassLabel>(2), grad), std::log(4.0), 1e-9);
}

/// Linearly separable toy problem: class c has mean brightness 0.15 + 0.23 c.
data::DatasetManifest brightness_corpus(const std::filesystem::path& root, std::size_t per_class) {
    Rng rng(21);
    for (data::ClassLabel cls : data::kAllClasses) {
        const auto dir = root / data::class_name(cls);
        std::filesystem::create_directories(dir);
        for (std::size_t i = 0; i < per_class; ++i) {
            Tensor<float> img({1, 12, 12});
            for (auto& v : img.values()) {
                v = std::clamp(0.15f + 0.23f * static_cast<float>(data::index_of(cls)) + normal<float>(rng, 0.0f, 0.03f),
                               0.0f, 1.0f);
            }
            io::write_png(dir / ("b" + std::to_string(i) + ".png"), img);
        }
    }
    return data::split(data::scan_dataset(root).manifest, 0.8, 3);
}

TEST(Finetune, SeparableToyReachesHighAccuracy) {
    testing::TempDir dir;
    const auto manifest = brightness_corpus(dir.path(), 20);
    auto cfg = tiny_config(12);
    cfg.init_mode = InitMode::scratch;
    cfg.finetune_epochs = 30;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.05;
    std::size_t train_count = 0;
    FinetuneRunOptions opts;
    opts.on_start = [&](std::size_t train, std::size_t) { train_count = train; };
    const auto result = run_finetune(cfg, manifest, opts);
    EXPECT_EQ(train_count, 64u);
    ASSERT_EQ(result.logs.size(), 30u);
    for (std::size_t e = 0; e < result.logs.size(); ++e) {
        EXPECT_EQ(result.logs[e].epoch, e + 1);
    }
    EXPECT_GT(result.logs.back().eval.acc.value, 0.9);
}

TEST(Finetune, ResumeDeterminismAndRecords) {
    testing::TempDir dir;
    const auto manifest = synthetic_corpus(dir.path(), 5, 16, 9);
    auto cfg = tiny_config(16);
    cfg.init_mode = InitMode::scratch;
    cfg.finetune_epochs = 3;
    const auto full = run_finetune(cfg, manifest);
    const auto again = run_finetune(cfg, manifest);
    EXPECT_EQ(checkpoint::serialize(full.envelope), checkpoint::serialize(again.envelope));
    EXPECT_EQ(full.logs, again.logs);

    FinetuneRunOptions first;
    first.stop_after_epoch = 2;
    const auto partial = run_finetune(cfg, manifest, first);
    checkpoint::save(dir.path() / "ft.ckpt", partial.envelope);
    const auto reloaded = checkpoint::load(dir.path() / "ft.ckpt");
    FinetuneRunOptions rest;
    rest.resume = &reloaded;
    const auto resumed = run_finetune(reloaded.config, manifest, rest);
    EXPECT_EQ(checkpoint::serialize(resumed.envelope), checkpoint::serialize(full.envelope));
    EXPECT_EQ(resumed.logs, full.logs);

    for (const auto& log : full.logs) {
        EXPECT_EQ(parse_record(nlohmann::json::parse(to_record(log))), log);
    }
    const auto model = classifier_from(full.envelope);
    EXPECT_EQ(evaluate_model(model, manifest.with_split(data::Split::test), cfg), full.logs.back().eval);
}

TEST(Finetune, PreconditionsAndVariantPlumbing) {
    testing::TempDir dir;
    const auto manifest = synthetic_corpus(dir.path(), 5, 16, 2);
    auto cfg = tiny_config(16);
    cfg.finetune_epochs = 1;
    cfg.ssl_epochs = 1;
    Rng rng(3);
    const auto external = nn::init_backbone_params<float>(cfg.backbone_spec(), rng);

    cfg.init_mode = InitMode::transfer;
    EXPECT_THROW(run_finetune(cfg, manifest), UsageError);
    EXPECT_THROW(run_variant(cfg, manifest, std::nullopt), UsageError);
    const auto transfer = run_variant(cfg, manifest, external);
    EXPECT_FALSE(transfer.ssl.has_value());

    cfg.init_mode = InitMode::scratch;
    FinetuneRunOptions with_weights;
    with_weights.initial_backbone = external;
    EXPECT_THROW(run_finetune(cfg, manifest, with_weights), UsageError);
    EXPECT_FALSE(run_variant(cfg, manifest, external).ssl.has_value());

    cfg.init_mode = InitMode::transfer_ssl;
    const auto ours = run_variant(cfg, manifest, external);
    ASSERT_TRUE(ours.ssl.has_value());
    EXPECT_NE(backbone_from(*ours.ssl), external);

    cfg.init_mode = InitMode::ssl_only;
    EXPECT_TRUE(run_variant(cfg, manifest, std::nullopt).ssl.has_value());

    auto no_test = manifest;
    for (auto& r : no_test.records) {
        r.split = data::Split::train;
    }
    cfg.init_mode = InitMode::scratch;
    EXPECT_THROW(run_finetune(cfg, no_test), DataError);
}

TEST(ExportBackbone, KeepsOnlyBackboneBlobs) {
    CheckpointEnvelope env;
    env.stage = Stage::finetuned;
    env.blobs.add("backbone.stage0.conv.weight", Tensor<float>({1}));
    env.blobs.add("head.weight", Tensor<float>({1}));
    const auto out = export_backbone(env);
    EXPECT_EQ(out.stage, Stage::external_backbone);
    EXPECT_EQ(out.blobs.names(), std::vector<std::string>{"backbone.stage0.conv.weight"});
    env.blobs = {};
    EXPECT_THROW(export_backbone(env), DataError);
}

EpochLog log_with_acc(std::size_t epoch, double acc) {
    EpochLog l;
    l.epoch = epoch;
    l.eval.acc = metrics::MetricValue::of(acc);
    l.eval.sen = metrics::MetricValue::of(acc);
    return l;
}

TEST(AggregateLastK, Examples) {
    std::vector<EpochLog> logs;
    for (std::size_t e = 1; e <= 12; ++e) {
        logs.push_back(log_with_acc(e, e <= 2 ? 0.1 : 0.9));
    }
    const auto agg = aggregate_last_k(logs, 10);
    EXPECT_DOUBLE_EQ(agg.at("acc").mean, 0.9);
    EXPECT_DOUBLE_EQ(agg.at("acc").variance, 0.0);
    EXPECT_FALSE(agg.at("auc").defined);

    const std::vector<EpochLog> two{log_with_acc(1, 0.0), log_with_acc(2, 1.0)};
    const auto a2 = aggregate_last_k(two, 2);
    EXPECT_DOUBLE_EQ(a2.at("acc").mean, 0.5);
    EXPECT_DOUBLE_EQ(a2.at("acc").variance, 0.25);
    EXPECT_THROW(aggregate_last_k(two, 3), UsageError);
    EXPECT_THROW(aggregate_last_k(two, 0), UsageError);
}

TEST(Synthetic, DeterministicAndClassDependent) {
    synthetic::Settings st;
    st.size = 32;
    st.patch_size = 12;
    const auto a = synthetic::render(synthetic::Task::localized_texture, data::ClassLabel::covid, 5, st);
    const auto b = synthetic::render(synthetic::Task::localized_texture, data::ClassLabel::covid, 5, st);
    const auto c = synthetic::render(synthetic::Task::localized_texture, data::ClassLabel::normal, 5, st);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(a.shape(), (Shape{1, 32, 32}));
    for (float v : a.values()) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 1.0f);
    }
}

} // namespace
} // namespace cxrssl::pipeline
