#pragma once

#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "cxrssl/augment.hpp"
#include "cxrssl/checkpoint.hpp"
#include "cxrssl/config.hpp"
#include "cxrssl/data.hpp"
#include "cxrssl/metrics.hpp"
#include "cxrssl/nn/models.hpp"
#include "cxrssl/nn/optimizer.hpp"
#include "cxrssl/ssl/learner.hpp"

namespace cxrssl::pipeline {

using checkpoint::CheckpointEnvelope;
using checkpoint::Stage;
using config::TrainConfig;
using data::ClassLabel;

/// True when CXR_SSLX_DETERMINISTIC=1.
inline bool deterministic_mode() {
    const char* v = std::getenv("CXR_SSLX_DETERMINISTIC");
    return v != nullptr && std::string(v) == "1";
}

namespace detail {

inline ParameterSet<float> with_velocity(ParameterSet<float> blobs, const nn::SgdMomentum<float>& opt) {
    blobs.merge(opt.velocity().prefixed(checkpoint::kVelocityPrefix));
    return blobs;
}

inline void restore_velocity(nn::SgdMomentum<float>& opt, const ParameterSet<float>& blobs) {
    opt.velocity() = blobs.subset(checkpoint::kVelocityPrefix, true);
}

inline std::vector<nlohmann::json> parse_log_lines(const std::string& log) {
    std::vector<nlohmann::json> out;
    std::stringstream ss(log);
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty()) {
            out.push_back(nlohmann::json::parse(line));
        }
    }
    return out;
}

/// Stacks single images (C, H, W) into one (N, C, H, W) batch.
inline Tensor<float> stack_images(const std::vector<Tensor<float>>& images) { return stack<float>(images); }

/// Fine-tuning and evaluation input: the decoded image resized to the configured resolution.
inline Tensor<float> classifier_input(const std::string& path, const TrainConfig& cfg) {
    Tensor<float> img = data::load_image(path, cfg.input_channels);
    if (img.dim(1) != cfg.finetune_resolution || img.dim(2) != cfg.finetune_resolution) {
        img = augment::resize_bilinear(img, cfg.finetune_resolution, cfg.finetune_resolution);
    }
    return img;
}

/// Batch boundaries over n items. A trailing batch of one sample is dropped
/// when other batches exist (batch statistics need two samples).
inline std::vector<std::pair<std::size_t, std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                                                bool drop_singleton) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        if (drop_singleton && end - start == 1 && start > 0) {
            break;
        }
        out.emplace_back(start, end);
    }
    return out;
}

} // namespace detail

// --------------------------------------------------------------------------
// Self-supervised stage

struct SslState {
    ssl::OnlineBranch<float> online;
    ssl::TargetBranch<float> target;
    nn::SgdMomentum<float> optimizer;
    std::size_t epochs_done = 0;
    std::vector<double> epoch_losses;
};

/// Fresh state: transfer weights (when given) seed the online backbone.
inline SslState init_ssl_state(const TrainConfig& cfg, const std::optional<ParameterSet<float>>& backbone) {
    auto [online, target] = ssl::init_from_transfer<float>(cfg.ssl_architecture(), backbone, cfg.require_seed());
    return {std::move(online), std::move(target), nn::SgdMomentum<float>(cfg.sgd()), 0, {}};
}

/// Envelope blobs: online encoder (`backbone.*`, `projector.*`), `predictor.*`,
/// `target.*` and `optimizer.velocity.*`. Projector and predictor exist only for
/// self-supervised training and are dropped when a classifier is attached.
inline CheckpointEnvelope to_envelope(const TrainConfig& cfg, const SslState& st) {
    CheckpointEnvelope env;
    env.stage = Stage::ssl_pretrained;
    env.epoch = st.epochs_done;
    env.config = cfg;
    for (std::size_t e = 0; e < st.epoch_losses.size(); ++e) {
        env.log += nlohmann::json{{"epoch", e + 1}, {"loss", st.epoch_losses[e]}}.dump() + "\n";
    }
    ParameterSet<float> blobs = st.online.encoder.params;
    blobs.merge(st.online.predictor.params);
    blobs.merge(st.target.encoder.params.prefixed(checkpoint::kTargetPrefix));
    env.blobs = detail::with_velocity(std::move(blobs), st.optimizer);
    return env;
}

/// Rebuilds the training state from an SSL checkpoint, using its config snapshot.
inline SslState ssl_state_from(const CheckpointEnvelope& env) {
    checkpoint::require_stage(env, {Stage::ssl_pretrained}, "resuming self-supervised training");
    const TrainConfig& cfg = env.config;
    SslState st = init_ssl_state(cfg, std::nullopt);
    const auto target = env.blobs.subset(checkpoint::kTargetPrefix, true);
    ParameterSet<float> encoder;
    ParameterSet<float> predictor;
    for (const auto& [name, blob] : env.blobs) {
        if (name.starts_with("backbone.") || name.starts_with("projector.")) {
            encoder.add(name, blob);
        } else if (name.starts_with("predictor.")) {
            predictor.add(name, blob);
        }
    }
    nn::check_blobs_match(st.online.encoder.params, encoder, "SSL checkpoint encoder");
    nn::check_blobs_match(st.online.predictor.params, predictor, "SSL checkpoint predictor");
    nn::check_blobs_match(st.target.encoder.params, target, "SSL checkpoint target encoder");
    st.online.encoder.params = encoder;
    st.online.predictor.params = predictor;
    st.target.encoder.params = target;
    detail::restore_velocity(st.optimizer, env.blobs);
    st.epochs_done = env.epoch;
    for (const auto& rec : detail::parse_log_lines(env.log)) {
        st.epoch_losses.push_back(rec.at("loss").get<double>());
    }
    if (st.epoch_losses.size() != st.epochs_done) {
        throw DataError("SSL checkpoint log has " + std::to_string(st.epoch_losses.size()) + " entries for epoch " +
                        std::to_string(st.epochs_done));
    }
    return st;
}

struct SslRunOptions {
    std::optional<ParameterSet<float>> initial_backbone; ///< required for transfer init modes
    const CheckpointEnvelope* resume = nullptr;           ///< continue from this checkpoint
    std::optional<std::size_t> stop_after_epoch;          ///< simulate an interruption
    std::function<void(std::size_t epoch, double loss, const CheckpointEnvelope&)> on_epoch;
};

/// Self-supervised pre-training over the images of `view`; labels are never
/// visible here. Returns the checkpoint after the last completed epoch.
inline CheckpointEnvelope run_ssl_pretraining(const TrainConfig& cfg, const data::UnlabeledView& view,
                                              const SslRunOptions& options = {}) {
    cfg.validate();
    if (!config::uses_ssl(cfg.init_mode)) {
        throw UsageError("init_mode " + config::to_string(cfg.init_mode) + " has no self-supervised stage");
    }
    if (config::uses_transfer(cfg.init_mode) && !options.initial_backbone && options.resume == nullptr) {
        throw UsageError("init_mode " + config::to_string(cfg.init_mode) + " needs external backbone weights");
    }
    if (view.paths.size() < 2) {
        throw DataError("self-supervised training needs at least 2 training images, found " +
                        std::to_string(view.paths.size()));
    }
    const std::uint64_t seed = cfg.require_seed();
    SslState st = options.resume != nullptr
                      ? ssl_state_from(*options.resume)
                      : init_ssl_state(cfg, config::uses_transfer(cfg.init_mode) ? options.initial_backbone
                                                                                 : std::nullopt);
    const auto policy = cfg.augmentation();
    const ssl::SslStepSettings step{cfg.sgd(), cfg.tau, cfg.loss_variant};
    const std::size_t last = std::min(cfg.ssl_epochs, options.stop_after_epoch.value_or(cfg.ssl_epochs));
    const std::size_t n = view.paths.size();

    for (std::size_t epoch = st.epochs_done + 1; epoch <= last; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = make_rng(seed, "ssl-shuffle", {epoch});
        shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0;
        const auto spans = detail::batches(n, cfg.batch_size, true);
        for (std::size_t b = 0; b < spans.size(); ++b) {
            std::vector<Tensor<float>> v1, v2;
            for (std::size_t i = spans[b].first; i < spans[b].second; ++i) {
                const std::size_t idx = order[i];
                const auto image = data::load_image(view.paths[idx], cfg.input_channels);
                auto pair = augment::make_view_pair(image, policy, derive_seed(seed, "ssl-view", {epoch, idx}));
                v1.push_back(std::move(pair.v1));
                v2.push_back(std::move(pair.v2));
            }
            const ssl::ViewBatch<float> views{detail::stack_images(v1), detail::stack_images(v2)};
            try {
                loss_sum += ssl::ssl_step(st.online, st.target, views, st.optimizer, step).total;
            } catch (const NumericalError& e) {
                throw NumericalError("self-supervised epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                                     ": " + e.what());
            } catch (const DegenerateInput& e) {
                // A zero projection mid-training means the weights blew up or collapsed.
                throw NumericalError("self-supervised epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                                     ": " + e.what());
            }
        }
        st.epoch_losses.push_back(loss_sum / static_cast<double>(spans.size()));
        st.epochs_done = epoch;
        if (options.on_epoch) {
            options.on_epoch(epoch, st.epoch_losses.back(), to_envelope(cfg, st));
        }
    }
    return to_envelope(cfg, st);
}

/// Backbone blobs (`backbone.*`) from an external, SSL or fine-tuned checkpoint.
inline ParameterSet<float> backbone_from(const CheckpointEnvelope& env) {
    ParameterSet<float> bb = env.blobs.subset("backbone.");
    if (bb.size() == 0) {
        throw DataError("checkpoint (stage " + checkpoint::to_string(env.stage) + ") holds no backbone blobs");
    }
    return bb;
}

/// Backbone-only envelope, the hand-off format for transfer initialization.
inline CheckpointEnvelope export_backbone(const CheckpointEnvelope& env) {
    CheckpointEnvelope out;
    out.stage = Stage::external_backbone;
    out.epoch = 0;
    out.config = env.config;
    out.blobs = backbone_from(env);
    return out;
}

// --------------------------------------------------------------------------
// Supervised fine-tuning

struct Classifier {
    nn::ClassifierArch<float> arch;
    ParameterSet<float> params; ///< `backbone.*` plus `head.*`
};

/// Backbone followed by a freshly initialized linear head. With `backbone`
/// unset the backbone is randomly initialized too.
inline Classifier attach_classifier(const nn::BackboneSpec& spec, const std::optional<ParameterSet<float>>& backbone,
                                    std::size_t num_classes, std::uint64_t seed) {
    Classifier c{nn::make_classifier<float>(spec, num_classes), {}};
    Rng rng = make_rng(seed, "classifier-init");
    c.params = c.arch.seq->initialize(rng);
    if (backbone) {
        nn::check_blobs_match(c.params.subset("backbone."), *backbone, "backbone checkpoint");
        c.params.merge(*backbone);
    }
    return c;
}

inline Classifier attach_classifier(const CheckpointEnvelope& env, const nn::BackboneSpec& spec,
                                    std::size_t num_classes, std::uint64_t seed) {
    checkpoint::require_stage(env, {Stage::ssl_pretrained, Stage::external_backbone}, "attaching a classifier");
    return attach_classifier(spec, backbone_from(env), num_classes, seed);
}

/// Softmax cross-entropy averaged over the batch; writes dL/dlogits.
inline double cross_entropy(const Tensor<float>& logits, std::span<const ClassLabel> labels, Tensor<float>& dlogits) {
    const std::size_t n = logits.dim(0);
    const std::size_t k = logits.dim(1);
    dlogits = Tensor<float>(logits.shape());
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = logits.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0;
        for (float v : row) {
            z += std::exp(static_cast<double>(v) - mx);
        }
        const std::size_t y = data::index_of(labels[i]);
        loss += -(static_cast<double>(row[y]) - mx - std::log(z));
        for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(static_cast<double>(row[j]) - mx) / z;
            dlogits[i * k + j] = static_cast<float>((p - (j == y ? 1.0 : 0.0)) / static_cast<double>(n));
        }
    }
    return loss / static_cast<double>(n);
}

struct Predictions {
    std::vector<ClassLabel> truth;
    std::vector<ClassLabel> predicted;
    std::vector<double> covid_scores; ///< softmax probability of COVID
};

inline Predictions predict(const Classifier& model, const std::vector<data::SampleRecord>& records,
                           const TrainConfig& cfg) {
    Predictions out;
    auto& params = const_cast<ParameterSet<float>&>(model.params); // eval mode only reads
    for (const auto& [start, end] : detail::batches(records.size(), cfg.batch_size, false)) {
        std::vector<Tensor<float>> images;
        for (std::size_t i = start; i < end; ++i) {
            images.push_back(detail::classifier_input(records[i].path, cfg));
        }
        const Tensor<float> logits = model.arch.seq->forward(params, detail::stack_images(images), nn::Mode::eval);
        for (std::size_t i = 0; i < end - start; ++i) {
            const auto row = logits.row(i);
            const double mx = *std::max_element(row.begin(), row.end());
            double z = 0;
            for (float v : row) {
                z += std::exp(static_cast<double>(v) - mx);
            }
            out.truth.push_back(records[start + i].label);
            out.predicted.push_back(metrics::argmax_class(row));
            out.covid_scores.push_back(std::exp(static_cast<double>(row[0]) - mx) / z);
        }
    }
    return out;
}

inline metrics::EvalReport evaluate_model(const Classifier& model, const std::vector<data::SampleRecord>& records,
                                          const TrainConfig& cfg) {
    const Predictions p = predict(model, records, cfg);
    return metrics::evaluate(p.truth, p.predicted, p.covid_scores);
}

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0;
    metrics::EvalReport eval;

    bool operator==(const EpochLog&) const = default;
};

/// One JSON object: epoch, loss, sen, spe, hm, auc, acc (null when undefined)
/// and the confusion matrix.
inline std::string to_record(const EpochLog& log) {
    auto metric = [](const metrics::MetricValue& m) {
        return m.defined ? nlohmann::json(m.value) : nlohmann::json(nullptr);
    };
    nlohmann::json j{{"epoch", log.epoch},          {"loss", log.train_loss},   {"sen", metric(log.eval.sen)},
                     {"spe", metric(log.eval.spe)}, {"hm", metric(log.eval.hm)}, {"auc", metric(log.eval.auc)},
                     {"acc", metric(log.eval.acc)}, {"confusion", log.eval.confusion.counts}};
    return j.dump();
}

inline EpochLog parse_record(const nlohmann::json& j) {
    auto metric = [&](const char* key) {
        return j.at(key).is_null() ? metrics::MetricValue::undefined() : metrics::MetricValue::of(j.at(key).get<double>());
    };
    EpochLog log;
    log.epoch = j.at("epoch").get<std::size_t>();
    log.train_loss = j.at("loss").get<double>();
    log.eval.confusion.counts = j.at("confusion").get<decltype(log.eval.confusion.counts)>();
    log.eval.binary = metrics::binarize_covid(log.eval.confusion);
    log.eval.sen = metric("sen");
    log.eval.spe = metric("spe");
    log.eval.hm = metric("hm");
    log.eval.auc = metric("auc");
    log.eval.acc = metric("acc");
    return log;
}

inline std::vector<EpochLog> parse_records(const std::string& text) {
    std::vector<EpochLog> out;
    for (const auto& j : detail::parse_log_lines(text)) {
        out.push_back(parse_record(j));
    }
    return out;
}

struct FinetuneState {
    Classifier model;
    nn::SgdMomentum<float> optimizer;
    std::size_t epochs_done = 0;
    std::vector<EpochLog> logs;
};

inline CheckpointEnvelope to_envelope(const TrainConfig& cfg, const FinetuneState& st) {
    CheckpointEnvelope env;
    env.stage = Stage::finetuned;
    env.epoch = st.epochs_done;
    env.config = cfg;
    for (const auto& log : st.logs) {
        env.log += to_record(log) + "\n";
    }
    env.blobs = detail::with_velocity(st.model.params, st.optimizer);
    return env;
}

/// Classifier stored in a fine-tuned checkpoint.
inline Classifier classifier_from(const CheckpointEnvelope& env) {
    checkpoint::require_stage(env, {Stage::finetuned}, "loading a classifier");
    Classifier c{nn::make_classifier<float>(env.config.backbone_spec(), data::kNumClasses), {}};
    Rng rng(0);
    const auto expected = c.arch.seq->initialize(rng);
    ParameterSet<float> params;
    for (const auto& [name, blob] : env.blobs) {
        if (!name.starts_with(checkpoint::kVelocityPrefix)) {
            params.add(name, blob);
        }
    }
    nn::check_blobs_match(expected, params, "fine-tuned checkpoint");
    c.params = std::move(params);
    return c;
}

inline FinetuneState finetune_state_from(const CheckpointEnvelope& env) {
    FinetuneState st{classifier_from(env), nn::SgdMomentum<float>(env.config.sgd()), env.epoch, parse_records(env.log)};
    detail::restore_velocity(st.optimizer, env.blobs);
    if (st.logs.size() != st.epochs_done) {
        throw DataError("fine-tuned checkpoint log has " + std::to_string(st.logs.size()) + " entries for epoch " +
                        std::to_string(st.epochs_done));
    }
    return st;
}

struct FinetuneRunOptions {
    std::optional<ParameterSet<float>> initial_backbone; ///< absent for scratch
    const CheckpointEnvelope* resume = nullptr;
    std::optional<std::size_t> stop_after_epoch;
    std::function<void(std::size_t train_count, std::size_t test_count)> on_start;
    std::function<void(const EpochLog&, const CheckpointEnvelope&)> on_epoch;
};

struct FinetuneResult {
    std::vector<EpochLog> logs;
    CheckpointEnvelope envelope;
    std::size_t train_count = 0;
};

/// Full fine-tuning (every parameter trains) on a stratified `label_fraction`
/// of the train split, evaluating on the whole test split after each epoch.
inline FinetuneResult run_finetune(const TrainConfig& cfg, const data::DatasetManifest& manifest,
                                   const FinetuneRunOptions& options = {}) {
    cfg.validate();
    const std::uint64_t seed = cfg.require_seed();
    if (options.resume == nullptr) {
        if (cfg.init_mode == config::InitMode::scratch && options.initial_backbone) {
            throw UsageError("init_mode scratch must not load backbone weights");
        }
        if (cfg.init_mode != config::InitMode::scratch && !options.initial_backbone) {
            throw UsageError("init_mode " + config::to_string(cfg.init_mode) + " needs initial backbone weights");
        }
    }
    const data::DatasetManifest subset = data::stratified_subsample(manifest, cfg.label_fraction, seed);
    const auto train = subset.with_split(data::Split::train);
    const auto test = manifest.with_split(data::Split::test);
    if (train.empty()) {
        throw DataError("no training records after subsampling");
    }
    if (test.empty()) {
        throw DataError("manifest has no test split to evaluate on");
    }
    {
        std::vector<std::string> used, held;
        for (const auto& r : train) {
            used.push_back(r.path);
        }
        for (const auto& r : test) {
            held.push_back(r.path);
        }
        data::require_disjoint(used, held);
    }
    if (options.on_start) {
        options.on_start(train.size(), test.size());
    }

    FinetuneState st = options.resume != nullptr
                           ? finetune_state_from(*options.resume)
                           : FinetuneState{attach_classifier(cfg.backbone_spec(), options.initial_backbone,
                                                             data::kNumClasses, seed),
                                           nn::SgdMomentum<float>(cfg.sgd()), 0, {}};
    const std::size_t last = std::min(cfg.finetune_epochs, options.stop_after_epoch.value_or(cfg.finetune_epochs));
    for (std::size_t epoch = st.epochs_done + 1; epoch <= last; ++epoch) {
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = make_rng(seed, "finetune-shuffle", {epoch});
        shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0;
        const auto spans = detail::batches(train.size(), cfg.batch_size, false);
        for (std::size_t b = 0; b < spans.size(); ++b) {
            std::vector<Tensor<float>> images;
            std::vector<ClassLabel> labels;
            for (std::size_t i = spans[b].first; i < spans[b].second; ++i) {
                images.push_back(detail::classifier_input(train[order[i]].path, cfg));
                labels.push_back(train[order[i]].label);
            }
            const ParameterSet<float> before = st.model.params;
            nn::Trace<float> trace;
            const Tensor<float> logits =
                st.model.arch.seq->forward(st.model.params, detail::stack_images(images), nn::Mode::train, &trace);
            Tensor<float> dlogits;
            const double loss = cross_entropy(logits, labels, dlogits);
            ParameterSet<float> grads = st.model.params.zeros_like();
            st.model.arch.seq->backward(st.model.params, trace, dlogits, &grads);
            if (!std::isfinite(loss) || !grads.all_finite()) {
                st.model.params = before;
                throw NumericalError("fine-tuning epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                                     ": non-finite loss or gradient (loss=" + std::to_string(loss) + ")");
            }
            st.optimizer.step(st.model.params, grads);
            loss_sum += loss;
        }
        EpochLog log{epoch, loss_sum / static_cast<double>(spans.size()), evaluate_model(st.model, test, cfg)};
        st.logs.push_back(log);
        st.epochs_done = epoch;
        if (options.on_epoch) {
            options.on_epoch(log, to_envelope(cfg, st));
        }
    }
    return {st.logs, to_envelope(cfg, st), train.size()};
}

// --------------------------------------------------------------------------
// Aggregation

struct MeanVariance {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double variance = std::numeric_limits<double>::quiet_NaN();
    bool defined = false;
};

/// Scalar metric names in report order.
inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"loss", "sen", "spe", "hm", "auc", "acc"};
    return names;
}

inline metrics::MetricValue metric_of(const EpochLog& log, const std::string& name) {
    if (name == "loss") {
        return metrics::MetricValue::of(log.train_loss);
    }
    if (name == "sen") return log.eval.sen;
    if (name == "spe") return log.eval.spe;
    if (name == "hm") return log.eval.hm;
    if (name == "auc") return log.eval.auc;
    if (name == "acc") return log.eval.acc;
    throw UsageError("unknown metric '" + name + "'");
}

inline MeanVariance mean_population_variance(std::span<const double> values) {
    MeanVariance mv;
    if (values.empty()) {
        return mv;
    }
    const double n = static_cast<double>(values.size());
    // Offsets from the first value keep a constant series exact.
    double offset = 0;
    for (double v : values) {
        offset += v - values.front();
    }
    mv.mean = values.front() + offset / n;
    double ss = 0;
    for (double v : values) {
        ss += (v - mv.mean) * (v - mv.mean);
    }
    mv.variance = ss / n;
    mv.defined = true;
    return mv;
}

/// Mean and population variance of each metric over the last k epochs. A metric
/// undefined in any of those epochs is reported undefined.
inline std::map<std::string, MeanVariance> aggregate_last_k(const std::vector<EpochLog>& logs, std::size_t k) {
    if (k == 0 || k > logs.size()) {
        throw UsageError("aggregate over the last " + std::to_string(k) + " epochs needs 1 <= k <= " +
                         std::to_string(logs.size()));
    }
    std::map<std::string, MeanVariance> out;
    for (const auto& name : metric_names()) {
        std::vector<double> values;
        bool defined = true;
        for (std::size_t i = logs.size() - k; i < logs.size(); ++i) {
            const auto m = metric_of(logs[i], name);
            defined = defined && m.defined;
            values.push_back(m.value);
        }
        out[name] = defined ? mean_population_variance(values) : MeanVariance{};
    }
    return out;
}

// --------------------------------------------------------------------------
// Whole variants

struct VariantResult {
    std::optional<CheckpointEnvelope> ssl;
    FinetuneResult finetune;
};

/// One row of the variant matrix: `init_mode` decides which stages run.
/// `external_backbone` is required for the transfer modes and ignored otherwise.
inline VariantResult run_variant(const TrainConfig& cfg, const data::DatasetManifest& manifest,
                                 const std::optional<ParameterSet<float>>& external_backbone) {
    VariantResult out;
    std::optional<ParameterSet<float>> backbone;
    if (config::uses_transfer(cfg.init_mode)) {
        if (!external_backbone) {
            throw UsageError("init_mode " + config::to_string(cfg.init_mode) + " needs external backbone weights");
        }
        backbone = external_backbone;
    }
    if (config::uses_ssl(cfg.init_mode)) {
        SslRunOptions opts;
        opts.initial_backbone = backbone;
        out.ssl = run_ssl_pretraining(cfg, data::unlabeled(manifest, data::Split::train), opts);
        backbone = backbone_from(*out.ssl);
    }
    FinetuneRunOptions ft;
    ft.initial_backbone = backbone;
    out.finetune = run_finetune(cfg, manifest, ft);
    return out;
}

} // namespace cxrssl::pipeline
