#include "evfuse/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "evfuse/events.hpp"
#include "evfuse/io.hpp"
#include "evfuse/metrics.hpp"
#include "evfuse/perturb.hpp"
#include "evfuse/pipeline.hpp"
#include "evfuse/train.hpp"

namespace evfuse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonFiniteValue:
        case ErrorCode::ShapeMismatch:
        case ErrorCode::NonPositiveVariance:
        case ErrorCode::InvalidConfig:
        case ErrorCode::IndexOutOfRange:
        case ErrorCode::EmptyInput:
        case ErrorCode::TooFewFrames:
        case ErrorCode::Parse:
            return kExitValidation;
        case ErrorCode::DegenerateLabels:
        case ErrorCode::DegenerateVector:
            return kExitDegenerate;
        case ErrorCode::Divergence:
        case ErrorCode::Io:
            return kExitOther;
    }
    return kExitOther;
}

json manifest_to_json(const RunManifest& m) {
    return {{"subcommand", m.subcommand},
            {"config", io::config_to_json(m.config)},
            {"inputs", m.inputs},
            {"seed", m.seed},
            {"out_dir", m.out_dir.string()},
            {"repeat", m.repeat},
            {"argv", m.argv},
            {"extra", m.extra}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        m.subcommand = j.at("subcommand").get<std::string>();
        m.config = io::config_from_json(j.at("config"));
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.out_dir = j.at("out_dir").get<std::string>();
        m.repeat = j.at("repeat").get<std::size_t>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        if (j.contains("extra")) m.extra = j.at("extra");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("manifest: ") + e.what());
    }
    return m;
}

namespace {

// Options every subcommand shares. Config precedence: defaults, then the
// --config file, then explicit flags.
struct Common {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t repeat = 1;
    double nu = 0.0, refine_lambda = 0.0, epsilon = 0.0;
    std::size_t refine_steps = 0, segment_len = 0;
    std::string noise_model;
    CLI::Option *o_nu = nullptr, *o_lambda = nullptr, *o_eps = nullptr, *o_steps = nullptr, *o_seg = nullptr,
                *o_noise = nullptr;

    void attach(CLI::App* app, bool out_required = true) {
        app->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
        auto* o = app->add_option("--out", out, "output directory");
        if (out_required) o->required();
        app->add_option("--seed", seed, "random seed");
        app->add_option("--repeat", repeat, "repeat count for mean/std reporting")->check(CLI::PositiveNumber);
        o_nu = app->add_option("--nu", nu, "Student-t degrees of freedom");
        o_steps = app->add_option("--refine-steps", refine_steps, "refinement iterations N");
        o_lambda = app->add_option("--refine-lambda", refine_lambda, "refinement attenuation");
        o_eps = app->add_option("--epsilon", epsilon, "weight stabilizer");
        o_seg = app->add_option("--segment-len", segment_len, "segment length");
        o_noise = app->add_option("--noise-model", noise_model, "student_t or gaussian");
    }

    FusionConfig resolve() const {
        FusionConfig cfg;
        if (!config_path.empty()) io::apply_kv_config(io::read_kv_config(config_path), cfg);
        if (o_nu->count()) cfg.nu = nu;
        if (o_steps->count()) cfg.refine_steps = refine_steps;
        if (o_lambda->count()) cfg.refine_lambda = refine_lambda;
        if (o_eps->count()) cfg.epsilon = epsilon;
        if (o_seg->count()) cfg.segment_len = segment_len;
        if (o_noise->count()) cfg.noise_model = noise_kind_from_string(noise_model);
        cfg.validate();
        return cfg;
    }

    RunManifest manifest(const std::string& sub, const FusionConfig& cfg, const std::vector<std::string>& argv) const {
        RunManifest m;
        m.subcommand = sub;
        m.config = cfg;
        m.seed = seed;
        m.out_dir = out;
        m.repeat = repeat;
        m.argv = argv;
        if (!config_path.empty()) m.inputs["config"] = config_path;
        return m;
    }
};

struct ModelFlags {
    std::string image, event, labels, heads, refiner, mode = "fused", trajectory = "smoothed";
    bool no_layer_norm = false;

    void attach(CLI::App* app) {
        app->add_option("--image", image, "image embeddings (EMB1 or JSON lines)");
        app->add_option("--event", event, "event embeddings (EMB1 or JSON lines)");
        app->add_option("--labels", labels, "labels JSON");
        app->add_option("--heads", heads, "heads JSON");
        app->add_option("--refiner", refiner, "affine refiner (two EMB1 blocks)");
        app->add_option("--mode", mode, "fused, image_only or event_only");
        app->add_option("--trajectory", trajectory, "smoothed or per_step");
        app->add_flag("--no-layer-norm", no_layer_norm, "skip per-slice layer normalization");
    }
};

PipelineMode pipeline_mode_from_string(const std::string& s) {
    if (s == "fused") return PipelineMode::Fused;
    if (s == "image_only") return PipelineMode::ImageOnly;
    if (s == "event_only") return PipelineMode::EventOnly;
    throw Error(ErrorCode::InvalidConfig, "unknown mode '" + s + "'");
}

// Identity mean heads, unit variance, classifier averaging the fused state.
losses::LinearHeads default_heads(std::size_t dim) {
    losses::LinearHeads h;
    h.image = losses::ProjectionHeads::identity_mean(dim);
    h.event = losses::ProjectionHeads::identity_mean(dim);
    h.classifier_weight.assign(dim, 1.0 / static_cast<double>(dim));
    return h;
}

struct LoadedModel {
    io::LoadedSequence image, event;
    std::vector<int> labels;
    std::unique_ptr<FusionPipeline> pipeline;
};

LoadedModel load_model(const ModelFlags& f, const FusionConfig& cfg, RunManifest& m, bool need_labels) {
    if (f.image.empty() || f.event.empty()) throw Error(ErrorCode::InvalidConfig, "--image and --event are required");
    LoadedModel lm;
    lm.image = io::load_sequence(f.image, Modality::Image);
    lm.event = io::load_sequence(f.event, Modality::Event);
    m.inputs["image"] = f.image;
    m.inputs["event"] = f.event;
    require_same_shape(lm.image.sequence.shape(), lm.event.sequence.shape(), "image/event inputs");
    if (lm.image.video_ids != lm.event.video_ids) {
        throw Error(ErrorCode::ShapeMismatch, "image and event inputs list different video ids");
    }
    const Shape s = lm.image.sequence.shape();
    if (!f.labels.empty()) {
        lm.labels = io::align_labels(io::read_labels(f.labels), lm.image.video_ids, s.steps);
        m.inputs["labels"] = f.labels;
    } else if (need_labels) {
        throw Error(ErrorCode::InvalidConfig, "--labels is required");
    }
    losses::LinearHeads heads = default_heads(s.dim);
    if (!f.heads.empty()) {
        heads = io::read_heads(f.heads);
        m.inputs["heads"] = f.heads;
    }
    if (heads.dim() != s.dim) throw Error(ErrorCode::ShapeMismatch, "heads dim does not match the inputs");
    std::shared_ptr<const refine::ResidualEstimator> refiner;
    if (!f.refiner.empty()) {
        auto est = io::read_affine(f.refiner);
        if (est.dim() != s.dim) throw Error(ErrorCode::ShapeMismatch, "refiner dim does not match the inputs");
        refiner = std::make_shared<refine::AffineEstimator>(std::move(est));
        m.inputs["refiner"] = f.refiner;
    }
    PipelineOptions opts;
    opts.config = cfg;
    opts.mode = pipeline_mode_from_string(f.mode);
    opts.trajectory = trajectory_mode_from_string(f.trajectory);
    opts.layer_norm = !f.no_layer_norm;
    lm.pipeline = std::make_unique<FusionPipeline>(opts, std::move(heads), std::move(refiner));
    return lm;
}

void write_manifest(const RunManifest& m) { io::write_json(fs::path(m.out_dir) / "manifest.json", manifest_to_json(m)); }

json report_to_json(const metrics::EvalReport& r) {
    json j{{"auc", r.auc}, {"ap", r.ap}, {"brier", r.brier}, {"pred_kl", r.pred_kl}};
    j["ano_auc"] = r.ano_auc ? json(*r.ano_auc) : json(nullptr);
    return j;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidConfig, "bad list entry '" + item + "'");
        }
    }
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "empty list");
    return out;
}

// ---------------------------------------------------------------- fuse

int cmd_fuse(const Common& c, const ModelFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
    const FusionConfig cfg = c.resolve();
    RunManifest m = c.manifest("fuse", cfg, argv);
    auto lm = load_model(f, cfg, m, false);
    const auto res = lm.pipeline->run(lm.image.sequence, lm.event.sequence);
    const fs::path dir(c.out);
    io::write_emb1(dir / "trajectory_mean.emb1", res.refined.trajectory.mean);
    io::write_emb1(dir / "trajectory_variance.emb1", res.refined.trajectory.variance);
    const auto series = segment_scores(res, lm.labels, cfg.segment_len, lm.image.video_ids);
    io::write_scores_csv(dir / "scores.csv", series);
    m.extra["mode"] = std::string(to_string(lm.pipeline->options().mode));
    m.extra["trajectory"] = std::string(to_string(lm.pipeline->options().trajectory));
    m.extra["layer_norm"] = lm.pipeline->options().layer_norm;
    m.extra["residual_norms"] = res.refined.residual_norms;
    write_manifest(m);
    out << "fused " << lm.image.sequence.shape().batch << " videos -> " << (dir / "scores.csv").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- eval

void override_labels(std::vector<ScoreSeries>& series, const io::LabelSet& labels) {
    if (labels.per_step) throw Error(ErrorCode::InvalidConfig, "eval takes per-video labels");
    std::map<std::string, int> by_id;
    for (std::size_t k = 0; k < labels.video_ids.size(); ++k) by_id[labels.video_ids[k]] = labels.labels[k];
    for (auto& s : series) {
        const auto it = by_id.find(s.video_id);
        if (it == by_id.end()) throw Error(ErrorCode::ShapeMismatch, "no label for video '" + s.video_id + "'");
        s.labels.assign(s.probabilities.size(), it->second);
        s.video_is_anomalous = it->second == 1;
    }
}

int cmd_eval(const Common& c, const std::vector<std::string>& scores, const std::string& labels,
             const std::string& reference, const std::vector<std::string>& argv, std::ostream& out) {
    const FusionConfig cfg = c.resolve();
    RunManifest m = c.manifest("eval", cfg, argv);
    std::optional<io::LabelSet> label_set;
    if (!labels.empty()) {
        label_set = io::read_labels(labels);
        m.inputs["labels"] = labels;
    }
    auto load = [&](const std::string& p) {
        auto s = io::read_scores_csv(p);
        if (label_set) override_labels(s, *label_set);
        return s;
    };
    std::optional<std::vector<ScoreSeries>> ref;
    if (!reference.empty()) {
        ref = io::read_scores_csv(reference);
        m.inputs["reference"] = reference;
    }
    for (std::size_t k = 0; k < scores.size(); ++k) m.inputs["scores" + std::to_string(k)] = scores[k];

    // Repeated runs arrive as one scores file per seed.
    if (c.repeat > 1 && c.repeat != scores.size()) {
        throw Error(ErrorCode::InvalidConfig, "--repeat " + std::to_string(c.repeat) + " needs that many --scores files");
    }
    std::vector<metrics::EvalReport> runs;
    std::string kind;
    if (scores.size() > 1) {
        kind = "files";
        for (const auto& p : scores) runs.push_back(metrics::evaluate(load(p), ref ? &*ref : nullptr));
    } else {
        kind = "single";
        runs.push_back(metrics::evaluate(load(scores.front()), ref ? &*ref : nullptr));
    }

    json j{{"kind", kind}, {"n", runs.size()}, {"runs", json::array()}};
    std::vector<double> auc, ap, brier, kl, ano;
    for (const auto& r : runs) {
        j["runs"].push_back(report_to_json(r));
        auc.push_back(r.auc);
        ap.push_back(r.ap);
        brier.push_back(r.brier);
        kl.push_back(r.pred_kl);
        if (r.ano_auc) ano.push_back(*r.ano_auc);
    }
    auto put = [&](const std::string& name, const std::vector<double>& v) {
        const auto [mu, sd] = mean_std(v);
        j["mean"][name] = mu;
        j["std"][name] = sd;
    };
    put("auc", auc);
    put("ap", ap);
    put("brier", brier);
    put("pred_kl", kl);
    if (!ano.empty()) put("ano_auc", ano);
    io::write_json(fs::path(c.out) / "eval.json", j);
    write_manifest(m);
    out << std::setprecision(6) << "auc " << j["mean"]["auc"].get<double>() << " ap " << j["mean"]["ap"].get<double>()
        << " brier " << j["mean"]["brier"].get<double>() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- perturb

int cmd_perturb(const Common& c, const ModelFlags& f, bool toy, const std::string& rho_levels,
                const std::string& targets, const std::vector<std::string>& argv, std::ostream& out) {
    const FusionConfig cfg = c.resolve();
    RunManifest m = c.manifest("perturb", cfg, argv);
    const auto rhos = parse_list(rho_levels);
    std::vector<Modality> target_list;
    {
        std::stringstream ss(targets);
        std::string item;
        while (std::getline(ss, item, ',')) target_list.push_back(modality_from_string(item));
        if (target_list.empty()) throw Error(ErrorCode::InvalidConfig, "no mask targets");
    }

    perturb::SweepResult sweep;
    if (toy) {
        auto fx = perturb::make_toy_perturb_fixture(c.seed);
        PipelineOptions opts = fx.pipeline.options();
        opts.config = cfg;
        const FusionPipeline pipeline(opts, fx.pipeline.heads(), nullptr);
        sweep = perturb::perturbation_sweep(pipeline, fx.data, rhos, target_list, c.seed);
        m.inputs["fixture"] = "toy";
    } else {
        auto lm = load_model(f, cfg, m, true);
        perturb::PerturbInputs data{lm.image.sequence, lm.event.sequence, lm.labels, lm.image.video_ids};
        sweep = perturb::perturbation_sweep(*lm.pipeline, data, rhos, target_list, c.seed);
    }
    const fs::path dir(c.out);
    io::write_sweep_csv(dir / "perturb.csv", sweep);
    io::write_json(dir / "perturb.json", io::sweep_summary(sweep));
    m.extra["rho_levels"] = rhos;
    m.extra["targets"] = targets;
    write_manifest(m);
    out << "perturbation sweep: " << sweep.rows.size() << " rows -> " << (dir / "perturb.csv").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- events

int cmd_events(const Common& c, const std::string& frames, double threshold, std::size_t clamp,
               const std::string& clamp_mode, std::size_t encode_dim, const std::vector<std::string>& argv,
               std::ostream& out) {
    const FusionConfig cfg = c.resolve();
    RunManifest m = c.manifest("events", cfg, argv);
    m.inputs["frames"] = frames;
    events::EventOptions opts;
    opts.threshold = threshold;
    opts.clamp = clamp;
    opts.clamp_mode = events::clamp_mode_from_string(clamp_mode);
    opts.segment_len = cfg.segment_len;
    const auto video = io::read_frm1(frames);
    const auto segs = events::synth_events(video, opts);
    const fs::path dir(c.out);
    io::write_events(dir / "events.bin", dir / "events.json", segs, opts);
    if (encode_dim > 0) io::write_emb1(dir / "events_encoded.emb1", events::encode_segments(segs, encode_dim).values);
    m.extra["threshold"] = opts.threshold;
    m.extra["clamp"] = opts.clamp;
    m.extra["clamp_mode"] = std::string(events::to_string(opts.clamp_mode));
    m.extra["encode_dim"] = encode_dim;
    write_manifest(m);
    out << segs.size() << " event segments -> " << (dir / "events.bin").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- train-demo

struct TrainFlags {
    std::size_t epochs = 150;
    double lr = 0.02;
    std::string optimizer = "gd";
    std::size_t videos = 48, steps = 32, dim = 8;
    double signal = 1.0, noise = 1.0;
    bool classifier_only = false;
};

int cmd_train_demo(const Common& c, const ModelFlags& f, const TrainFlags& tf, const std::vector<std::string>& argv,
                   std::ostream& out) {
    const FusionConfig cfg = c.resolve();
    RunManifest m = c.manifest("train-demo", cfg, argv);
    train::TrainOptions to;
    to.epochs = tf.epochs;
    to.learning_rate = tf.lr;
    to.optimizer = train::optimizer_from_string(tf.optimizer);
    if (tf.classifier_only) to.train_heads = to.train_refiner = false;
    PipelineOptions base;
    base.config = cfg;
    base.trajectory = trajectory_mode_from_string(f.trajectory);
    base.layer_norm = !f.no_layer_norm;

    const fs::path dir(c.out);
    fs::create_directories(dir);
    std::ofstream curve(dir / "learning_curve.csv");
    if (!curve) throw Error(ErrorCode::Io, (dir / "learning_curve.csv").string() + ": cannot open for writing");
    curve << "seed,epoch,total,cls,kl_image,kl_event,reg\n" << std::setprecision(17);
    auto log_epoch = [&](std::uint64_t seed) {
        return [&curve, seed](std::size_t e, const gradients::LossBreakdown& l) {
            curve << seed << ',' << e << ',' << l.total << ',' << l.cls << ',' << l.kl_image << ',' << l.kl_event << ','
                  << l.reg << '\n';
        };
    };

    json report{{"per_seed", json::array()}};
    std::optional<gradients::ModelParams> first;
    if (!f.image.empty() || !f.event.empty()) {
        // Train the fused model on supplied embeddings; AUC is on the training data.
        FusionConfig fc = cfg;
        ModelFlags ff = f;
        auto lm = load_model(ff, fc, m, true);
        const gradients::LossFixture data{lm.image.sequence, lm.event.sequence, lm.labels};
        PipelineOptions opts = base;
        opts.mode = pipeline_mode_from_string(f.mode);
        auto result = train::train(data, train::init_params(data.image.shape().dim, c.seed), opts, to, log_epoch(c.seed));
        const auto pipeline = train::make_pipeline(result.params, opts);
        const auto series = segment_scores(pipeline.run(data.image, data.event), data.labels, cfg.segment_len,
                                           lm.image.video_ids);
        report["train_auc"] = metrics::evaluate(series).auc;
        first = std::move(result.params);
    } else {
        train::SyntheticSpec spec;
        spec.videos = tf.videos;
        spec.steps = tf.steps;
        spec.dim = tf.dim;
        spec.signal = tf.signal;
        spec.noise = tf.noise;
        m.inputs["fixture"] = "complementary";
        std::vector<double> fused, image, event, gain;
        for (std::size_t r = 0; r < c.repeat; ++r) {
            const std::uint64_t seed = c.seed + r;
            const auto train_set = train::make_complementary_fixture(spec, seed);
            const auto test_set = train::make_complementary_fixture(spec, seed + 1000003);
            json row{{"seed", seed}};
            for (PipelineMode mode : {PipelineMode::Fused, PipelineMode::ImageOnly, PipelineMode::EventOnly}) {
                PipelineOptions opts = base;
                opts.mode = mode;
                auto result = train::train(train_set.fixture, train::init_params(spec.dim, seed), opts, to,
                                           mode == PipelineMode::Fused ? log_epoch(seed) : train::EpochCallback{});
                const double auc = train::segment_auc(result.params, opts, test_set);
                row[std::string(to_string(mode)) + "_auc"] = auc;
                if (mode == PipelineMode::Fused && !first) first = result.params;
            }
            fused.push_back(row["fused_auc"].get<double>());
            image.push_back(row["image_only_auc"].get<double>());
            event.push_back(row["event_only_auc"].get<double>());
            gain.push_back(fused.back() - std::max(image.back(), event.back()));
            report["per_seed"].push_back(row);
        }
        for (const auto& [name, v] : {std::pair{"fused_auc", fused}, std::pair{"image_only_auc", image},
                                      std::pair{"event_only_auc", event}, std::pair{"gain_over_best_single", gain}}) {
            const auto [mu, sd] = mean_std(v);
            report["mean"][name] = mu;
            report["std"][name] = sd;
        }
        m.extra["synthetic"] = {{"videos", spec.videos}, {"steps", spec.steps}, {"dim", spec.dim},
                                {"signal", spec.signal}, {"noise", spec.noise}};
    }
    curve.close();
    io::write_heads(dir / "heads.json", first->heads);
    io::write_affine(dir / "refiner.emb1", first->refiner);
    io::write_json(dir / "report.json", report);
    m.extra["epochs"] = tf.epochs;
    m.extra["learning_rate"] = tf.lr;
    m.extra["optimizer"] = tf.optimizer;
    write_manifest(m);
    out << report.dump() << '\n';
    return kExitOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

int cmd_rerun(const std::string& manifest_path, const std::string& out_dir, std::ostream& out, std::ostream& err,
              int depth) {
    if (depth > 0) throw Error(ErrorCode::InvalidConfig, "a manifest cannot point at another rerun");
    const RunManifest m = manifest_from_json(io::read_json(manifest_path));
    std::vector<std::string> args;
    for (std::size_t k = 0; k < m.argv.size(); ++k) {
        if (m.argv[k] == "--out" && k + 1 < m.argv.size()) {
            ++k;
            continue;
        }
        if (m.argv[k].starts_with("--out=")) continue;
        args.push_back(m.argv[k]);
    }
    args.push_back("--out");
    args.push_back(out_dir.empty() ? m.out_dir.string() : out_dir);
    return dispatch(args, out, err, depth + 1);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
    CLI::App app{"Uncertainty-weighted image/event fusion engine", "evfuse"};
    app.require_subcommand(1);

    Common fuse_c, eval_c, pert_c, ev_c, train_c;
    ModelFlags fuse_f, pert_f, train_f;

    auto* fuse = app.add_subcommand("fuse", "heads, fusion, temporal update, refinement, scores");
    fuse_c.attach(fuse);
    fuse_f.attach(fuse);

    auto* eval = app.add_subcommand("eval", "AUC, Ano-AUC, AP, Brier from a scores CSV");
    eval_c.attach(eval);
    std::vector<std::string> scores;
    std::string eval_labels, reference;
    eval->add_option("--scores", scores, "scores CSV (repeatable)")->required();
    eval->add_option("--labels", eval_labels, "labels JSON overriding the CSV labels");
    eval->add_option("--reference", reference, "clean scores CSV for prediction KL");

    auto* pert = app.add_subcommand("perturb", "latent masking sweep");
    pert_c.attach(pert);
    pert_f.attach(pert);
    bool toy = false;
    std::string rho_levels = "0.05,0.1,0.2,0.3,0.5", targets = "event,image";
    pert->add_flag("--toy", toy, "use the built-in constructed fixture");
    pert->add_option("--rho-levels", rho_levels, "comma-separated masking fractions");
    pert->add_option("--targets", targets, "comma-separated modalities to mask");

    auto* ev = app.add_subcommand("events", "synthetic event maps from FRM1 frames");
    ev_c.attach(ev);
    std::string frames, clamp_mode = "event_count";
    double threshold = 10.0 / 255.0;
    std::size_t clamp = 10, encode_dim = 0;
    ev->add_option("--frames", frames, "FRM1 video")->required();
    ev->add_option("--threshold", threshold, "change threshold on [0,1] intensities");
    ev->add_option("--clamp", clamp, "clamp value");
    ev->add_option("--clamp-mode", clamp_mode, "event_count or difference");
    ev->add_option("--encode-dim", encode_dim, "also write toy-encoded embeddings of this dim");

    auto* tr = app.add_subcommand("train-demo", "train heads and refiner on the total loss");
    train_c.attach(tr);
    train_f.attach(tr);
    TrainFlags tf;
    tr->add_option("--epochs", tf.epochs, "training epochs");
    tr->add_option("--lr", tf.lr, "learning rate");
    tr->add_option("--optimizer", tf.optimizer, "gd or adam");
    tr->add_option("--videos", tf.videos, "synthetic videos per split");
    tr->add_option("--steps", tf.steps, "synthetic steps per video");
    tr->add_option("--dim", tf.dim, "synthetic embedding dim");
    tr->add_option("--signal", tf.signal, "synthetic anomaly shift");
    tr->add_option("--noise", tf.noise, "synthetic noise std");
    tr->add_flag("--classifier-only", tf.classifier_only, "freeze heads and refiner");

    auto* rerun = app.add_subcommand("rerun", "replay a manifest.json");
    std::string manifest_path, rerun_out;
    rerun->add_option("--manifest", manifest_path, "manifest.json to replay")->required()->check(CLI::ExistingFile);
    rerun->add_option("--out", rerun_out, "output directory (default: the recorded one)");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }

    if (*fuse) return cmd_fuse(fuse_c, fuse_f, args, out);
    if (*eval) return cmd_eval(eval_c, scores, eval_labels, reference, args, out);
    if (*pert) return cmd_perturb(pert_c, pert_f, toy, rho_levels, targets, args, out);
    if (*ev) return cmd_events(ev_c, frames, threshold, clamp, clamp_mode, encode_dim, args, out);
    if (*tr) return cmd_train_demo(train_c, train_f, tf, args, out);
    return cmd_rerun(manifest_path, rerun_out, out, err, depth);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(args, out, err, 0);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitOther;
    }
}

}  // namespace evfuse::cli
