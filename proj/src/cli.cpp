#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "openess/distill.hpp"
#include "openess/embedding.hpp"
#include "openess/encoder.hpp"
#include "openess/events.hpp"
#include "openess/formats.hpp"
#include "openess/manifest.hpp"
#include "openess/metrics.hpp"
#include "openess/openvocab.hpp"
#include "openess/parallel.hpp"
#include "openess/superpixel.hpp"
#include "openess/synth.hpp"
#include "openess/tensor.hpp"

namespace openess {

namespace fs = std::filesystem;

namespace {

/// Default superpixel count by resolution: 100 at DSEC size, 25 at DDD17
/// size; other resolutions scale at the same pixels-per-segment rate.
std::uint32_t default_segments(std::uint32_t w, std::uint32_t h) {
    if (w == 640 && h == 440) return 100;
    if (w == 352 && h == 200) return 25;
    const long m = std::lround(static_cast<double>(w) * h / 2816.0);
    return static_cast<std::uint32_t>(std::max(1L, m));
}

std::string sample_name(std::size_t k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04zu", k);
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct EncodedSample {
    FeatureMap input;                   // voxel grid channels-first
    events::EventWindow window;         // last full window (points into stream)
    std::vector<std::uint8_t> occupied; // event-occupied pixel mask
};

/// Final-window encoding used across subcommands: the window holding the
/// last n events of the stream feeds the encoder, so the representation is
/// as fresh as the sample's frame. Returns nothing when the stream does not
/// fill one window.
std::optional<EncodedSample> encode_final_window(const events::EventStream& stream,
                                                 std::uint32_t events_per_window,
                                                 std::uint32_t bins) {
    if (stream.events.size() < events_per_window) return std::nullopt;
    EncodedSample s;
    std::span<const events::Event> tail(
        stream.events.data() + (stream.events.size() - events_per_window), events_per_window);
    std::uint64_t dt = tail.back().t - tail.front().t;
    if (dt == 0) dt = 1;
    s.window = events::EventWindow{tail, tail.front().t, dt};
    s.input = events::build_voxel_grid(s.window, bins, stream.height, stream.width)
                  .as_feature_map();
    s.occupied.assign(static_cast<std::size_t>(stream.height) * stream.width, 0);
    for (const auto& e : s.window.events)
        s.occupied[static_cast<std::size_t>(e.y) * stream.width + e.x] = 1;
    return s;
}

struct ModelFiles {
    distill::TrainConfig config;
    encoder::EncoderParams enc;
    distill::ProjectionHead head_query;
};

ModelFiles load_model(const std::string& dir) {
    ModelFiles m;
    m.config = distill::parse_train_config(read_text_file(dir + "/model_config.txt"));
    m.enc = formats::read_enc1_file(dir + "/encoder.enc1");
    m.head_query = formats::read_head_file(dir + "/head_query.enc1");
    return m;
}

std::string config_echo(const distill::TrainConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "tau1=" << c.tau1 << "\ntau2=" << c.tau2 << "\nalpha=" << c.alpha
        << "\nlr=" << c.lr << "\nmomentum=" << c.momentum << "\nsteps=" << c.steps
        << "\nbatch_pairs=" << c.batch_pairs << "\nseed=" << c.seed << "\nloss_mode="
        << (c.loss_mode == distill::LossMode::kStandard ? "standard" : "paper-literal")
        << "\nnormalize=" << (c.normalize ? 1 : 0)
        << "\nsuperpixel_source=" << c.superpixel_source << "\nsegments=" << c.segments
        << "\noptimizer=" << c.optimizer << "\nschedule=" << c.schedule
        << "\nevents_per_window=" << c.events_per_window << "\nbins=" << c.bins
        << "\nd1=" << c.d1 << "\nproj_dim=" << c.proj_dim
        << "\npseudo_threshold=" << c.pseudo_threshold
        << "\nslic_compactness=" << c.slic_compactness << "\nslic_iters=" << c.slic_iters
        << "\nmin_events=" << c.min_events << "\nhidden=";
    for (std::size_t i = 0; i < c.hidden.size(); ++i)
        out << (i ? "," : "") << c.hidden[i];
    out << "\n";
    return out.str();
}

// -----------------------------------------------------------------------
// synth
// -----------------------------------------------------------------------

struct SynthOptions {
    std::string out;
    std::uint32_t width = 64, height = 64;
    std::uint32_t duration_ms = 2000;
    double fps = 10.0;
    std::uint64_t seed = 1;
    double theta = 0.0;  // 0 = scene default
    std::uint32_t feature_dim = 16;
    double feature_sigma = 0.05;
    std::string anchors_path;
    std::uint32_t lookback_ms = 400;
    double noise_rate = 0.0;
};

int cmd_synth(const SynthOptions& opt) {
    fs::create_directories(opt.out);
    synth::SceneSpec spec = synth::make_moving_shapes_scene(
        opt.width, opt.height, static_cast<std::uint64_t>(opt.duration_ms) * 1000, opt.seed);
    if (opt.theta > 0.0) spec.contrast_threshold = opt.theta;
    spec.fps = opt.fps;
    spec.noise_rate = opt.noise_rate;
    const synth::SceneResult scene = synth::generate(spec);
    for (const auto& w : scene.warnings) std::cerr << "warning: " << w << "\n";

    embedding::TextEmbeddingSet anchors;
    if (!opt.anchors_path.empty()) {
        anchors = formats::read_temb1_file(opt.anchors_path);
        if (anchors.dim != opt.feature_dim && opt.feature_dim != 0)
            throw std::runtime_error("synth: anchor dimension does not match --feature-dim");
    } else {
        std::vector<std::string> names;
        std::uint8_t z_max = 0;
        for (const auto& s : spec.shapes) z_max = std::max(z_max, s.class_id);
        z_max = std::max(z_max, spec.background_class);
        for (std::uint32_t z = 0; z <= z_max; ++z) names.push_back("class" + std::to_string(z));
        anchors = embedding::random_embeddings(names, opt.feature_dim, opt.seed);
    }
    formats::write_temb1_file(opt.out + "/texts.temb1", anchors);

    std::ostringstream manifest, artifacts;
    const std::uint64_t lookback_us = static_cast<std::uint64_t>(opt.lookback_ms) * 1000;
    std::size_t written = 0;
    for (std::size_t k = 0; k < scene.frame_times_us.size(); ++k) {
        const std::uint64_t t = scene.frame_times_us[k];
        if (t == 0) continue;  // no events can precede the first frame
        const std::uint64_t t_lo = t > lookback_us ? t - lookback_us : 0;
        events::EventStream slice;
        slice.width = spec.width;
        slice.height = spec.height;
        for (const auto& e : scene.stream.events)
            if (e.t > t_lo && e.t <= t) slice.events.push_back(e);
        if (slice.events.empty()) continue;

        const std::string base = sample_name(written);
        formats::write_evt1_file(opt.out + "/" + base + ".evt1", slice);
        formats::write_pgm_file(opt.out + "/" + base + ".pgm", scene.frames[k]);
        formats::write_lbl1_file(opt.out + "/" + base + ".lbl1", scene.labels[k]);
        std::string frame_entry = "-";
        if (opt.feature_dim > 0) {
            embedding::SynthFeatureParams fp;
            fp.channels = anchors.dim;
            fp.noise_sigma = opt.feature_sigma;
            fp.seed = opt.seed + 1000 + k;
            const FeatureMap feats = embedding::synth_features(scene.labels[k], fp, &anchors);
            formats::write_fmap1_file(opt.out + "/" + base + ".fmap1", feats);
            frame_entry = base + ".fmap1";
            artifacts << "fmap " << base << ".fmap1 " << t << "\n";
        }
        manifest << "seq0 " << base << ".evt1 " << frame_entry << " - " << base << ".lbl1\n";
        artifacts << "evt " << base << ".evt1 " << t << "\n";
        artifacts << "frame " << base << ".pgm " << t << "\n";
        artifacts << "label " << base << ".lbl1 " << t << "\n";
        ++written;
    }
    write_text_file(opt.out + "/manifest.txt", manifest.str());
    write_text_file(opt.out + "/scene.txt", artifacts.str());
    std::cout << "samples=" << written << "\nevents=" << scene.stream.events.size()
              << "\nclasses=" << anchors.class_count() << "\n";
    return 0;
}

// -----------------------------------------------------------------------
// dataset assembly shared by distill / zeroshot / probe
// -----------------------------------------------------------------------

struct LoadedSample {
    EncodedSample enc;
    std::string label_path;
};

std::vector<LoadedSample> load_event_samples(const harness::DatasetManifest& manifest,
                                             std::uint32_t events_per_window,
                                             std::uint32_t bins) {
    std::vector<LoadedSample> out;
    for (const auto& s : manifest.samples) {
        const events::EventStream stream =
            formats::read_evt1_file(manifest.resolve(s.event_path));
        auto enc = encode_final_window(stream, events_per_window, bins);
        if (!enc) {
            std::cerr << "warning: " << s.event_path << " has fewer than " << events_per_window
                      << " events; sample skipped\n";
            continue;
        }
        // The window points into `stream`, which dies here; rebuild the
        // occupancy-dependent pieces eagerly and drop the span.
        LoadedSample ls;
        ls.enc.input = std::move(enc->input);
        ls.enc.occupied = std::move(enc->occupied);
        ls.label_path = s.label_path.empty() ? "" : manifest.resolve(s.label_path);
        out.push_back(std::move(ls));
    }
    return out;
}

int cmd_distill(const std::string& manifest_path, const std::string& texts_path,
                const std::string& config_path, const std::string& out_dir,
                const std::optional<std::uint64_t>& seed_flag,
                const std::optional<std::string>& loss_mode_flag, bool no_normalize,
                const std::optional<std::uint32_t>& segments_flag) {
    distill::TrainConfig cfg = config_path.empty()
                                   ? distill::TrainConfig{}
                                   : distill::parse_train_config(read_text_file(config_path));
    if (seed_flag) cfg.seed = *seed_flag;
    if (loss_mode_flag) cfg.loss_mode = distill::parse_loss_mode(*loss_mode_flag);
    if (no_normalize) cfg.normalize = false;
    if (segments_flag) cfg.segments = *segments_flag;
    cfg.validate();

    const auto manifest = harness::load_manifest(manifest_path);
    const auto texts = formats::read_temb1_file(texts_path);

    std::vector<distill::TrainSample> samples;
    for (const auto& ref : manifest.samples) {
        const events::EventStream stream =
            formats::read_evt1_file(manifest.resolve(ref.event_path));
        auto enc = encode_final_window(stream, cfg.events_per_window, cfg.bins);
        if (!enc) {
            std::cerr << "warning: " << ref.event_path << " has fewer than "
                      << cfg.events_per_window << " events; sample skipped\n";
            continue;
        }
        if (ref.frame_path.empty())
            throw std::runtime_error("distill: sample " + ref.event_path +
                                     " has no frame feature file");
        distill::TrainSample ts;
        ts.event_input = std::move(enc->input);
        ts.occupied = std::move(enc->occupied);
        ts.frame_features = formats::read_fmap1_file(manifest.resolve(ref.frame_path));

        const std::uint32_t m =
            cfg.segments ? cfg.segments : default_segments(stream.width, stream.height);
        if (cfg.superpixel_source == "mask") {
            if (ref.mask_path.empty())
                throw std::runtime_error("distill: superpixel_source=mask but no mask file for " +
                                         ref.event_path);
            auto map = formats::read_mask1_file(manifest.resolve(ref.mask_path));
            if (map.segment_count > m) map = superpixel::select_largest_segments(map, m);
            ts.superpixels = std::move(map);
        } else {
            superpixel::SlicParams sp;
            sp.segments = m;
            sp.compactness = cfg.slic_compactness;
            sp.iters = cfg.slic_iters;
            sp.seed = cfg.seed;
            ts.superpixels = superpixel::slic(ts.frame_features, sp);
        }
        ts.superevents = superpixel::group_superevents(ts.superpixels, enc->window,
                                                       cfg.min_events);
        ts.pseudo_labels = distill::pseudo_label(ts.frame_features, texts, cfg.pseudo_threshold);
        samples.push_back(std::move(ts));
    }
    if (samples.empty()) throw std::runtime_error("distill: no usable samples");

    const distill::TrainResult result = distill::train(cfg, samples, texts);

    fs::create_directories(out_dir);
    formats::write_enc1_file(out_dir + "/encoder.enc1", result.model.enc);
    formats::write_head_file(out_dir + "/head_event.enc1", result.model.head_event);
    formats::write_head_file(out_dir + "/head_frame.enc1", result.model.head_frame);
    formats::write_head_file(out_dir + "/head_query.enc1", result.model.head_query);
    write_text_file(out_dir + "/trace.csv", distill::trace_csv(result.trace));
    write_text_file(out_dir + "/model_config.txt", config_echo(cfg));

    const auto& last = result.trace.back();
    std::cout << "steps=" << cfg.steps << "\nsamples=" << samples.size()
              << "\nloss_first=" << result.trace.front().loss_total
              << "\nloss_final=" << last.loss_total << "\nskipped_f2e_steps="
              << result.skipped_f2e_steps << "\nskipped_t2e_classes="
              << result.skipped_t2e_classes << "\n";
    return 0;
}

int cmd_zeroshot(const std::string& manifest_path, const std::string& model_dir,
                 const std::string& texts_path, const std::string& out_dir, bool strict_miou) {
    const ModelFiles model = load_model(model_dir);
    const auto texts = formats::read_temb1_file(texts_path);
    const auto manifest = harness::load_manifest(manifest_path);
    const auto samples =
        load_event_samples(manifest, model.config.events_per_window, model.config.bins);
    if (samples.empty()) throw std::runtime_error("zeroshot: no usable samples");

    fs::create_directories(out_dir);
    metrics::ConfusionMatrix cm(texts.class_count());
    bool any_labels = false;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const FeatureMap features = encoder::forward(model.enc, samples[k].enc.input, nullptr);
        const LabelMap pred = openvocab::predict_zero_shot(features, model.head_query, texts);
        formats::write_lbl1_file(out_dir + "/" + sample_name(k) + "_pred.lbl1", pred);
        if (!samples[k].label_path.empty()) {
            const LabelMap gt = formats::read_lbl1_file(samples[k].label_path);
            metrics::accumulate(cm, pred, gt);
            any_labels = true;
        }
    }
    std::cout << "samples=" << samples.size() << "\n";
    if (any_labels) {
        const auto rep = metrics::iou_scores(cm, strict_miou);
        write_text_file(out_dir + "/metrics.csv", metrics::report_csv(rep));
        std::cout << metrics::report_kv(rep);
    }
    return 0;
}

int cmd_probe(const std::string& manifest_path, const std::string& eval_manifest_path,
              const std::string& model_dir, bool random_init, std::uint64_t seed,
              double budget, std::uint32_t steps, double lr, const std::string& out_dir,
              bool strict_miou) {
    ModelFiles model;
    if (random_init) {
        model.config = distill::TrainConfig{};
        if (!model_dir.empty())
            model.config =
                distill::parse_train_config(read_text_file(model_dir + "/model_config.txt"));
        model.config.seed = seed;
    } else {
        model = load_model(model_dir);
    }

    const auto train_manifest = harness::load_manifest(manifest_path);
    const auto split = harness::split_budget(train_manifest, budget);

    harness::DatasetManifest labeled;
    labeled.base_dir = train_manifest.base_dir;
    for (std::size_t i : split.labeled) labeled.samples.push_back(train_manifest.samples[i]);

    auto train_samples =
        load_event_samples(labeled, model.config.events_per_window, model.config.bins);
    if (train_samples.empty()) throw std::runtime_error("probe: no usable labeled samples");

    encoder::EncoderParams enc;
    if (random_init) {
        std::vector<std::uint32_t> widths;
        widths.push_back(train_samples.front().enc.input.channels);
        for (std::uint32_t wdt : model.config.hidden) widths.push_back(wdt);
        widths.push_back(model.config.d1);
        enc = encoder::make_encoder(widths, seed);
    } else {
        enc = model.enc;
    }

    std::vector<FeatureMap> feats;
    std::vector<LabelMap> labels;
    for (const auto& s : train_samples) {
        if (s.label_path.empty()) throw std::runtime_error("probe: labeled sample without labels");
        feats.push_back(encoder::forward(enc, s.enc.input, nullptr));
        labels.push_back(formats::read_lbl1_file(s.label_path));
    }
    std::vector<const FeatureMap*> fptr;
    std::vector<const LabelMap*> lptr;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        fptr.push_back(&feats[i]);
        lptr.push_back(&labels[i]);
    }
    openvocab::ProbeConfig pc;
    pc.steps = steps;
    pc.lr = lr;
    const openvocab::ProbeResult probe = openvocab::linear_probe(fptr, lptr, pc);

    fs::create_directories(out_dir);
    std::cout << "train_samples=" << feats.size() << "\ntrain_accuracy=" << probe.train_accuracy
              << "\ntrain_cross_entropy=" << probe.final_cross_entropy << "\n";

    if (!eval_manifest_path.empty()) {
        const auto eval_manifest = harness::load_manifest(eval_manifest_path);
        const auto eval_samples =
            load_event_samples(eval_manifest, model.config.events_per_window, model.config.bins);
        metrics::ConfusionMatrix cm(probe.head.classes);
        for (const auto& s : eval_samples) {
            if (s.label_path.empty()) continue;
            const FeatureMap f = encoder::forward(enc, s.enc.input, nullptr);
            const LabelMap pred = openvocab::predict_linear(f, probe.head);
            metrics::accumulate(cm, pred, formats::read_lbl1_file(s.label_path));
        }
        const auto rep = metrics::iou_scores(cm, strict_miou);
        write_text_file(out_dir + "/metrics.csv", metrics::report_csv(rep));
        std::cout << metrics::report_kv(rep);
    }
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& list_path, std::uint32_t classes, bool strict_miou,
             const std::string& out_path) {
    std::vector<std::pair<std::string, std::string>> pairs;
    if (!list_path.empty()) {
        std::istringstream in(read_text_file(list_path));
        std::string p, g;
        while (in >> p >> g) pairs.emplace_back(p, g);
    } else {
        if (pred_path.empty() || gt_path.empty())
            throw std::runtime_error("eval: need --pred and --gt, or --list");
        pairs.emplace_back(pred_path, gt_path);
    }
    std::uint32_t zc = classes;
    if (zc == 0) {
        for (const auto& [p, g] : pairs) {
            for (std::uint8_t id : formats::read_lbl1_file(p).ids)
                if (id != LabelMap::kIgnore && id + 1u > zc) zc = id + 1u;
            for (std::uint8_t id : formats::read_lbl1_file(g).ids)
                if (id != LabelMap::kIgnore && id + 1u > zc) zc = id + 1u;
        }
    }
    metrics::ConfusionMatrix cm(zc);
    for (const auto& [p, g] : pairs)
        metrics::accumulate(cm, formats::read_lbl1_file(p), formats::read_lbl1_file(g));
    const auto rep = metrics::iou_scores(cm, strict_miou);
    if (!out_path.empty()) write_text_file(out_path, metrics::report_csv(rep));
    std::cout << metrics::report_kv(rep);
    return 0;
}

int cmd_attention(const std::string& evt_path, const std::string& model_dir,
                  const std::string& texts_path, const std::string& class_name,
                  const std::string& out_path) {
    const ModelFiles model = load_model(model_dir);
    const auto texts = formats::read_temb1_file(texts_path);
    const int z = texts.find(class_name);
    if (z < 0) throw std::runtime_error("attention: unknown class " + class_name);

    const events::EventStream stream = formats::read_evt1_file(evt_path);
    auto enc = encode_final_window(stream, model.config.events_per_window, model.config.bins);
    if (!enc) throw std::runtime_error("attention: stream too short for one window");
    const FeatureMap features = encoder::forward(model.enc, enc->input, nullptr);
    const FeatureMap att = openvocab::attention_map(features, model.head_query,
                                                    texts.vectors[static_cast<std::size_t>(z)]);
    formats::write_similarity_pgm_file(out_path, att);
    double lo = 1.0, hi = -1.0;
    for (double v : att.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::cout << "min_sim=" << lo << "\nmax_sim=" << hi << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    apply_thread_env();
    CLI::App app{"OpenESS-style event segmentation pipeline"};
    app.require_subcommand(1);

    // synth ------------------------------------------------------------
    SynthOptions synth_opt;
    auto* sc_synth = app.add_subcommand("synth", "generate a synthetic event scene");
    sc_synth->add_option("--out", synth_opt.out)->required();
    sc_synth->add_option("--width", synth_opt.width);
    sc_synth->add_option("--height", synth_opt.height);
    sc_synth->add_option("--duration-ms", synth_opt.duration_ms);
    sc_synth->add_option("--fps", synth_opt.fps);
    sc_synth->add_option("--seed", synth_opt.seed);
    sc_synth->add_option("--theta", synth_opt.theta);
    sc_synth->add_option("--feature-dim", synth_opt.feature_dim);
    sc_synth->add_option("--feature-sigma", synth_opt.feature_sigma);
    sc_synth->add_option("--anchors", synth_opt.anchors_path);
    sc_synth->add_option("--lookback-ms", synth_opt.lookback_ms);
    sc_synth->add_option("--noise-rate", synth_opt.noise_rate);

    // encode -----------------------------------------------------------
    std::string enc_evt, enc_image, enc_out, enc_rep = "voxel";
    std::uint32_t enc_bins = 5, enc_epw = 2048, enc_spike_steps = 16;
    std::uint64_t enc_seed = 1;
    bool enc_spike_inverted = false;
    auto* sc_encode = app.add_subcommand("encode", "encode events or frames densely");
    sc_encode->add_option("--evt", enc_evt);
    sc_encode->add_option("--image", enc_image);
    sc_encode->add_option("--out", enc_out)->required();
    sc_encode->add_option("--rep", enc_rep)->check(CLI::IsMember({"voxel", "spike"}));
    sc_encode->add_option("--bins", enc_bins);
    sc_encode->add_option("--events-per-window", enc_epw);
    sc_encode->add_option("--spike-steps", enc_spike_steps);
    sc_encode->add_option("--seed", enc_seed);
    sc_encode->add_flag("--spike-inverted", enc_spike_inverted);

    // slic ---------------------------------------------------------------
    std::string slic_image, slic_out;
    std::uint32_t slic_segments = 0, slic_iters = 10;
    double slic_compactness = 10.0;
    std::uint64_t slic_seed = 1;
    auto* sc_slic = app.add_subcommand("slic", "superpixel segmentation of a frame");
    sc_slic->add_option("--image", slic_image)->required();
    sc_slic->add_option("--out", slic_out)->required();
    sc_slic->add_option("--segments", slic_segments);
    sc_slic->add_option("--compactness", slic_compactness);
    sc_slic->add_option("--iters", slic_iters);
    sc_slic->add_option("--seed", slic_seed);

    // distill ------------------------------------------------------------
    std::string di_manifest, di_texts, di_config, di_out;
    std::optional<std::uint64_t> di_seed;
    std::optional<std::string> di_loss_mode;
    std::optional<std::uint32_t> di_segments;
    bool di_no_normalize = false;
    auto* sc_distill = app.add_subcommand("distill", "train the event branch");
    sc_distill->add_option("--manifest", di_manifest)->required();
    sc_distill->add_option("--texts", di_texts)->required();
    sc_distill->add_option("--config", di_config);
    sc_distill->add_option("--out", di_out)->required();
    sc_distill->add_option("--seed", di_seed);
    sc_distill->add_option("--loss-mode", di_loss_mode)
        ->check(CLI::IsMember({"standard", "paper-literal"}));
    sc_distill->add_option("--segments", di_segments);
    sc_distill->add_flag("--no-normalize", di_no_normalize);

    // zeroshot -----------------------------------------------------------
    std::string zs_manifest, zs_model, zs_texts, zs_out;
    bool zs_strict = false;
    auto* sc_zeroshot = app.add_subcommand("zeroshot", "open-vocabulary prediction");
    sc_zeroshot->add_option("--manifest", zs_manifest)->required();
    sc_zeroshot->add_option("--model", zs_model)->required();
    sc_zeroshot->add_option("--texts", zs_texts)->required();
    sc_zeroshot->add_option("--out", zs_out)->required();
    sc_zeroshot->add_flag("--strict-miou", zs_strict);

    // probe --------------------------------------------------------------
    std::string pr_manifest, pr_eval_manifest, pr_model, pr_out;
    bool pr_random = false, pr_strict = false;
    std::uint64_t pr_seed = 1;
    double pr_budget = 1.0, pr_lr = 0.5;
    std::uint32_t pr_steps = 200;
    auto* sc_probe = app.add_subcommand("probe", "linear probing of frozen features");
    sc_probe->add_option("--manifest", pr_manifest)->required();
    sc_probe->add_option("--eval-manifest", pr_eval_manifest);
    sc_probe->add_option("--model", pr_model);
    sc_probe->add_option("--out", pr_out)->required();
    sc_probe->add_option("--budget", pr_budget);
    sc_probe->add_option("--steps", pr_steps);
    sc_probe->add_option("--lr", pr_lr);
    sc_probe->add_option("--seed", pr_seed);
    sc_probe->add_flag("--random-init", pr_random);
    sc_probe->add_flag("--strict-miou", pr_strict);

    // eval ----------------------------------------------------------------
    std::string ev_pred, ev_gt, ev_list, ev_out;
    std::uint32_t ev_classes = 0;
    bool ev_strict = false;
    auto* sc_eval = app.add_subcommand("eval", "confusion-matrix metrics");
    sc_eval->add_option("--pred", ev_pred);
    sc_eval->add_option("--gt", ev_gt);
    sc_eval->add_option("--list", ev_list);
    sc_eval->add_option("--classes", ev_classes);
    sc_eval->add_option("--out", ev_out);
    sc_eval->add_flag("--strict-miou", ev_strict);

    // attention -------------------------------------------------------------
    std::string at_evt, at_model, at_texts, at_class, at_out;
    auto* sc_attention = app.add_subcommand("attention", "language-guided attention map");
    sc_attention->add_option("--evt", at_evt)->required();
    sc_attention->add_option("--model", at_model)->required();
    sc_attention->add_option("--texts", at_texts)->required();
    sc_attention->add_option("--class", at_class)->required();
    sc_attention->add_option("--out", at_out)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sc_synth->parsed()) return cmd_synth(synth_opt);
        if (sc_encode->parsed()) {
            fs::create_directories(enc_out);
            if (enc_rep == "voxel") {
                if (enc_evt.empty()) throw std::runtime_error("encode: --evt required for voxel");
                const auto stream = formats::read_evt1_file(enc_evt);
                const auto grids = events::encode_windows(stream, enc_epw, enc_bins);
                std::uint64_t clamped = 0;
                for (std::size_t i = 0; i < grids.size(); ++i) {
                    formats::write_fmap1_file(
                        enc_out + "/window_" + sample_name(i).substr(1) + ".fmap1",
                        grids[i].as_feature_map());
                    clamped += grids[i].clamped_events;
                }
                std::cout << "windows=" << grids.size() << "\nclamped=" << clamped << "\n";
            } else {
                if (enc_image.empty())
                    throw std::runtime_error("encode: --image required for spike");
                const FeatureMap img = formats::read_image_or_fmap(enc_image);
                events::RateCodeParams rp;
                rp.steps = enc_spike_steps;
                rp.seed = enc_seed;
                rp.inverted = enc_spike_inverted;
                const auto spikes = events::rate_code(img, rp);
                formats::write_fmap1_file(enc_out + "/spike_acc.fmap1", spikes.accumulated());
                std::uint64_t total = 0;
                for (std::uint32_t c : spikes.counts) total += c;
                std::cout << "steps=" << spikes.steps << "\nspikes=" << total << "\n";
            }
            return 0;
        }
        if (sc_slic->parsed()) {
            const FeatureMap img = formats::read_image_or_fmap(slic_image);
            superpixel::SlicParams sp;
            sp.segments =
                slic_segments ? slic_segments : default_segments(img.width, img.height);
            sp.compactness = slic_compactness;
            sp.iters = slic_iters;
            sp.seed = slic_seed;
            const auto map = superpixel::slic(img, sp);
            formats::write_mask1_file(slic_out, map);
            std::cout << "segments=" << map.segment_count << "\n";
            return 0;
        }
        if (sc_distill->parsed())
            return cmd_distill(di_manifest, di_texts, di_config, di_out, di_seed, di_loss_mode,
                               di_no_normalize, di_segments);
        if (sc_zeroshot->parsed())
            return cmd_zeroshot(zs_manifest, zs_model, zs_texts, zs_out, zs_strict);
        if (sc_probe->parsed())
            return cmd_probe(pr_manifest, pr_eval_manifest, pr_model, pr_random, pr_seed,
                             pr_budget, pr_steps, pr_lr, pr_out, pr_strict);
        if (sc_eval->parsed())
            return cmd_eval(ev_pred, ev_gt, ev_list, ev_classes, ev_strict, ev_out);
        if (sc_attention->parsed())
            return cmd_attention(at_evt, at_model, at_texts, at_class, at_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}

}  // namespace openess
