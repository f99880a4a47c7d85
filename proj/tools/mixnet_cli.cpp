// Command-line front end: dataset synthesis, fold assignment, feature
// extraction, training, protocol evaluation and diagnostics. All randomness
// flows from --seed; every run writes a run.json with the resolved
// configuration next to its outputs.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixnet/diagnostics.hpp"
#include "mixnet/protocols.hpp"
#include "mixnet/synthdata.hpp"

using namespace mixnet;

namespace {

struct GlobalOpts {
    uint64_t seed = 0;
    int threads = 1;
    std::string out;
};

void add_global(CLI::App* cmd, GlobalOpts& g, bool out_required = true) {
    cmd->add_option("--seed", g.seed, "master random seed")->capture_default_str();
    cmd->add_option("--threads", g.threads, "worker parallelism cap")->capture_default_str();
    auto* o = cmd->add_option("--out", g.out, "output directory");
    if (out_required) o->required();
}

void write_run_json(const std::string& out_dir, const std::string& command, json options) {
    fs::create_directories(out_dir);
    json j;
    j["command"] = command;
    j["options"] = std::move(options);
    std::ofstream f(out_dir + "/run.json", std::ios::binary);
    f << j.dump(2) << "\n";
}

BackboneSpec make_backbone(const std::string& family, int input_size) {
    BackboneSpec spec;
    spec.family = backbone_family_from_string(family);
    if (input_size <= 0) input_size = spec.family == BackboneFamily::small_cnn ? 48 : 64;
    spec.input_h = spec.input_w = input_size;
    return spec;
}

std::vector<double> parse_alphas(const std::string& s) {
    std::vector<double> out;
    if (s.empty()) return out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::stod(cur));
    return out;
}

// ----- synth -----

struct SynthOpts {
    GlobalOpts g;
    int videos_per_class = 3, frames_per_video = 4, size = 48;
    double strength = 1.0;
    bool unseen = false;
};

int cmd_synth(const SynthOpts& o) {
    SynthSpec spec;
    spec.seed = o.g.seed;
    spec.height = spec.width = o.size;
    spec.videos_per_class = o.videos_per_class;
    spec.frames_per_video = o.frames_per_video;
    spec.strength = o.strength;
    write_run_json(o.g.out, "synth",
                   json{{"seed", o.g.seed},
                        {"size", o.size},
                        {"videos_per_class", o.videos_per_class},
                        {"frames_per_video", o.frames_per_video},
                        {"strength", o.strength},
                        {"unseen", o.unseen}});
    DatasetManifest m = o.unseen ? generate_unseen_masks(spec, o.g.out)
                                 : generate(spec, o.g.out);
    std::cout << "wrote " << m.records.size() << " frames and manifest.jsonl to " << o.g.out
              << "\n";
    return 0;
}

// ----- folds -----

struct FoldsOpts {
    GlobalOpts g;
    std::string manifest;
    int k = 3;
};

int cmd_folds(const FoldsOpts& o) {
    DatasetManifest m = load_manifest(o.manifest);
    DatasetManifest out = assign_folds_by_video(m, o.k, o.g.seed);
    fs::create_directories(o.g.out);
    write_run_json(o.g.out, "folds",
                   json{{"seed", o.g.seed}, {"manifest", o.manifest}, {"k", o.k}});
    std::string path = o.g.out + "/manifest_folds.jsonl";
    save_manifest(out, path);
    std::cout << "assigned " << o.k << " folds over "
              << collapse_to_videos(m).records.size() << " videos -> " << path << "\n";
    return 0;
}

// ----- features -----

struct FeaturesOpts {
    GlobalOpts g;
    std::string manifest;
    std::string descriptor = "lbp-hog";
};

int cmd_features(const FeaturesOpts& o) {
    DatasetManifest m = load_manifest(o.manifest);
    Descriptor d = o.descriptor == "mslbp" ? Descriptor::mslbp : Descriptor::lbp_hog;
    if (o.descriptor != "mslbp" && o.descriptor != "lbp-hog")
        throw std::invalid_argument("features: descriptor must be lbp-hog or mslbp");
    write_run_json(o.g.out, "features",
                   json{{"manifest", o.manifest}, {"descriptor", o.descriptor}});
    auto feats = extract_features(m, d);
    save_features(feats, o.g.out + "/features.bin");
    std::cout << "extracted " << feats.size() << " x " << feats.front().values.size() << " "
              << o.descriptor << " features -> " << o.g.out << "/features.bin\n";
    return 0;
}

// ----- train -----

struct TrainOpts {
    GlobalOpts g;
    std::string manifest;
    std::string backbone = "small-cnn";
    std::string alphas;
    std::string combine = "joint";
    std::string fusion = "softmax";
    std::string weights;
    int epochs = 10;
    int batch_size = 0;
    int input_size = 0;
    double lr = 0.01;
    bool vanilla = false;
};

int cmd_train(const TrainOpts& o) {
    DatasetManifest m = load_manifest(o.manifest);
    BackboneSpec spec = make_backbone(o.backbone, o.input_size);
    TrainConfig tcfg;
    tcfg.learning_rate = o.lr;
    tcfg.epochs = o.epochs;
    tcfg.seed = o.g.seed;
    tcfg.batch_size = o.batch_size > 0 ? o.batch_size : (o.vanilla ? 56 : 16);
    tcfg.log_path = o.g.out + "/train_log.jsonl";
    tcfg.checkpoint_dir = o.g.out + "/epochs";
    write_run_json(o.g.out, "train",
                   json{{"seed", o.g.seed},
                        {"manifest", o.manifest},
                        {"backbone", o.backbone},
                        {"alphas", o.alphas},
                        {"combine", o.combine},
                        {"fusion", o.fusion},
                        {"epochs", o.epochs},
                        {"batch_size", tcfg.batch_size},
                        {"learning_rate", o.lr},
                        {"vanilla", o.vanilla},
                        {"input_size", spec.input_h}});
    fs::create_directories(o.g.out);

    if (o.vanilla) {
        Rng rng(o.g.seed);
        VanillaModel model(spec, rng);
        if (!o.weights.empty()) {
            Archive a = Archive::load(o.weights);
            nn::load_params(model.backbone().graph, a, "net/");
        }
        train_vanilla(model, m, tcfg);
        save_vanilla(model, o.g.out + "/checkpoint", json{{"seed", o.g.seed}});
    } else if (o.combine == "joint") {
        MixNetConfig config = mixnet_config_for_manifest(m, spec, parse_alphas(o.alphas));
        if (o.fusion == "max")
            config.fusion = FusionKind::fixed_max;
        else if (o.fusion != "softmax")
            throw std::invalid_argument("train: --fusion must be softmax or max");
        Rng rng(o.g.seed);
        MixNetModel model(config, rng);
        if (!o.weights.empty()) {
            Archive a = Archive::load(o.weights);
            for (size_t bi = 0; bi < model.branch_count(); ++bi)
                nn::load_params(model.branch(bi).graph, a,
                                "branch." + model.branch_name(bi) + "/");
        }
        train_mixnet(model, m, tcfg);
        save_checkpoint(model, o.g.out + "/checkpoint",
                        json{{"seed", o.g.seed}, {"epochs", o.epochs}});
    } else if (o.combine == "max" || o.combine == "average") {
        CombineRule rule = o.combine == "max" ? CombineRule::max : CombineRule::average;
        IndependentPipeline pipe(spec, tcfg, rule);
        pipe.train(m);
        pipe.save(o.g.out + "/checkpoint");
    } else {
        throw std::invalid_argument("train: --combine must be joint, max or average");
    }
    std::cout << "checkpoint written to " << o.g.out << "/checkpoint\n";
    return 0;
}

// ----- evaluate -----

struct EvalOpts {
    GlobalOpts g;
    std::string protocol = "intra";
    std::string protocol_file;
    std::string manifest;
    std::string train_manifest, test_manifest;
    std::string models;  // intra run dir, for cross-unseen
    std::string method = "mixnet";
    std::string backbone = "small-cnn";
    std::string alphas;
    std::string metric = "acer";
    std::string aggregate = "frame";
    std::string fusion = "softmax";
    int epochs = 10;
    int batch_size = 0;
    int input_size = 0;
    int k = 0;  // fold count when the manifest has none
    double lr = 0.01;
};

PipelineFactory make_factory(const EvalOpts& o, const DatasetManifest& train_like) {
    BackboneSpec spec = make_backbone(o.backbone, o.input_size);
    TrainConfig tcfg;
    tcfg.learning_rate = o.lr;
    tcfg.epochs = o.epochs;
    tcfg.batch_size = o.batch_size > 0 ? o.batch_size : (o.method == "vanilla" ? 56 : 16);
    if (o.method == "mixnet") {
        MixNetConfig config = mixnet_config_for_manifest(train_like, spec, parse_alphas(o.alphas));
        if (o.fusion == "max")
            config.fusion = FusionKind::fixed_max;
        else if (o.fusion != "softmax")
            throw std::invalid_argument("evaluate: --fusion must be softmax or max");
        return [config, tcfg](int, uint64_t seed) -> std::unique_ptr<PadPipeline> {
            TrainConfig t = tcfg;
            t.seed = seed;
            return std::make_unique<MixnetPipeline>(config, t);
        };
    }
    if (o.method == "vanilla") {
        return [spec, tcfg](int, uint64_t seed) -> std::unique_ptr<PadPipeline> {
            TrainConfig t = tcfg;
            t.seed = seed;
            return std::make_unique<VanillaPipeline>(spec, t);
        };
    }
    if (o.method == "independent-max" || o.method == "independent-average") {
        CombineRule rule = o.method == "independent-max" ? CombineRule::max
                                                         : CombineRule::average;
        return [spec, tcfg, rule](int, uint64_t seed) -> std::unique_ptr<PadPipeline> {
            TrainConfig t = tcfg;
            t.seed = seed;
            return std::make_unique<IndependentPipeline>(spec, t, rule);
        };
    }
    if (o.method == "lbp-hog" || o.method == "mslbp") {
        Descriptor d = o.method == "mslbp" ? Descriptor::mslbp : Descriptor::lbp_hog;
        return [d](int, uint64_t seed) -> std::unique_ptr<PadPipeline> {
            return std::make_unique<SvmPipeline>(d, seed);
        };
    }
    throw std::invalid_argument("evaluate: unknown method '" + o.method + "'");
}

int cmd_evaluate(EvalOpts o) {
    std::map<std::string, ScenarioTag> tags = default_scenario_tags();
    if (!o.protocol_file.empty()) {
        std::ifstream in(o.protocol_file);
        if (!in) throw std::runtime_error("evaluate: cannot open " + o.protocol_file);
        ProtocolSpec spec = ProtocolSpec::from_json(json::parse(in));
        o.protocol = to_string(spec.name);
        if (!spec.scenario_tags.empty()) tags = spec.scenario_tags;
        if (spec.name == ProtocolName::predefined_split) {
            if (o.train_manifest.empty() && !spec.train_manifests.empty())
                o.train_manifest = spec.train_manifests.front();
            if (o.test_manifest.empty() && !spec.test_manifests.empty())
                o.test_manifest = spec.test_manifests.front();
        } else if (o.manifest.empty()) {
            if (!spec.train_manifests.empty())
                o.manifest = spec.train_manifests.front();
            else if (!spec.test_manifests.empty())
                o.manifest = spec.test_manifests.front();
        }
        if (o.k == 0) o.k = spec.fold_count;
        if (spec.threshold_source == ThresholdSource::dev_split_eer && o.metric == "acer")
            o.metric = "hter";
    }
    write_run_json(o.g.out, "evaluate",
                   json{{"seed", o.g.seed},
                        {"threads", o.g.threads},
                        {"protocol", o.protocol},
                        {"protocol_file", o.protocol_file},
                        {"manifest", o.manifest},
                        {"train_manifest", o.train_manifest},
                        {"test_manifest", o.test_manifest},
                        {"models", o.models},
                        {"method", o.method},
                        {"backbone", o.backbone},
                        {"alphas", o.alphas},
                        {"metric", o.metric},
                        {"aggregate", o.aggregate},
                        {"fusion", o.fusion},
                        {"epochs", o.epochs},
                        {"batch_size", o.batch_size},
                        {"input_size", o.input_size},
                        {"k", o.k},
                        {"learning_rate", o.lr}});

    if (o.aggregate != "frame" && o.aggregate != "video")
        throw std::invalid_argument("evaluate: --aggregate must be frame or video");

    if (o.protocol == "intra") {
        if (o.manifest.empty()) throw std::invalid_argument("evaluate: --manifest required");
        DatasetManifest m = load_manifest(o.manifest);
        if (m.fold_count < 2) {
            int k = o.k > 0 ? o.k : 3;
            m = assign_folds_by_video(m, k, o.g.seed);
        }
        auto factory = make_factory(o, m);
        RunResult res = run_intra(m, factory, o.g.seed, o.g.out, o.g.threads);
        if (o.aggregate == "video") {
            std::vector<FoldScores> agg;
            for (const auto& fs_ : res.fold_scores)
                agg.push_back({aggregate_scores_by_video(fs_.train),
                               aggregate_scores_by_video(fs_.test)});
            res.report = evaluate_protocol(agg, ThresholdSource::train_fold_eer);
            std::ofstream(o.g.out + "/metrics_video.json") << to_json(res.report).dump(2) << "\n";
        }
        std::cout << render_metrics_table({{factory(0, 0)->name(), res.report}});
        return 0;
    }
    if (o.protocol == "cross-unseen") {
        if (o.manifest.empty() || o.models.empty())
            throw std::invalid_argument("evaluate: cross-unseen needs --manifest and --models");
        if (o.aggregate == "video")
            throw std::invalid_argument(
                "evaluate: video aggregation is not supported for cross-unseen");
        DatasetManifest unseen = load_manifest(o.manifest);
        FoldModels fm = load_fold_models(o.models);
        std::vector<PadPipeline*> ptrs;
        for (auto& p : fm.pipelines) ptrs.push_back(p.get());
        CrossUnseenResult res = run_cross_unseen(ptrs, fm.thresholds, unseen, tags, o.g.out);
        std::cout << render_metrics_table({{fm.pipelines.front()->name(), res.report}});
        std::map<std::string, MeanStd> aw = res.report.attack_wise_apcer;
        std::cout << render_attackwise_table({{fm.pipelines.front()->name(), aw}});
        for (const auto& [key, tag] : res.tags)
            std::cout << "scenario " << key << ": " << to_string(tag) << "\n";
        return 0;
    }
    if (o.protocol == "predefined") {
        if (o.train_manifest.empty() || o.test_manifest.empty())
            throw std::invalid_argument(
                "evaluate: predefined needs --train-manifest and --test-manifest");
        DatasetManifest train = load_manifest(o.train_manifest);
        DatasetManifest test = load_manifest(o.test_manifest);
        PredefMetric metric = o.metric == "hter"  ? PredefMetric::hter
                              : o.metric == "eer" ? PredefMetric::eer
                                                  : PredefMetric::acer;
        auto factory = make_factory(o, train);
        RunResult res = run_predefined(train, test, factory, o.g.seed, metric, o.g.out);
        if (o.aggregate == "video") {
            std::vector<FoldScores> agg{{aggregate_scores_by_video(res.fold_scores[0].train),
                                         aggregate_scores_by_video(res.fold_scores[0].test)}};
            auto source = metric == PredefMetric::hter ? ThresholdSource::dev_split_eer
                                                       : ThresholdSource::train_fold_eer;
            res.report = evaluate_protocol(agg, source);
            if (metric == PredefMetric::eer) res.report.eer = roc_and_eer(agg[0].test).eer;
            std::ofstream(o.g.out + "/metrics_video.json") << to_json(res.report).dump(2) << "\n";
        }
        std::cout << render_metrics_table({{factory(0, 0)->name(), res.report}});
        if (res.report.hter) std::cout << strf("HTER: %.2f%%\n", 100.0 * *res.report.hter);
        if (res.report.eer) std::cout << strf("EER: %.2f%%\n", 100.0 * *res.report.eer);
        return 0;
    }
    throw std::invalid_argument("evaluate: --protocol must be intra, cross-unseen or predefined");
}

// ----- ablate -----

struct AblateOpts {
    GlobalOpts g;
    std::string manifest;
    std::string backbone = "small-cnn";
    std::string alphas;
    int epochs = 10;
    int batch_size = 16;
    int input_size = 0;
    int k = 0;
    double lr = 0.01;
};

int cmd_ablate(const AblateOpts& o) {
    write_run_json(o.g.out, "ablate",
                   json{{"seed", o.g.seed},
                        {"threads", o.g.threads},
                        {"manifest", o.manifest},
                        {"backbone", o.backbone},
                        {"alphas", o.alphas},
                        {"epochs", o.epochs},
                        {"batch_size", o.batch_size},
                        {"input_size", o.input_size},
                        {"k", o.k},
                        {"learning_rate", o.lr}});
    DatasetManifest m = load_manifest(o.manifest);
    if (m.fold_count < 2) m = assign_folds_by_video(m, o.k > 0 ? o.k : 3, o.g.seed);
    std::set<AttackType> present;
    for (const auto& r : m.records)
        if (r.attack_class.value != AttackType::genuine) present.insert(r.attack_class.value);
    if (present.size() < 2)
        throw std::invalid_argument("ablate: manifest needs at least two attack classes");

    BackboneSpec spec = make_backbone(o.backbone, o.input_size);
    TrainConfig tcfg;
    tcfg.learning_rate = o.lr;
    tcfg.epochs = o.epochs;
    tcfg.batch_size = o.batch_size;
    MixNetConfig config = mixnet_config_for_manifest(m, spec, parse_alphas(o.alphas));

    auto joint_factory = [&](int, uint64_t seed) -> std::unique_ptr<PadPipeline> {
        TrainConfig t = tcfg;
        t.seed = seed;
        return std::make_unique<MixnetPipeline>(config, t);
    };
    auto indep_factory = [&](CombineRule rule) {
        return [&, rule](int, uint64_t seed) -> std::unique_ptr<PadPipeline> {
            TrainConfig t = tcfg;
            t.seed = seed;
            return std::make_unique<IndependentPipeline>(spec, t, rule);
        };
    };

    RunResult joint = run_intra(m, joint_factory, o.g.seed, o.g.out + "/mixnet", o.g.threads);
    RunResult imax = run_intra(m, indep_factory(CombineRule::max), o.g.seed,
                               o.g.out + "/independent-max", o.g.threads);
    RunResult iavg = run_intra(m, indep_factory(CombineRule::average), o.g.seed,
                               o.g.out + "/independent-average", o.g.threads);

    std::vector<std::pair<std::string, std::map<std::string, MeanStd>>> rows{
        {"mixnet", joint.report.attack_wise_apcer},
        {"independent-max", imax.report.attack_wise_apcer},
        {"independent-average", iavg.report.attack_wise_apcer}};
    std::string table = render_attackwise_table(rows);
    table += "\n" + render_metrics_table({{"mixnet", joint.report},
                                          {"independent-max", imax.report},
                                          {"independent-average", iavg.report}});

    // flag attacks where joint training did not help
    int wins = 0, total = 0;
    std::string flags;
    for (const auto& [key, ms] : joint.report.attack_wise_apcer) {
        auto it = imax.report.attack_wise_apcer.find(key);
        if (it == imax.report.attack_wise_apcer.end()) continue;
        ++total;
        if (ms.mean <= it->second.mean + 1e-12)
            ++wins;
        else
            flags += strf("note: mixnet apcer %.4f > independent-max %.4f on '%s'\n", ms.mean,
                          it->second.mean, key.c_str());
    }
    table += flags;
    table += strf("mixnet <= independent-max on %d of %d attacks\n", wins, total);
    std::ofstream(o.g.out + "/ablation.txt") << table;
    std::cout << table;
    return 0;
}

// ----- cam -----

struct CamOpts {
    GlobalOpts g;
    std::string checkpoint;
    std::string manifest;
    std::string branch = "print";
    std::string weights_class = "attack";
    int limit = 16;
};

int cmd_cam(const CamOpts& o) {
    write_run_json(o.g.out, "cam",
                   json{{"checkpoint", o.checkpoint},
                        {"manifest", o.manifest},
                        {"branch", o.branch},
                        {"weights_class", o.weights_class},
                        {"limit", o.limit}});
    auto model = load_checkpoint(o.checkpoint);
    DatasetManifest m = load_manifest(o.manifest);
    fs::create_directories(o.g.out);
    int count = 0;
    for (const auto& r : m.records) {
        if (count >= o.limit) break;
        Image img = load_png(r.media_path);
        ActivationMap map = cam(*model, img, o.branch, o.weights_class == "attack", r.sample_id);
        save_activation_map(map, o.g.out + "/cam_" + r.sample_id + ".png");
        ++count;
    }
    std::cout << "wrote " << count << " activation maps to " << o.g.out << "\n";
    return 0;
}

// ----- scatter -----

struct ScatterOpts {
    GlobalOpts g;
    std::string scores;
};

int cmd_scatter(const ScatterOpts& o) {
    write_run_json(o.g.out, "scatter", json{{"scores", o.scores}});
    auto samples = load_scores(o.scores);
    fs::create_directories(o.g.out);
    score_scatter_export(samples, o.g.out + "/scatter.csv", o.g.out + "/scatter.png",
                         o.g.out + "/scatter.svg");
    std::cout << "wrote scatter.csv/.png/.svg to " << o.g.out << "\n";
    return 0;
}

// ----- roc -----

struct RocOpts {
    GlobalOpts g;
    std::vector<std::string> scores;
    std::vector<std::string> labels;
};

int cmd_roc(const RocOpts& o) {
    write_run_json(o.g.out, "roc", json{{"scores", o.scores}, {"labels", o.labels}});
    std::vector<RocSeries> series;
    for (size_t i = 0; i < o.scores.size(); ++i) {
        RocSeries s;
        s.label = i < o.labels.size() ? o.labels[i] : fs::path(o.scores[i]).stem().string();
        s.points = roc_and_eer(load_scores(o.scores[i])).points;
        series.push_back(std::move(s));
    }
    fs::create_directories(o.g.out);
    roc_plot(series, o.g.out + "/roc.png", o.g.out + "/roc.svg");
    std::cout << "wrote roc.png/.svg with " << series.size() << " series to " << o.g.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MixNet presentation-attack-detection toolkit"};
    app.require_subcommand(1);

    SynthOpts so;
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    add_global(synth, so.g);
    synth->add_option("--videos-per-class", so.videos_per_class)->capture_default_str();
    synth->add_option("--frames-per-video", so.frames_per_video)->capture_default_str();
    synth->add_option("--size", so.size, "square image size")->capture_default_str();
    synth->add_option("--strength", so.strength, "class signature strength in (0,1]")
        ->capture_default_str();
    synth->add_flag("--unseen", so.unseen, "emit unseen mask subtypes instead of training data");

    FoldsOpts fo;
    auto* folds = app.add_subcommand("folds", "assign cross-validation folds by video");
    add_global(folds, fo.g);
    folds->add_option("--manifest", fo.manifest)->required();
    folds->add_option("--k", fo.k, "fold count")->capture_default_str();

    FeaturesOpts feo;
    auto* features = app.add_subcommand("features", "extract handcrafted features");
    add_global(features, feo.g);
    features->add_option("--manifest", feo.manifest)->required();
    features->add_option("--descriptor", feo.descriptor, "lbp-hog or mslbp")
        ->capture_default_str();

    TrainOpts to_;
    auto* train = app.add_subcommand("train", "train a detector on a manifest");
    add_global(train, to_.g);
    train->add_option("--manifest", to_.manifest)->required();
    train->add_option("--backbone", to_.backbone, "small-cnn, resnet50 or densenet121")
        ->capture_default_str();
    train->add_option("--alphas", to_.alphas, "loss coefficients a1,a2,a3,a4");
    train->add_option("--combine", to_.combine, "joint, max or average")->capture_default_str();
    train->add_option("--fusion", to_.fusion, "softmax (trainable) or max (fixed)")
        ->capture_default_str();
    train->add_option("--weights", to_.weights, "initial weights archive");
    train->add_option("--epochs", to_.epochs)->capture_default_str();
    train->add_option("--batch-size", to_.batch_size, "default 16 joint / 56 vanilla");
    train->add_option("--input-size", to_.input_size);
    train->add_option("--lr", to_.lr, "SGD learning rate")->capture_default_str();
    train->add_flag("--vanilla", to_.vanilla, "single-backbone binary classifier");

    EvalOpts eo;
    auto* evaluate = app.add_subcommand("evaluate", "run an evaluation protocol");
    add_global(evaluate, eo.g);
    evaluate->add_option("--protocol", eo.protocol, "intra, cross-unseen or predefined")
        ->capture_default_str();
    evaluate->add_option("--protocol-file", eo.protocol_file,
                         "JSON protocol definition (overrides --protocol and manifests)");
    evaluate->add_option("--manifest", eo.manifest);
    evaluate->add_option("--train-manifest", eo.train_manifest);
    evaluate->add_option("--test-manifest", eo.test_manifest);
    evaluate->add_option("--models", eo.models, "intra run directory (cross-unseen)");
    evaluate->add_option("--method", eo.method,
                         "mixnet, vanilla, independent-max, independent-average, lbp-hog, mslbp")
        ->capture_default_str();
    evaluate->add_option("--backbone", eo.backbone)->capture_default_str();
    evaluate->add_option("--alphas", eo.alphas);
    evaluate->add_option("--metric", eo.metric, "acer, hter or eer")->capture_default_str();
    evaluate->add_option("--aggregate", eo.aggregate, "frame or video scoring")
        ->capture_default_str();
    evaluate->add_option("--fusion", eo.fusion, "softmax (trainable) or max (fixed)")
        ->capture_default_str();
    evaluate->add_option("--epochs", eo.epochs)->capture_default_str();
    evaluate->add_option("--batch-size", eo.batch_size);
    evaluate->add_option("--input-size", eo.input_size);
    evaluate->add_option("--k", eo.k, "fold count if the manifest has none");
    evaluate->add_option("--lr", eo.lr)->capture_default_str();

    AblateOpts ao;
    auto* ablate = app.add_subcommand("ablate",
                                      "joint vs independently trained specialists comparison");
    add_global(ablate, ao.g);
    ablate->add_option("--manifest", ao.manifest)->required();
    ablate->add_option("--backbone", ao.backbone)->capture_default_str();
    ablate->add_option("--alphas", ao.alphas);
    ablate->add_option("--epochs", ao.epochs)->capture_default_str();
    ablate->add_option("--batch-size", ao.batch_size)->capture_default_str();
    ablate->add_option("--input-size", ao.input_size);
    ablate->add_option("--k", ao.k);
    ablate->add_option("--lr", ao.lr)->capture_default_str();

    CamOpts co;
    auto* camc = app.add_subcommand("cam", "class activation maps for a trained model");
    add_global(camc, co.g);
    camc->add_option("--checkpoint", co.checkpoint)->required();
    camc->add_option("--manifest", co.manifest)->required();
    camc->add_option("--branch", co.branch, "print, replay or mask")->capture_default_str();
    camc->add_option("--weights-class", co.weights_class, "attack or genuine")
        ->capture_default_str();
    camc->add_option("--limit", co.limit)->capture_default_str();

    ScatterOpts sco;
    auto* scatter = app.add_subcommand("scatter", "3D branch-score scatter from a score file");
    add_global(scatter, sco.g);
    scatter->add_option("--scores", sco.scores)->required();

    RocOpts ro;
    auto* roc = app.add_subcommand("roc", "ROC figure from one or more score files");
    add_global(roc, ro.g);
    roc->add_option("--scores", ro.scores)->required()->delimiter(',');
    roc->add_option("--labels", ro.labels)->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) return cmd_synth(so);
        if (*folds) return cmd_folds(fo);
        if (*features) return cmd_features(feo);
        if (*train) return cmd_train(to_);
        if (*evaluate) return cmd_evaluate(eo);
        if (*ablate) return cmd_ablate(ao);
        if (*camc) return cmd_cam(co);
        if (*scatter) return cmd_scatter(sco);
        if (*roc) return cmd_roc(ro);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
