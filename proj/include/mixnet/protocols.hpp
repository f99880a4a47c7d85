#ifndef MIXNET_PROTOCOLS_HPP
#define MIXNET_PROTOCOLS_HPP

#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "mixnet/svm.hpp"
#include "mixnet/trainer.hpp"

namespace mixnet {

enum class ProtocolName { intra_database, cross_unseen, predefined_split };

inline const char* to_string(ProtocolName p) {
    switch (p) {
        case ProtocolName::intra_database: return "intra";
        case ProtocolName::cross_unseen: return "cross-unseen";
        case ProtocolName::predefined_split: return "predefined";
    }
    return "?";
}

enum class ScenarioTag { seen, cross, unseen };

inline const char* to_string(ScenarioTag t) {
    switch (t) {
        case ScenarioTag::seen: return "seen";
        case ScenarioTag::cross: return "cross";
        case ScenarioTag::unseen: return "unseen";
    }
    return "?";
}

// Named evaluation protocol: manifests, fold policy, threshold policy and
// the seen/cross/unseen tag of each attack key.
struct ProtocolSpec {
    ProtocolName name = ProtocolName::intra_database;
    std::vector<std::string> train_manifests;
    std::vector<std::string> test_manifests;
    int fold_count = 3;
    ThresholdSource threshold_source = ThresholdSource::train_fold_eer;
    std::map<std::string, ScenarioTag> scenario_tags;

    json to_json() const {
        json j;
        j["name"] = to_string(name);
        j["train_manifests"] = train_manifests;
        j["test_manifests"] = test_manifests;
        j["fold_count"] = fold_count;
        j["threshold_source"] = to_string(threshold_source);
        json tags = json::object();
        for (const auto& [k, v] : scenario_tags) tags[k] = to_string(v);
        j["scenario_tags"] = tags;
        return j;
    }

    static ProtocolSpec from_json(const json& j) {
        ProtocolSpec s;
        std::string n = j.at("name").get<std::string>();
        if (n == "intra")
            s.name = ProtocolName::intra_database;
        else if (n == "cross-unseen")
            s.name = ProtocolName::cross_unseen;
        else if (n == "predefined")
            s.name = ProtocolName::predefined_split;
        else
            throw std::invalid_argument("unknown protocol name: " + n);
        s.train_manifests = j.value("train_manifests", std::vector<std::string>{});
        s.test_manifests = j.value("test_manifests", std::vector<std::string>{});
        s.fold_count = j.value("fold_count", 3);
        std::string ts = j.value("threshold_source", "train_fold_eer");
        s.threshold_source = ts == "dev_split_eer" ? ThresholdSource::dev_split_eer
                                                   : ThresholdSource::train_fold_eer;
        if (j.contains("scenario_tags"))
            for (const auto& [k, v] : j.at("scenario_tags").items()) {
                std::string t = v.get<std::string>();
                s.scenario_tags[k] = t == "seen"    ? ScenarioTag::seen
                                     : t == "cross" ? ScenarioTag::cross
                                                    : ScenarioTag::unseen;
            }
        return s;
    }
};

// default tagging for the cross/unseen protocol composition
inline std::map<std::string, ScenarioTag> default_scenario_tags() {
    return {{"genuine", ScenarioTag::seen},
            {"silicone", ScenarioTag::cross},
            {"paper", ScenarioTag::unseen},
            {"half", ScenarioTag::unseen},
            {"transparent", ScenarioTag::unseen},
            {"mannequin", ScenarioTag::unseen}};
}

// A trainable scoring pipeline: the protocol harness stays agnostic of
// whether the scores come from MixNet, a vanilla CNN, independent
// specialists or a handcrafted-feature SVM.
class PadPipeline {
  public:
    virtual ~PadPipeline() = default;
    virtual std::string name() const = 0;
    virtual void train(const DatasetManifest& manifest) = 0;
    virtual std::vector<ScoredSample> score(const DatasetManifest& manifest) = 0;
    virtual const std::set<std::string>& trained_on() const = 0;
    virtual void save(const std::string& path) = 0;
};

using PipelineFactory = std::function<std::unique_ptr<PadPipeline>(int fold, uint64_t seed)>;

class MixnetPipeline : public PadPipeline {
  public:
    MixnetPipeline(MixNetConfig config, TrainConfig tcfg)
        : config_(std::move(config)), tcfg_(tcfg) {}

    std::string name() const override {
        return std::string("mixnet-") + to_string(config_.branches.front().second.family);
    }
    void train(const DatasetManifest& m) override {
        Rng rng(tcfg_.seed);
        model_ = std::make_unique<MixNetModel>(config_, rng);
        journal_ = train_mixnet(*model_, m, tcfg_);
    }
    std::vector<ScoredSample> score(const DatasetManifest& m) override {
        if (!model_) throw std::runtime_error("mixnet pipeline: score before train");
        return score_with_mixnet(*model_, m);
    }
    const std::set<std::string>& trained_on() const override { return journal_.seen_ids; }
    void save(const std::string& path) override {
        json meta{{"seed", tcfg_.seed}, {"epochs", tcfg_.epochs}, {"alphas", config_.alphas}};
        save_checkpoint(*model_, path, meta);
    }

    MixNetModel* model() { return model_.get(); }
    const TrainJournal& journal() const { return journal_; }

  private:
    MixNetConfig config_;
    TrainConfig tcfg_;
    std::unique_ptr<MixNetModel> model_;
    TrainJournal journal_;
};

class VanillaPipeline : public PadPipeline {
  public:
    VanillaPipeline(BackboneSpec spec, TrainConfig tcfg) : spec_(spec), tcfg_(tcfg) {}

    std::string name() const override { return to_string(spec_.family); }
    void train(const DatasetManifest& m) override {
        Rng rng(tcfg_.seed);
        model_ = std::make_unique<VanillaModel>(spec_, rng);
        journal_ = train_vanilla(*model_, m, tcfg_);
    }
    std::vector<ScoredSample> score(const DatasetManifest& m) override {
        if (!model_) throw std::runtime_error("vanilla pipeline: score before train");
        return score_with_vanilla(*model_, m);
    }
    const std::set<std::string>& trained_on() const override { return journal_.seen_ids; }
    void save(const std::string& path) override {
        save_vanilla(*model_, path, json{{"seed", tcfg_.seed}});
    }

    VanillaModel* model() { return model_.get(); }

  private:
    BackboneSpec spec_;
    TrainConfig tcfg_;
    std::unique_ptr<VanillaModel> model_;
    TrainJournal journal_;
};

class IndependentPipeline : public PadPipeline {
  public:
    IndependentPipeline(BackboneSpec spec, TrainConfig tcfg, CombineRule combine)
        : spec_(spec), tcfg_(tcfg), combine_(combine) {}

    std::string name() const override {
        return std::string("independent-") + to_string(combine_);
    }
    void train(const DatasetManifest& m) override {
        journals_.clear();
        model_ = std::make_unique<IndependentModel>(
            train_independent(spec_, m, tcfg_, combine_, &journals_));
        seen_.clear();
        for (const auto& [_, j] : journals_)
            seen_.insert(j.seen_ids.begin(), j.seen_ids.end());
    }
    std::vector<ScoredSample> score(const DatasetManifest& m) override {
        if (!model_) throw std::runtime_error("independent pipeline: score before train");
        return score_with_independent(*model_, m);
    }
    const std::set<std::string>& trained_on() const override { return seen_; }
    void save(const std::string& path) override {
        Archive a;
        a.meta["kind"] = "independent";
        a.meta["combine"] = to_string(combine_);
        a.meta["family"] = to_string(spec_.family);
        a.meta["input_h"] = spec_.input_h;
        a.meta["input_w"] = spec_.input_w;
        json names = json::array();
        for (auto& [attack, model] : model_->specialists) {
            names.push_back(attack);
            nn::store_params(model->backbone().graph, a, "spec_" + attack + "/");
        }
        a.meta["specialists"] = names;
        a.save(path);
    }

    IndependentModel* model() { return model_.get(); }
    const std::map<std::string, TrainJournal>& journals() const { return journals_; }

  private:
    BackboneSpec spec_;
    TrainConfig tcfg_;
    CombineRule combine_;
    std::unique_ptr<IndependentModel> model_;
    std::map<std::string, TrainJournal> journals_;
    std::set<std::string> seen_;
};

enum class Descriptor { lbp_hog, mslbp };

inline const char* to_string(Descriptor d) {
    return d == Descriptor::lbp_hog ? "lbp-hog" : "mslbp";
}

inline FeatureVector extract_descriptor(const Image& img, Descriptor d) {
    Image gray = to_gray(img);
    if (gray.height != 64 || gray.width != 64) gray = resize_bilinear(gray, 64, 64);
    return d == Descriptor::lbp_hog ? lbp_hog_features(gray) : multiscale_lbp(gray);
}

// Feature extraction with an optional on-disk cache under $MIXNET_CACHE.
inline std::vector<FeatureVector> extract_features(const DatasetManifest& m, Descriptor d) {
    const char* cache_dir = std::getenv("MIXNET_CACHE");
    std::string cache_path;
    if (cache_dir && *cache_dir) {
        uint64_t h = fnv1a(std::string(to_string(d)));
        for (const auto& r : m.records) {
            h = fnv1a(r.sample_id, h);
            h = fnv1a(r.media_path, h);
        }
        fs::create_directories(cache_dir);
        cache_path = strf("%s/feat_%016llx.bin", cache_dir,
                          static_cast<unsigned long long>(h));
        if (fs::exists(cache_path)) {
            auto cached = load_features(cache_path);
            if (cached.size() == m.records.size()) return cached;
        }
    }
    std::vector<FeatureVector> out;
    out.reserve(m.records.size());
    for (const auto& r : m.records) out.push_back(extract_descriptor(load_png(r.media_path), d));
    if (!cache_path.empty()) save_features(out, cache_path);
    return out;
}

class SvmPipeline : public PadPipeline {
  public:
    SvmPipeline(Descriptor descriptor, uint64_t seed = 0)
        : descriptor_(descriptor), seed_(seed) {}

    std::string name() const override {
        return descriptor_ == Descriptor::lbp_hog ? "lbp+hog" : "multiscale-lbp";
    }

    void train(const DatasetManifest& m) override {
        auto feats = extract_features(m, descriptor_);
        std::vector<int> labels;
        for (const auto& r : m.records) {
            labels.push_back(label_for(r.attack_class).final_label);
            seen_.insert(r.sample_id);
        }
        // gamma grid around the inverse mean pairwise squared distance
        double md = mean_sq_dist(feats);
        std::vector<double> gammas{0.25 / md, 1.0 / md, 4.0 / md};
        std::vector<double> Cs{1.0, 10.0, 100.0};
        SvmConfig best = svm_grid_search(feats, labels, Cs, gammas, seed_);
        model_ = train_svm(feats, labels, best);
    }

    std::vector<ScoredSample> score(const DatasetManifest& m) override {
        auto feats = extract_features(m, descriptor_);
        std::vector<ScoredSample> out;
        for (size_t i = 0; i < m.records.size(); ++i) {
            const auto& r = m.records[i];
            ScoredSample s;
            s.sample_id = r.sample_id;
            s.attack_class = r.attack_class;
            s.truth = label_for(r.attack_class).final_label;
            s.final_score = model_.predict_score(feats[i]);
            out.push_back(std::move(s));
        }
        return out;
    }

    const std::set<std::string>& trained_on() const override { return seen_; }
    void save(const std::string& path) override { save_svm(model_, path); }

  private:
    static double mean_sq_dist(const std::vector<FeatureVector>& feats) {
        double sum = 0.0;
        size_t count = 0;
        size_t step = std::max<size_t>(1, feats.size() / 64);
        for (size_t i = 0; i < feats.size(); i += step)
            for (size_t j = i + step; j < feats.size(); j += step) {
                double d2 = 0.0;
                for (size_t k = 0; k < feats[i].values.size(); ++k) {
                    double d = feats[i].values[k] - feats[j].values[k];
                    d2 += d * d;
                }
                sum += d2;
                ++count;
            }
        return count && sum > 0 ? sum / count : 1.0;
    }

    Descriptor descriptor_;
    uint64_t seed_;
    SvmModel model_;
    std::set<std::string> seen_;
};

// Scoring-only pipeline restored from a checkpoint; training is refused.
class LoadedPipeline : public PadPipeline {
  public:
    enum class Kind { mixnet, vanilla, independent, svm };

    explicit LoadedPipeline(const std::string& path) : path_(path) {
        Archive a = Archive::load(path);
        std::string kind = a.meta.value("kind", "");
        if (kind == "mixnet") {
            kind_ = Kind::mixnet;
            mixnet_ = load_checkpoint(path);
            name_ = std::string("mixnet-") +
                    to_string(mixnet_->config().branches.front().second.family);
        } else if (kind == "vanilla") {
            kind_ = Kind::vanilla;
            vanilla_ = load_vanilla(path);
            name_ = to_string(vanilla_->spec().family);
        } else if (kind == "independent") {
            kind_ = Kind::independent;
            BackboneSpec spec;
            spec.family = backbone_family_from_string(a.meta.at("family").get<std::string>());
            spec.input_h = a.meta.at("input_h").get<int>();
            spec.input_w = a.meta.at("input_w").get<int>();
            independent_ = std::make_unique<IndependentModel>();
            independent_->combine = a.meta.at("combine").get<std::string>() == "max"
                                        ? CombineRule::max
                                        : CombineRule::average;
            Rng rng(0);
            for (const auto& attack : a.meta.at("specialists")) {
                auto m = std::make_unique<VanillaModel>(spec, rng);
                nn::load_params(m->backbone().graph, a,
                                "spec_" + attack.get<std::string>() + "/");
                independent_->specialists.emplace_back(attack.get<std::string>(), std::move(m));
            }
            name_ = std::string("independent-") + to_string(independent_->combine);
        } else if (kind == "svm") {
            kind_ = Kind::svm;
            svm_ = load_svm(path);
            descriptor_ = svm_.descriptor_id == "mslbp" ? Descriptor::mslbp : Descriptor::lbp_hog;
            name_ = svm_.descriptor_id;
        } else {
            throw std::runtime_error("load_pipeline: unknown checkpoint kind in " + path);
        }
    }

    std::string name() const override { return name_; }
    void train(const DatasetManifest&) override {
        throw std::runtime_error("loaded pipeline is scoring-only; cannot train");
    }
    std::vector<ScoredSample> score(const DatasetManifest& m) override {
        switch (kind_) {
            case Kind::mixnet: return score_with_mixnet(*mixnet_, m);
            case Kind::vanilla: return score_with_vanilla(*vanilla_, m);
            case Kind::independent: return score_with_independent(*independent_, m);
            case Kind::svm: {
                auto feats = extract_features(m, descriptor_);
                std::vector<ScoredSample> out;
                for (size_t i = 0; i < m.records.size(); ++i) {
                    ScoredSample s;
                    s.sample_id = m.records[i].sample_id;
                    s.attack_class = m.records[i].attack_class;
                    s.truth = label_for(s.attack_class).final_label;
                    s.final_score = svm_.predict_score(feats[i]);
                    out.push_back(std::move(s));
                }
                return out;
            }
        }
        throw std::logic_error("unreachable");
    }
    const std::set<std::string>& trained_on() const override { return empty_; }
    void save(const std::string& path) override {
        fs::copy_file(path_, path, fs::copy_options::overwrite_existing);
    }

    MixNetModel* mixnet_model() { return mixnet_.get(); }

  private:
    std::string path_, name_;
    Kind kind_ = Kind::mixnet;
    std::unique_ptr<MixNetModel> mixnet_;
    std::unique_ptr<VanillaModel> vanilla_;
    std::unique_ptr<IndependentModel> independent_;
    SvmModel svm_;
    Descriptor descriptor_ = Descriptor::lbp_hog;
    std::set<std::string> empty_;
};

inline std::unique_ptr<PadPipeline> load_pipeline(const std::string& path) {
    return std::make_unique<LoadedPipeline>(path);
}

// --- protocol drivers ---

struct FoldComposition {
    int fold = 0;
    std::map<std::string, int> train_counts, test_counts;
};

struct RunResult {
    MetricsReport report;
    std::vector<FoldScores> fold_scores;
    std::vector<std::unique_ptr<PadPipeline>> pipelines;  // one per fold
    std::vector<FoldComposition> compositions;
    std::vector<std::string> checkpoint_paths;
};

inline std::map<std::string, int> class_counts(const std::vector<SampleRecord>& recs) {
    std::map<std::string, int> counts;
    for (const auto& r : recs) counts[r.attack_class.report_key()]++;
    return counts;
}

// K-fold cross-validation: train on k-1 folds, threshold from the training
// folds' scores, test on the held-out fold. Fold models are independent and
// may train concurrently.
inline RunResult run_intra(const DatasetManifest& manifest, const PipelineFactory& factory,
                           uint64_t seed, const std::string& out_dir = "", int threads = 1) {
    const int k = manifest.fold_count;
    if (k < 2)
        throw std::invalid_argument("run_intra: manifest needs fold assignments (k >= 2)");
    RunResult res;
    res.pipelines.resize(k);
    res.fold_scores.resize(k);
    res.compositions.resize(k);
    if (!out_dir.empty()) fs::create_directories(out_dir);

    auto run_fold = [&](int f) {
        auto train_recs = records_in_fold(manifest, f, /*invert=*/true);
        auto test_recs = records_in_fold(manifest, f, /*invert=*/false);
        DatasetManifest train_m = submanifest(manifest, train_recs, strf("fold%d_train", f));
        DatasetManifest test_m = submanifest(manifest, test_recs, strf("fold%d_test", f));
        auto pipeline = factory(f, seed + static_cast<uint64_t>(f));
        pipeline->train(train_m);
        // data hygiene: the training log must not contain any test id
        for (const auto& r : test_m.records)
            if (pipeline->trained_on().count(r.sample_id))
                throw std::runtime_error("run_intra: test sample '" + r.sample_id +
                                         "' appeared in a training batch");
        FoldScores fs_;
        fs_.train = pipeline->score(train_m);
        fs_.test = pipeline->score(test_m);
        res.compositions[f] = {f, class_counts(train_recs), class_counts(test_recs)};
        res.fold_scores[f] = std::move(fs_);
        res.pipelines[f] = std::move(pipeline);
    };

    if (threads <= 1 || k == 1) {
        for (int f = 0; f < k; ++f) run_fold(f);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(k);
        for (int f = 0; f < k; ++f)
            pool.emplace_back([&, f] {
                try {
                    run_fold(f);
                } catch (...) {
                    errors[f] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    res.report = evaluate_protocol(res.fold_scores, ThresholdSource::train_fold_eer);

    if (!out_dir.empty()) {
        for (int f = 0; f < k; ++f) {
            std::string fd = out_dir + strf("/%d", f);
            fs::create_directories(fd);
            res.pipelines[f]->save(fd + "/checkpoint");
            res.checkpoint_paths.push_back(fd + "/checkpoint");
            save_scores(res.fold_scores[f].test, fd + "/scores.jsonl");
            json fm;
            fm["fold"] = f;
            fm["apcer"] = res.report.per_fold[f].apcer;
            fm["bpcer"] = res.report.per_fold[f].bpcer;
            fm["acer"] = res.report.per_fold[f].acer;
            fm["threshold"] = res.report.per_fold[f].threshold.value;
            fm["threshold_source"] = to_string(res.report.per_fold[f].threshold.source);
            json comp;
            comp["train"] = res.compositions[f].train_counts;
            comp["test"] = res.compositions[f].test_counts;
            fm["composition"] = comp;
            std::ofstream(fd + "/metrics.json") << fm.dump(2) << "\n";
        }
        std::ofstream(out_dir + "/metrics.json") << to_json(res.report).dump(2) << "\n";
    }
    return res;
}

struct CrossUnseenResult {
    MetricsReport report;
    std::map<std::string, ScenarioTag> tags;  // per report key
};

// Evaluate the intra-trained fold models on the unseen-attack manifest.
// No training and no threshold fitting happens here: each model reuses the
// EER threshold from its own intra-database training folds.
inline CrossUnseenResult run_cross_unseen(
    const std::vector<PadPipeline*>& pipelines, const std::vector<Threshold>& thresholds,
    const DatasetManifest& unseen,
    const std::map<std::string, ScenarioTag>& tags = default_scenario_tags(),
    const std::string& out_dir = "") {
    if (pipelines.empty() || pipelines.size() != thresholds.size())
        throw std::invalid_argument("run_cross_unseen: need one threshold per fold model");
    for (const auto& r : unseen.records)
        if (r.attack_class.value == AttackType::mask && !r.attack_class.mask_subtype)
            throw std::invalid_argument("run_cross_unseen: mask record '" + r.sample_id +
                                        "' lacks a subtype tag");
    CrossUnseenResult res;
    std::vector<double> apcers, bpcers, acers;
    std::map<std::string, std::vector<double>> attackwise;
    MetricsReport rep;
    for (size_t f = 0; f < pipelines.size(); ++f) {
        auto scores = pipelines[f]->score(unseen);
        const Threshold& thr = thresholds[f];
        FoldMetrics fm;
        fm.threshold = thr;
        fm.apcer = apcer(scores, thr.value);
        fm.bpcer = bpcer(scores, thr.value);
        fm.acer = acer(fm.apcer, fm.bpcer);
        fm.attack_wise_apcer = attack_wise_apcer_at(scores, thr.value);
        apcers.push_back(fm.apcer);
        bpcers.push_back(fm.bpcer);
        acers.push_back(fm.acer);
        for (const auto& [k, v] : fm.attack_wise_apcer) attackwise[k].push_back(v);
        rep.per_fold.push_back(std::move(fm));
    }
    rep.apcer = mean_std(apcers);
    rep.bpcer = mean_std(bpcers);
    rep.acer = mean_std(acers);
    for (const auto& [k, v] : attackwise) rep.attack_wise_apcer[k] = mean_std(v);
    res.report = std::move(rep);
    for (const auto& [k, _] : res.report.attack_wise_apcer) {
        auto it = tags.find(k);
        res.tags[k] = it != tags.end() ? it->second : ScenarioTag::unseen;
    }
    res.tags["genuine"] = tags.count("genuine") ? tags.at("genuine") : ScenarioTag::seen;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        json j = to_json(res.report);
        json tj = json::object();
        for (const auto& [k, v] : res.tags) tj[k] = to_string(v);
        j["scenario_tags"] = tj;
        std::ofstream(out_dir + "/metrics.json") << j.dump(2) << "\n";
    }
    return res;
}

inline CrossUnseenResult run_cross_unseen(
    RunResult& intra, const DatasetManifest& unseen,
    const std::map<std::string, ScenarioTag>& tags = default_scenario_tags(),
    const std::string& out_dir = "") {
    std::vector<PadPipeline*> pipelines;
    std::vector<Threshold> thresholds;
    for (size_t f = 0; f < intra.pipelines.size(); ++f) {
        pipelines.push_back(intra.pipelines[f].get());
        thresholds.push_back(intra.report.per_fold[f].threshold);
    }
    return run_cross_unseen(pipelines, thresholds, unseen, tags, out_dir);
}

// Restore per-fold checkpoints and thresholds from an intra-protocol run
// directory laid out as <dir>/<fold>/{checkpoint,metrics.json}.
struct FoldModels {
    std::vector<std::unique_ptr<PadPipeline>> pipelines;
    std::vector<Threshold> thresholds;
};

inline FoldModels load_fold_models(const std::string& run_dir) {
    FoldModels fm;
    for (int f = 0;; ++f) {
        std::string fd = run_dir + strf("/%d", f);
        if (!fs::exists(fd + "/checkpoint")) break;
        fm.pipelines.push_back(load_pipeline(fd + "/checkpoint"));
        std::ifstream mj(fd + "/metrics.json");
        if (!mj) throw std::runtime_error("load_fold_models: missing " + fd + "/metrics.json");
        json j = json::parse(mj);
        Threshold t;
        t.value = j.at("threshold").get<double>();
        t.source = j.value("threshold_source", "train_fold_eer") == std::string("dev_split_eer")
                       ? ThresholdSource::dev_split_eer
                       : ThresholdSource::train_fold_eer;
        t.fit_on = "train";
        fm.thresholds.push_back(t);
    }
    if (fm.pipelines.empty())
        throw std::runtime_error("load_fold_models: no fold checkpoints under " + run_dir);
    return fm;
}

enum class PredefMetric { hter, eer, acer };

// Single predefined train/test split. HTER transfers a dev-split EER
// threshold to the test set; EER is computed on the test scores directly.
inline RunResult run_predefined(const DatasetManifest& train, const DatasetManifest& test,
                                const PipelineFactory& factory, uint64_t seed,
                                PredefMetric metric, const std::string& out_dir = "") {
    // subject disjointness guard (videos stand in when subjects are absent)
    std::set<std::string> train_subjects, test_subjects;
    for (const auto& r : train.records)
        train_subjects.insert(r.subject_id ? *r.subject_id : video_key(r));
    for (const auto& r : test.records)
        test_subjects.insert(r.subject_id ? *r.subject_id : video_key(r));
    for (const auto& s : test_subjects)
        if (train_subjects.count(s))
            throw std::invalid_argument("run_predefined: subject '" + s +
                                        "' appears in both train and test");

    RunResult res;
    res.pipelines.resize(1);
    res.fold_scores.resize(1);
    res.compositions.resize(1);

    if (metric == PredefMetric::hter) {
        auto [inner_train, dev] = inner_validation_split(train, seed ^ 0xdeu);
        auto pipeline = factory(0, seed);
        pipeline->train(inner_train);
        for (const auto& r : test.records)
            if (pipeline->trained_on().count(r.sample_id))
                throw std::runtime_error("run_predefined: test sample in training batch");
        FoldScores fs_;
        fs_.train = pipeline->score(dev);  // threshold fit on the dev split
        fs_.test = pipeline->score(test);
        res.compositions[0] = {0, class_counts(inner_train.records), class_counts(test.records)};
        res.fold_scores[0] = std::move(fs_);
        res.pipelines[0] = std::move(pipeline);
        res.report = evaluate_protocol(res.fold_scores, ThresholdSource::dev_split_eer);
    } else {
        auto pipeline = factory(0, seed);
        pipeline->train(train);
        for (const auto& r : test.records)
            if (pipeline->trained_on().count(r.sample_id))
                throw std::runtime_error("run_predefined: test sample in training batch");
        FoldScores fs_;
        fs_.train = pipeline->score(train);
        fs_.test = pipeline->score(test);
        res.compositions[0] = {0, class_counts(train.records), class_counts(test.records)};
        res.fold_scores[0] = std::move(fs_);
        res.pipelines[0] = std::move(pipeline);
        res.report = evaluate_protocol(res.fold_scores, ThresholdSource::train_fold_eer);
        if (metric == PredefMetric::eer)
            res.report.eer = roc_and_eer(res.fold_scores[0].test).eer;
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir + "/0");
        res.pipelines[0]->save(out_dir + "/0/checkpoint");
        res.checkpoint_paths.push_back(out_dir + "/0/checkpoint");
        save_scores(res.fold_scores[0].test, out_dir + "/0/scores.jsonl");
        std::ofstream(out_dir + "/metrics.json") << to_json(res.report).dump(2) << "\n";
    }
    return res;
}

// Two- or three-branch configuration depending on the attacks present.
inline MixNetConfig mixnet_config_for_manifest(const DatasetManifest& m,
                                               const BackboneSpec& backbone,
                                               std::vector<double> alphas = {}) {
    std::set<AttackType> present;
    for (const auto& r : m.records) present.insert(r.attack_class.value);
    MixNetConfig config;
    for (AttackType t : {AttackType::print, AttackType::replay, AttackType::mask})
        if (present.count(t)) config.branches.emplace_back(to_string(t), backbone);
    if (config.branches.size() < 2)
        throw std::invalid_argument("mixnet needs at least two attack classes in the manifest");
    if (alphas.empty()) {
        alphas.assign(config.branches.size(), 1.0 / config.branches.size());
        alphas.push_back(5.0);
    }
    config.alphas = std::move(alphas);
    return config;
}

}  // namespace mixnet

#endif
