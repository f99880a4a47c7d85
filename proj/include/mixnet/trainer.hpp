#ifndef MIXNET_TRAINER_HPP
#define MIXNET_TRAINER_HPP

#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "mixnet/evalmetrics.hpp"
#include "mixnet/image.hpp"
#include "mixnet/mixnet.hpp"

namespace mixnet {

struct TrainConfig {
    double learning_rate = 0.01;  // SGD
    int batch_size = 16;          // 56 for vanilla fine-tuning
    int epochs = 10;
    uint64_t seed = 0;
    std::string checkpoint_dir;   // when set, a checkpoint is written per epoch
    std::string log_path;         // when set, per-epoch JSONL log

    void validate() const {
        if (learning_rate < 0) throw std::invalid_argument("train: learning_rate must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
        if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    }
};

struct EpochLog {
    int epoch = 0;
    LossBreakdown loss;
    double learning_rate = 0.0;
};

// What the training loop saw: per-epoch losses plus the exact batch
// composition, so data-hygiene claims are checkable after the fact.
struct TrainJournal {
    std::vector<EpochLog> epochs;
    std::vector<std::vector<std::vector<std::string>>> batches;  // [epoch][batch] -> sample ids
    std::set<std::string> seen_ids;

    void write_log(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("train log: cannot open " + path);
        for (const auto& e : epochs) {
            json j;
            j["epoch"] = e.epoch;
            j["print_loss"] = e.loss.print_loss;
            j["replay_loss"] = e.loss.replay_loss;
            j["mask_loss"] = e.loss.mask_loss;
            j["final_loss"] = e.loss.final_loss;
            j["total_loss"] = e.loss.total_loss;
            j["learning_rate"] = e.learning_rate;
            out << j.dump() << "\n";
        }
    }
};

// network input: pixels centered at zero
inline nn::Tensor tensor_from_image(const Image& img) {
    Image rgb = img.channels == 3 ? img : gray_to_rgb(img);
    nn::Tensor t(1, 3, rgb.height, rgb.width);
    for (size_t i = 0; i < rgb.pix.size(); ++i) t.v[i] = rgb.pix[i] - 0.5;
    return t;
}

// In-memory frame dataset; frames are resized to the model input size once
// at load time.
class ImageDataset {
  public:
    ImageDataset(const DatasetManifest& manifest, int h, int w) : manifest_(manifest) {
        for (const auto& r : manifest.records) {
            Image img = load_png(r.media_path);
            if (img.height != h || img.width != w) img = resize_bilinear(img, h, w);
            images_.push_back(tensor_from_image(img));
            labels_.push_back(label_for(r.attack_class));
        }
    }

    size_t size() const { return images_.size(); }
    const SampleRecord& record(size_t i) const { return manifest_.records[i]; }
    const LabelQuadruple& label(size_t i) const { return labels_[i]; }

    nn::Tensor batch(const std::vector<size_t>& idx) const {
        if (idx.empty()) throw std::invalid_argument("dataset: empty batch");
        const nn::Tensor& first = images_[idx[0]];
        nn::Tensor t(static_cast<int>(idx.size()), first.c, first.h, first.w);
        for (size_t k = 0; k < idx.size(); ++k)
            std::copy(images_[idx[k]].v.begin(), images_[idx[k]].v.end(),
                      t.v.begin() + static_cast<size_t>(k) * first.sample_size());
        return t;
    }

    std::vector<LabelQuadruple> batch_labels(const std::vector<size_t>& idx) const {
        std::vector<LabelQuadruple> out;
        for (size_t i : idx) out.push_back(labels_[i]);
        return out;
    }

  private:
    DatasetManifest manifest_;
    std::vector<nn::Tensor> images_;
    std::vector<LabelQuadruple> labels_;
};

namespace detail {

inline std::vector<std::vector<size_t>> epoch_batches(size_t n, int batch_size, Rng& rng) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::vector<size_t>> batches;
    for (size_t i = 0; i < n; i += batch_size) {
        size_t end = std::min(n, i + batch_size);
        batches.emplace_back(order.begin() + i, order.begin() + end);
    }
    return batches;
}

}  // namespace detail

// Joint training of all branches and the fusion layer under the weighted
// four-term loss. Deterministic given (config, manifest).
inline TrainJournal train_mixnet(MixNetModel& model, const DatasetManifest& manifest,
                                 const TrainConfig& config) {
    config.validate();
    if (manifest.records.empty()) throw std::invalid_argument("train_mixnet: empty manifest");
    const auto& spec = model.config().branches.front().second;
    ImageDataset data(manifest, spec.input_h, spec.input_w);
    Rng rng(config.seed);
    TrainJournal journal;
    if (!config.checkpoint_dir.empty()) fs::create_directories(config.checkpoint_dir);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        auto batches = detail::epoch_batches(data.size(), config.batch_size, rng);
        journal.batches.emplace_back();
        LossBreakdown sum;
        size_t total = 0;
        for (const auto& idx : batches) {
            journal.batches.back().emplace_back();
            for (size_t i : idx) {
                journal.batches.back().back().push_back(data.record(i).sample_id);
                journal.seen_ids.insert(data.record(i).sample_id);
            }
            nn::Tensor images = data.batch(idx);
            auto labels = data.batch_labels(idx);
            MixNetActivations act = model.forward_batch(images, true);
            LossBreakdown lb = model.total_loss(act, labels);
            if (!std::isfinite(lb.total_loss))
                throw std::runtime_error(strf(
                    "train_mixnet: non-finite loss %g at epoch %d; aborting", lb.total_loss,
                    epoch));
            model.zero_grad();
            model.backward_total(act, labels);
            model.sgd_step(config.learning_rate);
            double w = static_cast<double>(idx.size());
            sum.print_loss += lb.print_loss * w;
            sum.replay_loss += lb.replay_loss * w;
            sum.mask_loss += lb.mask_loss * w;
            sum.final_loss += lb.final_loss * w;
            sum.total_loss += lb.total_loss * w;
            total += idx.size();
        }
        EpochLog el;
        el.epoch = epoch;
        el.learning_rate = config.learning_rate;
        el.loss.print_loss = sum.print_loss / total;
        el.loss.replay_loss = sum.replay_loss / total;
        el.loss.mask_loss = sum.mask_loss / total;
        el.loss.final_loss = sum.final_loss / total;
        el.loss.total_loss = sum.total_loss / total;
        journal.epochs.push_back(el);
        if (!config.checkpoint_dir.empty()) {
            json meta{{"epoch", epoch}, {"seed", config.seed}, {"alphas", model.config().alphas}};
            save_checkpoint(model, config.checkpoint_dir + strf("/epoch_%03d.ckpt", epoch), meta);
        }
    }
    if (!config.log_path.empty()) journal.write_log(config.log_path);
    return journal;
}

// Fine-tuning of a single backbone on the final genuine/attack target only.
inline TrainJournal train_vanilla(VanillaModel& model, const DatasetManifest& manifest,
                                  const TrainConfig& config) {
    config.validate();
    if (manifest.records.empty()) throw std::invalid_argument("train_vanilla: empty manifest");
    ImageDataset data(manifest, model.spec().input_h, model.spec().input_w);
    Rng rng(config.seed);
    TrainJournal journal;
    if (!config.checkpoint_dir.empty()) fs::create_directories(config.checkpoint_dir);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        auto batches = detail::epoch_batches(data.size(), config.batch_size, rng);
        journal.batches.emplace_back();
        double sum = 0.0;
        size_t total = 0;
        for (const auto& idx : batches) {
            journal.batches.back().emplace_back();
            for (size_t i : idx) {
                journal.batches.back().back().push_back(data.record(i).sample_id);
                journal.seen_ids.insert(data.record(i).sample_id);
            }
            nn::Tensor images = data.batch(idx);
            std::vector<int> bits;
            for (size_t i : idx) bits.push_back(data.label(i).final_label);
            model.forward(images, true);
            model.zero_grad();
            double loss = model.loss_and_backward(bits);
            if (!std::isfinite(loss))
                throw std::runtime_error(strf(
                    "train_vanilla: non-finite loss %g at epoch %d; aborting", loss, epoch));
            model.sgd_step(config.learning_rate);
            sum += loss * idx.size();
            total += idx.size();
        }
        EpochLog el;
        el.epoch = epoch;
        el.learning_rate = config.learning_rate;
        el.loss.final_loss = el.loss.total_loss = sum / total;
        journal.epochs.push_back(el);
        if (!config.checkpoint_dir.empty()) {
            json meta{{"epoch", epoch}, {"seed", config.seed}};
            save_vanilla(model, config.checkpoint_dir + strf("/epoch_%03d.ckpt", epoch), meta);
        }
    }
    if (!config.log_path.empty()) journal.write_log(config.log_path);
    return journal;
}

enum class CombineRule { max, average };

inline const char* to_string(CombineRule r) { return r == CombineRule::max ? "max" : "average"; }

// One specialist per attack class, each trained only on genuine samples and
// its own attack; the composite score is the max or mean of the specialists.
struct IndependentModel {
    std::vector<std::pair<std::string, std::unique_ptr<VanillaModel>>> specialists;
    CombineRule combine = CombineRule::max;

    static double combine_scores(const std::vector<double>& scores, CombineRule rule) {
        if (scores.empty()) throw std::invalid_argument("combine_scores: empty input");
        if (rule == CombineRule::max) {
            double m = scores[0];
            for (double s : scores) m = std::max(m, s);
            return m;
        }
        double sum = 0.0;
        for (double s : scores) sum += s;
        return sum / scores.size();
    }

    // per-sample branch scores plus the combined final score
    std::vector<ScoreQuadruple> forward(const nn::Tensor& images) {
        std::vector<std::vector<double>> per_branch;
        for (auto& [name, model] : specialists) per_branch.push_back(model->forward(images));
        std::vector<ScoreQuadruple> out(images.n);
        for (int s = 0; s < images.n; ++s) {
            std::vector<double> scores;
            for (size_t b = 0; b < specialists.size(); ++b) {
                double v = per_branch[b][s];
                scores.push_back(v);
                const std::string& name = specialists[b].first;
                if (name == "print")
                    out[s].print_score = v;
                else if (name == "replay")
                    out[s].replay_score = v;
                else
                    out[s].mask_score = v;
            }
            out[s].final_score = combine_scores(scores, combine);
        }
        return out;
    }
};

// Per-specialist training data: genuine samples plus exactly one attack.
inline IndependentModel train_independent(const BackboneSpec& backbone,
                                          const DatasetManifest& manifest,
                                          const TrainConfig& config, CombineRule combine,
                                          std::map<std::string, TrainJournal>* journals = nullptr) {
    std::set<AttackType> present;
    for (const auto& r : manifest.records) present.insert(r.attack_class.value);
    if (!present.count(AttackType::genuine))
        throw std::invalid_argument("train_independent: manifest has no genuine samples");
    std::vector<AttackType> attacks;
    for (AttackType t : {AttackType::print, AttackType::replay, AttackType::mask})
        if (present.count(t)) attacks.push_back(t);
    if (attacks.empty())
        throw std::invalid_argument("train_independent: manifest has no attack samples");

    IndependentModel composite;
    composite.combine = combine;
    Rng rng(config.seed);
    for (AttackType attack : attacks) {
        std::vector<SampleRecord> recs;
        for (const auto& r : manifest.records)
            if (r.attack_class.value == AttackType::genuine || r.attack_class.value == attack)
                recs.push_back(r);
        DatasetManifest sub = submanifest(manifest, std::move(recs),
                                          std::string("spec_") + to_string(attack));
        auto model = std::make_unique<VanillaModel>(backbone, rng);
        TrainConfig cfg = config;
        cfg.checkpoint_dir.clear();
        cfg.log_path.clear();
        cfg.seed = config.seed + static_cast<uint64_t>(attack);
        TrainJournal j = train_vanilla(*model, sub, cfg);
        if (journals) (*journals)[to_string(attack)] = std::move(j);
        composite.specialists.emplace_back(to_string(attack), std::move(model));
    }
    return composite;
}

// --- scoring helpers ---

inline std::vector<ScoredSample> score_with_mixnet(MixNetModel& model,
                                                   const DatasetManifest& manifest,
                                                   int chunk = 64) {
    const auto& spec = model.config().branches.front().second;
    ImageDataset data(manifest, spec.input_h, spec.input_w);
    std::vector<ScoredSample> out;
    for (size_t start = 0; start < data.size(); start += chunk) {
        std::vector<size_t> idx;
        for (size_t i = start; i < std::min(data.size(), start + chunk); ++i) idx.push_back(i);
        auto quads = model.forward(data.batch(idx));
        for (size_t k = 0; k < idx.size(); ++k) {
            const auto& r = data.record(idx[k]);
            ScoredSample s;
            s.sample_id = r.sample_id;
            s.attack_class = r.attack_class;
            s.truth = label_for(r.attack_class).final_label;
            s.final_score = quads[k].final_score;
            s.print_score = quads[k].print_score;
            s.replay_score = quads[k].replay_score;
            s.mask_score = quads[k].mask_score;
            out.push_back(std::move(s));
        }
    }
    return out;
}

inline std::vector<ScoredSample> score_with_vanilla(VanillaModel& model,
                                                    const DatasetManifest& manifest,
                                                    int chunk = 64) {
    ImageDataset data(manifest, model.spec().input_h, model.spec().input_w);
    std::vector<ScoredSample> out;
    for (size_t start = 0; start < data.size(); start += chunk) {
        std::vector<size_t> idx;
        for (size_t i = start; i < std::min(data.size(), start + chunk); ++i) idx.push_back(i);
        auto probs = model.forward(data.batch(idx));
        for (size_t k = 0; k < idx.size(); ++k) {
            const auto& r = data.record(idx[k]);
            ScoredSample s;
            s.sample_id = r.sample_id;
            s.attack_class = r.attack_class;
            s.truth = label_for(r.attack_class).final_label;
            s.final_score = probs[k];
            out.push_back(std::move(s));
        }
    }
    return out;
}

inline std::vector<ScoredSample> score_with_independent(IndependentModel& model,
                                                        const DatasetManifest& manifest,
                                                        int chunk = 64) {
    const auto& spec = model.specialists.front().second->spec();
    ImageDataset data(manifest, spec.input_h, spec.input_w);
    std::vector<ScoredSample> out;
    for (size_t start = 0; start < data.size(); start += chunk) {
        std::vector<size_t> idx;
        for (size_t i = start; i < std::min(data.size(), start + chunk); ++i) idx.push_back(i);
        auto quads = model.forward(data.batch(idx));
        for (size_t k = 0; k < idx.size(); ++k) {
            const auto& r = data.record(idx[k]);
            ScoredSample s;
            s.sample_id = r.sample_id;
            s.attack_class = r.attack_class;
            s.truth = label_for(r.attack_class).final_label;
            s.final_score = quads[k].final_score;
            s.print_score = quads[k].print_score;
            s.replay_score = quads[k].replay_score;
            s.mask_score = quads[k].mask_score;
            out.push_back(std::move(s));
        }
    }
    return out;
}

// --- grid search over the loss coefficients ---

struct GridSearchSpec {
    std::vector<double> branch_alpha_grid;  // values in [0,1]
    std::vector<double> final_alpha_grid;   // values in [0,10]

    void validate() const {
        if (branch_alpha_grid.empty() || final_alpha_grid.empty())
            throw std::invalid_argument("grid_search: grids must be nonempty");
        for (double a : branch_alpha_grid)
            if (a < 0 || a > 1)
                throw std::invalid_argument("grid_search: branch coefficients must lie in [0,1]");
        for (double a : final_alpha_grid)
            if (a < 0 || a > 10)
                throw std::invalid_argument("grid_search: final coefficient must lie in [0,10]");
    }
};

struct GridRow {
    std::vector<double> alphas;  // a1, a2, a3, a4
    double val_acer = 0.0;
};

struct GridSearchResult {
    std::vector<double> best_alphas;
    double best_acer = 1.0;
    std::vector<GridRow> table;
};

// Carve a stratified inner validation split: ~20% of training videos per
// class, never touching any test fold.
inline std::pair<DatasetManifest, DatasetManifest> inner_validation_split(
    const DatasetManifest& train, uint64_t seed) {
    DatasetManifest videos = collapse_to_videos(train);
    std::map<AttackClass, std::vector<std::string>> by_class;
    for (const auto& r : videos.records) by_class[r.attack_class].push_back(r.sample_id);
    Rng rng(seed);
    std::set<std::string> val_videos;
    for (auto& [cls, vids] : by_class) {
        std::sort(vids.begin(), vids.end());
        rng.shuffle(vids);
        size_t n_val = std::max<size_t>(1, static_cast<size_t>(std::llround(0.2 * vids.size())));
        if (n_val >= vids.size()) n_val = vids.size() - 1;
        for (size_t i = 0; i < n_val; ++i) val_videos.insert(vids[i]);
    }
    std::vector<SampleRecord> tr, va;
    for (const auto& r : train.records)
        (val_videos.count(video_key(r)) ? va : tr).push_back(r);
    return {submanifest(train, std::move(tr), "inner_train"),
            submanifest(train, std::move(va), "inner_val")};
}

// Exhaustive search over branch-alpha^3 x final-alpha combinations; each
// candidate trains a fresh model on the inner training split and is scored
// by validation ACER at the inner-train EER threshold. Ties prefer the
// smallest branch-coefficient sum, then the smallest final coefficient,
// then lexicographic order.
inline GridSearchResult grid_search(const GridSearchSpec& spec, const DatasetManifest& train,
                                    const TrainConfig& config, const BackboneSpec& backbone) {
    spec.validate();
    auto [inner_train, inner_val] = inner_validation_split(train, config.seed ^ 0x5eedULL);
    GridSearchResult res;
    auto better = [](const GridRow& a, const GridRow& b) {
        if (a.val_acer != b.val_acer) return a.val_acer < b.val_acer;
        double sa = a.alphas[0] + a.alphas[1] + a.alphas[2];
        double sb = b.alphas[0] + b.alphas[1] + b.alphas[2];
        if (sa != sb) return sa < sb;
        if (a.alphas[3] != b.alphas[3]) return a.alphas[3] < b.alphas[3];
        return a.alphas < b.alphas;
    };
    for (double a1 : spec.branch_alpha_grid)
        for (double a2 : spec.branch_alpha_grid)
            for (double a3 : spec.branch_alpha_grid)
                for (double a4 : spec.final_alpha_grid) {
                    MixNetConfig mc;
                    mc.branches = {{"print", backbone}, {"replay", backbone}, {"mask", backbone}};
                    mc.alphas = {a1, a2, a3, a4};
                    Rng rng(config.seed);
                    MixNetModel model(mc, rng);
                    TrainConfig cfg = config;
                    cfg.checkpoint_dir.clear();
                    cfg.log_path.clear();
                    train_mixnet(model, inner_train, cfg);
                    auto train_scores = score_with_mixnet(model, inner_train);
                    auto val_scores = score_with_mixnet(model, inner_val);
                    double thr = roc_and_eer(train_scores).eer_threshold;
                    GridRow row;
                    row.alphas = {a1, a2, a3, a4};
                    row.val_acer = acer(apcer(val_scores, thr), bpcer(val_scores, thr));
                    res.table.push_back(row);
                }
    const GridRow* best = &res.table.front();
    for (const auto& row : res.table)
        if (better(row, *best)) best = &row;
    res.best_alphas = best->alphas;
    res.best_acer = best->val_acer;
    return res;
}

}  // namespace mixnet

#endif
