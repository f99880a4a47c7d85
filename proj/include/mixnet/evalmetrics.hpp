#ifndef MIXNET_EVALMETRICS_HPP
#define MIXNET_EVALMETRICS_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixnet/datamodel.hpp"

namespace mixnet {

// One frame's fused score joined to ground truth.
struct ScoredSample {
    std::string sample_id;
    double final_score = 0.0;  // in [0,1], 1 = attack
    int truth = 0;             // 1 = attack
    AttackClass attack_class;
    // branch scores carried along for score files and diagnostics
    std::optional<double> print_score, replay_score, mask_score;
};

// Classification convention: score >= threshold  =>  attack (ties are attacks).

// Fraction of attack samples classified genuine.
inline double apcer(const std::vector<ScoredSample>& samples, double threshold) {
    size_t attacks = 0, missed = 0;
    for (const auto& s : samples)
        if (s.truth == 1) {
            ++attacks;
            if (s.final_score < threshold) ++missed;
        }
    if (attacks == 0) throw std::invalid_argument("apcer: no attack samples");
    return static_cast<double>(missed) / attacks;
}

// Fraction of genuine samples classified attack.
inline double bpcer(const std::vector<ScoredSample>& samples, double threshold) {
    size_t genuine = 0, rejected = 0;
    for (const auto& s : samples)
        if (s.truth == 0) {
            ++genuine;
            if (s.final_score >= threshold) ++rejected;
        }
    if (genuine == 0) throw std::invalid_argument("bpcer: no genuine samples");
    return static_cast<double>(rejected) / genuine;
}

inline double acer(double apcer_v, double bpcer_v) { return 0.5 * (apcer_v + bpcer_v); }

struct RocPoint {
    double fpr = 0.0;  // genuine classified attack
    double tpr = 0.0;  // attack classified attack
    double threshold = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points;  // ascending fpr (descending threshold)
    double eer = 0.0;
    double eer_threshold = 0.0;
};

// Candidate thresholds: one below the minimum score, midpoints between
// adjacent distinct scores, one above the maximum. Rates are step functions
// of the threshold; these candidates probe every step exactly once.
inline std::vector<double> candidate_thresholds(const std::vector<ScoredSample>& samples) {
    std::vector<double> scores;
    scores.reserve(samples.size());
    for (const auto& s : samples) scores.push_back(s.final_score);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    std::vector<double> cand;
    cand.push_back(scores.front() - 1.0);
    for (size_t i = 0; i + 1 < scores.size(); ++i)
        cand.push_back(0.5 * (scores[i] + scores[i + 1]));
    cand.push_back(scores.back() + 1.0);
    return cand;
}

// ROC sweep plus EER. EER sits where APCER(t) = BPCER(t); when no candidate
// hits the crossing exactly, both rates are interpolated linearly between
// the flanking candidates and the threshold is their midpoint.
inline RocResult roc_and_eer(const std::vector<ScoredSample>& samples) {
    size_t n_att = 0, n_gen = 0;
    for (const auto& s : samples) (s.truth == 1 ? n_att : n_gen)++;
    if (n_att == 0 || n_gen == 0)
        throw std::invalid_argument("roc_and_eer: need both classes present");

    RocResult res;
    // ROC over all distinct score thresholds plus the +/- infinity sentinels
    std::vector<double> scores;
    for (const auto& s : samples) scores.push_back(s.final_score);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    std::vector<double> roc_thr;
    roc_thr.push_back(std::numeric_limits<double>::infinity());
    for (auto it = scores.rbegin(); it != scores.rend(); ++it) roc_thr.push_back(*it);
    roc_thr.push_back(-std::numeric_limits<double>::infinity());
    for (double t : roc_thr) {
        size_t tp = 0, fp = 0;
        for (const auto& s : samples) {
            bool flagged = s.final_score >= t;
            if (flagged && s.truth == 1) ++tp;
            if (flagged && s.truth == 0) ++fp;
        }
        res.points.push_back({static_cast<double>(fp) / n_gen,
                              static_cast<double>(tp) / n_att, t});
    }

    auto cand = candidate_thresholds(samples);
    std::vector<double> a(cand.size()), b(cand.size());
    for (size_t i = 0; i < cand.size(); ++i) {
        a[i] = apcer(samples, cand[i]);
        b[i] = bpcer(samples, cand[i]);
    }
    // APCER is nondecreasing and BPCER nonincreasing in the threshold, so
    // d = APCER - BPCER crosses zero exactly once going up.
    size_t i = 0;
    while (i < cand.size() && a[i] - b[i] < 0.0) ++i;
    if (i == 0) {
        res.eer = 0.5 * (a[0] + b[0]);
        res.eer_threshold = cand[0];
    } else if (i == cand.size()) {
        res.eer = 0.5 * (a.back() + b.back());
        res.eer_threshold = cand.back();
    } else if (a[i] - b[i] == 0.0) {
        res.eer = a[i];
        res.eer_threshold = cand[i];
    } else {
        double d0 = a[i - 1] - b[i - 1];
        double d1 = a[i] - b[i];
        double lam = -d0 / (d1 - d0);
        res.eer = a[i - 1] + lam * (a[i] - a[i - 1]);
        res.eer_threshold = 0.5 * (cand[i - 1] + cand[i]);
    }
    return res;
}

inline double auc(const std::vector<RocPoint>& points) {
    double area = 0.0;
    for (size_t i = 1; i < points.size(); ++i)
        area += 0.5 * (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr);
    return area;
}

enum class ThresholdSource { train_fold_eer, dev_split_eer };

inline const char* to_string(ThresholdSource s) {
    return s == ThresholdSource::train_fold_eer ? "train_fold_eer" : "dev_split_eer";
}

// A decision threshold carries its provenance so protocols can assert it was
// never fit on test scores.
struct Threshold {
    double value = 0.5;
    ThresholdSource source = ThresholdSource::train_fold_eer;
    std::string fit_on;  // description of the score set used for fitting
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n-1); 0 for a single fold
};

inline MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd ms;
    if (xs.empty()) return ms;
    double sum = 0.0;
    for (double x : xs) sum += x;
    ms.mean = sum / xs.size();
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - ms.mean) * (x - ms.mean);
        ms.std = std::sqrt(ss / (xs.size() - 1));
    }
    return ms;
}

struct FoldMetrics {
    double apcer = 0.0, bpcer = 0.0, acer = 0.0;
    Threshold threshold;
    std::map<std::string, double> attack_wise_apcer;
};

struct MetricsReport {
    MeanStd apcer, bpcer, acer;
    double eer_threshold = 0.0;  // mean of per-fold thresholds
    std::vector<RocPoint> roc;   // pooled test scores across folds
    std::map<std::string, MeanStd> attack_wise_apcer;
    std::optional<double> hter;
    std::optional<double> eer;   // test-set EER for the predefined-split protocol
    std::vector<FoldMetrics> per_fold;
};

struct FoldScores {
    std::vector<ScoredSample> train;  // scores on the threshold-fitting split
    std::vector<ScoredSample> test;
};

inline std::map<std::string, double> attack_wise_apcer_at(
    const std::vector<ScoredSample>& samples, double threshold) {
    std::map<std::string, std::pair<size_t, size_t>> counts;  // key -> (attacks, missed)
    for (const auto& s : samples)
        if (s.truth == 1) {
            auto& c = counts[s.attack_class.report_key()];
            c.first++;
            if (s.final_score < threshold) c.second++;
        }
    std::map<std::string, double> out;
    for (const auto& [k, c] : counts)
        out[k] = static_cast<double>(c.second) / c.first;
    return out;
}

// Threshold fit on train (or dev) scores only, applied to the test fold.
// Cross-fold aggregation averages per-fold rates; sigma is across folds.
inline MetricsReport evaluate_protocol(const std::vector<FoldScores>& folds,
                                       ThresholdSource source) {
    if (folds.empty()) throw std::invalid_argument("evaluate_protocol: no folds");
    MetricsReport rep;
    std::vector<double> apcers, bpcers, acers, thresholds;
    std::map<std::string, std::vector<double>> attackwise;
    std::vector<ScoredSample> pooled;
    for (const auto& f : folds) {
        if (f.train.empty() || f.test.empty())
            throw std::invalid_argument("evaluate_protocol: fold is missing train or test scores");
        auto fit = roc_and_eer(f.train);
        FoldMetrics fm;
        fm.threshold.value = fit.eer_threshold;
        fm.threshold.source = source;
        fm.threshold.fit_on = source == ThresholdSource::train_fold_eer ? "train" : "dev";
        fm.apcer = apcer(f.test, fm.threshold.value);
        fm.bpcer = bpcer(f.test, fm.threshold.value);
        fm.acer = acer(fm.apcer, fm.bpcer);
        fm.attack_wise_apcer = attack_wise_apcer_at(f.test, fm.threshold.value);
        apcers.push_back(fm.apcer);
        bpcers.push_back(fm.bpcer);
        acers.push_back(fm.acer);
        thresholds.push_back(fm.threshold.value);
        for (const auto& [k, v] : fm.attack_wise_apcer) attackwise[k].push_back(v);
        pooled.insert(pooled.end(), f.test.begin(), f.test.end());
        rep.per_fold.push_back(std::move(fm));
    }
    rep.apcer = mean_std(apcers);
    rep.bpcer = mean_std(bpcers);
    rep.acer = mean_std(acers);
    rep.eer_threshold = mean_std(thresholds).mean;
    for (const auto& [k, v] : attackwise) rep.attack_wise_apcer[k] = mean_std(v);
    rep.roc = roc_and_eer(pooled).points;
    if (source == ThresholdSource::dev_split_eer) {
        // HTER: (FAR + FRR)/2 on the test set at the dev-set EER threshold
        rep.hter = rep.acer.mean;
    }
    return rep;
}

// Video-level score aggregation (mean of all frame scores per video).
// The protocols score frame-based by default; this is the optional
// aggregator for video-level reporting.
inline std::vector<ScoredSample> aggregate_scores_by_video(
    const std::vector<ScoredSample>& frames) {
    std::map<std::string, std::vector<const ScoredSample*>> groups;
    for (const auto& s : frames) groups[video_stem(s.sample_id)].push_back(&s);
    std::vector<ScoredSample> out;
    for (const auto& [stem, members] : groups) {
        ScoredSample v = *members.front();
        v.sample_id = stem;
        auto mean_opt = [&](std::optional<double> ScoredSample::* field) -> std::optional<double> {
            double sum = 0.0;
            for (const auto* m : members) {
                if (!(m->*field)) return std::nullopt;
                sum += *(m->*field);
            }
            return sum / members.size();
        };
        double fsum = 0.0;
        for (const auto* m : members) fsum += m->final_score;
        v.final_score = fsum / members.size();
        v.print_score = mean_opt(&ScoredSample::print_score);
        v.replay_score = mean_opt(&ScoredSample::replay_score);
        v.mask_score = mean_opt(&ScoredSample::mask_score);
        out.push_back(std::move(v));
    }
    return out;
}

// --- serialization ---

inline json to_json(const MeanStd& ms) { return json{{"mean", ms.mean}, {"std", ms.std}}; }

inline json to_json(const MetricsReport& r) {
    json j;
    j["apcer"] = to_json(r.apcer);
    j["bpcer"] = to_json(r.bpcer);
    j["acer"] = to_json(r.acer);
    j["eer_threshold"] = r.eer_threshold;
    json aw = json::object();
    for (const auto& [k, v] : r.attack_wise_apcer) aw[k] = to_json(v);
    j["attack_wise_apcer"] = aw;
    if (r.hter) j["hter"] = *r.hter;
    if (r.eer) j["eer"] = *r.eer;
    json folds = json::array();
    for (const auto& f : r.per_fold) {
        folds.push_back(json{{"apcer", f.apcer},
                             {"bpcer", f.bpcer},
                             {"acer", f.acer},
                             {"threshold", f.threshold.value},
                             {"threshold_source", to_string(f.threshold.source)},
                             {"threshold_fit_on", f.threshold.fit_on}});
    }
    j["per_fold"] = folds;
    json roc = json::array();
    for (const auto& p : r.roc) {
        double t = p.threshold;
        if (std::isinf(t)) t = t > 0 ? 1e308 : -1e308;
        roc.push_back(json{{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", t}});
    }
    j["roc"] = roc;
    return j;
}

// Plain-text table in the layout of the usual PAD result tables:
// one row per method, percentage mean +/- std columns.
inline std::string render_metrics_table(
    const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::string out;
    out += strf("%-28s %-18s %-18s %-18s\n", "Architecture", "ACER", "APCER", "BPCER");
    auto cell = [](const MeanStd& ms) {
        return strf("%.2f +/- %.2f", 100.0 * ms.mean, 100.0 * ms.std);
    };
    for (const auto& [name, rep] : rows)
        out += strf("%-28s %-18s %-18s %-18s\n", name.c_str(), cell(rep.acer).c_str(),
                    cell(rep.apcer).c_str(), cell(rep.bpcer).c_str());
    return out;
}

inline std::string render_attackwise_table(
    const std::vector<std::pair<std::string, std::map<std::string, MeanStd>>>& rows) {
    std::set<std::string> keys;
    for (const auto& [_, m] : rows)
        for (const auto& [k, __] : m) keys.insert(k);
    std::string out = strf("%-28s", "Architecture");
    for (const auto& k : keys) out += strf(" %-14s", k.c_str());
    out += "\n";
    for (const auto& [name, m] : rows) {
        out += strf("%-28s", name.c_str());
        for (const auto& k : keys) {
            auto it = m.find(k);
            out += it == m.end() ? strf(" %-14s", "-")
                                 : strf(" %-14.2f", 100.0 * it->second.mean);
        }
        out += "\n";
    }
    return out;
}

// --- score files (JSON Lines) ---

inline json scored_sample_to_json(const ScoredSample& s) {
    json j;
    j["sample_id"] = s.sample_id;
    if (s.print_score) j["print_score"] = *s.print_score;
    if (s.replay_score) j["replay_score"] = *s.replay_score;
    if (s.mask_score) j["mask_score"] = *s.mask_score;
    j["final_score"] = s.final_score;
    j["truth"] = s.truth;
    j["attack_class"] = to_string(s.attack_class.value);
    if (s.attack_class.mask_subtype) j["mask_subtype"] = to_string(*s.attack_class.mask_subtype);
    return j;
}

inline ScoredSample scored_sample_from_json(const json& j) {
    ScoredSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.final_score = j.at("final_score").get<double>();
    s.truth = j.at("truth").get<int>();
    AttackType t = attack_type_from_string(j.at("attack_class").get<std::string>());
    std::optional<MaskSubtype> sub;
    if (j.contains("mask_subtype"))
        sub = mask_subtype_from_string(j.at("mask_subtype").get<std::string>());
    s.attack_class = AttackClass(t, sub);
    if (j.contains("print_score")) s.print_score = j.at("print_score").get<double>();
    if (j.contains("replay_score")) s.replay_score = j.at("replay_score").get<double>();
    if (j.contains("mask_score")) s.mask_score = j.at("mask_score").get<double>();
    return s;
}

inline void save_scores(const std::vector<ScoredSample>& scores, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_scores: cannot open " + path);
    for (const auto& s : scores) out << scored_sample_to_json(s).dump() << "\n";
}

inline std::vector<ScoredSample> load_scores(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_scores: cannot open " + path);
    std::vector<ScoredSample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(scored_sample_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(strf("load_scores: %s line %d: %s", path.c_str(), lineno,
                                          e.what()));
        }
    }
    return out;
}

}  // namespace mixnet

#endif
