#ifndef MIXNET_DATAMODEL_HPP
#define MIXNET_DATAMODEL_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixnet/common.hpp"

namespace mixnet {

using json = nlohmann::json;

enum class AttackType { genuine, print, replay, mask };
enum class MaskSubtype { silicone, paper, half, transparent, mannequin };

inline const char* to_string(AttackType t) {
    switch (t) {
        case AttackType::genuine: return "genuine";
        case AttackType::print: return "print";
        case AttackType::replay: return "replay";
        case AttackType::mask: return "mask";
    }
    return "?";
}

inline const char* to_string(MaskSubtype s) {
    switch (s) {
        case MaskSubtype::silicone: return "silicone";
        case MaskSubtype::paper: return "paper";
        case MaskSubtype::half: return "half";
        case MaskSubtype::transparent: return "transparent";
        case MaskSubtype::mannequin: return "mannequin";
    }
    return "?";
}

inline AttackType attack_type_from_string(const std::string& s) {
    if (s == "genuine") return AttackType::genuine;
    if (s == "print") return AttackType::print;
    if (s == "replay") return AttackType::replay;
    if (s == "mask") return AttackType::mask;
    throw std::invalid_argument("unknown attack class: " + s);
}

inline MaskSubtype mask_subtype_from_string(const std::string& s) {
    if (s == "silicone") return MaskSubtype::silicone;
    if (s == "paper") return MaskSubtype::paper;
    if (s == "half") return MaskSubtype::half;
    if (s == "transparent") return MaskSubtype::transparent;
    if (s == "mannequin") return MaskSubtype::mannequin;
    throw std::invalid_argument("unknown mask subtype: " + s);
}

// Attack category of a sample; subtype is legal only for masks.
struct AttackClass {
    AttackType value = AttackType::genuine;
    std::optional<MaskSubtype> mask_subtype;

    AttackClass() = default;
    AttackClass(AttackType v, std::optional<MaskSubtype> sub = std::nullopt)
        : value(v), mask_subtype(sub) {
        if (mask_subtype && value != AttackType::mask)
            throw std::invalid_argument("mask_subtype is only valid for mask attacks");
    }

    bool operator==(const AttackClass& o) const {
        return value == o.value && mask_subtype == o.mask_subtype;
    }
    bool operator<(const AttackClass& o) const {
        if (value != o.value) return value < o.value;
        return mask_subtype < o.mask_subtype;
    }

    // key used in per-attack tables: subtype name for masks with a subtype,
    // class name otherwise
    std::string report_key() const {
        if (value == AttackType::mask && mask_subtype) return to_string(*mask_subtype);
        return to_string(value);
    }
};

// The four training targets of one sample: desired output of the print,
// replay and mask branches plus the final genuine/attack target.
struct LabelQuadruple {
    int print_label = 0;
    int replay_label = 0;
    int mask_label = 0;
    int final_label = 0;

    bool operator==(const LabelQuadruple& o) const {
        return print_label == o.print_label && replay_label == o.replay_label &&
               mask_label == o.mask_label && final_label == o.final_label;
    }
};

inline LabelQuadruple label_for(const AttackClass& c) {
    switch (c.value) {
        case AttackType::genuine: return {0, 0, 0, 0};
        case AttackType::print: return {1, 0, 0, 1};
        case AttackType::replay: return {0, 1, 0, 1};
        case AttackType::mask: return {0, 0, 1, 1};  // all subtypes share the mask row
    }
    throw std::invalid_argument("invalid attack class");
}

// Branch confidences plus the fused final score for one frame.
// mask_score is absent for two-branch models.
struct ScoreQuadruple {
    double print_score = 0.0;
    double replay_score = 0.0;
    std::optional<double> mask_score;
    double final_score = 0.0;

    bool in_range() const {
        auto ok = [](double v) { return v >= 0.0 && v <= 1.0; };
        return ok(print_score) && ok(replay_score) && ok(final_score) &&
               (!mask_score || ok(*mask_score));
    }
};

struct SampleRecord {
    std::string sample_id;
    std::string media_path;
    std::optional<int> frame_index;  // absent for whole-video records
    AttackClass attack_class;
    std::string source_dataset;
    std::optional<std::string> subject_id;
    std::optional<int> fold;
};

enum class Granularity { video, frame };

struct DatasetManifest {
    std::string name;
    int fold_count = 0;  // 0 until folds are assigned
    Granularity granularity = Granularity::frame;
    std::vector<SampleRecord> records;
};

// strip a trailing _<digits> frame suffix, if any
inline std::string video_stem(const std::string& id) {
    size_t us = id.find_last_of('_');
    if (us != std::string::npos && us + 1 < id.size() &&
        std::all_of(id.begin() + us + 1, id.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return id.substr(0, us);
    return id;
}

// Video identity of a record. Frame records follow the
// <stem>_<frame-index> naming convention; video records are their own key.
inline std::string video_key(const SampleRecord& r) {
    if (!r.frame_index) return r.sample_id;
    return video_stem(r.sample_id);
}

inline void validate_manifest(const DatasetManifest& m) {
    std::set<std::string> ids;
    for (const auto& r : m.records) {
        if (!ids.insert(r.sample_id).second)
            throw std::runtime_error("manifest invariant violation: duplicate sample_id '" +
                                     r.sample_id + "'");
        if (r.fold && (*r.fold < 0 || *r.fold >= m.fold_count))
            throw std::runtime_error(strf(
                "manifest invariant violation: fold %d out of range [0,%d) for sample '%s'",
                *r.fold, m.fold_count, r.sample_id.c_str()));
        if (m.granularity == Granularity::frame && !r.frame_index)
            throw std::runtime_error("frame-granularity manifest record '" + r.sample_id +
                                     "' lacks frame_index");
        if (r.attack_class.mask_subtype && r.attack_class.value != AttackType::mask)
            throw std::runtime_error("record '" + r.sample_id +
                                     "' has mask_subtype on a non-mask class");
    }
}

inline json record_to_json(const SampleRecord& r) {
    json j;  // nlohmann objects keep keys sorted, giving the canonical order
    j["sample_id"] = r.sample_id;
    j["media_path"] = r.media_path;
    if (r.frame_index) j["frame_index"] = *r.frame_index;
    j["attack_class"] = to_string(r.attack_class.value);
    if (r.attack_class.mask_subtype) j["mask_subtype"] = to_string(*r.attack_class.mask_subtype);
    j["source_dataset"] = r.source_dataset;
    if (r.subject_id) j["subject_id"] = *r.subject_id;
    if (r.fold) j["fold"] = *r.fold;
    return j;
}

inline SampleRecord record_from_json(const json& j) {
    SampleRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.media_path = j.at("media_path").get<std::string>();
    if (j.contains("frame_index")) r.frame_index = j.at("frame_index").get<int>();
    AttackType t = attack_type_from_string(j.at("attack_class").get<std::string>());
    std::optional<MaskSubtype> sub;
    if (j.contains("mask_subtype"))
        sub = mask_subtype_from_string(j.at("mask_subtype").get<std::string>());
    r.attack_class = AttackClass(t, sub);
    r.source_dataset = j.value("source_dataset", std::string());
    if (j.contains("subject_id")) r.subject_id = j.at("subject_id").get<std::string>();
    if (j.contains("fold")) r.fold = j.at("fold").get<int>();
    return r;
}

// JSON Lines, one record per line, keys sorted alphabetically, absent
// optionals omitted. A save -> load -> save round trip is byte identical.
inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_manifest: cannot open " + path);
    for (const auto& r : m.records) out << record_to_json(r).dump() << "\n";
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_manifest: cannot open " + path);
    DatasetManifest m;
    m.name = fs::path(path).stem().string();
    std::string line;
    int lineno = 0;
    bool any_frame = false, any_video = false;
    int max_fold = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            m.records.push_back(record_from_json(j));
        } catch (const std::exception& e) {
            throw std::runtime_error(
                strf("load_manifest: %s line %d: %s", path.c_str(), lineno, e.what()));
        }
        const auto& r = m.records.back();
        (r.frame_index ? any_frame : any_video) = true;
        if (r.fold) max_fold = std::max(max_fold, *r.fold);
    }
    if (any_frame && any_video)
        throw std::runtime_error("load_manifest: " + path +
                                 " mixes frame and video granularity records");
    m.granularity = any_video ? Granularity::video : Granularity::frame;
    m.fold_count = max_fold + 1;
    validate_manifest(m);
    return m;
}

// Stratified per class: seeded shuffle then round-robin, so per-class fold
// sizes differ by at most one. Requires a video-granularity manifest.
inline DatasetManifest assign_folds(const DatasetManifest& manifest, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("assign_folds: k must be >= 2");
    if (manifest.granularity != Granularity::video)
        throw std::invalid_argument("assign_folds: manifest must have video granularity");

    std::map<AttackClass, std::vector<size_t>> by_class;
    for (size_t i = 0; i < manifest.records.size(); ++i)
        by_class[manifest.records[i].attack_class].push_back(i);

    DatasetManifest out = manifest;
    out.fold_count = k;
    Rng rng(seed);
    for (auto& [cls, idx] : by_class) {
        if (static_cast<int>(idx.size()) < k)
            throw std::runtime_error(strf(
                "assign_folds: class '%s' has %zu videos, fewer than k=%d",
                cls.report_key().c_str(), idx.size(), k));
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            return manifest.records[a].sample_id < manifest.records[b].sample_id;
        });
        rng.shuffle(idx);
        for (size_t pos = 0; pos < idx.size(); ++pos)
            out.records[idx[pos]].fold = static_cast<int>(pos % k);
    }
    return out;
}

// Collapse a frame manifest to one record per video (videos identified by
// the sample-id naming convention).
inline DatasetManifest collapse_to_videos(const DatasetManifest& m) {
    if (m.granularity == Granularity::video) return m;
    DatasetManifest v;
    v.name = m.name + ".videos";
    v.granularity = Granularity::video;
    std::map<std::string, size_t> seen;
    for (const auto& r : m.records) {
        std::string key = video_key(r);
        auto it = seen.find(key);
        if (it == seen.end()) {
            SampleRecord vr;
            vr.sample_id = key;
            vr.media_path = key;
            vr.attack_class = r.attack_class;
            vr.source_dataset = r.source_dataset;
            vr.subject_id = r.subject_id;
            vr.fold = r.fold;
            seen.emplace(key, v.records.size());
            v.records.push_back(std::move(vr));
        } else if (!(v.records[it->second].attack_class == r.attack_class)) {
            throw std::runtime_error("collapse_to_videos: video '" + key +
                                     "' has frames with differing attack classes");
        }
    }
    return v;
}

// Propagate a video manifest's fold assignment back onto its frames.
inline DatasetManifest apply_video_folds(const DatasetManifest& frames,
                                         const DatasetManifest& videos) {
    std::map<std::string, int> fold_of;
    for (const auto& r : videos.records)
        if (r.fold) fold_of[r.sample_id] = *r.fold;
    DatasetManifest out = frames;
    out.fold_count = videos.fold_count;
    for (auto& r : out.records) {
        auto it = fold_of.find(video_key(r));
        if (it == fold_of.end())
            throw std::runtime_error("apply_video_folds: no fold for video of sample '" +
                                     r.sample_id + "'");
        r.fold = it->second;
    }
    return out;
}

// Fold assignment for either granularity: frames inherit their video's fold.
inline DatasetManifest assign_folds_by_video(const DatasetManifest& m, int k, uint64_t seed) {
    if (m.granularity == Granularity::video) return assign_folds(m, k, seed);
    return apply_video_folds(m, assign_folds(collapse_to_videos(m), k, seed));
}

inline std::vector<SampleRecord> records_in_fold(const DatasetManifest& m, int fold,
                                                 bool invert = false) {
    std::vector<SampleRecord> out;
    for (const auto& r : m.records) {
        if (!r.fold) throw std::runtime_error("records_in_fold: sample '" + r.sample_id +
                                              "' has no fold assignment");
        if ((*r.fold == fold) != invert) out.push_back(r);
    }
    return out;
}

inline DatasetManifest submanifest(const DatasetManifest& m, std::vector<SampleRecord> recs,
                                   const std::string& suffix) {
    DatasetManifest out;
    out.name = m.name + "." + suffix;
    out.fold_count = m.fold_count;
    out.granularity = m.granularity;
    out.records = std::move(recs);
    return out;
}

}  // namespace mixnet

#endif
