#include <catch2/catch_amalgamated.hpp>

#include "mixnet/datamodel.hpp"
#include "test_util.hpp"

using namespace mixnet;

TEST_CASE("label_for reproduces the four labeling rows exactly") {
    CHECK(label_for(AttackClass(AttackType::genuine)) == LabelQuadruple{0, 0, 0, 0});
    CHECK(label_for(AttackClass(AttackType::print)) == LabelQuadruple{1, 0, 0, 1});
    CHECK(label_for(AttackClass(AttackType::replay)) == LabelQuadruple{0, 1, 0, 1});
    CHECK(label_for(AttackClass(AttackType::mask)) == LabelQuadruple{0, 0, 1, 1});
    // all mask subtypes collapse onto the mask row
    for (MaskSubtype sub : {MaskSubtype::silicone, MaskSubtype::paper, MaskSubtype::half,
                            MaskSubtype::transparent, MaskSubtype::mannequin})
        CHECK(label_for(AttackClass(AttackType::mask, sub)) == LabelQuadruple{0, 0, 1, 1});
}

TEST_CASE("label quadruple invariants hold over the whole enum") {
    for (AttackType t :
         {AttackType::genuine, AttackType::print, AttackType::replay, AttackType::mask}) {
        LabelQuadruple q = label_for(AttackClass(t));
        CHECK(q.final_label == (q.print_label | q.replay_label | q.mask_label));
        CHECK((q.final_label == 1) == (t != AttackType::genuine));
        CHECK(q.print_label + q.replay_label + q.mask_label <= 1);
    }
}

TEST_CASE("mask_subtype is rejected on non-mask classes") {
    CHECK_THROWS_AS(AttackClass(AttackType::print, MaskSubtype::paper), std::invalid_argument);
    CHECK_NOTHROW(AttackClass(AttackType::mask, MaskSubtype::paper));
}

static SampleRecord make_record(const std::string& id, AttackType t, int frame = 0) {
    SampleRecord r;
    r.sample_id = id;
    r.media_path = "/data/" + id + ".png";
    r.frame_index = frame;
    r.attack_class = AttackClass(t, t == AttackType::mask
                                        ? std::optional<MaskSubtype>(MaskSubtype::silicone)
                                        : std::nullopt);
    r.source_dataset = "synth";
    return r;
}

TEST_CASE("manifest round trip") {
    std::string dir = testutil::temp_dir("datamodel_rt");
    DatasetManifest m;
    m.name = "t";
    m.granularity = Granularity::frame;
    m.records = {make_record("genuine_000_0000", AttackType::genuine),
                 make_record("print_000_0000", AttackType::print),
                 make_record("replay_000_0000", AttackType::replay),
                 make_record("mask_000_0000", AttackType::mask)};
    std::string p1 = dir + "/m.jsonl";
    save_manifest(m, p1);

    DatasetManifest loaded = load_manifest(p1);
    REQUIRE(loaded.records.size() == 4);
    CHECK(loaded.granularity == Granularity::frame);
    CHECK(loaded.records[3].attack_class.mask_subtype == MaskSubtype::silicone);

    // save -> load -> save is byte identical
    std::string p2 = dir + "/m2.jsonl";
    save_manifest(loaded, p2);
    CHECK(testutil::slurp(p1) == testutil::slurp(p2));
}

TEST_CASE("manifest canonical lines sort keys alphabetically") {
    json j = record_to_json(make_record("a_000_0001", AttackType::mask, 1));
    std::string line = j.dump();
    size_t prev = 0;
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    for (size_t i = 1; i < keys.size(); ++i) CHECK(keys[i - 1] < keys[i]);
    CHECK(line.find("attack_class") < line.find("frame_index"));
    (void)prev;
}

TEST_CASE("manifest load errors") {
    std::string dir = testutil::temp_dir("datamodel_err");

    SECTION("duplicate sample id names the offender") {
        std::ofstream f(dir + "/dup.jsonl");
        auto j = record_to_json(make_record("dup_id_000_0000", AttackType::print));
        f << j.dump() << "\n" << j.dump() << "\n";
        f.close();
        CHECK_THROWS_WITH(load_manifest(dir + "/dup.jsonl"),
                          Catch::Matchers::ContainsSubstring("dup_id_000_0000"));
    }

    SECTION("malformed line reports the line number") {
        std::ofstream f(dir + "/bad.jsonl");
        f << record_to_json(make_record("ok_000_0000", AttackType::print)).dump() << "\n";
        f << "{not json}\n";
        f.close();
        CHECK_THROWS_WITH(load_manifest(dir + "/bad.jsonl"),
                          Catch::Matchers::ContainsSubstring("line 2"));
    }

    SECTION("empty file is a valid empty manifest") {
        std::ofstream(dir + "/empty.jsonl").close();
        DatasetManifest m = load_manifest(dir + "/empty.jsonl");
        CHECK(m.records.empty());
    }

    SECTION("fold out of declared range is rejected") {
        DatasetManifest m;
        m.fold_count = 2;
        auto r = make_record("x_000_0000", AttackType::print);
        r.fold = 5;
        m.records = {r};
        CHECK_THROWS_AS(validate_manifest(m), std::runtime_error);
    }
}

static DatasetManifest video_manifest(const std::map<AttackType, int>& counts) {
    DatasetManifest m;
    m.name = "videos";
    m.granularity = Granularity::video;
    for (const auto& [t, n] : counts)
        for (int v = 0; v < n; ++v) {
            SampleRecord r;
            r.sample_id = strf("%s_%03d", to_string(t), v);
            r.media_path = r.sample_id;
            r.attack_class = AttackClass(t);
            r.source_dataset = "synth";
            m.records.push_back(r);
        }
    return m;
}

TEST_CASE("assign_folds balances each class") {
    SECTION("exact division") {
        auto m = video_manifest({{AttackType::genuine, 9}});
        auto out = assign_folds(m, 3, 1);
        std::map<int, int> sizes;
        for (const auto& r : out.records) sizes[*r.fold]++;
        CHECK(sizes == std::map<int, int>{{0, 3}, {1, 3}, {2, 3}});
    }
    SECTION("pigeonhole split") {
        auto m = video_manifest({{AttackType::genuine, 10}});
        auto out = assign_folds(m, 3, 1);
        std::vector<int> sizes(3, 0);
        for (const auto& r : out.records) sizes[*r.fold]++;
        std::sort(sizes.begin(), sizes.end());
        CHECK(sizes == std::vector<int>{3, 3, 4});
    }
    SECTION("stratified per class") {
        auto m = video_manifest({{AttackType::genuine, 7}, {AttackType::print, 5}});
        auto out = assign_folds(m, 2, 9);
        std::map<std::string, std::map<int, int>> per_class;
        for (const auto& r : out.records)
            per_class[r.attack_class.report_key()][*r.fold]++;
        for (const auto& [cls, sizes] : per_class) {
            int lo = 1 << 20, hi = 0;
            for (const auto& [f, n] : sizes) {
                lo = std::min(lo, n);
                hi = std::max(hi, n);
            }
            CHECK(hi - lo <= 1);
        }
    }
}

TEST_CASE("assign_folds determinism and partition") {
    auto m = video_manifest({{AttackType::genuine, 10}, {AttackType::print, 8}});
    auto a = assign_folds(m, 3, 42);
    auto b = assign_folds(m, 3, 42);
    for (size_t i = 0; i < a.records.size(); ++i) CHECK(*a.records[i].fold == *b.records[i].fold);

    // partition: every record has a fold in range, folds cover all records
    std::vector<int> counts(3, 0);
    for (const auto& r : a.records) {
        REQUIRE(r.fold.has_value());
        REQUIRE(*r.fold >= 0);
        REQUIRE(*r.fold < 3);
        counts[*r.fold]++;
    }
    CHECK(counts[0] + counts[1] + counts[2] == static_cast<int>(m.records.size()));

    auto c = assign_folds(m, 3, 43);
    bool any_diff = false;
    for (size_t i = 0; i < a.records.size(); ++i)
        any_diff |= *a.records[i].fold != *c.records[i].fold;
    CHECK(any_diff);  // a different seed gives a different shuffle
}

TEST_CASE("assign_folds rejects impossible splits") {
    auto m = video_manifest({{AttackType::genuine, 9}, {AttackType::print, 2}});
    CHECK_THROWS_WITH(assign_folds(m, 3, 0), Catch::Matchers::ContainsSubstring("print"));
    CHECK_THROWS_AS(assign_folds(m, 1, 0), std::invalid_argument);

    DatasetManifest fm;
    fm.granularity = Granularity::frame;
    fm.records = {make_record("a_000_0000", AttackType::print)};
    CHECK_THROWS_AS(assign_folds(fm, 3, 0), std::invalid_argument);
}

TEST_CASE("frames inherit their video's fold") {
    DatasetManifest frames;
    frames.granularity = Granularity::frame;
    for (int v = 0; v < 6; ++v)
        for (int f = 0; f < 3; ++f) {
            auto r = make_record(strf("print_%03d_%04d", v, f), AttackType::print, f);
            frames.records.push_back(r);
            auto g = make_record(strf("genuine_%03d_%04d", v, f), AttackType::genuine, f);
            frames.records.push_back(g);
        }
    auto out = assign_folds_by_video(frames, 3, 7);
    std::map<std::string, std::set<int>> folds_per_video;
    for (const auto& r : out.records) folds_per_video[video_key(r)].insert(*r.fold);
    for (const auto& [vid, folds] : folds_per_video) CHECK(folds.size() == 1);
    CHECK(out.fold_count == 3);
}

TEST_CASE("video_key strips the frame suffix") {
    auto r = make_record("mask-paper_012_0034", AttackType::mask, 34);
    CHECK(video_key(r) == "mask-paper_012");
    SampleRecord v;
    v.sample_id = "whole_video";
    CHECK(video_key(v) == "whole_video");
}
