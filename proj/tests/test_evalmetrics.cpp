#include <catch2/catch_amalgamated.hpp>

#include "mixnet/evalmetrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mixnet;

static std::vector<ScoredSample> scored(const std::vector<double>& attack,
                                        const std::vector<double>& genuine) {
    std::vector<ScoredSample> out;
    int i = 0;
    for (double s : attack) {
        ScoredSample x;
        x.sample_id = strf("a%d", i++);
        x.final_score = s;
        x.truth = 1;
        x.attack_class = AttackClass(AttackType::print);
        out.push_back(x);
    }
    for (double s : genuine) {
        ScoredSample x;
        x.sample_id = strf("g%d", i++);
        x.final_score = s;
        x.truth = 0;
        out.push_back(x);
    }
    return out;
}

TEST_CASE("apcer counts attacks classified genuine") {
    auto ss = scored({0.9, 0.2, 0.8, 0.1}, {0.5});
    CHECK(apcer(ss, 0.5) == 0.5);
    CHECK(apcer(ss, 0.05) == 0.0);  // every attack flagged
    CHECK(apcer(ss, 0.0) == 0.0);   // threshold 0 flags everything
    CHECK_THROWS_AS(apcer(scored({}, {0.5}), 0.5), std::invalid_argument);
}

TEST_CASE("bpcer counts genuine classified attack") {
    auto ss = scored({0.9}, {0.1, 0.6});
    CHECK(bpcer(ss, 0.5) == 0.5);
    CHECK(bpcer(ss, 1.0 + 1e-9) == 0.0);
    CHECK(bpcer(ss, 0.05) == 1.0);  // all genuine scores above threshold
    CHECK_THROWS_AS(bpcer(scored({0.9}, {}), 0.5), std::invalid_argument);
}

TEST_CASE("acer is the average") {
    CHECK(acer(0.2, 0.1) == Catch::Approx(0.15));
    CHECK(acer(0.0, 0.0) == 0.0);
    CHECK(acer(1.0, 0.0) == 0.5);
}

TEST_CASE("roc_and_eer separable and inverted cases") {
    auto sep = scored({0.9, 1.0}, {0.0, 0.1});
    auto r = roc_and_eer(sep);
    CHECK(r.eer == 0.0);
    CHECK(r.eer_threshold > 0.1);
    CHECK(r.eer_threshold < 0.9);
    CHECK(auc(r.points) == Catch::Approx(1.0));

    auto inv = roc_and_eer(scored({0.3, 0.4}, {0.6, 0.7}));
    CHECK(inv.eer == Catch::Approx(1.0));
    CHECK(auc(inv.points) == Catch::Approx(0.0));

    CHECK_THROWS_AS(roc_and_eer(scored({0.5}, {})), std::invalid_argument);
}

TEST_CASE("constant classifier has AUC one half") {
    auto r = roc_and_eer(scored({0.5, 0.5, 0.5}, {0.5, 0.5}));
    CHECK(auc(r.points) == Catch::Approx(0.5));
}

TEST_CASE("eer matches the enumeration oracle on a fixed draw") {
    Rng rng(0);
    std::vector<double> att, gen;
    for (int i = 0; i < 20; ++i) {
        att.push_back(rng.uniform(0.3, 1.0));
        gen.push_back(rng.uniform(0.0, 0.7));
    }
    auto ss = scored(att, gen);
    auto fast = roc_and_eer(ss);
    auto slow = oracles::eer_slow(ss);
    CHECK(slow.candidates.size() == 41);  // 40 distinct scores
    CHECK(fast.eer == Catch::Approx(slow.eer).margin(1e-9));
    CHECK(fast.eer_threshold == Catch::Approx(slow.threshold).margin(1e-9));
}

TEST_CASE("metrics match the brute-force oracle on random score sets") {
    Rng rng(1234);
    for (int trial = 0; trial < 40; ++trial) {
        int na = 2 + static_cast<int>(rng.uniform_int(49));
        int ng = 2 + static_cast<int>(rng.uniform_int(49));
        std::vector<double> att, gen;
        for (int i = 0; i < na; ++i) att.push_back(rng.uniform(0.0, 1.0));
        for (int i = 0; i < ng; ++i) gen.push_back(rng.uniform(0.0, 1.0));
        auto ss = scored(att, gen);

        for (int k = 0; k < 5; ++k) {
            double t = rng.uniform(-0.1, 1.1);
            CHECK(apcer(ss, t) == oracles::apcer_slow(ss, t));
            CHECK(bpcer(ss, t) == oracles::bpcer_slow(ss, t));
        }
        auto fast = roc_and_eer(ss);
        auto slow = oracles::eer_slow(ss);
        REQUIRE(fast.eer == Catch::Approx(slow.eer).margin(1e-12));
        REQUIRE(fast.eer_threshold == Catch::Approx(slow.threshold).margin(1e-12));
        auto roc_ref = oracles::roc_slow(ss);
        REQUIRE(fast.points.size() == roc_ref.size());
        for (size_t i = 0; i < roc_ref.size(); ++i) {
            CHECK(fast.points[i].fpr == roc_ref[i].first);
            CHECK(fast.points[i].tpr == roc_ref[i].second);
        }
    }
}

TEST_CASE("apcer and bpcer are monotone in the threshold") {
    Rng rng(77);
    std::vector<double> att, gen;
    for (int i = 0; i < 30; ++i) {
        att.push_back(rng.uniform(0.0, 1.0));
        gen.push_back(rng.uniform(0.0, 1.0));
    }
    auto ss = scored(att, gen);
    double prev_a = -1.0, prev_b = 2.0;
    for (double t = -0.05; t <= 1.1; t += 0.01) {
        double a = apcer(ss, t), b = bpcer(ss, t);
        CHECK(a >= prev_a);  // nondecreasing: raising the bar misses more attacks
        CHECK(b <= prev_b);  // nonincreasing: fewer genuine get flagged
        prev_a = a;
        prev_b = b;
    }
}

TEST_CASE("roc and eer are invariant under strictly increasing transforms") {
    Rng rng(5);
    std::vector<double> att, gen;
    for (int i = 0; i < 25; ++i) {
        att.push_back(rng.uniform(0.2, 1.0));
        gen.push_back(rng.uniform(0.0, 0.8));
    }
    auto ss = scored(att, gen);
    auto base = roc_and_eer(ss);

    auto mapped = ss;
    auto transform = [](double x) { return 0.1 + 0.8 * x * x * x; };  // strictly increasing on [0,1]
    for (auto& s : mapped) s.final_score = transform(s.final_score);
    auto trans = roc_and_eer(mapped);

    REQUIRE(base.points.size() == trans.points.size());
    for (size_t i = 0; i < base.points.size(); ++i) {
        CHECK(base.points[i].fpr == trans.points[i].fpr);
        CHECK(base.points[i].tpr == trans.points[i].tpr);
    }
    CHECK(base.eer == Catch::Approx(trans.eer).margin(1e-12));
    // the classification induced by the co-transformed threshold is unchanged
    for (size_t i = 0; i < ss.size(); ++i)
        CHECK((ss[i].final_score >= base.eer_threshold) ==
              (mapped[i].final_score >= trans.eer_threshold));
}

TEST_CASE("evaluate_protocol aggregates folds") {
    // per-fold (APCER,BPCER) of (.1,.1) (.2,.2) (.3,.3): build score sets that
    // produce exactly these rates at the train-fold EER threshold
    auto make_fold = [](double rate) {
        FoldScores f;
        // train: separable around 0.5 so the threshold lands in (0.4, 0.6)
        f.train = scored({0.8, 0.9, 0.7, 0.95}, {0.1, 0.2, 0.3, 0.05});
        int n = 10;
        std::vector<double> att, gen;
        for (int i = 0; i < n; ++i) {
            att.push_back(i < rate * n ? 0.1 : 0.9);   // rate of attacks below threshold
            gen.push_back(i < rate * n ? 0.9 : 0.1);   // rate of genuine above threshold
        }
        auto t = scored(att, gen);
        f.test = t;
        return f;
    };
    std::vector<FoldScores> folds{make_fold(0.1), make_fold(0.2), make_fold(0.3)};
    auto rep = evaluate_protocol(folds, ThresholdSource::train_fold_eer);
    CHECK(rep.acer.mean == Catch::Approx(0.2));
    CHECK(rep.apcer.mean == Catch::Approx(0.2));
    // sample std over {0.1, 0.2, 0.3}
    CHECK(rep.acer.std == Catch::Approx(0.1));
    REQUIRE(rep.per_fold.size() == 3);
    for (const auto& f : rep.per_fold) {
        CHECK(f.threshold.fit_on == "train");
        CHECK(f.threshold.value > 0.3);
        CHECK(f.threshold.value < 0.7);
    }
    CHECK_FALSE(rep.hter.has_value());
}

TEST_CASE("hter is the mean of FAR and FRR at the dev threshold") {
    FoldScores f;
    f.train = scored({0.8, 0.9, 0.85, 0.95}, {0.1, 0.2, 0.15, 0.05});  // dev split scores
    std::vector<double> att, gen;
    for (int i = 0; i < 10; ++i) att.push_back(i < 1 ? 0.2 : 0.9);  // FAR 0.1
    for (int i = 0; i < 10; ++i) gen.push_back(i < 3 ? 0.9 : 0.2);  // FRR 0.3
    f.test = scored(att, gen);
    auto rep = evaluate_protocol({f}, ThresholdSource::dev_split_eer);
    REQUIRE(rep.hter.has_value());
    CHECK(*rep.hter == Catch::Approx(0.2));
    CHECK(rep.per_fold[0].threshold.fit_on == "dev");
}

TEST_CASE("attack-wise apcer keys match the subtypes present") {
    std::vector<ScoredSample> ss;
    auto add = [&](AttackType t, std::optional<MaskSubtype> sub, double score, int truth) {
        ScoredSample s;
        s.sample_id = strf("s%zu", ss.size());
        s.final_score = score;
        s.truth = truth;
        s.attack_class = AttackClass(t, sub);
        ss.push_back(s);
    };
    add(AttackType::genuine, std::nullopt, 0.1, 0);
    add(AttackType::print, std::nullopt, 0.9, 1);
    add(AttackType::mask, MaskSubtype::paper, 0.2, 1);
    add(AttackType::mask, MaskSubtype::transparent, 0.3, 1);
    auto aw = attack_wise_apcer_at(ss, 0.5);
    std::set<std::string> keys;
    for (const auto& [k, _] : aw) keys.insert(k);
    CHECK(keys == std::set<std::string>{"print", "paper", "transparent"});
    CHECK(aw["paper"] == 1.0);
    CHECK(aw["print"] == 0.0);
}

TEST_CASE("video aggregation averages frame scores per video") {
    std::vector<ScoredSample> frames;
    auto add = [&](const std::string& id, double fin, std::optional<double> print) {
        ScoredSample s;
        s.sample_id = id;
        s.final_score = fin;
        s.truth = 1;
        s.attack_class = AttackClass(AttackType::print);
        s.print_score = print;
        frames.push_back(s);
    };
    add("print_000_0000", 0.2, 0.1);
    add("print_000_0001", 0.4, 0.3);
    add("print_001_0000", 0.8, std::nullopt);
    auto videos = aggregate_scores_by_video(frames);
    REQUIRE(videos.size() == 2);
    CHECK(videos[0].sample_id == "print_000");
    CHECK(videos[0].final_score == Catch::Approx(0.3));
    REQUIRE(videos[0].print_score.has_value());
    CHECK(*videos[0].print_score == Catch::Approx(0.2));
    CHECK(videos[1].sample_id == "print_001");
    CHECK_FALSE(videos[1].print_score.has_value());  // absent on any frame -> absent
}

TEST_CASE("score files round trip") {
    std::string dir = testutil::temp_dir("scores_rt");
    std::vector<ScoredSample> ss;
    ScoredSample a;
    a.sample_id = "x1";
    a.final_score = 0.123456789012345;
    a.truth = 1;
    a.attack_class = AttackClass(AttackType::mask, MaskSubtype::half);
    a.print_score = 0.25;
    a.replay_score = 0.5;
    a.mask_score = 0.75;
    ss.push_back(a);
    ScoredSample b;
    b.sample_id = "x2";
    b.final_score = 0.5;
    b.truth = 0;
    ss.push_back(b);  // baseline sample without branch scores
    save_scores(ss, dir + "/s.jsonl");
    auto loaded = load_scores(dir + "/s.jsonl");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].final_score == a.final_score);
    CHECK(loaded[0].mask_score == a.mask_score);
    CHECK(loaded[0].attack_class.mask_subtype == MaskSubtype::half);
    CHECK_FALSE(loaded[1].print_score.has_value());
}
