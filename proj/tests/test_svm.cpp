#include <catch2/catch_amalgamated.hpp>

#include "mixnet/svm.hpp"
#include "test_util.hpp"

using namespace mixnet;

static FeatureVector fv(std::vector<double> v, const std::string& id = "toy") {
    FeatureVector f;
    f.values = std::move(v);
    f.descriptor_id = id;
    return f;
}

static std::pair<std::vector<FeatureVector>, std::vector<int>> two_clusters(Rng& rng, int n) {
    std::vector<FeatureVector> feats;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        feats.push_back(fv({rng.normal() * 0.3 - 2.0, rng.normal() * 0.3 - 2.0}));
        labels.push_back(0);
        feats.push_back(fv({rng.normal() * 0.3 + 2.0, rng.normal() * 0.3 + 2.0}));
        labels.push_back(1);
    }
    return {feats, labels};
}

TEST_CASE("separable clusters reach training accuracy 1") {
    Rng rng(1);
    auto [feats, labels] = two_clusters(rng, 10);
    SvmConfig cfg;
    cfg.C = 10.0;
    cfg.gamma = 0.5;
    SvmModel m = train_svm(feats, labels, cfg);
    int correct = 0;
    for (size_t i = 0; i < feats.size(); ++i) {
        int pred = m.predict_score(feats[i]) >= m.decision_threshold ? 1 : 0;
        correct += pred == labels[i];
    }
    CHECK(correct == static_cast<int>(feats.size()));
}

TEST_CASE("flipping labels negates the score ordering") {
    Rng rng(2);
    auto [feats, labels] = two_clusters(rng, 8);
    SvmConfig cfg;
    cfg.C = 10.0;
    cfg.gamma = 0.5;
    SvmModel m = train_svm(feats, labels, cfg);
    std::vector<int> flipped;
    for (int l : labels) flipped.push_back(1 - l);
    SvmModel mf = train_svm(feats, flipped, cfg);

    auto auc_of = [&](SvmModel& model, const std::vector<int>& lab) {
        std::vector<ScoredSample> ss;
        for (size_t i = 0; i < feats.size(); ++i) {
            ScoredSample s;
            s.sample_id = strf("s%zu", i);
            s.final_score = model.predict_score(feats[i]);
            s.truth = lab[i];
            ss.push_back(s);
        }
        return auc(roc_and_eer(ss).points);
    };
    double a1 = auc_of(m, labels);
    double a2 = auc_of(mf, labels);  // flipped model scored against original labels
    CHECK(a1 == Catch::Approx(1.0).margin(1e-9));
    CHECK(a2 == Catch::Approx(1.0 - a1).margin(0.05));
}

TEST_CASE("rbf kernel solves xor") {
    std::vector<FeatureVector> feats;
    std::vector<int> labels;
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        for (auto [sx, sy, l] : std::vector<std::tuple<double, double, int>>{
                 {-1, -1, 0}, {1, 1, 0}, {-1, 1, 1}, {1, -1, 1}}) {
            feats.push_back(fv({sx + rng.normal() * 0.15, sy + rng.normal() * 0.15}));
            labels.push_back(l);
        }
    }
    SvmConfig cfg;
    cfg.C = 10.0;
    cfg.gamma = 1.0;
    SvmModel m = train_svm(feats, labels, cfg);
    int correct = 0;
    for (size_t i = 0; i < feats.size(); ++i)
        correct += (m.predict_score(feats[i]) >= m.decision_threshold ? 1 : 0) == labels[i];
    CHECK(static_cast<double>(correct) / feats.size() > 0.9);
}

TEST_CASE("platt calibration is symmetric on balanced two-point scores") {
    std::vector<double> decisions{-1, -1, -1, -1, 1, 1, 1, 1};
    std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1};
    double a, b;
    detail::fit_platt(decisions, labels, a, b);
    double mid = 1.0 / (1.0 + std::exp(a * 0.0 + b));
    CHECK(mid == Catch::Approx(0.5).margin(0.05));
    // an attack-side support vector scores above 0.5, genuine side below
    CHECK(1.0 / (1.0 + std::exp(a * 1.0 + b)) > 0.5);
    CHECK(1.0 / (1.0 + std::exp(a * -1.0 + b)) < 0.5);
}

TEST_CASE("degenerate inputs are rejected") {
    Rng rng(4);
    auto [feats, labels] = two_clusters(rng, 4);
    std::vector<int> ones(labels.size(), 1);
    CHECK_THROWS_AS(train_svm(feats, ones, {}), std::invalid_argument);

    std::vector<FeatureVector> tiny{fv({0.0}), fv({1.0}), fv({2.0})};
    CHECK_THROWS_AS(train_svm(tiny, {0, 1, 1}, {}), std::invalid_argument);

    SvmModel m = train_svm(feats, labels, {});
    CHECK_THROWS_WITH(m.predict_score(fv({0.0, 0.0}, "other")),
                      Catch::Matchers::ContainsSubstring("descriptor"));
}

TEST_CASE("grid search returns a sensible configuration") {
    Rng rng(5);
    auto [feats, labels] = two_clusters(rng, 8);
    SvmConfig best = svm_grid_search(feats, labels, {1.0, 10.0}, {0.1, 1.0}, 0);
    CHECK(best.C >= 1.0);
    SvmModel m = train_svm(feats, labels, best);
    int correct = 0;
    for (size_t i = 0; i < feats.size(); ++i)
        correct += (m.predict_score(feats[i]) >= m.decision_threshold ? 1 : 0) == labels[i];
    CHECK(static_cast<double>(correct) / feats.size() > 0.95);
    CHECK_THROWS_AS(svm_grid_search(feats, labels, {}, {1.0}), std::invalid_argument);
}

TEST_CASE("svm models survive a save/load round trip") {
    std::string dir = testutil::temp_dir("svm_rt");
    Rng rng(6);
    auto [feats, labels] = two_clusters(rng, 6);
    SvmConfig cfg;
    cfg.C = 5.0;
    cfg.gamma = 0.7;
    SvmModel m = train_svm(feats, labels, cfg);
    save_svm(m, dir + "/model.svm");
    SvmModel l = load_svm(dir + "/model.svm");
    CHECK(l.descriptor_id == m.descriptor_id);
    CHECK(l.decision_threshold == m.decision_threshold);
    for (const auto& f : feats) CHECK(l.predict_score(f) == m.predict_score(f));
}
