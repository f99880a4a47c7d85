#include <cstring>

#include <catch2/catch_amalgamated.hpp>

#include "mixnet/protocols.hpp"
#include "mixnet/synthdata.hpp"
#include "test_util.hpp"

using namespace mixnet;

namespace {

// one tiny dataset shared by the whole binary
struct Fixture {
    DatasetManifest manifest;   // fold-annotated frames
    std::string dir;
    Fixture() {
        dir = testutil::temp_dir("trainer_fixture");
        SynthSpec spec;
        spec.seed = 404;
        spec.height = spec.width = 32;
        spec.videos_per_class = 6;
        spec.frames_per_video = 3;
        manifest = assign_folds_by_video(generate(spec, dir), 3, 11);
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

BackboneSpec small32() {
    BackboneSpec b;
    b.family = BackboneFamily::small_cnn;
    b.input_h = b.input_w = 32;
    return b;
}

TrainConfig toy_config(int epochs, uint64_t seed = 7) {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = 16;
    t.learning_rate = 0.2;  // desk-scale rate; the 0.01 default suits full-size data
    t.seed = seed;
    return t;
}

std::vector<double> snapshot(std::vector<nn::ParamView> params) {
    std::vector<double> out;
    for (auto& p : params) out.insert(out.end(), p.value, p.value + p.count);
    return out;
}

}  // namespace

TEST_CASE("zero learning rate leaves mixnet parameters bitwise unchanged") {
    Rng rng(1);
    MixNetConfig mc = mixnet_config_for_manifest(fixture().manifest, small32());
    MixNetModel model(mc, rng);
    auto before = snapshot(model.params());
    TrainConfig cfg = toy_config(1);
    cfg.learning_rate = 0.0;
    train_mixnet(model, fixture().manifest, cfg);
    auto after = snapshot(model.params());
    REQUIRE(before.size() == after.size());
    REQUIRE(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
}

TEST_CASE("training is deterministic given the seed") {
    MixNetConfig mc = mixnet_config_for_manifest(fixture().manifest, small32());
    auto run = [&](const std::string& ckpt_dir) {
        Rng rng(3);
        MixNetModel model(mc, rng);
        TrainConfig cfg = toy_config(3, 21);
        cfg.checkpoint_dir = ckpt_dir;
        return train_mixnet(model, fixture().manifest, cfg);
    };
    std::string d1 = testutil::temp_dir("trainer_det1");
    std::string d2 = testutil::temp_dir("trainer_det2");
    TrainJournal a = run(d1);
    TrainJournal b = run(d2);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (size_t e = 0; e < a.epochs.size(); ++e) {
        REQUIRE(a.epochs[e].loss.total_loss == b.epochs[e].loss.total_loss);
        REQUIRE(a.epochs[e].loss.final_loss == b.epochs[e].loss.final_loss);
    }
    REQUIRE(a.batches == b.batches);
    // identical configuration gives byte-identical checkpoints
    for (int e = 0; e < 3; ++e)
        REQUIRE(testutil::slurp(d1 + strf("/epoch_%03d.ckpt", e)) ==
                testutil::slurp(d2 + strf("/epoch_%03d.ckpt", e)));
}

TEST_CASE("joint training reduces the loss on toy data") {
    MixNetConfig mc = mixnet_config_for_manifest(fixture().manifest, small32());
    Rng rng(5);
    MixNetModel model(mc, rng);
    std::string ckpt_dir = testutil::temp_dir("trainer_ckpts");
    TrainConfig cfg = toy_config(6);
    cfg.checkpoint_dir = ckpt_dir;
    cfg.log_path = ckpt_dir + "/log.jsonl";
    TrainJournal j = train_mixnet(model, fixture().manifest, cfg);
    REQUIRE(j.epochs.size() == 6);
    CHECK(j.epochs.back().loss.total_loss <= j.epochs.front().loss.total_loss);
    CHECK(j.epochs.back().loss.final_loss < j.epochs.front().loss.final_loss);
    // one checkpoint per epoch, plus the JSONL log with one line per epoch
    for (int e = 0; e < 6; ++e) CHECK(fs::exists(ckpt_dir + strf("/epoch_%03d.ckpt", e)));
    std::string log = testutil::slurp(ckpt_dir + "/log.jsonl");
    CHECK(std::count(log.begin(), log.end(), '\n') == 6);
    json first = json::parse(log.substr(0, log.find('\n')));
    CHECK(first.contains("total_loss"));
    CHECK(first.contains("learning_rate"));
}

TEST_CASE("empty manifests are rejected") {
    DatasetManifest empty;
    MixNetConfig mc = mixnet_config_for_manifest(fixture().manifest, small32());
    Rng rng(6);
    MixNetModel model(mc, rng);
    CHECK_THROWS_AS(train_mixnet(model, empty, toy_config(1)), std::invalid_argument);
    VanillaModel v(small32(), rng);
    CHECK_THROWS_AS(train_vanilla(v, empty, toy_config(1)), std::invalid_argument);
}

TEST_CASE("vanilla fine-tuning learns the toy data") {
    Rng rng(7);
    VanillaModel model(small32(), rng);
    TrainConfig cfg = toy_config(14);
    cfg.batch_size = 56;
    train_vanilla(model, fixture().manifest, cfg);
    auto scores = score_with_vanilla(model, fixture().manifest);
    double thr = roc_and_eer(scores).eer_threshold;
    int correct = 0;
    for (const auto& s : scores) correct += (s.final_score >= thr ? 1 : 0) == s.truth;
    double acc = static_cast<double>(correct) / scores.size();
    INFO("training accuracy " << acc);
    CHECK(acc > 0.9);
}

TEST_CASE("label shuffling destroys generalization but not memorization") {
    // memorization sanity: train on shuffled labels, evaluate on clean ones
    DatasetManifest shuffled = fixture().manifest;
    Rng shuffler(13);
    std::vector<AttackClass> classes;
    for (const auto& r : shuffled.records) classes.push_back(r.attack_class);
    shuffler.shuffle(classes);
    for (size_t i = 0; i < classes.size(); ++i) shuffled.records[i].attack_class = classes[i];

    auto train_recs = records_in_fold(shuffled, 0, true);
    auto test_recs = records_in_fold(fixture().manifest, 0, false);  // true labels
    DatasetManifest train_m = submanifest(shuffled, train_recs, "shuf");
    DatasetManifest test_m = submanifest(fixture().manifest, test_recs, "clean");

    Rng rng(8);
    VanillaModel model(small32(), rng);
    train_vanilla(model, train_m, toy_config(8));
    auto scores = score_with_vanilla(model, test_m);
    int correct = 0;
    for (const auto& s : scores) correct += (s.final_score >= 0.5 ? 1 : 0) == s.truth;
    double acc = static_cast<double>(correct) / scores.size();
    INFO("clean-test accuracy after label-shuffled training: " << acc);
    CHECK(acc > 0.2);
    CHECK(acc < 0.8);
}

TEST_CASE("independent specialists see only their own attack") {
    std::map<std::string, TrainJournal> journals;
    IndependentModel model = train_independent(small32(), fixture().manifest, toy_config(2),
                                               CombineRule::max, &journals);
    REQUIRE(model.specialists.size() == 3);
    REQUIRE(journals.size() == 3);
    std::map<std::string, AttackType> class_of;
    for (const auto& r : fixture().manifest.records)
        class_of[r.sample_id] = r.attack_class.value;
    for (const auto& [attack, journal] : journals) {
        for (const auto& id : journal.seen_ids) {
            AttackType t = class_of.at(id);
            INFO("specialist " << attack << " saw " << id);
            CHECK((t == AttackType::genuine || std::string(to_string(t)) == attack));
        }
    }
}

TEST_CASE("combine rules implement max and mean") {
    CHECK(IndependentModel::combine_scores({0.9, 0.1, 0.2}, CombineRule::max) == 0.9);
    CHECK(IndependentModel::combine_scores({0.9, 0.1, 0.2}, CombineRule::average) ==
          Catch::Approx(0.4));
    CHECK_THROWS_AS(IndependentModel::combine_scores({}, CombineRule::max),
                    std::invalid_argument);
}

TEST_CASE("train_independent requires attacks and genuine data") {
    std::vector<SampleRecord> genuine_only;
    for (const auto& r : fixture().manifest.records)
        if (r.attack_class.value == AttackType::genuine) genuine_only.push_back(r);
    DatasetManifest g = submanifest(fixture().manifest, genuine_only, "gonly");
    CHECK_THROWS_AS(train_independent(small32(), g, toy_config(1), CombineRule::max),
                    std::invalid_argument);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    MixNetConfig mc = mixnet_config_for_manifest(fixture().manifest, small32());
    Rng rng(9);
    MixNetModel model(mc, rng);
    // blow up the parameters so the forward pass overflows
    for (auto& p : model.params())
        for (size_t i = 0; i < p.count; ++i) p.value[i] = 1e200;
    CHECK_THROWS_WITH(train_mixnet(model, fixture().manifest, toy_config(1)),
                      Catch::Matchers::ContainsSubstring("non-finite"));
}

TEST_CASE("inner validation split is stratified and disjoint") {
    auto [train, val] = inner_validation_split(fixture().manifest, 3);
    CHECK(train.records.size() + val.records.size() == fixture().manifest.records.size());
    std::set<std::string> train_videos, val_videos;
    for (const auto& r : train.records) train_videos.insert(video_key(r));
    for (const auto& r : val.records) val_videos.insert(video_key(r));
    for (const auto& v : val_videos) CHECK_FALSE(train_videos.count(v));
    // every class appears on both sides
    std::set<AttackType> tc, vc;
    for (const auto& r : train.records) tc.insert(r.attack_class.value);
    for (const auto& r : val.records) vc.insert(r.attack_class.value);
    CHECK(tc.size() == 4);
    CHECK(vc.size() == 4);
}

TEST_CASE("grid search covers the grid and avoids the crippled setting") {
    GridSearchSpec gs;
    gs.branch_alpha_grid = {0.0, 0.33};
    gs.final_alpha_grid = {0.01, 5.0};
    TrainConfig cfg = toy_config(4);
    GridSearchResult res = grid_search(gs, fixture().manifest, cfg, small32());
    // exhaustiveness: |branch|^3 * |final| rows
    REQUIRE(res.table.size() == 8 * 2);
    // the all-zero branch weights with a feeble final coefficient must lose
    std::vector<double> crippled{0.0, 0.0, 0.0, 0.01};
    CHECK(res.best_alphas != crippled);
    INFO("best alphas " << res.best_alphas[0] << "," << res.best_alphas[1] << ","
                        << res.best_alphas[2] << "," << res.best_alphas[3] << " acer "
                        << res.best_acer);
    CHECK(res.best_acer <= 0.25);
}

TEST_CASE("one-point grids return that point") {
    GridSearchSpec gs;
    gs.branch_alpha_grid = {0.33};
    gs.final_alpha_grid = {5.0};
    GridSearchResult res = grid_search(gs, fixture().manifest, toy_config(2), small32());
    REQUIRE(res.table.size() == 1);
    CHECK(res.best_alphas == std::vector<double>{0.33, 0.33, 0.33, 5.0});
}

TEST_CASE("grid specs validate their ranges") {
    GridSearchSpec gs;
    gs.branch_alpha_grid = {0.5, 1.5};
    gs.final_alpha_grid = {5.0};
    CHECK_THROWS_AS(gs.validate(), std::invalid_argument);
    gs.branch_alpha_grid = {0.5};
    gs.final_alpha_grid = {};
    CHECK_THROWS_AS(gs.validate(), std::invalid_argument);
}
