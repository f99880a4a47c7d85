#include <catch2/catch_amalgamated.hpp>

#include "mixnet/mixnet.hpp"
#include "test_util.hpp"

using namespace mixnet;
using nn::Tensor;

namespace {

MixNetConfig small_config(int branches = 3, int input = 32) {
    BackboneSpec spec;
    spec.family = BackboneFamily::small_cnn;
    spec.input_h = spec.input_w = input;
    MixNetConfig c;
    c.branches = {{"print", spec}, {"replay", spec}};
    if (branches == 3) c.branches.emplace_back("mask", spec);
    c.alphas.assign(c.branches.size(), 0.33);
    c.alphas.push_back(5.0);
    return c;
}

Tensor random_images(int n, int size, Rng& rng) {
    Tensor t(n, 3, size, size);
    for (auto& v : t.v) v = rng.uniform();
    return t;
}

std::vector<LabelQuadruple> labels_for(const std::vector<AttackType>& ts) {
    std::vector<LabelQuadruple> out;
    for (AttackType t : ts) out.push_back(label_for(AttackClass(t)));
    return out;
}

}  // namespace

TEST_CASE("cross entropy matches analytic values") {
    CHECK(cross_entropy({1, 0}, {0.5, 0.5}) == Catch::Approx(std::log(2.0)).margin(1e-12));
    CHECK(cross_entropy({1, 0}, {1.0, 0.0}) == Catch::Approx(0.0).margin(1e-6));
    CHECK(cross_entropy({0, 1}, {0.2, 0.8}) == Catch::Approx(-std::log(0.8)).margin(1e-12));
    CHECK_THROWS_AS(cross_entropy({1, 0, 0}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("total loss combines the four terms per the weighted sum") {
    // the two published coefficient sets
    CHECK(MixNetModel::combine({1, 1, 1}, 1, {0.3, 0.5, 1.0, 5.0}) == Catch::Approx(6.8));
    CHECK(MixNetModel::combine({1, 1, 1}, 0, {0.33, 0.33, 0.33, 5.0}) ==
          Catch::Approx(0.99).margin(1e-12));
    CHECK(MixNetModel::combine({0, 0, 0}, 0, {0.3, 0.5, 1.0, 5.0}) == 0.0);
}

TEST_CASE("final-term coefficient scales its contribution linearly") {
    double fl = 0.9;
    // with the branch terms zeroed the total IS the final contribution;
    // power-of-two scales are exact in binary floating point
    for (double t : {2.0, 4.0, 0.5}) {
        double base = MixNetModel::combine({0, 0, 0}, fl, {0.3, 0.5, 1.0, 1.0});
        double scaled = MixNetModel::combine({0, 0, 0}, fl, {0.3, 0.5, 1.0, t});
        REQUIRE(scaled == t * base);
    }
    // with branch terms present the property holds to rounding error
    std::vector<double> branch{0.7, 0.2, 0.4};
    for (double t : {2.0, 3.0, 7.5}) {
        double base = MixNetModel::combine(branch, fl, {0.3, 0.5, 1.0, 1.0});
        double zero = MixNetModel::combine(branch, fl, {0.3, 0.5, 1.0, 0.0});
        double scaled = MixNetModel::combine(branch, fl, {0.3, 0.5, 1.0, t});
        REQUIRE(scaled - zero == Catch::Approx(t * (base - zero)).epsilon(1e-12));
    }
}

TEST_CASE("config validation") {
    auto c = small_config();
    CHECK_NOTHROW(c.validate());
    c.alphas.pop_back();
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);  // coefficient count mismatch
    c = small_config();
    c.branches.emplace_back("mask", c.branches.front().second);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);  // duplicate branch

    MixNetConfig one;
    one.branches = {{"print", c.branches.front().second}};
    one.alphas = {1.0, 1.0};
    CHECK_THROWS_AS(one.validate(), std::invalid_argument);
}

TEST_CASE("three-branch forward yields in-range quadruples") {
    Rng rng(1);
    MixNetModel model(small_config(), rng);
    CHECK(model.parameter_sets_disjoint());
    Tensor x = random_images(4, 32, rng);
    auto quads = model.forward(x);
    REQUIRE(quads.size() == 4);
    for (const auto& q : quads) {
        CHECK(q.in_range());
        CHECK(q.mask_score.has_value());
        CHECK(std::isfinite(q.final_score));
    }
}

TEST_CASE("two-branch models omit the mask score") {
    Rng rng(2);
    MixNetModel model(small_config(2), rng);
    Tensor x = random_images(3, 32, rng);
    auto quads = model.forward(x);
    for (const auto& q : quads) CHECK_FALSE(q.mask_score.has_value());
}

TEST_CASE("forward is deterministic and batch-size faithful") {
    Rng rng(3);
    MixNetModel model(small_config(), rng);
    Tensor x = random_images(16, 32, rng);
    // duplicate sample 0 into slot 1
    std::copy(x.v.begin(), x.v.begin() + x.sample_size(),
              x.v.begin() + x.sample_size());
    auto quads = model.forward(x);
    REQUIRE(quads.size() == 16);
    CHECK(quads[0].print_score == quads[1].print_score);
    CHECK(quads[0].final_score == quads[1].final_score);
    CHECK(*quads[0].mask_score == *quads[1].mask_score);

    Tensor bad(2, 3, 16, 16);
    CHECK_THROWS_AS(model.forward(bad), std::invalid_argument);
}

TEST_CASE("loss breakdown satisfies the weighted-sum invariant") {
    Rng rng(4);
    MixNetModel model(small_config(), rng);
    Tensor x = random_images(6, 32, rng);
    auto labels = labels_for({AttackType::genuine, AttackType::print, AttackType::replay,
                              AttackType::mask, AttackType::genuine, AttackType::print});
    auto act = model.forward_batch(x, true);
    LossBreakdown lb = model.total_loss(act, labels);
    double recomputed = 0.33 * lb.print_loss + 0.33 * lb.replay_loss + 0.33 * lb.mask_loss +
                        5.0 * lb.final_loss;
    CHECK(std::abs(lb.total_loss - recomputed) / std::max(1.0, recomputed) < 1e-6);
    CHECK(lb.print_loss >= 0);
    CHECK(lb.final_loss >= 0);
    CHECK_THROWS_AS(model.total_loss(act, labels_for({AttackType::print})),
                    std::invalid_argument);
}

TEST_CASE("branch losses cannot reach other branches") {
    Rng rng(5);
    MixNetModel model(small_config(), rng);
    Tensor x = random_images(4, 32, rng);
    auto labels = labels_for(
        {AttackType::genuine, AttackType::print, AttackType::replay, AttackType::mask});
    RoutingReport rep = gradient_routing_check(model, x, labels);
    INFO((rep.violations.empty() ? std::string() : rep.violations.front()));
    CHECK(rep.ok());
    const size_t nb = model.branch_count();
    for (size_t term = 0; term < nb; ++term)
        for (size_t b = 0; b < nb; ++b) {
            if (term == b)
                CHECK(rep.cross_grad_linf[term][b] > 0.0);  // own loss reaches own branch
            else
                CHECK(rep.cross_grad_linf[term][b] == 0.0);
        }
    // the final loss reaches every branch through the fusion layer
    for (size_t b = 0; b < nb; ++b) CHECK(rep.cross_grad_linf[nb][b] > 0.0);
}

TEST_CASE("total-loss gradients match finite differences per branch") {
    Rng rng(6);
    MixNetModel model(small_config(3, 24), rng);
    Tensor x = random_images(3, 24, rng);
    auto labels = labels_for({AttackType::print, AttackType::replay, AttackType::mask});

    auto loss_value = [&] {
        auto act = model.forward_batch(x, true);
        return model.total_loss(act, labels).total_loss;
    };
    auto act = model.forward_batch(x, true);
    model.zero_grad();
    model.backward_total(act, labels);

    Rng pick(7);
    const double step = 1e-4;
    for (size_t b = 0; b < model.branch_count(); ++b) {
        auto params = model.branch_params(b);
        int checked = 0;
        for (int tries = 0; tries < 100 && checked < 5; ++tries) {
            auto& p = params[pick.uniform_int(params.size())];
            size_t i = pick.uniform_int(p.count);
            if (std::abs(p.grad[i]) < 1e-7) continue;  // probe meaningful coordinates
            double saved = p.value[i];
            auto fd_at = [&](double h) {
                p.value[i] = saved + h;
                double lp = loss_value();
                p.value[i] = saved - h;
                double lm = loss_value();
                p.value[i] = saved;
                return (lp - lm) / (2 * h);
            };
            double fd = fd_at(step);
            double fd2 = fd_at(step / 2);
            // skip intervals straddling a relu/maxpool kink, where the
            // secant is not a derivative estimate
            if (std::abs(fd - fd2) / std::max({std::abs(fd), std::abs(fd2), 1e-12}) > 1e-4)
                continue;
            double rel = std::abs(fd - p.grad[i]) / std::max(std::abs(fd), std::abs(p.grad[i]));
            INFO(p.name << " fd=" << fd << " analytic=" << p.grad[i]);
            REQUIRE(rel < 1e-3);
            ++checked;
        }
        REQUIRE(checked == 5);
    }
}

TEST_CASE("fusion output is monotone in each branch score") {
    Rng rng(8);
    MixNetModel model(small_config(), rng);
    nn::Dense* fusion = model.fusion_layer();
    REQUIRE(fusion != nullptr);
    auto final_score = [&](double s0, double s1, double s2) {
        Tensor in(1, 3, 1, 1);
        in.v = {s0, s1, s2};
        std::vector<const Tensor*> ins{&in};
        Tensor logits = fusion->forward(ins, false);
        return nn::softmax_rows(logits).at(0, 1, 0, 0);
    };
    const std::vector<double>& w = fusion->weight();  // (2,3) row-major
    for (int b = 0; b < 3; ++b) {
        double expected_dir = w[3 + b] - w[b];  // attack-row minus genuine-row weight
        double prev = -1;
        bool first = true;
        for (double s = 0.0; s <= 1.0; s += 0.25) {
            double args[3] = {0.5, 0.5, 0.5};
            args[b] = s;
            double f = final_score(args[0], args[1], args[2]);
            if (!first) {
                if (expected_dir > 0)
                    CHECK(f >= prev);
                else
                    CHECK(f <= prev);
            }
            prev = f;
            first = false;
        }
    }
}

TEST_CASE("fixed-max fusion takes the largest branch confidence") {
    Rng rng(9);
    auto config = small_config();
    config.fusion = FusionKind::fixed_max;
    MixNetModel model(config, rng);
    Tensor x = random_images(2, 32, rng);
    auto act = model.forward_batch(x, false);
    auto quads = model.scores_of(act);
    for (const auto& q : quads) {
        double mx = std::max({q.print_score, q.replay_score, *q.mask_score});
        CHECK(q.final_score == Catch::Approx(mx));
    }
}

TEST_CASE("checkpoints round trip") {
    std::string dir = testutil::temp_dir("mixnet_ckpt");
    Rng rng(10);
    MixNetModel model(small_config(), rng);
    Tensor x = random_images(2, 32, rng);
    auto before = model.forward(x);
    save_checkpoint(model, dir + "/model.ckpt", json{{"epoch", 3}});

    json meta;
    auto loaded = load_checkpoint(dir + "/model.ckpt", &meta);
    CHECK(meta.at("epoch") == 3);
    auto after = loaded->forward(x);
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) {
        REQUIRE(before[i].final_score == after[i].final_score);
        REQUIRE(before[i].print_score == after[i].print_score);
    }
}

TEST_CASE("vanilla baseline scores and accepts its batch size") {
    Rng rng(11);
    BackboneSpec spec;
    spec.family = BackboneFamily::small_cnn;
    spec.input_h = spec.input_w = 32;
    VanillaModel model(spec, rng);
    Tensor batch = random_images(56, 32, rng);
    auto probs = model.forward(batch);
    REQUIRE(probs.size() == 56);
    for (double p : probs) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
    // untrained response on random inputs stays loosely centered
    Tensor many = random_images(256, 32, rng);
    auto ps = model.forward(many);
    double mean = 0;
    for (double p : ps) mean += p;
    mean /= ps.size();
    CHECK(mean > 0.2);
    CHECK(mean < 0.8);
}

TEST_CASE("vanilla checkpoints round trip") {
    std::string dir = testutil::temp_dir("vanilla_ckpt");
    Rng rng(12);
    BackboneSpec spec;
    spec.family = BackboneFamily::small_cnn;
    spec.input_h = spec.input_w = 32;
    VanillaModel model(spec, rng);
    Tensor x = random_images(3, 32, rng);
    auto before = model.forward(x);
    save_vanilla(model, dir + "/v.ckpt");
    auto loaded = load_vanilla(dir + "/v.ckpt");
    auto after = loaded->forward(x);
    for (size_t i = 0; i < before.size(); ++i) REQUIRE(before[i] == after[i]);
}

TEST_CASE("unknown backbone families are rejected at parse time") {
    CHECK_THROWS_AS(backbone_family_from_string("vgg16"), std::invalid_argument);
}
