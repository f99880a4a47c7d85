#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "mixnet/diagnostics.hpp"
#include "test_util.hpp"

using namespace mixnet;

namespace {

MixNetConfig toy_config(int input = 32) {
    BackboneSpec spec;
    spec.family = BackboneFamily::small_cnn;
    spec.input_h = spec.input_w = input;
    MixNetConfig c;
    c.branches = {{"print", spec}, {"replay", spec}, {"mask", spec}};
    c.alphas = {0.33, 0.33, 0.33, 5.0};
    return c;
}

std::vector<ScoredSample> scatter_samples(int n, bool with_mask = true) {
    Rng rng(5);
    std::vector<ScoredSample> out;
    for (int i = 0; i < n; ++i) {
        ScoredSample s;
        s.sample_id = strf("s%03d", i);
        s.print_score = rng.uniform();
        s.replay_score = rng.uniform();
        if (with_mask) s.mask_score = rng.uniform();
        s.final_score = rng.uniform();
        s.truth = i % 2;
        s.attack_class = AttackClass(static_cast<AttackType>(i % 4),
                                     i % 4 == 3 ? std::optional<MaskSubtype>(MaskSubtype::silicone)
                                                : std::nullopt);
        out.push_back(s);
    }
    return out;
}

}  // namespace

TEST_CASE("cam output matches the input spatial size") {
    Rng rng(1);
    MixNetModel model(toy_config(), rng);
    Rng irng(2);
    Image img = testutil::random_u8_image(32, 32, irng);
    ActivationMap map = cam(model, img, "print");
    CHECK(map.height == 32);
    CHECK(map.width == 32);
    double lo = 1e9, hi = -1e9;
    for (double v : map.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK_THROWS_AS(cam(model, img, "bogus"), std::invalid_argument);
}

TEST_CASE("equal head weights reduce cam to the plain feature sum") {
    Rng rng(3);
    MixNetModel model(toy_config(), rng);
    int bi = model.branch_index("replay");
    Backbone& bb = model.branch(bi);
    auto* head = dynamic_cast<nn::Dense*>(bb.graph.layer_of(bb.head_node));
    REQUIRE(head != nullptr);
    auto params = head->params();
    // set the attack-class row of the head to a constant
    for (size_t i = 0; i < 32; ++i) params[0].value[32 + i] = 0.25;

    Rng irng(4);
    Image img = testutil::random_u8_image(32, 32, irng);
    ActivationMap map = cam(model, img, "replay");

    // direct computation: unweighted feature sum, rectified + normalized
    nn::Tensor x = tensor_from_image(img);
    bb.graph.forward(x, false);
    const nn::Tensor& feats = bb.graph.output_of(bb.feature_node);
    Image raw(feats.h, feats.w, 1);
    for (int y = 0; y < feats.h; ++y)
        for (int x2 = 0; x2 < feats.w; ++x2) {
            double v = 0;
            for (int c = 0; c < feats.c; ++c) v += feats.at(0, c, y, x2);
            raw.at(0, y, x2) = std::max(0.25 * v, 0.0);
        }
    Image up = resize_bilinear(raw, 32, 32);
    double lo = up.pix[0], hi = up.pix[0];
    for (double v : up.pix) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (size_t i = 0; i < map.values.size(); ++i) {
        double expect = hi > lo ? (up.pix[i] - lo) / (hi - lo) : 0.0;
        REQUIRE(map.values[i] == Catch::Approx(expect).margin(1e-9));
    }
}

TEST_CASE("cam is invariant to positive scaling of the feature maps") {
    Rng rng(5);
    MixNetModel model(toy_config(), rng);
    Rng irng(6);
    Image img = testutil::random_u8_image(32, 32, irng);
    ActivationMap base = cam(model, img, "mask");

    // scale the last conv's weights and bias: post-relu features scale by t
    int bi = model.branch_index("mask");
    for (auto& p : model.branch(bi).graph.params())
        if (p.name.rfind("conv3.", 0) == 0)
            for (size_t i = 0; i < p.count; ++i) p.value[i] *= 3.0;
    ActivationMap scaled = cam(model, img, "mask");
    for (size_t i = 0; i < base.values.size(); ++i)
        REQUIRE(scaled.values[i] == Catch::Approx(base.values[i]).margin(1e-9));
}

TEST_CASE("degenerate constant maps normalize to zero") {
    Rng rng(7);
    MixNetModel model(toy_config(), rng);
    int bi = model.branch_index("print");
    Backbone& bb = model.branch(bi);
    auto* head = dynamic_cast<nn::Dense*>(bb.graph.layer_of(bb.head_node));
    auto params = head->params();
    for (size_t i = 0; i < 32; ++i) params[0].value[32 + i] = 0.0;  // zero attack row
    Rng irng(8);
    Image img = testutil::random_u8_image(32, 32, irng);
    ActivationMap map = cam(model, img, "print");
    for (double v : map.values) CHECK(v == 0.0);
}

TEST_CASE("scatter export writes rows and figures") {
    std::string dir = testutil::temp_dir("scatter");
    auto samples = scatter_samples(40);
    score_scatter_export(samples, dir + "/scatter.csv", dir + "/scatter.png",
                         dir + "/scatter.svg");
    std::string csv = testutil::slurp(dir + "/scatter.csv");
    REQUIRE(!csv.empty());
    CHECK(csv.rfind("sample_id,print_score,replay_score,mask_score,class\n", 0) == 0);
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 41);  // header + one row per sample
    CHECK(fs::exists(dir + "/scatter.png"));
    CHECK(fs::exists(dir + "/scatter.svg"));

    // the class column is restricted to the four classes
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::set<std::string> classes;
    while (std::getline(in, line)) classes.insert(line.substr(line.rfind(',') + 1));
    for (const auto& c : classes)
        CHECK((c == "genuine" || c == "print" || c == "replay" || c == "silicone"));
}

TEST_CASE("scatter rows round trip losslessly") {
    std::string dir = testutil::temp_dir("scatter_rt");
    auto samples = scatter_samples(8);
    score_scatter_export(samples, dir + "/s.csv", dir + "/s.png", dir + "/s.svg");
    std::istringstream in(testutil::slurp(dir + "/s.csv"));
    std::string line;
    std::getline(in, line);
    size_t i = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else
                cur += c;
        }
        cells.push_back(cur);
        REQUIRE(cells.size() == 5);
        CHECK(std::stod(cells[1]) == *samples[i].print_score);
        CHECK(std::stod(cells[2]) == *samples[i].replay_score);
        CHECK(std::stod(cells[3]) == *samples[i].mask_score);
        ++i;
    }
    CHECK(i == samples.size());
}

TEST_CASE("two-branch scores are rejected with a pointer to a 2D plot") {
    std::string dir = testutil::temp_dir("scatter_2d");
    auto samples = scatter_samples(4, /*with_mask=*/false);
    CHECK_THROWS_WITH(score_scatter_export(samples, dir + "/x.csv", dir + "/x.png",
                                           dir + "/x.svg"),
                      Catch::Matchers::ContainsSubstring("2D"));
}

TEST_CASE("roc figures render one curve per series") {
    std::string dir = testutil::temp_dir("rocplot");
    RocSeries perfect{"perfect", {{0, 0, 1.5}, {0, 1, 0.5}, {1, 1, -0.5}}};
    RocSeries diagonal{"chance", {{0, 0, 1.5}, {0.5, 0.5, 0.5}, {1, 1, -0.5}}};
    roc_plot({perfect, diagonal}, dir + "/roc.png", dir + "/roc.svg");
    REQUIRE(fs::exists(dir + "/roc.png"));
    std::string svg = testutil::slurp(dir + "/roc.svg");
    CHECK(svg.find("perfect") != std::string::npos);
    CHECK(svg.find("chance") != std::string::npos);
    // two polylines, one per series
    size_t count = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
        ++count;
        pos += 1;
    }
    CHECK(count == 2);

    CHECK_THROWS_AS(roc_plot({}, dir + "/e.png", dir + "/e.svg"), std::invalid_argument);
}

TEST_CASE("figures are byte-identical across renders") {
    std::string dir = testutil::temp_dir("plot_det");
    RocSeries s{"m", {{0, 0, 1.5}, {0.2, 0.9, 0.5}, {1, 1, -0.5}}};
    roc_plot({s}, dir + "/a.png", dir + "/a.svg");
    roc_plot({s}, dir + "/b.png", dir + "/b.svg");
    CHECK(testutil::slurp(dir + "/a.png") == testutil::slurp(dir + "/b.png"));
    CHECK(testutil::slurp(dir + "/a.svg") == testutil::slurp(dir + "/b.svg"));
}
