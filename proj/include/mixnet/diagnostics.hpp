#ifndef MIXNET_DIAGNOSTICS_HPP
#define MIXNET_DIAGNOSTICS_HPP

#include <fstream>
#include <string>
#include <vector>

#include "mixnet/mixnet.hpp"
#include "mixnet/plot.hpp"
#include "mixnet/synthdata.hpp"
#include "mixnet/trainer.hpp"

namespace mixnet {

// Spatial evidence map of one branch for one image, in [0,1] at the input
// resolution.
struct ActivationMap {
    std::vector<double> values;  // row-major height x width
    int height = 0, width = 0;
    std::string branch;
    std::string source_sample;

    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }

    // fraction of total activation inside a box
    double mass_fraction(const SignatureBox& box) const {
        double inside = 0.0, total = 0.0;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                total += at(y, x);
                if (box.contains(y, x)) inside += at(y, x);
            }
        return total > 0 ? inside / total : 0.0;
    }
};

// Class activation map in the global-average-pooling formulation: the final
// convolutional maps weighted by the head's class weights, rectified,
// upsampled and min-max normalized. The GAP-compatible heads make this
// exact rather than gradient-approximated.
inline ActivationMap cam(MixNetModel& model, const Image& image, const std::string& branch,
                         bool attack_class_weights = true,
                         const std::string& sample_id = "") {
    int bi = model.branch_index(branch);
    if (bi < 0) throw std::invalid_argument("cam: model has no branch named '" + branch + "'");
    Backbone& bb = model.branch(bi);

    Image input = image;
    if (input.height != bb.spec.input_h || input.width != bb.spec.input_w)
        input = resize_bilinear(input, bb.spec.input_h, bb.spec.input_w);
    nn::Tensor x = tensor_from_image(input);
    bb.graph.forward(x, false);
    const nn::Tensor& feats = bb.graph.output_of(bb.feature_node);

    auto* head = dynamic_cast<nn::Dense*>(bb.graph.layer_of(bb.head_node));
    if (!head) throw std::runtime_error("cam: branch head is not a dense layer");
    const int cls = attack_class_weights ? 1 : 0;
    const std::vector<double>& w = head->weight();  // (2, C) row-major

    Image raw(feats.h, feats.w, 1);
    for (int y = 0; y < feats.h; ++y)
        for (int x2 = 0; x2 < feats.w; ++x2) {
            double v = 0.0;
            for (int c = 0; c < feats.c; ++c)
                v += w[static_cast<size_t>(cls) * feats.c + c] * feats.at(0, c, y, x2);
            raw.at(0, y, x2) = std::max(v, 0.0);
        }
    Image up = resize_bilinear(raw, bb.spec.input_h, bb.spec.input_w);

    ActivationMap map;
    map.height = up.height;
    map.width = up.width;
    map.branch = branch;
    map.source_sample = sample_id;
    map.values.assign(up.pix.begin(), up.pix.end());
    double lo = map.values[0], hi = map.values[0];
    for (double v : map.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi > lo)
        for (auto& v : map.values) v = (v - lo) / (hi - lo);
    else
        for (auto& v : map.values) v = 0.0;  // degenerate constant map
    return map;
}

inline void save_activation_map(const ActivationMap& map, const std::string& path) {
    Image img(map.height, map.width, 1);
    std::copy(map.values.begin(), map.values.end(), img.pix.begin());
    save_png(img, path);
}

// --- 3D score scatter ---

inline Color class_color(const AttackClass& c) {
    switch (c.value) {
        case AttackType::genuine: return plot_colors::green;
        case AttackType::print: return plot_colors::red;
        case AttackType::replay: return plot_colors::blue;
        case AttackType::mask: return plot_colors::orange;
    }
    return plot_colors::black;
}

// One row per sample with the three branch scores; figure is an isometric
// projection of the unit score cube colored by class.
inline void score_scatter_export(const std::vector<ScoredSample>& samples,
                                 const std::string& csv_path, const std::string& png_path,
                                 const std::string& svg_path) {
    if (samples.empty()) throw std::invalid_argument("score_scatter_export: no samples");
    for (const auto& s : samples)
        if (!s.print_score || !s.replay_score || !s.mask_score)
            throw std::invalid_argument(
                "score_scatter_export: needs 3-branch scores on every sample; for two-branch "
                "models plot the two scores directly in 2D instead");

    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("score_scatter_export: cannot open " + csv_path);
    csv << "sample_id,print_score,replay_score,mask_score,class\n";
    for (const auto& s : samples)
        csv << s.sample_id << ',' << strf("%.17g", *s.print_score) << ','
            << strf("%.17g", *s.replay_score) << ',' << strf("%.17g", *s.mask_score) << ','
            << s.attack_class.report_key() << "\n";

    const int H = 480, W = 560;
    Canvas canvas(H, W);
    SvgWriter svg(H, W);
    // isometric projection of (print, replay, mask) in [0,1]^3
    auto project = [&](double px, double py, double pz) {
        double u = (px - py) * 0.8660254037844386;
        double v = (px + py) * 0.5 - pz;
        double x = 260.0 + 180.0 * u;
        double y = 260.0 + 120.0 * v;
        return std::pair<double, double>{x, y};
    };
    // axes from the origin corner
    auto o = project(0, 0, 0);
    for (auto [vec, label] : std::vector<std::pair<std::array<double, 3>, std::string>>{
             {{1, 0, 0}, "print"}, {{0, 1, 0}, "replay"}, {{0, 0, 1}, "mask"}}) {
        auto e = project(vec[0], vec[1], vec[2]);
        canvas.line(o.first, o.second, e.first, e.second, plot_colors::gray);
        svg.line(o.first, o.second, e.first, e.second, plot_colors::gray);
        canvas.text(static_cast<int>(e.second) - 8, static_cast<int>(e.first) + 4, label,
                    plot_colors::black);
        svg.text(e.first + 4, e.second - 4, label, plot_colors::black);
    }
    for (const auto& s : samples) {
        auto p = project(*s.print_score, *s.replay_score, *s.mask_score);
        Color c = class_color(s.attack_class);
        canvas.disc(p.first, p.second, 2.0, c);
        svg.circle(p.first, p.second, 2.0, c);
    }
    // legend
    int ly = 16;
    for (auto [cls, label] : std::vector<std::pair<AttackClass, std::string>>{
             {AttackClass(AttackType::genuine), "genuine"},
             {AttackClass(AttackType::print), "print"},
             {AttackClass(AttackType::replay), "replay"},
             {AttackClass(AttackType::mask), "mask"}}) {
        canvas.disc(14, ly + 3, 3.0, class_color(cls));
        canvas.text(ly, 22, label, plot_colors::black);
        svg.circle(14, ly + 3, 3.0, class_color(cls));
        svg.text(22, ly + 8, label, plot_colors::black);
        ly += 14;
    }
    canvas.save(png_path);
    svg.save(svg_path);
}

// --- ROC figure ---

struct RocSeries {
    std::string label;
    std::vector<RocPoint> points;
};

inline void roc_plot(const std::vector<RocSeries>& series, const std::string& png_path,
                     const std::string& svg_path) {
    if (series.empty()) throw std::invalid_argument("roc_plot: no series given");
    const int H = 480, W = 520;
    const int m = 50;  // margin
    Canvas canvas(H, W);
    SvgWriter svg(H, W);
    auto tx = [&](double fpr) { return m + fpr * (W - 2 * m); };
    auto ty = [&](double tpr) { return H - m - tpr * (H - 2 * m); };
    // frame and grid
    for (int g = 0; g <= 5; ++g) {
        double v = g / 5.0;
        canvas.line(tx(0), ty(v), tx(1), ty(v), plot_colors::gray);
        canvas.line(tx(v), ty(0), tx(v), ty(1), plot_colors::gray);
        svg.line(tx(0), ty(v), tx(1), ty(v), plot_colors::gray, 0.5);
        svg.line(tx(v), ty(0), tx(v), ty(1), plot_colors::gray, 0.5);
        canvas.text(static_cast<int>(ty(v)) - 3, 18, strf("%.1f", v), plot_colors::black);
        canvas.text(H - m + 10, static_cast<int>(tx(v)) - 8, strf("%.1f", v), plot_colors::black);
        svg.text(14, ty(v) + 3, strf("%.1f", v), plot_colors::black, 10);
        svg.text(tx(v) - 8, H - m + 18, strf("%.1f", v), plot_colors::black, 10);
    }
    canvas.rect(static_cast<int>(ty(1)), static_cast<int>(tx(0)), static_cast<int>(ty(0)),
                static_cast<int>(tx(1)), plot_colors::black);
    canvas.text(H - 18, W / 2 - 10, "FPR", plot_colors::black);
    canvas.text(12, 6, "TPR", plot_colors::black);
    svg.text(W / 2 - 10, H - 8, "FPR", plot_colors::black);
    svg.text(6, 20, "TPR", plot_colors::black);

    for (size_t i = 0; i < series.size(); ++i) {
        Color c = palette()[i % palette().size()];
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : series[i].points) pts.emplace_back(tx(p.fpr), ty(p.tpr));
        for (size_t k = 1; k < pts.size(); ++k)
            canvas.line(pts[k - 1].first, pts[k - 1].second, pts[k].first, pts[k].second, c);
        svg.polyline(pts, c);
        int ly = m + 12 + static_cast<int>(i) * 14;
        canvas.line(W - m - 150, ly + 3, W - m - 130, ly + 3, c);
        canvas.text(ly, W - m - 124, series[i].label, plot_colors::black);
        svg.line(W - m - 150, ly + 3, W - m - 130, ly + 3, c, 2.0);
        svg.text(W - m - 124, ly + 8, series[i].label, plot_colors::black, 10);
    }
    canvas.save(png_path);
    svg.save(svg_path);
}

}  // namespace mixnet

#endif
