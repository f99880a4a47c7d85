#ifndef MIXNET_BACKBONES_HPP
#define MIXNET_BACKBONES_HPP

#include <memory>
#include <string>
#include <vector>

#include "mixnet/nn.hpp"

namespace mixnet {

enum class BackboneFamily { small_cnn, resnet50, densenet121 };
enum class PretrainedSource { none, imagenet, vggface2 };

inline const char* to_string(BackboneFamily f) {
    switch (f) {
        case BackboneFamily::small_cnn: return "small_cnn";
        case BackboneFamily::resnet50: return "resnet50";
        case BackboneFamily::densenet121: return "densenet121";
    }
    return "?";
}

inline const char* to_string(PretrainedSource s) {
    switch (s) {
        case PretrainedSource::none: return "none";
        case PretrainedSource::imagenet: return "imagenet";
        case PretrainedSource::vggface2: return "vggface2";
    }
    return "?";
}

inline BackboneFamily backbone_family_from_string(const std::string& s) {
    if (s == "small_cnn" || s == "small-cnn") return BackboneFamily::small_cnn;
    if (s == "resnet50") return BackboneFamily::resnet50;
    if (s == "densenet121") return BackboneFamily::densenet121;
    throw std::invalid_argument("unknown backbone family: " + s);
}

inline PretrainedSource pretrained_from_string(const std::string& s) {
    if (s == "none") return PretrainedSource::none;
    if (s == "imagenet") return PretrainedSource::imagenet;
    if (s == "vggface2") return PretrainedSource::vggface2;
    throw std::invalid_argument("unknown pretrained source: " + s);
}

struct BackboneSpec {
    BackboneFamily family = BackboneFamily::small_cnn;
    PretrainedSource pretrained = PretrainedSource::none;
    int input_h = 64, input_w = 64, input_c = 3;

    void validate() const {
        if (family == BackboneFamily::small_cnn && pretrained != PretrainedSource::none)
            throw std::invalid_argument("small_cnn admits only pretrained_source = none");
        if (input_h < 8 || input_w < 8 || input_c != 3)
            throw std::invalid_argument("backbone input must be 3-channel, at least 8x8");
    }
};

// A backbone maps an image batch to 2-class logits; the node holding the
// final convolutional feature maps and the Dense head are tagged so class
// activation maps can read them.
struct Backbone {
    nn::Graph graph;
    int feature_node = -1;
    int head_node = -1;
    int feature_channels = 0;
    BackboneSpec spec;
};

namespace detail {

// 3 conv blocks + GAP + 2-node head; no batch norm so training is a plain
// deterministic function of the seed.
inline Backbone build_small_cnn(const BackboneSpec& spec, Rng& rng) {
    Backbone b;
    b.spec = spec;
    auto& g = b.graph;
    g.add(std::make_unique<nn::Conv2d>(3, 8, 3, 1, 1, rng), "conv1");
    g.add(std::make_unique<nn::ReLU>(), "relu1");
    g.add(std::make_unique<nn::MaxPool2d>(2, 2), "pool1");
    g.add(std::make_unique<nn::Conv2d>(8, 16, 3, 1, 1, rng), "conv2");
    g.add(std::make_unique<nn::ReLU>(), "relu2");
    g.add(std::make_unique<nn::MaxPool2d>(2, 2), "pool2");
    g.add(std::make_unique<nn::Conv2d>(16, 32, 3, 1, 1, rng), "conv3");
    b.feature_node = g.add(std::make_unique<nn::ReLU>(), "features");
    g.add(std::make_unique<nn::GlobalAvgPool>(), "gap");
    b.head_node = g.add(std::make_unique<nn::Dense>(32, 2, rng), "head");
    b.feature_channels = 32;
    return b;
}

inline Backbone build_resnet50(const BackboneSpec& spec, Rng& rng) {
    Backbone b;
    b.spec = spec;
    auto& g = b.graph;
    int n = g.add(std::make_unique<nn::Conv2d>(3, 64, 7, 2, 3, rng, false), "stem.conv");
    n = g.add(std::make_unique<nn::BatchNorm2d>(64), {n}, "stem.bn");
    n = g.add(std::make_unique<nn::ReLU>(), {n}, "stem.relu");
    n = g.add(std::make_unique<nn::MaxPool2d>(3, 2, 1), {n}, "stem.pool");

    const int stage_blocks[4] = {3, 4, 6, 3};
    const int stage_width[4] = {64, 128, 256, 512};
    int in_c = 64;
    for (int st = 0; st < 4; ++st) {
        for (int blk = 0; blk < stage_blocks[st]; ++blk) {
            std::string p = strf("stage%d.block%d.", st + 1, blk);
            int width = stage_width[st];
            int out_c = width * 4;
            int stride = (st > 0 && blk == 0) ? 2 : 1;
            int identity = n;
            int t = g.add(std::make_unique<nn::Conv2d>(in_c, width, 1, 1, 0, rng, false),
                          {n}, p + "conv1");
            t = g.add(std::make_unique<nn::BatchNorm2d>(width), {t}, p + "bn1");
            t = g.add(std::make_unique<nn::ReLU>(), {t}, p + "relu1");
            t = g.add(std::make_unique<nn::Conv2d>(width, width, 3, stride, 1, rng, false),
                      {t}, p + "conv2");
            t = g.add(std::make_unique<nn::BatchNorm2d>(width), {t}, p + "bn2");
            t = g.add(std::make_unique<nn::ReLU>(), {t}, p + "relu2");
            t = g.add(std::make_unique<nn::Conv2d>(width, out_c, 1, 1, 0, rng, false),
                      {t}, p + "conv3");
            t = g.add(std::make_unique<nn::BatchNorm2d>(out_c), {t}, p + "bn3");
            if (blk == 0) {
                int d = g.add(std::make_unique<nn::Conv2d>(in_c, out_c, 1, stride, 0, rng, false),
                              {identity}, p + "down.conv");
                identity = g.add(std::make_unique<nn::BatchNorm2d>(out_c), {d}, p + "down.bn");
            }
            t = g.add(std::make_unique<nn::Add>(), {t, identity}, p + "add");
            n = g.add(std::make_unique<nn::ReLU>(), {t}, p + "out");
            in_c = out_c;
        }
    }
    b.feature_node = n;
    b.feature_channels = in_c;  // 2048
    n = g.add(std::make_unique<nn::GlobalAvgPool>(), {n}, "gap");
    b.head_node = g.add(std::make_unique<nn::Dense>(in_c, 2, rng), {n}, "head");
    return b;
}

inline Backbone build_densenet121(const BackboneSpec& spec, Rng& rng) {
    Backbone b;
    b.spec = spec;
    auto& g = b.graph;
    const int growth = 32;
    int n = g.add(std::make_unique<nn::Conv2d>(3, 64, 7, 2, 3, rng, false), "stem.conv");
    n = g.add(std::make_unique<nn::BatchNorm2d>(64), {n}, "stem.bn");
    n = g.add(std::make_unique<nn::ReLU>(), {n}, "stem.relu");
    n = g.add(std::make_unique<nn::MaxPool2d>(3, 2, 1), {n}, "stem.pool");

    const int block_layers[4] = {6, 12, 24, 16};
    int channels = 64;
    for (int blk = 0; blk < 4; ++blk) {
        std::vector<int> feats{n};
        for (int ly = 0; ly < block_layers[blk]; ++ly) {
            std::string p = strf("block%d.layer%d.", blk + 1, ly);
            int src = feats.size() == 1
                          ? feats[0]
                          : g.add(std::make_unique<nn::ConcatChannels>(), feats, p + "concat");
            int t = g.add(std::make_unique<nn::BatchNorm2d>(channels + ly * growth), {src},
                          p + "bn1");
            t = g.add(std::make_unique<nn::ReLU>(), {t}, p + "relu1");
            t = g.add(std::make_unique<nn::Conv2d>(channels + ly * growth, 4 * growth, 1, 1, 0,
                                                   rng, false),
                      {t}, p + "conv1");
            t = g.add(std::make_unique<nn::BatchNorm2d>(4 * growth), {t}, p + "bn2");
            t = g.add(std::make_unique<nn::ReLU>(), {t}, p + "relu2");
            t = g.add(std::make_unique<nn::Conv2d>(4 * growth, growth, 3, 1, 1, rng, false),
                      {t}, p + "conv2");
            feats.push_back(t);
        }
        channels += block_layers[blk] * growth;
        n = g.add(std::make_unique<nn::ConcatChannels>(), feats, strf("block%d.out", blk + 1));
        if (blk < 3) {
            std::string p = strf("trans%d.", blk + 1);
            n = g.add(std::make_unique<nn::BatchNorm2d>(channels), {n}, p + "bn");
            n = g.add(std::make_unique<nn::ReLU>(), {n}, p + "relu");
            channels /= 2;
            n = g.add(std::make_unique<nn::Conv2d>(channels * 2, channels, 1, 1, 0, rng, false),
                      {n}, p + "conv");
            n = g.add(std::make_unique<nn::AvgPool2d>(2, 2), {n}, p + "pool");
        }
    }
    n = g.add(std::make_unique<nn::BatchNorm2d>(channels), {n}, "final.bn");
    b.feature_node = n = g.add(std::make_unique<nn::ReLU>(), {n}, "features");
    b.feature_channels = channels;  // 1024
    n = g.add(std::make_unique<nn::GlobalAvgPool>(), {n}, "gap");
    b.head_node = g.add(std::make_unique<nn::Dense>(channels, 2, rng), {n}, "head");
    return b;
}

}  // namespace detail

inline Backbone build_backbone(const BackboneSpec& spec, Rng& rng) {
    spec.validate();
    switch (spec.family) {
        case BackboneFamily::small_cnn: return detail::build_small_cnn(spec, rng);
        case BackboneFamily::resnet50: return detail::build_resnet50(spec, rng);
        case BackboneFamily::densenet121: return detail::build_densenet121(spec, rng);
    }
    throw std::invalid_argument("unknown backbone family");
}

}  // namespace mixnet

#endif
