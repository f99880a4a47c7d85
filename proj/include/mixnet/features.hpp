#ifndef MIXNET_FEATURES_HPP
#define MIXNET_FEATURES_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixnet/image.hpp"

namespace mixnet {

// LBP conventions, shared by the brute-force test oracle:
//  - sampling point p of P sits at angle 2*pi*p/P on a circle of radius R,
//    offset (dx, dy) = (R cos a, -R sin a) from the center pixel,
//    sampled with bilinear interpolation;
//  - bit p is set when sample >= center - 1e-9 (the slack absorbs
//    interpolation rounding, keeping the code offset invariant);
//  - pattern = sum of bit_p << p;
//  - a pattern is uniform when its circular bit string has at most two
//    0/1 transitions; uniform patterns map to bins in increasing pattern
//    order, all non-uniform patterns share the last bin.

inline int circular_transitions(uint32_t pattern, int p_bits) {
    int t = 0;
    for (int i = 0; i < p_bits; ++i) {
        int a = (pattern >> i) & 1;
        int b = (pattern >> ((i + 1) % p_bits)) & 1;
        t += a != b;
    }
    return t;
}

// bin index per pattern; size 2^P, number of bins = P*(P-1) + 3
inline std::vector<int> make_uniform_bin_table(int p_bits) {
    const uint32_t n = 1u << p_bits;
    std::vector<int> table(n);
    int next = 0;
    for (uint32_t pat = 0; pat < n; ++pat)
        if (circular_transitions(pat, p_bits) <= 2) table[pat] = next++;
    for (uint32_t pat = 0; pat < n; ++pat)
        if (circular_transitions(pat, p_bits) > 2) table[pat] = next;
    return table;
}

inline const std::vector<int>& uniform_bin_table(int p_bits) {
    static const std::vector<int> table8 = make_uniform_bin_table(8);
    static const std::vector<int> table16 = make_uniform_bin_table(16);
    if (p_bits == 8) return table8;
    if (p_bits == 16) return table16;
    throw std::invalid_argument("uniform_bin_table: only 8 or 16 sampling points supported");
}

inline int uniform_bin_count(int p_bits) { return p_bits * (p_bits - 1) + 3; }

inline double bilinear_sample(const Image& g, double y, double x) {
    int y0 = static_cast<int>(std::floor(y));
    int x0 = static_cast<int>(std::floor(x));
    double fy = y - y0, fx = x - x0;
    // the +1 neighbors carry zero weight on exact-integer coordinates,
    // where they may fall one past the last row/column
    int y1 = std::min(y0 + 1, g.height - 1), x1 = std::min(x0 + 1, g.width - 1);
    double top = g.at(0, y0, x0) * (1 - fx) + g.at(0, y0, x1) * fx;
    double bot = g.at(0, y1, x0) * (1 - fx) + g.at(0, y1, x1) * fx;
    return top * (1 - fy) + bot * fy;
}

inline uint32_t lbp_code(const Image& g, int y, int x, int p_bits, double radius) {
    uint32_t code = 0;
    const double c = g.at(0, y, x);
    for (int p = 0; p < p_bits; ++p) {
        double a = 2.0 * M_PI * p / p_bits;
        double sx = x + radius * std::cos(a);
        double sy = y - radius * std::sin(a);
        double v = bilinear_sample(g, sy, sx);
        if (v >= c - 1e-9) code |= 1u << p;
    }
    return code;
}

// Normalized uniform-LBP histogram over the interior where the whole
// sampling circle fits; histogram sums to 1.
inline std::vector<double> lbp_u2_histogram(const Image& gray, int p_bits, double radius) {
    if (gray.channels != 1)
        throw std::invalid_argument("lbp_u2_histogram: grayscale input required");
    const int margin = static_cast<int>(std::ceil(radius));
    if (gray.height < 2 * margin + 1 || gray.width < 2 * margin + 1)
        throw std::invalid_argument(strf("lbp_u2_histogram: image %dx%d too small for radius %g",
                                         gray.height, gray.width, radius));
    const auto& table = uniform_bin_table(p_bits);
    std::vector<double> hist(uniform_bin_count(p_bits), 0.0);
    size_t count = 0;
    for (int y = margin; y < gray.height - margin; ++y)
        for (int x = margin; x < gray.width - margin; ++x) {
            hist[table[lbp_code(gray, y, x, p_bits, radius)]] += 1.0;
            ++count;
        }
    for (auto& h : hist) h /= static_cast<double>(count);
    return hist;
}

// Uniform non-rotation-invariant LBP(8,1): 58 uniform bins + 1 for the rest.
inline std::vector<double> lbp_histogram(const Image& gray) {
    if (gray.height < 3 || gray.width < 3)
        throw std::invalid_argument(strf("lbp_histogram: image %dx%d too small, need at least 3x3",
                                         gray.height, gray.width));
    return lbp_u2_histogram(gray, 8, 1.0);
}

constexpr int kHogInputSize = 64;   // 4x4 cells of 16x16; 2x2 sliding 3x3-cell blocks
constexpr int kHogCellSize = 16;
constexpr int kHogBins = 9;
constexpr int kHogBlockCells = 3;
constexpr int kHogDim = 324;        // 9 bins x 3x3 cells x 2x2 block positions

// HOG with 9 unsigned orientation bins, 16x16-pixel cells, L2-Hys
// normalization over sliding 3x3-cell blocks. Gradients are centered
// differences with replicated borders; each pixel votes its full magnitude
// into the single orientation bin containing its angle.
inline std::vector<double> hog_features(const Image& gray) {
    if (gray.channels != 1)
        throw std::invalid_argument("hog_features: grayscale input required");
    if (gray.height != kHogInputSize || gray.width != kHogInputSize)
        throw std::invalid_argument(strf("hog_features: expected %dx%d input, got %dx%d",
                                         kHogInputSize, kHogInputSize, gray.height, gray.width));
    const int cells = kHogInputSize / kHogCellSize;  // 4
    std::vector<double> cell_hist(static_cast<size_t>(cells) * cells * kHogBins, 0.0);
    for (int y = 0; y < kHogInputSize; ++y)
        for (int x = 0; x < kHogInputSize; ++x) {
            int xm = std::max(x - 1, 0), xp = std::min(x + 1, kHogInputSize - 1);
            int ym = std::max(y - 1, 0), yp = std::min(y + 1, kHogInputSize - 1);
            double gx = gray.at(0, y, xp) - gray.at(0, y, xm);
            double gy = gray.at(0, yp, x) - gray.at(0, ym, x);
            double mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0) continue;
            double ang = std::atan2(gy, gx) * 180.0 / M_PI;  // (-180, 180]
            if (ang < 0) ang += 180.0;                        // unsigned orientation
            if (ang >= 180.0) ang -= 180.0;
            int bin = std::min(static_cast<int>(ang / 20.0), kHogBins - 1);
            int cy = y / kHogCellSize, cx = x / kHogCellSize;
            cell_hist[(static_cast<size_t>(cy) * cells + cx) * kHogBins + bin] += mag;
        }

    const int positions = cells - kHogBlockCells + 1;  // 2
    std::vector<double> out;
    out.reserve(kHogDim);
    for (int by = 0; by < positions; ++by)
        for (int bx = 0; bx < positions; ++bx) {
            std::vector<double> block;
            block.reserve(kHogBlockCells * kHogBlockCells * kHogBins);
            for (int cy = by; cy < by + kHogBlockCells; ++cy)
                for (int cx = bx; cx < bx + kHogBlockCells; ++cx)
                    for (int b = 0; b < kHogBins; ++b)
                        block.push_back(cell_hist[(static_cast<size_t>(cy) * cells + cx) * kHogBins + b]);
            // L2-Hys: normalize, clip at 0.2, renormalize
            double ss = 0.0;
            for (double v : block) ss += v * v;
            double norm = std::sqrt(ss + 1e-12);
            for (auto& v : block) v = std::min(v / norm, 0.2);
            ss = 0.0;
            for (double v : block) ss += v * v;
            norm = std::sqrt(ss + 1e-12);
            for (auto& v : block) v /= norm;
            out.insert(out.end(), block.begin(), block.end());
        }
    return out;
}

struct FeatureVector {
    std::vector<double> values;
    std::string descriptor_id;
};

constexpr int kLbpHogDim = 59 + 324;  // 383
constexpr int kMsLbpDim = 9 * 59 + 59 + 243;  // 833
constexpr int kLbpInputSize = 64;

// Concatenated LBP(8,1) 59-bin histogram and 324-dim HOG on the canonical
// 64x64 crop.
inline FeatureVector lbp_hog_features(const Image& gray64) {
    auto lbp = lbp_histogram(gray64);
    auto hog = hog_features(gray64);
    FeatureVector f;
    f.descriptor_id = "lbp59+hog324";
    f.values = std::move(lbp);
    f.values.insert(f.values.end(), hog.begin(), hog.end());
    return f;
}

// Multi-scale LBP on a 64x64 crop: LBP(8,1) over a 3x3 grid of overlapping
// 32x32 regions (stride 16), a global LBP(8,2) histogram and a global
// LBP(16,2) histogram. 9*59 + 59 + 243 = 833 dims.
inline FeatureVector multiscale_lbp(const Image& gray64) {
    if (gray64.channels != 1)
        throw std::invalid_argument("multiscale_lbp: grayscale input required");
    if (gray64.height != kLbpInputSize || gray64.width != kLbpInputSize)
        throw std::invalid_argument(strf("multiscale_lbp: expected %dx%d input, got %dx%d",
                                         kLbpInputSize, kLbpInputSize, gray64.height,
                                         gray64.width));
    FeatureVector f;
    f.descriptor_id = "mslbp";
    f.values.reserve(kMsLbpDim);
    const int region = 32, stride = 16;
    for (int ry = 0; ry + region <= kLbpInputSize; ry += stride)
        for (int rx = 0; rx + region <= kLbpInputSize; rx += stride) {
            Image sub(region, region, 1);
            for (int y = 0; y < region; ++y)
                for (int x = 0; x < region; ++x) sub.at(0, y, x) = gray64.at(0, ry + y, rx + x);
            auto h = lbp_u2_histogram(sub, 8, 1.0);
            f.values.insert(f.values.end(), h.begin(), h.end());
        }
    auto h82 = lbp_u2_histogram(gray64, 8, 2.0);
    f.values.insert(f.values.end(), h82.begin(), h82.end());
    auto h162 = lbp_u2_histogram(gray64, 16, 2.0);
    f.values.insert(f.values.end(), h162.begin(), h162.end());
    return f;
}

// --- feature dumps: raw little-endian float32 plus a JSON sidecar ---

inline void save_features(const std::vector<FeatureVector>& feats, const std::string& path) {
    if (feats.empty()) throw std::invalid_argument("save_features: empty feature list");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_features: cannot open " + path);
    for (const auto& f : feats) {
        if (f.descriptor_id != feats.front().descriptor_id ||
            f.values.size() != feats.front().values.size())
            throw std::invalid_argument("save_features: mixed descriptors in one dump");
        for (double v : f.values) {
            float x = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&x), sizeof(x));
        }
    }
    nlohmann::json side;
    side["descriptor_id"] = feats.front().descriptor_id;
    side["count"] = feats.size();
    side["length"] = feats.front().values.size();
    std::ofstream sj(path + ".json", std::ios::binary);
    sj << side.dump(2) << "\n";
}

inline std::vector<FeatureVector> load_features(const std::string& path) {
    std::ifstream sj(path + ".json", std::ios::binary);
    if (!sj) throw std::runtime_error("load_features: missing sidecar " + path + ".json");
    nlohmann::json side = nlohmann::json::parse(sj);
    size_t count = side.at("count").get<size_t>();
    size_t length = side.at("length").get<size_t>();
    std::string id = side.at("descriptor_id").get<std::string>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_features: cannot open " + path);
    std::vector<FeatureVector> out(count);
    for (auto& f : out) {
        f.descriptor_id = id;
        f.values.resize(length);
        for (auto& v : f.values) {
            float x = 0;
            in.read(reinterpret_cast<char*>(&x), sizeof(x));
            v = x;
        }
    }
    if (!in) throw std::runtime_error("load_features: truncated dump " + path);
    return out;
}

}  // namespace mixnet

#endif
