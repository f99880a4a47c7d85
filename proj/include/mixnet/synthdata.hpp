#ifndef MIXNET_SYNTHDATA_HPP
#define MIXNET_SYNTHDATA_HPP

#include <cmath>
#include <string>
#include <vector>

#include "mixnet/datamodel.hpp"
#include "mixnet/image.hpp"

namespace mixnet {

// Procedural stand-in for a merged PAD database. Every class shares a
// face-like base rendering; each attack class injects a distinct signature:
//   print  - halftone dot grid plus a hard rectangular border, in a fixed
//            lower-center box (the depth cues of flat prints sit around the
//            nose/mouth, and the box gives activation maps a ground truth);
//   replay - horizontal banding plus a specular highlight in the same box;
//   mask   - texture flattening plus eye/mouth cutout rings across the face.
// Unseen mask subtypes perturb the mask signature: paper adds grain and fold
// lines, half restricts it to the lower face, transparent scales it down to
// 1/4 (closest to genuine, hardest to detect), mannequin flattens hardest
// and adds glossy patches.
struct SynthSpec {
    uint64_t seed = 0;
    int height = 48;
    int width = 48;
    int videos_per_class = 3;
    int frames_per_video = 4;
    double strength = 1.0;  // class signature strength in (0,1]

    void validate() const {
        if (height < 32 || width < 32)
            throw std::invalid_argument("synth: image size must be at least 32x32");
        if (videos_per_class < 1 || frames_per_video < 1)
            throw std::invalid_argument("synth: need at least 1 video and 1 frame per class");
        if (strength <= 0.0 || strength > 1.0)
            throw std::invalid_argument("synth: signature strength must lie in (0,1]");
    }
};

struct SignatureBox {
    int y0, y1, x0, x1;  // half-open pixel ranges
    double area_fraction(int h, int w) const {
        return static_cast<double>((y1 - y0) * (x1 - x0)) / (static_cast<double>(h) * w);
    }
    bool contains(int y, int x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
};

// fixed lower-center region carrying the print and replay signatures
inline SignatureBox print_signature_box(int h, int w) {
    return {static_cast<int>(0.58 * h), static_cast<int>(0.92 * h),
            static_cast<int>(0.27 * w), static_cast<int>(0.73 * w)};
}

namespace synth_detail {

enum class Signature { none, print, replay, silicone, paper, half, transparent, mannequin };

struct ClassDef {
    std::string token;
    AttackClass cls;
    Signature sig;
};

struct VideoAppearance {
    double cx, cy;        // face center in pixels
    double scale;         // face size factor
    double gain;          // illumination
    double tone;          // skin tone
    double bg, slope_x, slope_y;
    double phase1, phase2;
};

inline VideoAppearance video_appearance(const SynthSpec& spec, Rng& vrng) {
    VideoAppearance a;
    a.cx = spec.width * (0.5 + vrng.uniform(-0.04, 0.04));
    a.cy = spec.height * (0.46 + vrng.uniform(-0.04, 0.04));
    a.scale = vrng.uniform(0.92, 1.08);
    a.gain = vrng.uniform(0.88, 1.12);
    a.tone = vrng.uniform(0.56, 0.66);
    a.bg = vrng.uniform(0.25, 0.35);
    a.slope_x = vrng.uniform(-0.06, 0.06);
    a.slope_y = vrng.uniform(-0.06, 0.06);
    a.phase1 = vrng.uniform(0.0, 6.283185307179586);
    a.phase2 = vrng.uniform(0.0, 6.283185307179586);
    return a;
}

inline double ellipse_r(double y, double x, double cy, double cx, double ay, double ax) {
    double dy = (y - cy) / ay, dx = (x - cx) / ax;
    return std::sqrt(dy * dy + dx * dx);
}

inline double smooth_in(double r, double edge0, double edge1) {
    // 1 inside, 0 outside, linear ramp between
    if (r <= edge0) return 1.0;
    if (r >= edge1) return 0.0;
    return (edge1 - r) / (edge1 - edge0);
}

inline double ring(double r, double lo, double hi) {
    if (r < lo || r > hi) return 0.0;
    double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    return 1.0 - std::abs(r - mid) / half;
}

// deterministic per-pixel grain tied to the video, stable across frames
inline double pixel_hash_noise(uint64_t video_id, int y, int x) {
    uint64_t h = video_id * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(y) * 0x100000001b3ULL +
                 static_cast<uint64_t>(x) + 0xcbf29ce484222325ULL;
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline Image render_frame(const SynthSpec& spec, const ClassDef& cd,
                          const VideoAppearance& a, uint64_t video_id, Rng& frng) {
    const int H = spec.height, W = spec.width;
    const double s = spec.strength;
    Image img(H, W, 1);

    // per-frame pose wobble and illumination flicker
    const double wob_x = frng.uniform(-0.01, 0.01) * W;
    const double wob_y = frng.uniform(-0.01, 0.01) * H;
    const double flick = frng.uniform(-0.03, 0.03);
    const double cx = a.cx + wob_x, cy = a.cy + wob_y;
    const double ax = 0.28 * W * a.scale, ay = 0.36 * H * a.scale;

    const double eye_dx = 0.10 * W * a.scale, eye_dy = 0.12 * H * a.scale;
    const double eye_ax = 0.05 * W * a.scale, eye_ay = 0.03 * H * a.scale;
    const double mouth_dy = 0.17 * H * a.scale;
    const double mouth_ax = 0.09 * W * a.scale, mouth_ay = 0.026 * H * a.scale;

    SignatureBox box = print_signature_box(H, W);

    // Mask-family parameters. Every subtype shares the silicone cue family
    // (flattening, cutout rings, material texture) with its own parameters,
    // so models trained on the silicone signature transfer partially; the
    // transparent analogue carries the faintest copy, making it both the
    // closest to genuine and the hardest to catch.
    double flatten = 0.0, ring_amp = 0.0, tex_amp = 0.0, tex_period = 9.0;
    double grain_amp = 0.0, gloss_amp = 0.0;
    bool lower_only = false, rings_on_eyes = true;
    switch (cd.sig) {
        case Signature::silicone:
            flatten = 0.60 * s; ring_amp = 0.32 * s; tex_amp = 0.20 * s;
            break;
        case Signature::paper:
            flatten = 0.45 * s; ring_amp = 0.32 * s; tex_amp = 0.20 * s; tex_period = 7.0;
            grain_amp = 0.12 * s;
            break;
        case Signature::half:
            flatten = 0.60 * s; ring_amp = 0.32 * s; tex_amp = 0.20 * s;
            lower_only = true; rings_on_eyes = false;
            break;
        case Signature::transparent:
            flatten = 0.15 * 0.60 * s; ring_amp = 0.15 * 0.32 * s; tex_amp = 0.15 * 0.20 * s;
            break;
        case Signature::mannequin:
            flatten = 0.80 * s; tex_amp = 0.22 * s; tex_period = 11.0; gloss_amp = 0.35 * s;
            rings_on_eyes = false; ring_amp = 0.0;
            break;
        default: break;
    }

    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double v = a.bg + a.slope_y * (static_cast<double>(y) / H - 0.5) +
                       a.slope_x * (static_cast<double>(x) / W - 0.5);

            double rf = ellipse_r(y, x, cy, cx, ay, ax);
            double af = smooth_in(rf, 0.97, 1.08);
            if (af > 0) {
                double face = a.tone - 0.10 * rf * rf +
                              0.02 * std::sin(2 * M_PI * x / 11.0 + a.phase1) *
                                  std::sin(2 * M_PI * y / 13.0 + a.phase2);
                // mask-family flattening toward the plain tone
                if (flatten > 0 && (!lower_only || y > cy))
                    face = face * (1.0 - flatten) + (a.tone - 0.03) * flatten;
                // fixed-phase material texture: stable across videos, so it
                // survives into the class mean image; diagonal orientation
                // keeps it distinct from the axis-aligned print dot grid
                if (tex_amp > 0 && (!lower_only || y > cy)) {
                    double u = (x + y) * 0.7071067811865476;
                    double v2 = (x - y) * 0.7071067811865476;
                    face += tex_amp * std::sin(2 * M_PI * u / tex_period + 1.3) *
                            std::sin(2 * M_PI * v2 / tex_period + 2.1);
                }
                if (grain_amp > 0)
                    face += grain_amp * (2.0 * pixel_hash_noise(video_id, y, x) - 1.0);
                v = v * (1 - af) + face * af;

                // facial features
                double re1 = ellipse_r(y, x, cy - eye_dy, cx - eye_dx, eye_ay, eye_ax);
                double re2 = ellipse_r(y, x, cy - eye_dy, cx + eye_dx, eye_ay, eye_ax);
                double rm = ellipse_r(y, x, cy + mouth_dy, cx, mouth_ay, mouth_ax);
                double rn = ellipse_r(y, x, cy + 0.04 * H * a.scale, cx, 0.06 * H * a.scale,
                                      0.02 * W * a.scale);
                v -= 0.30 * smooth_in(re1, 0.85, 1.15) * af;
                v -= 0.30 * smooth_in(re2, 0.85, 1.15) * af;
                v -= 0.25 * smooth_in(rm, 0.85, 1.15) * af;
                v -= 0.08 * smooth_in(rn, 0.8, 1.2) * af;

                // cutout discontinuities of worn masks
                if (ring_amp > 0) {
                    double rsum = 0.0;
                    if (rings_on_eyes && !(lower_only && y <= cy))
                        rsum += ring(re1, 1.15, 1.8) + ring(re2, 1.15, 1.8);
                    if (!lower_only || y > cy) rsum += ring(rm, 1.15, 2.0);
                    v -= ring_amp * std::min(rsum, 1.0) * af;
                }
                if (gloss_amp > 0) {
                    double g1 = ellipse_r(y, x, cy + 0.02 * H, cx - 0.12 * W, 0.05 * H, 0.05 * W);
                    double g2 = ellipse_r(y, x, cy + 0.02 * H, cx + 0.12 * W, 0.05 * H, 0.05 * W);
                    v += gloss_amp * (std::exp(-g1 * g1) + std::exp(-g2 * g2)) * af;
                }
                // paper-mask fold lines
                if (cd.sig == Signature::paper) {
                    if (std::abs(x - (cx - 0.09 * W)) < 1.0 || std::abs(x - (cx + 0.09 * W)) < 1.0)
                        v -= 0.30 * s * af;
                }
            }

            // print / replay signatures in the fixed lower-center box
            if (cd.sig == Signature::print && box.contains(y, x)) {
                double d = std::sin(2 * M_PI * x / 4.0) * std::sin(2 * M_PI * y / 4.0);
                v += 0.22 * s * d;
                bool border = y < box.y0 + 2 || y >= box.y1 - 2 || x < box.x0 + 2 ||
                              x >= box.x1 - 2;
                if (border) v -= 0.35 * s;
            } else if (cd.sig == Signature::replay && box.contains(y, x)) {
                v += 0.16 * s * std::sin(2 * M_PI * y / 3.0);
                double hx = 0.5 * (box.x0 + box.x1), hy = 0.5 * (box.y0 + box.y1);
                double sig = 0.09 * W;
                double r2 = ((x - hx) * (x - hx) + (y - hy) * (y - hy)) / (2 * sig * sig);
                v += 0.45 * s * std::exp(-r2);
            }

            // per-frame sensor noise, then illumination
            v += frng.uniform(-0.01, 0.01);
            v *= a.gain * (1.0 + flick);
            img.at(0, y, x) = std::clamp(v, 0.0, 1.0);
        }
    return img;
}

inline DatasetManifest generate_classes(const SynthSpec& spec, const std::string& out_dir,
                                        const std::vector<ClassDef>& classes,
                                        int video_index_offset) {
    spec.validate();
    fs::create_directories(out_dir);
    DatasetManifest m;
    m.name = "synth";
    m.granularity = Granularity::frame;
    Rng master(spec.seed);
    for (const auto& cd : classes) {
        for (int vid = 0; vid < spec.videos_per_class; ++vid) {
            const int vnum = vid + video_index_offset;
            const uint64_t video_id = fnv1a(cd.token) ^ (0x1234567ULL * (vnum + 1));
            // video v shares its appearance across classes: an attack shows
            // the same face as its genuine counterpart plus the artifact,
            // mirroring how attack databases reuse their subjects
            Rng vrng = master.fork(0x9e00ULL + static_cast<uint64_t>(vnum));
            VideoAppearance app = video_appearance(spec, vrng);
            for (int fr = 0; fr < spec.frames_per_video; ++fr) {
                Rng frng = vrng.fork(fnv1a(cd.token) ^ (1000 + fr));
                Image img = render_frame(spec, cd, app, video_id, frng);
                std::string stem = strf("%s_%03d_%04d", cd.token.c_str(), vnum, fr);
                std::string path = out_dir + "/" + stem + ".png";
                try {
                    save_png(gray_to_rgb(img), path);
                } catch (const std::exception& e) {
                    throw std::runtime_error(strf("synth: cannot write %s: %s", path.c_str(),
                                                  e.what()));
                }
                SampleRecord r;
                r.sample_id = stem;
                r.media_path = path;
                r.frame_index = fr;
                r.attack_class = cd.cls;
                r.source_dataset = "synth";
                r.subject_id = strf("%s_%03d", cd.token.c_str(), vnum);
                m.records.push_back(std::move(r));
            }
        }
    }
    save_manifest(m, out_dir + "/manifest.jsonl");
    return m;
}

}  // namespace synth_detail

// Training-style data: genuine, print, replay and (silicone) mask classes.
inline DatasetManifest generate(const SynthSpec& spec, const std::string& out_dir) {
    using synth_detail::ClassDef;
    using synth_detail::Signature;
    std::vector<ClassDef> classes{
        {"genuine", AttackClass(AttackType::genuine), Signature::none},
        {"print", AttackClass(AttackType::print), Signature::print},
        {"replay", AttackClass(AttackType::replay), Signature::replay},
        {"mask", AttackClass(AttackType::mask, MaskSubtype::silicone), Signature::silicone},
    };
    return synth_detail::generate_classes(spec, out_dir, classes, 0);
}

// Evaluation-only data for the cross/unseen protocol: fresh genuine videos
// plus the four held-out mask subtypes.
inline DatasetManifest generate_unseen_masks(const SynthSpec& spec, const std::string& out_dir) {
    using synth_detail::ClassDef;
    using synth_detail::Signature;
    std::vector<ClassDef> classes{
        {"genuine", AttackClass(AttackType::genuine), Signature::none},
        {"mask-paper", AttackClass(AttackType::mask, MaskSubtype::paper), Signature::paper},
        {"mask-half", AttackClass(AttackType::mask, MaskSubtype::half), Signature::half},
        {"mask-transparent", AttackClass(AttackType::mask, MaskSubtype::transparent),
         Signature::transparent},
        {"mask-mannequin", AttackClass(AttackType::mask, MaskSubtype::mannequin),
         Signature::mannequin},
    };
    // video indices offset so ids never collide with the training manifest
    return synth_detail::generate_classes(spec, out_dir, classes, 1000);
}

}  // namespace mixnet

#endif
