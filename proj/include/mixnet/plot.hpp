#ifndef MIXNET_PLOT_HPP
#define MIXNET_PLOT_HPP

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mixnet/image.hpp"

namespace mixnet {

struct Color {
    double r = 0, g = 0, b = 0;
};

namespace plot_colors {
inline constexpr Color black{0, 0, 0};
inline constexpr Color white{1, 1, 1};
inline constexpr Color gray{0.8, 0.8, 0.8};
inline constexpr Color red{0.85, 0.2, 0.15};
inline constexpr Color green{0.15, 0.65, 0.25};
inline constexpr Color blue{0.2, 0.35, 0.85};
inline constexpr Color orange{0.95, 0.6, 0.1};
inline constexpr Color purple{0.55, 0.25, 0.7};
inline constexpr Color teal{0.1, 0.6, 0.6};
inline constexpr Color brown{0.55, 0.35, 0.2};
}  // namespace plot_colors

inline const std::vector<Color>& palette() {
    static const std::vector<Color> p{plot_colors::blue,  plot_colors::red,
                                      plot_colors::green, plot_colors::orange,
                                      plot_colors::purple, plot_colors::teal,
                                      plot_colors::brown, plot_colors::black};
    return p;
}

// 5x7 bitmap glyphs, column-major, bit 0 = top row. Uppercase, digits and
// some punctuation; text is uppercased before rendering.
inline const std::map<char, std::array<uint8_t, 5>>& glyph_table() {
    static const std::map<char, std::array<uint8_t, 5>> t = {
        {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}},
        {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}}, {'2', {0x42, 0x61, 0x51, 0x49, 0x46}},
        {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}}, {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}},
        {'5', {0x27, 0x45, 0x45, 0x45, 0x39}}, {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}},
        {'7', {0x01, 0x71, 0x09, 0x05, 0x03}}, {'8', {0x36, 0x49, 0x49, 0x49, 0x36}},
        {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}}, {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}},
        {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}}, {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}},
        {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}}, {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}},
        {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}}, {'G', {0x3E, 0x41, 0x49, 0x49, 0x3A}},
        {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}}, {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}},
        {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}}, {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}},
        {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}}, {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}},
        {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}}, {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}},
        {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}}, {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}},
        {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}}, {'S', {0x46, 0x49, 0x49, 0x49, 0x31}},
        {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}}, {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}},
        {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}}, {'W', {0x7F, 0x20, 0x18, 0x20, 0x7F}},
        {'X', {0x63, 0x14, 0x08, 0x14, 0x63}}, {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}},
        {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}}, {'.', {0x00, 0x60, 0x60, 0x00, 0x00}},
        {',', {0x00, 0x50, 0x30, 0x00, 0x00}}, {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
        {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}}, {'%', {0x23, 0x13, 0x08, 0x64, 0x62}},
        {'/', {0x20, 0x10, 0x08, 0x04, 0x02}}, {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}},
        {')', {0x00, 0x41, 0x22, 0x1C, 0x00}}, {':', {0x00, 0x36, 0x36, 0x00, 0x00}},
        {'_', {0x40, 0x40, 0x40, 0x40, 0x40}}, {'=', {0x14, 0x14, 0x14, 0x14, 0x14}},
    };
    return t;
}

// Fixed-size RGB raster canvas with just enough drawing primitives for the
// diagnostic figures; rendering is fully deterministic.
class Canvas {
  public:
    Canvas(int h, int w, Color bg = plot_colors::white) : img_(h, w, 3) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) set(y, x, bg);
    }

    int height() const { return img_.height; }
    int width() const { return img_.width; }

    void set(int y, int x, Color c) {
        if (y < 0 || y >= img_.height || x < 0 || x >= img_.width) return;
        img_.at(0, y, x) = c.r;
        img_.at(1, y, x) = c.g;
        img_.at(2, y, x) = c.b;
    }

    void line(double x0, double y0, double x1, double y1, Color c) {
        double dx = x1 - x0, dy = y1 - y0;
        int steps = static_cast<int>(std::max(std::abs(dx), std::abs(dy))) + 1;
        for (int i = 0; i <= steps; ++i) {
            double t = static_cast<double>(i) / steps;
            set(static_cast<int>(std::lround(y0 + t * dy)),
                static_cast<int>(std::lround(x0 + t * dx)), c);
        }
    }

    void disc(double cx, double cy, double rad, Color c) {
        for (int y = static_cast<int>(cy - rad); y <= static_cast<int>(cy + rad) + 1; ++y)
            for (int x = static_cast<int>(cx - rad); x <= static_cast<int>(cx + rad) + 1; ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= rad * rad) set(y, x, c);
    }

    void rect(int y0, int x0, int y1, int x1, Color c, bool fill = false) {
        if (fill) {
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) set(y, x, c);
        } else {
            line(x0, y0, x1, y0, c);
            line(x0, y1, x1, y1, c);
            line(x0, y0, x0, y1, c);
            line(x1, y0, x1, y1, c);
        }
    }

    void text(int y, int x, const std::string& s, Color c) {
        const auto& glyphs = glyph_table();
        int cursor = x;
        for (char ch : s) {
            char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            auto it = glyphs.find(up);
            if (it != glyphs.end())
                for (int col = 0; col < 5; ++col)
                    for (int row = 0; row < 7; ++row)
                        if (it->second[col] & (1 << row)) set(y + row, cursor + col, c);
            cursor += 6;
        }
    }

    void save(const std::string& path) const { save_png(img_, path); }
    const Image& image() const { return img_; }

  private:
    Image img_;
};

// Minimal SVG writer mirroring the raster figures.
class SvgWriter {
  public:
    SvgWriter(int h, int w) : h_(h), w_(w) {
        body_ += strf("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                      "viewBox=\"0 0 %d %d\">\n",
                      w, h, w, h);
        body_ += strf("<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n", w, h);
    }

    static std::string hex(Color c) {
        return strf("#%02x%02x%02x", clamp_u8(c.r), clamp_u8(c.g), clamp_u8(c.b));
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, Color c, double width = 1.5) {
        body_ += "<polyline fill=\"none\" stroke=\"" + hex(c) +
                 strf("\" stroke-width=\"%.1f\" points=\"", width);
        for (const auto& [x, y] : pts) body_ += strf("%.2f,%.2f ", x, y);
        body_ += "\"/>\n";
    }

    void line(double x0, double y0, double x1, double y1, Color c, double width = 1.0) {
        body_ += strf("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" "
                      "stroke-width=\"%.1f\"/>\n",
                      x0, y0, x1, y1, hex(c).c_str(), width);
    }

    void circle(double cx, double cy, double r, Color c) {
        body_ += strf("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\"/>\n", cx, cy, r,
                      hex(c).c_str());
    }

    void text(double x, double y, const std::string& s, Color c, int size = 11) {
        std::string esc;
        for (char ch : s) {
            if (ch == '<') esc += "&lt;";
            else if (ch == '>') esc += "&gt;";
            else if (ch == '&') esc += "&amp;";
            else esc += ch;
        }
        body_ += strf("<text x=\"%.2f\" y=\"%.2f\" font-family=\"monospace\" font-size=\"%d\" "
                      "fill=\"%s\">%s</text>\n",
                      x, y, size, hex(c).c_str(), esc.c_str());
    }

    void save(const std::string& path) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("svg: cannot open " + path);
        out << body_ << "</svg>\n";
    }

  private:
    int h_, w_;
    std::string body_;
};

}  // namespace mixnet

#endif
