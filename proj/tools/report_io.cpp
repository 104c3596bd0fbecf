#include "report_io.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace calib::tools {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

void SvgPlot::add_line(const std::vector<double>& x, const std::vector<double>& y,
                       const std::string& color) {
    series_.push_back({x, y, color, false});
}

void SvgPlot::add_points(const std::vector<double>& x, const std::vector<double>& y,
                         const std::string& color) {
    series_.push_back({x, y, color, true});
}

void SvgPlot::add_heatmap(const std::vector<std::vector<double>>& values) { heatmap_ = values; }

void SvgPlot::set_labels(const std::string& xlabel, const std::string& ylabel,
                         const std::string& title) {
    xlabel_ = xlabel;
    ylabel_ = ylabel;
    title_ = title;
}

namespace {

std::string heat_color(double v) {
    // compact viridis-like ramp
    v = std::min(1.0, std::max(0.0, v));
    const int r = static_cast<int>(68 + v * (253 - 68));
    const int g = static_cast<int>(1 + v * (231 - 1));
    const int b = static_cast<int>(84 + v * (37 - 84));
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace

std::string SvgPlot::str() const {
    const int ml = 60, mr = 20, mt = 30, mb = 45;
    const double pw = width_ - ml - mr, ph = height_ - mt - mb;
    std::ostringstream os;
    os.precision(8);
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width_ << "' height='" << height_
       << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool have = false;
    for (const auto& s : series_) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!have) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                have = true;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    if (!heatmap_.empty()) {
        double vmin = heatmap_[0][0], vmax = vmin;
        for (const auto& row : heatmap_) {
            for (double v : row) {
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
            }
        }
        if (vmax == vmin) vmax = vmin + 1;
        const std::size_t nx = heatmap_.size(), ny = heatmap_[0].size();
        const double cw = pw / nx, chh = ph / ny;
        for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t j = 0; j < ny; ++j) {
                const double v = (heatmap_[i][j] - vmin) / (vmax - vmin);
                os << "<rect x='" << ml + i * cw << "' y='" << mt + ph - (j + 1) * chh
                   << "' width='" << cw + 0.5 << "' height='" << chh + 0.5 << "' fill='"
                   << heat_color(v) << "'/>\n";
            }
        }
    }

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };
    for (const auto& s : series_) {
        if (s.points) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                os << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i])
                   << "' r='2.5' fill='" << s.color << "'/>\n";
            }
        } else {
            os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                os << px(s.x[i]) << "," << py(s.y[i]) << " ";
            }
            os << "'/>\n";
        }
    }
    os << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
       << "' fill='none' stroke='black'/>\n";
    if (!title_.empty()) {
        os << "<text x='" << width_ / 2 << "' y='18' text-anchor='middle' font-size='13'>"
           << title_ << "</text>\n";
    }
    if (!xlabel_.empty()) {
        os << "<text x='" << width_ / 2 << "' y='" << height_ - 8
           << "' text-anchor='middle' font-size='12'>" << xlabel_ << "</text>\n";
    }
    if (!ylabel_.empty()) {
        os << "<text x='14' y='" << height_ / 2 << "' text-anchor='middle' font-size='12' "
           << "transform='rotate(-90 14 " << height_ / 2 << ")'>" << ylabel_ << "</text>\n";
    }
    if (have) {
        os.precision(4);
        os << "<text x='" << ml << "' y='" << height_ - 28 << "' font-size='10'>" << xmin
           << "</text>\n";
        os << "<text x='" << ml + pw << "' y='" << height_ - 28
           << "' text-anchor='end' font-size='10'>" << xmax << "</text>\n";
        os << "<text x='" << ml - 4 << "' y='" << mt + ph
           << "' text-anchor='end' font-size='10'>" << ymin << "</text>\n";
        os << "<text x='" << ml - 4 << "' y='" << mt + 10
           << "' text-anchor='end' font-size='10'>" << ymax << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::uint64_t fnv1a_hash(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace calib::tools
