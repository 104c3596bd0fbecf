#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace calib::tools {

/// CSV dialect: comma, dot-decimal, header row, floats at 17 significant
/// digits, no quoting of numerics.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(const std::vector<double>& values) {
        std::ostringstream os;
        os.precision(17);
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) os << ",";
            os << values[i];
        }
        rows_.push_back(os.str());
    }

    void raw_row(const std::string& r) { rows_.push_back(r); }

    std::string str() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < header_.size(); ++i) {
            if (i) os << ",";
            os << header_[i];
        }
        os << "\n";
        for (const auto& r : rows_) os << r << "\n";
        return os.str();
    }

private:
    std::vector<std::string> header_;
    std::vector<std::string> rows_;
};

void write_file(const std::filesystem::path& path, const std::string& content);

/// Minimal SVG plotting: line series and heatmaps, no timestamps.
class SvgPlot {
public:
    SvgPlot(int width, int height) : width_(width), height_(height) {}

    void add_line(const std::vector<double>& x, const std::vector<double>& y,
                  const std::string& color);
    void add_points(const std::vector<double>& x, const std::vector<double>& y,
                    const std::string& color);
    /// values[i][j] over x index i, y index j
    void add_heatmap(const std::vector<std::vector<double>>& values);
    void set_labels(const std::string& xlabel, const std::string& ylabel,
                    const std::string& title);
    std::string str() const;

private:
    struct Series {
        std::vector<double> x, y;
        std::string color;
        bool points = false;
    };
    int width_, height_;
    std::vector<Series> series_;
    std::vector<std::vector<double>> heatmap_;
    std::string xlabel_, ylabel_, title_;
};

std::uint64_t fnv1a_hash(const std::string& data);

}  // namespace calib::tools
