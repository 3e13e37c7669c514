#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace coconut::plot {

// A CSV file as written by the harness: header plus rows of fields.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
    std::vector<double> numbers(const std::string& name) const;
    std::vector<std::string> strings(const std::string& name) const;
};

Table read_csv(const std::filesystem::path& path);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool markers = false; // points instead of a polyline
    bool dashed = false;
};

struct Arrow {
    double x0, y0, x1, y1;
};

struct Axes {
    std::string title;
    std::string x_label;
    std::string y_label;
};

void line_chart(const std::filesystem::path& out, const Axes& axes, const std::vector<Series>& series);

// Displacement arrows with optional overlaid curves.
void quiver(const std::filesystem::path& out, const Axes& axes, const std::vector<Arrow>& arrows,
            const std::vector<Series>& overlay);

} // namespace coconut::plot
