#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "coconut/errors.hpp"

namespace coconut::plot {

namespace {

std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 55;

struct Frame {
    double x_lo, x_hi, y_lo, y_hi;

    double px(double x) const { return kLeft + (x - x_lo) / (x_hi - x_lo) * (kWidth - kLeft - kRight); }
    double py(double y) const {
        return kHeight - kBottom - (y - y_lo) / (y_hi - y_lo) * (kHeight - kTop - kBottom);
    }
};

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (ch == '<') out += "&lt;";
        else if (ch == '>') out += "&gt;";
        else if (ch == '&') out += "&amp;";
        else out += ch;
    }
    return out;
}

void pad(double& lo, double& hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
        return;
    }
    const double m = 0.04 * (hi - lo);
    lo -= m;
    hi += m;
}

Frame fit(const std::vector<Series>& series, const std::vector<Arrow>& arrows) {
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    auto take = [&](double x, double y) {
        if (!std::isfinite(x) || !std::isfinite(y)) return;
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
    };
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size(); ++k) take(s.x[k], s.y[k]);
    for (const auto& a : arrows) {
        take(a.x0, a.y0);
        take(a.x1, a.y1);
    }
    if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
    pad(x_lo, x_hi);
    pad(y_lo, y_hi);
    return {x_lo, x_hi, y_lo, y_hi};
}

void open_svg(std::ostream& os, const Frame& fr, const Axes& axes) {
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(axes.title) << "</text>\n";
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    os << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double xv = fr.x_lo + (fr.x_hi - fr.x_lo) * k / 5.0;
        const double yv = fr.y_lo + (fr.y_hi - fr.y_lo) * k / 5.0;
        os << "<line x1=\"" << fr.px(xv) << "\" y1=\"" << y0 << "\" x2=\"" << fr.px(xv) << "\" y2=\""
           << y0 + 5 << "\" stroke=\"black\"/>";
        os << "<text x=\"" << fr.px(xv) << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">"
           << std::setprecision(3) << xv << "</text>\n";
        os << "<line x1=\"" << x0 - 5 << "\" y1=\"" << fr.py(yv) << "\" x2=\"" << x0 << "\" y2=\""
           << fr.py(yv) << "\" stroke=\"black\"/>";
        os << "<text x=\"" << x0 - 8 << "\" y=\"" << fr.py(yv) + 4 << "\" text-anchor=\"end\">" << yv
           << "</text>\n"
           << std::setprecision(6);
    }
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">"
       << escape(axes.x_label) << "</text>\n";
    os << "<text transform=\"translate(18," << (y0 + y1) / 2
       << ") rotate(-90)\" text-anchor=\"middle\">" << escape(axes.y_label) << "</text>\n";
}

void draw_series(std::ostream& os, const Frame& fr, const std::vector<Series>& series) {
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = kPalette[i % std::size(kPalette)];
        if (s.markers) {
            for (std::size_t k = 0; k < s.x.size(); ++k) {
                if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
                os << "<circle cx=\"" << fr.px(s.x[k]) << "\" cy=\"" << fr.py(s.y[k])
                   << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            }
        } else {
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
               << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
            for (std::size_t k = 0; k < s.x.size(); ++k)
                if (std::isfinite(s.x[k]) && std::isfinite(s.y[k]))
                    os << fr.px(s.x[k]) << ',' << fr.py(s.y[k]) << ' ';
            os << "\"/>\n";
        }
    }
}

void draw_legend(std::ostream& os, const std::vector<Series>& series) {
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = kPalette[i % std::size(kPalette)];
        const double ly = kTop + 14 + 18 * static_cast<double>(i);
        const double lx = kWidth - kRight + 12;
        os << "<rect x=\"" << lx << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"8\" fill=\"" << color
           << "\"/><text x=\"" << lx + 18 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
    }
}

void save(const std::filesystem::path& out, const std::string& text) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoError("cannot write " + out.string());
    f << text;
    if (!f) throw IoError("failed writing " + out.string());
}

} // namespace

std::size_t Table::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> Table::numbers(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        if (c >= r.size() || r[c].empty()) {
            out.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        out.push_back(std::stod(r[c]));
    }
    return out;
}

std::vector<std::string> Table::strings(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(c < r.size() ? r[c] : std::string());
    return out;
}

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_record(line);
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

void line_chart(const std::filesystem::path& out, const Axes& axes, const std::vector<Series>& series) {
    const Frame fr = fit(series, {});
    std::ostringstream os;
    open_svg(os, fr, axes);
    draw_series(os, fr, series);
    draw_legend(os, series);
    os << "</svg>\n";
    save(out, os.str());
}

void quiver(const std::filesystem::path& out, const Axes& axes, const std::vector<Arrow>& arrows,
            const std::vector<Series>& overlay) {
    // The frame follows the arrows; overlay curves are clipped to it.
    Frame fr = fit({}, arrows);
    std::ostringstream os;
    open_svg(os, fr, axes);
    os << "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" "
          "orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"#333\"/></marker></defs>\n";
    os << "<clipPath id=\"plotarea\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
       << kWidth - kLeft - kRight << "\" height=\"" << kHeight - kTop - kBottom << "\"/></clipPath>\n";
    for (const auto& a : arrows) {
        os << "<line x1=\"" << fr.px(a.x0) << "\" y1=\"" << fr.py(a.y0) << "\" x2=\"" << fr.px(a.x1)
           << "\" y2=\"" << fr.py(a.y1) << "\" stroke=\"#333\" stroke-width=\"0.8\" "
           << "marker-end=\"url(#head)\"/>\n";
    }
    os << "<g clip-path=\"url(#plotarea)\">\n";
    draw_series(os, fr, overlay);
    os << "</g>\n";
    draw_legend(os, overlay);
    os << "</svg>\n";
    save(out, os.str());
}

} // namespace coconut::plot
