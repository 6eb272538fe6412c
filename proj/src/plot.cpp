#include "lotus/plot.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

#include "lotus/dataio.hpp"

namespace lotus {

namespace {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

PlotKind plot_kind_from_string(const std::string& s) {
    if (s == "line_by_epoch") return PlotKind::LineByEpoch;
    if (s == "line_by_sparsity") return PlotKind::LineBySparsity;
    throw InputError("unknown plot kind: " + s);
}

void emit_plot(const std::string& csv_path, PlotKind kind, const std::string& out_path) {
    const std::vector<MetricsRow> rows = read_metrics(csv_path);
    if (rows.empty()) throw InputError("emit_plot: CSV has no data rows: " + csv_path);

    // group keys in first-appearance order
    std::vector<std::string> groups;
    for (const auto& r : rows) {
        const std::string key = r.experiment + "/" + r.split;
        if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
    }

    const bool by_epoch = kind == PlotKind::LineByEpoch;
    bool any_loss = false;
    if (by_epoch)
        for (const auto& r : rows) any_loss = any_loss || r.loss != 0.0;

    std::vector<Series> series;
    for (const auto& key : groups) {
        Series acc;
        acc.label = key + (any_loss ? ":accuracy" : "");
        Series loss;
        loss.label = key + ":loss";
        for (const auto& r : rows) {
            if (r.experiment + "/" + r.split != key) continue;
            const double x = by_epoch ? static_cast<double>(r.epoch) : r.sparsity;
            acc.points.emplace_back(x, r.accuracy);
            if (by_epoch && any_loss) loss.points.emplace_back(x, r.loss);
        }
        if (!acc.points.empty()) series.push_back(std::move(acc));
        if (by_epoch && any_loss && !loss.points.empty()) series.push_back(std::move(loss));
    }

    double xmin = series[0].points[0].first, xmax = xmin;
    double ymin = series[0].points[0].second, ymax = ymin;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    const std::string xmin_label = format_g6(xmin), xmax_label = format_g6(xmax);
    const std::string ymin_label = format_g6(ymin), ymax_label = format_g6(ymax);
    // degenerate ranges still need a finite pixel mapping
    if (xmax == xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax == ymin) {
        ymin -= 0.5;
        ymax += 0.5;
    }

    const double width = 720, height = 440;
    const double left = 70, right = 20, top = 20, bottom = 45;
    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "  <rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    // axes
    svg << "  <line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
        << top + ph << "\" stroke=\"black\"/>\n";
    svg << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
        << "\" stroke=\"black\"/>\n";
    // min/max labels
    svg << "  <text x=\"" << left << "\" y=\"" << height - 12 << "\" font-size=\"12\">"
        << xml_escape(xmin_label) << "</text>\n";
    svg << "  <text x=\"" << left + pw - 30 << "\" y=\"" << height - 12 << "\" font-size=\"12\">"
        << xml_escape(xmax_label) << "</text>\n";
    svg << "  <text x=\"8\" y=\"" << top + ph << "\" font-size=\"12\">" << xml_escape(ymin_label)
        << "</text>\n";
    svg << "  <text x=\"8\" y=\"" << top + 12 << "\" font-size=\"12\">" << xml_escape(ymax_label)
        << "</text>\n";
    svg << "  <text x=\"" << left + pw / 2 - 25 << "\" y=\"" << height - 12 << "\" font-size=\"12\">"
        << (by_epoch ? "epoch" : "sparsity") << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t pi = 0; pi < series[si].points.size(); ++pi) {
            if (pi > 0) svg << ' ';
            svg << fmt2(px(series[si].points[pi].first)) << ',' << fmt2(py(series[si].points[pi].second));
        }
        svg << "\"/>\n";
        svg << "  <text x=\"" << left + 8 << "\" y=\"" << top + 14 + 14 * static_cast<double>(si)
            << "\" font-size=\"12\" fill=\"" << color << "\">" << xml_escape(series[si].label)
            << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError(out_path, "cannot open SVG for writing");
    out << svg.str();
    if (!out) throw IoError(out_path, "SVG write failed");
}

}  // namespace lotus
