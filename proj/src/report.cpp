#include "tvc/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "tvc/errors.hpp"

namespace tvc {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    std::string s(buf);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

namespace {
std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open for writing: " + path);
    return out;
}

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
}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out = open_out(path);
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    if (!out) throw InputError("write failed: " + path);
}

void write_layer_curve_csv(const std::string& path, const LayerCurve& curve) {
    std::vector<std::vector<std::string>> rows;
    for (size_t c = 0; c < curve.fractions.size(); ++c) {
        for (size_t l = 0; l < curve.mass[c].size(); ++l) {
            rows.push_back({format_number(curve.fractions[c]), std::to_string(l),
                            format_number(curve.mass[c][l])});
        }
    }
    write_csv(path, {"checkpoint", "layer", "mass"}, rows);
}

void write_token_map_csv(const std::string& path, const AttentionProbe& probe, int prompt_len) {
    std::ofstream out = open_out(path);
    out << "step,weights\n";
    const auto& records = probe.records();
    for (size_t i = static_cast<size_t>(prompt_len); i < records.size(); ++i) {
        out << (i - static_cast<size_t>(prompt_len));
        for (double w : records[i].dense_row) out << ',' << format_number(w);
        out << '\n';
    }
    if (!out) throw InputError("write failed: " + path);
}

void write_ablation_summary_csv(const std::string& path, const AblationResult& result) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [k, r] : result.r) rows.push_back({std::to_string(k), format_number(r)});
    write_csv(path, {"k", "r"}, rows);
}

void write_comparison_csv(const std::string& path, const std::string& label_a,
                          const AblationResult& a, const std::string& label_b,
                          const AblationResult& b) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [k, ra] : a.r) {
        auto it = b.r.find(k);
        if (it == b.r.end()) continue;
        rows.push_back({std::to_string(k), format_number(ra), format_number(it->second),
                        format_number(a.r_full - ra), format_number(b.r_full - it->second)});
    }
    write_csv(path,
              {"k", "r_" + label_a, "r_" + label_b, "delta_" + label_a, "delta_" + label_b},
              rows);
}

namespace {
constexpr int kW = 640, kH = 400, kMargin = 50;

std::ofstream svg_open(const std::string& path, const std::string& title) {
    std::ofstream out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\">\n<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << xml_escape(title) << "</text>\n";
    return out;
}

void svg_bars(std::ofstream& out, const std::vector<std::string>& labels,
              const std::vector<double>& values, double y_max, double offset_frac,
              double width_frac, const std::string& fill) {
    const int plot_w = kW - 2 * kMargin, plot_h = kH - 2 * kMargin;
    const double slot = static_cast<double>(plot_w) / static_cast<double>(labels.size());
    for (size_t i = 0; i < values.size(); ++i) {
        double h = y_max > 0 ? std::max(0.0, values[i]) / y_max * plot_h : 0.0;
        double x = kMargin + slot * (static_cast<double>(i) + offset_frac);
        double y = kH - kMargin - h;
        out << "<rect x=\"" << format_number(x) << "\" y=\"" << format_number(y) << "\" width=\""
            << format_number(slot * width_frac) << "\" height=\"" << format_number(h)
            << "\" fill=\"" << fill << "\"/>\n";
    }
    for (size_t i = 0; i < labels.size(); ++i) {
        double x = kMargin + slot * (static_cast<double>(i) + 0.5);
        out << "<text x=\"" << format_number(x) << "\" y=\"" << (kH - kMargin + 18)
            << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(labels[i])
            << "</text>\n";
    }
    out << "<line x1=\"" << kMargin << "\" y1=\"" << (kH - kMargin) << "\" x2=\"" << (kW - kMargin)
        << "\" y2=\"" << (kH - kMargin) << "\" stroke=\"black\"/>\n";
}
}  // namespace

void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<std::string>& labels, const std::vector<double>& values,
                   double y_max) {
    if (labels.size() != values.size() || labels.empty()) {
        throw InputError("bar chart labels and values disagree");
    }
    std::ofstream out = svg_open(path, title);
    svg_bars(out, labels, values, y_max, 0.15, 0.7, "#4878a8");
    out << "</svg>\n";
    if (!out) throw InputError("write failed: " + path);
}

void svg_grouped_bar_chart(const std::string& path, const std::string& title,
                           const std::vector<std::string>& labels,
                           const std::vector<double>& series_a, const std::string& label_a,
                           const std::vector<double>& series_b, const std::string& label_b,
                           double y_max) {
    if (labels.size() != series_a.size() || labels.size() != series_b.size() || labels.empty()) {
        throw InputError("grouped bar chart series disagree");
    }
    std::ofstream out = svg_open(path, title);
    svg_bars(out, labels, series_a, y_max, 0.1, 0.35, "#4878a8");
    svg_bars(out, labels, series_b, y_max, 0.55, 0.35, "#c05040");
    out << "<text x=\"" << (kW - kMargin) << "\" y=\"40\" text-anchor=\"end\" font-size=\"12\" "
        << "fill=\"#4878a8\">" << xml_escape(label_a) << "</text>\n";
    out << "<text x=\"" << (kW - kMargin) << "\" y=\"56\" text-anchor=\"end\" font-size=\"12\" "
        << "fill=\"#c05040\">" << xml_escape(label_b) << "</text>\n";
    out << "</svg>\n";
    if (!out) throw InputError("write failed: " + path);
}

void svg_heatmap(const std::string& path, const std::string& title,
                 const std::vector<std::vector<double>>& values, double vmax) {
    if (values.empty() || values[0].empty()) throw InputError("empty heatmap");
    const size_t rows = values.size(), cols = values[0].size();
    std::ofstream out = svg_open(path, title);
    const double cw = static_cast<double>(kW - 2 * kMargin) / static_cast<double>(cols);
    const double ch = static_cast<double>(kH - 2 * kMargin) / static_cast<double>(rows);
    for (size_t r = 0; r < rows; ++r) {
        if (values[r].size() != cols) throw InputError("ragged heatmap rows");
        for (size_t c = 0; c < cols; ++c) {
            double t = vmax > 0 ? std::clamp(values[r][c] / vmax, 0.0, 1.0) : 0.0;
            int shade = 255 - static_cast<int>(t * 255.0);
            char color[8];
            std::snprintf(color, sizeof(color), "#%02x%02xff", shade, shade);
            out << "<rect x=\"" << format_number(kMargin + cw * static_cast<double>(c))
                << "\" y=\"" << format_number(kMargin + ch * static_cast<double>(r))
                << "\" width=\"" << format_number(cw) << "\" height=\"" << format_number(ch)
                << "\" fill=\"" << color << "\"/>\n";
        }
    }
    out << "</svg>\n";
    if (!out) throw InputError("write failed: " + path);
}

void svg_histogram(const std::string& path, const std::string& title, const Histogram& hist) {
    std::vector<std::string> labels;
    for (size_t i = 0; i < hist.bounds.size(); ++i) {
        labels.push_back("<=" + std::to_string(hist.bounds[i]));
    }
    labels.push_back(hist.bounds.empty() ? "all" : ">" + std::to_string(hist.bounds.back()));
    std::vector<double> values(hist.counts.begin(), hist.counts.end());
    double y_max = 1.0;
    for (double v : values) y_max = std::max(y_max, v);
    svg_bar_chart(path, title, labels, values, y_max);
}

}  // namespace tvc
