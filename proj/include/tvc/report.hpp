#pragma once

#include <string>
#include <vector>

#include "tvc/ablation.hpp"
#include "tvc/distill.hpp"
#include "tvc/probe.hpp"

namespace tvc {

// Fixed-notation number formatting shared by all emitters so outputs are
// byte-stable across runs.
std::string format_number(double v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// columns: checkpoint, layer, mass
void write_layer_curve_csv(const std::string& path, const LayerCurve& curve);

// one row per generated step: step index then the dense attention weights
void write_token_map_csv(const std::string& path, const AttentionProbe& probe, int prompt_len);

// columns: k, r (percent); K + 1 rows
void write_ablation_summary_csv(const std::string& path, const AblationResult& result);

// side-by-side gap table for two runs; columns: k, r_<a>, r_<b>, delta_<a>, delta_<b>
void write_comparison_csv(const std::string& path, const std::string& label_a,
                          const AblationResult& a, const std::string& label_b,
                          const AblationResult& b);

// Minimal deterministic SVG chart primitives.
void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<std::string>& labels, const std::vector<double>& values,
                   double y_max);

void svg_grouped_bar_chart(const std::string& path, const std::string& title,
                           const std::vector<std::string>& labels,
                           const std::vector<double>& series_a, const std::string& label_a,
                           const std::vector<double>& series_b, const std::string& label_b,
                           double y_max);

// Row-major value grid, darker = larger; values expected in [0, vmax].
void svg_heatmap(const std::string& path, const std::string& title,
                 const std::vector<std::vector<double>>& values, double vmax);

void svg_histogram(const std::string& path, const std::string& title, const Histogram& hist);

}  // namespace tvc
