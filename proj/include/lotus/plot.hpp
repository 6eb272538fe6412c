#pragma once

#include <string>

#include "lotus/common.hpp"

namespace lotus {

enum class PlotKind { LineByEpoch, LineBySparsity };

PlotKind plot_kind_from_string(const std::string& s);

// Standalone SVG from a metrics CSV: one polyline per series, axes labeled
// with data min/max, no external assets. LineBySparsity plots accuracy vs
// sparsity; LineByEpoch plots accuracy (and loss, when present) vs epoch.
// Series are keyed by (experiment, split). Throws InputError when the CSV
// has no data rows; nothing is written in that case.
void emit_plot(const std::string& csv_path, PlotKind kind, const std::string& out_path);

}  // namespace lotus
