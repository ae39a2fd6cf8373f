#pragma once

#include <string>
#include <vector>

namespace varibad::plot {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool dashed = false;
    // Optional confidence band, same length as x when present.
    std::vector<double> band_lo;
    std::vector<double> band_hi;
};

struct HLine {
    double y = 0.0;
    std::string label;
    std::string color = "#444444";
};

struct BarSeries {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<double> values;  // one per category
    std::vector<double> errs;    // optional, 1.96*stderr half-widths
};

void write_line_chart(const std::string& path, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series,
                      const std::vector<HLine>& hlines = {});

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& categories, const std::vector<BarSeries>& bars,
                     const std::string& ylabel, const std::vector<HLine>& hlines = {});

// Grid heatmap (cell values in [0,1]) with an agent path drawn on top.
void write_grid_heatmap(const std::string& path, const std::string& title, int width, int height,
                        const std::vector<double>& cell_values, const std::vector<int>& path_cells,
                        int start_cell, int goal_cell);

}  // namespace varibad::plot
