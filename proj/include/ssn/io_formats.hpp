#pragma once

// File formats used around the pipeline: PFM for float fields, PGM for
// 8/16-bit intensity frames, CSV tables and minimal SVG plots.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ssn/spike_codec.hpp"

namespace ssn {

/// Single-channel little-endian PFM ("Pf", scale -1). Rows are stored
/// bottom-to-top as the format requires; the Tensor is [H,W] top-to-bottom.
void write_pfm(const std::filesystem::path& path, const Tensor& field);
Tensor read_pfm(const std::filesystem::path& path);

/// Binary PGM (P5). Values in [0,1] are quantized to maxval (255 or 65535).
void write_pgm(const std::filesystem::path& path, const Tensor& image, unsigned maxval = 255);
/// Returns [H,W] in [0,1].
Tensor read_pgm(const std::filesystem::path& path);

/// Rescales to [0,1] by the field's min/max for previews.
Tensor normalize_for_display(const Tensor& field);

/// Formats doubles with 17 significant digits so values round-trip.
std::string format_double(double v);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& cells);

private:
    std::filesystem::path path_;
    std::size_t columns_;
    std::ofstream out_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

/// Plain comma-separated parser (no quoting). Ragged rows throw.
CsvTable read_csv(const std::filesystem::path& path);

struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
};

struct PlotSpec {
    std::string title, x_label, y_label;
    bool scatter = false;   // markers only instead of polylines
    bool log_y = false;
    bool unit_circle = false;  // draw |z| = 1 (for eigenvalue plots)
    double width = 640, height = 420;
};

std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series);
void write_svg(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<PlotSeries>& series);

}  // namespace ssn
