#include "ssn/io_formats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <iterator>
#include <sstream>

namespace ssn {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads whitespace-separated ASCII header tokens, skipping '#' comments.
class HeaderReader {
public:
    explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

    std::string token() {
        skip_space();
        std::string t;
        while (pos_ < b_.size() && !std::isspace(b_[pos_])) t.push_back(static_cast<char>(b_[pos_++]));
        if (t.empty()) throw FormatError("truncated header", pos_);
        return t;
    }
    // Exactly one whitespace byte separates the header from binary data.
    std::size_t data_start() {
        if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw FormatError("missing header terminator", pos_);
        return pos_ + 1;
    }
    std::size_t pos() const { return pos_; }

private:
    void skip_space() {
        while (pos_ < b_.size()) {
            if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else if (std::isspace(b_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

std::size_t parse_size(const std::string& t, std::size_t offset) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) throw FormatError("expected an integer, got '" + t + "'", offset);
    return v;
}

void write_file(const std::filesystem::path& path, const std::string& header, const std::vector<std::uint8_t>& body) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Tensor& field) {
    if (field.rank() != 2) throw ShapeError("PFM expects an [H,W] field, got " + shape_str(field.shape()));
    const std::size_t h = field.dim(0), w = field.dim(1);
    std::vector<std::uint8_t> body(h * w * 4);
    std::size_t o = 0;
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t y = h - 1 - r;
        for (std::size_t x = 0; x < w; ++x) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(field[y * w + x]));
            for (int k = 0; k < 4; ++k) body[o++] = static_cast<std::uint8_t>(bits >> (8 * k));
        }
    }
    write_file(path, "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1\n", body);
}

Tensor read_pfm(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    HeaderReader hr(bytes);
    if (hr.token() != "Pf") throw FormatError(path.string() + ": not a single-channel PFM", 0);
    const std::size_t w = parse_size(hr.token(), hr.pos());
    const std::size_t h = parse_size(hr.token(), hr.pos());
    const std::string scale_tok = hr.token();
    const double scale = std::stod(scale_tok);
    if (scale == 0.0) throw FormatError(path.string() + ": PFM scale must be non-zero", hr.pos());
    const bool little = scale < 0.0;
    const std::size_t start = hr.data_start();
    const std::size_t need = h * w * 4;
    if (bytes.size() - start != need)
        throw FormatError(path.string() + ": expected " + std::to_string(need) + " payload bytes, found " +
                              std::to_string(bytes.size() - start),
                          start);
    Tensor out({h, w});
    std::size_t o = start;
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t y = h - 1 - r;
        for (std::size_t x = 0; x < w; ++x, o += 4) {
            std::uint32_t bits = 0;
            for (int k = 0; k < 4; ++k) {
                const int shift = little ? 8 * k : 8 * (3 - k);
                bits |= static_cast<std::uint32_t>(bytes[o + static_cast<std::size_t>(k)]) << shift;
            }
            out[y * w + x] = static_cast<double>(std::bit_cast<float>(bits));
        }
    }
    return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image, unsigned maxval) {
    if (image.rank() != 2) throw ShapeError("PGM expects an [H,W] image, got " + shape_str(image.shape()));
    if (maxval != 255 && maxval != 65535) throw std::invalid_argument("PGM maxval must be 255 or 65535");
    const std::size_t h = image.dim(0), w = image.dim(1);
    const bool wide = maxval > 255;
    std::vector<std::uint8_t> body(h * w * (wide ? 2 : 1));
    for (std::size_t i = 0; i < h * w; ++i) {
        const double v = std::clamp(image[i], 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * maxval));
        if (wide) {
            body[2 * i] = static_cast<std::uint8_t>(q >> 8);  // PGM is big-endian
            body[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
        } else {
            body[i] = static_cast<std::uint8_t>(q);
        }
    }
    write_file(path, "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n",
               body);
}

Tensor read_pgm(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    HeaderReader hr(bytes);
    if (hr.token() != "P5") throw FormatError(path.string() + ": not a binary PGM", 0);
    const std::size_t w = parse_size(hr.token(), hr.pos());
    const std::size_t h = parse_size(hr.token(), hr.pos());
    const std::size_t maxval = parse_size(hr.token(), hr.pos());
    if (maxval == 0 || maxval > 65535) throw FormatError(path.string() + ": bad maxval", hr.pos());
    const std::size_t start = hr.data_start();
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::size_t need = h * w * bpp;
    if (bytes.size() - start != need)
        throw FormatError(path.string() + ": expected " + std::to_string(need) + " payload bytes, found " +
                              std::to_string(bytes.size() - start),
                          start);
    Tensor out({h, w});
    for (std::size_t i = 0; i < h * w; ++i) {
        const unsigned q = bpp == 2 ? (static_cast<unsigned>(bytes[start + 2 * i]) << 8) | bytes[start + 2 * i + 1]
                                    : bytes[start + i];
        out[i] = static_cast<double>(q) / static_cast<double>(maxval);
    }
    return out;
}

Tensor normalize_for_display(const Tensor& field) {
    Tensor out(field.shape());
    if (field.empty()) return out;
    const auto [lo, hi] = std::minmax_element(field.vec().begin(), field.vec().end());
    const double span = *hi - *lo;
    for (std::size_t i = 0; i < field.numel(); ++i) out[i] = span > 0 ? (field[i] - *lo) / span : 0.0;
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
        throw std::invalid_argument(path_.string() + ": row has " + std::to_string(cells.size()) + " cells, expected " +
                                    std::to_string(columns_));
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
    out_.flush();
}

void CsvWriter::row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double v : cells) s.push_back(format_double(v));
    row(s);
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::out_of_range("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::stringstream ss(l);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (!l.empty() && l.back() == ',') cells.emplace_back();
        return cells;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size())
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                         std::to_string(t.header.size()) + " cells, got " +
                                         std::to_string(cells.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) throw std::runtime_error(path.string() + ": empty CSV");
    return t;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    auto ty = [&](double y) { return spec.log_y ? std::log10(y) : y; };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("plot series '" + s.label + "' has ragged x/y");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0)) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    }
    if (spec.unit_circle) {
        x0 = std::min(x0, -1.0), x1 = std::max(x1, 1.0);
        y0 = std::min(y0, -1.0), y1 = std::max(y1, 1.0);
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad_x = 0.04 * (x1 - x0), pad_y = 0.06 * (y1 - y0);
    x0 -= pad_x, x1 += pad_x, y0 -= pad_y, y1 += pad_y;

    const double ml = 64, mr = 16, mt = 32, mb = 48;
    const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + ph - (y - y0) / (y1 - y0) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << spec.width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << esc(spec.title)
      << "</text>\n";
    o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        o << "<text x=\"" << px(xv) << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">" << num(xv)
          << "</text>\n";
        o << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
          << num(spec.log_y ? std::pow(10.0, yv) : yv) << "</text>\n";
    }
    o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << spec.height - 10 << "\" text-anchor=\"middle\">"
      << esc(spec.x_label) << "</text>\n";
    o << "<text transform=\"translate(14," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << esc(spec.y_label) << "</text>\n";
    if (spec.unit_circle) {
        o << "<ellipse cx=\"" << px(0) << "\" cy=\"" << py(0) << "\" rx=\"" << px(1) - px(0) << "\" ry=\""
          << py(0) - py(1) << "\" fill=\"none\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* col = kPalette[k % std::size(kPalette)];
        if (spec.scatter) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0)) continue;
                o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(ty(s.y[i])) << "\" r=\"2.5\" fill=\"" << col
                  << "\" fill-opacity=\"0.7\"/>\n";
            }
        } else {
            o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0)) continue;
                o << px(s.x[i]) << ',' << py(ty(s.y[i])) << ' ';
            }
            o << "\"/>\n";
        }
        o << "<text x=\"" << ml + pw - 8 << "\" y=\"" << mt + 16 + 14 * static_cast<double>(k)
          << "\" text-anchor=\"end\" fill=\"" << col << "\">" << esc(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void write_svg(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << render_svg(spec, series);
}

}  // namespace ssn
