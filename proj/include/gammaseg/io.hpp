#pragma once

// Binary PGM/PPM ingestion, mask output and the CSV ladder report.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "gammaseg/errors.hpp"
#include "gammaseg/gammalab.hpp"
#include "gammaseg/grid.hpp"

namespace gammaseg {

namespace detail {

/// Reads the next header token, skipping whitespace and '#' comments.
inline std::string pnm_token(const std::vector<unsigned char>& buf, std::size_t& pos, const std::string& path) {
    for (;;) {
        while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
        if (pos < buf.size() && buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    std::string tok;
    while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok.push_back(static_cast<char>(buf[pos++]));
    if (tok.empty()) throw FormatError("load_image: truncated header in " + path);
    return tok;
}

inline int pnm_int(const std::string& tok, const std::string& path) {
    int v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || v <= 0)
        throw FormatError("load_image: bad header field '" + tok + "' in " + path);
    return v;
}

inline std::string shortest(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

} // namespace detail

/// P5 (grey, m = 1) or P6 (colour, m = 3), 8-bit only; values scaled by
/// 1/255 on a grid with spacing 1/max(nx, ny).
inline MultiField load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_image: cannot open " + path);
    const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    const std::string magic = detail::pnm_token(buf, pos, path);
    int m = 0;
    if (magic == "P5")
        m = 1;
    else if (magic == "P6")
        m = 3;
    else
        throw FormatError("load_image: unsupported format '" + magic + "' in " + path + " (need P5 or P6)");
    const int nx = detail::pnm_int(detail::pnm_token(buf, pos, path), path);
    const int ny = detail::pnm_int(detail::pnm_token(buf, pos, path), path);
    const int maxval = detail::pnm_int(detail::pnm_token(buf, pos, path), path);
    if (maxval != 255) throw FormatError("load_image: unsupported maxval " + std::to_string(maxval) + " in " + path);
    if (pos >= buf.size() || !std::isspace(buf[pos])) throw FormatError("load_image: truncated header in " + path);
    ++pos;
    const std::size_t need = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(m);
    if (buf.size() - pos < need) throw FormatError("load_image: truncated pixel data in " + path);
    const double h = 1.0 / std::max(nx, ny);
    MultiField f(Grid(nx, ny, h, h, 0.0, 0.0), m);
    for (std::size_t k = 0; k < need; ++k) f.values[k] = buf[pos + k] / 255.0;
    return f;
}

/// Writes E as a P5 image with bytes 0 and 255.
inline void save_mask(const IndicatorField& E, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_mask: cannot write " + path);
    out << "P5\n" << E.grid.nx() << ' ' << E.grid.ny() << "\n255\n";
    std::vector<char> bytes(E.mask.size());
    for (std::size_t k = 0; k < bytes.size(); ++k) bytes[k] = static_cast<char>(E.mask[k] ? 255 : 0);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("save_mask: write failed for " + path);
}

inline constexpr const char* kReportHeader = "eps,mu,E_at_norm,E_limit,gap,l1_gap,tv_v,gl_over_tv,d_clp,data1,data2,grad1,grad2,gl";

/// One CSV line per ladder point, floats in shortest round-trip form.
inline void write_report(const GammaReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_report: cannot write " + path);
    out << kReportHeader << '\n';
    for (const auto& r : report.rows) {
        const double cols[] = {r.eps,   r.mu,         r.E_at_norm,  r.E_limit,   r.gap,
                               r.l1_gap, r.tv_v,      r.gl_over_tv, r.d_clp,     r.at.data1,
                               r.at.data2, r.at.grad1, r.at.grad2,  r.at.gl};
        for (std::size_t k = 0; k < std::size(cols); ++k) out << (k ? "," : "") << detail::shortest(cols[k]);
        out << '\n';
    }
    if (!out) throw IoError("write_report: write failed for " + path);
}

} // namespace gammaseg
