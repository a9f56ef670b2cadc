#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "catephi/errors.hpp"

namespace catephi {

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }
    std::span<double> row(std::size_t i) {
        return {data.data() + i * cols, cols};
    }
};

namespace detail {

// Hex float tokens round-trip exactly and are locale-independent.
inline std::string format_hex(double v) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
    return std::string(buf, res.ptr);
}

inline double parse_hex(const std::string& tok) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v, std::chars_format::hex);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw IoError("bad hex float token: '" + tok + "'");
    return v;
}

// Shortest decimal representation that round-trips.
inline std::string format_decimal(double v) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_decimal(const std::string& tok) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw IoError("bad number token: '" + tok + "'");
    return v;
}

}  // namespace detail

// Text matrix format: a "matv1 <rows> <cols>" header line followed by one
// whitespace-separated hex-float row per line.
inline void save_matrix(std::ostream& out, const Matrix& m) {
    out << "matv1 " << m.rows << ' ' << m.cols << '\n';
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) out << ' ';
            out << detail::format_hex(m(i, j));
        }
        out << '\n';
    }
}

inline Matrix load_matrix(std::istream& in) {
    std::string magic;
    std::size_t rows = 0, cols = 0;
    if (!(in >> magic >> rows >> cols) || magic != "matv1")
        throw IoError("not a matv1 matrix stream");
    Matrix m(rows, cols);
    std::string tok;
    for (std::size_t k = 0; k < rows * cols; ++k) {
        if (!(in >> tok)) throw IoError("truncated matrix stream");
        m.data[k] = detail::parse_hex(tok);
    }
    return m;
}

}  // namespace catephi
