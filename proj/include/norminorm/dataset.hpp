#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "norminorm/errors.hpp"
#include "norminorm/matrix.hpp"
#include "norminorm/rng.hpp"

namespace norminorm {

enum class Split : int { train = 0, val = 1, test = 2 };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

struct Dataset {
    RowMatrix features;
    std::vector<double> mos;
    std::vector<Split> split;
    /// Noise-free generator latent (pre-warp); empty for ingested datasets.
    std::vector<double> latent;

    std::size_t size() const noexcept { return mos.size(); }

    std::vector<std::size_t> indices_of(Split s) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < split.size(); ++i) {
            if (split[i] == s) out.push_back(i);
        }
        return out;
    }
};

enum class SynthMode { linear, warped };

/// Synthetic regression task: standard-normal features, a seeded random
/// linear latent, and a monotone (linear or logistic) map onto the score
/// range, plus Gaussian observation noise.
struct SyntheticSpec {
    std::size_t n_samples = 2000;
    std::size_t dim = 8;
    SynthMode mode = SynthMode::warped;
    double noise_sigma = 5.0;
    double mos_low = 0.0;
    double mos_high = 100.0;
    std::uint64_t seed = 0;
};

inline Dataset generate_dataset(const SyntheticSpec& spec) {
    if (spec.n_samples < 3) throw InvalidSpec("synthetic spec needs n_samples >= 3");
    if (spec.dim == 0) throw InvalidSpec("synthetic spec needs dim >= 1");
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
        throw InvalidSpec("noise_sigma must be finite and >= 0");
    }
    if (!(spec.mos_low < spec.mos_high) || !std::isfinite(spec.mos_low) ||
        !std::isfinite(spec.mos_high)) {
        throw InvalidSpec("mos range must be finite with low < high");
    }

    std::mt19937_64 wgen(derive_seed(spec.seed, 0));
    std::mt19937_64 xgen(derive_seed(spec.seed, 1));
    std::mt19937_64 ngen(derive_seed(spec.seed, 2));

    const std::size_t n = spec.n_samples;
    const std::size_t d = spec.dim;
    std::vector<double> w(d);
    for (double& wi : w) wi = standard_normal(wgen);

    Dataset ds;
    ds.features = RowMatrix(n, d);
    ds.latent.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        double y = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double x = standard_normal(xgen);
            ds.features(r, i) = x;
            y += w[i] * x;
        }
        ds.latent[r] = y;
    }

    // Noise-free scores in [low, high]. Linear mode stretches the observed
    // latent range onto the score range (an affine map of the latent, chosen
    // so the clip below never binds without noise); warped mode squashes the
    // latent through a logistic, which lands inside the range by construction.
    const double lo = spec.mos_low, hi = spec.mos_high;
    std::vector<double> clean(n);
    if (spec.mode == SynthMode::linear) {
        const auto [mn_it, mx_it] = std::minmax_element(ds.latent.begin(), ds.latent.end());
        const double mn = *mn_it, mx = *mx_it;
        if (!(mx > mn)) throw InvalidSpec("degenerate latent: all samples identical");
        for (std::size_t r = 0; r < n; ++r) {
            clean[r] = lo + (hi - lo) * (ds.latent[r] - mn) / (mx - mn);
        }
    } else {
        for (std::size_t r = 0; r < n; ++r) {
            clean[r] = lo + (hi - lo) / (1.0 + std::exp(-ds.latent[r]));
        }
    }

    ds.mos.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double noisy = clean[r] + spec.noise_sigma * standard_normal(ngen);
        ds.mos[r] = std::clamp(noisy, lo, hi);
    }

    // 70/10/20 split by index.
    const std::size_t n_train = n * 7 / 10;
    const std::size_t n_val = n / 10;
    ds.split.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        ds.split[r] = r < n_train ? Split::train : (r < n_train + n_val ? Split::val : Split::test);
    }
    return ds;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

/// Schema: header `f1,...,fd,mos,split`; floats with 17 significant digits so
/// a write/ingest round trip is bit-exact.
inline void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    const std::size_t d = ds.features.cols();
    for (std::size_t i = 0; i < d; ++i) out << 'f' << (i + 1) << ',';
    out << "mos,split\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t i = 0; i < d; ++i) out << detail::format_double(ds.features(r, i)) << ',';
        out << detail::format_double(ds.mos[r]) << ',' << to_string(ds.split[r]) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double_cell(const std::string& cell, std::size_t row,
                                const std::string& column) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || end != begin + cell.size()) {
        throw ParseError("not a number: '" + cell + "'", row, column);
    }
    return v;
}

}  // namespace detail

inline Dataset ingest_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = detail::split_csv_line(line);
    if (header.size() < 3 || header[header.size() - 2] != "mos" || header.back() != "split") {
        throw SchemaError("header must be f1,...,fd,mos,split");
    }
    const std::size_t d = header.size() - 2;
    for (std::size_t i = 0; i < d; ++i) {
        if (header[i] != "f" + std::to_string(i + 1)) {
            throw SchemaError("feature columns must be named f1..fd in order; got '" +
                              header[i] + "'");
        }
    }

    std::vector<double> flat;
    std::vector<double> mos;
    std::vector<Split> split;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             row, "row");
        }
        for (std::size_t i = 0; i < d; ++i) {
            flat.push_back(detail::parse_double_cell(fields[i], row, header[i]));
        }
        mos.push_back(detail::parse_double_cell(fields[d], row, "mos"));
        const std::string& s = fields[d + 1];
        if (s == "train") {
            split.push_back(Split::train);
        } else if (s == "val") {
            split.push_back(Split::val);
        } else if (s == "test") {
            split.push_back(Split::test);
        } else {
            throw ParseError("split must be train|val|test, got '" + s + "'", row, "split");
        }
    }

    Dataset ds;
    ds.features = RowMatrix(mos.size(), d);
    for (std::size_t r = 0; r < mos.size(); ++r) {
        for (std::size_t i = 0; i < d; ++i) ds.features(r, i) = flat[r * d + i];
    }
    ds.mos = std::move(mos);
    ds.split = std::move(split);
    return ds;
}

}  // namespace norminorm
