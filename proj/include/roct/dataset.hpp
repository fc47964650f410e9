#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "roct/common.hpp"

namespace roct {

// Binary classification data with all feature values scaled into [0, 1].
struct Dataset {
    std::vector<double> x;      // row-major, n * p
    std::vector<int> y;         // labels in {0, 1}
    std::vector<std::string> feature_names;
    int n = 0;
    int p = 0;

    Dataset() = default;
    Dataset(std::vector<double> values, std::vector<int> labels, int rows, int cols,
            std::vector<std::string> names = {})
        : x(std::move(values)), y(std::move(labels)),
          feature_names(std::move(names)), n(rows), p(cols) {
        validate();
    }

    double at(int i, int j) const { return x[static_cast<size_t>(i) * p + j]; }

    int majority_class() const {
        int ones = 0;
        for (int v : y) ones += v;
        return ones * 2 > n ? 1 : 0; // ties -> 0
    }
    int minority_count() const {
        int ones = 0;
        for (int v : y) ones += v;
        return std::min(ones, n - ones);
    }

    void validate() const {
        if (p < 1) throw Error("dataset must have at least one feature");
        if (n < 0 || x.size() != static_cast<size_t>(n) * p)
            throw Error("dataset shape mismatch");
        if (y.size() != static_cast<size_t>(n)) throw Error("label count mismatch");
        for (int v : y)
            if (v != 0 && v != 1) throw Error("labels must be 0 or 1");
        for (double v : x) {
            if (!std::isfinite(v)) throw Error("non-finite feature value");
            if (v < 0.0 || v > 1.0) throw Error("feature value outside [0,1]; scale first");
        }
        if (!feature_names.empty() && feature_names.size() != static_cast<size_t>(p))
            throw Error("feature name count mismatch");
    }

    Dataset subset(const std::vector<int>& rows) const {
        Dataset d;
        d.p = p;
        d.n = static_cast<int>(rows.size());
        d.feature_names = feature_names;
        d.x.reserve(rows.size() * p);
        d.y.reserve(rows.size());
        for (int i : rows) {
            for (int j = 0; j < p; ++j) d.x.push_back(at(i, j));
            d.y.push_back(y[i]);
        }
        return d;
    }
};

// Min-max parameters needed to undo scale_features.
struct ScalingInfo {
    std::vector<double> min;
    std::vector<double> max;
    std::vector<bool> degenerate; // constant raw column, mapped to 0.5

    double unscale(int feature, double v) const {
        if (degenerate[feature]) return min[feature];
        return min[feature] + v * (max[feature] - min[feature]);
    }
};

// Raw values as parsed from a CSV: not yet scaled or validated against [0,1].
struct RawData {
    std::vector<double> x; // row-major, n * p
    std::vector<int> y;
    std::vector<std::string> feature_names;
    int n = 0;
    int p = 0;
    double at(int i, int j) const { return x[static_cast<size_t>(i) * p + j]; }
};

// Box-shaped attacker: per feature, values may move down by delta_left[j] and
// up by delta_right[j], in fractions of the unit feature range.
struct AttackModel {
    std::vector<double> delta_left;
    std::vector<double> delta_right;

    AttackModel() = default;
    AttackModel(std::vector<double> dl, std::vector<double> dr)
        : delta_left(std::move(dl)), delta_right(std::move(dr)) {
        if (delta_left.size() != delta_right.size())
            throw Error("attack model delta vectors must have equal length");
        for (double v : delta_left)
            if (!(v >= 0.0)) throw Error("delta_left entries must be >= 0");
        for (double v : delta_right)
            if (!(v >= 0.0)) throw Error("delta_right entries must be >= 0");
    }

    // L-infinity shorthand: delta_left = delta_right = epsilon everywhere.
    static AttackModel uniform(double epsilon, int p) {
        if (!(epsilon >= 0.0)) throw Error("epsilon must be >= 0");
        return AttackModel(std::vector<double>(p, epsilon), std::vector<double>(p, epsilon));
    }

    int p() const { return static_cast<int>(delta_left.size()); }

    double low(const Dataset& d, int i, int j) const {
        return clamp01(d.at(i, j) - delta_left[j]);
    }
    double high(const Dataset& d, int i, int j) const {
        return clamp01(d.at(i, j) + delta_right[j]);
    }
};

// Per-feature interval [x - delta_left, x + delta_right] clipped to [0, 1].
struct PerturbationBox {
    std::vector<double> low;
    std::vector<double> high;

    static PerturbationBox around(const Dataset& d, int i, const AttackModel& attack) {
        PerturbationBox b;
        b.low.resize(d.p);
        b.high.resize(d.p);
        for (int j = 0; j < d.p; ++j) {
            b.low[j] = attack.low(d, i, j);
            b.high[j] = attack.high(d, i, j);
        }
        return b;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& tok, int row, int col) {
    const std::string t = trim(tok);
    if (t.empty())
        throw Error(detail::strprintf("empty cell at row %d, column %d", row, col));
    size_t pos = 0;
    double v;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw Error(detail::strprintf("non-numeric value '%s' at row %d, column %d",
                                      t.c_str(), row, col));
    }
    if (pos != t.size())
        throw Error(detail::strprintf("non-numeric value '%s' at row %d, column %d",
                                      t.c_str(), row, col));
    return v;
}

} // namespace detail

// Reads a CSV with a header row; the final column is the binary label.
// Rows are kept in file order. Data rows are 1-based in error messages.
inline RawData load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw Error("empty file (no header row): " + path);
    auto header = detail::split_csv_line(line);
    if (header.size() < 2)
        throw Error("header must contain at least one feature column and the label: " + path);

    RawData raw;
    raw.p = static_cast<int>(header.size()) - 1;
    for (int j = 0; j < raw.p; ++j) raw.feature_names.push_back(detail::trim(header[j]));

    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw Error(detail::strprintf("row %d has %zu cells, expected %zu",
                                          row, cells.size(), header.size()));
        for (int j = 0; j < raw.p; ++j)
            raw.x.push_back(detail::parse_number(cells[j], row, j + 1));
        double label = detail::parse_number(cells[raw.p], row, raw.p + 1);
        if (label != 0.0 && label != 1.0)
            throw Error(detail::strprintf("label %s at row %d is not 0 or 1",
                                          detail::fmt_double(label).c_str(), row));
        raw.y.push_back(static_cast<int>(label));
    }
    raw.n = row;
    return raw;
}

// Min-max scales every feature into [0, 1]. Constant columns become 0.5 and
// are flagged degenerate.
inline std::pair<Dataset, ScalingInfo> scale_features(const RawData& raw) {
    ScalingInfo info;
    info.min.assign(raw.p, 0.0);
    info.max.assign(raw.p, 1.0);
    info.degenerate.assign(raw.p, false);

    for (double v : raw.x)
        if (!std::isfinite(v)) throw Error("NaN or infinite feature value");

    Dataset d;
    d.n = raw.n;
    d.p = raw.p;
    d.y = raw.y;
    d.feature_names = raw.feature_names;
    d.x.resize(raw.x.size());

    for (int j = 0; j < raw.p; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < raw.n; ++i) {
            lo = std::min(lo, raw.at(i, j));
            hi = std::max(hi, raw.at(i, j));
        }
        if (raw.n == 0) { lo = 0.0; hi = 1.0; }
        info.min[j] = lo;
        info.max[j] = hi;
        if (lo == hi) {
            info.degenerate[j] = true;
            for (int i = 0; i < raw.n; ++i)
                d.x[static_cast<size_t>(i) * raw.p + j] = 0.5;
        } else {
            for (int i = 0; i < raw.n; ++i) {
                double v = (raw.at(i, j) - lo) / (hi - lo);
                d.x[static_cast<size_t>(i) * raw.p + j] = clamp01(v);
            }
        }
    }
    if (raw.p >= 1) d.validate();
    return {std::move(d), std::move(info)};
}

// Convenience for data already in [0, 1].
inline Dataset dataset_from_scaled(std::vector<double> values, std::vector<int> labels,
                                   int rows, int cols) {
    return Dataset(std::move(values), std::move(labels), rows, cols);
}

} // namespace roct
