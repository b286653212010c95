#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "enduro/errors.hpp"
#include "enduro/params.hpp"

namespace enduro {

/// One (V/VVO2max, glycogen share) pair of a glyc table.
struct GlycKnot {
    double ratio;
    double fraction;
};

/// Frozen knot tables. Ends are fixed at 0.30 (resting share) and 1.0 (pure
/// glycogen at VVO2max); interior values were calibrated against the race
/// reproductions and are mirrored in data/glyc_tables_v1.txt.
inline constexpr int kGlycTableVersion = 1;

inline const std::vector<GlycKnot>& default_glyc_knots(Vla vla) {
    static const std::vector<GlycKnot> good{
        {0.0, 0.30}, {0.3, 0.3025}, {0.6, 0.53}, {0.8, 0.6875}, {0.9, 0.82}, {1.0, 1.00}};
    static const std::vector<GlycKnot> average{
        {0.0, 0.30}, {0.3, 0.32}, {0.6, 0.59}, {0.8, 0.76}, {0.9, 0.85}, {1.0, 1.00}};
    static const std::vector<GlycKnot> bad{
        {0.0, 0.30}, {0.3, 0.39}, {0.6, 0.66}, {0.8, 0.83}, {0.9, 0.855}, {1.0, 1.00}};
    switch (vla) {
        case Vla::good: return good;
        case Vla::average: return average;
        case Vla::bad: return bad;
    }
    return good;
}

/// Natural cubic spline through a glyc knot table, clamped to [0, 1].
///
/// The spline is C2 on [0, 1]; beyond the last knot the curve is held at the
/// last knot value. Instances are immutable after construction.
class GlycCurve {
public:
    /// Cubic piece c0 + c1 t + c2 t^2 + c3 t^3 with t = r - x0 on [x0, x0 + width].
    struct Segment {
        double x0, width, c0, c1, c2, c3;
        [[nodiscard]] double value(double t) const { return c0 + t * (c1 + t * (c2 + t * c3)); }
        [[nodiscard]] double slope(double t) const { return c1 + t * (2.0 * c2 + t * 3.0 * c3); }
        [[nodiscard]] double curvature(double t) const { return 2.0 * c2 + 6.0 * c3 * t; }
    };

    explicit GlycCurve(std::vector<GlycKnot> knots) : knots_(std::move(knots)) {
        validate_knots(knots_);
        fit();
    }

    static GlycCurve for_vla(Vla vla) { return GlycCurve(default_glyc_knots(vla)); }

    [[nodiscard]] const std::vector<GlycKnot>& knots() const { return knots_; }
    [[nodiscard]] const std::vector<Segment>& segments() const { return segments_; }

    /// Glycogen share at velocity ratio r >= 0.
    [[nodiscard]] double value(double r) const {
        if (!(r >= 0.0)) throw DomainError("glyc: velocity ratio must be >= 0");
        return value_unchecked(r);
    }

    /// d(glyc)/dr; zero wherever the value is clamped or r >= 1.
    [[nodiscard]] double slope(double r) const {
        if (!(r >= 0.0)) throw DomainError("glyc: velocity ratio must be >= 0");
        return slope_unchecked(r);
    }

    /// Raw (unclamped) spline value, for interpolation checks.
    [[nodiscard]] double spline(double r) const {
        const auto& s = segments_[locate(r)];
        return s.value(r - s.x0);
    }

    [[nodiscard]] double value_unchecked(double r) const {
        if (r >= knots_.back().ratio) return std::clamp(knots_.back().fraction, 0.0, 1.0);
        return std::clamp(spline(r), 0.0, 1.0);
    }

    [[nodiscard]] double slope_unchecked(double r) const {
        if (r >= knots_.back().ratio) return 0.0;
        const auto& s = segments_[locate(r)];
        const double raw = s.value(r - s.x0);
        if (raw <= 0.0 || raw >= 1.0) return 0.0;
        return s.slope(r - s.x0);
    }

    /// d2(glyc)/dr2 with the same clamping rules as slope_unchecked.
    [[nodiscard]] double curvature_unchecked(double r) const {
        if (r >= knots_.back().ratio) return 0.0;
        const auto& s = segments_[locate(r)];
        const double raw = s.value(r - s.x0);
        if (raw <= 0.0 || raw >= 1.0) return 0.0;
        return s.curvature(r - s.x0);
    }

    static void validate_knots(const std::vector<GlycKnot>& k) {
        if (k.size() < 2) throw InvalidCurve("glyc: need at least two knots");
        if (k.front().ratio != 0.0) throw InvalidCurve("glyc: first knot must be at ratio 0");
        if (k.back().ratio != 1.0) throw InvalidCurve("glyc: last knot must be at ratio 1");
        for (std::size_t i = 0; i < k.size(); ++i) {
            if (!(k[i].fraction >= 0.0 && k[i].fraction <= 1.0))
                throw InvalidCurve("glyc: knot values must lie in [0, 1]");
            if (i > 0 && !(k[i].ratio > k[i - 1].ratio))
                throw InvalidCurve("glyc: knot ratios must be strictly increasing");
        }
    }

private:
    [[nodiscard]] std::size_t locate(double r) const {
        // last segment whose start is <= r
        auto it = std::upper_bound(segments_.begin(), segments_.end(), r,
                                   [](double x, const Segment& s) { return x < s.x0; });
        if (it == segments_.begin()) return 0;
        return static_cast<std::size_t>(std::distance(segments_.begin(), it)) - 1;
    }

    void fit() {
        const std::size_t n = knots_.size();
        std::vector<double> w(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) w[i] = knots_[i + 1].ratio - knots_[i].ratio;

        // second derivatives; natural ends m_0 = m_{n-1} = 0
        std::vector<double> m(n, 0.0);
        if (n > 2) {
            const std::size_t ni = n - 2;
            std::vector<double> diag(ni), upper(ni), rhs(ni);
            for (std::size_t j = 0; j < ni; ++j) {
                const std::size_t i = j + 1;
                diag[j] = 2.0 * (w[i - 1] + w[i]);
                upper[j] = w[i];
                rhs[j] = 6.0 * ((knots_[i + 1].fraction - knots_[i].fraction) / w[i] -
                                (knots_[i].fraction - knots_[i - 1].fraction) / w[i - 1]);
            }
            // Thomas algorithm; the sub-diagonal entry of row j is w[j]
            for (std::size_t j = 1; j < ni; ++j) {
                const double factor = w[j] / diag[j - 1];
                diag[j] -= factor * upper[j - 1];
                rhs[j] -= factor * rhs[j - 1];
            }
            for (std::size_t j = ni; j-- > 0;) {
                const double next = (j + 1 < ni) ? m[j + 2] : 0.0;
                m[j + 1] = (rhs[j] - upper[j] * next) / diag[j];
            }
        }

        segments_.clear();
        segments_.reserve(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double y0 = knots_[i].fraction;
            const double y1 = knots_[i + 1].fraction;
            const double hw = w[i];
            Segment s{};
            s.x0 = knots_[i].ratio;
            s.width = hw;
            s.c0 = y0;
            s.c1 = (y1 - y0) / hw - hw * (2.0 * m[i] + m[i + 1]) / 6.0;
            s.c2 = 0.5 * m[i];
            s.c3 = (m[i + 1] - m[i]) / (6.0 * hw);
            segments_.push_back(s);
        }
    }

    std::vector<GlycKnot> knots_;
    std::vector<Segment> segments_;
};

/// Set of named knot tables as stored in the versioned plain-text data file.
struct GlycTableFile {
    int version = kGlycTableVersion;
    std::map<std::string, std::vector<GlycKnot>> curves;
};

/// Reads a knot table file:
///
///     # comment
///     version 1
///     curve good
///     0.0 0.30
///     ...
///     end
inline GlycTableFile read_glyc_tables(std::istream& in) {
    GlycTableFile out;
    out.version = -1;
    std::string line;
    std::string current;
    std::vector<GlycKnot> knots;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw InputError("glyc table line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head)) continue;
        if (head == "version") {
            if (!(ls >> out.version)) fail("bad version");
        } else if (head == "curve") {
            if (!current.empty()) fail("nested curve block");
            if (!(ls >> current)) fail("missing curve name");
            knots.clear();
        } else if (head == "end") {
            if (current.empty()) fail("'end' without 'curve'");
            try {
                GlycCurve::validate_knots(knots);
            } catch (const InvalidCurve& e) {
                fail(e.what());
            }
            out.curves[current] = knots;
            current.clear();
        } else {
            if (current.empty()) fail("knot outside a curve block");
            GlycKnot k{};
            std::istringstream ks(line);
            if (!(ks >> k.ratio >> k.fraction)) fail("expected '<ratio> <fraction>'");
            knots.push_back(k);
        }
    }
    if (!current.empty()) fail("unterminated curve block '" + current + "'");
    if (out.version < 0) throw InputError("glyc table: missing version line");
    return out;
}

inline GlycTableFile read_glyc_tables(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open glyc table file '" + path + "'");
    return read_glyc_tables(in);
}

inline void write_glyc_tables(std::ostream& out, const GlycTableFile& tables) {
    out << "# glyc knot tables: velocity ratio V/VVO2max, glycogen share of work\n";
    out << "version " << tables.version << "\n";
    for (const auto& [name, knots] : tables.curves) {
        out << "curve " << name << "\n";
        for (const auto& k : knots) out << k.ratio << " " << k.fraction << "\n";
        out << "end\n";
    }
}

}  // namespace enduro
