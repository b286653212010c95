#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace enduro::detail {

/// Symmetric band matrix stored by lower diagonals; factored in place by Cholesky.
class BandedSpd {
public:
    BandedSpd(int n, int bandwidth) : n_(n), bw_(bandwidth), a_(static_cast<std::size_t>(n) * (bandwidth + 1), 0.0) {}

    [[nodiscard]] int size() const { return n_; }
    [[nodiscard]] int bandwidth() const { return bw_; }

    void clear() { std::fill(a_.begin(), a_.end(), 0.0); }

    /// Adds v to H(i, j) (and implicitly H(j, i)); |i - j| must not exceed the bandwidth.
    void add(int i, int j, double v) {
        if (i < j) std::swap(i, j);
        at(i, i - j) += v;
    }

    [[nodiscard]] double get(int i, int j) const {
        if (i < j) std::swap(i, j);
        if (i - j > bw_) return 0.0;
        return a_[idx(i, i - j)];
    }

    /// Clears row and column i and puts 1 on the diagonal.
    void decouple(int i) {
        for (int d = 0; d <= bw_; ++d) {
            if (i - d >= 0) at(i, d) = 0.0;
            if (i + d < n_) at(i + d, d) = 0.0;
        }
        at(i, 0) = 1.0;
    }

    /// In-place Cholesky; false if a pivot is not positive.
    bool factor() {
        for (int j = 0; j < n_; ++j) {
            double diag = at(j, 0);
            for (int k = std::max(0, j - bw_); k < j; ++k) {
                const double l = at(j, j - k);
                diag -= l * l;
            }
            if (!(diag > 0.0)) return false;
            const double ljj = std::sqrt(diag);
            at(j, 0) = ljj;
            const int last = std::min(n_ - 1, j + bw_);
            for (int i = j + 1; i <= last; ++i) {
                double v = at(i, i - j);
                for (int k = std::max(0, i - bw_); k < j; ++k) v -= at(i, i - k) * at(j, j - k);
                at(i, i - j) = v / ljj;
            }
        }
        return true;
    }

    /// Solves L L^T x = b in place after factor().
    void solve(std::span<double> b) const {
        for (int i = 0; i < n_; ++i) {
            double v = b[i];
            for (int k = std::max(0, i - bw_); k < i; ++k) v -= a_[idx(i, i - k)] * b[k];
            b[i] = v / a_[idx(i, 0)];
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double v = b[i];
            const int last = std::min(n_ - 1, i + bw_);
            for (int k = i + 1; k <= last; ++k) v -= a_[idx(k, k - i)] * b[k];
            b[i] = v / a_[idx(i, 0)];
        }
    }

private:
    [[nodiscard]] std::size_t idx(int i, int d) const {
        return static_cast<std::size_t>(i) * (bw_ + 1) + static_cast<std::size_t>(d);
    }
    double& at(int i, int d) { return a_[idx(i, d)]; }

    int n_;
    int bw_;
    std::vector<double> a_;
};

}  // namespace enduro::detail
