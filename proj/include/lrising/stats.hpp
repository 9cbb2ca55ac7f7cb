#pragma once

// Estimator bookkeeping: streaming batch-means accumulators with geometric
// rebinning, integrated-autocorrelation estimates, weighted least squares,
// and the Kendall-tau trend test used for boundedness verdicts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lrising {

struct Estimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    double tau_int = 0.5;   // in units of measurements
    long n_samples = 0;

    double half_width(double nsigma) const { return nsigma * stderr_; }
};

// Streaming scalar series reduced to at most kMaxBins equal-length bins;
// when full, adjacent bins merge and the bin length doubles.  Mean uses all
// samples; variance and tau use complete bins only.
class Accumulator {
  public:
    static constexpr int kMaxBins = 2048;

    void add(double x) {
        sum_ += x;
        sumsq_ += x * x;
        ++n_;
        cur_sum_ += x;
        if (++cur_n_ == bin_len_) {
            bins_.push_back(cur_sum_ / static_cast<double>(bin_len_));
            cur_sum_ = 0.0;
            cur_n_ = 0;
            if (static_cast<int>(bins_.size()) == kMaxBins) rebin();
        }
    }

    long count() const { return n_; }
    double mean() const { return n_ ? sum_ / static_cast<double>(n_) : 0.0; }

    // Batch-means estimate over >= min_batches batches (bins merged down to
    // ~4*min_batches for variance stability).  tau_int is the blocking-ratio
    // estimate bin_len * var(batch means) / (2 * naive variance).
    Estimate estimate(int min_batches = 16) const {
        Estimate e;
        e.n_samples = n_;
        e.mean = mean();
        int B = static_cast<int>(bins_.size());
        if (B < min_batches || n_ < 2) return e;  // stderr 0: too short to resolve
        int target = std::max(min_batches, 64);
        std::vector<double> b = bins_;
        long blen = bin_len_;
        while (static_cast<int>(b.size()) >= 2 * target) {
            merge_pairs(b);
            blen *= 2;
        }
        B = static_cast<int>(b.size());
        double bm = 0;
        for (double v : b) bm += v;
        bm /= B;
        double var_b = 0;
        for (double v : b) var_b += (v - bm) * (v - bm);
        var_b /= (B - 1);
        e.stderr_ = std::sqrt(var_b / B);
        double var_naive = (sumsq_ - sum_ * sum_ / n_) / std::max<long>(n_ - 1, 1);
        if (var_naive > 0) e.tau_int = std::max(0.5, blen * var_b / (2.0 * var_naive));
        return e;
    }

  private:
    void rebin() {
        merge_pairs(bins_);
        bin_len_ *= 2;
    }
    static void merge_pairs(std::vector<double>& b) {
        size_t h = b.size() / 2;
        for (size_t i = 0; i < h; ++i) b[i] = 0.5 * (b[2 * i] + b[2 * i + 1]);
        b.resize(h);
    }

    std::vector<double> bins_;
    double cur_sum_ = 0.0;
    long cur_n_ = 0;
    long bin_len_ = 1;
    long n_ = 0;
    double sum_ = 0.0, sumsq_ = 0.0;
};

// Ratio-of-means estimate E[num]/E[den] with shared bin boundaries, for
// conditional observables such as "disconnected given the chain is in the
// closed sector".  The error bar is a jackknife over batches.
class RatioAccumulator {
  public:
    static constexpr int kMaxBins = 2048;

    void add(double num, double den) {
        ++n_;
        cur_num_ += num;
        cur_den_ += den;
        if (++cur_n_ == bin_len_) {
            num_bins_.push_back(cur_num_);
            den_bins_.push_back(cur_den_);
            cur_num_ = cur_den_ = 0.0;
            cur_n_ = 0;
            if (static_cast<int>(num_bins_.size()) == kMaxBins) {
                merge_pairs(num_bins_);
                merge_pairs(den_bins_);
                bin_len_ *= 2;
            }
        }
    }

    long count() const { return n_; }

    Estimate estimate(int min_batches = 16) const {
        Estimate e;
        e.n_samples = n_;
        std::vector<double> nb = num_bins_, db = den_bins_;
        double Ntot = cur_num_, Dtot = cur_den_;
        for (double v : nb) Ntot += v;
        for (double v : db) Dtot += v;
        if (Dtot <= 0) return e;
        e.mean = Ntot / Dtot;
        int B = static_cast<int>(nb.size());
        if (B < min_batches) return e;
        int target = std::max(min_batches, 64);
        while (static_cast<int>(nb.size()) >= 2 * target) {
            merge_pairs(nb);
            merge_pairs(db);
        }
        B = static_cast<int>(nb.size());
        double Ns = 0, Ds = 0;
        for (int i = 0; i < B; ++i) {
            Ns += nb[i];
            Ds += db[i];
        }
        if (Ds <= 0) return e;
        std::vector<double> jack(B);
        for (int i = 0; i < B; ++i) {
            double dd = Ds - db[i];
            jack[i] = dd > 0 ? (Ns - nb[i]) / dd : Ns / Ds;
        }
        double jm = 0;
        for (double v : jack) jm += v;
        jm /= B;
        double var = 0;
        for (double v : jack) var += (v - jm) * (v - jm);
        e.stderr_ = std::sqrt(var * (B - 1) / static_cast<double>(B));
        return e;
    }

  private:
    static void merge_pairs(std::vector<double>& b) {
        size_t h = b.size() / 2;
        for (size_t i = 0; i < h; ++i) b[i] = b[2 * i] + b[2 * i + 1];
        b.resize(h);
    }

    std::vector<double> num_bins_, den_bins_;
    double cur_num_ = 0.0, cur_den_ = 0.0;
    long cur_n_ = 0;
    long bin_len_ = 1;
    long n_ = 0;
};

struct LineFit {
    double slope = 0.0, intercept = 0.0;
    double slope_stderr = 0.0, intercept_stderr = 0.0;
    int n = 0;
};

// Weighted least squares y ~ intercept + slope * x with weights w = 1/sigma^2.
inline LineFit wls_line(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& w) {
    if (x.size() != y.size() || x.size() != w.size() || x.size() < 2)
        throw std::invalid_argument("wls_line: need >= 2 points with matching sizes");
    double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        S += w[i];
        Sx += w[i] * x[i];
        Sy += w[i] * y[i];
        Sxx += w[i] * x[i] * x[i];
        Sxy += w[i] * x[i] * y[i];
    }
    double D = S * Sxx - Sx * Sx;
    if (D <= 0) throw std::invalid_argument("wls_line: degenerate design");
    LineFit f;
    f.n = static_cast<int>(x.size());
    f.slope = (S * Sxy - Sx * Sy) / D;
    f.intercept = (Sxx * Sy - Sx * Sxy) / D;
    f.slope_stderr = std::sqrt(S / D);
    f.intercept_stderr = std::sqrt(Sxx / D);
    return f;
}

struct KendallResult {
    double tau = 0.0;
    double z = 0.0;        // normal approximation
    int n = 0;
    bool downward_at(double alpha_one_sided) const {
        // one-sided test for a decreasing trend
        double zcrit = (alpha_one_sided == 0.05) ? 1.6448536269514722 : inv_norm(alpha_one_sided);
        return z < -zcrit;
    }
    bool upward_at(double alpha_one_sided) const {
        double zcrit = (alpha_one_sided == 0.05) ? 1.6448536269514722 : inv_norm(alpha_one_sided);
        return z > zcrit;
    }
    static double inv_norm(double a) {
        // crude bisection on erfc is enough for test thresholds
        double lo = 0, hi = 10;
        for (int i = 0; i < 200; ++i) {
            double mid = 0.5 * (lo + hi);
            if (0.5 * std::erfc(mid / std::sqrt(2.0)) > a) lo = mid; else hi = mid;
        }
        return 0.5 * (lo + hi);
    }
};

// Kendall tau over (x, y) pairs with the normal approximation for the trend
// statistic; x is assumed strictly increasing (ranks), ties in y are counted
// as zero contributions.
inline KendallResult kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 3) throw std::invalid_argument("kendall_tau: need >= 3 points");
    int n = static_cast<int>(x.size());
    long s = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double dx = x[j] - x[i], dy = y[j] - y[i];
            double prod = dx * dy;
            if (prod > 0) ++s;
            else if (prod < 0) --s;
        }
    KendallResult r;
    r.n = n;
    r.tau = 2.0 * static_cast<double>(s) / (static_cast<double>(n) * (n - 1));
    double var = static_cast<double>(n) * (n - 1) * (2.0 * n + 5.0) / 18.0;
    r.z = static_cast<double>(s) / std::sqrt(var);
    return r;
}

}  // namespace lrising
