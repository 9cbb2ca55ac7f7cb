#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace lrising {

// Lattice dimensions supported by the toolkit.
inline constexpr int kMaxDim = 4;

// Integer lattice vector with runtime dimension d <= kMaxDim.
struct LatticeVec {
    std::array<int, kMaxDim> c{};
    int d = 0;

    LatticeVec() = default;
    explicit LatticeVec(int dim) : d(dim) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("LatticeVec: bad dimension");
    }
    LatticeVec(std::initializer_list<int> xs) {
        if (xs.size() < 1 || xs.size() > kMaxDim) throw std::invalid_argument("LatticeVec: bad dimension");
        d = static_cast<int>(xs.size());
        int i = 0;
        for (int v : xs) c[i++] = v;
    }

    int operator[](int i) const { return c[i]; }
    int& operator[](int i) { return c[i]; }

    bool operator==(const LatticeVec& o) const {
        if (d != o.d) return false;
        for (int i = 0; i < d; ++i)
            if (c[i] != o.c[i]) return false;
        return true;
    }
    bool operator!=(const LatticeVec& o) const { return !(*this == o); }

    bool is_zero() const {
        for (int i = 0; i < d; ++i)
            if (c[i] != 0) return false;
        return true;
    }

    LatticeVec operator+(const LatticeVec& o) const {
        LatticeVec r(d);
        for (int i = 0; i < d; ++i) r.c[i] = c[i] + o.c[i];
        return r;
    }
    LatticeVec operator-(const LatticeVec& o) const {
        LatticeVec r(d);
        for (int i = 0; i < d; ++i) r.c[i] = c[i] - o.c[i];
        return r;
    }
    LatticeVec operator-() const {
        LatticeVec r(d);
        for (int i = 0; i < d; ++i) r.c[i] = -c[i];
        return r;
    }

    std::string str() const {
        std::string s = "(";
        for (int i = 0; i < d; ++i) s += (i ? "," : "") + std::to_string(c[i]);
        return s + ")";
    }
};

// Real vector with runtime dimension, companion to LatticeVec.
struct RealVec {
    std::array<double, kMaxDim> c{};
    int d = 0;

    RealVec() = default;
    explicit RealVec(int dim) : d(dim) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("RealVec: bad dimension");
    }
    RealVec(std::initializer_list<double> xs) {
        if (xs.size() < 1 || xs.size() > kMaxDim) throw std::invalid_argument("RealVec: bad dimension");
        d = static_cast<int>(xs.size());
        int i = 0;
        for (double v : xs) c[i++] = v;
    }
    static RealVec ones(int dim) {
        RealVec r(dim);
        for (int i = 0; i < dim; ++i) r.c[i] = 1.0;
        return r;
    }
    static RealVec from(const LatticeVec& x) {
        RealVec r(x.d);
        for (int i = 0; i < x.d; ++i) r.c[i] = x.c[i];
        return r;
    }

    double operator[](int i) const { return c[i]; }
    double& operator[](int i) { return c[i]; }

    RealVec operator*(double a) const {
        RealVec r(d);
        for (int i = 0; i < d; ++i) r.c[i] = a * c[i];
        return r;
    }
    RealVec operator+(const RealVec& o) const {
        RealVec r(d);
        for (int i = 0; i < d; ++i) r.c[i] = c[i] + o.c[i];
        return r;
    }
    RealVec operator-(const RealVec& o) const {
        RealVec r(d);
        for (int i = 0; i < d; ++i) r.c[i] = c[i] - o.c[i];
        return r;
    }

    double euclid() const {
        double s = 0;
        for (int i = 0; i < d; ++i) s += c[i] * c[i];
        return std::sqrt(s);
    }
};

inline double dot(const RealVec& t, const LatticeVec& x) {
    double s = 0;
    for (int i = 0; i < t.d; ++i) s += t.c[i] * x.c[i];
    return s;
}

inline double dot(const RealVec& a, const RealVec& b) {
    double s = 0;
    for (int i = 0; i < a.d; ++i) s += a.c[i] * b.c[i];
    return s;
}

// Kahan compensated accumulator, used wherever long sums feed 1e-10 tolerances.
struct KahanSum {
    double s = 0.0, comp = 0.0;
    void add(double x) {
        double y = x - comp;
        double t = s + y;
        comp = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

}  // namespace lrising
