#pragma once

// Shared numerical routines: scaled erfc, quadrature, 1-d and small-dense
// optimization, and the tail functions used by the statistical tests.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace votedyn {

// exp(x^2) erfc(x). Below 8 the direct product is accurate; above it the
// asymptotic series converges past double precision.
inline double erfcx(double x) {
    if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
    if (x <= 8.0) return std::exp(x * x) * std::erfc(x);
    const double inv2x2 = 1.0 / (2.0 * x * x);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        term *= -(2.0 * k - 1.0) * inv2x2;
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum / (x * std::sqrt(M_PI));
}

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double lognormal_cdf(double x, double mu, double sigma) {
    if (x <= 0.0) return 0.0;
    return norm_cdf((std::log(x) - mu) / sigma);
}

inline double lognormal_logpdf(double x, double mu, double sigma) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    double z = (std::log(x) - mu) / sigma;
    return -0.5 * z * z - std::log(x * sigma) - 0.5 * std::log(2.0 * M_PI);
}

// 7-point Gauss-Legendre panel, exact through degree 13
template <class F>
double gauss7(F&& f, double a, double b) {
    static const double xg[7] = {
        0.0,
        -0.4058451513773972, 0.4058451513773972,
        -0.7415311855993945, 0.7415311855993945,
        -0.9491079123427585, 0.9491079123427585};
    static const double wg[7] = {
        0.4179591836734694,
        0.3818300505051189, 0.3818300505051189,
        0.2797053914892767, 0.2797053914892767,
        0.1294849661688697, 0.1294849661688697};
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 7; ++i) s += wg[i] * f(c + h * xg[i]);
    return s * h;
}

namespace detail {
template <class F>
double simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

// adaptive Simpson; tolerance is applied as rel_tol*|result| + abs_tol
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10,
                 double abs_tol = 0.0) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double tol = std::max(std::abs(whole) * rel_tol, abs_tol);
    if (tol == 0.0) tol = 1e-300;
    return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

struct BrentResult {
    double x = 0.0, fx = 0.0;
    int iters = 0;
    bool converged = false;
};

template <class F>
BrentResult brent_minimize(F&& f, double a, double b, double tol = 1e-10,
                           int max_iter = 200) {
    const double gold = 0.3819660112501051;
    double x = a + gold * (b - a), w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    BrentResult res;
    for (int it = 0; it < max_iter; ++it) {
        double m = 0.5 * (a + b);
        double tol1 = tol * std::abs(x) + 1e-15;
        double tol2 = 2.0 * tol1;
        if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) {
            res = {x, fx, it, true};
            return res;
        }
        double u;
        bool parabolic = false;
        if (std::abs(e) > tol1) {
            double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            double etmp = e;
            e = d;
            if (std::abs(p) < std::abs(0.5 * q * etmp) && p > q * (a - x) &&
                p < q * (b - x)) {
                d = p / q;
                u = x + d;
                if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol1 : -tol1;
                parabolic = true;
            }
        }
        if (!parabolic) {
            e = (x < m) ? b - x : a - x;
            d = gold * e;
        }
        u = (std::abs(d) >= tol1) ? x + d : x + (d > 0 ? tol1 : -tol1);
        double fu = f(u);
        if (fu <= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
        res.iters = it + 1;
    }
    res.x = x;
    res.fx = fx;
    return res;
}

template <class F>
double bisect_root(F&& f, double a, double b, double tol = 1e-12,
                   int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0))
        throw std::invalid_argument("bisect_root: no sign change");
    for (int i = 0; i < max_iter && b - a > tol; ++i) {
        double m = 0.5 * (a + b);
        double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm > 0.0) == (fa > 0.0)) { a = m; fa = fm; }
        else b = m;
    }
    return 0.5 * (a + b);
}

struct BfgsOptions {
    int max_iter = 200;
    double grad_tol = 1e-8;
    double step_tol = 1e-13;
};

struct BfgsResult {
    std::vector<double> x;
    double fx = 0.0;
    std::vector<double> grad;
    int iters = 0;
    bool converged = false;
    std::vector<double> trace;  // accepted objective values, non-increasing
};

// dense BFGS with Armijo backtracking; meant for a handful of parameters
template <class F>
BfgsResult bfgs_minimize(F&& f, std::vector<double> x0, BfgsOptions opt = {}) {
    const std::size_t n = x0.size();
    std::vector<double> g(n), gn(n), p(n), s(n), y(n), xn(n);
    std::vector<std::vector<double>> H(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) H[i][i] = 1.0;
    BfgsResult res;
    res.x = x0;
    res.fx = f(res.x, &g);
    res.grad = g;
    res.trace.push_back(res.fx);
    for (int it = 0; it < opt.max_iter; ++it) {
        res.iters = it;
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        if (gmax <= opt.grad_tol * (1.0 + std::abs(res.fx))) {
            res.converged = true;
            return res;
        }
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = 0.0;
            for (std::size_t j = 0; j < n; ++j) p[i] -= H[i][j] * g[j];
        }
        double gTp = 0.0;
        for (std::size_t i = 0; i < n; ++i) gTp += g[i] * p[i];
        if (gTp >= 0.0) {  // reset to steepest descent
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) H[i][j] = (i == j);
                p[i] = -g[i];
            }
            gTp = -0.0;
            for (std::size_t i = 0; i < n; ++i) gTp += g[i] * p[i];
        }
        double alpha = 1.0;
        double fn = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) xn[i] = res.x[i] + alpha * p[i];
            fn = f(xn, &gn);
            if (std::isfinite(fn) && fn <= res.fx + 1e-4 * alpha * gTp) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            res.converged = true;  // no descent possible at machine precision
            return res;
        }
        double snorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xn[i] - res.x[i];
            y[i] = gn[i] - g[i];
            snorm = std::max(snorm, std::abs(s[i]));
        }
        res.x = xn;
        res.fx = fn;
        g = gn;
        res.grad = g;
        res.trace.push_back(fn);
        if (snorm < opt.step_tol) {
            res.converged = true;
            return res;
        }
        double sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) sy += s[i] * y[i];
        if (sy > 1e-12) {
            // H <- (I - s y^T/sy) H (I - y s^T/sy) + s s^T/sy
            std::vector<double> Hy(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) Hy[i] += H[i][j] * y[j];
            double yHy = 0.0;
            for (std::size_t i = 0; i < n; ++i) yHy += y[i] * Hy[i];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    H[i][j] += (sy + yHy) * s[i] * s[j] / (sy * sy) -
                               (Hy[i] * s[j] + s[i] * Hy[j]) / sy;
        }
    }
    return res;
}

namespace detail {
inline double gser(double a, double x) {  // lower regularized, series
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}
inline double gcf(double a, double x) {  // upper regularized, Lentz
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}
}  // namespace detail

// regularized upper incomplete gamma Q(a, x)
inline double gammq(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gammq domain");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gser(a, x);
    return detail::gcf(a, x);
}

inline double chi2_sf(double x, int dof) { return gammq(0.5 * dof, 0.5 * x); }

// limiting Kolmogorov distribution tail Q(lambda)
inline double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {  // theta-transformed series near zero
        double t = M_PI * M_PI / (8.0 * lambda * lambda);
        double s = 0.0;
        for (int k = 1; k < 40; k += 2) {
            double term = std::exp(-double(k) * double(k) * t);
            s += term;
            if (term < 1e-18 * s) break;
        }
        return 1.0 - std::sqrt(2.0 * M_PI) / lambda * s;
    }
    double s = 0.0;
    for (int k = 1; k < 200; ++k) {
        double term = std::exp(-2.0 * double(k) * double(k) * lambda * lambda);
        if (k % 2) s += term; else s -= term;
        if (term < 1e-18) break;
    }
    return 2.0 * s;
}

// one-sample KS p-value with the finite-n argument correction
inline double ks_pvalue(double d, std::size_t n) {
    double rn = std::sqrt(double(n));
    return kolmogorov_q(d * (rn + 0.12 + 0.11 / rn));
}

}  // namespace votedyn
