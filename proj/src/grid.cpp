#include "stabsde/grid.hpp"

#include "stabsde/csv.hpp"

#include <cmath>
#include <fstream>

namespace stabsde {

UniformGrid UniformGrid::centered(double center, double half_width, int n)
{
    require(n >= 3 && half_width > 0.0, "UniformGrid: need n >= 3 and a positive half-width");
    return UniformGrid{center - half_width, 2.0 * half_width / (n - 1), n};
}

Vec UniformGrid::points() const
{
    Vec p(n);
    for (int i = 0; i < n; ++i) p[i] = x(i);
    return p;
}

Vec UniformGrid::trapezoid_weights() const
{
    Vec w = Vec::Constant(n, step);
    w[0] = w[n - 1] = 0.5 * step;
    return w;
}

UniformGrid UniformGrid::coarsen(int factor) const
{
    require(factor >= 1 && (n - 1) % factor == 0, "UniformGrid::coarsen: factor must divide n - 1");
    return UniformGrid{lo, step * factor, (n - 1) / factor + 1};
}

double PowerTail::operator()(const UniformGrid& g, double x) const
{
    if (x > g.hi()) {
        double r = x - center;
        return c_plus * std::pow(r, -kappa) + (kappa2 > 0.0 ? d_plus * std::pow(r, -kappa2) : 0.0);
    }
    if (x < g.lo) {
        double r = center - x;
        return c_minus * std::pow(r, -kappa) + (kappa2 > 0.0 ? d_minus * std::pow(r, -kappa2) : 0.0);
    }
    return 0.0;
}

double PowerTail::mass(const UniformGrid& g) const
{
    double r = g.hi() - center, l = center - g.lo;
    double m = (c_plus * std::pow(r, 1.0 - kappa) + c_minus * std::pow(l, 1.0 - kappa)) / (kappa - 1.0);
    if (kappa2 > 0.0)
        m += (d_plus * std::pow(r, 1.0 - kappa2) + d_minus * std::pow(l, 1.0 - kappa2)) / (kappa2 - 1.0);
    return m;
}

TailFitter TailFitter::make(const UniformGrid& g, double kappa, double center, double fraction, double kappa2)
{
    require(g.lo < center && center < g.hi(), "TailFitter: tail centre must lie inside the grid");
    require(kappa > 1.0, "TailFitter: tail exponent must exceed 1");
    TailFitter f;
    f.kappa = kappa;
    f.kappa2 = kappa2;
    f.center = center;
    f.a_minus = f.a_plus = f.b_minus = f.b_plus = Vec::Zero(g.n);
    const int m = std::max(3, static_cast<int>(std::ceil(fraction * g.n)));
    const int nb = kappa2 > 0.0 ? 2 : 1;
    for (int side = 0; side < 2; ++side) {
        Mat A(m, nb);
        std::vector<int> idx(m);
        for (int k = 0; k < m; ++k) {
            idx[k] = side == 0 ? g.n - 1 - k : k;
            double r = std::abs(g.x(idx[k]) - center);
            A(k, 0) = std::pow(r, -kappa);
            if (nb == 2) A(k, 1) = std::pow(r, -kappa2);
        }
        // rows of the least-squares pseudo-inverse are the fit functionals
        Mat P = (A.transpose() * A).ldlt().solve(A.transpose());
        Vec& a = side == 0 ? f.a_plus : f.a_minus;
        Vec& b = side == 0 ? f.b_plus : f.b_minus;
        for (int k = 0; k < m; ++k) {
            a[idx[k]] = P(0, k);
            if (nb == 2) b[idx[k]] = P(1, k);
        }
    }
    return f;
}

PowerTail TailFitter::fit(const Vec& v) const
{
    PowerTail t;
    t.kappa = kappa;
    t.kappa2 = kappa2;
    t.center = center;
    t.c_plus = a_plus.dot(v);
    t.c_minus = a_minus.dot(v);
    if (kappa2 > 0.0) {
        t.d_plus = b_plus.dot(v);
        t.d_minus = b_minus.dot(v);
    }
    return t;
}

double DensityGrid::mass() const
{
    return grid.trapezoid_weights().dot(values) + tail.mass(grid);
}

SampledFunction DensityGrid::as_function() const
{
    // Catmull-Rom cubic through the nodes
    auto g = grid;
    Vec v = values;
    PowerTail tl = tail;
    auto node = [g, v, tl](int i) {
        if (i < 0 || i >= g.n) return tl(g, g.x(i));
        return v[i];
    };
    SampledFunction f;
    f.lo = g.lo;
    f.hi = g.hi();
    f.value = [g, node](double x) {
        double s = (x - g.lo) / g.step;
        int i = std::min(std::max(static_cast<int>(std::floor(s)), 0), g.n - 2);
        double t = s - i;
        double p0 = node(i - 1), p1 = node(i), p2 = node(i + 1), p3 = node(i + 2);
        return p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
    };
    f.tail.kind = TailLaw::Kind::Power;
    f.tail.c_minus = tail.c_minus;
    f.tail.c_plus = tail.c_plus;
    f.tail.d_minus = tail.d_minus;
    f.tail.d_plus = tail.d_plus;
    f.tail.kappa = tail.kappa;
    f.tail.kappa2 = tail.kappa2;
    f.tail.center = tail.center;
    return f;
}

double weighted_l1(const UniformGrid& g, const Vec& f, double x0, double p)
{
    Vec w = g.trapezoid_weights();
    double s = 0.0;
    for (int i = 0; i < g.n; ++i) s += w[i] * std::abs(f[i]) * std::pow(1.0 + std::abs(g.x(i) - x0), p);
    return s;
}

double l1(const UniformGrid& g, const Vec& f)
{
    return g.trapezoid_weights().dot(f.cwiseAbs());
}

void write_density_csv(const DensityGrid& d, const std::string& path)
{
    CsvWriter w(path, {"y", "density", "t", "x0", "alpha", "N", "tail_c_minus", "tail_c_plus", "tail_d_minus",
                       "tail_d_plus"});
    for (int i = 0; i < d.grid.n; ++i)
        w.row({fmt(d.grid.x(i)), fmt(d.values[i]), fmt(d.t), fmt(d.x0), fmt(d.alpha), std::to_string(d.N),
               fmt(d.tail.c_minus), fmt(d.tail.c_plus), fmt(d.tail.d_minus), fmt(d.tail.d_plus)});
}

DensityGrid read_density_csv(const std::string& path)
{
    CsvTable t = read_csv(path);
    require(t.header.size() == 10 && t.header[0] == "y" && t.header[1] == "density",
            "read_density_csv: unexpected header in " + path);
    require(t.rows.size() >= 3, "read_density_csv: too few rows in " + path);
    DensityGrid d;
    int n = static_cast<int>(t.rows.size());
    double y0 = std::stod(t.rows[0][0]), y1 = std::stod(t.rows[n - 1][0]);
    d.grid = UniformGrid{y0, (y1 - y0) / (n - 1), n};
    d.values.resize(n);
    for (int i = 0; i < n; ++i) d.values[i] = std::stod(t.rows[i][1]);
    const auto& r = t.rows[0];
    d.t = std::stod(r[2]);
    d.x0 = std::stod(r[3]);
    d.alpha = std::stod(r[4]);
    d.N = std::stoi(r[5]);
    d.tail.c_minus = std::stod(r[6]);
    d.tail.c_plus = std::stod(r[7]);
    d.tail.d_minus = std::stod(r[8]);
    d.tail.d_plus = std::stod(r[9]);
    d.tail.kappa = 1.0 + d.alpha;
    d.tail.kappa2 = 1.0 + 2.0 * d.alpha;
    d.tail.center = d.x0;
    return d;
}

} // namespace stabsde
