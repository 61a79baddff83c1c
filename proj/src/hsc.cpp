#include "hsclab/hsc.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

#include "hsclab/parallel.hpp"

namespace hsclab {

namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                           41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

double radical_inverse(std::size_t i, int base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

std::size_t pow4(int n) { return static_cast<std::size_t>(n) * n * n * n; }

// Quartic form in coordinates orthonormal for g, symmetrized so that the
// value is exactly real and the gradient is 4(T − f u).
class QuarticForm {
public:
    explicit QuarticForm(const PointCurvature& pc) : n_(pc.n()), s_(pow4(pc.n())) {
        const int n = n_;
        const Eigen::LLT<Matrix> llt(pc.g);
        if (llt.info() != Eigen::Success) throw SingularMetricError("metric not positive at point", 0);
        // G = L Lᴴ, |W|² = |Lᵀ W|², so W = L⁻ᵀ u.
        const Matrix L = llt.matrixL();
        to_w_ = L.transpose().inverse();
        const Matrix& M = to_w_;

        std::vector<cplx> a(pc.tensor), b(s_);
        auto idx = [n](int i, int j, int k, int l) { return ((i * n + j) * n + k) * n + l; };
        // Contract one slot at a time.
        for (int slot = 0; slot < 4; ++slot) {
            std::fill(b.begin(), b.end(), cplx{});
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        for (int l = 0; l < n; ++l) {
                            const cplx v = a[idx(i, j, k, l)];
                            int r[4] = {i, j, k, l};
                            const int old = r[slot];
                            for (int c = 0; c < n; ++c) {
                                r[slot] = c;
                                const cplx m = (slot % 2 == 0) ? M(old, c) : std::conj(M(old, c));
                                b[idx(r[0], r[1], r[2], r[3])] += v * m;
                            }
                        }
            std::swap(a, b);
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        const cplx sym = 0.25 * (a[idx(i, j, k, l)] + a[idx(k, j, i, l)] +
                                                 a[idx(i, l, k, j)] + a[idx(k, l, i, j)]);
                        const cplx sym_c = 0.25 * (a[idx(j, i, l, k)] + a[idx(l, i, j, k)] +
                                                   a[idx(j, k, l, i)] + a[idx(l, k, j, i)]);
                        s_[idx(i, j, k, l)] = 0.5 * (sym + std::conj(sym_c));
                    }
        for (auto v : s_) scale_ = std::max(scale_, std::abs(v));
    }

    int n() const { return n_; }
    double scale() const { return scale_; }
    const Matrix& to_w() const { return to_w_; }

    double value(const Vector& u) const {
        cplx f = 0.0;
        const int n = n_;
        std::size_t q = 0;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const cplx ab = u(a) * std::conj(u(b));
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d, ++q) f += s_[q] * ab * u(c) * std::conj(u(d));
            }
        return f.real();
    }

    // Returns f and writes T_m = Σ S_{amcd} u_a u_c ū_d.
    double value_and_t(const Vector& u, Vector& t) const {
        const int n = n_;
        t = Vector::Zero(n);
        std::size_t q = 0;
        for (int a = 0; a < n; ++a)
            for (int m = 0; m < n; ++m)
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d, ++q) t(m) += s_[q] * u(a) * u(c) * std::conj(u(d));
        return u.dot(t).real();  // Σ ū_m T_m
    }

private:
    int n_;
    std::vector<cplx> s_;
    Matrix to_w_;
    double scale_ = 0.0;
};

struct Refined {
    Vector u;
    double f;
    int iterations;
    bool converged;
};

Refined ascend(const QuarticForm& form, Vector u, const HscOptions& opt) {
    const double scale = form.scale();
    const double gtol = opt.gradient_tolerance * scale;
    // Below this, value differences are rounding noise and steps are judged
    // by the gradient instead.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    Vector t;
    double f = form.value_and_t(u, t);
    Vector grad = 4.0 * (t - f * u);
    double step = 0.1 / scale;
    Vector prev_u, prev_grad;
    double last_gain_f = f;
    int flat_steps = 0;
    for (int it = 0; it < opt.max_iterations; ++it) {
        const double gnorm = grad.norm();
        if (gnorm <= gtol) return {u, f, it, true};
        if (flat_steps >= 20 && gnorm <= 1e-6 * scale) return {u, f, it, true};
        if (it > 0) {
            const Vector du = u - prev_u;
            const Vector dg = grad - prev_grad;
            const double curv = std::abs(du.dot(dg).real());
            if (curv > 0.0) step = std::clamp(du.squaredNorm() / curv, 1e-6 / scale, 1e3 / scale);
        }
        bool accepted = false;
        for (int bt = 0; bt < 60 && !accepted; ++bt, step *= 0.5) {
            Vector cand = u + step * grad;
            cand.normalize();
            if ((cand - u).norm() == 0.0) break;
            Vector t_c;
            const double f_c = form.value_and_t(cand, t_c);
            const Vector grad_c = 4.0 * (t_c - f_c * cand);
            const bool ascent = f_c >= f + 1e-4 * step * gnorm * gnorm;
            const bool polish = f_c >= f - noise && grad_c.norm() < gnorm;
            if (ascent || polish) {
                prev_u = u;
                prev_grad = grad;
                u = cand;
                f = f_c;
                grad = grad_c;
                accepted = true;
            }
        }
        if (!accepted) return {u, f, it, gnorm <= 1e-6 * scale};
        if (f > last_gain_f + noise) {
            last_gain_f = f;
            flat_steps = 0;
        } else {
            ++flat_steps;
        }
    }
    return {u, f, opt.max_iterations, grad.norm() <= gtol};
}

void check_point_curvature(const PointCurvature& pc) {
    if (pc.g.rows() != pc.g.cols() || pc.g.rows() < 1) throw DomainError("metric must be square");
    if (pc.tensor.size() != pow4(pc.n())) throw DomainError("tensor size must be n^4");
}

}  // namespace

PointCurvature point_curvature(const CurvatureField& R, const HermitianMetricField& g,
                               std::size_t x) {
    if (x >= g.point_count() || R.n() != g.n()) throw DomainError("point index out of range");
    const auto span = R.at(x);
    return {g.at(x), std::vector<cplx>(span.begin(), span.end())};
}

double hsc_direction(const PointCurvature& pc, const TangentVector& w) {
    check_point_curvature(pc);
    const int n = pc.n();
    if (w.n() != n) throw DomainError("direction has wrong dimension");
    const double norm2 = norm_squared(pc.g, w);
    if (!(norm2 > 0.0)) throw DomainError("zero direction");
    const Vector& W = w.components;
    cplx num = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    num += pc(i, j, k, l) * W(i) * std::conj(W(j)) * W(k) * std::conj(W(l));
    return num.real() / (norm2 * norm2);
}

double hsc_direction(const CurvatureField& R, const HermitianMetricField& g, std::size_t x,
                     const TangentVector& w) {
    return hsc_direction(point_curvature(R, g, x), w);
}

std::vector<Vector> sphere_directions(int n, std::size_t count, std::size_t skip) {
    if (2 * n > static_cast<int>(std::size(kPrimes))) throw DomainError("dimension too large");
    std::vector<Vector> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t i = s + skip;
        Vector v(n);
        for (int k = 0; k < n; ++k) {
            const double u1 = radical_inverse(i, kPrimes[2 * k]);
            const double u2 = radical_inverse(i, kPrimes[2 * k + 1]);
            const double r = std::sqrt(-2.0 * std::log(std::max(u1, 1e-300)));
            const double th = 2.0 * std::numbers::pi * u2;
            v(k) = cplx(r * std::cos(th), r * std::sin(th));
        }
        const double nv = v.norm();
        if (nv == 0.0) continue;
        out.push_back(v / nv);
    }
    return out;
}

HscPointResult hsc_point_sup(const PointCurvature& pc, const HscOptions& options) {
    check_point_curvature(pc);
    const int n = pc.n();
    HscPointResult res;
    if (n == 1) {
        const double g = pc.g(0, 0).real();
        res.argmax_direction = TangentVector(Vector::Constant(1, 1.0 / std::sqrt(g)));
        res.value = hsc_direction(pc, res.argmax_direction);
        return res;
    }
    const QuarticForm form(pc);
    auto to_direction = [&](const Vector& u) { return TangentVector(form.to_w() * u); };
    if (form.scale() == 0.0) {
        res.argmax_direction = to_direction(Vector::Unit(n, 0));
        return res;
    }

    const auto seeds =
        sphere_directions(n, static_cast<std::size_t>(options.seeds_per_n2) * n * n);
    std::vector<double> values(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) values[s] = form.value(seeds[s]);
    std::vector<std::size_t> order(seeds.size());
    std::iota(order.begin(), order.end(), 0);
    const auto top = std::min<std::size_t>(static_cast<std::size_t>(options.refine_seeds), order.size());
    std::partial_sort(order.begin(), order.begin() + top, order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return values[a] > values[b] || (values[a] == values[b] && a < b);
                      });
    const double coarse_best = values[order[0]];

    Refined best{seeds[order[0]], coarse_best, 0, true};
    for (std::size_t r = 0; r < top; ++r) {
        const auto refined = ascend(form, seeds[order[r]], options);
        if (refined.f > best.f || r == 0) best = refined;
    }
    res.argmax_direction = to_direction(best.u);
    res.value = hsc_direction(pc, res.argmax_direction);
    res.certificate = std::max(0.0, res.value - coarse_best);
    res.iterations = best.iterations;
    if (!best.converged)
        throw HscNonConvergenceError("hsc optimizer did not converge", res);
    return res;
}

HscPointResult hsc_point_sup(const CurvatureField& R, const HermitianMetricField& g,
                             std::size_t x, const HscOptions& options) {
    return hsc_point_sup(point_curvature(R, g, x), options);
}

double hsc_sup_bruteforce_oracle(const PointCurvature& pc, std::size_t samples) {
    check_point_curvature(pc);
    if (samples < 1000) throw DomainError("oracle needs at least 1000 samples");
    const int n = pc.n();
    if (n == 1) return hsc_direction(pc, TangentVector{cplx(1.0)});

    // Plain coordinate directions, unnormalized: H is scale invariant.
    std::vector<Vector> dirs;
    if (n == 2) {
        // Fibonacci lattice on the sphere of lines in ℂ².
        const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
        for (std::size_t k = 0; k < samples; ++k) {
            const double z = 1.0 - (2.0 * k + 1.0) / static_cast<double>(samples);
            const double theta = std::acos(z);
            const double phi = 2.0 * std::numbers::pi * std::fmod(k / golden, 1.0);
            Vector v(2);
            v(0) = std::cos(theta / 2);
            v(1) = std::polar(std::sin(theta / 2), phi);
            dirs.push_back(v);
        }
    } else {
        dirs = sphere_directions(n, samples, 104729);
    }

    std::vector<double> values(dirs.size());
    for (std::size_t k = 0; k < dirs.size(); ++k) values[k] = hsc_direction(pc, TangentVector(dirs[k]));
    std::vector<std::size_t> order(dirs.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t polish = std::min<std::size_t>(4, order.size());
    std::partial_sort(order.begin(), order.begin() + polish, order.end(),
                      [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

    double best = values[order[0]];
    // Compass search over the 2n real coordinates of W.
    for (std::size_t r = 0; r < polish; ++r) {
        Vector w = dirs[order[r]];
        double fw = values[order[r]];
        for (double h = 0.05; h > 1e-10;) {
            bool improved = false;
            for (int axis = 0; axis < 2 * n && !improved; ++axis)
                for (double sign : {1.0, -1.0}) {
                    Vector c = w;
                    c(axis / 2) += (axis % 2 == 0) ? cplx(sign * h, 0) : cplx(0, sign * h);
                    c.normalize();
                    const double fc = hsc_direction(pc, TangentVector(c));
                    if (fc > fw) {
                        w = c;
                        fw = fc;
                        improved = true;
                        break;
                    }
                }
            if (!improved) h *= 0.5;
        }
        best = std::max(best, fw);
    }
    return best;
}

double hsc_sup_bruteforce_oracle(const CurvatureField& R, const HermitianMetricField& g,
                                 std::size_t x, std::size_t samples) {
    return hsc_sup_bruteforce_oracle(point_curvature(R, g, x), samples);
}

double kappa_of(double h_sup, int n) {
    if (h_sup > 0.0) return h_sup;
    return (n + 1.0) / (2.0 * n) * h_sup;
}

KappaField kappa_field(const HermitianMetricField& omega, const HscOptions& options) {
    return kappa_field(curvature_tensor(omega), omega, options);
}

KappaField kappa_field(const CurvatureField& R, const HermitianMetricField& omega,
                       const HscOptions& options) {
    const auto& grid = omega.grid();
    const int n = omega.n();
    KappaField out{ScalarField(grid), ScalarField(grid), ScalarField(grid)};
    std::atomic<std::size_t> nonconverged{0};
    parallel_for(grid.point_count(), [&](std::size_t p) {
        HscPointResult r;
        try {
            r = hsc_point_sup(R, omega, p, options);
        } catch (const HscNonConvergenceError& e) {
            r = e.best();
            ++nonconverged;
        }
        out.h_sup[p] = r.value;
        out.kappa[p] = kappa_of(r.value, n);
        out.certificate[p] = r.certificate;
    });
    out.nonconverged = nonconverged;
    out.mu = out.h_sup[0].real();
    for (std::size_t p = 1; p < grid.point_count(); ++p)
        if (out.h_sup[p].real() > out.mu) {
            out.mu = out.h_sup[p].real();
            out.mu_point = p;
        }
    out.mu_nonpositive = out.mu <= 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            out.spectral_tail = std::max(out.spectral_tail, spectral_tail(omega.component(i, j)));
    return out;
}

}  // namespace hsclab
