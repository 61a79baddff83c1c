#include "hsclab/ma_solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hsclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Calls f(q, idx) for every flat spectral index q with its multi-index.
template <typename F>
void for_each_mode(const ComplexGrid& grid, F&& f) {
    std::vector<int> idx(grid.real_dim(), 0);
    const auto& sizes = grid.sizes();
    for (std::size_t q = 0; q < grid.point_count(); ++q) {
        f(q, std::span<const int>(idx));
        for (int a = grid.real_dim() - 1; a >= 0; --a) {
            if (++idx[a] < sizes[a]) break;
            idx[a] = 0;
        }
    }
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Pointwise data of A = tω̂ − Ric(ω₀) + i∂∂̄φ.
struct Linearization {
    std::vector<double> det;
    std::vector<Matrix> cof;  // det(A)·A⁻¹, indexed (j, i) ↦ C^{j̄i}
};

// Divergence-form operator K δ = −Re Σ ∂_i(C^{j̄i} ∂_j̄ δ) + det(A) δ, which is
// −det(A) times the linearization of F, symmetric positive definite.
class NewtonOperator {
public:
    NewtonOperator(const ComplexGrid& grid, const Linearization& lin)
        : grid_(grid), lin_(lin), n_(grid.n()) {
        const std::size_t N = grid.point_count();
        sig_.assign(n_, std::vector<cplx>(N));
        sigb_.assign(n_, std::vector<cplx>(N));
        for_each_mode(grid, [&](std::size_t q, std::span<const int> idx) {
            for (int i = 0; i < n_; ++i) {
                sig_[i][q] = symbol_d_z(grid, i, idx);
                sigb_[i][q] = symbol_d_zbar(grid, i, idx);
            }
        });
        Matrix mean = Matrix::Zero(n_, n_);
        double dmean = 0.0;
        for (std::size_t p = 0; p < N; ++p) {
            mean += lin.cof[p];
            dmean += lin.det[p];
        }
        mean /= static_cast<double>(N);
        dmean /= static_cast<double>(N);
        precond_.resize(N);
        for (std::size_t q = 0; q < N; ++q) {
            cplx s = dmean;
            for (int i = 0; i < n_; ++i)
                for (int j = 0; j < n_; ++j) s -= mean(j, i) * sig_[i][q] * sigb_[j][q];
            precond_[q] = s.real();
        }
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        const std::size_t N = x.size();
        const std::vector<cplx> xc(x.begin(), x.end());
        const auto xh = fft_forward(grid_, xc);
        std::vector<std::vector<cplx>> dbar(n_);
        std::vector<cplx> tmp(N);
        for (int j = 0; j < n_; ++j) {
            for (std::size_t q = 0; q < N; ++q) tmp[q] = sigb_[j][q] * xh[q];
            dbar[j] = fft_inverse(grid_, tmp);
        }
        std::vector<cplx> acc(N, 0.0);
        std::vector<cplx> b(N);
        for (int i = 0; i < n_; ++i) {
            for (std::size_t p = 0; p < N; ++p) {
                cplx s = 0.0;
                for (int j = 0; j < n_; ++j) s += lin_.cof[p](j, i) * dbar[j][p];
                b[p] = s;
            }
            const auto bh = fft_forward(grid_, b);
            for (std::size_t q = 0; q < N; ++q) acc[q] += sig_[i][q] * bh[q];
        }
        const auto div = fft_inverse(grid_, acc);
        std::vector<double> out(N);
        for (std::size_t p = 0; p < N; ++p) out[p] = -div[p].real() + lin_.det[p] * x[p];
        return out;
    }

    std::vector<double> precondition(const std::vector<double>& r) const {
        const std::vector<cplx> rc(r.begin(), r.end());
        auto rh = fft_forward(grid_, rc);
        for (std::size_t q = 0; q < rh.size(); ++q) rh[q] /= precond_[q];
        const auto z = fft_inverse(grid_, rh);
        std::vector<double> out(r.size());
        for (std::size_t p = 0; p < r.size(); ++p) out[p] = z[p].real();
        return out;
    }

private:
    const ComplexGrid& grid_;
    const Linearization& lin_;
    int n_;
    std::vector<std::vector<cplx>> sig_, sigb_;
    std::vector<double> precond_;
};

std::vector<double> pcg(const NewtonOperator& op, const std::vector<double>& rhs, double rel_tol,
                        int max_iter, int& iterations) {
    const std::size_t N = rhs.size();
    std::vector<double> x(N, 0.0), r = rhs;
    std::vector<double> z = op.precondition(r);
    std::vector<double> p = z;
    double rz = dot(r, z);
    const double target = rel_tol * std::sqrt(dot(rhs, rhs));
    iterations = 0;
    for (int it = 0; it < max_iter; ++it) {
        if (std::sqrt(dot(r, r)) <= target) break;
        const auto Ap = op.apply(p);
        const double pAp = dot(p, Ap);
        if (!(pAp > 0.0)) break;
        const double alpha = rz / pAp;
        for (std::size_t k = 0; k < N; ++k) {
            x[k] += alpha * p[k];
            r[k] -= alpha * Ap[k];
        }
        z = op.precondition(r);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t k = 0; k < N; ++k) p[k] = z[k] + beta * p[k];
        iterations = it + 1;
    }
    return x;
}

struct Evaluation {
    HermitianField A;
    std::vector<double> F;
    double residual = kInf;
    double margin = -kInf;
};

Evaluation evaluate(const ContinuityProblem& pb, double t, const ScalarField& phi,
                    Linearization* lin) {
    HermitianField A = t * HermitianField(pb.omega_hat);
    A -= pb.ric0;
    A += ddbar(phi);
    const std::size_t N = phi.size();
    Evaluation ev{A, std::vector<double>(N, 0.0)};
    if (lin) {
        lin->det.resize(N);
        lin->cof.resize(N);
    }
    double margin = kInf;
    double residual = 0.0;
    for (std::size_t p = 0; p < N; ++p) {
        const Matrix m = A.at(p);
        Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues()(0);
        margin = std::min(margin, lo);
        if (!(lo > 0.0)) continue;
        double det = 1.0;
        for (int k = 0; k < m.rows(); ++k) det *= es.eigenvalues()(k);
        ev.F[p] = std::log(det) - pb.logdet0[p].real() - phi[p].real();
        residual = std::max(residual, std::abs(ev.F[p]));
        if (lin) {
            lin->det[p] = det;
            lin->cof[p] = det * m.inverse();
        }
    }
    ev.margin = margin;
    ev.residual = margin > 0.0 ? residual : kInf;
    return ev;
}

ContinuityState make_state(const ContinuityProblem& pb, double t, const ScalarField& phi,
                           const Evaluation& ev) {
    ScalarField Phi = phi;
    Phi += t * pb.potential.psi;
    return ContinuityState{t, phi, Phi, HermitianMetricField(ev.A), ev.residual, ev.margin, 0, 0,
                           false};
}

}  // namespace

PotentialPair recover_potential(const HermitianMetricField& omega_hat,
                                const HermitianMetricField& omega0,
                                const std::optional<ScalarField>& constructed_psi) {
    if (!(omega_hat.grid() == omega0.grid()) || omega_hat.n() != omega0.n())
        throw DomainError("metrics live on different grids");
    const auto& grid = omega0.grid();
    const int n = omega0.n();
    const HermitianField diff = omega_hat - omega0;
    const double scale = std::max(1.0, diff.max_norm());

    // Class match: every averaged coefficient of ω̂ − ω₀ vanishes.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double mean =
                std::abs(top_form_integral(diff.component(i, j), grid)) / grid.volume();
            if (mean > 1e-10 * scale)
                throw CohomologyError("omega_hat and omega0 have different averaged coefficients");
        }

    auto normalized = [](ScalarField psi) {
        psi = psi.real_part();
        psi += cplx(-psi.max_real());
        return psi;
    };
    auto check = [&](const ScalarField& psi) {
        return (ddbar(psi) - diff).max_norm() <= 1e-8 * scale;
    };

    if (constructed_psi) {
        if (!(constructed_psi->grid() == grid)) throw DomainError("potential on a different grid");
        auto psi = normalized(*constructed_psi);
        if (!check(psi))
            throw PreconditionError("supplied potential does not reproduce omega_hat - omega0");
        return {psi, "constructed"};
    }
    if (diff.max_norm() == 0.0) return {ScalarField(grid), "identity"};
    if (n >= 2)
        throw UnsupportedInputError("n >= 2 requires omega_hat constructed from a known potential");

    const SpectralField spec(diff.component(0, 0));
    std::vector<cplx> coeffs(spec.coefficients());
    for_each_mode(grid, [&](std::size_t q, std::span<const int> idx) {
        const cplx s = symbol_d_z(grid, 0, idx) * symbol_d_zbar(grid, 0, idx);
        coeffs[q] = std::abs(s) > 0.0 ? coeffs[q] / s : cplx(0.0);
    });
    auto psi = normalized(ScalarField(grid, fft_inverse(grid, coeffs)));
    if (!check(psi))
        throw UnsupportedInputError("difference is not resolvable as i ddbar psi on this grid");
    return {psi, "poisson-inversion"};
}

ContinuityProblem::ContinuityProblem(HermitianMetricField omega_hat_, HermitianMetricField omega0_,
                                     PotentialPair potential_)
    : omega_hat(std::move(omega_hat_)),
      omega0(std::move(omega0_)),
      potential(std::move(potential_)),
      ric0(ricci(omega0)),
      logdet0(omega0.grid()) {
    if (!(omega_hat.grid() == omega0.grid()) || !(potential.psi.grid() == omega0.grid()))
        throw DomainError("continuity data on different grids");
    const auto det = determinant(omega0);
    for (std::size_t p = 0; p < det.size(); ++p) logdet0[p] = std::log(det[p].real());
}

ContinuityState evaluate_state(const ContinuityProblem& problem, double t, const ScalarField& phi) {
    const auto ev = evaluate(problem, t, phi, nullptr);
    return make_state(problem, t, phi, ev);
}

ContinuityState solve_ma_at(const ContinuityProblem& pb, double t,
                            const std::optional<ScalarField>& phi_init,
                            const SolverOptions& opt) {
    if (!(t > 0.0)) throw DomainError("t must be positive");
    const auto& grid = pb.grid();
    const std::size_t N = grid.point_count();

    ScalarField phi(grid);
    if (phi_init) {
        if (!(phi_init->grid() == grid)) throw DomainError("initial potential on a different grid");
        phi = phi_init->real_part();
    } else {
        HermitianField A0 = t * HermitianField(pb.omega_hat);
        A0 -= pb.ric0;
        if (!(A0.min_eigenvalue() > 0.0))
            throw PreconditionError("t*omega_hat - Ric(omega0) is not positive; give an initial potential");
        const auto det = determinant(A0);
        for (std::size_t p = 0; p < N; ++p) phi[p] = std::log(det[p].real()) - pb.logdet0[p].real();
        // i∂∂̄ of that guess can leave the cone when Ric(ω₀) is large against t;
        // a constant keeps ω(t) = tω̂ − Ric(ω₀), which is positive.
        if (!(evaluate(pb, t, phi, nullptr).margin > 0.0))
            phi = ScalarField::constant(grid, top_form_integral(phi, grid) / grid.volume());
    }

    Linearization lin;
    Evaluation ev = evaluate(pb, t, phi, &lin);
    int steps = 0;
    int cg_total = 0;
    auto finish = [&](bool accepted) {
        auto st = make_state(pb, t, phi, ev);
        st.newton_steps = steps;
        st.cg_iterations = cg_total;
        st.accepted = accepted;
        return st;
    };
    auto fail = [&](const std::string& why) {
        std::ostringstream msg;
        msg << "Monge-Ampere solve at t = " << t << " did not converge (" << why
            << ", residual " << ev.residual << ", positivity margin " << ev.margin << ")";
        throw MaNonConvergenceError(msg.str(), finish(false));
    };
    if (!(ev.margin > 0.0)) fail("initial potential leaves the Kahler cone");

    while (ev.residual > opt.target_residual) {
        if (steps >= opt.max_newton) {
            if (ev.residual <= opt.accept_residual) break;
            fail("Newton step limit reached");
        }
        std::vector<double> rhs(N);
        for (std::size_t p = 0; p < N; ++p) rhs[p] = lin.det[p] * ev.F[p];
        const NewtonOperator op(grid, lin);
        int cg_it = 0;
        const auto delta = pcg(op, rhs, opt.cg_tolerance, opt.cg_max_iterations, cg_it);
        cg_total += cg_it;
        ++steps;

        bool improved = false;
        for (double alpha = 1.0; alpha >= 1.0 / 1024.0; alpha *= 0.5) {
            ScalarField trial = phi;
            for (std::size_t p = 0; p < N; ++p) trial[p] += alpha * delta[p];
            Linearization lin_t;
            auto ev_t = evaluate(pb, t, trial, &lin_t);
            if (ev_t.margin > 0.0 && ev_t.residual < ev.residual) {
                phi = std::move(trial);
                ev = std::move(ev_t);
                lin = std::move(lin_t);
                improved = true;
                break;
            }
        }
        if (!improved) {
            // Rounding floor reached below the acceptance level counts as converged.
            if (ev.residual <= opt.accept_residual) break;
            fail("no damped step decreases the residual");
        }
    }
    return finish(true);
}

double einstein_residual(const ContinuityProblem& problem, const ContinuityState& state) {
    HermitianField e = ricci(state.omega_t);
    e += state.omega_t;
    e -= state.t * HermitianField(problem.omega_hat);
    return e.max_norm();
}

double shifted_residual(const ContinuityProblem& problem, const ContinuityState& state) {
    HermitianField A = state.t * HermitianField(problem.omega0);
    A -= problem.ric0;
    A += ddbar(state.Phi);
    const auto det = determinant(A);
    double r = 0.0;
    for (std::size_t p = 0; p < det.size(); ++p) {
        const double rhs = state.Phi[p].real() - state.t * problem.potential.psi[p].real() +
                           problem.logdet0[p].real();
        const double d = det[p].real();
        r = std::max(r, d > 0.0 ? std::abs(std::log(d) - rhs) : kInf);
    }
    return r;
}

double state_volume(const ContinuityState& state) {
    return top_form_integral(determinant(state.omega_t), state.omega_t.grid());
}

PathResult solve_path(const ContinuityProblem& problem, const std::vector<double>& schedule,
                      std::optional<double> threshold, const SolverOptions& options) {
    if (schedule.empty()) throw DomainError("empty schedule");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i] > 0.0)) throw DomainError("schedule values must be positive");
        if (i > 0 && !(schedule[i] < schedule[i - 1]))
            throw DomainError("schedule must be strictly decreasing");
    }
    PathResult out;
    const int n = problem.n();
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const double t = schedule[i];
        if (threshold && t <= *threshold) {
            out.stop = PathStop::below_threshold;
            out.stop_t = t;
            std::ostringstream msg;
            msg << "t = " << t << " is at or below n*mu = " << *threshold
                << "; the path is only defined above it";
            out.diagnostic = msg.str();
            if (i == 0) throw PreconditionError(out.diagnostic);
            return out;
        }
        try {
            std::optional<ScalarField> init;
            if (i > 0) {
                ScalarField warm = out.states.back().phi;
                warm += cplx(n * std::log(t / schedule[i - 1]));
                init = std::move(warm);
            }
            out.states.push_back(solve_ma_at(problem, t, init, options));
        } catch (const MaNonConvergenceError& e) {
            if (i == 0)
                throw PreconditionError(std::string("first schedule node failed: ") + e.what());
            out.stop = PathStop::nonconvergence;
            out.stop_t = t;
            out.diagnostic = e.what();
            return out;
        }
    }
    return out;
}

std::vector<double> geometric_schedule(double t_max, double t_min, int nodes) {
    if (!(t_max > t_min) || !(t_min > 0.0) || nodes < 2)
        throw DomainError("need t_max > t_min > 0 and at least two nodes");
    std::vector<double> out(nodes);
    const double ratio = std::log(t_min / t_max) / (nodes - 1);
    for (int k = 0; k < nodes; ++k) out[k] = t_max * std::exp(ratio * k);
    out.back() = t_min;
    return out;
}

std::vector<double> default_schedule(double t_max, int n, double mu, int geometric_nodes,
                                     int linear_nodes) {
    if (!(mu > 0.0)) throw DomainError("default schedule needs mu > 0");
    const double knee = 2.0 * n * mu;
    const double end = 1.05 * n * mu;
    if (!(t_max > knee)) throw DomainError("t_max must exceed 2 n mu");
    auto out = geometric_schedule(t_max, knee, std::max(2, geometric_nodes));
    for (int k = 1; k <= linear_nodes; ++k)
        out.push_back(knee + (end - knee) * k / static_cast<double>(linear_nodes));
    return out;
}

const char* to_string(PathStop stop) {
    switch (stop) {
        case PathStop::completed: return "completed";
        case PathStop::below_threshold: return "below_threshold";
        case PathStop::nonconvergence: return "nonconvergence";
    }
    return "unknown";
}

}  // namespace hsclab
