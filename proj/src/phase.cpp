#include "sparsemep/phase.hpp"

#include "sparsemep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace sparsemep {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Directional derivative of Xi(Q, x*(Q)) along dQ, with x* from the regularized normal equations.
class XiDerivative {
public:
    XiDerivative(const Problem& problem, const MatrixXd& Q) : p_(problem), Q_(Q) {
        M_ = Q.transpose() * problem.gram() * Q;
        M_.diagonal() += (Q.array() * (1.0 - Q.array())).matrix().transpose() * problem.column_norms_sq();
        const XUpdate xu = solve_x(problem, Q);
        if (xu.ridged) M_.diagonal().array() += AnnealConfig{}.ridge_eps;
        ldlt_.compute(M_);
        x_ = xu.x;
        Atr_ = problem.Aty() - problem.gram() * (Q * x_);
    }

    MatrixXd along(const MatrixXd& dQ) const {
        const MatrixXd& G = p_.gram();
        const VectorXd& lam = p_.column_norms_sq();
        const MatrixXd one_minus_2q = 1.0 - 2.0 * Q_.array();
        VectorXd dMx = dQ.transpose() * (G * (Q_ * x_)) + Q_.transpose() * (G * (dQ * x_));
        dMx.array() += ((dQ.array() * one_minus_2q.array()).matrix().transpose() * lam).array() * x_.array();
        const VectorXd dx = ldlt_.solve(dQ.transpose() * p_.Aty() - dMx);
        MatrixXd out = -(G * (dQ * x_)) * x_.transpose() - (G * (Q_ * dx)) * x_.transpose() + Atr_ * dx.transpose();
        out.array() -= (lam * (x_.array() * dx.array()).matrix().transpose()).array() * one_minus_2q.array();
        out.array() += (lam * x_.array().square().matrix().transpose()).array() * dQ.array();
        return out;
    }

private:
    const Problem& p_;
    MatrixXd Q_;
    MatrixXd M_;
    Eigen::LDLT<MatrixXd> ldlt_;
    VectorXd x_;
    VectorXd Atr_;
};

// C' M for every column of M, stacked column-major into a vector.
VectorXd reduce(const MatrixXd& C, const MatrixXd& M) {
    const MatrixXd R = C.transpose() * M;
    return Eigen::Map<const VectorXd>(R.data(), R.size());
}

MatrixXd block(const MatrixXd& H, long m, long a, long b) { return H.block(a * m, b * m, m, m); }

}  // namespace

std::vector<int> distinct_column_labels(const MatrixXd& Q, double col_tol) {
    const long k = Q.cols();
    std::vector<int> parent(static_cast<std::size_t>(k));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)];
        return a;
    };
    const double scale = Q.size() ? Q.cwiseAbs().maxCoeff() : 0.0;
    const double tol = col_tol * std::max(scale, std::numeric_limits<double>::min());
    for (long i = 0; i < k; ++i) {
        for (long j = i + 1; j < k; ++j) {
            if ((Q.col(i) - Q.col(j)).cwiseAbs().maxCoeff() <= tol) {
                parent[static_cast<std::size_t>(find(static_cast<int>(j)))] = find(static_cast<int>(i));
            }
        }
    }
    std::vector<int> labels(static_cast<std::size_t>(k));
    std::map<int, int> relabel;
    for (long i = 0; i < k; ++i) {
        const int root = find(static_cast<int>(i));
        auto it = relabel.find(root);
        if (it == relabel.end()) it = relabel.emplace(root, static_cast<int>(relabel.size())).first;
        labels[static_cast<std::size_t>(i)] = it->second;
    }
    return labels;
}

int count_distinct_columns(const MatrixXd& Q, double col_tol) {
    const auto labels = distinct_column_labels(Q, col_tol);
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

MatrixXd perturbation_basis(long d) {
    if (d < 2) throw DomainError("perturbation_basis: d must be at least 2");
    MatrixXd C = MatrixXd::Constant(d, d - 1, -1.0 / static_cast<double>(d));
    C.topRows(d - 1).diagonal().array() += 1.0;
    return C;
}

double eliminated_objective(const Problem& problem, const MatrixXd& Q, double T) {
    RelaxedState s;
    s.Q = Q;
    s.x = update_x(problem, Q);
    s.mu = VectorXd::Zero(Q.cols());
    s.T = T;
    s.rho = T;
    return -0.5 * T * free_energy(problem, s);
}

HessianSplit hessian_split(const Problem& problem, const MatrixXd& Q) {
    const long d = Q.rows();
    const long k = Q.cols();
    if (d != problem.d() || k != problem.k()) throw ShapeError("hessian_split: Q must be d x k");
    const double edge = Q.array().min(1.0 - Q.array()).minCoeff();
    if (!(edge > 0.0)) throw DomainError("hessian_split: Q entries must lie strictly inside (0, 1)");

    const MatrixXd C = perturbation_basis(d);
    const long m = d - 1;
    HessianSplit out;
    out.H0 = MatrixXd::Zero(k * m, k * m);
    for (long j = 0; j < k; ++j) {
        const VectorXd curv = (Q.col(j).array() * (1.0 - Q.col(j).array())).inverse();
        out.H0.block(j * m, j * m, m, m) = C.transpose() * curv.asDiagonal() * C;
    }

    out.H1.resize(k * m, k * m);
    const XiDerivative dxi(problem, Q);
    for (long j = 0; j < k; ++j) {
        for (long i = 0; i < m; ++i) {
            MatrixXd dQ = MatrixXd::Zero(d, k);
            dQ.col(j) = C.col(i);
            out.H1.col(j * m + i) = reduce(C, dxi.along(dQ));
        }
    }
    out.H1 = 0.5 * (out.H1 + out.H1.transpose()).eval();
    return out;
}

MatrixXd reduced_hessian(const Problem& problem, const MatrixXd& Q, double T) {
    return hessian_split(problem, Q).at(T);
}

Instability leading_instability(const Problem& problem, const MatrixXd& Q) {
    const HessianSplit split = hessian_split(problem, Q);
    const long d = Q.rows();
    const long k = Q.cols();
    const long m = d - 1;
    // H0 is block diagonal; factor each block.
    MatrixXd Linv = MatrixXd::Zero(k * m, k * m);
    for (long j = 0; j < k; ++j) {
        Eigen::LLT<MatrixXd> llt(split.H0.block(j * m, j * m, m, m));
        if (llt.info() != Eigen::Success) throw DomainError("leading_instability: entropy curvature not positive definite");
        Linv.block(j * m, j * m, m, m) = llt.matrixL().solve(MatrixXd::Identity(m, m));
    }
    const MatrixXd W = Linv * split.H1 * Linv.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (W + W.transpose()));
    const long top = k * m - 1;
    Instability out;
    out.t_cr = std::max(0.0, 2.0 * eig.eigenvalues()(top));
    const VectorXd phi = Linv.transpose() * eig.eigenvectors().col(top);
    const MatrixXd C = perturbation_basis(d);
    out.direction.resize(d, k);
    for (long j = 0; j < k; ++j) out.direction.col(j) = C * phi.segment(j * m, m);
    return out;
}

std::optional<MatrixXd> unstable_direction(const Problem& problem, const MatrixXd& Q, double T,
                                           double col_tol) {
    Instability lead = leading_instability(problem, Q);
    if (!(lead.t_cr > T)) return std::nullopt;

    const HessianSplit split = hessian_split(problem, Q);
    const long k = Q.cols();
    const long m = Q.rows() - 1;
    const auto labels = distinct_column_labels(Q, col_tol);
    double best = 0.0;
    long first = -1;
    VectorXd mode;
    for (long j = 0; j < k; ++j) {
        long partner = -1;
        for (long o = j + 1; o < k; ++o) {
            if (labels[static_cast<std::size_t>(o)] == labels[static_cast<std::size_t>(j)]) {
                partner = o;
                break;
            }
        }
        bool leader = partner >= 0;
        for (long o = 0; o < j && leader; ++o) leader = labels[static_cast<std::size_t>(o)] != labels[static_cast<std::size_t>(j)];
        if (!leader) continue;
        const MatrixXd cross = block(split.H1, m, j, partner);
        const MatrixXd H1 = block(split.H1, m, j, j) - 0.5 * (cross + cross.transpose());
        Eigen::LLT<MatrixXd> llt(block(split.H0, m, j, j));
        if (llt.info() != Eigen::Success) continue;
        const MatrixXd Linv = llt.matrixL().solve(MatrixXd::Identity(m, m));
        const MatrixXd W = Linv * H1 * Linv.transpose();
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (W + W.transpose()));
        const double tj = 2.0 * eig.eigenvalues()(m - 1);
        if (tj > best) {
            best = tj;
            first = j;
            mode = Linv.transpose() * eig.eigenvectors().col(m - 1);
        }
    }
    if (first < 0 || best < lead.t_cr * (1.0 - 1e-8)) return lead.direction;

    const int label = labels[static_cast<std::size_t>(first)];
    long members = 0;
    for (int l : labels) members += l == label;
    const VectorXd step = perturbation_basis(Q.rows()) * mode;
    MatrixXd dir = MatrixXd::Zero(Q.rows(), k);
    for (long j = 0; j < k; ++j) {
        if (labels[static_cast<std::size_t>(j)] != label) continue;
        dir.col(j) = j == first ? step : (-1.0 / static_cast<double>(members - 1)) * step;
    }
    return dir;
}

double min_eigenvalue(const MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

std::optional<double> block_critical_temperature(const MatrixXd& H0, const MatrixXd& H1) {
    Eigen::LLT<MatrixXd> llt(H0);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const long m = H0.rows();
    const MatrixXd Linv = llt.matrixL().solve(MatrixXd::Identity(m, m));
    const MatrixXd W = Linv * H1 * Linv.transpose();
    const double top = Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .maxCoeff();
    return std::max(0.0, 2.0 * top);
}

namespace {

CriticalTemperature critical_from_split(const HessianSplit& split, const MatrixXd& Q, CriticalAggregate aggregate,
                                        double col_tol) {
    const long k = Q.cols();
    const long m = Q.rows() - 1;
    const auto labels = distinct_column_labels(Q, col_tol);
    CriticalTemperature out;
    out.per_column.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
    out.flagged.assign(static_cast<std::size_t>(k), false);
    out.partner.assign(static_cast<std::size_t>(k), -1);

    double best = 0.0;
    for (long j = 0; j < k; ++j) {
        for (long o = 0; o < k; ++o) {
            if (o != j && labels[static_cast<std::size_t>(o)] == labels[static_cast<std::size_t>(j)]) {
                out.partner[static_cast<std::size_t>(j)] = static_cast<int>(o);
                break;
            }
        }
        const MatrixXd H0 = block(split.H0, m, j, j);
        MatrixXd H1 = block(split.H1, m, j, j);
        const int p = out.partner[static_cast<std::size_t>(j)];
        if (p >= 0) {
            const MatrixXd cross = block(split.H1, m, j, p);
            H1 -= 0.5 * (cross + cross.transpose());
        }
        const std::optional<double> t = block_critical_temperature(H0, H1);
        if (!t) {
            out.flagged[static_cast<std::size_t>(j)] = true;
            continue;
        }
        const double tj = *t;
        out.per_column[static_cast<std::size_t>(j)] = tj;
        best = std::max(best, tj);
    }
    out.t_cr = aggregate == CriticalAggregate::TwiceMax ? 2.0 * best : best;
    return out;
}

}  // namespace

CriticalTemperature critical_temperature(const Problem& problem, const MatrixXd& Q, CriticalAggregate aggregate,
                                         double col_tol) {
    return critical_from_split(hessian_split(problem, Q), Q, aggregate, col_tol);
}

FractionalChangeStats fractional_change_stats(const AnnealTrace& trace) {
    FractionalChangeStats out;
    const auto& recs = trace.records;
    std::vector<double> pooled;
    std::size_t start = 0;
    while (start < recs.size()) {
        std::size_t end = start;
        while (end + 1 < recs.size() && recs[end + 1].k_d == recs[start].k_d) ++end;
        SegmentStats seg;
        seg.first_record = static_cast<int>(start);
        seg.last_record = static_cast<int>(end);
        seg.k_d = recs[start].k_d;
        seg.interior = start > 0 && end + 1 < recs.size();
        VectorXd mean = VectorXd::Zero(recs[start].x.size());
        for (std::size_t i = start; i <= end; ++i) mean += recs[i].x;
        mean /= static_cast<double>(end - start + 1);
        const double norm = mean.norm();
        for (std::size_t i = start; i <= end; ++i) {
            const double c = norm > 0.0 ? (recs[i].x - mean).norm() / norm : 0.0;
            seg.changes.push_back(c);
            if (seg.interior) pooled.push_back(c);
        }
        seg.median = median_of(seg.changes);
        seg.max = *std::max_element(seg.changes.begin(), seg.changes.end());
        out.segments.push_back(std::move(seg));
        start = end + 1;
    }
    for (int n : trace.transitions) {
        if (n < 1 || static_cast<std::size_t>(n) >= recs.size()) continue;
        const VectorXd& prev = recs[static_cast<std::size_t>(n) - 1].x;
        const double norm = prev.norm();
        out.jumps.push_back(norm > 0.0 ? (recs[static_cast<std::size_t>(n)].x - prev).norm() / norm : 0.0);
    }
    out.pooled_median = median_of(std::move(pooled));
    return out;
}

PersistenceEstimate persistence_estimate(const AnnealTrace& trace, int k) {
    PersistenceEstimate out;
    const auto& recs = trace.records;
    if (recs.empty()) {
        out.k_hat = k;
        out.low_confidence = true;
        return out;
    }
    // Start of the terminal plateau.
    std::size_t tail = recs.size() - 1;
    while (tail > 0 && recs[tail - 1].k_d == recs.back().k_d) --tail;

    std::map<int, double> dwell;
    for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        const int kd = recs[i].k_d;
        if (kd == 1) continue;
        if (kd == k && i >= tail) continue;
        dwell[kd] += std::log(recs[i].T / recs[i + 1].T);
    }

    double top = -1.0;
    double runner = -1.0;
    for (const auto& [kd, span] : dwell) {
        out.dwell.emplace_back(kd, span);
        if (span > top) {
            runner = top;
            top = span;
            out.k_hat = kd;
        } else if (span > runner) {
            runner = span;
        }
    }
    if (dwell.empty() || top <= 0.0) {
        out.k_hat = recs.back().k_d;
        out.low_confidence = true;
    } else if (runner >= 0.8 * top) {
        out.low_confidence = true;
    }
    return out;
}

TransitionReport analyze_transitions(const Problem& problem, const AnnealTrace& trace,
                                     const TransitionOptions& options) {
    TransitionReport report;
    report.fractional = fractional_change_stats(trace);
    report.persistence = persistence_estimate(trace, problem.k());
    const double step = std::abs(std::log(options.beta));
    std::size_t jump_index = 0;
    for (int n : trace.transitions) {
        if (n < 1 || static_cast<std::size_t>(n) >= trace.records.size()) continue;
        const TraceRecord& before = trace.records[static_cast<std::size_t>(n) - 1];
        const TraceRecord& after = trace.records[static_cast<std::size_t>(n)];
        TransitionInfo info;
        info.record = n;
        info.t_before = before.T;
        info.t_observed = after.T;
        info.kd_before = before.k_d;
        info.kd_after = after.k_d;
        info.jump = report.fractional.jumps[jump_index++];
        if (options.analytic) {
            if (before.Q.size() == 0) {
                throw ConfigError("analyze_transitions: trace has no Q snapshots; rerun with snapshots or disable analytic");
            }
            const HessianSplit split = hessian_split(problem, before.Q);
            const CriticalTemperature ct = critical_from_split(split, before.Q, options.aggregate, options.col_tol);
            info.t_cr = ct.t_cr;
            info.within_one_step = ct.t_cr > 0.0 && std::abs(std::log(info.t_observed / ct.t_cr)) <= step + 1e-12;
            info.min_eig_above = min_eigenvalue(split.at(info.t_before));
            info.min_eig_below = min_eigenvalue(split.at(info.t_observed));
            info.sign_flip = info.min_eig_above > 0.0 && info.min_eig_below < 0.0;
        }
        report.transitions.push_back(info);
    }
    return report;
}

}  // namespace sparsemep
