#include "sparsemep/constraints.hpp"

#include "sparsemep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace sparsemep {

namespace {

constexpr double kBinaryTol = 1e-9;
constexpr double kEnumerationCap = 2e5;

void check_features(const std::vector<int>& features, long d, const char* who) {
    if (features.size() < 2) {
        throw ConstraintError(std::string(who) + ": needs at least two distinct features");
    }
    std::set<int> seen;
    for (int f : features) {
        if (f < 0 || f >= d) {
            std::ostringstream os;
            os << who << ": feature index " << f + 1 << " outside [1, " << d << "]";
            throw ConstraintError(os.str());
        }
        if (!seen.insert(f).second) {
            std::ostringstream os;
            os << who << ": duplicate feature index " << f + 1;
            throw ConstraintError(os.str());
        }
    }
}

// Row-selection mass sum_t q_it for every feature i.
VectorXd row_mass(const MatrixXd& Q) { return Q.rowwise().sum(); }

// Constraint row values computed from per-feature selection mass.
void append_values(const LinearConstraint& c, const VectorXd& mass, std::vector<double>& out) {
    switch (c.kind) {
        case ConstraintKind::AtMostOne: {
            double s = 0.0;
            for (int f : c.features) s += mass(f);
            out.push_back(s - 1.0);
            break;
        }
        case ConstraintKind::AtLeastOne: {
            double s = 0.0;
            for (int f : c.features) s += mass(f);
            out.push_back(1.0 - s);
            break;
        }
        case ConstraintKind::GroupTie:
            for (std::size_t m = 1; m < c.features.size(); ++m) {
                out.push_back(mass(c.features[0]) - mass(c.features[m]));
            }
            break;
    }
}

// Adds scale * d(row r of c)/dQ into grad. Every row depends on Q only through row mass,
// so the derivative is constant along each affected row of Q.
void add_row_gradient(const LinearConstraint& c, std::size_t r, double scale, MatrixXd& grad) {
    switch (c.kind) {
        case ConstraintKind::AtMostOne:
            for (int f : c.features) grad.row(f).array() += scale;
            break;
        case ConstraintKind::AtLeastOne:
            for (int f : c.features) grad.row(f).array() -= scale;
            break;
        case ConstraintKind::GroupTie:
            grad.row(c.features[0]).array() += scale;
            grad.row(c.features[r + 1]).array() -= scale;
            break;
    }
}

bool counts_satisfy(const ConstraintSet& set, const std::vector<int>& counts) {
    VectorXd mass(static_cast<long>(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i) mass(static_cast<long>(i)) = counts[i];
    std::vector<double> values;
    for (const auto& c : set.constraints) append_values(c, mass, values);
    const auto eq = equality_rows(set);
    for (std::size_t r = 0; r < values.size(); ++r) {
        if (eq[r] ? std::abs(values[r]) > kBinaryTol : values[r] > kBinaryTol) return false;
    }
    return true;
}

double binomial(long n, long r) {
    if (r < 0 || r > n) return 0.0;
    double out = 1.0;
    for (long i = 1; i <= r; ++i) out = out * static_cast<double>(n - r + i) / static_cast<double>(i);
    return out;
}

// Size of the largest family of pairwise disjoint sets.
int max_disjoint(const std::vector<std::vector<int>>& sets) {
    int best = 0;
    std::vector<int> chosen;
    std::function<void(std::size_t, std::set<int>&)> go = [&](std::size_t i, std::set<int>& used) {
        best = std::max(best, static_cast<int>(chosen.size()));
        if (chosen.size() + (sets.size() - i) <= static_cast<std::size_t>(best)) return;
        for (std::size_t j = i; j < sets.size(); ++j) {
            bool disjoint = std::none_of(sets[j].begin(), sets[j].end(),
                                         [&](int f) { return used.count(f) > 0; });
            if (!disjoint) continue;
            for (int f : sets[j]) used.insert(f);
            chosen.push_back(static_cast<int>(j));
            go(j + 1, used);
            chosen.pop_back();
            for (int f : sets[j]) used.erase(f);
        }
    };
    std::set<int> used;
    go(0, used);
    return best;
}

}  // namespace

std::string to_string(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::AtMostOne: return "at_most_one";
        case ConstraintKind::AtLeastOne: return "at_least_one";
        case ConstraintKind::GroupTie: return "group";
    }
    return "unknown";
}

ConstraintKind constraint_kind_from_string(const std::string& s) {
    if (s == "at_most_one") return ConstraintKind::AtMostOne;
    if (s == "at_least_one") return ConstraintKind::AtLeastOne;
    if (s == "group") return ConstraintKind::GroupTie;
    throw ConstraintError("unknown constraint kind '" + s + "'");
}

std::vector<LinearRow> LinearConstraint::expand(int k) const {
    std::vector<LinearRow> rows;
    auto mass_terms = [&](int feature, double coef, std::vector<Term>& terms) {
        for (int t = 0; t < k; ++t) terms.push_back({coef, feature, t});
    };
    switch (kind) {
        case ConstraintKind::AtMostOne:
        case ConstraintKind::AtLeastOne: {
            LinearRow row;
            for (int f : features) mass_terms(f, 1.0, row.terms);
            row.relation = kind == ConstraintKind::AtMostOne ? Relation::LessEqual : Relation::GreaterEqual;
            row.bound = 1.0;
            rows.push_back(std::move(row));
            break;
        }
        case ConstraintKind::GroupTie:
            for (std::size_t m = 1; m < features.size(); ++m) {
                LinearRow row;
                mass_terms(features[0], 1.0, row.terms);
                mass_terms(features[m], -1.0, row.terms);
                row.relation = Relation::Equal;
                row.bound = 0.0;
                rows.push_back(std::move(row));
            }
            break;
    }
    return rows;
}

int LinearConstraint::row_count() const {
    return kind == ConstraintKind::GroupTie ? static_cast<int>(features.size()) - 1 : 1;
}

LinearConstraint at_most_one(std::vector<int> features, long d) {
    check_features(features, d, "at_most_one");
    return {ConstraintKind::AtMostOne, std::move(features)};
}

LinearConstraint at_least_one(std::vector<int> features, long d) {
    check_features(features, d, "at_least_one");
    return {ConstraintKind::AtLeastOne, std::move(features)};
}

LinearConstraint group_tie(std::vector<int> features, long d) {
    check_features(features, d, "group");
    return {ConstraintKind::GroupTie, std::move(features)};
}

int ConstraintSet::row_count() const {
    int n = 0;
    for (const auto& c : constraints) n += c.row_count();
    return n;
}

VectorXd constraint_values(const ConstraintSet& set, const MatrixXd& Q) {
    const VectorXd mass = row_mass(Q);
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(set.row_count()));
    for (const auto& c : set.constraints) append_values(c, mass, values);
    return Eigen::Map<const VectorXd>(values.data(), static_cast<long>(values.size()));
}

std::vector<bool> equality_rows(const ConstraintSet& set) {
    std::vector<bool> eq;
    for (const auto& c : set.constraints) {
        for (int r = 0; r < c.row_count(); ++r) eq.push_back(c.kind == ConstraintKind::GroupTie);
    }
    return eq;
}

PenaltyResult penalty_and_gradient(const ConstraintSet& set, const MatrixXd& Q,
                                   const VectorXd& multipliers, double rho) {
    if (multipliers.size() != set.row_count()) {
        throw ShapeError("penalty_and_gradient: one multiplier per constraint row required");
    }
    PenaltyResult out;
    out.gradient = MatrixXd::Zero(Q.rows(), Q.cols());
    const VectorXd values = constraint_values(set, Q);
    long r = 0;
    for (const auto& c : set.constraints) {
        for (int local = 0; local < c.row_count(); ++local, ++r) {
            const double v = values(r);
            const double mu = multipliers(r);
            double slope = mu;
            out.value += mu * v;
            if (c.kind == ConstraintKind::GroupTie) {
                out.value += 0.5 * rho * v * v;
                slope += rho * v;
            } else if (v > 0.0) {
                out.value += 0.5 * rho * v * v;
                slope += rho * v;
            }
            if (slope != 0.0) add_row_gradient(c, static_cast<std::size_t>(local), slope, out.gradient);
        }
    }
    return out;
}

VectorXd update_constraint_multipliers(const ConstraintSet& set, const VectorXd& multipliers,
                                       const MatrixXd& Q, double rho) {
    return update_constraint_multipliers(set, multipliers, Q, VectorXd::Constant(multipliers.size(), rho));
}

VectorXd update_constraint_multipliers(const ConstraintSet& set, const VectorXd& multipliers,
                                       const MatrixXd& Q, const VectorXd& steps) {
    if (multipliers.size() != set.row_count() || steps.size() != multipliers.size()) {
        throw ShapeError("update_constraint_multipliers: one multiplier and step per constraint row required");
    }
    const VectorXd values = constraint_values(set, Q);
    const auto eq = equality_rows(set);
    VectorXd next = multipliers + steps.cwiseProduct(values);
    for (long r = 0; r < next.size(); ++r) {
        if (!eq[static_cast<std::size_t>(r)]) next(r) = std::max(0.0, next(r));
    }
    return next;
}

VectorXd constraint_sensitivity(const ConstraintSet& set, const MatrixXd& Q) {
    const MatrixXd spread = Q.array() * (1.0 - Q.array());
    VectorXd out(set.row_count());
    long r = 0;
    for (const auto& c : set.constraints) {
        for (int local = 0; local < c.row_count(); ++local, ++r) {
            MatrixXd grad = MatrixXd::Zero(Q.rows(), Q.cols());
            add_row_gradient(c, static_cast<std::size_t>(local), 1.0, grad);
            out(r) = (grad.array().square() * spread.array()).sum();
        }
    }
    return out;
}

double max_violation(const ConstraintSet& set, const MatrixXd& Q) {
    const VectorXd values = constraint_values(set, Q);
    const auto eq = equality_rows(set);
    double worst = 0.0;
    for (long r = 0; r < values.size(); ++r) {
        const double v = eq[static_cast<std::size_t>(r)] ? std::abs(values(r)) : std::max(0.0, values(r));
        worst = std::max(worst, v);
    }
    return worst;
}

bool satisfied_by(const ConstraintSet& set, const Eigen::MatrixXi& V) {
    const Eigen::VectorXi mass = V.rowwise().sum();
    std::vector<int> counts(static_cast<std::size_t>(mass.size()));
    for (long i = 0; i < mass.size(); ++i) counts[static_cast<std::size_t>(i)] = mass(i);
    return counts_satisfy(set, counts);
}

bool satisfied_by_support(const ConstraintSet& set, const std::vector<int>& support) {
    int d = 0;
    for (const auto& c : set.constraints) {
        for (int f : c.features) d = std::max(d, f + 1);
    }
    for (int f : support) d = std::max(d, f + 1);
    std::vector<int> counts(static_cast<std::size_t>(d), 0);
    for (int f : support) counts[static_cast<std::size_t>(f)] += 1;
    return counts_satisfy(set, counts);
}

ValidationReport validate(const ConstraintSet& set, int k, long d) {
    auto fail = [](std::string msg) { return ValidationReport{false, std::move(msg)}; };
    for (std::size_t ci = 0; ci < set.constraints.size(); ++ci) {
        const auto& c = set.constraints[ci];
        try {
            check_features(c.features, d, to_string(c.kind).c_str());
        } catch (const ConstraintError& e) {
            return fail("constraint " + std::to_string(ci + 1) + ": " + e.what());
        }
    }

    std::vector<std::vector<int>> required;
    for (const auto& c : set.constraints) {
        if (c.kind == ConstraintKind::AtLeastOne) required.push_back(c.features);
    }
    if (const int disjoint = max_disjoint(required); disjoint > k) {
        return fail(std::to_string(disjoint) + " pairwise disjoint at_least_one sets cannot be covered with k = " +
                    std::to_string(k) + " selections");
    }

    // A feature inside a tie group of size r drags r selections along with it.
    std::vector<int> tie_size(static_cast<std::size_t>(d), 1);
    for (const auto& c : set.constraints) {
        if (c.kind != ConstraintKind::GroupTie) continue;
        for (int f : c.features) {
            auto& s = tie_size[static_cast<std::size_t>(f)];
            s = std::max(s, static_cast<int>(c.features.size()));
        }
    }
    for (const auto& req : required) {
        const bool forced = std::all_of(req.begin(), req.end(),
                                        [&](int f) { return tie_size[static_cast<std::size_t>(f)] > k; });
        if (forced) {
            return fail("at_least_one set forces a group of more than k = " + std::to_string(k) +
                        " features into the selection");
        }
    }

    // Exhaustive witness search over selection-count vectors (multisets of size k).
    if (!set.empty() && binomial(d + k - 1, k) <= kEnumerationCap) {
        std::vector<int> counts(static_cast<std::size_t>(d), 0);
        bool found = false;
        std::function<void(long, int)> go = [&](long start, int left) {
            if (found) return;
            if (left == 0) {
                found = counts_satisfy(set, counts);
                return;
            }
            for (long i = start; i < d && !found; ++i) {
                counts[static_cast<std::size_t>(i)] += 1;
                go(i, left - 1);
                counts[static_cast<std::size_t>(i)] -= 1;
            }
        };
        go(0, k);
        if (!found) return fail("no selection of k = " + std::to_string(k) + " features satisfies every constraint");
    }
    return {};
}

}  // namespace sparsemep
