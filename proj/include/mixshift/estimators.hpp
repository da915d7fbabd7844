#pragma once

// Cross-fitted TMLE and SDR estimators of E[Y(A^d)] for (longitudinal)
// modified treatment policies, with censoring weights, contrasts against the
// observed outcome mean and subpopulation-restricted contrasts.
//
// Notation: times t = 0..T; H_t = (L_0, A_0, ..., L_{t-1}, A_{t-1}, L_t); the
// regression features at t are (A_t, H_t). A subject is at risk at t when
// uncensored through t; C_{t+1} = 1 means it stays uncensored after t.

#include "mixshift/core.hpp"
#include "mixshift/dataset.hpp"
#include "mixshift/hull.hpp"
#include "mixshift/inference.hpp"
#include "mixshift/learners.hpp"
#include "mixshift/policy.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mixshift {

enum class EstimatorKind { tmle, sdr };

inline std::string to_string(EstimatorKind k) { return k == EstimatorKind::tmle ? "tmle" : "sdr"; }

inline EstimatorKind parse_estimator(const std::string& s) {
    if (s == "tmle") return EstimatorKind::tmle;
    if (s == "sdr") return EstimatorKind::sdr;
    throw ConfigError("unknown estimator '" + s + "' (expected tmle or sdr)");
}

struct RatioOptions {
    double truncation_quantile = 0.999;  // 1 disables quantile truncation
    double cap = std::numeric_limits<double>::infinity();
};

struct EstimatorConfig {
    int folds = 10;        // outer cross-fitting folds
    int inner_folds = 10;  // super learner CV folds
    std::uint64_t seed = 0;
    std::vector<LearnerSpec> roster = default_roster();
    RatioOptions ratio;
    // Optional per-time roster overrides; an empty entry falls back to `roster`.
    // The treatment override covers both the density-ratio and censoring fits.
    std::vector<std::vector<LearnerSpec>> outcome_roster_by_time;
    std::vector<std::vector<LearnerSpec>> treatment_roster_by_time;

    const std::vector<LearnerSpec>& outcome_roster(int t) const { return pick(outcome_roster_by_time, t); }
    const std::vector<LearnerSpec>& treatment_roster(int t) const { return pick(treatment_roster_by_time, t); }

private:
    const std::vector<LearnerSpec>& pick(const std::vector<std::vector<LearnerSpec>>& by_time, int t) const {
        const auto k = static_cast<std::size_t>(t);
        return k < by_time.size() && !by_time[k].empty() ? by_time[k] : roster;
    }
};

/// Per-time treatment-side nuisances for one policy. Vectors are indexed by
/// position within the at-risk rows at that time.
struct TreatmentNuisances {
    std::vector<Matrix> shifted_features;  // (d(A_t), H_t)
    std::vector<bool> identity_at;         // shifted rows equal the observed rows
    std::vector<Vector> ratio;             // truncated r_t
    std::vector<Vector> censoring;         // c_t in [1e-5, 1]
    std::size_t truncation_events = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline void add_warnings(std::vector<std::string>& into, const std::vector<std::string>& from) {
    for (const auto& w : from)
        if (std::find(into.begin(), into.end(), w) == into.end()) into.push_back(w);
}

/// Columns of (A_t, H_t) for the given subjects; `At` replaces the exposures
/// at t when supplied (rows aligned with `rows`).
inline Matrix history_features(const LongitudinalDataset& ds, int t, const std::vector<Index>& rows,
                               const Matrix* At = nullptr) {
    const Index J = ds.n_components();
    Index cols = J;
    for (int s = 0; s < t; ++s) cols += ds.covariates[static_cast<std::size_t>(s)].cols() + J;
    cols += ds.covariates[static_cast<std::size_t>(t)].cols();
    Matrix X(static_cast<Index>(rows.size()), cols);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const Index i = rows[k];
        const auto r = static_cast<Index>(k);
        Index c = 0;
        X.row(r).segment(c, J) = At ? At->row(r) : ds.exposures[static_cast<std::size_t>(t)].row(i);
        c += J;
        for (int s = 0; s <= t; ++s) {
            const auto& L = ds.covariates[static_cast<std::size_t>(s)];
            X.row(r).segment(c, L.cols()) = L.row(i);
            c += L.cols();
            if (s < t) {
                X.row(r).segment(c, J) = ds.exposures[static_cast<std::size_t>(s)].row(i);
                c += J;
            }
        }
    }
    return X;
}

/// Newton solve of the weighted intercept-only logistic fluctuation
///   logit m~ = logit m + eps,
/// maximizing sum w [y log m~ + (1 - y) log(1 - m~)] over eps.
inline double solve_fluctuation(const Vector& y, const Vector& offset, const Vector& w) {
    const auto loglik = [&](double eps) {
        double s = 0.0;
        for (Index i = 0; i < y.size(); ++i) {
            if (w[i] == 0.0) continue;
            const double p = clamp_prob(expit(offset[i] + eps), 1e-12);
            s += w[i] * (y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p));
        }
        return s;
    };
    const double wsum = w.sum();
    if (!(wsum > 0.0)) return 0.0;
    double eps = 0.0, ll = loglik(eps);
    for (int it = 0; it < 100; ++it) {
        double score = 0.0, info = 0.0;
        for (Index i = 0; i < y.size(); ++i) {
            const double p = expit(offset[i] + eps);
            score += w[i] * (y[i] - p);
            info += w[i] * p * (1.0 - p);
        }
        if (std::abs(score) <= 1e-13 * wsum) return eps;
        if (!(info > 0.0)) throw NumericalError("fluctuation information vanished", std::abs(score) / wsum);
        double step = score / info;
        double cand = eps + step, cand_ll = loglik(cand);
        for (int bt = 0; bt < 50 && cand_ll < ll - 1e-14 * std::abs(ll); ++bt) {
            step *= 0.5;
            cand = eps + step;
            cand_ll = loglik(cand);
        }
        eps = cand;
        ll = cand_ll;
        if (std::abs(step) < 1e-13) return eps;
    }
    double score = 0.0;
    for (Index i = 0; i < y.size(); ++i) score += w[i] * (y[i] - expit(offset[i] + eps));
    if (std::abs(score) <= 1e-9 * wsum) return eps;
    throw NumericalError("fluctuation did not converge within 100 Newton steps", std::abs(score) / wsum);
}

}  // namespace detail

// ============================================================================
// Estimation session
// ============================================================================

/// Holds the fold plan, features and policy-independent nuisances (censoring)
/// for one dataset so several policies can be estimated on common folds. The
/// dataset must outlive the session.
class ShiftEstimator {
public:
    ShiftEstimator(const LongitudinalDataset& ds, EstimatorConfig config)
        : ds_(&ds), config_(std::move(config)), fingerprint_(ds.fingerprint()) {
        ds.validate();
        if (config_.folds < 2) throw ConfigError("need at least two cross-fitting folds");
        if (config_.inner_folds < 2) throw ConfigError("need at least two super learner folds");
        if (!(config_.ratio.truncation_quantile > 0.0 && config_.ratio.truncation_quantile <= 1.0))
            throw ConfigError("ratio truncation quantile must lie in (0, 1]");
        if (!(config_.ratio.cap > 0.0)) throw ConfigError("ratio cap must be positive");
        plan_ = make_fold_plan(ds.n(), config_.folds, config_.seed);
        const int nt = ds.n_times();
        for (int t = 0; t < nt; ++t) {
            at_risk_.push_back(ds.at_risk_rows(t));
            if (static_cast<Index>(at_risk_.back().size()) < 2 * config_.folds)
                throw ValidationError("fewer than " + std::to_string(2 * config_.folds) + " uncensored subjects at time " +
                                      std::to_string(t));
            features_.push_back(detail::history_features(ds, t, at_risk_.back()));
        }
    }

    const LongitudinalDataset& dataset() const { return *ds_; }
    const EstimatorConfig& config() const { return config_; }
    const FoldPlan& fold_plan() const { return plan_; }
    const std::vector<Index>& at_risk(int t) const { return at_risk_[static_cast<std::size_t>(t)]; }
    const Matrix& features(int t) const { return features_[static_cast<std::size_t>(t)]; }

    /// Hull of the observed exposures at t in standardized units; built on
    /// first use.
    const ConvexHullModel& hull(int t) {
        if (!map_) map_ = standardize(*ds_);
        auto it = hulls_.find(t);
        if (it == hulls_.end()) it = hulls_.emplace(t, build_hull(*ds_, t, *map_)).first;
        return it->second;
    }

    /// Out-of-fold P(C_{t+1} = 1 | A_t, H_t), clipped to [1e-5, 1]; exactly 1
    /// when nobody at risk is censored after t.
    const std::vector<Vector>& censoring() {
        if (censoring_) return *censoring_;
        std::vector<Vector> out;
        for (int t = 0; t < ds_->n_times(); ++t) {
            const auto& rows = at_risk(t);
            Vector label(static_cast<Index>(rows.size()));
            for (std::size_t k = 0; k < rows.size(); ++k)
                label[static_cast<Index>(k)] = ds_->uncensored[static_cast<std::size_t>(t)][static_cast<std::size_t>(rows[k])];
            if (label.minCoeff() == 1.0) {
                out.push_back(Vector::Ones(label.size()));
                continue;
            }
            const auto pred = crossfit(features(t), label, rows, {}, {&features(t)}, rows, Task::probability,
                                       config_.treatment_roster(t), mix_seed(config_.seed, 1000 + static_cast<std::uint64_t>(t)),
                                       censoring_warnings_);
            out.push_back(pred[0].cwiseMax(kProbClip).cwiseMin(1.0));
        }
        censoring_ = std::move(out);
        return *censoring_;
    }

    /// Shifted features, density ratios r_t = g^d/g (classification of
    /// shifted against observed rows) and censoring probabilities.
    TreatmentNuisances treatment(const ShiftPolicy& policy) {
        const auto& ds = *ds_;
        if (policy.n_times() != ds.n_times())
            throw DimensionError("policy '" + policy.name() + "' covers " + std::to_string(policy.n_times()) +
                                 " times but the data have " + std::to_string(ds.n_times()));
        if (policy.n_components() != ds.n_components())
            throw DimensionError("policy '" + policy.name() + "' has " + std::to_string(policy.n_components()) +
                                 " components but the data have " + std::to_string(ds.n_components()));
        TreatmentNuisances out;
        for (int t = 0; t < ds.n_times(); ++t) {
            const auto& rows = at_risk(t);
            const Matrix A = ds.exposures[static_cast<std::size_t>(t)](rows, Eigen::all);
            const ConvexHullModel* h = policy.guard().kind == Guard::Kind::none ? nullptr : &hull(t);
            const ShiftedExposures shifted = apply_shift(policy, A, t, h);
            Matrix Xd = detail::history_features(ds, t, rows, &shifted.values);
            const bool same = Xd == features(t);
            out.identity_at.push_back(same);
            if (same) {
                out.ratio.push_back(Vector::Ones(static_cast<Index>(rows.size())));
            } else {
                out.ratio.push_back(density_ratio(t, Xd, out.truncation_events, out.warnings, config_.treatment_roster(t)));
            }
            out.shifted_features.push_back(std::move(Xd));
        }
        out.censoring = censoring();
        detail::add_warnings(out.warnings, censoring_warnings_);
        return out;
    }

    EstimandEstimate estimate(const ShiftPolicy& policy, EstimatorKind kind) {
        return estimate(policy, kind, treatment(policy));
    }

    EstimandEstimate estimate(const ShiftPolicy& policy, EstimatorKind kind, const TreatmentNuisances& nuis) {
        auto e = kind == EstimatorKind::tmle ? run_tmle(nuis) : run_sdr(nuis);
        e.label = policy.name();
        e.fingerprint = fingerprint_;
        e.folds = config_.folds;
        e.seed = config_.seed;
        e.truncation_events = nuis.truncation_events;
        detail::add_warnings(e.warnings, nuis.warnings);
        return e;
    }

    /// The observed-outcome term E[Y]. Without censoring this is the sample
    /// mean with influence values Y - mean(Y); with censoring it is the
    /// identity-policy estimate on the same folds, which reweights the
    /// uncensored outcomes by the censoring model.
    EstimandEstimate observed(EstimatorKind kind) {
        const auto& ds = *ds_;
        EstimandEstimate e;
        if (ds.has_censoring()) {
            e = estimate(ShiftPolicy::identity("observed", ds.n_times(), ds.n_components()), kind);
        } else {
            e.value = ds.outcome.mean();
            e.eif = ds.outcome.array() - e.value;
            e.fingerprint = fingerprint_;
            e.folds = config_.folds;
            e.seed = config_.seed;
        }
        e.label = "observed";
        return e;
    }

    EstimandEstimate contrast_vs_observed(const EstimandEstimate& shift, EstimatorKind kind) {
        auto c = if_sub(shift, observed(kind));
        c.label = shift.label + " - observed";
        return c;
    }

private:
    // Cross-fitting: for each outer fold, fit on training rows of subjects
    // outside the fold and predict every evaluation matrix for subjects inside.
    std::vector<Vector> crossfit(const Matrix& Xtrain, const Vector& ytrain, const std::vector<Index>& train_subject,
                                 const std::vector<Index>& train_group, const std::vector<const Matrix*>& eval,
                                 const std::vector<Index>& eval_subject, Task task, const std::vector<LearnerSpec>& roster,
                                 std::uint64_t seed, std::vector<std::string>& warnings) const {
        const int V = config_.folds;
        std::vector<Vector> out(eval.size(), Vector::Constant(static_cast<Index>(eval_subject.size()), kNaN));
        std::vector<std::vector<std::string>> fold_warnings(static_cast<std::size_t>(V));
        parallel_for(static_cast<std::size_t>(V), [&](std::size_t vv) {
            const int v = static_cast<int>(vv);
            std::vector<Index> tr, te;
            for (std::size_t r = 0; r < train_subject.size(); ++r)
                if (plan_.fold_of[static_cast<std::size_t>(train_subject[r])] != v) tr.push_back(static_cast<Index>(r));
            for (std::size_t r = 0; r < eval_subject.size(); ++r)
                if (plan_.fold_of[static_cast<std::size_t>(eval_subject[r])] == v) te.push_back(static_cast<Index>(r));
            if (te.empty()) return;
            if (tr.empty()) throw ValidationError("a cross-fitting fold has no training rows");
            EnsembleOptions opts;
            opts.folds = config_.inner_folds;
            opts.seed = mix_seed(seed, vv);
            if (!train_group.empty()) {
                // Dense group ids for the training subset keep pooled rows of a
                // subject in one inner fold.
                std::map<Index, Index> dense;
                for (Index r : tr) dense.emplace(train_group[static_cast<std::size_t>(r)], 0);
                Index next = 0;
                for (auto& [g, id] : dense) id = next++;
                for (Index r : tr) opts.groups.push_back(dense[train_group[static_cast<std::size_t>(r)]]);
            }
            const auto ens = fit_ensemble(Xtrain(tr, Eigen::all), ytrain(tr), task, roster, opts);
            fold_warnings[vv] = ens.warnings;
            for (std::size_t m = 0; m < eval.size(); ++m) {
                const Vector pred = ens.predict((*eval[m])(te, Eigen::all));
                for (std::size_t k = 0; k < te.size(); ++k) out[m][te[k]] = pred[static_cast<Index>(k)];
            }
        });
        for (const auto& w : fold_warnings) detail::add_warnings(warnings, w);
        return out;
    }

    Vector density_ratio(int t, const Matrix& Xd, std::size_t& events, std::vector<std::string>& warnings,
                         const std::vector<LearnerSpec>& roster) const {
        const auto& rows = at_risk(t);
        const auto m = static_cast<Index>(rows.size());
        const Matrix& X = features(t);
        Matrix stacked(2 * m, X.cols());
        stacked.topRows(m) = X;
        stacked.bottomRows(m) = Xd;
        Vector label(2 * m);
        label.head(m).setZero();
        label.tail(m).setOnes();
        std::vector<Index> subject(rows);
        subject.insert(subject.end(), rows.begin(), rows.end());
        const auto p = crossfit(stacked, label, subject, subject, {&X}, rows, Task::probability, roster,
                                mix_seed(config_.seed, 2000 + static_cast<std::uint64_t>(t)), warnings)[0];
        Vector r(m);
        for (Index k = 0; k < m; ++k) {
            if (p[k] <= kProbClip || p[k] >= 1.0 - kProbClip) ++events;
            r[k] = p[k] / (1.0 - p[k]);
        }
        double cap = config_.ratio.cap;
        if (config_.ratio.truncation_quantile < 1.0)
            cap = std::min(cap, quantile(std::vector<double>(r.data(), r.data() + m), config_.ratio.truncation_quantile));
        for (Index k = 0; k < m; ++k)
            if (r[k] > cap) {
                r[k] = cap;
                ++events;
            }
        if (!r.allFinite()) throw NumericalError("non-finite density ratio at time " + std::to_string(t));
        return r;
    }

    // Out-of-fold m_t at observed and shifted exposures for every subject at
    // risk at t, fit on those uncensored after t.
    std::pair<Vector, Vector> outcome_predictions(int t, const Vector& target, const TreatmentNuisances& nuis, Task task,
                                                  std::vector<std::string>& warnings) const {
        const auto& ds = *ds_;
        const auto& rows = at_risk(t);
        std::vector<Index> train_pos, train_subject;
        for (std::size_t k = 0; k < rows.size(); ++k)
            if (ds.uncensored[static_cast<std::size_t>(t)][static_cast<std::size_t>(rows[k])]) {
                train_pos.push_back(static_cast<Index>(k));
                train_subject.push_back(rows[k]);
            }
        if (static_cast<Index>(train_pos.size()) < 2 * config_.folds)
            throw ValidationError("fewer than " + std::to_string(2 * config_.folds) +
                                  " subjects remain uncensored after time " + std::to_string(t));
        const Matrix Xtr = features(t)(train_pos, Eigen::all);
        Vector ytr(static_cast<Index>(train_pos.size()));
        for (std::size_t r = 0; r < train_subject.size(); ++r) ytr[static_cast<Index>(r)] = target[train_subject[r]];
        const bool same = nuis.identity_at[static_cast<std::size_t>(t)];
        std::vector<const Matrix*> eval{&features(t)};
        if (!same) eval.push_back(&nuis.shifted_features[static_cast<std::size_t>(t)]);
        auto pred = crossfit(Xtr, ytr, train_subject, {}, eval, rows, task, config_.outcome_roster(t),
                             mix_seed(config_.seed, 3000 + static_cast<std::uint64_t>(t)), warnings);
        Vector md = same ? pred[0] : pred[1];
        return {std::move(pred[0]), std::move(md)};
    }

    // Cumulative weights prod_{s<=t} r_s C_{s+1} / c_s per subject (0 once censored).
    std::vector<Vector> cumulative_weights(const TreatmentNuisances& nuis) const {
        const auto& ds = *ds_;
        std::vector<Vector> W;
        Vector running = Vector::Ones(ds.n());
        for (int t = 0; t < ds.n_times(); ++t) {
            const auto& rows = at_risk(t);
            Vector next = Vector::Zero(ds.n());
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const Index i = rows[k];
                if (!ds.uncensored[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]) continue;
                next[i] = running[i] * nuis.ratio[static_cast<std::size_t>(t)][static_cast<Index>(k)] /
                          nuis.censoring[static_cast<std::size_t>(t)][static_cast<Index>(k)];
            }
            if (!next.allFinite()) throw NumericalError("non-finite cumulative weights at time " + std::to_string(t));
            W.push_back(next);
            running = std::move(next);
        }
        return W;
    }

    EstimandEstimate run_tmle(const TreatmentNuisances& nuis) const {
        const auto& ds = *ds_;
        const Index n = ds.n();
        // Bounds for the [0, 1] outcome scale.
        double lo = 0.0, hi = 1.0;
        if (!ds.outcome_binary()) {
            lo = std::numeric_limits<double>::infinity();
            hi = -lo;
            for (Index i = 0; i < n; ++i)
                if (!std::isnan(ds.outcome[i])) {
                    lo = std::min(lo, ds.outcome[i]);
                    hi = std::max(hi, ds.outcome[i]);
                }
            if (!(hi > lo)) hi = lo + 1.0;
        }
        const double range = hi - lo;
        Vector pseudo = (ds.outcome.array() - lo) / range;  // NaN where censored
        const auto W = cumulative_weights(nuis);
        Vector eif = Vector::Zero(n);
        EstimandEstimate e;

        for (int t = ds.last_time(); t >= 0; --t) {
            const auto& rows = at_risk(t);
            // Binary targets get a classifier; scaled continuous targets (and
            // every earlier pseudo-outcome) a regression bounded to the unit
            // interval before the logit offset is taken.
            const Task task = t == ds.last_time() && ds.outcome_binary() ? Task::probability : Task::regression;
            auto [m, md] = outcome_predictions(t, pseudo, nuis, task, e.warnings);
            m = m.cwiseMax(kProbClip).cwiseMin(1.0 - kProbClip);
            md = md.cwiseMax(kProbClip).cwiseMin(1.0 - kProbClip);
            const auto& Wt = W[static_cast<std::size_t>(t)];
            Vector y(static_cast<Index>(rows.size())), offset(y.size()), w(y.size());
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const auto kk = static_cast<Index>(k);
                const Index i = rows[k];
                const bool obs = ds.uncensored[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] != 0;
                y[kk] = obs ? pseudo[i] : 0.0;
                w[kk] = obs ? Wt[i] : 0.0;
                offset[kk] = logit(m[kk]);
            }
            const double eps = detail::solve_fluctuation(y, offset, w);
            Vector next = Vector::Constant(n, kNaN);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const auto kk = static_cast<Index>(k);
                const Index i = rows[k];
                const double mt = expit(offset[kk] + eps);
                if (w[kk] != 0.0) eif[i] += w[kk] * (y[kk] - mt);
                next[i] = expit(logit(md[kk]) + eps);
            }
            pseudo = std::move(next);
        }
        const double value = pseudo.mean();
        e.value = lo + range * value;
        e.eif = range * (eif.array() + pseudo.array() - value);
        if (!e.eif.allFinite()) throw NumericalError("non-finite influence values");
        return e;
    }

    EstimandEstimate run_sdr(const TreatmentNuisances& nuis) const {
        const auto& ds = *ds_;
        const Index n = ds.n();
        Vector phi = ds.outcome;  // NaN where censored
        EstimandEstimate e;
        for (int t = ds.last_time(); t >= 0; --t) {
            const auto& rows = at_risk(t);
            auto [m, md] = outcome_predictions(t, phi, nuis, Task::regression, e.warnings);
            const auto& r = nuis.ratio[static_cast<std::size_t>(t)];
            const auto& c = nuis.censoring[static_cast<std::size_t>(t)];
            Vector next = Vector::Constant(n, kNaN);
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const auto kk = static_cast<Index>(k);
                const Index i = rows[k];
                double v = md[kk];
                if (ds.uncensored[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)])
                    v += r[kk] / c[kk] * (phi[i] - m[kk]);
                next[i] = v;
            }
            phi = std::move(next);
        }
        if (!phi.allFinite()) throw NumericalError("non-finite pseudo-outcomes");
        e.value = phi.mean();
        e.eif = phi.array() - e.value;
        return e;
    }

    const LongitudinalDataset* ds_;
    EstimatorConfig config_;
    std::uint64_t fingerprint_;
    FoldPlan plan_;
    std::vector<std::vector<Index>> at_risk_;
    std::vector<Matrix> features_;
    std::optional<std::vector<Vector>> censoring_;
    std::vector<std::string> censoring_warnings_;
    std::optional<StandardizationMap> map_;
    std::map<int, ConvexHullModel> hulls_;
};

// ============================================================================
// Free-function entry points
// ============================================================================

inline EstimandEstimate tmle(const LongitudinalDataset& ds, const ShiftPolicy& policy, const EstimatorConfig& config) {
    return ShiftEstimator(ds, config).estimate(policy, EstimatorKind::tmle);
}

inline EstimandEstimate sdr(const LongitudinalDataset& ds, const ShiftPolicy& policy, const EstimatorConfig& config) {
    return ShiftEstimator(ds, config).estimate(policy, EstimatorKind::sdr);
}

/// Truncated r_t for every subject (NaN for subjects not at risk at t).
inline Vector estimate_density_ratio(const LongitudinalDataset& ds, const ShiftPolicy& policy, int t,
                                     const EstimatorConfig& config, std::size_t* truncation_events = nullptr) {
    if (t < 0 || t >= ds.n_times()) throw DimensionError("time index out of range");
    ShiftEstimator session(ds, config);
    const auto nuis = session.treatment(policy);
    if (truncation_events) *truncation_events = nuis.truncation_events;
    Vector out = Vector::Constant(ds.n(), kNaN);
    const auto& rows = session.at_risk(t);
    for (std::size_t k = 0; k < rows.size(); ++k)
        out[rows[k]] = nuis.ratio[static_cast<std::size_t>(t)][static_cast<Index>(k)];
    return out;
}

// ============================================================================
// Subpopulations
// ============================================================================

struct ThresholdCondition {
    enum class Op { ge, gt, le, lt };
    Index component = 0;
    Op op = Op::ge;
    double threshold = 0.0;

    bool holds(double a) const {
        switch (op) {
            case Op::ge: return a >= threshold;
            case Op::gt: return a > threshold;
            case Op::le: return a <= threshold;
            case Op::lt: return a < threshold;
        }
        return false;
    }
};

/// A union of intersections of component thresholds on baseline exposures.
/// No clauses means "every subject".
struct SubpopulationPredicate {
    std::vector<std::vector<ThresholdCondition>> clauses;

    static SubpopulationPredicate always() { return {}; }

    bool holds(const Eigen::Ref<const Eigen::RowVectorXd>& a) const {
        if (clauses.empty()) return true;
        for (const auto& clause : clauses) {
            bool all = true;
            for (const auto& c : clause) {
                if (c.component < 0 || c.component >= a.size()) throw DimensionError("predicate component out of range");
                all = all && c.holds(a[c.component]);
            }
            if (all) return true;
        }
        return false;
    }
};

struct Subpopulation {
    std::vector<bool> member;
    Index count = 0;
    double probability = 0.0;  // empirical P(A in B)
};

inline Subpopulation restrict_subpopulation(const LongitudinalDataset& ds, const SubpopulationPredicate& predicate,
                                            Index min_count = 1) {
    if (ds.n_times() != 1) throw ValidationError("subpopulation contrasts need single-timepoint data");
    Subpopulation s;
    const Matrix& A = ds.exposures[0];
    for (Index i = 0; i < ds.n(); ++i) {
        const bool in = predicate.holds(A.row(i));
        s.member.push_back(in);
        s.count += in;
    }
    if (s.count == 0) throw ValidationError("subpopulation predicate selects no subjects");
    if (s.count < min_count)
        throw ValidationError("subpopulation has " + std::to_string(s.count) + " subjects; need at least " +
                              std::to_string(min_count));
    s.probability = static_cast<double>(s.count) / static_cast<double>(ds.n());
    return s;
}

/// Localizes a full-population estimate to B: the value is the mean over B of
/// the uncentered contributions eif + value, and the influence values become
/// 1{B} (contribution - value_B) / P(B).
inline EstimandEstimate localize(const EstimandEstimate& e, const Subpopulation& B) {
    if (static_cast<Index>(B.member.size()) != e.n()) throw DimensionError("subpopulation size differs from estimate");
    double sum = 0.0;
    for (Index i = 0; i < e.n(); ++i)
        if (B.member[static_cast<std::size_t>(i)]) sum += e.eif[i] + e.value;
    EstimandEstimate out = e;
    out.label = e.label + " | B";
    out.value = sum / static_cast<double>(B.count);
    for (Index i = 0; i < e.n(); ++i)
        out.eif[i] = B.member[static_cast<std::size_t>(i)] ? (e.eif[i] + e.value - out.value) / B.probability : 0.0;
    return out;
}

}  // namespace mixshift
