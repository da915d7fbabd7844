#pragma once

// Coefficient-table structural models: observational draws, Monte Carlo
// counterfactual truth under shift policies (natural-value semantics) and a
// catalog of reference data-generating processes.
//
// Evaluation order per time: L_t (covariates in index order), A_t
// (components in index order), C_{t+1}; then Y. An equation may reference
// any earlier variable in that order, including lower-indexed variables of
// the same block.

#include "mixshift/core.hpp"
#include "mixshift/dataset.hpp"
#include "mixshift/hull.hpp"
#include "mixshift/policy.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mixshift {

struct VarRef {
    enum class Block { L, A };
    Block block = Block::L;
    int time = 0;
    int index = 0;

    static VarRef L(int t, int k) { return {Block::L, t, k}; }
    static VarRef A(int t, int j) { return {Block::A, t, j}; }
};

struct Factor {
    enum class Kind { value, indicator, log };
    VarRef var;
    Kind kind = Kind::value;
    double cutoff = 0.0;  // indicator: 1{var >= cutoff}

    static Factor value(VarRef v) { return {v, Kind::value, 0.0}; }
    static Factor indicator(VarRef v, double cutoff) { return {v, Kind::indicator, cutoff}; }
    static Factor log(VarRef v) { return {v, Kind::log, 0.0}; }
};

/// coefficient * product of factors (an empty product is 1).
struct Term {
    double coefficient = 0.0;
    std::vector<Factor> factors;
};

struct Equation {
    enum class Link { identity, exp, bernoulli_logit };
    double intercept = 0.0;
    std::vector<Term> terms;
    Link link = Link::identity;
    double noise_sd = 1.0;  // Gaussian noise on the linear predictor (identity / exp links)

    Equation& add(double coef, std::vector<Factor> factors) {
        terms.push_back({coef, std::move(factors)});
        return *this;
    }
};

struct TimeSlice {
    std::vector<std::string> covariate_names;
    std::vector<Equation> covariates;
    std::vector<Equation> exposures;   // one per component
    std::optional<Equation> censoring;  // P(C_{t+1} = 1); logit link
};

struct StructuralModel {
    std::string name;
    std::vector<std::string> exposure_names;
    std::vector<TimeSlice> times;
    Equation outcome;
    std::string outcome_name = "Y";
    std::uint64_t seed = 1;

    int n_times() const { return static_cast<int>(times.size()); }
    Index n_components() const { return static_cast<Index>(exposure_names.size()); }

    /// Throws ConfigError when an equation looks ahead in evaluation order or
    /// a block has the wrong size.
    void validate() const {
        if (times.empty()) throw ConfigError("structural model '" + name + "' has no timepoints");
        if (exposure_names.empty()) throw ConfigError("structural model '" + name + "' has no exposures");
        const auto J = exposure_names.size();
        for (std::size_t t = 0; t < times.size(); ++t) {
            const auto& s = times[t];
            if (s.covariates.size() != s.covariate_names.size())
                throw ConfigError("covariate names and equations differ in count at time " + std::to_string(t));
            if (s.exposures.size() != J)
                throw ConfigError("time " + std::to_string(t) + " needs one equation per exposure component");
            if (s.censoring && s.censoring->link != Equation::Link::bernoulli_logit)
                throw ConfigError("censoring equations use the bernoulli_logit link");
            const int ti = static_cast<int>(t);
            for (std::size_t k = 0; k < s.covariates.size(); ++k)
                check_refs(s.covariates[k], ti, VarRef::Block::L, static_cast<int>(k));
            for (std::size_t j = 0; j < J; ++j) check_refs(s.exposures[j], ti, VarRef::Block::A, static_cast<int>(j));
            if (s.censoring) check_refs(*s.censoring, ti, VarRef::Block::A, static_cast<int>(J));
        }
        check_refs(outcome, n_times(), VarRef::Block::L, 0);
    }

private:
    // A reference is legal when it precedes (time, block, index) in evaluation order.
    void check_refs(const Equation& eq, int time, VarRef::Block block, int index) const {
        for (const auto& term : eq.terms)
            for (const auto& f : term.factors) {
                const auto& v = f.var;
                if (v.time < 0 || v.time >= n_times()) throw ConfigError("equation references a time outside the model");
                const auto& s = times[static_cast<std::size_t>(v.time)];
                const int size = v.block == VarRef::Block::L ? static_cast<int>(s.covariates.size())
                                                              : static_cast<int>(exposure_names.size());
                if (v.index < 0 || v.index >= size) throw ConfigError("equation references a missing variable");
                bool earlier = v.time < time;
                if (v.time == time) {
                    if (v.block == block) earlier = v.index < index;
                    else earlier = v.block == VarRef::Block::L && block == VarRef::Block::A;
                }
                if (!earlier) throw ConfigError("structural model '" + name + "' is not acyclic");
            }
    }
};

struct TruthResult {
    double value = 0.0;
    double mc_se = 0.0;
    std::size_t draws = 0;
};

namespace detail {

inline constexpr std::size_t kSimChunk = 4096;

/// Flattened per-subject variable layout with precomputed offsets.
class CompiledModel {
public:
    explicit CompiledModel(const StructuralModel& m) : m_(&m) {
        m.validate();
        std::size_t off = 0;
        for (const auto& s : m.times) {
            l_off_.push_back(off);
            off += s.covariates.size();
            a_off_.push_back(off);
            off += m.exposure_names.size();
        }
        width_ = off;
        for (const auto& s : m.times) {
            n_noise_ += s.covariates.size() + s.exposures.size() + 1;  // censoring draw always taken
        }
        n_noise_ += 1;
    }

    std::size_t width() const { return width_; }
    std::size_t n_noise() const { return n_noise_; }
    std::size_t offset(const VarRef& v) const {
        return (v.block == VarRef::Block::L ? l_off_ : a_off_)[static_cast<std::size_t>(v.time)] +
               static_cast<std::size_t>(v.index);
    }

    /// Standard normals for continuous links, uniforms for Bernoulli draws.
    void draw_noise(std::mt19937_64& rng, std::vector<double>& noise) const {
        noise.resize(n_noise_);
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> unif;
        std::size_t k = 0;
        const auto draw = [&](const Equation& eq) {
            noise[k++] = eq.link == Equation::Link::bernoulli_logit ? unif(rng) : normal(rng);
        };
        for (const auto& s : m_->times) {
            for (const auto& eq : s.covariates) draw(eq);
            for (const auto& eq : s.exposures) draw(eq);
            noise[k++] = unif(rng);
        }
        draw(m_->outcome);
    }

    double linear(const Equation& eq, const std::vector<double>& vals) const {
        double s = eq.intercept;
        for (const auto& term : eq.terms) {
            double prod = term.coefficient;
            for (const auto& f : term.factors) {
                const double x = vals[offset(f.var)];
                switch (f.kind) {
                    case Factor::Kind::value: prod *= x; break;
                    case Factor::Kind::indicator: prod *= x >= f.cutoff ? 1.0 : 0.0; break;
                    case Factor::Kind::log: prod *= std::log(x); break;
                }
            }
            s += prod;
        }
        return s;
    }

    double evaluate(const Equation& eq, const std::vector<double>& vals, double noise) const {
        const double eta = linear(eq, vals);
        switch (eq.link) {
            case Equation::Link::identity: return eta + eq.noise_sd * noise;
            case Equation::Link::exp: return std::exp(eta + eq.noise_sd * noise);
            case Equation::Link::bernoulli_logit: return noise < expit(eta) ? 1.0 : 0.0;
        }
        return eta;
    }

    /// Runs one trajectory. With a policy, each A_t is first drawn from its
    /// equations given the (intervened) history, then replaced by d(A_t), and
    /// censoring is ignored. Returns Y; `alive[t]` receives C_{t+1}.
    double run(const std::vector<double>& noise, std::vector<double>& vals, std::vector<std::uint8_t>& alive,
               const ShiftPolicy* policy, const std::vector<const ConvexHullModel*>* hulls) const {
        vals.assign(width_, kNaN);
        alive.assign(m_->times.size(), 1);
        std::size_t k = 0;
        const auto J = m_->exposure_names.size();
        Vector a(static_cast<Index>(J));
        for (std::size_t t = 0; t < m_->times.size(); ++t) {
            const auto& s = m_->times[t];
            for (std::size_t c = 0; c < s.covariates.size(); ++c)
                vals[l_off_[t] + c] = evaluate(s.covariates[c], vals, noise[k++]);
            for (std::size_t j = 0; j < J; ++j) vals[a_off_[t] + j] = evaluate(s.exposures[j], vals, noise[k++]);
            if (policy) {
                for (std::size_t j = 0; j < J; ++j) a[static_cast<Index>(j)] = vals[a_off_[t] + j];
                const Vector shifted = policy->apply_row(static_cast<int>(t), a);
                bool accept = true;
                if (policy->guard().kind != Guard::Kind::none) {
                    const ConvexHullModel* h = hulls && t < hulls->size() ? (*hulls)[t] : nullptr;
                    if (!h) throw ConfigError("guarded policy simulated without a hull");
                    accept = guard_accepts(policy->guard(), *h, shifted);
                }
                if (accept)
                    for (std::size_t j = 0; j < J; ++j) vals[a_off_[t] + j] = shifted[static_cast<Index>(j)];
            }
            const double u = noise[k++];
            if (!policy && s.censoring) alive[t] = u < expit(linear(*s.censoring, vals)) ? 1 : 0;
        }
        return evaluate(m_->outcome, vals, noise[k]);
    }

private:
    const StructuralModel* m_;
    std::vector<std::size_t> l_off_, a_off_;
    std::size_t width_ = 0;
    std::size_t n_noise_ = 0;
};

}  // namespace detail

/// n i.i.d. trajectories. Later-time variables of censored subjects are
/// missing (NaN) and so is their outcome.
inline LongitudinalDataset draw_observational(const StructuralModel& m, Index n, std::optional<std::uint64_t> seed = {}) {
    if (n < 1) throw ConfigError("need at least one draw");
    const detail::CompiledModel cm(m);
    const std::uint64_t base = seed.value_or(m.seed);
    const auto nt = static_cast<std::size_t>(m.n_times());
    const Index J = m.n_components();

    LongitudinalDataset ds;
    ds.exposure_names = m.exposure_names;
    ds.outcome_name = m.outcome_name;
    ds.outcome = Vector::Constant(n, kNaN);
    for (std::size_t t = 0; t < nt; ++t) {
        ds.covariate_names.push_back(m.times[t].covariate_names);
        ds.covariates.emplace_back(Matrix::Constant(n, static_cast<Index>(m.times[t].covariates.size()), kNaN));
        ds.exposures.emplace_back(Matrix::Constant(n, J, kNaN));
        ds.uncensored.emplace_back(static_cast<std::size_t>(n), std::uint8_t{0});
    }
    for (Index i = 0; i < n; ++i) ds.subject_ids.push_back(std::to_string(i + 1));

    const std::size_t chunks = (static_cast<std::size_t>(n) + detail::kSimChunk - 1) / detail::kSimChunk;
    parallel_for(chunks, [&](std::size_t c) {
        std::mt19937_64 rng(mix_seed(base, c));
        std::vector<double> noise, vals;
        std::vector<std::uint8_t> alive;
        const std::size_t begin = c * detail::kSimChunk;
        const std::size_t end = std::min(static_cast<std::size_t>(n), begin + detail::kSimChunk);
        for (std::size_t ii = begin; ii < end; ++ii) {
            const auto i = static_cast<Index>(ii);
            cm.draw_noise(rng, noise);
            const double y = cm.run(noise, vals, alive, nullptr, nullptr);
            bool at_risk = true;
            for (std::size_t t = 0; t < nt && at_risk; ++t) {
                const auto& s = m.times[t];
                for (std::size_t k = 0; k < s.covariates.size(); ++k)
                    ds.covariates[t](i, static_cast<Index>(k)) = vals[cm.offset(VarRef::L(static_cast<int>(t), static_cast<int>(k)))];
                for (Index j = 0; j < J; ++j)
                    ds.exposures[t](i, j) = vals[cm.offset(VarRef::A(static_cast<int>(t), static_cast<int>(j)))];
                ds.uncensored[t][ii] = alive[t];
                at_risk = alive[t] != 0;
            }
            if (at_risk) ds.outcome[i] = y;
        }
    });
    ds.validate();
    return ds;
}

/// Monte Carlo mean of Y(A^d) under natural-value semantics; counterfactual
/// trajectories are never censored. Guarded policies need one hull per time
/// (raw exposures are standardized through each hull's own map).
inline TruthResult counterfactual_truth(const StructuralModel& m, const ShiftPolicy& policy, std::size_t draws = 1000000,
                                        std::optional<std::uint64_t> seed = {},
                                        const std::vector<const ConvexHullModel*>& hulls = {}) {
    if (draws < 2) throw ConfigError("counterfactual truth needs at least two draws");
    if (policy.n_times() != m.n_times() || policy.n_components() != m.n_components())
        throw DimensionError("policy '" + policy.name() + "' does not match the structural model's dimensions");
    const detail::CompiledModel cm(m);
    const std::uint64_t base = mix_seed(seed.value_or(m.seed), 0x7275746855ULL);
    const std::size_t chunks = (draws + detail::kSimChunk - 1) / detail::kSimChunk;
    std::vector<double> sums(chunks), sq(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        std::mt19937_64 rng(mix_seed(base, c));
        std::vector<double> noise, vals;
        std::vector<std::uint8_t> alive;
        const std::size_t end = std::min(draws, (c + 1) * detail::kSimChunk);
        double s = 0.0, q = 0.0;
        for (std::size_t i = c * detail::kSimChunk; i < end; ++i) {
            cm.draw_noise(rng, noise);
            const double y = cm.run(noise, vals, alive, &policy, &hulls);
            s += y;
            q += y * y;
        }
        sums[c] = s;
        sq[c] = q;
    });
    double s = 0.0, q = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        s += sums[c];
        q += sq[c];
    }
    const double dn = static_cast<double>(draws);
    const double mean = s / dn;
    const double var = std::max(0.0, (q - dn * mean * mean) / (dn - 1.0));
    return {mean, std::sqrt(var / dn), draws};
}

/// Truth of sum_k coefficients[k] * E[Y(A^{d_k})] using common random numbers
/// across policies, so the MC error of the contrast itself is reported.
inline TruthResult counterfactual_contrast(const StructuralModel& m, const std::vector<ShiftPolicy>& policies,
                                           const std::vector<double>& coefficients, std::size_t draws = 1000000,
                                           std::optional<std::uint64_t> seed = {}) {
    if (policies.size() != coefficients.size() || policies.empty())
        throw ConfigError("contrast needs one coefficient per policy");
    for (const auto& p : policies) {
        if (p.guard().kind != Guard::Kind::none) throw ConfigError("contrast truth does not support guarded policies");
        if (p.n_times() != m.n_times() || p.n_components() != m.n_components())
            throw DimensionError("policy '" + p.name() + "' does not match the structural model's dimensions");
    }
    const detail::CompiledModel cm(m);
    const std::uint64_t base = mix_seed(seed.value_or(m.seed), 0x7275746855ULL);
    const std::size_t chunks = (draws + detail::kSimChunk - 1) / detail::kSimChunk;
    std::vector<double> sums(chunks), sq(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        std::mt19937_64 rng(mix_seed(base, c));
        std::vector<double> noise, vals;
        std::vector<std::uint8_t> alive;
        const std::size_t end = std::min(draws, (c + 1) * detail::kSimChunk);
        double s = 0.0, q = 0.0;
        for (std::size_t i = c * detail::kSimChunk; i < end; ++i) {
            cm.draw_noise(rng, noise);
            double y = 0.0;
            for (std::size_t k = 0; k < policies.size(); ++k)
                y += coefficients[k] * cm.run(noise, vals, alive, &policies[k], nullptr);
            s += y;
            q += y * y;
        }
        sums[c] = s;
        sq[c] = q;
    });
    double s = 0.0, q = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        s += sums[c];
        q += sq[c];
    }
    const double dn = static_cast<double>(draws);
    const double mean = s / dn;
    const double var = std::max(0.0, (q - dn * mean * mean) / (dn - 1.0));
    return {mean, std::sqrt(var / dn), draws};
}

// ============================================================================
// Reference catalog
// ============================================================================

struct ReferenceDgp {
    std::string name;
    std::string description;
    StructuralModel model;
    std::vector<ShiftPolicy> policies;  // suggested policies, first is the headline one
    std::optional<double> subgroup_cutoff;  // heterogeneous model: B = {A2 >= cutoff}
};

/// Strength of the A6*A7 product term in the interaction model, chosen so the
/// additive interaction contrast is about five standard errors at n = 5000.
inline constexpr double kInteractionStrength = 0.09;

namespace detail {

inline Equation gaussian(double intercept, double sd = 1.0) {
    Equation e;
    e.intercept = intercept;
    e.noise_sd = sd;
    return e;
}

inline Equation logistic(double intercept) {
    Equation e;
    e.intercept = intercept;
    e.link = Equation::Link::bernoulli_logit;
    e.noise_sd = 0.0;
    return e;
}

inline StructuralModel interaction_model(const std::string& name, double beta67) {
    StructuralModel m;
    m.name = name;
    m.exposure_names = {"A6", "A7"};
    m.seed = 2;
    TimeSlice s;
    s.covariate_names = {"L1"};
    s.covariates = {gaussian(0.0)};
    auto a6 = gaussian(0.0);
    a6.add(0.3, {Factor::value(VarRef::L(0, 0))});
    auto a7 = gaussian(0.0);
    a7.add(0.3, {Factor::value(VarRef::L(0, 0))}).add(0.3, {Factor::value(VarRef::A(0, 0))});
    s.exposures = {a6, a7};
    m.times = {s};
    m.outcome = gaussian(0.0);
    m.outcome.add(1.0, {Factor::value(VarRef::L(0, 0))})
        .add(0.5, {Factor::value(VarRef::A(0, 0))})
        .add(0.5, {Factor::value(VarRef::A(0, 1))});
    if (beta67 != 0.0) m.outcome.add(beta67, {Factor::value(VarRef::A(0, 0)), Factor::value(VarRef::A(0, 1))});
    return m;
}

inline std::vector<ShiftPolicy> interaction_policies() {
    return {ShiftPolicy::uniform("joint", 1, 2, ComponentShift::additive(1.0)),
            ShiftPolicy::on_components("A7_only", 1, 2, {1}, ComponentShift::additive(1.0)),
            ShiftPolicy::on_components("A6_only", 1, 2, {0}, ComponentShift::additive(1.0))};
}

}  // namespace detail

/// linear_single: L ~ N(0,1); A1 = 0.4 L + e; A2 = 0.3 L + e;
/// Y = 1 + 2 A1 + 0.5 A2 + L + e. Shifting A1 by +1 raises E[Y] by exactly 2.
inline ReferenceDgp dgp_linear_single() {
    using detail::gaussian;
    StructuralModel m;
    m.name = "linear_single";
    m.exposure_names = {"A1", "A2"};
    m.seed = 1;
    TimeSlice s;
    s.covariate_names = {"L1"};
    s.covariates = {gaussian(0.0)};
    auto a1 = gaussian(0.0);
    a1.add(0.4, {Factor::value(VarRef::L(0, 0))});
    auto a2 = gaussian(0.0);
    a2.add(0.3, {Factor::value(VarRef::L(0, 0))});
    s.exposures = {a1, a2};
    m.times = {s};
    m.outcome = gaussian(1.0);
    m.outcome.add(2.0, {Factor::value(VarRef::A(0, 0))})
        .add(0.5, {Factor::value(VarRef::A(0, 1))})
        .add(1.0, {Factor::value(VarRef::L(0, 0))});
    return {"linear_single", "single time, two Gaussian components, linear outcome", m,
            {ShiftPolicy::on_components("A1_plus1", 1, 2, {0}, ComponentShift::additive(1.0)),
             ShiftPolicy::uniform("both_plus0.5", 1, 2, ComponentShift::additive(0.5))},
            std::nullopt};
}

/// interaction_single: components A6, A7 with an A6*A7 product term in Y.
/// Policies: joint +1, A7 +1, A6 +1; the additive interaction equals the
/// product coefficient.
inline ReferenceDgp dgp_interaction_single(double beta67 = kInteractionStrength) {
    return {"interaction_single", "single time, A6*A7 product term", detail::interaction_model("interaction_single", beta67),
            detail::interaction_policies(), std::nullopt};
}

/// additive_null: as interaction_single without the product term.
inline ReferenceDgp dgp_additive_null() {
    return {"additive_null", "single time, additive in A6 and A7 (zero interaction)",
            detail::interaction_model("additive_null", 0.0), detail::interaction_policies(), std::nullopt};
}

/// feedback_censored: T = 1 with A_0 -> L_1 -> A_1 -> Y feedback and
/// informative censoring after each time.
inline ReferenceDgp dgp_feedback_censored() {
    using detail::gaussian;
    StructuralModel m;
    m.name = "feedback_censored";
    m.exposure_names = {"A1", "A2"};
    m.seed = 4;
    TimeSlice s0, s1;
    s0.covariate_names = {"L1"};
    s0.covariates = {gaussian(0.0)};
    auto a0_1 = gaussian(0.0);
    a0_1.add(0.5, {Factor::value(VarRef::L(0, 0))});
    auto a0_2 = gaussian(0.0);
    a0_2.add(0.3, {Factor::value(VarRef::L(0, 0))}).add(0.3, {Factor::value(VarRef::A(0, 0))});
    s0.exposures = {a0_1, a0_2};
    auto c1 = detail::logistic(2.5);
    c1.add(0.3, {Factor::value(VarRef::L(0, 0))}).add(-0.3, {Factor::value(VarRef::A(0, 0))});
    s0.censoring = c1;

    s1.covariate_names = {"L1"};
    auto l1 = gaussian(0.0);
    l1.add(0.5, {Factor::value(VarRef::L(0, 0))})
        .add(0.4, {Factor::value(VarRef::A(0, 0))})
        .add(0.2, {Factor::value(VarRef::A(0, 1))});
    s1.covariates = {l1};
    auto a1_1 = gaussian(0.0);
    a1_1.add(0.5, {Factor::value(VarRef::L(1, 0))}).add(0.3, {Factor::value(VarRef::A(0, 0))});
    auto a1_2 = gaussian(0.0);
    a1_2.add(0.3, {Factor::value(VarRef::L(1, 0))}).add(0.3, {Factor::value(VarRef::A(0, 1))});
    s1.exposures = {a1_1, a1_2};
    auto c2 = detail::logistic(2.5);
    c2.add(0.3, {Factor::value(VarRef::L(1, 0))}).add(-0.2, {Factor::value(VarRef::A(1, 0))});
    s1.censoring = c2;
    m.times = {s0, s1};

    m.outcome = gaussian(1.0);
    m.outcome.add(0.5, {Factor::value(VarRef::L(0, 0))})
        .add(0.5, {Factor::value(VarRef::L(1, 0))})
        .add(1.0, {Factor::value(VarRef::A(0, 0))})
        .add(0.5, {Factor::value(VarRef::A(0, 1))})
        .add(1.0, {Factor::value(VarRef::A(1, 0))})
        .add(0.5, {Factor::value(VarRef::A(1, 1))});
    return {"feedback_censored", "two times, exposure-confounder feedback, informative censoring", m,
            {ShiftPolicy::uniform("plus0.5", 2, 2, ComponentShift::additive(0.5)),
             ShiftPolicy::uniform("times0.8", 2, 2, ComponentShift::multiplicative(0.8))},
            std::nullopt};
}

/// mixture7: T = 1, seven right-skewed (lognormal) components. A1..A5 share a
/// common log-scale factor (strong correlation), A6 and A7 are nearly
/// independent. Binary Y with harmful (positive) log-exposure coefficients.
inline ReferenceDgp dgp_mixture7() {
    using detail::gaussian;
    StructuralModel m;
    m.name = "mixture7";
    m.exposure_names = {"A1", "A2", "A3", "A4", "A5", "A6", "A7"};
    m.seed = 5;
    const auto block = [](int t) {
        std::vector<Equation> eqs;
        for (int j = 0; j < 7; ++j) {
            Equation e;
            e.link = Equation::Link::exp;
            e.intercept = 0.5 + 0.1 * j;
            e.add(0.3, {Factor::value(VarRef::L(t, 0))});
            if (t == 1) e.add(0.4, {Factor::log(VarRef::A(0, j))});
            if (j == 0) {
                e.noise_sd = 0.8;
            } else if (j < 5) {
                e.add(0.8, {Factor::log(VarRef::A(t, 0))});
                e.intercept -= 0.4;
                e.noise_sd = 0.5;
            } else {
                e.add(0.1, {Factor::log(VarRef::A(t, 0))});
                e.noise_sd = 0.7;
            }
            eqs.push_back(e);
        }
        return eqs;
    };
    TimeSlice s0, s1;
    s0.covariate_names = {"L1", "L2"};
    Equation l2;
    l2.link = Equation::Link::bernoulli_logit;
    s0.covariates = {gaussian(0.0), l2};
    s0.exposures = block(0);
    auto c1 = detail::logistic(3.0);
    c1.add(0.2, {Factor::value(VarRef::L(0, 0))});
    s0.censoring = c1;
    s1.covariate_names = {"L1"};
    auto l11 = gaussian(0.0);
    l11.add(0.6, {Factor::value(VarRef::L(0, 0))}).add(0.1, {Factor::log(VarRef::A(0, 0))});
    s1.covariates = {l11};
    s1.exposures = block(1);
    m.times = {s0, s1};
    m.outcome = detail::logistic(-1.5);
    m.outcome.add(0.3, {Factor::value(VarRef::L(0, 0))}).add(0.2, {Factor::value(VarRef::L(0, 1))});
    for (int t = 0; t < 2; ++t)
        for (int j = 0; j < 7; ++j) m.outcome.add(j == 5 || j == 6 ? 0.15 : 0.05, {Factor::log(VarRef::A(t, j))});
    return {"mixture7", "two times, seven correlated lognormal components, binary outcome", m,
            {ShiftPolicy::uniform("reduce20", 2, 7, ComponentShift::multiplicative(0.8))}, std::nullopt};
}

/// heterogeneous: single time; shifting A1 changes Y only when A2 >= 1.
inline ReferenceDgp dgp_heterogeneous() {
    using detail::gaussian;
    constexpr double cutoff = 1.0;
    StructuralModel m;
    m.name = "heterogeneous";
    m.exposure_names = {"A1", "A2"};
    m.seed = 6;
    TimeSlice s;
    s.covariate_names = {"L1"};
    s.covariates = {gaussian(0.0)};
    auto a1 = gaussian(0.0);
    a1.add(0.3, {Factor::value(VarRef::L(0, 0))});
    auto a2 = gaussian(0.0);
    a2.add(0.3, {Factor::value(VarRef::L(0, 0))});
    s.exposures = {a1, a2};
    m.times = {s};
    m.outcome = gaussian(0.0);
    m.outcome.add(1.0, {Factor::value(VarRef::L(0, 0))})
        .add(0.5, {Factor::value(VarRef::A(0, 1))})
        .add(2.0, {Factor::value(VarRef::A(0, 0)), Factor::indicator(VarRef::A(0, 1), cutoff)});
    return {"heterogeneous", "single time, effect of A1 only where A2 >= 1", m,
            {ShiftPolicy::on_components("A1_plus1", 1, 2, {0}, ComponentShift::additive(1.0))}, cutoff};
}

inline std::vector<ReferenceDgp> reference_dgps() {
    return {dgp_linear_single(), dgp_interaction_single(), dgp_additive_null(),
            dgp_feedback_censored(), dgp_mixture7(), dgp_heterogeneous()};
}

inline ReferenceDgp reference_dgp(const std::string& name) {
    for (auto& d : reference_dgps())
        if (d.name == name) return d;
    throw ConfigError("unknown reference DGP '" + name + "'");
}

}  // namespace mixshift
