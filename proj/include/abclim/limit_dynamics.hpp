#pragma once

// Infinite-width SGD dynamics of the muP MLP, written once over a backend
// that represents Z random variables either as particle samples or as exact
// Gaussian polynomials.
//
// Families: vectors in the x-family (U, h, x, dx, dh) get Gaussian parts
// from W^T dhbar; the dhbar-family (nV, hbar, xbar, dhbar) gets them from
// W x. Tangents of x-family values are taken w.r.t. the W^T dhbar labels and
// tangents of dhbar-family values w.r.t. the W x labels; these feed the
// transpose-correction (Zdot) terms in coupled mode.

#include "abclim/activation.hpp"
#include "abclim/gauss_history.hpp"
#include "abclim/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace abclim {

enum class LimitDepth { shallow, decoupled, coupled };

LimitDepth parse_depth(const std::string& s);
std::string depth_name(LimitDepth d);

struct LimitConfig {
    LimitDepth depth = LimitDepth::shallow;
    Activation act;
    Loss loss = Loss::mse;
    double eta = 1.0;
    std::vector<double> probes;  // scalar inputs evaluated every step
    GaussianHistory::Options history;
};

struct LimitRow {
    int t = 0;
    double xi = 0.0, y = 0.0;
    double f = 0.0, f_stderr = 0.0;
    double loss = 0.0, chi = 0.0;
    std::vector<double> probe_f, probe_stderr;
};

struct Estimate {
    double mean = 0.0;
    double stderr = 0.0;
};

// Inputs evaluated in one step: the training input first, then each probe
// that differs from it.
inline std::vector<double> step_inputs(double xi, const std::vector<double>& probes) {
    std::vector<double> inputs{xi};
    for (double p : probes)
        if (std::find(inputs.begin(), inputs.end(), p) == inputs.end()) inputs.push_back(p);
    return inputs;
}

template <class Backend>
class LimitDynamics {
public:
    using Field = typename Backend::Field;

    struct Dual {
        Field val;
        std::vector<Field> tan;
    };

    LimitDynamics(Backend& backend, LimitConfig cfg)
        : b_(backend), cfg_(std::move(cfg)) {
        if (cfg_.depth != LimitDepth::shallow && cfg_.loss == Loss::softmax)
            throw std::invalid_argument("scalar-output limits support mse and logistic losses");
        U_.val = b_.base(0);
        nV_.val = b_.base(1);
        hist_fwd_ = GaussianHistory(cfg_.history);
        hist_bwd_ = GaussianHistory(cfg_.history);
    }

    // Forward pass on xi (and all probes), loss, backward and update.
    LimitRow step(double xi, double y) { return advance(xi, y, true); }
    // Forward pass only; use for the final recorded row.
    LimitRow observe(double xi, double y) { return advance(xi, y, false); }

    int t() const { return t_; }
    const Dual& U() const { return U_; }
    const Dual& nV() const { return nV_; }
    const GaussianHistory& hist_fwd() const { return hist_fwd_; }
    const GaussianHistory& hist_bwd() const { return hist_bwd_; }

    // Values kept for inspection from the last processed step.
    struct Last {
        Dual h, x, hbar, xbar, dhbar, dx, dh;
        std::vector<double> theta;        // forward Zdot coefficients of the training input
        std::vector<double> theta_back;   // backward Zdot coefficients
    };
    const Last& last() const { return last_; }

    struct FwdLabel {
        int t;
        double xi;
        Dual x;
    };
    const std::vector<FwdLabel>& fwd_labels() const { return fwd_; }
    const std::vector<Dual>& bwd_labels() const { return bwd_; }

private:
    bool coupled() const { return cfg_.depth == LimitDepth::coupled; }

    // ---- dual arithmetic; missing tangent entries are zero
    Dual lin(double sa, const Dual& a, double sb, const Dual& c) const {
        Dual out;
        out.val = b_.lin(sa, a.val, sb, c.val);
        const std::size_t n = std::max(a.tan.size(), c.tan.size());
        out.tan.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Field* ta = i < a.tan.size() ? &a.tan[i] : nullptr;
            const Field* tc = i < c.tan.size() ? &c.tan[i] : nullptr;
            if (ta && tc)
                out.tan[i] = b_.lin(sa, *ta, sb, *tc);
            else if (ta)
                out.tan[i] = b_.scale(sa, *ta);
            else if (tc)
                out.tan[i] = b_.scale(sb, *tc);
        }
        return out;
    }

    Dual scale(double s, const Dual& a) const {
        Dual out;
        out.val = b_.scale(s, a.val);
        for (const auto& t : a.tan) out.tan.push_back(b_.scale(s, t));
        return out;
    }

    Dual mul(const Dual& a, const Dual& c) const {
        Dual out;
        out.val = b_.mul(a.val, c.val);
        const std::size_t n = std::max(a.tan.size(), c.tan.size());
        out.tan.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            Field acc;
            if (i < a.tan.size() && !b_.is_zero(a.tan[i])) acc = b_.mul(a.tan[i], c.val);
            if (i < c.tan.size() && !b_.is_zero(c.tan[i])) acc = b_.lin(1.0, acc, 1.0, b_.mul(a.val, c.tan[i]));
            out.tan[i] = std::move(acc);
        }
        return out;
    }

    Dual act(const Dual& a, int order) const {
        Dual out;
        out.val = b_.act(a.val, cfg_.act, order);
        bool any = false;
        for (const auto& t : a.tan) any = any || !b_.is_zero(t);
        if (!any) return out;
        const Field g = b_.act(a.val, cfg_.act, order + 1);
        out.tan.resize(a.tan.size());
        for (std::size_t i = 0; i < a.tan.size(); ++i)
            if (!b_.is_zero(a.tan[i])) out.tan[i] = b_.mul(g, a.tan[i]);
        return out;
    }

    double tangent_mean(const Dual& a, std::size_t i) const {
        if (i >= a.tan.size() || b_.is_zero(a.tan[i])) return 0.0;
        return b_.mean(a.tan[i]);
    }

    Dual seeded(Field val, std::size_t index) const {
        Dual d;
        d.val = std::move(val);
        if (coupled()) {
            d.tan.resize(index + 1);
            d.tan[index] = b_.ones();
        }
        return d;
    }

    // ---- one training step
    LimitRow advance(double xi, double y, bool update) {
        LimitRow row;
        row.t = t_;
        row.xi = xi;
        row.y = y;

        const std::vector<double> inputs = step_inputs(xi, cfg_.probes);

        std::vector<Estimate> outs(inputs.size());
        Dual h_train, x_train, hbar_train, xbar_train;

        for (std::size_t k = 0; k < inputs.size(); ++k) {
            const double z = inputs[k];
            Dual h = scale(z, U_);
            Dual x = act(h, 0);
            if (cfg_.depth == LimitDepth::shallow) {
                outs[k] = b_.output(nV_.val, x.val);
                if (k == 0) {
                    h_train = std::move(h);
                    x_train = std::move(x);
                }
                continue;
            }
            // Gaussian part of W x_t(z)
            std::vector<const Field*> others;
            for (const auto& lab : fwd_) others.push_back(&lab.x.val);
            std::vector<double> cov_row = b_.cov_row(x.val, others);
            const double var = cov_row.back();
            cov_row.pop_back();
            const auto idx = fwd_.size();
            Field zhat = b_.gauss_extend(0, hist_fwd_, "Wx_" + std::to_string(t_) + "(" + std::to_string(z) + ")",
                                         cov_row, var);
            Dual hbar = seeded(std::move(zhat), idx);

            std::vector<double> theta;
            if (coupled()) {
                for (std::size_t r = 0; r < bwd_.size(); ++r) {
                    const double th = tangent_mean(x, r);
                    theta.push_back(th);
                    if (th != 0.0) hbar = lin(1.0, hbar, th, bwd_[r]);
                }
            }
            for (int s = 0; s < t_; ++s) {
                const double c = chi_eta_[static_cast<std::size_t>(s)] *
                                 cov_row[train_label_[static_cast<std::size_t>(s)]];
                if (c != 0.0) hbar = lin(1.0, hbar, -c, bwd_[static_cast<std::size_t>(s)]);
            }
            Dual xbar = act(hbar, 0);
            outs[k] = b_.output(nV_.val, xbar.val);

            fwd_.push_back({t_, z, x});
            if (k == 0) {
                train_label_.push_back(idx);
                h_train = std::move(h);
                x_train = std::move(x);
                hbar_train = std::move(hbar);
                xbar_train = std::move(xbar);
                last_.theta = std::move(theta);
            }
        }

        row.f = outs[0].mean;
        row.f_stderr = outs[0].stderr;
        for (double p : cfg_.probes) {
            const auto k = static_cast<std::size_t>(std::find(inputs.begin(), inputs.end(), p) - inputs.begin());
            row.probe_f.push_back(outs[k].mean);
            row.probe_stderr.push_back(outs[k].stderr);
        }
        row.loss = loss_value(cfg_.loss, row.f, y);
        row.chi = loss_deriv(cfg_.loss, row.f, y);

        last_.h = h_train;
        last_.x = x_train;
        last_.hbar = hbar_train;
        last_.xbar = xbar_train;
        if (!update) return row;

        const double ce = cfg_.eta * row.chi;
        if (cfg_.depth == LimitDepth::shallow) {
            Dual dh = mul(act(h_train, 1), nV_);
            nV_ = lin(1.0, nV_, -ce, x_train);
            U_ = lin(1.0, U_, -ce * xi, dh);
            last_.dh = std::move(dh);
            ++t_;
            return row;
        }

        Dual dhbar = mul(act(hbar_train, 1), nV_);
        std::vector<const Field*> others;
        for (const auto& d : bwd_) others.push_back(&d.val);
        std::vector<double> cov_row = b_.cov_row(dhbar.val, others);
        const double var = cov_row.back();
        cov_row.pop_back();
        const auto idx = bwd_.size();
        Field zb = b_.gauss_extend(1, hist_bwd_, "WTdhbar_" + std::to_string(t_), cov_row, var);
        bwd_.push_back(dhbar);
        Dual dx = seeded(std::move(zb), idx);

        last_.theta_back.clear();
        if (coupled()) {
            // every W x label so far, including this step's
            for (std::size_t r = 0; r < fwd_.size(); ++r) {
                const double th = tangent_mean(dhbar, r);
                last_.theta_back.push_back(th);
                if (th != 0.0) dx = lin(1.0, dx, th, fwd_[r].x);
            }
        }
        for (int s = 0; s < t_; ++s) {
            const double c = chi_eta_[static_cast<std::size_t>(s)] * cov_row[static_cast<std::size_t>(s)];
            if (c != 0.0) dx = lin(1.0, dx, -c, fwd_[train_label_[static_cast<std::size_t>(s)]].x);
        }
        Dual dh = mul(act(h_train, 1), dx);

        nV_ = lin(1.0, nV_, -ce, xbar_train);
        U_ = lin(1.0, U_, -ce * xi, dh);
        chi_eta_.push_back(ce);
        last_.dhbar = std::move(dhbar);
        last_.dx = std::move(dx);
        last_.dh = std::move(dh);
        ++t_;
        return row;
    }

    Backend& b_;
    LimitConfig cfg_;
    int t_ = 0;
    Dual U_, nV_;
    GaussianHistory hist_fwd_, hist_bwd_;
    std::vector<FwdLabel> fwd_;
    std::vector<Dual> bwd_;                // dhbar_s
    std::vector<std::size_t> train_label_; // fwd_ index of x_s(xi_s)
    std::vector<double> chi_eta_;          // eta * chi_s
    Last last_;
};

}  // namespace abclim
