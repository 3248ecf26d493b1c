#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "eoslab/landscape.hpp"

namespace eoslab {

// Single-hidden-layer tanh network trained against a frozen random teacher
// of the same architecture, with mean squared error over a synthetic
// dataset. Dataset and teacher are fully determined by (spec, seed).
//
// Parameter packing (flat vector): W1 row-major (hidden x input), b1,
// W2 row-major (output x hidden), b2.
struct MlpSpec {
    int input_dim = 8;
    int hidden_dim = 32;
    int output_dim = 1;
    int n_samples = 256;
    std::uint64_t seed = 1234;
    double fd_hvp_scale = 1e-4;    // hvp step: fd_hvp_scale * (1 + ||theta||)
    double fd_third_scale = 1e-3;  // third_form step, one derivative order noisier

    int dim() const {
        return hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim;
    }
};

class TeacherStudentMlp final : public Landscape {
public:
    explicit TeacherStudentMlp(const MlpSpec& spec) : spec_(spec) {
        if (spec.input_dim < 1 || spec.hidden_dim < 1 || spec.output_dim < 1)
            throw Error("MlpSpec: widths must be positive");
        if (spec.n_samples < 1) throw Error("MlpSpec: n_samples must be >= 1");
        if (spec.dim() > 5000) throw Error("MlpSpec: parameter dimension exceeds desk scale (5000)");

        RngStream teacher_rng(spec.seed, 0);
        teacher_ = random_params(teacher_rng);
        RngStream data_rng(spec.seed, 1);
        inputs_.resize(std::size_t(spec.n_samples) * spec.input_dim);
        for (double& v : inputs_) v = data_rng.next_normal();
        targets_.resize(std::size_t(spec.n_samples) * spec.output_dim);
        std::vector<double> out(spec.output_dim), hidden(spec.hidden_dim);
        for (int i = 0; i < spec.n_samples; ++i) {
            forward(teacher_, sample_input(i), hidden, out);
            for (int k = 0; k < spec.output_dim; ++k)
                targets_[std::size_t(i) * spec.output_dim + k] = out[k];
        }
    }

    const MlpSpec& spec() const { return spec_; }
    const Vec& teacher_params() const { return teacher_; }

    // fan-in scaled Gaussian init, biases zero; also used for student starts
    Vec random_params(RngStream& rng) const {
        Vec p(std::size_t(spec_.dim()), 0.0);
        const double s1 = 1.0 / std::sqrt(double(spec_.input_dim));
        const double s2 = 1.0 / std::sqrt(double(spec_.hidden_dim));
        int at = 0;
        for (int i = 0; i < spec_.hidden_dim * spec_.input_dim; ++i) p[at++] = s1 * rng.next_normal();
        at += spec_.hidden_dim;  // b1 = 0
        for (int i = 0; i < spec_.output_dim * spec_.hidden_dim; ++i) p[at++] = s2 * rng.next_normal();
        return p;
    }

    int dim() const override { return spec_.dim(); }
    int n_samples() const override { return spec_.n_samples; }

    double loss(const Vec& theta) const override {
        check_point(theta, "mlp loss");
        double acc = 0.0;
        std::vector<double> hidden(spec_.hidden_dim), out(spec_.output_dim);
        for (int i = 0; i < spec_.n_samples; ++i) {
            forward(theta, sample_input(i), hidden, out);
            for (int k = 0; k < spec_.output_dim; ++k) {
                double e = out[k] - targets_[std::size_t(i) * spec_.output_dim + k];
                acc += 0.5 * e * e;
            }
        }
        return checked_loss_value(acc / double(spec_.n_samples), theta, "mlp loss");
    }

    Vec grad(const Vec& theta) const override {
        check_point(theta, "mlp grad");
        Vec g = zeros(std::size_t(dim()));
        const double w = 1.0 / double(spec_.n_samples);
        for (int i = 0; i < spec_.n_samples; ++i) accumulate_sample_grad(theta, i, w, g);
        return g;
    }

    Vec sample_grad(const Vec& theta, int i) const override {
        check_point(theta, "mlp sample_grad");
        Vec g = zeros(std::size_t(dim()));
        accumulate_sample_grad(theta, i, 1.0, g);
        return g;
    }

    Vec hvp(const Vec& theta, const Vec& v) const override {
        return fd_hvp(theta, v, {});
    }

    Vec batch_hvp(const Vec& theta, const Vec& v, std::span<const int> batch) const override {
        return fd_hvp(theta, v, batch);
    }

    // Central difference of the directional curvature c(theta) = u^T H(theta) u,
    // coordinate by coordinate, with u held fixed across the probe. (The
    // alternative of re-centering u at each displaced point is deliberately
    // not done here.)
    Vec third_form(const Vec& theta, const Vec& u) const override {
        check_point(theta, "mlp third_form");
        require_same_dim(theta, u, "mlp third_form");
        const double eps = fd_step(spec_.fd_third_scale, theta, "mlp third_form");
        Vec out = zeros(std::size_t(dim()));
        Vec probe = theta;
        for (int i = 0; i < dim(); ++i) {
            const double orig = probe[i];
            probe[i] = orig + eps;
            double cp = dot(u, hvp(probe, u));
            probe[i] = orig - eps;
            double cm = dot(u, hvp(probe, u));
            probe[i] = orig;
            out[i] = (cp - cm) / (2.0 * eps);
        }
        return out;
    }

    Deriv hvp_kind() const override { return Deriv::finite_difference; }
    Deriv third_form_kind() const override { return Deriv::finite_difference; }

private:
    const double* sample_input(int i) const {
        return inputs_.data() + std::size_t(i) * spec_.input_dim;
    }

    void forward(const Vec& p, const double* x, std::vector<double>& hidden,
                 std::vector<double>& out) const {
        const int in = spec_.input_dim, hd = spec_.hidden_dim, od = spec_.output_dim;
        const double* W1 = p.data();
        const double* b1 = W1 + std::size_t(hd) * in;
        const double* W2 = b1 + hd;
        const double* b2 = W2 + std::size_t(od) * hd;
        for (int j = 0; j < hd; ++j) {
            double z = b1[j];
            const double* row = W1 + std::size_t(j) * in;
            for (int k = 0; k < in; ++k) z += row[k] * x[k];
            hidden[j] = std::tanh(z);
        }
        for (int o = 0; o < od; ++o) {
            double z = b2[o];
            const double* row = W2 + std::size_t(o) * hd;
            for (int j = 0; j < hd; ++j) z += row[j] * hidden[j];
            out[o] = z;
        }
    }

    void accumulate_sample_grad(const Vec& p, int i, double weight, Vec& g) const {
        const int in = spec_.input_dim, hd = spec_.hidden_dim, od = spec_.output_dim;
        const double* x = sample_input(i);
        std::vector<double> hidden(hd), out(od);
        forward(p, x, hidden, out);

        const double* W2 = p.data() + std::size_t(hd) * in + hd;
        double* gW1 = g.data();
        double* gb1 = gW1 + std::size_t(hd) * in;
        double* gW2 = gb1 + hd;
        double* gb2 = gW2 + std::size_t(od) * hd;

        std::vector<double> dout(od);
        for (int o = 0; o < od; ++o)
            dout[o] = weight * (out[o] - targets_[std::size_t(i) * od + o]);
        std::vector<double> dhidden(hd, 0.0);
        for (int o = 0; o < od; ++o) {
            const double* row = W2 + std::size_t(o) * hd;
            double* grow = gW2 + std::size_t(o) * hd;
            for (int j = 0; j < hd; ++j) {
                grow[j] += dout[o] * hidden[j];
                dhidden[j] += dout[o] * row[j];
            }
            gb2[o] += dout[o];
        }
        for (int j = 0; j < hd; ++j) {
            double dz = dhidden[j] * (1.0 - hidden[j] * hidden[j]);
            double* grow = gW1 + std::size_t(j) * in;
            for (int k = 0; k < in; ++k) grow[k] += dz * x[k];
            gb1[j] += dz;
        }
    }

    Vec batch_grad_at(const Vec& theta, std::span<const int> batch) const {
        if (batch.empty()) return grad(theta);
        Vec g = zeros(std::size_t(dim()));
        const double w = 1.0 / double(batch.size());
        for (int i : batch) accumulate_sample_grad(theta, i, w, g);
        return g;
    }

    double fd_step(double scale, const Vec& theta, const char* where) const {
        const double eps = scale * (1.0 + norm2(theta));
        if (!(eps > 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + norm2(theta))))
            throw Error(std::string(where) +
                        ": finite-difference step underflows at this scale; rescale the problem");
        return eps;
    }

    Vec fd_hvp(const Vec& theta, const Vec& v, std::span<const int> batch) const {
        check_point(theta, "mlp hvp");
        require_same_dim(theta, v, "mlp hvp");
        const double vn = norm2(v);
        if (vn == 0.0) throw Error("mlp hvp: zero direction");
        const double eps = fd_step(spec_.fd_hvp_scale, theta, "mlp hvp");
        Vec plus = theta, minus = theta;
        for (int k = 0; k < dim(); ++k) {
            double d = eps * v[k] / vn;
            plus[k] += d;
            minus[k] -= d;
        }
        Vec gp = batch_grad_at(plus, batch);
        Vec gm = batch_grad_at(minus, batch);
        Vec r = zeros(std::size_t(dim()));
        const double s = vn / (2.0 * eps);
        for (int k = 0; k < dim(); ++k) r[k] = s * (gp[k] - gm[k]);
        return r;
    }

    MlpSpec spec_;
    Vec teacher_;
    std::vector<double> inputs_;
    std::vector<double> targets_;
};

inline std::shared_ptr<TeacherStudentMlp> make_mlp(const MlpSpec& spec) {
    return std::make_shared<TeacherStudentMlp>(spec);
}

} // namespace eoslab
