#include "ampf/quantile_net.hpp"

#include "ampf/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ampf {

namespace {

struct LayerOffsets {
    std::size_t wz, wr, wn, uz, ur, un, bz, br, bn, end;
};

LayerOffsets layer_offsets(std::size_t base, std::size_t in, std::size_t hid) {
    LayerOffsets o{};
    std::size_t p = base;
    o.wz = p, p += hid * in;
    o.wr = p, p += hid * in;
    o.wn = p, p += hid * in;
    o.uz = p, p += hid * hid;
    o.ur = p, p += hid * hid;
    o.un = p, p += hid * hid;
    o.bz = p, p += hid;
    o.br = p, p += hid;
    o.bn = p, p += hid;
    o.end = p;
    return o;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// z = sigmoid(Wz x + Uz h + bz); r likewise; n = tanh(Wn x + Un (r*h) + bn);
// h' = (1-z)*n + z*h
void gru_forward(const double* P, const LayerOffsets& o, std::size_t in, std::size_t hid,
                 const double* x, const double* hprev, double* z, double* r, double* n,
                 double* h) {
    for (std::size_t i = 0; i < hid; ++i) {
        double az = P[o.bz + i];
        double ar = P[o.br + i];
        const double* wz = P + o.wz + i * in;
        const double* wr = P + o.wr + i * in;
        for (std::size_t j = 0; j < in; ++j) {
            az += wz[j] * x[j];
            ar += wr[j] * x[j];
        }
        const double* uz = P + o.uz + i * hid;
        const double* ur = P + o.ur + i * hid;
        for (std::size_t u = 0; u < hid; ++u) {
            az += uz[u] * hprev[u];
            ar += ur[u] * hprev[u];
        }
        z[i] = sigmoid(az);
        r[i] = sigmoid(ar);
    }
    for (std::size_t i = 0; i < hid; ++i) {
        double an = P[o.bn + i];
        const double* wn = P + o.wn + i * in;
        for (std::size_t j = 0; j < in; ++j) an += wn[j] * x[j];
        const double* un = P + o.un + i * hid;
        for (std::size_t u = 0; u < hid; ++u) an += un[u] * (r[u] * hprev[u]);
        n[i] = std::tanh(an);
        h[i] = (1.0 - z[i]) * n[i] + z[i] * hprev[i];
    }
}

void gru_backward(const double* P, const LayerOffsets& o, double* G, std::size_t in,
                  std::size_t hid, const double* x, const double* hprev, const double* z,
                  const double* r, const double* n, const double* dh, double* dx,
                  double* dhprev, double* daz, double* dar, double* dan, double* cbuf) {
    for (std::size_t u = 0; u < hid; ++u) {
        const double dz = dh[u] * (hprev[u] - n[u]);
        const double dn = dh[u] * (1.0 - z[u]);
        dhprev[u] = dh[u] * z[u];
        dan[u] = dn * (1.0 - n[u] * n[u]);
        daz[u] = dz * z[u] * (1.0 - z[u]);
        cbuf[u] = 0.0;
    }
    for (std::size_t i = 0; i < hid; ++i) {
        const double* un = P + o.un + i * hid;
        const double a = dan[i];
        for (std::size_t u = 0; u < hid; ++u) cbuf[u] += un[u] * a;
    }
    for (std::size_t u = 0; u < hid; ++u) {
        dar[u] = cbuf[u] * hprev[u] * r[u] * (1.0 - r[u]);
        dhprev[u] += cbuf[u] * r[u];
    }
    for (std::size_t i = 0; i < hid; ++i) {
        const double* uz = P + o.uz + i * hid;
        const double* ur = P + o.ur + i * hid;
        const double az = daz[i];
        const double ar = dar[i];
        for (std::size_t u = 0; u < hid; ++u) dhprev[u] += uz[u] * az + ur[u] * ar;
    }
    for (std::size_t i = 0; i < hid; ++i) {
        G[o.bz + i] += daz[i];
        G[o.br + i] += dar[i];
        G[o.bn + i] += dan[i];
        double* gwz = G + o.wz + i * in;
        double* gwr = G + o.wr + i * in;
        double* gwn = G + o.wn + i * in;
        for (std::size_t j = 0; j < in; ++j) {
            gwz[j] += daz[i] * x[j];
            gwr[j] += dar[i] * x[j];
            gwn[j] += dan[i] * x[j];
        }
        double* guz = G + o.uz + i * hid;
        double* gur = G + o.ur + i * hid;
        double* gun = G + o.un + i * hid;
        for (std::size_t u = 0; u < hid; ++u) {
            guz[u] += daz[i] * hprev[u];
            gur[u] += dar[i] * hprev[u];
            gun[u] += dan[i] * (r[u] * hprev[u]);
        }
    }
    std::fill(dx, dx + in, 0.0);
    for (std::size_t i = 0; i < hid; ++i) {
        const double* wz = P + o.wz + i * in;
        const double* wr = P + o.wr + i * in;
        const double* wn = P + o.wn + i * in;
        const double az = daz[i];
        const double ar = dar[i];
        const double an = dan[i];
        for (std::size_t j = 0; j < in; ++j) dx[j] += wz[j] * az + wr[j] * ar + wn[j] * an;
    }
}

inline double pinball(double y, double yhat, double rho) {
    const double under = y - yhat;
    return under >= 0.0 ? rho * under : (rho - 1.0) * under;
}

// d pinball / d yhat with the subgradient 0 at the kink
inline double pinball_dyhat(double y, double yhat, double rho) {
    if (y > yhat) return -rho;
    if (y < yhat) return 1.0 - rho;
    return 0.0;
}

} // namespace

std::size_t NetShape::param_count() const {
    const std::size_t gru1 = 3 * hidden_dim * input_dim + 3 * hidden_dim * hidden_dim +
                             3 * hidden_dim;
    const std::size_t gru2 = 6 * hidden_dim * hidden_dim + 3 * hidden_dim;
    const std::size_t head = output_dim() * hidden_dim + output_dim();
    return gru1 + gru2 + head;
}

QuantileNet::QuantileNet(NetShape shape) : shape_(shape) {
    if (shape_.input_dim == 0 || shape_.metric_dim == 0 || shape_.hidden_dim == 0 ||
        shape_.quantile_dim == 0 || shape_.metric_dim > shape_.input_dim ||
        shape_.median_index >= shape_.quantile_dim)
        throw ConfigError("invalid network shape");
    params_.assign(shape_.param_count(), 0.0);
}

void QuantileNet::init_params(Rng& rng) {
    const std::size_t I = shape_.input_dim, H = shape_.hidden_dim, O = shape_.output_dim();
    const LayerOffsets o1 = layer_offsets(0, I, H);
    const LayerOffsets o2 = layer_offsets(o1.end, H, H);
    struct Block {
        std::size_t off, count, fan_in;
    };
    const Block blocks[] = {
        {o1.wz, H * I, I}, {o1.wr, H * I, I}, {o1.wn, H * I, I},
        {o1.uz, H * H, H}, {o1.ur, H * H, H}, {o1.un, H * H, H},
        {o1.bz, H, H},     {o1.br, H, H},     {o1.bn, H, H},
        {o2.wz, H * H, H}, {o2.wr, H * H, H}, {o2.wn, H * H, H},
        {o2.uz, H * H, H}, {o2.ur, H * H, H}, {o2.un, H * H, H},
        {o2.bz, H, H},     {o2.br, H, H},     {o2.bn, H, H},
        {o2.end, O * H, H}, {o2.end + O * H, O, H},
    };
    for (const Block& b : blocks) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
        for (std::size_t i = 0; i < b.count; ++i)
            params_[b.off + i] = rng.uniform(-bound, bound);
    }
}

struct QuantileNet::Forward {
    std::size_t steps = 0;
    std::vector<double> x;                  // steps x input_dim
    std::vector<double> z1, r1, n1, h1;     // steps x H
    std::vector<double> in2;                // steps x H, layer-2 input after dropout
    std::vector<double> z2, r2, n2, h2;     // steps x H
    std::vector<double> out;                // K x output_dim, raw head outputs
};

void QuantileNet::run_forward(Forward& f, const double* enc, std::size_t L,
                              const double* dec_cov, std::size_t K,
                              const double* dropout_scale) const {
    const std::size_t I = shape_.input_dim, H = shape_.hidden_dim, d = shape_.metric_dim;
    const std::size_t P = shape_.quantile_dim, O = shape_.output_dim(), F = I - d;
    const std::size_t S = L + K - 1;
    f.steps = S;
    f.x.assign(S * I, 0.0);
    std::copy(enc, enc + L * I, f.x.begin());
    f.z1.assign(S * H, 0.0);
    f.r1.assign(S * H, 0.0);
    f.n1.assign(S * H, 0.0);
    f.h1.assign(S * H, 0.0);
    f.in2.assign(S * H, 0.0);
    f.z2.assign(S * H, 0.0);
    f.r2.assign(S * H, 0.0);
    f.n2.assign(S * H, 0.0);
    f.h2.assign(S * H, 0.0);
    f.out.assign(K * O, 0.0);

    const double* p = params_.data();
    const LayerOffsets o1 = layer_offsets(0, I, H);
    const LayerOffsets o2 = layer_offsets(o1.end, H, H);
    const double* head_w = p + o2.end;
    const double* head_b = p + o2.end + O * H;

    const std::vector<double> zeros(H, 0.0);
    const double* h1prev = zeros.data();
    const double* h2prev = zeros.data();
    for (std::size_t s = 0; s < S; ++s) {
        double* z1 = f.z1.data() + s * H;
        double* r1 = f.r1.data() + s * H;
        double* n1 = f.n1.data() + s * H;
        double* h1 = f.h1.data() + s * H;
        gru_forward(p, o1, I, H, f.x.data() + s * I, h1prev, z1, r1, n1, h1);
        double* in2 = f.in2.data() + s * H;
        if (dropout_scale) {
            for (std::size_t u = 0; u < H; ++u) in2[u] = h1[u] * dropout_scale[u];
        } else {
            std::copy(h1, h1 + H, in2);
        }
        double* z2 = f.z2.data() + s * H;
        double* r2 = f.r2.data() + s * H;
        double* n2 = f.n2.data() + s * H;
        double* h2 = f.h2.data() + s * H;
        gru_forward(p, o2, H, H, in2, h2prev, z2, r2, n2, h2);
        h1prev = h1;
        h2prev = h2;

        if (s + 1 >= L) {
            const std::size_t j = s + 1 - L;
            double* out = f.out.data() + j * O;
            for (std::size_t i = 0; i < O; ++i) {
                double acc = head_b[i];
                const double* w = head_w + i * H;
                for (std::size_t u = 0; u < H; ++u) acc += w[u] * h2[u];
                out[i] = acc;
            }
            if (j + 1 < K) {
                double* xn = f.x.data() + (s + 1) * I;
                for (std::size_t m = 0; m < d; ++m) xn[m] = out[m * P + shape_.median_index];
                const double* cov = dec_cov + j * F;
                for (std::size_t c = 0; c < F; ++c) xn[d + c] = cov[c];
            }
        }
    }
}

std::vector<double> QuantileNet::forecast(const double* enc, std::size_t L,
                                          const double* dec_cov, std::size_t K) const {
    Forward f;
    run_forward(f, enc, L, dec_cov, K, nullptr);
    return std::move(f.out);
}

namespace {

double mean_pinball(const std::vector<double>& out, const double* targets, std::size_t K,
                    std::size_t d, const std::vector<double>& quantiles) {
    const std::size_t P = quantiles.size();
    double loss = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
        const double* o = out.data() + j * d * P;
        const double* t = targets + j * d;
        for (std::size_t m = 0; m < d; ++m)
            for (std::size_t q = 0; q < P; ++q) loss += pinball(t[m], o[m * P + q], quantiles[q]);
    }
    return loss / static_cast<double>(K * d * P);
}

} // namespace

double QuantileNet::loss(const double* enc, std::size_t L, const double* dec_cov,
                         const double* targets, std::size_t K,
                         const std::vector<double>& quantiles,
                         const double* dropout_scale) const {
    Forward f;
    run_forward(f, enc, L, dec_cov, K, dropout_scale);
    return mean_pinball(f.out, targets, K, shape_.metric_dim, quantiles);
}

double QuantileNet::loss_and_grad(const double* enc, std::size_t L, const double* dec_cov,
                                  const double* targets, std::size_t K,
                                  const std::vector<double>& quantiles,
                                  const double* dropout_scale, std::vector<double>& grad) const {
    const std::size_t I = shape_.input_dim, H = shape_.hidden_dim, d = shape_.metric_dim;
    const std::size_t P = shape_.quantile_dim, O = shape_.output_dim();
    Forward f;
    run_forward(f, enc, L, dec_cov, K, dropout_scale);
    const double loss = mean_pinball(f.out, targets, K, d, quantiles);
    const double scale = 1.0 / static_cast<double>(K * d * P);

    const double* p = params_.data();
    const LayerOffsets o1 = layer_offsets(0, I, H);
    const LayerOffsets o2 = layer_offsets(o1.end, H, H);
    const double* head_w = p + o2.end;
    double* g = grad.data();
    double* g_head_w = g + o2.end;
    double* g_head_b = g + o2.end + O * H;

    const std::vector<double> zeros(H, 0.0);
    std::vector<double> dmed(K * d, 0.0);
    std::vector<double> dh1(H, 0.0), dh2(H, 0.0), dh1p(H), dh2p(H);
    std::vector<double> dx1(I), dx2(H), dout(O);
    std::vector<double> daz(H), dar(H), dan(H), cbuf(H);

    for (std::size_t s = f.steps; s-- > 0;) {
        const double* h2 = f.h2.data() + s * H;
        if (s + 1 >= L) {
            const std::size_t j = s + 1 - L;
            const double* out = f.out.data() + j * O;
            const double* t = targets + j * d;
            for (std::size_t m = 0; m < d; ++m)
                for (std::size_t q = 0; q < P; ++q)
                    dout[m * P + q] = scale * pinball_dyhat(t[m], out[m * P + q], quantiles[q]);
            for (std::size_t m = 0; m < d; ++m)
                dout[m * P + shape_.median_index] += dmed[j * d + m];
            for (std::size_t i = 0; i < O; ++i) {
                g_head_b[i] += dout[i];
                double* gw = g_head_w + i * H;
                const double di = dout[i];
                for (std::size_t u = 0; u < H; ++u) gw[u] += di * h2[u];
            }
            for (std::size_t i = 0; i < O; ++i) {
                const double* w = head_w + i * H;
                const double di = dout[i];
                for (std::size_t u = 0; u < H; ++u) dh2[u] += w[u] * di;
            }
        }
        const double* h2prev = s > 0 ? f.h2.data() + (s - 1) * H : zeros.data();
        gru_backward(p, o2, g, H, H, f.in2.data() + s * H, h2prev, f.z2.data() + s * H,
                     f.r2.data() + s * H, f.n2.data() + s * H, dh2.data(), dx2.data(),
                     dh2p.data(), daz.data(), dar.data(), dan.data(), cbuf.data());
        if (dropout_scale) {
            for (std::size_t u = 0; u < H; ++u) dh1[u] += dx2[u] * dropout_scale[u];
        } else {
            for (std::size_t u = 0; u < H; ++u) dh1[u] += dx2[u];
        }
        const double* h1prev = s > 0 ? f.h1.data() + (s - 1) * H : zeros.data();
        gru_backward(p, o1, g, I, H, f.x.data() + s * I, h1prev, f.z1.data() + s * H,
                     f.r1.data() + s * H, f.n1.data() + s * H, dh1.data(), dx1.data(),
                     dh1p.data(), daz.data(), dar.data(), dan.data(), cbuf.data());
        if (s >= L) {
            const std::size_t j = s - L;
            for (std::size_t m = 0; m < d; ++m) dmed[j * d + m] += dx1[m];
        }
        dh1.swap(dh1p);
        dh2.swap(dh2p);
    }
    return loss;
}

} // namespace ampf
