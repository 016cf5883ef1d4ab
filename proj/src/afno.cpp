#include "ddw/afno.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace ddw {
namespace afno {

namespace {

constexpr double kLnEps = 1e-6;

template <class R>
R gelu(R x) {
    return static_cast<R>(0.5) * x * (static_cast<R>(1) + std::erf(x / std::numbers::sqrt2_v<R>));
}

template <class R>
R gelu_grad(R x) {
    const R cdf = static_cast<R>(0.5) * (static_cast<R>(1) + std::erf(x / std::numbers::sqrt2_v<R>));
    const R pdf = std::exp(static_cast<R>(-0.5) * x * x) /
                  static_cast<R>(std::sqrt(2.0 * std::numbers::pi_v<double>));
    return cdf + x * pdf;
}

template <class R>
R softshrink_grad(R x, R lambda) {
    if (lambda <= static_cast<R>(0)) return static_cast<R>(1);
    return (x > lambda || x < -lambda) ? static_cast<R>(1) : static_cast<R>(0);
}

// y = gamma * (x - mu) * rstd + beta over the last dim of a [T x D] array.
template <class R>
void layernorm_fwd(const R* x, int T, int D, const R* gamma, const R* beta,
                   R* mu, R* rstd, R* y) {
    for (int t = 0; t < T; ++t) {
        const R* xt = x + static_cast<std::size_t>(t) * D;
        R m = 0;
        for (int d = 0; d < D; ++d) m += xt[d];
        m /= D;
        R var = 0;
        for (int d = 0; d < D; ++d) {
            const R c = xt[d] - m;
            var += c * c;
        }
        var /= D;
        const R rs = static_cast<R>(1) / std::sqrt(var + static_cast<R>(kLnEps));
        mu[t] = m;
        rstd[t] = rs;
        R* yt = y + static_cast<std::size_t>(t) * D;
        for (int d = 0; d < D; ++d) yt[d] = gamma[d] * (xt[d] - m) * rs + beta[d];
    }
}

// Accumulates into dx, dgamma, dbeta.
template <class R>
void layernorm_bwd(const R* x, int T, int D, const R* gamma, const R* mu, const R* rstd,
                   const R* dy, R* dx, R* dgamma, R* dbeta) {
    for (int t = 0; t < T; ++t) {
        const R* xt = x + static_cast<std::size_t>(t) * D;
        const R* dyt = dy + static_cast<std::size_t>(t) * D;
        R* dxt = dx + static_cast<std::size_t>(t) * D;
        const R rs = rstd[t];
        R sum_gdy = 0, sum_gdyxh = 0;
        for (int d = 0; d < D; ++d) {
            const R xh = (xt[d] - mu[t]) * rs;
            const R g = gamma[d] * dyt[d];
            sum_gdy += g;
            sum_gdyxh += g * xh;
            dgamma[d] += dyt[d] * xh;
            dbeta[d] += dyt[d];
        }
        sum_gdy /= D;
        sum_gdyxh /= D;
        for (int d = 0; d < D; ++d) {
            const R xh = (xt[d] - mu[t]) * rs;
            dxt[d] += rs * (gamma[d] * dyt[d] - sum_gdy - xh * sum_gdyxh);
        }
    }
}

template <class R>
std::vector<R> normal_vec(std::mt19937_64& rng, std::size_t n, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<R> v(n);
    for (auto& x : v) x = static_cast<R>(dist(rng));
    return v;
}

double glorot_std(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
}

} // namespace

int ModelConfig::mlp_hidden() const {
    const int h = static_cast<int>(std::lround(mlp_ratio * embed_dim));
    return h < 1 ? 1 : h;
}

void ModelConfig::validate() const {
    if (n_lat < 1 || n_lon < 1) throw ShapeMismatch("grid dimensions must be positive");
    if (in_channels < 1 || out_channels < 1) throw ShapeMismatch("channel counts must be positive");
    if (out_channels > in_channels) throw ShapeMismatch("out_channels must not exceed in_channels");
    if (embed_dim < 1 || n_blocks < 1 || n_freq_blocks < 1)
        throw ShapeMismatch("embed_dim, n_blocks, n_freq_blocks must be positive");
    if (embed_dim % n_freq_blocks != 0)
        throw ShapeMismatch("embed_dim must be divisible by n_freq_blocks");
    if (patch_size < 1 || n_lat % patch_size != 0 || n_lon % patch_size != 0)
        throw ShapeMismatch("patch_size must divide n_lat and n_lon");
    if (mlp_ratio <= 0) throw ShapeMismatch("mlp_ratio must be positive");
    if (softshrink_lambda < 0) throw ShapeMismatch("softshrink_lambda must be non-negative");
}

template <class R>
std::vector<typename ModelState<R>::GroupRef> ModelState<R>::groups() {
    std::vector<GroupRef> g;
    auto add = [&](const std::string& name, std::vector<R>& v) {
        g.push_back({name, v.data(), v.size()});
    };
    auto addc = [&](const std::string& name, std::vector<std::complex<R>>& v) {
        g.push_back({name, reinterpret_cast<R*>(v.data()), v.size() * 2});
    };
    add("embed_w", embed_w);
    add("embed_b", embed_b);
    add("pos", pos);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "block" + std::to_string(i) + ".";
        auto& b = blocks[i];
        add(p + "ln1_gamma", b.ln1_gamma);
        add(p + "ln1_beta", b.ln1_beta);
        addc(p + "w1", b.w1);
        addc(p + "b1", b.b1);
        addc(p + "w2", b.w2);
        addc(p + "b2", b.b2);
        add(p + "ln2_gamma", b.ln2_gamma);
        add(p + "ln2_beta", b.ln2_beta);
        add(p + "mlp_w1", b.mlp_w1);
        add(p + "mlp_b1", b.mlp_b1);
        add(p + "mlp_w2", b.mlp_w2);
        add(p + "mlp_b2", b.mlp_b2);
    }
    add("lnf_gamma", lnf_gamma);
    add("lnf_beta", lnf_beta);
    add("head_w", head_w);
    add("head_b", head_b);
    return g;
}

template <class R>
ModelState<R> ModelState<R>::zeros(const ModelConfig& cfg) {
    cfg.validate();
    ModelState s;
    s.cfg = cfg;
    const int D = cfg.embed_dim, T = cfg.n_tokens(), Hm = cfg.mlp_hidden();
    const int bs = cfg.block_size(), nb = cfg.n_freq_blocks;
    s.embed_w.assign(static_cast<std::size_t>(D) * cfg.patch_in(), 0);
    s.embed_b.assign(D, 0);
    s.pos.assign(static_cast<std::size_t>(T) * D, 0);
    s.blocks.resize(cfg.n_blocks);
    for (auto& b : s.blocks) {
        b.ln1_gamma.assign(D, 0);
        b.ln1_beta.assign(D, 0);
        b.w1.assign(static_cast<std::size_t>(nb) * bs * bs, {0, 0});
        b.w2.assign(static_cast<std::size_t>(nb) * bs * bs, {0, 0});
        b.b1.assign(D, {0, 0});
        b.b2.assign(D, {0, 0});
        b.ln2_gamma.assign(D, 0);
        b.ln2_beta.assign(D, 0);
        b.mlp_w1.assign(static_cast<std::size_t>(Hm) * D, 0);
        b.mlp_b1.assign(Hm, 0);
        b.mlp_w2.assign(static_cast<std::size_t>(D) * Hm, 0);
        b.mlp_b2.assign(D, 0);
    }
    s.lnf_gamma.assign(D, 0);
    s.lnf_beta.assign(D, 0);
    s.head_w.assign(static_cast<std::size_t>(cfg.patch_out()) * D, 0);
    s.head_b.assign(cfg.patch_out(), 0);
    return s;
}

template <class R>
ModelState<R> ModelState<R>::init(const ModelConfig& cfg, std::uint64_t seed) {
    ModelState s = zeros(cfg);
    std::mt19937_64 rng(seed);
    const int D = cfg.embed_dim, Hm = cfg.mlp_hidden();
    const int bs = cfg.block_size(), nb = cfg.n_freq_blocks;

    s.embed_w = normal_vec<R>(rng, s.embed_w.size(), glorot_std(cfg.patch_in(), D));
    // positional encoding starts at zero; embed/head biases too
    for (auto& b : s.blocks) {
        std::fill(b.ln1_gamma.begin(), b.ln1_gamma.end(), static_cast<R>(1));
        std::fill(b.ln2_gamma.begin(), b.ln2_gamma.end(), static_cast<R>(1));
        // spectral weights: identity blocks plus a small complex perturbation
        std::normal_distribution<double> dist(0.0, 1.0);
        auto fill_spectral = [&](std::vector<std::complex<R>>& w) {
            for (int f = 0; f < nb; ++f)
                for (int r = 0; r < bs; ++r)
                    for (int c = 0; c < bs; ++c) {
                        const double re = (r == c ? 1.0 : 0.0) + 0.02 * dist(rng);
                        const double im = 0.02 * dist(rng);
                        w[(static_cast<std::size_t>(f) * bs + r) * bs + c] = {static_cast<R>(re),
                                                                              static_cast<R>(im)};
                    }
        };
        fill_spectral(b.w1);
        fill_spectral(b.w2);
        b.mlp_w1 = normal_vec<R>(rng, b.mlp_w1.size(), glorot_std(D, Hm));
        b.mlp_w2 = normal_vec<R>(rng, b.mlp_w2.size(), glorot_std(Hm, D));
    }
    std::fill(s.lnf_gamma.begin(), s.lnf_gamma.end(), static_cast<R>(1));
    s.head_w = normal_vec<R>(rng, s.head_w.size(), glorot_std(D, cfg.patch_out()));
    return s;
}

template <class R>
void ModelState<R>::check_finite() const {
    auto& self = const_cast<ModelState<R>&>(*this);
    for (const auto& g : self.groups())
        for (std::size_t i = 0; i < g.size; ++i)
            if (!std::isfinite(g.data[i]))
                throw NumericError("non-finite parameter in group " + g.name);
}

template <class R, class R2>
ModelState<R2> convert(const ModelState<R>& src) {
    ModelState<R2> dst = ModelState<R2>::zeros(src.cfg);
    auto sg = const_cast<ModelState<R>&>(src).groups();
    auto dg = dst.groups();
    for (std::size_t i = 0; i < sg.size(); ++i)
        for (std::size_t j = 0; j < sg[i].size; ++j)
            dg[i].data[j] = static_cast<R2>(sg[i].data[j]);
    return dst;
}

template <class R>
Network<R>::Network(const ModelConfig& cfg)
    : cfg_(cfg), plan_(static_cast<std::size_t>(cfg.tokens_h()), static_cast<std::size_t>(cfg.tokens_w())),
      chan_buf_(cfg.n_tokens()) {
    cfg.validate();
}

template <class R>
void Network<R>::forward(const ModelState<R>& state, const R* input, ForwardCache<R>& cache) {
    if (state.cfg != cfg_) throw ShapeMismatch("model state does not match network config");
    const int H = cfg_.n_lat, W = cfg_.n_lon, p = cfg_.patch_size;
    const int Th = cfg_.tokens_h(), Tw = cfg_.tokens_w(), T = cfg_.n_tokens();
    const int D = cfg_.embed_dim, Hm = cfg_.mlp_hidden();
    const int nb = cfg_.n_freq_blocks, bs = cfg_.block_size();
    const int Pi = cfg_.patch_in(), Po = cfg_.patch_out();
    const R lambda = static_cast<R>(cfg_.softshrink_lambda);
    const bool relu_act = cfg_.spectral_activation == SpectralActivation::Relu;

    cache.input.assign(input, input + static_cast<std::size_t>(cfg_.in_channels) * H * W);
    cache.tok0.assign(static_cast<std::size_t>(T) * D, 0);

    // patch embed + positional encoding
    std::vector<R> patch(Pi);
    for (int th = 0; th < Th; ++th) {
        for (int tw = 0; tw < Tw; ++tw) {
            const int t = th * Tw + tw;
            for (int c = 0; c < cfg_.in_channels; ++c)
                for (int pj = 0; pj < p; ++pj)
                    for (int pk = 0; pk < p; ++pk)
                        patch[(c * p + pj) * p + pk] =
                            input[(static_cast<std::size_t>(c) * H + th * p + pj) * W + tw * p + pk];
            R* tok = cache.tok0.data() + static_cast<std::size_t>(t) * D;
            for (int d = 0; d < D; ++d) {
                R acc = state.embed_b[d];
                const R* wrow = state.embed_w.data() + static_cast<std::size_t>(d) * Pi;
                for (int i = 0; i < Pi; ++i) acc += wrow[i] * patch[i];
                tok[d] = acc + state.pos[static_cast<std::size_t>(t) * D + d];
            }
        }
    }

    cache.blocks.resize(cfg_.n_blocks);
    const R* x_in = cache.tok0.data();
    for (int bi = 0; bi < cfg_.n_blocks; ++bi) {
        auto& bc = cache.blocks[bi];
        const auto& bp = state.blocks[bi];
        bc.x.assign(x_in, x_in + static_cast<std::size_t>(T) * D);
        bc.mu1.resize(T);
        bc.rstd1.resize(T);
        bc.u.resize(static_cast<std::size_t>(T) * D);
        layernorm_fwd(bc.x.data(), T, D, bp.ln1_gamma.data(), bp.ln1_beta.data(),
                      bc.mu1.data(), bc.rstd1.data(), bc.u.data());

        // spectral mixing: DFT per channel, per-frequency block-diagonal MLP,
        // soft shrink, inverse DFT
        bc.uhat.assign(static_cast<std::size_t>(T) * D, {0, 0});
        for (int d = 0; d < D; ++d) {
            for (int t = 0; t < T; ++t) chan_buf_[t] = {bc.u[static_cast<std::size_t>(t) * D + d], 0};
            plan_.forward(chan_buf_.data());
            for (int t = 0; t < T; ++t) bc.uhat[static_cast<std::size_t>(t) * D + d] = chan_buf_[t];
        }

        bc.a1.resize(static_cast<std::size_t>(T) * D);
        bc.v.resize(static_cast<std::size_t>(T) * D);
        bc.s.resize(static_cast<std::size_t>(T) * D);
        std::vector<std::complex<R>> y(static_cast<std::size_t>(T) * D);
        for (int t = 0; t < T; ++t) {
            const auto* uh = bc.uhat.data() + static_cast<std::size_t>(t) * D;
            auto* a1 = bc.a1.data() + static_cast<std::size_t>(t) * D;
            auto* v = bc.v.data() + static_cast<std::size_t>(t) * D;
            auto* sv = bc.s.data() + static_cast<std::size_t>(t) * D;
            auto* yv = y.data() + static_cast<std::size_t>(t) * D;
            for (int f = 0; f < nb; ++f) {
                const auto* w1 = bp.w1.data() + static_cast<std::size_t>(f) * bs * bs;
                const auto* w2 = bp.w2.data() + static_cast<std::size_t>(f) * bs * bs;
                const int base = f * bs;
                for (int r = 0; r < bs; ++r) {
                    std::complex<R> acc = bp.b1[base + r];
                    for (int c = 0; c < bs; ++c) acc += w1[r * bs + c] * uh[base + c];
                    a1[base + r] = acc;
                    v[base + r] = relu_act
                                      ? std::complex<R>{std::max<R>(acc.real(), 0),
                                                        std::max<R>(acc.imag(), 0)}
                                      : acc;
                }
                for (int r = 0; r < bs; ++r) {
                    std::complex<R> acc = bp.b2[base + r];
                    for (int c = 0; c < bs; ++c) acc += w2[r * bs + c] * v[base + c];
                    sv[base + r] = acc;
                    yv[base + r] = {softshrink(acc.real(), lambda), softshrink(acc.imag(), lambda)};
                }
            }
        }

        bc.mix.resize(static_cast<std::size_t>(T) * D);
        for (int d = 0; d < D; ++d) {
            for (int t = 0; t < T; ++t) chan_buf_[t] = y[static_cast<std::size_t>(t) * D + d];
            plan_.inverse(chan_buf_.data());
            for (int t = 0; t < T; ++t) bc.mix[static_cast<std::size_t>(t) * D + d] = chan_buf_[t].real();
        }

        bc.z.resize(static_cast<std::size_t>(T) * D);
        for (std::size_t i = 0; i < bc.z.size(); ++i) bc.z[i] = bc.x[i] + bc.mix[i];

        bc.mu2.resize(T);
        bc.rstd2.resize(T);
        bc.m.resize(static_cast<std::size_t>(T) * D);
        layernorm_fwd(bc.z.data(), T, D, bp.ln2_gamma.data(), bp.ln2_beta.data(),
                      bc.mu2.data(), bc.rstd2.data(), bc.m.data());

        bc.h1pre.resize(static_cast<std::size_t>(T) * Hm);
        bc.h1.resize(static_cast<std::size_t>(T) * Hm);
        for (int t = 0; t < T; ++t) {
            const R* mt = bc.m.data() + static_cast<std::size_t>(t) * D;
            R* pre = bc.h1pre.data() + static_cast<std::size_t>(t) * Hm;
            R* act = bc.h1.data() + static_cast<std::size_t>(t) * Hm;
            for (int h = 0; h < Hm; ++h) {
                R acc = bp.mlp_b1[h];
                const R* wrow = bp.mlp_w1.data() + static_cast<std::size_t>(h) * D;
                for (int d = 0; d < D; ++d) acc += wrow[d] * mt[d];
                pre[h] = acc;
                act[h] = gelu(acc);
            }
        }

        // next tokens: z + mlp_w2 * h1 + mlp_b2
        std::vector<R>& next = (bi + 1 < cfg_.n_blocks)
                                   ? (cache.blocks[bi + 1].x.resize(static_cast<std::size_t>(T) * D),
                                      cache.blocks[bi + 1].x)
                                   : (cache.xlast.resize(static_cast<std::size_t>(T) * D), cache.xlast);
        for (int t = 0; t < T; ++t) {
            const R* act = bc.h1.data() + static_cast<std::size_t>(t) * Hm;
            R* out = next.data() + static_cast<std::size_t>(t) * D;
            const R* zt = bc.z.data() + static_cast<std::size_t>(t) * D;
            for (int d = 0; d < D; ++d) {
                R acc = bp.mlp_b2[d];
                const R* wrow = bp.mlp_w2.data() + static_cast<std::size_t>(d) * Hm;
                for (int h = 0; h < Hm; ++h) acc += wrow[h] * act[h];
                out[d] = zt[d] + acc;
                if (!std::isfinite(out[d]))
                    throw NumericError("non-finite activation in block " + std::to_string(bi));
            }
        }
        x_in = next.data();
    }

    cache.muf.resize(T);
    cache.rstdf.resize(T);
    cache.xf.resize(static_cast<std::size_t>(T) * D);
    layernorm_fwd(cache.xlast.data(), T, D, state.lnf_gamma.data(), state.lnf_beta.data(),
                  cache.muf.data(), cache.rstdf.data(), cache.xf.data());

    // head + un-patch
    cache.output.assign(static_cast<std::size_t>(cfg_.out_channels) * H * W, 0);
    for (int th = 0; th < Th; ++th) {
        for (int tw = 0; tw < Tw; ++tw) {
            const int t = th * Tw + tw;
            const R* xf = cache.xf.data() + static_cast<std::size_t>(t) * D;
            for (int r = 0; r < Po; ++r) {
                R acc = state.head_b[r];
                const R* wrow = state.head_w.data() + static_cast<std::size_t>(r) * D;
                for (int d = 0; d < D; ++d) acc += wrow[d] * xf[d];
                const int c = r / (p * p), pj = (r / p) % p, pk = r % p;
                cache.output[(static_cast<std::size_t>(c) * H + th * p + pj) * W + tw * p + pk] = acc;
            }
        }
    }
}

template <class R>
void Network<R>::forward(const ModelState<R>& state, const R* input, R* output) {
    ForwardCache<R> cache;
    forward(state, input, cache);
    std::copy(cache.output.begin(), cache.output.end(), output);
}

template <class R>
R Network<R>::loss(const R* pred, const R* target, const std::vector<R>& lat_weights) const {
    if (static_cast<int>(lat_weights.size()) != cfg_.n_lat)
        throw ShapeMismatch("lat_weights length must equal n_lat");
    const int H = cfg_.n_lat, W = cfg_.n_lon, C = cfg_.out_channels;
    double acc = 0;
    for (int c = 0; c < C; ++c)
        for (int j = 0; j < H; ++j) {
            const double w = lat_weights[j];
            const std::size_t off = (static_cast<std::size_t>(c) * H + j) * W;
            for (int k = 0; k < W; ++k) {
                const double d = static_cast<double>(pred[off + k]) - target[off + k];
                acc += w * d * d;
            }
        }
    return static_cast<R>(acc / (static_cast<double>(C) * H * W));
}

template <class R>
R Network<R>::loss_and_grad(const ModelState<R>& state, const R* input, const R* target,
                            const std::vector<R>& lat_weights, ModelState<R>& grads) {
    ForwardCache<R> cache;
    forward(state, input, cache);
    const R l = loss(cache.output.data(), target, lat_weights);

    const int H = cfg_.n_lat, W = cfg_.n_lon, C = cfg_.out_channels;
    const R scale = static_cast<R>(2.0 / (static_cast<double>(C) * H * W));
    std::vector<R> d_out(cache.output.size());
    for (int c = 0; c < C; ++c)
        for (int j = 0; j < H; ++j) {
            const std::size_t off = (static_cast<std::size_t>(c) * H + j) * W;
            for (int k = 0; k < W; ++k)
                d_out[off + k] = scale * lat_weights[j] * (cache.output[off + k] - target[off + k]);
        }
    backward(state, cache, d_out.data(), grads);
    return l;
}

template <class R>
void Network<R>::backward(const ModelState<R>& state, const ForwardCache<R>& cache,
                          const R* d_output, ModelState<R>& grads) {
    const int H = cfg_.n_lat, W = cfg_.n_lon, p = cfg_.patch_size;
    const int Th = cfg_.tokens_h(), Tw = cfg_.tokens_w(), T = cfg_.n_tokens();
    const int D = cfg_.embed_dim, Hm = cfg_.mlp_hidden();
    const int nb = cfg_.n_freq_blocks, bs = cfg_.block_size();
    const int Pi = cfg_.patch_in(), Po = cfg_.patch_out();
    const R lambda = static_cast<R>(cfg_.softshrink_lambda);
    const bool relu_act = cfg_.spectral_activation == SpectralActivation::Relu;
    const R hw = static_cast<R>(T);

    // head
    std::vector<R> dxf(static_cast<std::size_t>(T) * D, 0);
    for (int th = 0; th < Th; ++th) {
        for (int tw = 0; tw < Tw; ++tw) {
            const int t = th * Tw + tw;
            const R* xf = cache.xf.data() + static_cast<std::size_t>(t) * D;
            R* dx = dxf.data() + static_cast<std::size_t>(t) * D;
            for (int r = 0; r < Po; ++r) {
                const int c = r / (p * p), pj = (r / p) % p, pk = r % p;
                const R g = d_output[(static_cast<std::size_t>(c) * H + th * p + pj) * W + tw * p + pk];
                grads.head_b[r] += g;
                R* gw = grads.head_w.data() + static_cast<std::size_t>(r) * D;
                const R* w = state.head_w.data() + static_cast<std::size_t>(r) * D;
                for (int d = 0; d < D; ++d) {
                    gw[d] += g * xf[d];
                    dx[d] += g * w[d];
                }
            }
        }
    }

    std::vector<R> dx(static_cast<std::size_t>(T) * D, 0);
    layernorm_bwd(cache.xlast.data(), T, D, state.lnf_gamma.data(), cache.muf.data(),
                  cache.rstdf.data(), dxf.data(), dx.data(), grads.lnf_gamma.data(),
                  grads.lnf_beta.data());

    std::vector<R> dz(static_cast<std::size_t>(T) * D);
    std::vector<R> dm(static_cast<std::size_t>(T) * D);
    std::vector<R> dmix(static_cast<std::size_t>(T) * D);
    std::vector<R> du(static_cast<std::size_t>(T) * D);
    std::vector<std::complex<R>> gy(static_cast<std::size_t>(T) * D);
    std::vector<std::complex<R>> duhat(static_cast<std::size_t>(T) * D);

    for (int bi = cfg_.n_blocks - 1; bi >= 0; --bi) {
        const auto& bc = cache.blocks[bi];
        const auto& bp = state.blocks[bi];
        auto& bg = grads.blocks[bi];

        // dx currently holds the gradient at this block's output (= z + mlp(m)).
        std::fill(dz.begin(), dz.end(), 0);
        std::fill(dm.begin(), dm.end(), 0);

        // channel MLP
        for (int t = 0; t < T; ++t) {
            const R* dout = dx.data() + static_cast<std::size_t>(t) * D;
            const R* act = bc.h1.data() + static_cast<std::size_t>(t) * Hm;
            const R* pre = bc.h1pre.data() + static_cast<std::size_t>(t) * Hm;
            const R* mt = bc.m.data() + static_cast<std::size_t>(t) * D;
            R* dmt = dm.data() + static_cast<std::size_t>(t) * D;
            R* dzt = dz.data() + static_cast<std::size_t>(t) * D;

            for (int d = 0; d < D; ++d) dzt[d] += dout[d]; // residual

            std::vector<R> dh1(Hm, 0);
            for (int d = 0; d < D; ++d) {
                const R g = dout[d];
                bg.mlp_b2[d] += g;
                R* gw = bg.mlp_w2.data() + static_cast<std::size_t>(d) * Hm;
                const R* w = bp.mlp_w2.data() + static_cast<std::size_t>(d) * Hm;
                for (int h = 0; h < Hm; ++h) {
                    gw[h] += g * act[h];
                    dh1[h] += g * w[h];
                }
            }
            for (int h = 0; h < Hm; ++h) {
                const R g = dh1[h] * gelu_grad(pre[h]);
                bg.mlp_b1[h] += g;
                R* gw = bg.mlp_w1.data() + static_cast<std::size_t>(h) * D;
                const R* w = bp.mlp_w1.data() + static_cast<std::size_t>(h) * D;
                for (int d = 0; d < D; ++d) {
                    gw[d] += g * mt[d];
                    dmt[d] += g * w[d];
                }
            }
        }

        layernorm_bwd(bc.z.data(), T, D, bp.ln2_gamma.data(), bc.mu2.data(), bc.rstd2.data(),
                      dm.data(), dz.data(), bg.ln2_gamma.data(), bg.ln2_beta.data());

        // z = x + mix
        std::copy(dz.begin(), dz.end(), dmix.begin());
        std::copy(dz.begin(), dz.end(), dx.begin()); // residual into block input

        // mix = Re(IDFT_normalized(y))  =>  dy = (1/HW) * DFT(dmix)
        for (int d = 0; d < D; ++d) {
            for (int t = 0; t < T; ++t) chan_buf_[t] = {dmix[static_cast<std::size_t>(t) * D + d], 0};
            plan_.forward(chan_buf_.data());
            for (int t = 0; t < T; ++t)
                gy[static_cast<std::size_t>(t) * D + d] = chan_buf_[t] / hw;
        }

        // per-frequency block-diagonal MLP, reverse order
        for (int t = 0; t < T; ++t) {
            const auto* uh = bc.uhat.data() + static_cast<std::size_t>(t) * D;
            const auto* a1 = bc.a1.data() + static_cast<std::size_t>(t) * D;
            const auto* v = bc.v.data() + static_cast<std::size_t>(t) * D;
            const auto* sv = bc.s.data() + static_cast<std::size_t>(t) * D;
            const auto* gyt = gy.data() + static_cast<std::size_t>(t) * D;
            auto* duh = duhat.data() + static_cast<std::size_t>(t) * D;

            for (int f = 0; f < nb; ++f) {
                const int base = f * bs;
                const auto* w1 = bp.w1.data() + static_cast<std::size_t>(f) * bs * bs;
                const auto* w2 = bp.w2.data() + static_cast<std::size_t>(f) * bs * bs;
                auto* gw1 = bg.w1.data() + static_cast<std::size_t>(f) * bs * bs;
                auto* gw2 = bg.w2.data() + static_cast<std::size_t>(f) * bs * bs;

                std::vector<std::complex<R>> ds(bs), dv(bs, {0, 0}), da(bs);
                for (int r = 0; r < bs; ++r) {
                    const auto g = gyt[base + r];
                    ds[r] = {g.real() * softshrink_grad(sv[base + r].real(), lambda),
                             g.imag() * softshrink_grad(sv[base + r].imag(), lambda)};
                    bg.b2[base + r] += ds[r];
                }
                for (int r = 0; r < bs; ++r)
                    for (int c = 0; c < bs; ++c) {
                        gw2[r * bs + c] += ds[r] * std::conj(v[base + c]);
                        dv[c] += std::conj(w2[r * bs + c]) * ds[r];
                    }
                for (int r = 0; r < bs; ++r) {
                    da[r] = relu_act
                                ? std::complex<R>{dv[r].real() *
                                                      (a1[base + r].real() > 0 ? static_cast<R>(1) : 0),
                                                  dv[r].imag() *
                                                      (a1[base + r].imag() > 0 ? static_cast<R>(1) : 0)}
                                : dv[r];
                    bg.b1[base + r] += da[r];
                }
                for (int r = 0; r < bs; ++r) {
                    duh[base + r] = {0, 0};
                }
                for (int r = 0; r < bs; ++r)
                    for (int c = 0; c < bs; ++c) {
                        gw1[r * bs + c] += da[r] * std::conj(uh[base + c]);
                        duh[base + c] += std::conj(w1[r * bs + c]) * da[r];
                    }
            }
        }

        // uhat = DFT(u)  =>  du = Re(IDFT_unnormalized(duhat))
        for (int d = 0; d < D; ++d) {
            for (int t = 0; t < T; ++t) chan_buf_[t] = duhat[static_cast<std::size_t>(t) * D + d];
            plan_.inverse_unnormalized(chan_buf_.data());
            for (int t = 0; t < T; ++t) du[static_cast<std::size_t>(t) * D + d] = chan_buf_[t].real();
        }

        layernorm_bwd(bc.x.data(), T, D, bp.ln1_gamma.data(), bc.mu1.data(), bc.rstd1.data(),
                      du.data(), dx.data(), bg.ln1_gamma.data(), bg.ln1_beta.data());
        // dx now holds the gradient at this block's input
    }

    // positional encoding and patch embed
    std::vector<R> patch(Pi);
    const R* input = cache.input.data();
    for (int th = 0; th < Th; ++th) {
        for (int tw = 0; tw < Tw; ++tw) {
            const int t = th * Tw + tw;
            for (int c = 0; c < cfg_.in_channels; ++c)
                for (int pj = 0; pj < p; ++pj)
                    for (int pk = 0; pk < p; ++pk)
                        patch[(c * p + pj) * p + pk] =
                            input[(static_cast<std::size_t>(c) * H + th * p + pj) * W + tw * p + pk];
            const R* dtok = dx.data() + static_cast<std::size_t>(t) * D;
            for (int d = 0; d < D; ++d) {
                const R g = dtok[d];
                grads.pos[static_cast<std::size_t>(t) * D + d] += g;
                grads.embed_b[d] += g;
                R* gw = grads.embed_w.data() + static_cast<std::size_t>(d) * Pi;
                for (int i = 0; i < Pi; ++i) gw[i] += g * patch[i];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// AFN1 checkpoint container
// ---------------------------------------------------------------------------

namespace {

constexpr char kCkptMagic[4] = {'A', 'F', 'N', '1'};

template <class T>
void put_raw(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_raw(std::istream& in, const char* what) {
    T v;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw IoError(std::string("truncated checkpoint field: ") + what);
    return v;
}

} // namespace

void write_checkpoint(const ModelState<float>& state, const std::string& path) {
    state.check_finite();
    std::ostringstream cfgtext;
    const auto& c = state.cfg;
    char num[64];
    cfgtext << "n_lat=" << c.n_lat << "\nn_lon=" << c.n_lon
            << "\nin_channels=" << c.in_channels << "\nout_channels=" << c.out_channels
            << "\nembed_dim=" << c.embed_dim << "\nn_blocks=" << c.n_blocks
            << "\nn_freq_blocks=" << c.n_freq_blocks;
    std::snprintf(num, sizeof(num), "%.17g", c.mlp_ratio);
    cfgtext << "\nmlp_ratio=" << num;
    std::snprintf(num, sizeof(num), "%.17g", c.softshrink_lambda);
    cfgtext << "\nsoftshrink_lambda=" << num << "\npatch_size=" << c.patch_size
            << "\nspectral_activation="
            << (c.spectral_activation == SpectralActivation::Relu ? "relu" : "identity") << "\n";
    const std::string cfg = cfgtext.str();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kCkptMagic, 4);
    put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    for (const auto& g : const_cast<ModelState<float>&>(state).groups()) {
        put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(g.name.size()));
        out.write(g.name.data(), static_cast<std::streamsize>(g.name.size()));
        put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(g.size));
        out.write(reinterpret_cast<const char*>(g.data),
                  static_cast<std::streamsize>(g.size * sizeof(float)));
    }
    if (!out) throw IoError("write failure: " + path);
}

ModelState<float> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw IoError("bad magic in " + path);

    const auto cfg_len = get_raw<std::uint32_t>(in, "config length");
    std::string cfgtext(cfg_len, '\0');
    if (!in.read(cfgtext.data(), cfg_len)) throw IoError("truncated config in " + path);

    ModelConfig cfg;
    std::stringstream ss(cfgtext);
    std::string line;
    while (std::getline(ss, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "n_lat") cfg.n_lat = std::stoi(val);
        else if (key == "n_lon") cfg.n_lon = std::stoi(val);
        else if (key == "in_channels") cfg.in_channels = std::stoi(val);
        else if (key == "out_channels") cfg.out_channels = std::stoi(val);
        else if (key == "embed_dim") cfg.embed_dim = std::stoi(val);
        else if (key == "n_blocks") cfg.n_blocks = std::stoi(val);
        else if (key == "n_freq_blocks") cfg.n_freq_blocks = std::stoi(val);
        else if (key == "mlp_ratio") cfg.mlp_ratio = std::stod(val);
        else if (key == "softshrink_lambda") cfg.softshrink_lambda = std::stod(val);
        else if (key == "patch_size") cfg.patch_size = std::stoi(val);
        else if (key == "spectral_activation")
            cfg.spectral_activation =
                (val == "identity") ? SpectralActivation::Identity : SpectralActivation::Relu;
    }

    ModelState<float> state = ModelState<float>::zeros(cfg);
    for (auto& g : state.groups()) {
        const auto name_len = get_raw<std::uint32_t>(in, "group name length");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw IoError("truncated group name in " + path);
        if (name != g.name) throw IoError("unexpected parameter group '" + name + "' in " + path);
        const auto count = get_raw<std::uint32_t>(in, "group element count");
        if (count != g.size)
            throw IoError("size mismatch for group '" + name + "' in " + path);
        if (!in.read(reinterpret_cast<char*>(g.data),
                     static_cast<std::streamsize>(g.size * sizeof(float))))
            throw IoError("truncated group payload in " + path);
    }
    return state;
}

template struct ModelState<float>;
template struct ModelState<double>;
template class Network<float>;
template class Network<double>;
template ModelState<double> convert<float, double>(const ModelState<float>&);
template ModelState<float> convert<double, float>(const ModelState<double>&);

} // namespace afno
} // namespace ddw
