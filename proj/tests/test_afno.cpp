#include "doctest.h"

#include <complex>
#include <numbers>
#include <random>

#include "ddw/afno.hpp"
#include "ddw/trainer.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace ddw;
using namespace ddw::afno;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.n_lat = 8;
    c.n_lon = 16;
    c.in_channels = 4; // 3 dynamic + 1 static
    c.out_channels = 3;
    c.embed_dim = 16;
    c.n_blocks = 2;
    c.n_freq_blocks = 4;
    c.mlp_ratio = 2.0;
    c.softshrink_lambda = 0.0;
    return c;
}

template <class R>
std::vector<R> random_field(const ModelConfig& c, int channels, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<R> f(static_cast<std::size_t>(channels) * c.n_lat * c.n_lon);
    for (auto& v : f) v = static_cast<R>(dist(rng));
    return f;
}

} // namespace

TEST_CASE("softshrink") {
    CHECK(softshrink(3.0, 1.0) == 2.0);
    CHECK(softshrink(-3.0, 1.0) == -2.0);
    CHECK(softshrink(0.5, 1.0) == 0.0);
    CHECK(softshrink(-0.5, 1.0) == 0.0);
    CHECK(softshrink(0.7, 0.0) == 0.7); // lambda 0 is identity
    CHECK(softshrink(-0.7, 0.0) == -0.7);
}

TEST_CASE("config validation") {
    auto c = tiny_config();
    CHECK_NOTHROW(c.validate());
    SUBCASE("embed_dim must divide into freq blocks") {
        c.n_freq_blocks = 3;
        CHECK_THROWS_AS(c.validate(), ShapeMismatch);
    }
    SUBCASE("patch size must divide grid") {
        c.patch_size = 3;
        CHECK_THROWS_AS(c.validate(), ShapeMismatch);
    }
    SUBCASE("out_channels bounded by in_channels") {
        c.out_channels = 5;
        CHECK_THROWS_AS(c.validate(), ShapeMismatch);
    }
}

TEST_CASE("all-zero state maps any input to the (zero) bias field") {
    auto c = tiny_config();
    auto state = ModelState<double>::zeros(c);
    // LN with zero gamma collapses everything; head bias fills the output.
    Network<double> net(c);
    auto in = random_field<double>(c, c.in_channels, 3);
    std::vector<double> out(static_cast<std::size_t>(c.out_channels) * c.n_lat * c.n_lon, 99.0);
    net.forward(state, in.data(), out.data());
    for (double v : out) CHECK(v == 0.0);

    state.head_b.assign(state.head_b.size(), 2.5);
    net.forward(state, in.data(), out.data());
    for (double v : out) CHECK(v == 2.5);
}

TEST_CASE("patch embed: identity slice reproduces channel vectors; random matches dense oracle") {
    auto c = tiny_config();
    c.embed_dim = c.in_channels; // identity embed possible
    c.n_freq_blocks = 2;
    auto state = ModelState<double>::zeros(c);
    for (int d = 0; d < c.embed_dim; ++d) state.embed_w[d * c.patch_in() + d] = 1.0;

    Network<double> net(c);
    auto in = random_field<double>(c, c.in_channels, 5);
    ForwardCache<double> cache;
    net.forward(state, in.data(), cache);
    const std::size_t cells = static_cast<std::size_t>(c.n_lat) * c.n_lon;
    for (int t = 0; t < c.n_tokens(); ++t)
        for (int d = 0; d < c.embed_dim; ++d)
            CHECK(cache.tok0[t * c.embed_dim + d] == in[d * cells + t]);

    SUBCASE("random embed weights match a per-point dense matmul") {
        auto st = ModelState<double>::init(tiny_config(), 11);
        Network<double> net2(tiny_config());
        auto cfg = tiny_config();
        auto in2 = random_field<double>(cfg, cfg.in_channels, 6);
        ForwardCache<double> cache2;
        net2.forward(st, in2.data(), cache2);
        for (int t : {0, 5, 63, 127}) {
            for (int d = 0; d < cfg.embed_dim; ++d) {
                double acc = st.embed_b[d] + st.pos[t * cfg.embed_dim + d];
                for (int ch = 0; ch < cfg.in_channels; ++ch)
                    acc += st.embed_w[d * cfg.in_channels + ch] * in2[ch * cells + t];
                CHECK(cache2.tok0[t * cfg.embed_dim + d] == doctest::Approx(acc).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("identity spectral configuration reduces the mix to Norm1(x)") {
    // lambda=0, W1=W2=identity, zero biases, identity activation, zero MLP:
    // block output = x + IDFT(DFT(Norm1(x))) = x + Norm1(x)
    auto c = tiny_config();
    c.n_blocks = 1;
    c.spectral_activation = SpectralActivation::Identity;
    auto state = ModelState<double>::zeros(c);
    auto& b = state.blocks[0];
    std::fill(b.ln1_gamma.begin(), b.ln1_gamma.end(), 1.0);
    std::fill(state.lnf_gamma.begin(), state.lnf_gamma.end(), 1.0);
    const int bs = c.block_size();
    for (int f = 0; f < c.n_freq_blocks; ++f)
        for (int r = 0; r < bs; ++r) {
            b.w1[(f * bs + r) * bs + r] = {1.0, 0.0};
            b.w2[(f * bs + r) * bs + r] = {1.0, 0.0};
        }
    // embed something non-trivial
    std::mt19937 rng(17);
    std::normal_distribution<double> dist;
    for (auto& w : state.embed_w) w = dist(rng);

    Network<double> net(c);
    auto in = random_field<double>(c, c.in_channels, 8);
    ForwardCache<double> cache;
    net.forward(state, in.data(), cache);

    const auto& bc = cache.blocks[0];
    for (std::size_t i = 0; i < bc.mix.size(); ++i)
        CHECK(bc.mix[i] == doctest::Approx(bc.u[i]).epsilon(1e-10));
    for (std::size_t i = 0; i < bc.z.size(); ++i)
        CHECK(bc.z[i] == doctest::Approx(bc.x[i] + bc.u[i]).epsilon(1e-10));
}

TEST_CASE("spectral mixing matches a direct O(N^2) DFT-summation oracle on a 4x4 grid") {
    ModelConfig c;
    c.n_lat = 4;
    c.n_lon = 4;
    c.in_channels = 2;
    c.out_channels = 2;
    c.embed_dim = 4;
    c.n_blocks = 1;
    c.n_freq_blocks = 2;
    c.softshrink_lambda = 0.03;
    auto state = ModelState<double>::init(c, 21);
    Network<double> net(c);
    auto in = random_field<double>(c, c.in_channels, 9);
    ForwardCache<double> cache;
    net.forward(state, in.data(), cache);
    const auto& bc = cache.blocks[0];

    const int H = 4, W = 4, T = 16, D = 4, bs = c.block_size();
    // direct 2-D DFT of u per channel
    std::vector<std::complex<double>> uhat(T * D);
    for (int d = 0; d < D; ++d)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                std::complex<double> acc{0, 0};
                for (int j = 0; j < H; ++j)
                    for (int k = 0; k < W; ++k) {
                        const double ang =
                            -2.0 * std::numbers::pi * (double(h * j) / H + double(w * k) / W);
                        acc += bc.u[(j * W + k) * D + d] *
                               std::complex<double>(std::cos(ang), std::sin(ang));
                    }
                uhat[(h * W + w) * D + d] = acc;
            }
    for (std::size_t i = 0; i < uhat.size(); ++i) {
        CHECK(bc.uhat[i].real() == doctest::Approx(uhat[i].real()).epsilon(1e-5));
        CHECK(bc.uhat[i].imag() == doctest::Approx(uhat[i].imag()).epsilon(1e-5));
    }

    // block-diagonal MLP with shrink, then direct inverse DFT
    std::vector<std::complex<double>> y(T * D);
    const auto& bp = state.blocks[0];
    const double lam = c.softshrink_lambda;
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < c.n_freq_blocks; ++f) {
            const int base = f * bs;
            std::vector<std::complex<double>> v(bs);
            for (int r = 0; r < bs; ++r) {
                std::complex<double> acc = bp.b1[base + r];
                for (int cc = 0; cc < bs; ++cc)
                    acc += bp.w1[(f * bs + r) * bs + cc] * uhat[t * D + base + cc];
                v[r] = {std::max(acc.real(), 0.0), std::max(acc.imag(), 0.0)};
            }
            for (int r = 0; r < bs; ++r) {
                std::complex<double> acc = bp.b2[base + r];
                for (int cc = 0; cc < bs; ++cc)
                    acc += bp.w2[(f * bs + r) * bs + cc] * v[cc];
                y[t * D + base + r] = {softshrink(acc.real(), lam), softshrink(acc.imag(), lam)};
            }
        }
    for (int d = 0; d < D; ++d)
        for (int j = 0; j < H; ++j)
            for (int k = 0; k < W; ++k) {
                std::complex<double> acc{0, 0};
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        const double ang =
                            2.0 * std::numbers::pi * (double(h * j) / H + double(w * k) / W);
                        acc += y[(h * W + w) * D + d] *
                               std::complex<double>(std::cos(ang), std::sin(ang));
                    }
                CHECK(bc.mix[(j * W + k) * D + d] ==
                      doctest::Approx(acc.real() / T).epsilon(1e-5));
            }
}

TEST_CASE("forward is deterministic") {
    auto c = tiny_config();
    auto state = ModelState<float>::init(c, 99);
    Network<float> net(c);
    auto in = random_field<float>(c, c.in_channels, 10);
    std::vector<float> out1(static_cast<std::size_t>(c.out_channels) * c.n_lat * c.n_lon);
    std::vector<float> out2(out1.size());
    net.forward(state, in.data(), out1.data());
    net.forward(state, in.data(), out2.data());
    CHECK(out1 == out2);
}

TEST_CASE("longitude shift equivariance with zero positional encoding") {
    // only the identity spectral activation commutes with the phase factor a
    // translation puts on each frequency; relu/softshrink on raw re/im do not
    auto c = tiny_config();
    c.spectral_activation = SpectralActivation::Identity;
    c.softshrink_lambda = 0.0;
    auto state = ModelState<float>::init(c, 4);
    std::fill(state.pos.begin(), state.pos.end(), 0.0f);
    Network<float> net(c);

    auto in = random_field<float>(c, c.in_channels, 12);
    const int H = c.n_lat, W = c.n_lon, shift = 5;
    std::vector<float> shifted(in.size());
    for (int ch = 0; ch < c.in_channels; ++ch)
        for (int j = 0; j < H; ++j)
            for (int k = 0; k < W; ++k)
                shifted[(static_cast<std::size_t>(ch) * H + j) * W + (k + shift) % W] =
                    in[(static_cast<std::size_t>(ch) * H + j) * W + k];

    std::vector<float> out(static_cast<std::size_t>(c.out_channels) * H * W);
    std::vector<float> out_shifted(out.size());
    net.forward(state, in.data(), out.data());
    net.forward(state, shifted.data(), out_shifted.data());
    for (int ch = 0; ch < c.out_channels; ++ch)
        for (int j = 0; j < H; ++j)
            for (int k = 0; k < W; ++k)
                CHECK(out_shifted[(static_cast<std::size_t>(ch) * H + j) * W + (k + shift) % W] ==
                      doctest::Approx(out[(static_cast<std::size_t>(ch) * H + j) * W + k])
                          .epsilon(1e-4));
}

TEST_CASE("gradients") {
    auto c = tiny_config();
    auto state = ModelState<double>::init(c, 7);
    Network<double> net(c);
    auto lat_w_d = std::vector<double>(c.n_lat, 1.0);

    auto in = random_field<double>(c, c.in_channels, 31);
    auto in2 = random_field<double>(c, c.in_channels, 32);
    auto tgt = random_field<double>(c, c.out_channels, 33);
    auto tgt2 = random_field<double>(c, c.out_channels, 34);

    SUBCASE("zero-loss batch has zero gradients") {
        std::vector<double> pred(static_cast<std::size_t>(c.out_channels) * c.n_lat * c.n_lon);
        net.forward(state, in.data(), pred.data());
        auto grads = ModelState<double>::zeros(c);
        const double l = net.loss_and_grad(state, in.data(), pred.data(), lat_w_d, grads);
        CHECK(l == 0.0);
        for (const auto& g : grads.groups())
            for (std::size_t i = 0; i < g.size; ++i) CHECK(g.data[i] == 0.0);
    }

    SUBCASE("duplicated sample equals single sample (mean reduction)") {
        auto g1 = ModelState<double>::zeros(c);
        auto g2 = ModelState<double>::zeros(c);
        trainer::batch_loss_and_grads(net, state, {in.data()}, {tgt.data()}, lat_w_d, g1);
        trainer::batch_loss_and_grads(net, state, {in.data(), in.data()},
                                      {tgt.data(), tgt.data()}, lat_w_d, g2);
        auto r1 = g1.groups();
        auto r2 = g2.groups();
        for (std::size_t k = 0; k < r1.size(); ++k)
            for (std::size_t i = 0; i < r1[k].size; ++i)
                CHECK(r1[k].data[i] == doctest::Approx(r2[k].data[i]).epsilon(1e-12));
    }

    SUBCASE("finite-difference check, every parameter group") {
        auto results = testutil::gradient_check(state, {in.data(), in2.data()},
                                                {tgt.data(), tgt2.data()}, lat_w_d);
        for (const auto& r : results) {
            INFO("group ", r.name, " rel err ", r.max_rel_err);
            CHECK(r.max_rel_err <= 1e-4);
        }
    }

    SUBCASE("finite-difference check with shrink and latitude weights") {
        auto cs = c;
        cs.softshrink_lambda = 0.05;
        auto st = ModelState<double>::init(cs, 8);
        std::vector<double> lw(cs.n_lat);
        double sum = 0;
        for (int j = 0; j < cs.n_lat; ++j) {
            lw[j] = 0.5 + 0.1 * j;
            sum += lw[j];
        }
        for (auto& w : lw) w *= cs.n_lat / sum;
        // softshrink has kinks at |x| = lambda; a smaller step keeps the
        // central difference on one side of them, at a looser tolerance
        auto results = testutil::gradient_check(st, {in.data()}, {tgt.data()}, lw, 1e-6, 32);
        for (const auto& r : results) {
            INFO("group ", r.name, " rel err ", r.max_rel_err);
            CHECK(r.max_rel_err <= 1e-3);
        }
    }
}

TEST_CASE("checkpoint roundtrip") {
    auto c = tiny_config();
    c.softshrink_lambda = 0.1;
    c.mlp_ratio = 1.5;
    auto state = ModelState<float>::init(c, 77);
    testutil::TempDir tmp;
    write_checkpoint(state, tmp.file("m.afn"));
    auto loaded = read_checkpoint(tmp.file("m.afn"));
    CHECK(loaded.cfg == c);
    auto a = state.groups();
    auto b = loaded.groups();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].name == b[k].name);
        REQUIRE(a[k].size == b[k].size);
        for (std::size_t i = 0; i < a[k].size; ++i) CHECK(a[k].data[i] == b[k].data[i]);
    }
}
