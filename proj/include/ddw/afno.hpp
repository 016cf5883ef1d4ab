#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ddw/errors.hpp"
#include "ddw/fft.hpp"

namespace ddw {
namespace afno {

enum class SpectralActivation { Relu, Identity };

/// softshrink(x, lambda) = sign(x) * max(|x| - lambda, 0); lambda = 0 is the
/// identity. Applied separately to real and imaginary parts in the spectral
/// path.
template <class R>
inline R softshrink(R x, R lambda) {
    if (lambda <= static_cast<R>(0)) return x;
    if (x > lambda) return x - lambda;
    if (x < -lambda) return x + lambda;
    return static_cast<R>(0);
}

struct ModelConfig {
    int n_lat = 0;
    int n_lon = 0;
    int in_channels = 0;  // dynamic channels plus any appended static fields
    int out_channels = 0;
    int embed_dim = 0;
    int n_blocks = 0;
    int n_freq_blocks = 0; // block-diagonal partition of embed_dim in spectral space
    double mlp_ratio = 2.0;
    double softshrink_lambda = 0.0;
    int patch_size = 1;
    SpectralActivation spectral_activation = SpectralActivation::Relu;

    void validate() const;
    int tokens_h() const { return n_lat / patch_size; }
    int tokens_w() const { return n_lon / patch_size; }
    int n_tokens() const { return tokens_h() * tokens_w(); }
    int block_size() const { return embed_dim / n_freq_blocks; }
    int mlp_hidden() const;
    int patch_in() const { return in_channels * patch_size * patch_size; }
    int patch_out() const { return out_channels * patch_size * patch_size; }

    bool operator==(const ModelConfig&) const = default;
};

template <class R>
struct BlockParams {
    std::vector<R> ln1_gamma, ln1_beta;            // [D]
    std::vector<std::complex<R>> w1, w2;           // [n_freq_blocks][bs][bs], shared across frequencies
    std::vector<std::complex<R>> b1, b2;           // [D]
    std::vector<R> ln2_gamma, ln2_beta;            // [D]
    std::vector<R> mlp_w1, mlp_b1;                 // [Hm x D], [Hm]
    std::vector<R> mlp_w2, mlp_b2;                 // [D x Hm], [D]
};

/// All learnable parameters plus the architecture they belong to.
template <class R>
struct ModelState {
    ModelConfig cfg;
    std::vector<R> embed_w, embed_b;               // [D x patch_in], [D]
    std::vector<R> pos;                            // [T x D]
    std::vector<BlockParams<R>> blocks;
    std::vector<R> lnf_gamma, lnf_beta;            // [D]
    std::vector<R> head_w, head_b;                 // [patch_out x D], [patch_out]

    /// Named view over every parameter group as a flat real array (complex
    /// groups are exposed as interleaved re/im). Order is fixed; checkpoints,
    /// the optimizer, and the gradient check all iterate it.
    struct GroupRef {
        std::string name;
        R* data;
        std::size_t size;
    };
    std::vector<GroupRef> groups();

    static ModelState init(const ModelConfig& cfg, std::uint64_t seed);
    static ModelState zeros(const ModelConfig& cfg);
    void check_finite() const;
};

template <class R, class R2>
ModelState<R2> convert(const ModelState<R>& s);

template <class R>
struct BlockCache {
    std::vector<R> x;                              // tokens entering the block [T*D]
    std::vector<R> mu1, rstd1, u;
    std::vector<std::complex<R>> uhat, a1, v, s;   // [T*D]
    std::vector<R> mix, z, mu2, rstd2, m;
    std::vector<R> h1pre, h1;                      // [T*Hm]
};

template <class R>
struct ForwardCache {
    std::vector<R> input;                          // [Cin*H*W]
    std::vector<R> tok0;                           // [T*D]
    std::vector<BlockCache<R>> blocks;
    std::vector<R> xlast, muf, rstdf, xf;          // final tokens and norm
    std::vector<R> output;                         // [Cout*H*W]
};

/// Forward/backward engine. Holds FFT plans and scratch space; parameters
/// are read-only, so one Network per thread is safe.
template <class R>
class Network {
public:
    explicit Network(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }

    /// input [in_channels][n_lat][n_lon] -> output [out_channels][n_lat][n_lon]
    void forward(const ModelState<R>& state, const R* input, R* output);
    void forward(const ModelState<R>& state, const R* input, ForwardCache<R>& cache);

    /// Latitude-weighted MSE: mean over channels and grid of w(lat)*(p-t)^2.
    /// lat_weights has n_lat entries with grid mean 1.
    R loss(const R* pred, const R* target, const std::vector<R>& lat_weights) const;

    /// Forward + reverse pass for one sample; accumulates parameter gradients
    /// of the (unreduced) per-sample loss into `grads`. Returns the loss.
    R loss_and_grad(const ModelState<R>& state, const R* input, const R* target,
                    const std::vector<R>& lat_weights, ModelState<R>& grads);

    /// Reverse pass from an arbitrary output gradient.
    void backward(const ModelState<R>& state, const ForwardCache<R>& cache,
                  const R* d_output, ModelState<R>& grads);

private:
    ModelConfig cfg_;
    fft::Plan2d<R> plan_;
    std::vector<std::complex<R>> chan_buf_; // [T]
};

void write_checkpoint(const ModelState<float>& state, const std::string& path);
ModelState<float> read_checkpoint(const std::string& path);

extern template struct ModelState<float>;
extern template struct ModelState<double>;
extern template class Network<float>;
extern template class Network<double>;
extern template ModelState<double> convert<float, double>(const ModelState<float>&);
extern template ModelState<float> convert<double, float>(const ModelState<double>&);

} // namespace afno
} // namespace ddw
