#pragma once

#include <string>

#include "anyres/embedding.hpp"
#include "anyres/nn.hpp"

namespace anyres {

// Hypernetwork-based continuous upsampling of guidance maps. Per hooked
// level: reduce token width, mix with learnable tokens through self-attention,
// emit the weights of a small coordinate MLP, then evaluate that MLP on a
// normalized position grid of any target size. The bilinear+conv path is the
// ablation baseline.
struct InrConfig {
    int64_t reduced_dim = 1024;     // 512/1024 in the parameter-count presets
    int64_t num_tokens = 64;        // learnable tokens feeding the weight heads
    int64_t fusion_depth = 2;       // self-attention layers over the token mix
    int64_t mlp_hidden = 64;        // coordinate MLP width (3 layers)
    int64_t out_channels = 64;
    int64_t fourier_freqs = 4;      // coordinate encoding: dim = 4 * freqs
    int64_t token_posenc_freqs = 4; // positional encoding added to guidance tokens
    int64_t max_tokens = 4096;      // attention cost guard
    int64_t biconv_depth = 2;

    void validate() const {
        if (reduced_dim < 1 || num_tokens < 1 || fusion_depth < 1 || mlp_hidden < 1 ||
            out_channels < 1 || fourier_freqs < 1 || biconv_depth < 1)
            throw config_error("inr config: all dimensions must be positive");
    }
};

// Normalized cell-center grid: coord(i) = -1 + (2i+1)/n on each axis.
template <class T>
struct PositionGrid {
    int64_t h = 0, w = 0;
    std::vector<T> coords;  // h*w*2, (x, y) pairs in [-1,1]

    static PositionGrid make(int64_t h, int64_t w) {
        require(h >= 1 && w >= 1, "position grid: empty");
        PositionGrid g;
        g.h = h;
        g.w = w;
        g.coords.resize(size_t(h * w * 2));
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                g.coords[size_t((y * w + x) * 2)] = T(-1.0 + double(2 * x + 1) / double(w));
                g.coords[size_t((y * w + x) * 2 + 1)] = T(-1.0 + double(2 * y + 1) / double(h));
            }
        return g;
    }
};

// Predicted coordinate-MLP parameters; tensors live on the tape so training
// gradients flow back into the hypernetwork.
template <class T>
struct ImplicitWeights {
    std::vector<Tensor<T>> w;  // [in_i, out_i]
    std::vector<Tensor<T>> b;  // [1, out_i]
};

template <class T>
struct TokenSeq {
    Tensor<T> tokens;  // [h*w, reduced_dim]
    int64_t h = 0, w = 0;
};

template <class T>
struct HyperNetwork {
    InrConfig cfg;
    int64_t in_channels = 0;
    Linear<T> reduce;
    Tensor<T> learn_tokens;  // [num_tokens, reduced_dim]
    Linear<T> token_pos;
    std::vector<SelfAttention<T>> attn;
    std::vector<Linear<T>> heads;       // one per learnable token
    std::vector<int64_t> layer_in, layer_out;  // coordinate MLP layout
    std::vector<int64_t> head_offset, head_len;

    HyperNetwork() = default;
    HyperNetwork(const InrConfig& c, int64_t in_ch, Rng& rng) : cfg(c), in_channels(in_ch) {
        cfg.validate();
        reduce = Linear<T>(in_ch, cfg.reduced_dim, rng);
        learn_tokens = Tensor<T>::randn({cfg.num_tokens, cfg.reduced_dim}, rng,
                                        1.0 / std::sqrt(double(cfg.reduced_dim)), true);
        if (cfg.token_posenc_freqs > 0)
            token_pos = Linear<T>(fourier_dim(cfg.token_posenc_freqs), cfg.reduced_dim, rng);
        for (int64_t i = 0; i < cfg.fusion_depth; ++i) attn.emplace_back(cfg.reduced_dim, rng);

        layer_in = {fourier_dim(cfg.fourier_freqs), cfg.mlp_hidden, cfg.mlp_hidden};
        layer_out = {cfg.mlp_hidden, cfg.mlp_hidden, cfg.out_channels};
        int64_t slots = 0;
        for (size_t i = 0; i < layer_in.size(); ++i) slots += layer_in[i] * layer_out[i] + layer_out[i];
        // distribute the flat slot vector over the learnable tokens
        int64_t per = (slots + cfg.num_tokens - 1) / cfg.num_tokens;
        int64_t off = 0;
        for (int64_t k = 0; k < cfg.num_tokens && off < slots; ++k) {
            int64_t len = std::min(per, slots - off);
            head_offset.push_back(off);
            head_len.push_back(len);
            heads.emplace_back(cfg.reduced_dim, len, rng);
            off += len;
        }
    }

    int64_t total_slots() const {
        int64_t s = 0;
        for (size_t i = 0; i < layer_in.size(); ++i) s += layer_in[i] * layer_out[i] + layer_out[i];
        return s;
    }

    // raster-order tokens of width reduced_dim from a [H, W, C] guidance map
    TokenSeq<T> reduce_tokens(const Tensor<T>& guidance_map) const {
        require(guidance_map.shape().size() == 3, "reduce_tokens: expected [H,W,C] map");
        require(guidance_map.dim(2) == in_channels,
                "reduce_tokens: channel mismatch, got " + std::to_string(guidance_map.dim(2)));
        TokenSeq<T> seq;
        seq.h = guidance_map.dim(0);
        seq.w = guidance_map.dim(1);
        seq.tokens = reduce.forward(reshape(guidance_map, {seq.h * seq.w, in_channels}));
        return seq;
    }

    ImplicitWeights<T> predict_weights(const TokenSeq<T>& seq) const {
        int64_t hw = seq.h * seq.w;
        require(hw + cfg.num_tokens <= cfg.max_tokens,
                "predict_weights: token count exceeds max_tokens guard");
        require(seq.tokens.cols() == cfg.reduced_dim, "predict_weights: token width mismatch");
        Tensor<T> toks = seq.tokens;
        if (cfg.token_posenc_freqs > 0) {
            Tensor<T> pos = Tensor<T>::zeros({hw, fourier_dim(cfg.token_posenc_freqs)});
            PositionGrid<T> grid = PositionGrid<T>::make(seq.h, seq.w);
            for (int64_t i = 0; i < hw; ++i)
                fourier_encode_2d(grid.coords[size_t(2 * i)], grid.coords[size_t(2 * i + 1)],
                                  cfg.token_posenc_freqs, pos.data() + i * fourier_dim(cfg.token_posenc_freqs));
            toks = add(toks, token_pos.forward(pos));
        }
        Tensor<T> x = concat_rows(toks, learn_tokens);
        for (const auto& layer : attn) x = layer.forward(x, hw + cfg.num_tokens);
        // read back the updated learnable tokens and map them to weight slots
        Tensor<T> flat;
        for (size_t k = 0; k < heads.size(); ++k) {
            Tensor<T> tok = slice_rows(x, hw + int64_t(k), 1);
            Tensor<T> part = heads[k].forward(tok);
            flat = k == 0 ? part : concat_cols(flat, part);
        }
        ImplicitWeights<T> out;
        int64_t off = 0;
        for (size_t i = 0; i < layer_in.size(); ++i) {
            int64_t wn = layer_in[i] * layer_out[i];
            // scale-normalized weight prediction: divide by sqrt(fan-in)
            Tensor<T> wi = mul_scalar(slice_cols(flat, off, wn), T(1.0 / std::sqrt(double(layer_in[i]))));
            out.w.push_back(reshape(wi, {layer_in[i], layer_out[i]}));
            off += wn;
            out.b.push_back(slice_cols(flat, off, layer_out[i]));
            off += layer_out[i];
        }
        return out;
    }

    // evaluate the coordinate MLP pointwise over the grid -> [h, w, out_channels]
    Tensor<T> query(const ImplicitWeights<T>& weights, const PositionGrid<T>& grid) const {
        require(weights.w.size() == layer_in.size(), "query: weight set layout mismatch");
        for (const auto& wt : weights.w)
            require(all_finite(wt.vals()), "query: non-finite implicit weights");
        int64_t hw = grid.h * grid.w;
        int64_t pdim = fourier_dim(cfg.fourier_freqs);
        Tensor<T> pos = Tensor<T>::zeros({hw, pdim});
        for (int64_t i = 0; i < hw; ++i)
            fourier_encode_2d(grid.coords[size_t(2 * i)], grid.coords[size_t(2 * i + 1)],
                              cfg.fourier_freqs, pos.data() + i * pdim);
        Tensor<T> x = pos;
        for (size_t i = 0; i < weights.w.size(); ++i) {
            x = add_rowvec(matmul(x, weights.w[i]), weights.b[i]);
            if (i + 1 < weights.w.size()) x = gelu(x);
        }
        return reshape(x, {grid.h, grid.w, cfg.out_channels});
    }

    Tensor<T> upsample(const Tensor<T>& guidance_map, int64_t target_h, int64_t target_w) const {
        return query(predict_weights(reduce_tokens(guidance_map)), PositionGrid<T>::make(target_h, target_w));
    }

    void collect(ParamRegistry<T>& reg, const std::string& prefix, bool adapter) {
        reduce.collect(reg, prefix + ".reduce", adapter);
        reg.add(prefix + ".tokens", learn_tokens, adapter);
        if (cfg.token_posenc_freqs > 0) token_pos.collect(reg, prefix + ".token_pos", adapter);
        for (size_t i = 0; i < attn.size(); ++i)
            attn[i].collect(reg, prefix + ".attn" + std::to_string(i), adapter);
        for (size_t i = 0; i < heads.size(); ++i)
            heads[i].collect(reg, prefix + ".head" + std::to_string(i), adapter);
    }
};

// Ablation baseline: bilinear interpolation to the target size followed by a
// small conv stack.
template <class T>
struct BiConvUpsampler {
    std::vector<Conv<T>> convs;
    int64_t in_channels = 0, out_channels = 0;

    BiConvUpsampler() = default;
    BiConvUpsampler(int64_t in_ch, int64_t out_ch, int64_t depth, Rng& rng)
        : in_channels(in_ch), out_channels(out_ch) {
        require(depth >= 1, "biconv: depth must be >= 1");
        convs.emplace_back(in_ch, out_ch, rng);
        for (int64_t i = 1; i < depth; ++i) convs.emplace_back(out_ch, out_ch, rng);
    }

    Tensor<T> upsample(const Tensor<T>& guidance_map, int64_t target_h, int64_t target_w) const {
        require(guidance_map.shape().size() == 3, "biconv: expected [H,W,C] map");
        int64_t h = guidance_map.dim(0), w = guidance_map.dim(1), c = guidance_map.dim(2);
        require(target_h >= h && target_w >= w, "biconv: downscaling request");
        Tensor<T> x = bilinear_resize(reshape(guidance_map, {1, h, w, c}), target_h, target_w);
        for (size_t i = 0; i < convs.size(); ++i) {
            if (i > 0) x = gelu(x);
            x = convs[i].forward(x);
        }
        return reshape(x, {target_h, target_w, out_channels});
    }

    void collect(ParamRegistry<T>& reg, const std::string& prefix, bool adapter) {
        for (size_t i = 0; i < convs.size(); ++i)
            convs[i].collect(reg, prefix + ".conv" + std::to_string(i), adapter);
    }
};

enum class UpsamplerKind { inr, bi_conv };

inline UpsamplerKind upsampler_kind_from(const std::string& s) {
    if (s == "inr") return UpsamplerKind::inr;
    if (s == "bi_conv") return UpsamplerKind::bi_conv;
    throw config_error("unknown upsampler kind: " + s);
}

// One upsampler instance per hooked guidance level; levels never share
// parameters.
template <class T>
struct GuidanceUpsampler {
    UpsamplerKind kind = UpsamplerKind::inr;
    std::vector<HyperNetwork<T>> hyper;      // per level when kind == inr
    std::vector<BiConvUpsampler<T>> biconv;  // per level when kind == bi_conv

    GuidanceUpsampler() = default;
    GuidanceUpsampler(UpsamplerKind k, const InrConfig& cfg, int64_t levels, int64_t in_ch, Rng& rng)
        : kind(k) {
        for (int64_t i = 0; i < levels; ++i) {
            if (kind == UpsamplerKind::inr)
                hyper.emplace_back(cfg, in_ch, rng);
            else
                biconv.emplace_back(in_ch, cfg.out_channels, cfg.biconv_depth, rng);
        }
    }

    int64_t levels() const { return kind == UpsamplerKind::inr ? int64_t(hyper.size()) : int64_t(biconv.size()); }

    Tensor<T> upsample_level(int64_t level, const Tensor<T>& map, int64_t th, int64_t tw) const {
        return kind == UpsamplerKind::inr ? hyper[size_t(level)].upsample(map, th, tw)
                                          : biconv[size_t(level)].upsample(map, th, tw);
    }

    void collect(ParamRegistry<T>& reg, const std::string& prefix, bool adapter) {
        for (size_t i = 0; i < hyper.size(); ++i)
            hyper[i].collect(reg, prefix + ".level" + std::to_string(i), adapter);
        for (size_t i = 0; i < biconv.size(); ++i)
            biconv[i].collect(reg, prefix + ".level" + std::to_string(i) + ".biconv", adapter);
    }
};

}  // namespace anyres
