#pragma once

#include <map>
#include <string>
#include <vector>

#include "setdino/autodiff.hpp"
#include "setdino/image.hpp"
#include "setdino/tensor.hpp"

namespace setdino::encoder {

struct ViTConfig {
    int image_size = 32;  // global-crop input side
    int patch_size = 8;
    int embed_dim = 96;
    int depth = 4;
    int n_heads = 4;
    int mlp_ratio = 4;
    int projector_hidden_dim = 256;
    int bottleneck_dim = 64;
    int n_prototypes = 1024;
    int in_channels = 4;

    void validate() const;
    int grid() const { return image_size / patch_size; }
    int n_patches() const { return grid() * grid(); }
    int patch_dim() const { return in_channels * patch_size * patch_size; }
    // class tokens of the last min(depth, 4) blocks are used as features
    int feature_layers() const { return depth < 4 ? depth : 4; }
};

// All learnable parameters as named tensors. std::map keeps iteration order
// deterministic, which the optimizer and EMA rely on.
struct EncoderState {
    ViTConfig config;
    std::map<std::string, MatF> tensors;
    long parameter_count() const;
};

EncoderState init_encoder(const ViTConfig& config, std::uint64_t seed);

// flatten a batch of [C, H, W] images into patch-pixel rows [B*P, C*ps*ps]
MatF patchify(const std::vector<const Image*>& images, int patch_size);

// bicubic resampling weights from a src_grid^2 patch grid to dst_grid^2
MatF pos_embed_resample_matrix(int src_grid, int dst_grid);

// ---------------------------------------------------------------------------
// Taped forward builders (shared between training and inference paths)
// ---------------------------------------------------------------------------

template <typename Real>
struct ParamIds {
    std::map<std::string, int> id;
    int at(const std::string& name) const {
        auto it = id.find(name);
        if (it == id.end()) throw DataError("unknown parameter tensor: " + name);
        return it->second;
    }
};

template <typename Real>
ParamIds<Real> load_params(ad::Tape<Real>& tape, const EncoderState& state) {
    ParamIds<Real> ids;
    for (const auto& [name, mat] : state.tensors)
        ids.id[name] = tape.leaf(mat.template cast<Real>());
    return ids;
}

struct VitNodes {
    int cls_final = -1;               // [B, d]
    std::vector<int> cls_per_layer;   // last feature_layers() blocks, each [B, d]
};

template <typename Real>
VitNodes vit_forward(ad::Tape<Real>& tape, const ParamIds<Real>& p, const ViTConfig& cfg,
                     int patch_pixels, int images, int grid_side, bool want_per_layer = false);

// projector MLP + L2 bottleneck + weight-normalized prototypes -> logits [*, K]
template <typename Real>
int head_forward(ad::Tape<Real>& tape, const ParamIds<Real>& p, int x);

// ---------------------------------------------------------------------------
// Plain inference API
// ---------------------------------------------------------------------------

struct EncodeResult {
    MatF class_tokens;        // [B, d]
    MatF last_layers_tokens;  // [B, feature_layers * d]
};

// Deterministic inference; images may be any square size with side divisible
// by patch_size (position embeddings are resampled). Throws DataError on a
// channel-count mismatch.
EncodeResult encode(const EncoderState& state, const std::vector<const Image*>& images);

// arithmetic mean over the set axis (rows); n = 0 raises DataError
MatF aggregate(const MatF& embeddings);

// head logits then temperature softmax; the teacher path passes its center
// to subtract before sharpening. Probabilities are computed in double so
// every entry stays strictly positive.
MatD project_and_sharpen(const EncoderState& state, const MatF& set_embeddings,
                         double temperature, const MatD* center = nullptr);

// head logits without sharpening (used by the center update)
MatF head_logits(const EncoderState& state, const MatF& embeddings);

// ---------------------------------------------------------------------------
// Versioned named-tensor checkpoint container
// ---------------------------------------------------------------------------

struct Checkpoint {
    ViTConfig config;
    std::string meta_json = "{}";  // free-form metadata (step counters, ...)
    std::map<std::string, MatF> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// extract an encoder (bare names or a "student."/"teacher." prefix)
EncoderState encoder_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix);

// ---------------------------------------------------------------------------

template <typename Real>
VitNodes vit_forward(ad::Tape<Real>& tape, const ParamIds<Real>& p, const ViTConfig& cfg,
                     int patch_pixels, int images, int grid_side, bool want_per_layer) {
    const int P = grid_side * grid_side;
    const int T = P + 1;

    int x = tape.add_rowvec(tape.matmul(patch_pixels, p.at("patch_embed.weight")),
                            p.at("patch_embed.bias"));

    // position table: row 0 is the class position, rest the native grid
    int pos_cls = tape.gather_rows(p.at("pos_embed"), {0});
    std::vector<int> patch_rows(cfg.n_patches());
    for (int i = 0; i < cfg.n_patches(); ++i) patch_rows[i] = i + 1;
    int pos_patches = tape.gather_rows(p.at("pos_embed"), patch_rows);
    if (grid_side != cfg.grid())
        pos_patches = tape.matmul_const_left(
            pos_embed_resample_matrix(cfg.grid(), grid_side).template cast<Real>(),
            pos_patches);
    int pos = tape.concat_rows(pos_cls, pos_patches);

    int tokens = tape.prepend_row_per_block(x, p.at("cls_token"), P);
    tokens = tape.add_tiled(tokens, pos, T);

    VitNodes out;
    const int first_kept = cfg.depth - cfg.feature_layers();
    std::vector<int> cls_rows(images);
    for (int i = 0; i < images; ++i) cls_rows[i] = i * T;

    for (int layer = 0; layer < cfg.depth; ++layer) {
        const std::string b = "blocks." + std::to_string(layer) + ".";
        int h = tape.layer_norm(tokens, p.at(b + "norm1.gamma"), p.at(b + "norm1.beta"));
        int qkv = tape.add_rowvec(tape.matmul(h, p.at(b + "attn.qkv.weight")),
                                  p.at(b + "attn.qkv.bias"));
        int attn = tape.mhsa(qkv, images, T, cfg.n_heads);
        attn = tape.add_rowvec(tape.matmul(attn, p.at(b + "attn.proj.weight")),
                               p.at(b + "attn.proj.bias"));
        tokens = tape.add(tokens, attn);
        int h2 = tape.layer_norm(tokens, p.at(b + "norm2.gamma"), p.at(b + "norm2.beta"));
        int m = tape.add_rowvec(tape.matmul(h2, p.at(b + "mlp.fc1.weight")),
                                p.at(b + "mlp.fc1.bias"));
        m = tape.gelu(m);
        m = tape.add_rowvec(tape.matmul(m, p.at(b + "mlp.fc2.weight")),
                            p.at(b + "mlp.fc2.bias"));
        tokens = tape.add(tokens, m);

        if (want_per_layer && layer >= first_kept) {
            int normed = tape.layer_norm(tokens, p.at("norm.gamma"), p.at("norm.beta"));
            out.cls_per_layer.push_back(tape.gather_rows(normed, cls_rows));
        }
    }

    int normed = tape.layer_norm(tokens, p.at("norm.gamma"), p.at("norm.beta"));
    out.cls_final = tape.gather_rows(normed, cls_rows);
    return out;
}

template <typename Real>
int head_forward(ad::Tape<Real>& tape, const ParamIds<Real>& p, int x) {
    int h = tape.add_rowvec(tape.matmul(x, p.at("proj.fc1.weight")), p.at("proj.fc1.bias"));
    h = tape.gelu(h);
    h = tape.add_rowvec(tape.matmul(h, p.at("proj.fc2.weight")), p.at("proj.fc2.bias"));
    h = tape.gelu(h);
    h = tape.add_rowvec(tape.matmul(h, p.at("proj.fc3.weight")), p.at("proj.fc3.bias"));
    h = tape.l2_normalize_rows(h);
    int prototypes = tape.l2_normalize_cols(p.at("head.prototypes"));
    return tape.matmul(h, prototypes);
}

}  // namespace setdino::encoder
