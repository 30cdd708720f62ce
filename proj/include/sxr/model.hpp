#pragma once

#include "sxr/features.hpp"
#include "sxr/gestures.hpp"
#include "sxr/nn.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sxr {

// Which modality paths run. Disabled paths are never evaluated: their
// projection is exact zeros, their gate is forced to exact zero, and the
// corresponding input tensor is never read.
enum class ModelMode { Multi, HandOnly, ImuOnly };

std::string_view model_mode_name(ModelMode mode);
ModelMode model_mode_from_name(std::string_view name);

struct ModelConfig {
    std::vector<int> tcn_channels = {32, 32, 32, 64, 64, 64, 64, 64, 64, 64};
    std::vector<int> tcn_dilations = {1, 2, 4, 6, 8, 1, 2, 4, 6, 8};
    int tcn_kernel = 5;
    double tcn_dropout = 0.2;
    std::vector<int> imu_channels = {32, 64, 128};
    int imu_kernel_h = 5;
    int imu_kernel_w = 1;
    int imu_groups = 8;
    double channel_dropout = 0.2;
    int fusion_dim = 256;
    int head_hidden = 128;
    double head_dropout = 0.5;
    int gesture_classes = kGestureClassCount;
    int contact_classes = 2;
    double loss_contact_weight = 0.5;
    FeatureConfig features;
    std::uint64_t seed = 1;

    // A narrow variant (same depth) for fast tests and desk-scale training.
    static ModelConfig tiny();

    void validate() const; // throws std::invalid_argument
    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);
    std::uint64_t hash() const; // FNV-1a over to_text()
};

// Post-softmax view of one window's outputs.
struct Prediction {
    std::vector<double> contact; // P(touch) per hand frame, 60 entries
    std::vector<double> gesture; // 9 class probabilities, sums to 1
};

class Model {
public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }

    // Registry order is fixed; Adam and checkpoints key off it.
    std::vector<nn::Param*> params();
    std::vector<const nn::Param*> params() const;

    struct ParamCounts {
        std::int64_t hand = 0;
        std::int64_t imu = 0;
        std::int64_t fusion_heads = 0;
        std::int64_t total = 0;
    };
    ParamCounts count_params() const;

    struct Output {
        Tensor contact_logits; // contact_classes x 60
        Tensor gesture_logits; // gesture_classes
    };

    // Everything forward/backward touches lives here so a const model can be
    // shared across threads, one workspace per thread.
    struct Workspace {
        // hand path
        Tensor hand_flat;
        std::vector<Tensor> tcn_in, tcn_conv, tcn_act, tcn_mask, tcn_res;
        Tensor hand_feat;
        // imu path
        Tensor imu_img, imu_cmask;
        std::vector<Tensor> imu_conv, imu_gn, imu_pool, imu_act;
        std::vector<nn::GroupNormCache> imu_gn_cache;
        std::vector<std::vector<std::int64_t>> imu_argmax;
        Tensor imu_feat, imu_up;
        // fusion
        Tensor ph, pi, gcat, gh_pre, gi_pre, gh, gi, gated, fused;
        // heads
        Tensor contact_hidden_pre, contact_hidden, contact_mask;
        Tensor pooled, gesture_hidden_pre, gesture_hidden, gesture_mask;
        ModelMode mode = ModelMode::Multi;
        bool training = false;
    };

    // hand: 60x8x3x2 tensor (ignored in ImuOnly mode); imu: 200x6x4 tensor
    // (ignored in HandOnly mode). Dropout masks are drawn from `rng` when
    // training (required then, unused otherwise).
    Output forward(const Tensor& hand, const Tensor& imu, Workspace& ws,
                   ModelMode mode = ModelMode::Multi, bool training = false,
                   RngStream* rng = nullptr) const;

    // Accumulates parameter gradients for the forward pass recorded in ws.
    void backward(const Workspace& ws, const Output& grad_logits);

    Prediction predict(const Tensor& hand, const Tensor& imu, Workspace& ws,
                       ModelMode mode = ModelMode::Multi) const;

    void zero_grads();

private:
    struct TcnBlock {
        nn::Param w, b;          // conv
        nn::Param res_w, res_b;  // 1x1 residual projection (when channels differ)
        bool has_res = false;
        int dilation = 1;
    };
    struct ImuBlock {
        nn::Param w, b;          // conv2d
        nn::Param gn_gain, gn_bias;
    };

    void register_params();

    ModelConfig cfg_;
    std::vector<TcnBlock> tcn_;
    std::vector<ImuBlock> imu_;
    nn::Param hand_proj_w_, hand_proj_b_; // 64 -> fusion
    nn::Param imu_proj_w_, imu_proj_b_;   // 128 -> fusion
    nn::Param gate_h_w_, gate_h_b_;       // 2*fusion -> fusion
    nn::Param gate_i_w_, gate_i_b_;
    nn::Param fuse_w_, fuse_b_;           // fusion -> fusion
    nn::Param contact_hidden_w_, contact_hidden_b_, contact_out_w_, contact_out_b_;
    nn::Param gesture_hidden_w_, gesture_hidden_b_, gesture_out_w_, gesture_out_b_;
    std::vector<nn::Param*> registry_;
};

// Flattens the 60x8x3x2 hand tensor to 48 channels x 60 frames
// (channel = ((feature*3)+dim)*2 + finger) and the 200x6x4 IMU tensor to a
// 4-channel image: component x 200 time x 6 sensor channels. The hand
// acceleration rows are divided by the accelerometer full scale (the IMU
// normalization convention) so positions and accelerations reach the encoder
// at comparable magnitude; raw m/s^2 values are ~150x the position entries
// and stall the optimizer.
Tensor flatten_hand(const Tensor& hand, double accel_full_scale);
Tensor imu_image(const Tensor& imu);

struct LossWeights {
    Tensor gesture; // per gesture class
    Tensor contact; // (no-touch, touch)

    static LossWeights unit(int gesture_classes = kGestureClassCount);
};

// L = weighted CE(gesture) + contact_term_weight * mean over frames of the
// per-frame weighted contact loss. Gradients (if requested) are accumulated
// into `grads` scaled by grad_scale.
double total_loss(const Model::Output& out, std::span<const bool> contact_labels,
                  GestureClass gesture_label, const LossWeights& weights,
                  double contact_term_weight, Model::Output* grads = nullptr,
                  double grad_scale = 1.0);

// Checkpoints: versioned binary with the embedded config text and named
// parameter blocks; round trips are bit exact.
void save_weights(const Model& model, const std::filesystem::path& path);
void load_weights(Model& model, const std::filesystem::path& path); // config must match
Model load_model(const std::filesystem::path& path);                // builds from the file

} // namespace sxr
