#include "sxr/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sxr {

using nn::Param;

namespace {

constexpr int kTcnBlocks = 10;
constexpr int kImuBlocks = 3;
constexpr int kImuTimeOut = kImuWindowLen / 8; // three 2x1 pools: 200 -> 25
constexpr double kGroupNormEps = 1e-5;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_int_list(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

int fan_in_of(const Tensor& w) {
    int f = 1;
    for (int i = 1; i < w.rank(); ++i) f *= w.dim(i);
    return f;
}

} // namespace

std::string_view model_mode_name(ModelMode mode) {
    switch (mode) {
        case ModelMode::Multi: return "multi";
        case ModelMode::HandOnly: return "hand";
        case ModelMode::ImuOnly: return "imu";
    }
    throw std::logic_error("bad model mode");
}

ModelMode model_mode_from_name(std::string_view name) {
    if (name == "multi") return ModelMode::Multi;
    if (name == "hand") return ModelMode::HandOnly;
    if (name == "imu") return ModelMode::ImuOnly;
    throw std::invalid_argument("unknown model mode: " + std::string(name));
}

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

ModelConfig ModelConfig::tiny() {
    ModelConfig cfg;
    cfg.tcn_channels.assign(kTcnBlocks, 16);
    cfg.imu_channels = {8, 16, 32};
    cfg.imu_groups = 4;
    cfg.fusion_dim = 64;
    cfg.head_hidden = 32;
    return cfg;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
    if (tcn_channels.size() != kTcnBlocks || tcn_dilations.size() != kTcnBlocks)
        fail("tcn channel and dilation lists must both have length " + std::to_string(kTcnBlocks));
    for (int c : tcn_channels)
        if (c <= 0) fail("tcn channels must be positive");
    for (int d : tcn_dilations)
        if (d <= 0) fail("tcn dilations must be positive");
    if (tcn_kernel < 1) fail("tcn kernel must be >= 1");
    if (tcn_dropout < 0.0 || tcn_dropout >= 1.0) fail("tcn dropout must be in [0, 1)");
    if (imu_channels.size() != kImuBlocks)
        fail("imu encoder needs exactly " + std::to_string(kImuBlocks) + " blocks");
    for (int c : imu_channels) {
        if (c <= 0) fail("imu channels must be positive");
        if (imu_groups <= 0 || c % imu_groups != 0)
            fail("imu channels must be divisible by imu_groups");
    }
    if (imu_kernel_h < 1 || imu_kernel_h % 2 == 0) fail("imu_kernel_h must be odd");
    if (imu_kernel_w != 1) fail("imu_kernel_w must be 1 (sensor axis untouched)");
    if (channel_dropout < 0.0 || channel_dropout >= 1.0) fail("channel_dropout must be in [0, 1)");
    if (fusion_dim <= 0) fail("fusion_dim must be positive");
    if (head_hidden <= 0) fail("head_hidden must be positive");
    if (gesture_classes != kGestureClassCount) fail("gesture_classes must be 9");
    if (contact_classes != 2) fail("contact_classes must be 2");
    if (loss_contact_weight < 0.0) fail("loss_contact_weight must be >= 0");
    if (head_dropout < 0.0 || head_dropout >= 1.0) fail("head_dropout must be in [0, 1)");
    if (features.accel_full_scale <= 0.0 || features.gyro_full_scale <= 0.0)
        fail("IMU full-scale values must be positive");
    if (features.filter_order < 2 || features.filter_order % 2 != 0)
        fail("filter_order must be a positive even integer");
}

std::string ModelConfig::to_text() const {
    std::string s;
    auto kv = [&s](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
    kv("tcn_channels", fmt_int_list(tcn_channels));
    kv("tcn_dilations", fmt_int_list(tcn_dilations));
    kv("tcn_kernel", std::to_string(tcn_kernel));
    kv("tcn_dropout", fmt_double(tcn_dropout));
    kv("imu_channels", fmt_int_list(imu_channels));
    kv("imu_kernel_h", std::to_string(imu_kernel_h));
    kv("imu_kernel_w", std::to_string(imu_kernel_w));
    kv("imu_groups", std::to_string(imu_groups));
    kv("channel_dropout", fmt_double(channel_dropout));
    kv("fusion_dim", std::to_string(fusion_dim));
    kv("head_hidden", std::to_string(head_hidden));
    kv("head_dropout", fmt_double(head_dropout));
    kv("gesture_classes", std::to_string(gesture_classes));
    kv("contact_classes", std::to_string(contact_classes));
    kv("loss_contact_weight", fmt_double(loss_contact_weight));
    kv("accel_full_scale", fmt_double(features.accel_full_scale));
    kv("gyro_full_scale", fmt_double(features.gyro_full_scale));
    kv("band_low_lo_hz", fmt_double(features.band_low_lo_hz));
    kv("band_low_hi_hz", fmt_double(features.band_low_hi_hz));
    kv("band_mid_lo_hz", fmt_double(features.band_mid_lo_hz));
    kv("band_mid_hi_hz", fmt_double(features.band_mid_hi_hz));
    kv("band_high_cut_hz", fmt_double(features.band_high_cut_hz));
    kv("filter_order", std::to_string(features.filter_order));
    kv("seed", std::to_string(seed));
    return s;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("model config: bad line '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        if (key == "tcn_channels") cfg.tcn_channels = parse_int_list(val);
        else if (key == "tcn_dilations") cfg.tcn_dilations = parse_int_list(val);
        else if (key == "tcn_kernel") cfg.tcn_kernel = std::stoi(val);
        else if (key == "tcn_dropout") cfg.tcn_dropout = std::stod(val);
        else if (key == "imu_channels") cfg.imu_channels = parse_int_list(val);
        else if (key == "imu_kernel_h") cfg.imu_kernel_h = std::stoi(val);
        else if (key == "imu_kernel_w") cfg.imu_kernel_w = std::stoi(val);
        else if (key == "imu_groups") cfg.imu_groups = std::stoi(val);
        else if (key == "channel_dropout") cfg.channel_dropout = std::stod(val);
        else if (key == "fusion_dim") cfg.fusion_dim = std::stoi(val);
        else if (key == "head_hidden") cfg.head_hidden = std::stoi(val);
        else if (key == "head_dropout") cfg.head_dropout = std::stod(val);
        else if (key == "gesture_classes") cfg.gesture_classes = std::stoi(val);
        else if (key == "contact_classes") cfg.contact_classes = std::stoi(val);
        else if (key == "loss_contact_weight") cfg.loss_contact_weight = std::stod(val);
        else if (key == "accel_full_scale") cfg.features.accel_full_scale = std::stod(val);
        else if (key == "gyro_full_scale") cfg.features.gyro_full_scale = std::stod(val);
        else if (key == "band_low_lo_hz") cfg.features.band_low_lo_hz = std::stod(val);
        else if (key == "band_low_hi_hz") cfg.features.band_low_hi_hz = std::stod(val);
        else if (key == "band_mid_lo_hz") cfg.features.band_mid_lo_hz = std::stod(val);
        else if (key == "band_mid_hi_hz") cfg.features.band_mid_hi_hz = std::stod(val);
        else if (key == "band_high_cut_hz") cfg.features.band_high_cut_hz = std::stod(val);
        else if (key == "filter_order") cfg.features.filter_order = std::stoi(val);
        else if (key == "seed") cfg.seed = std::stoull(val);
        else throw std::invalid_argument("model config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

std::uint64_t ModelConfig::hash() const {
    // FNV-1a 64
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : to_text()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();

    const int hand_in = kHandFeatures * 3 * kHandFingers; // 48
    int c_prev = hand_in;
    tcn_.resize(kTcnBlocks);
    for (int i = 0; i < kTcnBlocks; ++i) {
        const int c_out = cfg_.tcn_channels[static_cast<std::size_t>(i)];
        TcnBlock& blk = tcn_[static_cast<std::size_t>(i)];
        const std::string base = "hand.block" + std::to_string(i);
        blk.w = Param(base + ".conv.w", {c_out, c_prev, cfg_.tcn_kernel});
        blk.b = Param(base + ".conv.b", {c_out});
        blk.dilation = cfg_.tcn_dilations[static_cast<std::size_t>(i)];
        blk.has_res = c_prev != c_out;
        if (blk.has_res) {
            blk.res_w = Param(base + ".res.w", {c_out, c_prev, 1});
            blk.res_b = Param(base + ".res.b", {c_out});
        }
        c_prev = c_out;
    }

    int imu_prev = kImuComponents;
    imu_.resize(kImuBlocks);
    for (int i = 0; i < kImuBlocks; ++i) {
        const int c_out = cfg_.imu_channels[static_cast<std::size_t>(i)];
        ImuBlock& blk = imu_[static_cast<std::size_t>(i)];
        const std::string base = "imu.block" + std::to_string(i);
        blk.w = Param(base + ".conv.w", {c_out, imu_prev, cfg_.imu_kernel_h, cfg_.imu_kernel_w});
        blk.b = Param(base + ".conv.b", {c_out});
        blk.gn_gain = Param(base + ".gn.gain", {c_out});
        blk.gn_bias = Param(base + ".gn.bias", {c_out});
        imu_prev = c_out;
    }

    const int F = cfg_.fusion_dim;
    const int hand_out = cfg_.tcn_channels.back();
    const int imu_out = cfg_.imu_channels.back();
    hand_proj_w_ = Param("fusion.hand_proj.w", {F, hand_out});
    hand_proj_b_ = Param("fusion.hand_proj.b", {F});
    imu_proj_w_ = Param("fusion.imu_proj.w", {F, imu_out});
    imu_proj_b_ = Param("fusion.imu_proj.b", {F});
    gate_h_w_ = Param("fusion.gate_h.w", {F, 2 * F});
    gate_h_b_ = Param("fusion.gate_h.b", {F});
    gate_i_w_ = Param("fusion.gate_i.w", {F, 2 * F});
    gate_i_b_ = Param("fusion.gate_i.b", {F});
    fuse_w_ = Param("fusion.out.w", {F, F});
    fuse_b_ = Param("fusion.out.b", {F});

    contact_hidden_w_ = Param("head.contact.hidden.w", {cfg_.head_hidden, F});
    contact_hidden_b_ = Param("head.contact.hidden.b", {cfg_.head_hidden});
    contact_out_w_ = Param("head.contact.out.w", {cfg_.contact_classes, cfg_.head_hidden});
    contact_out_b_ = Param("head.contact.out.b", {cfg_.contact_classes});
    gesture_hidden_w_ = Param("head.gesture.hidden.w", {cfg_.head_hidden, F});
    gesture_hidden_b_ = Param("head.gesture.hidden.b", {cfg_.head_hidden});
    gesture_out_w_ = Param("head.gesture.out.w", {cfg_.gesture_classes, cfg_.head_hidden});
    gesture_out_b_ = Param("head.gesture.out.b", {cfg_.gesture_classes});

    register_params();

    // He-uniform weights, zero biases, unit norm gains; one seeded stream in
    // registry order makes two builds with the same seed bit-identical.
    RngStream rng(cfg_.seed, {0x1717});
    for (Param* p : registry_) {
        const bool is_weight = p->name.size() > 2 && p->name.ends_with(".w");
        const bool is_gain = p->name.ends_with(".gain");
        if (is_weight) {
            nn::init_he_uniform(p->value, fan_in_of(p->value), rng);
        } else if (is_gain) {
            p->value.fill(1.0);
        } // biases stay zero
    }
}

void Model::register_params() {
    registry_.clear();
    for (TcnBlock& blk : tcn_) {
        registry_.push_back(&blk.w);
        registry_.push_back(&blk.b);
        if (blk.has_res) {
            registry_.push_back(&blk.res_w);
            registry_.push_back(&blk.res_b);
        }
    }
    for (ImuBlock& blk : imu_) {
        registry_.push_back(&blk.w);
        registry_.push_back(&blk.b);
        registry_.push_back(&blk.gn_gain);
        registry_.push_back(&blk.gn_bias);
    }
    for (Param* p : {&hand_proj_w_, &hand_proj_b_, &imu_proj_w_, &imu_proj_b_, &gate_h_w_,
                     &gate_h_b_, &gate_i_w_, &gate_i_b_, &fuse_w_, &fuse_b_, &contact_hidden_w_,
                     &contact_hidden_b_, &contact_out_w_, &contact_out_b_, &gesture_hidden_w_,
                     &gesture_hidden_b_, &gesture_out_w_, &gesture_out_b_})
        registry_.push_back(p);
}

std::vector<Param*> Model::params() { return registry_; }

std::vector<const Param*> Model::params() const {
    return {registry_.begin(), registry_.end()};
}

Model::ParamCounts Model::count_params() const {
    ParamCounts counts;
    for (const Param* p : registry_) {
        const std::int64_t n = p->value.size();
        counts.total += n;
        if (p->name.starts_with("hand."))
            counts.hand += n;
        else if (p->name.starts_with("imu."))
            counts.imu += n;
        else
            counts.fusion_heads += n;
    }
    return counts;
}

void Model::zero_grads() {
    for (Param* p : registry_) p->zero_grad();
}

// ---------------------------------------------------------------------------
// input reshaping
// ---------------------------------------------------------------------------

Tensor flatten_hand(const Tensor& hand, double accel_full_scale) {
    if (hand.shape() != std::vector<int>{kHandWindowLen, kHandFeatures, 3, kHandFingers})
        throw std::invalid_argument("hand tensor must be 60x8x3x2, got " + hand.shape_string());
    if (!(accel_full_scale > 0.0))
        throw std::invalid_argument("accel full scale must be positive");
    Tensor out({kHandFeatures * 3 * kHandFingers, kHandWindowLen});
    for (int t = 0; t < kHandWindowLen; ++t)
        for (int f = 0; f < kHandFeatures; ++f) {
            const double scale = f < kHandFeatures / 2 ? 1.0 : 1.0 / accel_full_scale;
            for (int d = 0; d < 3; ++d)
                for (int fi = 0; fi < kHandFingers; ++fi)
                    out((f * 3 + d) * kHandFingers + fi, t) = scale * hand(t, f, d, fi);
        }
    return out;
}

Tensor imu_image(const Tensor& imu) {
    if (imu.shape() != std::vector<int>{kImuWindowLen, kImuChannels, kImuComponents})
        throw std::invalid_argument("imu tensor must be 200x6x4, got " + imu.shape_string());
    Tensor out({kImuComponents, kImuWindowLen, kImuChannels});
    for (int t = 0; t < kImuWindowLen; ++t)
        for (int ch = 0; ch < kImuChannels; ++ch)
            for (int comp = 0; comp < kImuComponents; ++comp)
                out(comp, t, ch) = imu(t, ch, comp);
    return out;
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

Model::Output Model::forward(const Tensor& hand, const Tensor& imu, Workspace& ws, ModelMode mode,
                             bool training, RngStream* rng) const {
    if (training && rng == nullptr)
        throw std::invalid_argument("training forward needs an rng for dropout");
    ws.mode = mode;
    ws.training = training;
    const bool use_hand = mode != ModelMode::ImuOnly;
    const bool use_imu = mode != ModelMode::HandOnly;
    const int T = kHandWindowLen;
    const int F = cfg_.fusion_dim;

    // ---- hand encoder (TCN) ----
    if (use_hand) {
        ws.hand_flat = flatten_hand(hand, cfg_.features.accel_full_scale);
        ws.tcn_conv.resize(kTcnBlocks);
        ws.tcn_act.resize(kTcnBlocks);
        ws.tcn_mask.assign(kTcnBlocks, Tensor{});
        ws.tcn_res.resize(kTcnBlocks);
        ws.tcn_in.resize(kTcnBlocks);
        const Tensor* cur = &ws.hand_flat;
        for (int i = 0; i < kTcnBlocks; ++i) {
            const TcnBlock& blk = tcn_[static_cast<std::size_t>(i)];
            ws.tcn_in[static_cast<std::size_t>(i)] = *cur; // block input, kept for backward
            const Tensor& in = ws.tcn_in[static_cast<std::size_t>(i)];
            Tensor& conv = ws.tcn_conv[static_cast<std::size_t>(i)];
            Tensor& act = ws.tcn_act[static_cast<std::size_t>(i)];
            nn::conv1d_dilated_forward(in, blk.w.value, blk.b.value, blk.dilation, conv);
            nn::relu_forward(conv, act);
            if (training && cfg_.tcn_dropout > 0.0) {
                ws.tcn_mask[static_cast<std::size_t>(i)] =
                    nn::dropout_mask(act.shape(), cfg_.tcn_dropout, *rng);
                nn::apply_mask(ws.tcn_mask[static_cast<std::size_t>(i)], act);
            }
            Tensor& res = ws.tcn_res[static_cast<std::size_t>(i)];
            if (blk.has_res) {
                nn::conv1d_dilated_forward(in, blk.res_w.value, blk.res_b.value, 1, res);
            } else {
                res = in;
            }
            Tensor out(act.shape());
            for (std::int64_t k = 0; k < out.size(); ++k) out.flat(k) = act.flat(k) + res.flat(k);
            ws.hand_feat = std::move(out);
            cur = &ws.hand_feat;
        }
        nn::linear_cols_forward(ws.hand_feat, hand_proj_w_.value, hand_proj_b_.value, ws.ph);
    } else {
        ws.ph = Tensor({F, T});
    }

    // ---- IMU encoder (CNN) ----
    if (use_imu) {
        ws.imu_img = imu_image(imu);
        if (training && cfg_.channel_dropout > 0.0) {
            ws.imu_cmask = nn::channel_dropout_mask(kImuComponents, cfg_.channel_dropout, *rng);
            nn::apply_channel_mask(ws.imu_cmask, ws.imu_img);
        } else {
            ws.imu_cmask = Tensor{};
        }
        ws.imu_conv.resize(kImuBlocks);
        ws.imu_gn.resize(kImuBlocks);
        ws.imu_pool.resize(kImuBlocks);
        ws.imu_act.resize(kImuBlocks);
        ws.imu_gn_cache.resize(kImuBlocks);
        ws.imu_argmax.resize(kImuBlocks);
        const Tensor* cur = &ws.imu_img;
        for (int i = 0; i < kImuBlocks; ++i) {
            const ImuBlock& blk = imu_[static_cast<std::size_t>(i)];
            nn::conv2d_forward(*cur, blk.w.value, blk.b.value, ws.imu_conv[static_cast<std::size_t>(i)]);
            nn::group_norm_forward(ws.imu_conv[static_cast<std::size_t>(i)], cfg_.imu_groups,
                                   blk.gn_gain.value, blk.gn_bias.value, kGroupNormEps,
                                   ws.imu_gn[static_cast<std::size_t>(i)],
                                   ws.imu_gn_cache[static_cast<std::size_t>(i)]);
            nn::maxpool_forward(ws.imu_gn[static_cast<std::size_t>(i)], 2, 1,
                                ws.imu_pool[static_cast<std::size_t>(i)],
                                ws.imu_argmax[static_cast<std::size_t>(i)]);
            nn::relu_forward(ws.imu_pool[static_cast<std::size_t>(i)],
                             ws.imu_act[static_cast<std::size_t>(i)]);
            cur = &ws.imu_act[static_cast<std::size_t>(i)];
        }
        // mean over the sensor axis: C x 25 x 6 -> C x 25
        const Tensor& last = *cur;
        const int C = last.dim(0), Ti = last.dim(1), S = last.dim(2);
        ws.imu_feat = Tensor({C, Ti});
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < Ti; ++t) {
                double sum = 0.0;
                for (int s = 0; s < S; ++s) sum += last(c, t, s);
                ws.imu_feat(c, t) = sum / S;
            }
        // nearest-neighbor upsample 25 -> 60
        ws.imu_up = Tensor({C, T});
        for (int c = 0; c < C; ++c)
            for (int j = 0; j < T; ++j) ws.imu_up(c, j) = ws.imu_feat(c, (j * kImuTimeOut) / T);
        nn::linear_cols_forward(ws.imu_up, imu_proj_w_.value, imu_proj_b_.value, ws.pi);
    } else {
        ws.pi = Tensor({F, T});
    }

    // ---- gated fusion ----
    ws.gcat = Tensor({2 * F, T});
    std::memcpy(ws.gcat.data(), ws.ph.data(), sizeof(double) * ws.ph.size());
    std::memcpy(ws.gcat.data() + ws.ph.size(), ws.pi.data(), sizeof(double) * ws.pi.size());
    if (use_hand) {
        nn::linear_cols_forward(ws.gcat, gate_h_w_.value, gate_h_b_.value, ws.gh_pre);
        nn::sigmoid_forward(ws.gh_pre, ws.gh);
    } else {
        ws.gh = Tensor({F, T}); // gate forced to exact zero
    }
    if (use_imu) {
        nn::linear_cols_forward(ws.gcat, gate_i_w_.value, gate_i_b_.value, ws.gi_pre);
        nn::sigmoid_forward(ws.gi_pre, ws.gi);
    } else {
        ws.gi = Tensor({F, T});
    }
    ws.gated = Tensor({F, T});
    for (std::int64_t k = 0; k < ws.gated.size(); ++k)
        ws.gated.flat(k) = ws.gh.flat(k) * ws.ph.flat(k) + ws.gi.flat(k) * ws.pi.flat(k);
    nn::linear_cols_forward(ws.gated, fuse_w_.value, fuse_b_.value, ws.fused);

    // ---- contact head (per frame) ----
    nn::linear_cols_forward(ws.fused, contact_hidden_w_.value, contact_hidden_b_.value,
                            ws.contact_hidden_pre);
    nn::relu_forward(ws.contact_hidden_pre, ws.contact_hidden);
    if (training && cfg_.head_dropout > 0.0) {
        ws.contact_mask = nn::dropout_mask(ws.contact_hidden.shape(), cfg_.head_dropout, *rng);
        nn::apply_mask(ws.contact_mask, ws.contact_hidden);
    } else {
        ws.contact_mask = Tensor{};
    }
    Output out;
    nn::linear_cols_forward(ws.contact_hidden, contact_out_w_.value, contact_out_b_.value,
                            out.contact_logits);

    // ---- gesture head (window level) ----
    ws.pooled = Tensor({F});
    for (int c = 0; c < F; ++c) {
        double sum = 0.0;
        for (int t = 0; t < T; ++t) sum += ws.fused(c, t);
        ws.pooled(c) = sum / T;
    }
    nn::linear_forward(ws.pooled, gesture_hidden_w_.value, gesture_hidden_b_.value,
                       ws.gesture_hidden_pre);
    nn::relu_forward(ws.gesture_hidden_pre, ws.gesture_hidden);
    if (training && cfg_.head_dropout > 0.0) {
        ws.gesture_mask = nn::dropout_mask(ws.gesture_hidden.shape(), cfg_.head_dropout, *rng);
        nn::apply_mask(ws.gesture_mask, ws.gesture_hidden);
    } else {
        ws.gesture_mask = Tensor{};
    }
    nn::linear_forward(ws.gesture_hidden, gesture_out_w_.value, gesture_out_b_.value,
                       out.gesture_logits);
    return out;
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Model::backward(const Workspace& ws, const Output& grad_logits) {
    const bool use_hand = ws.mode != ModelMode::ImuOnly;
    const bool use_imu = ws.mode != ModelMode::HandOnly;
    const int T = kHandWindowLen;
    const int F = cfg_.fusion_dim;

    Tensor g_fused({F, T});

    // gesture head
    {
        Tensor g_hidden({cfg_.head_hidden});
        nn::linear_backward(ws.gesture_hidden, gesture_out_w_.value, grad_logits.gesture_logits,
                            g_hidden, gesture_out_w_.grad, gesture_out_b_.grad);
        if (ws.training && ws.gesture_mask.size() > 0) nn::apply_mask(ws.gesture_mask, g_hidden);
        Tensor g_pre({cfg_.head_hidden});
        nn::relu_backward(ws.gesture_hidden_pre, g_hidden, g_pre);
        Tensor g_pooled({F});
        nn::linear_backward(ws.pooled, gesture_hidden_w_.value, g_pre, g_pooled,
                            gesture_hidden_w_.grad, gesture_hidden_b_.grad);
        for (int c = 0; c < F; ++c) {
            const double g = g_pooled(c) / T;
            for (int t = 0; t < T; ++t) g_fused(c, t) += g;
        }
    }

    // contact head
    {
        Tensor g_hidden({cfg_.head_hidden, T});
        nn::linear_cols_backward(ws.contact_hidden, contact_out_w_.value,
                                 grad_logits.contact_logits, g_hidden, contact_out_w_.grad,
                                 contact_out_b_.grad);
        if (ws.training && ws.contact_mask.size() > 0) nn::apply_mask(ws.contact_mask, g_hidden);
        Tensor g_pre({cfg_.head_hidden, T});
        nn::relu_backward(ws.contact_hidden_pre, g_hidden, g_pre);
        nn::linear_cols_backward(ws.fused, contact_hidden_w_.value, g_pre, g_fused,
                                 contact_hidden_w_.grad, contact_hidden_b_.grad);
    }

    // fusion output
    Tensor g_gated({F, T});
    nn::linear_cols_backward(ws.gated, fuse_w_.value, g_fused, g_gated, fuse_w_.grad, fuse_b_.grad);

    Tensor g_ph({F, T});
    Tensor g_pi({F, T});
    Tensor g_gcat({2 * F, T});
    if (use_hand) {
        Tensor g_gh({F, T});
        for (std::int64_t k = 0; k < g_gated.size(); ++k) {
            g_gh.flat(k) = g_gated.flat(k) * ws.ph.flat(k);
            g_ph.flat(k) += g_gated.flat(k) * ws.gh.flat(k);
        }
        Tensor g_gh_pre({F, T});
        nn::sigmoid_backward(ws.gh, g_gh, g_gh_pre);
        nn::linear_cols_backward(ws.gcat, gate_h_w_.value, g_gh_pre, g_gcat, gate_h_w_.grad,
                                 gate_h_b_.grad);
    }
    if (use_imu) {
        Tensor g_gi({F, T});
        for (std::int64_t k = 0; k < g_gated.size(); ++k) {
            g_gi.flat(k) = g_gated.flat(k) * ws.pi.flat(k);
            g_pi.flat(k) += g_gated.flat(k) * ws.gi.flat(k);
        }
        Tensor g_gi_pre({F, T});
        nn::sigmoid_backward(ws.gi, g_gi, g_gi_pre);
        nn::linear_cols_backward(ws.gcat, gate_i_w_.value, g_gi_pre, g_gcat, gate_i_w_.grad,
                                 gate_i_b_.grad);
    }
    // split the concat gradient back onto the projections
    for (std::int64_t k = 0; k < g_ph.size(); ++k) g_ph.flat(k) += g_gcat.flat(k);
    for (std::int64_t k = 0; k < g_pi.size(); ++k) g_pi.flat(k) += g_gcat.flat(g_ph.size() + k);

    // ---- hand path backward ----
    if (use_hand) {
        Tensor g_out(ws.hand_feat.shape());
        nn::linear_cols_backward(ws.hand_feat, hand_proj_w_.value, g_ph, g_out, hand_proj_w_.grad,
                                 hand_proj_b_.grad);
        for (int i = kTcnBlocks - 1; i >= 0; --i) {
            TcnBlock& blk = tcn_[static_cast<std::size_t>(i)];
            const Tensor& in = ws.tcn_in[static_cast<std::size_t>(i)];
            Tensor g_in(in.shape());

            // residual branch
            if (blk.has_res) {
                nn::conv1d_dilated_backward(in, blk.res_w.value, 1, g_out, g_in, blk.res_w.grad,
                                            blk.res_b.grad);
            } else {
                for (std::int64_t k = 0; k < g_in.size(); ++k) g_in.flat(k) += g_out.flat(k);
            }

            // main branch: conv -> relu -> dropout
            Tensor g_act = g_out;
            if (ws.training && ws.tcn_mask[static_cast<std::size_t>(i)].size() > 0)
                nn::apply_mask(ws.tcn_mask[static_cast<std::size_t>(i)], g_act);
            Tensor g_conv(ws.tcn_conv[static_cast<std::size_t>(i)].shape());
            nn::relu_backward(ws.tcn_conv[static_cast<std::size_t>(i)], g_act, g_conv);
            nn::conv1d_dilated_backward(in, blk.w.value, blk.dilation, g_conv, g_in, blk.w.grad,
                                        blk.b.grad);
            g_out = std::move(g_in);
        }
    }

    // ---- IMU path backward ----
    if (use_imu) {
        Tensor g_up(ws.imu_up.shape());
        nn::linear_cols_backward(ws.imu_up, imu_proj_w_.value, g_pi, g_up, imu_proj_w_.grad,
                                 imu_proj_b_.grad);
        const int C = ws.imu_feat.dim(0);
        Tensor g_feat(ws.imu_feat.shape());
        for (int c = 0; c < C; ++c)
            for (int j = 0; j < T; ++j) g_feat(c, (j * kImuTimeOut) / T) += g_up(c, j);

        const Tensor& last = ws.imu_act[kImuBlocks - 1];
        const int S = last.dim(2);
        Tensor g_act(last.shape());
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < last.dim(1); ++t) {
                const double g = g_feat(c, t) / S;
                for (int s = 0; s < S; ++s) g_act(c, t, s) += g;
            }

        for (int i = kImuBlocks - 1; i >= 0; --i) {
            ImuBlock& blk = imu_[static_cast<std::size_t>(i)];
            const Tensor& in = i == 0 ? ws.imu_img : ws.imu_act[static_cast<std::size_t>(i - 1)];
            Tensor g_pool(ws.imu_pool[static_cast<std::size_t>(i)].shape());
            nn::relu_backward(ws.imu_pool[static_cast<std::size_t>(i)], g_act, g_pool);
            Tensor g_gn(ws.imu_gn[static_cast<std::size_t>(i)].shape());
            nn::maxpool_backward(ws.imu_argmax[static_cast<std::size_t>(i)], g_pool, g_gn);
            Tensor g_conv(ws.imu_conv[static_cast<std::size_t>(i)].shape());
            nn::group_norm_backward(ws.imu_conv[static_cast<std::size_t>(i)], cfg_.imu_groups,
                                    blk.gn_gain.value, ws.imu_gn_cache[static_cast<std::size_t>(i)],
                                    g_gn, g_conv, blk.gn_gain.grad, blk.gn_bias.grad);
            Tensor g_in(in.shape());
            nn::conv2d_backward(in, blk.w.value, g_conv, g_in, blk.w.grad, blk.b.grad);
            g_act = std::move(g_in);
        }
        // channel-dropout backward would scale g_act by the mask; nothing
        // upstream consumes it, so it ends here.
    }
}

Prediction Model::predict(const Tensor& hand, const Tensor& imu, Workspace& ws,
                          ModelMode mode) const {
    Output out = forward(hand, imu, ws, mode, false, nullptr);
    Prediction pred;
    Tensor probs;
    nn::softmax_forward(out.contact_logits, probs); // per column
    pred.contact.resize(kHandWindowLen);
    for (int t = 0; t < kHandWindowLen; ++t) pred.contact[static_cast<std::size_t>(t)] = probs(1, t);
    nn::softmax_forward(out.gesture_logits, probs);
    pred.gesture.resize(static_cast<std::size_t>(cfg_.gesture_classes));
    for (int k = 0; k < cfg_.gesture_classes; ++k) pred.gesture[static_cast<std::size_t>(k)] = probs(k);
    return pred;
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

LossWeights LossWeights::unit(int gesture_classes) {
    LossWeights w;
    w.gesture = Tensor({gesture_classes});
    w.gesture.fill(1.0);
    w.contact = Tensor({2});
    w.contact.fill(1.0);
    return w;
}

double total_loss(const Model::Output& out, std::span<const bool> contact_labels,
                  GestureClass gesture_label, const LossWeights& weights,
                  double contact_term_weight, Model::Output* grads, double grad_scale) {
    if (static_cast<int>(contact_labels.size()) != out.contact_logits.dim(1))
        throw std::invalid_argument("contact label count must match frame count");

    if (grads) {
        if (!grads->gesture_logits.same_shape(out.gesture_logits))
            grads->gesture_logits = Tensor(out.gesture_logits.shape());
        if (!grads->contact_logits.same_shape(out.contact_logits))
            grads->contact_logits = Tensor(out.contact_logits.shape());
    }
    Tensor* g_gesture = grads ? &grads->gesture_logits : nullptr;
    const double loss_g = nn::ce_loss_logits(out.gesture_logits, static_cast<int>(gesture_label),
                                             weights.gesture, g_gesture, grad_scale);

    const int K = out.contact_logits.dim(0);
    const int T = out.contact_logits.dim(1);
    const double frame_scale = grad_scale * contact_term_weight / T;
    double loss_c = 0.0;
    Tensor col({K});
    Tensor gcol({K});
    for (int t = 0; t < T; ++t) {
        for (int k = 0; k < K; ++k) col(k) = out.contact_logits(k, t);
        gcol.fill(0.0);
        loss_c += nn::ce_loss_logits(col, contact_labels[static_cast<std::size_t>(t)] ? 1 : 0,
                                     weights.contact, grads ? &gcol : nullptr, frame_scale);
        if (grads)
            for (int k = 0; k < K; ++k) grads->contact_logits(k, t) += gcol(k);
    }
    return loss_g + contact_term_weight * (loss_c / T);
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'X', 'R', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw std::runtime_error("truncated checkpoint");
    return v;
}

std::string read_bytes(std::ifstream& f, std::size_t n) {
    std::string s(n, '\0');
    f.read(s.data(), static_cast<std::streamsize>(n));
    if (!f) throw std::runtime_error("truncated checkpoint");
    return s;
}

std::string read_config_text(std::ifstream& f) {
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file");
    const auto version = read_pod<std::uint32_t>(f);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    read_pod<std::uint64_t>(f); // config hash, informational
    const auto len = read_pod<std::uint32_t>(f);
    return read_bytes(f, len);
}

// first differing key between two config texts, for the error message
std::string first_config_difference(const std::string& want, const std::string& got) {
    std::istringstream a(want), b(got);
    std::string la, lb;
    while (true) {
        const bool ha = static_cast<bool>(std::getline(a, la));
        const bool hb = static_cast<bool>(std::getline(b, lb));
        if (!ha && !hb) return "";
        if (ha && hb && la == lb) continue;
        const std::string& ref = ha ? la : lb;
        const auto eq = ref.find('=');
        const std::string key = eq == std::string::npos ? ref : ref.substr(0, eq);
        auto value_of = [&key](const std::string& line) {
            if (!line.starts_with(key + "=")) return std::string("<missing>");
            return line.substr(key.size() + 1);
        };
        return "field '" + key + "': expected " + (ha ? value_of(la) : "<missing>") + ", found " +
               (hb ? value_of(lb) : "<missing>");
    }
}

} // namespace

void save_weights(const Model& model, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f.write(kMagic, 4);
    write_pod(f, kVersion);
    write_pod(f, model.config().hash());
    const std::string cfg_text = model.config().to_text();
    write_pod(f, static_cast<std::uint32_t>(cfg_text.size()));
    f.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

    const auto params = model.params();
    write_pod(f, static_cast<std::uint32_t>(params.size()));
    for (const Param* p : params) {
        write_pod(f, static_cast<std::uint32_t>(p->name.size()));
        f.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod(f, static_cast<std::uint32_t>(p->value.rank()));
        for (int i = 0; i < p->value.rank(); ++i)
            write_pod(f, static_cast<std::int32_t>(p->value.dim(i)));
        write_pod(f, static_cast<std::uint64_t>(p->value.size()));
        f.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

void load_weights(Model& model, const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
    const std::string cfg_text = read_config_text(f);
    const std::string want = model.config().to_text();
    if (cfg_text != want)
        throw std::runtime_error("checkpoint config mismatch: " +
                                 first_config_difference(want, cfg_text));

    const auto n = read_pod<std::uint32_t>(f);
    auto params = model.params();
    if (n != params.size())
        throw std::runtime_error("checkpoint holds " + std::to_string(n) + " parameters, model has " +
                                 std::to_string(params.size()));
    for (Param* p : params) {
        const auto name_len = read_pod<std::uint32_t>(f);
        const std::string name = read_bytes(f, name_len);
        if (name != p->name)
            throw std::runtime_error("checkpoint parameter '" + name + "' does not match '" +
                                     p->name + "'");
        const auto rank = read_pod<std::uint32_t>(f);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = read_pod<std::int32_t>(f);
        if (shape != p->value.shape())
            throw std::runtime_error("checkpoint parameter '" + name + "' has the wrong shape");
        const auto count = read_pod<std::uint64_t>(f);
        if (count != static_cast<std::uint64_t>(p->value.size()))
            throw std::runtime_error("checkpoint parameter '" + name + "' has the wrong size");
        f.read(reinterpret_cast<char*>(p->value.data()),
               static_cast<std::streamsize>(sizeof(double) * count));
        if (!f) throw std::runtime_error("truncated checkpoint");
    }
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
    const std::string cfg_text = read_config_text(f);
    Model model(ModelConfig::from_text(cfg_text));
    load_weights(model, path);
    return model;
}

} // namespace sxr
