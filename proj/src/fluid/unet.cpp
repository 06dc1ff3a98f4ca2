#include "finflow/fluid/unet.hpp"

#include "finflow/core/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

namespace finflow::fluid {

using namespace ad;
using nlohmann::json;

namespace {

constexpr char kMagic[6] = {'F', 'F', 'N', 'W', '1', '\n'};

struct LayerSpec {
    const char* name;
    int in, out;
};

// widths for base c: enc c,c | 2c,2c | 4c,4c ; dec 2c,2c | c,c ; head 2
std::vector<LayerSpec> layer_specs(int c, int levels) {
    if (levels == 1)
        return {{"enc0a", 5, c}, {"enc0b", c, c}, {"head", c, 2}};
    if (levels == 2)
        return {
            {"enc0a", 5, c},     {"enc0b", c, c},
            {"bot_a", c, 2 * c}, {"bot_b", 2 * c, 2 * c},
            {"dec0a", 3 * c, c}, {"dec0b", c, c},
            {"head", c, 2},
        };
    return {
        {"enc0a", 5, c},          {"enc0b", c, c},
        {"enc1a", c, 2 * c},      {"enc1b", 2 * c, 2 * c},
        {"bot_a", 2 * c, 4 * c},  {"bot_b", 4 * c, 4 * c},
        {"dec1a", 6 * c, 2 * c},  {"dec1b", 2 * c, 2 * c},
        {"dec0a", 3 * c, c},      {"dec0b", c, c},
        {"head", c, 2},
    };
}

} // namespace

SurrogateNet::SurrogateNet(UNetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    check(cfg.base >= 2, "SurrogateNet: base width too small");
    check(cfg.levels >= 1 && cfg.levels <= 3, "SurrogateNet: levels must be 1..3");
    Rng rng(seed);
    for (const auto& ls : layer_specs(cfg_.base, cfg_.levels)) {
        Tensor w = Tensor::uninit({ls.out, ls.in, 9});
        const double std_dev = std::sqrt(2.0 / (9.0 * ls.in));
        const double head_scale = std::strcmp(ls.name, "head") == 0 ? 0.1 : 1.0;
        double* p = w.raw();
        for (std::size_t i = 0; i < w.size(); ++i) p[i] = rng.normal() * std_dev * head_scale;
        weights_.push_back(w);
        weights_.push_back(Tensor::zeros({ls.out, 1, 1}));
    }
}

std::size_t SurrogateNet::param_count() const {
    std::size_t n = 0;
    for (const auto& w : weights_) n += w.size();
    return n;
}

std::vector<DiffVar> SurrogateNet::weight_vars(Tape& t, bool as_leaves) const {
    std::vector<DiffVar> vars;
    vars.reserve(weights_.size());
    for (const auto& w : weights_)
        vars.push_back(as_leaves ? t.leaf(w, "net_weight") : constant(w));
    return vars;
}

DiffVar SurrogateNet::forward(Tape& t, const DiffVar& input, const std::vector<DiffVar>& w) const {
    check(w.size() == weights_.size(), "SurrogateNet::forward: weight variable count mismatch");
    check(input.shape().c == 5, "SurrogateNet::forward: expected 5 input channels");
    const int div = 1 << (cfg_.levels - 1);
    check(input.shape().h % div == 0 && input.shape().w % div == 0,
          "SurrogateNet::forward: grid dims must be divisible by " + std::to_string(div));
    auto maybe_round = [&](DiffVar x) { return cfg_.f32_emulation ? round_f32(t, x) : x; };
    auto block = [&](DiffVar x, int layer) {
        return maybe_round(silu(t, conv3x3(t, x, w[2 * std::size_t(layer)],
                                           w[2 * std::size_t(layer) + 1], cfg_.pad)));
    };
    auto head = [&](DiffVar x, int layer) {
        return maybe_round(
            conv3x3(t, x, w[2 * std::size_t(layer)], w[2 * std::size_t(layer) + 1], cfg_.pad));
    };
    if (cfg_.levels == 1) {
        return head(block(block(input, 0), 1), 2);
    }
    if (cfg_.levels == 2) {
        DiffVar x0 = block(block(input, 0), 1);
        DiffVar x1 = block(block(avgpool2(t, x0), 2), 3);
        DiffVar u0 = block(block(concat_ch(t, upsample2(t, x1, cfg_.pad), x0), 4), 5);
        return head(u0, 6);
    }
    DiffVar x0 = block(block(input, 0), 1);
    DiffVar x1 = block(block(avgpool2(t, x0), 2), 3);
    DiffVar x2 = block(block(avgpool2(t, x1), 4), 5);
    DiffVar u1 = block(block(concat_ch(t, upsample2(t, x2, cfg_.pad), x1), 6), 7);
    DiffVar u0 = block(block(concat_ch(t, upsample2(t, u1, cfg_.pad), x0), 8), 9);
    return head(u0, 10);
}

void SurrogateNet::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    check(f.good(), "cannot write weights file: " + path);
    f.write(kMagic, 6);
    json manifest;
    manifest["version"] = 1;
    manifest["base"] = cfg_.base;
    manifest["levels"] = cfg_.levels;
    manifest["pad"] = cfg_.pad == kern::Pad::Periodic ? "periodic" : "zero";
    manifest["in_scale_a"] = cfg_.in_scale_a;
    manifest["in_scale_p"] = cfg_.in_scale_p;
    manifest["in_scale_v"] = cfg_.in_scale_v;
    manifest["f32_emulation"] = cfg_.f32_emulation;
    json layers = json::array();
    auto specs = layer_specs(cfg_.base, cfg_.levels);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const Tensor& w = weights_[2 * i];
        const Tensor& b = weights_[2 * i + 1];
        layers.push_back({{"name", specs[i].name},
                          {"w", {w.c(), w.h(), w.w()}},
                          {"b", {b.c(), b.h(), b.w()}}});
    }
    manifest["layers"] = layers;
    std::string ms = manifest.dump();
    std::uint32_t len = std::uint32_t(ms.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(ms.data(), std::streamsize(ms.size()));
    for (const auto& w : weights_) {
        std::vector<float> buf(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) buf[i] = float(w.data()[i]);
        f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 4));
    }
    check(f.good(), "weights write failed: " + path);
}

SurrogateNet SurrogateNet::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), "cannot open weights file: " + path);
    char magic[6];
    f.read(magic, 6);
    check(f.good() && std::memcmp(magic, kMagic, 6) == 0, "bad weights magic in " + path);
    std::uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    std::string ms(len, '\0');
    f.read(ms.data(), len);
    check(f.good(), "weights manifest truncated in " + path);
    json manifest = json::parse(ms);
    check(manifest.at("version").get<int>() == 1, "unsupported weights version in " + path);

    SurrogateNet net;
    net.cfg_.base = manifest.at("base").get<int>();
    net.cfg_.levels = manifest.at("levels").get<int>();
    net.cfg_.pad = manifest.at("pad").get<std::string>() == "periodic" ? kern::Pad::Periodic
                                                                       : kern::Pad::Zero;
    net.cfg_.in_scale_a = manifest.at("in_scale_a").get<double>();
    net.cfg_.in_scale_p = manifest.at("in_scale_p").get<double>();
    net.cfg_.in_scale_v = manifest.at("in_scale_v").get<double>();
    net.cfg_.f32_emulation = manifest.at("f32_emulation").get<bool>();

    for (const auto& layer : manifest.at("layers")) {
        for (const char* key : {"w", "b"}) {
            auto dims = layer.at(key);
            Shape s{dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
            Tensor w = Tensor::uninit(s);
            std::vector<float> buf(s.count());
            f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * 4));
            for (std::size_t i = 0; i < buf.size(); ++i) w.raw()[i] = double(buf[i]);
            net.weights_.push_back(w);
        }
    }
    check(f.good(), "weights payload truncated in " + path);
    return net;
}

FluidStateVar predict_step(Tape& t, const SurrogateNet& net, const std::vector<DiffVar>& w,
                           const FluidStateVar& state, const couple::BoundaryVar& bc,
                           const MacGrid& grid) {
    const UNetConfig& cfg = net.config();
    check(state.a.shape() == grid.corner_shape(), "predict_step: curl shape mismatch");
    check(state.p.shape() == grid.cell_shape(), "predict_step: pressure shape mismatch");
    check(bc.b.shape() == grid.cell_shape(), "predict_step: mask shape mismatch");

    DiffVar a_net = scale(t, curl_to_net(t, state.a, grid), cfg.in_scale_a);
    DiffVar p_in = scale(t, state.p, cfg.in_scale_p);
    DiffVar input = concat_ch(t, a_net, p_in);
    input = concat_ch(t, input, bc.b);
    input = concat_ch(t, input, scale(t, bc.vdx_c, cfg.in_scale_v));
    input = concat_ch(t, input, scale(t, bc.vdy_c, cfg.in_scale_v));

    DiffVar out = net.forward(t, input, w);
    const int ny = grid.ny, nx = grid.nx;
    DiffVar da = crop(t, out, 0, 1, 0, ny, 0, nx);
    DiffVar p_out = crop(t, out, 1, 1, 0, ny, 0, nx);

    // residual curl update in normalized units, then back to corners with the
    // wall ring re-pinned to zero
    DiffVar a_next = net_to_curl(t, scale(t, add(t, a_net, da), 1.0 / cfg.in_scale_a), grid);
    DiffVar p_next = scale(t, p_out, 1.0 / cfg.in_scale_p);

    // gauge fix: subtract the mean over fluid cells (b < 0.5, held fixed)
    Tensor m = Tensor::uninit(grid.cell_shape());
    double msum = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double v = bc.b.val.data()[i] < 0.5 ? 1.0 : 0.0;
        m.raw()[i] = v;
        msum += v;
    }
    if (msum < 1.0) { // fully masked grid; fall back to the global mean
        m = Tensor::full(grid.cell_shape(), 1.0);
        msum = double(m.size());
    }
    DiffVar mean = scale(t, reduce_sum(t, mul(t, p_next, constant(m))), 1.0 / msum);
    p_next = sub(t, p_next, mean);

    return {a_next, p_next};
}

} // namespace finflow::fluid
