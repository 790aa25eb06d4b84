#pragma once

// Dense network engine: Dense -> BatchNorm -> activation per layer, MSE loss,
// exact backpropagation (including batch-statistic terms) and Adam.
//
// Batches are column-major: an input batch is an (in_dim x V) matrix with one
// sample per column.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace mimorx {

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1 };
enum class NetMode { train, inference };

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct DenseLayer {
    Mat<S> W;  // out x in
    Vec<S> b;
    Vec<S> gamma, beta;
    Vec<S> running_mean, running_var;
    S epsilon = S(1e-5);
    S momentum = S(0.1);
    Activation act = Activation::relu;

    Eigen::Index in_dim() const { return W.cols(); }
    Eigen::Index out_dim() const { return W.rows(); }
};

/// Trainable parameters of one layer, or their gradients / Adam moments.
template <class S>
struct LayerParams {
    Mat<S> W;
    Vec<S> b, gamma, beta;

    template <class F>
    void for_each(F&& f) {
        f(W.data(), W.size());
        f(b.data(), b.size());
        f(gamma.data(), gamma.size());
        f(beta.data(), beta.size());
    }

    static LayerParams zeros_like(const DenseLayer<S>& l) {
        return {Mat<S>::Zero(l.W.rows(), l.W.cols()), Vec<S>::Zero(l.b.size()), Vec<S>::Zero(l.gamma.size()),
                Vec<S>::Zero(l.beta.size())};
    }
};

template <class S>
using Gradients = std::vector<LayerParams<S>>;

/// Visits the trainable arrays of a layer in the same order as LayerParams::for_each.
template <class S, class F>
void for_each_param(DenseLayer<S>& l, F&& f) {
    f(l.W.data(), l.W.size());
    f(l.b.data(), l.b.size());
    f(l.gamma.data(), l.gamma.size());
    f(l.beta.data(), l.beta.size());
}

template <class S>
struct LayerCache {
    Mat<S> input;
    Mat<S> xhat;  // normalized pre-activation
    Vec<S> batch_mean, batch_var, inv_std;
    Mat<S> output;  // post-activation
};

template <class S>
struct ForwardResult {
    Mat<S> output;
    std::vector<LayerCache<S>> caches;
};

template <class S>
class MlpNetwork {
public:
    MlpNetwork() = default;

    /// Hidden layers use ReLU, the last layer sigmoid. Weights are uniform in
    /// +-sqrt(6 / fan_in); biases and beta start at 0, gamma at 1.
    static MlpNetwork create(Eigen::Index in_dim, const std::vector<Eigen::Index>& widths, std::uint64_t seed) {
        if (in_dim < 1 || widths.empty()) throw std::invalid_argument("MlpNetwork: need an input size and at least one layer");
        MlpNetwork net;
        Rng rng(seed);
        Eigen::Index fan_in = in_dim;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            const auto out = widths[i];
            if (out < 1) throw std::invalid_argument("MlpNetwork: layer widths must be positive");
            DenseLayer<S> l;
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
            std::uniform_real_distribution<double> u(-limit, limit);
            l.W.resize(out, fan_in);
            for (Eigen::Index k = 0; k < l.W.size(); ++k) l.W.data()[k] = static_cast<S>(u(rng));
            l.b = Vec<S>::Zero(out);
            l.gamma = Vec<S>::Ones(out);
            l.beta = Vec<S>::Zero(out);
            l.running_mean = Vec<S>::Zero(out);
            l.running_var = Vec<S>::Ones(out);
            l.act = (i + 1 == widths.size()) ? Activation::sigmoid : Activation::relu;
            net.layers.push_back(std::move(l));
            fan_in = out;
        }
        return net;
    }

    Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

    void validate() const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            const auto n = l.out_dim();
            if (l.b.size() != n || l.gamma.size() != n || l.beta.size() != n || l.running_mean.size() != n ||
                l.running_var.size() != n)
                throw std::invalid_argument("MlpNetwork: layer " + std::to_string(i) + " vector sizes disagree");
            if (i > 0 && l.in_dim() != layers[i - 1].out_dim())
                throw std::invalid_argument("MlpNetwork: layer dimensions do not chain at layer " + std::to_string(i));
            if ((l.running_var.array() < S(0)).any()) throw std::invalid_argument("MlpNetwork: negative running variance");
            if (!(l.epsilon > S(0))) throw std::invalid_argument("MlpNetwork: epsilon must be positive");
        }
    }

    template <class T>
    MlpNetwork<T> cast() const {
        MlpNetwork<T> out;
        out.mode = mode;
        for (const auto& l : layers) {
            DenseLayer<T> c;
            c.W = l.W.template cast<T>();
            c.b = l.b.template cast<T>();
            c.gamma = l.gamma.template cast<T>();
            c.beta = l.beta.template cast<T>();
            c.running_mean = l.running_mean.template cast<T>();
            c.running_var = l.running_var.template cast<T>();
            c.epsilon = static_cast<T>(l.epsilon);
            c.momentum = static_cast<T>(l.momentum);
            c.act = l.act;
            out.layers.push_back(std::move(c));
        }
        return out;
    }

    std::vector<DenseLayer<S>> layers;
    NetMode mode = NetMode::train;
};

template <class S>
ForwardResult<S> forward(const MlpNetwork<S>& net, const Mat<S>& x) {
    if (net.layers.empty()) throw std::invalid_argument("forward: empty network");
    if (x.rows() != net.input_dim())
        throw std::invalid_argument("forward: input dimension " + std::to_string(x.rows()) + " does not match network input " +
                                    std::to_string(net.input_dim()));
    const bool train = net.mode == NetMode::train;
    if (train && x.cols() < 2) throw std::invalid_argument("forward: train-mode batch norm needs at least two samples");
    ForwardResult<S> res;
    res.caches.reserve(net.layers.size());
    const Mat<S>* in = &x;
    for (const auto& l : net.layers) {
        LayerCache<S> c;
        c.input = *in;
        Mat<S> z = l.W * c.input;
        z.colwise() += l.b;
        if (train) {
            c.batch_mean = z.rowwise().mean();
            z.colwise() -= c.batch_mean;
            c.batch_var = z.array().square().rowwise().mean();
        } else {
            c.batch_mean = l.running_mean;
            z.colwise() -= c.batch_mean;
            c.batch_var = l.running_var;
        }
        c.inv_std = (c.batch_var.array() + l.epsilon).rsqrt();
        c.xhat = c.inv_std.asDiagonal() * z;
        Mat<S> y = l.gamma.asDiagonal() * c.xhat;
        y.colwise() += l.beta;
        if (l.act == Activation::relu)
            c.output = y.cwiseMax(S(0));
        else
            c.output = (S(1) + (-y.array()).exp()).inverse().matrix();
        res.caches.push_back(std::move(c));
        in = &res.caches.back().output;
    }
    res.output = res.caches.back().output;
    return res;
}

/// Inference-mode outputs regardless of the network's stored mode.
template <class S>
Mat<S> predict(MlpNetwork<S> net, const Mat<S>& x) {
    net.mode = NetMode::inference;
    return forward(net, x).output;
}

/// Mean over batch and output entries of the squared error.
template <class S>
double mse_loss(const Mat<S>& outputs, const Mat<S>& labels) {
    if (outputs.rows() != labels.rows() || outputs.cols() != labels.cols())
        throw std::invalid_argument("mse_loss: output and label shapes differ");
    if (outputs.size() == 0) throw std::invalid_argument("mse_loss: empty batch");
    return (outputs.template cast<double>() - labels.template cast<double>()).squaredNorm() /
           static_cast<double>(outputs.size());
}

/// d loss / d outputs for mse_loss.
template <class S>
Mat<S> mse_loss_grad(const Mat<S>& outputs, const Mat<S>& labels) {
    if (outputs.rows() != labels.rows() || outputs.cols() != labels.cols())
        throw std::invalid_argument("mse_loss_grad: output and label shapes differ");
    return (outputs - labels) * (S(2) / static_cast<S>(outputs.size()));
}

/// Exact gradients given the cache of the forward pass that produced the
/// outputs. In train mode the batch-statistic dependence is included; in
/// inference mode running statistics are constants.
template <class S>
Gradients<S> backward(const MlpNetwork<S>& net, const ForwardResult<S>& fwd, const Mat<S>& loss_grad) {
    if (fwd.caches.size() != net.layers.size()) throw std::invalid_argument("backward: cache does not match network");
    if (loss_grad.rows() != fwd.output.rows() || loss_grad.cols() != fwd.output.cols())
        throw std::invalid_argument("backward: loss gradient shape mismatch");
    const bool train = net.mode == NetMode::train;
    Gradients<S> grads(net.layers.size());
    Mat<S> d = loss_grad;  // d loss / d layer output
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        const auto& l = net.layers[i];
        const auto& c = fwd.caches[i];
        const auto v = static_cast<S>(c.input.cols());
        Mat<S> dy;
        if (l.act == Activation::relu)
            dy = (c.output.array() > S(0)).select(d, S(0));
        else
            dy = d.cwiseProduct(c.output.cwiseProduct((S(1) - c.output.array()).matrix()));
        auto& g = grads[i];
        g.beta = dy.rowwise().sum();
        g.gamma = dy.cwiseProduct(c.xhat).rowwise().sum();
        const Mat<S> dxhat = l.gamma.asDiagonal() * dy;
        Mat<S> dz;
        if (train) {
            const Vec<S> sum_dxhat = dxhat.rowwise().sum();
            const Vec<S> sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat).rowwise().sum();
            dz = dxhat * v;
            dz.colwise() -= sum_dxhat;
            dz -= sum_dxhat_xhat.asDiagonal() * c.xhat;
            dz = (c.inv_std / v).asDiagonal() * dz;
        } else {
            dz = c.inv_std.asDiagonal() * dxhat;
        }
        g.W.noalias() = dz * c.input.transpose();
        g.b = dz.rowwise().sum();
        if (i > 0) d.noalias() = l.W.transpose() * dz;
    }
    return grads;
}

/// Exponential moving averages with the unbiased batch variance.
template <class S>
void update_running_stats(MlpNetwork<S>& net, const ForwardResult<S>& fwd) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        const auto& c = fwd.caches[i];
        const auto v = static_cast<S>(c.input.cols());
        l.running_mean = (S(1) - l.momentum) * l.running_mean + l.momentum * c.batch_mean;
        l.running_var = (S(1) - l.momentum) * l.running_var + l.momentum * c.batch_var * (v / (v - S(1)));
    }
}

template <class S>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::int64_t t = 0;
    Gradients<S> m, v;
};

/// One bias-corrected Adam update of every trainable parameter.
template <class S>
void adam_step(AdamState<S>& st, MlpNetwork<S>& net, Gradients<S>& grads) {
    if (grads.size() != net.layers.size()) throw std::invalid_argument("adam_step: gradient/network layer count mismatch");
    if (st.m.empty()) {
        for (const auto& l : net.layers) {
            st.m.push_back(LayerParams<S>::zeros_like(l));
            st.v.push_back(LayerParams<S>::zeros_like(l));
        }
    }
    ++st.t;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    const auto b1 = static_cast<S>(st.beta1), b2 = static_cast<S>(st.beta2);
    const auto step = static_cast<S>(st.lr / c1);
    const auto inv_c2 = static_cast<S>(1.0 / c2);
    const auto eps = static_cast<S>(st.eps_adam);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        std::vector<std::pair<S*, Eigen::Index>> ps, gs, ms, vs;
        auto collect = [](auto& into) { return [&into](S* ptr, Eigen::Index n) { into.emplace_back(ptr, n); }; };
        for_each_param(net.layers[i], collect(ps));
        grads[i].for_each(collect(gs));
        st.m[i].for_each(collect(ms));
        st.v[i].for_each(collect(vs));
        for (std::size_t k = 0; k < ps.size(); ++k) {
            if (ps[k].second != gs[k].second) throw std::invalid_argument("adam_step: gradient shape mismatch");
            Eigen::Map<Vec<S>> w(ps[k].first, ps[k].second), g(gs[k].first, gs[k].second), m(ms[k].first, ms[k].second),
                v(vs[k].first, vs[k].second);
            m = b1 * m + (S(1) - b1) * g;
            v = b2 * v + (S(1) - b2) * g.cwiseAbs2();
            w.array() -= step * m.array() / ((v.array() * inv_c2).sqrt() + eps);
        }
    }
}

/// Optional in-place transform of each training batch and its labels (one
/// sample per column).
template <class S>
using BatchTransform = std::function<void(Mat<S>& inputs, Mat<S>& labels, Rng& rng)>;

struct TrainOptions {
    Eigen::Index epochs = 10;
    Eigen::Index batch_size = 300;
    double learning_rate = 1e-3;
    double lr_decay = 1.0;  // learning rate multiplier applied after every epoch
    std::uint64_t seed = 1;
    bool shuffle = true;
    bool keep_best = true;  // restore the parameters with the lowest validation loss
    Eigen::Index patience = 0;  // stop after this many epochs without a new best validation loss; 0 = never
    std::function<void(Eigen::Index epoch, double train_loss, double val_loss)> on_epoch;
};

struct TrainResult {
    std::vector<double> train_loss;       // per-epoch mean of batch losses
    std::vector<double> validation_loss;  // per epoch, empty without a validation set
    Eigen::Index best_epoch = -1;
};

/// Mini-batch Adam over shuffled epochs. Batches smaller than two samples are
/// skipped (batch norm is undefined on them). `augment`, when set, is applied
/// to every training batch; validation data is used as given. The network is
/// left in inference mode.
template <class S>
TrainResult train(MlpNetwork<S>& net, const Mat<S>& inputs, const Mat<S>& labels, const TrainOptions& opt,
                  const Mat<S>* val_inputs = nullptr, const Mat<S>* val_labels = nullptr,
                  const BatchTransform<S>& augment = {}) {
    if (inputs.cols() == 0) throw std::invalid_argument("train: empty dataset");
    if (inputs.cols() != labels.cols()) throw std::invalid_argument("train: input/label count mismatch");
    if (labels.rows() != net.output_dim()) throw std::invalid_argument("train: label length does not match output layer");
    AdamState<S> st;
    st.lr = opt.learning_rate;
    Rng rng(derive_seed(opt.seed, {stream::shuffle}));
    Rng aug_rng(derive_seed(opt.seed, {stream::augment}));
    const Eigen::Index n = inputs.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    TrainResult res;
    std::optional<MlpNetwork<S>> best;
    double best_val = std::numeric_limits<double>::infinity();
    Mat<S> xb, yb;
    for (Eigen::Index epoch = 0; epoch < opt.epochs; ++epoch) {
        net.mode = NetMode::train;
        st.lr = opt.learning_rate * std::pow(opt.lr_decay, static_cast<double>(epoch));
        if (opt.shuffle) std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        Eigen::Index batches = 0;
        for (Eigen::Index start = 0; start < n; start += opt.batch_size) {
            const Eigen::Index v = std::min(opt.batch_size, n - start);
            if (v < 2) continue;
            xb.resize(inputs.rows(), v);
            yb.resize(labels.rows(), v);
            for (Eigen::Index j = 0; j < v; ++j) {
                const auto col = order[static_cast<std::size_t>(start + j)];
                xb.col(j) = inputs.col(col);
                yb.col(j) = labels.col(col);
            }
            if (augment) augment(xb, yb, aug_rng);
            const auto fwd = forward(net, xb);
            const double loss = mse_loss(fwd.output, yb);
            if (!std::isfinite(loss))
                throw TrainingDiverged("train: loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(batches));
            auto grads = backward(net, fwd, mse_loss_grad(fwd.output, yb));
            update_running_stats(net, fwd);
            adam_step(st, net, grads);
            loss_sum += loss;
            ++batches;
        }
        res.train_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
        double val = std::numeric_limits<double>::quiet_NaN();
        if (val_inputs && val_labels && val_inputs->cols() > 0) {
            val = mse_loss(predict(net, *val_inputs), *val_labels);
            res.validation_loss.push_back(val);
            if (val < best_val) {
                best_val = val;
                if (opt.keep_best) best = net;
                res.best_epoch = epoch;
            }
        }
        if (opt.on_epoch) opt.on_epoch(epoch, res.train_loss.back(), val);
        if (opt.patience > 0 && res.best_epoch >= 0 && epoch - res.best_epoch >= opt.patience) break;
    }
    if (best) net = std::move(*best);
    net.mode = NetMode::inference;
    return res;
}

/// Sigmoid outputs above 0.5 become 1; exactly 0.5 becomes 0.
template <class S>
std::vector<std::uint8_t> decide_bits(const Eigen::Ref<const Vec<S>>& out) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(out.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) bits[static_cast<std::size_t>(i)] = out[i] > S(0.5) ? 1 : 0;
    return bits;
}

// ---------------------------------------------------------------------------
// Checkpoint layout (little-endian):
//   "MRXNET01"  magic
//   u32 version (= 1), u32 layer count, u32 input dim
//   per layer: u32 output dim, u8 activation (0 relu, 1 sigmoid), f64 epsilon, f64 momentum
//   per layer: f64 W (row-major, out x in), b, gamma, beta, running_mean, running_var

inline constexpr char kCheckpointMagic[8] = {'M', 'R', 'X', 'N', 'E', 'T', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {
inline void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& s, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
struct ByteCursor {
    const std::string& s;
    std::size_t pos = 0;
    void need(std::size_t n) const {
        if (s.size() - pos < n) throw CheckpointError("checkpoint truncated");
    }
    std::uint64_t uint(int bytes) {
        need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint(8)); }
};
}  // namespace detail

template <class S>
std::string serialize_network(const MlpNetwork<S>& net) {
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(net.input_dim()));
    for (const auto& l : net.layers) {
        detail::put_u32(out, static_cast<std::uint32_t>(l.out_dim()));
        out.push_back(static_cast<char>(l.act));
        detail::put_f64(out, static_cast<double>(l.epsilon));
        detail::put_f64(out, static_cast<double>(l.momentum));
    }
    for (const auto& l : net.layers) {
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) detail::put_f64(out, static_cast<double>(l.W(r, c)));
        for (const auto* v : {&l.b, &l.gamma, &l.beta, &l.running_mean, &l.running_var})
            for (Eigen::Index i = 0; i < v->size(); ++i) detail::put_f64(out, static_cast<double>((*v)[i]));
    }
    return out;
}

template <class S>
MlpNetwork<S> deserialize_network(const std::string& blob) {
    detail::ByteCursor cur{blob};
    cur.need(sizeof kCheckpointMagic);
    if (blob.compare(0, sizeof kCheckpointMagic, kCheckpointMagic, sizeof kCheckpointMagic) != 0)
        throw CheckpointError("not a network checkpoint");
    cur.pos = sizeof kCheckpointMagic;
    const auto version = cur.uint(4);
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto layers = cur.uint(4);
    auto in_dim = static_cast<Eigen::Index>(cur.uint(4));
    MlpNetwork<S> net;
    net.mode = NetMode::inference;
    for (std::uint64_t i = 0; i < layers; ++i) {
        DenseLayer<S> l;
        const auto out = static_cast<Eigen::Index>(cur.uint(4));
        const auto act = cur.uint(1);
        if (act > 1) throw CheckpointError("unknown activation code " + std::to_string(act));
        l.act = static_cast<Activation>(act);
        l.epsilon = static_cast<S>(cur.f64());
        l.momentum = static_cast<S>(cur.f64());
        l.W.resize(out, in_dim);
        l.b.resize(out);
        l.gamma.resize(out);
        l.beta.resize(out);
        l.running_mean.resize(out);
        l.running_var.resize(out);
        net.layers.push_back(std::move(l));
        in_dim = out;
    }
    for (auto& l : net.layers) {
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = static_cast<S>(cur.f64());
        for (auto* v : {&l.b, &l.gamma, &l.beta, &l.running_mean, &l.running_var})
            for (Eigen::Index i = 0; i < v->size(); ++i) (*v)[i] = static_cast<S>(cur.f64());
    }
    if (cur.pos != blob.size()) throw CheckpointError("trailing bytes after checkpoint");
    net.validate();
    return net;
}

template <class S>
void save_network(const MlpNetwork<S>& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open '" + path + "' for writing");
    const auto blob = serialize_network(net);
    f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!f) throw CheckpointError("write to '" + path + "' failed");
}

template <class S>
MlpNetwork<S> load_network(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint '" + path + "'");
    const std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_network<S>(blob);
}

}  // namespace mimorx
