#pragma once

// The three learned receivers. Each is an input-construction pipeline feeding
// a bank of independently trained networks, one per carrier group of K
// consecutive tones on one transmit antenna. Every network of a bank sees the
// same input vector and is supervised by the 4K payload bits of its group.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "dataset.hpp"
#include "neural.hpp"
#include "numerics.hpp"

namespace mimorx {

enum class ReceiverKind { type1, data_driven, type2 };

inline std::string to_string(ReceiverKind k) {
    switch (k) {
        case ReceiverKind::type1: return "type1";
        case ReceiverKind::data_driven: return "data_driven";
        case ReceiverKind::type2: return "type2";
    }
    return "?";
}

inline ReceiverKind parse_receiver_kind(const std::string& s) {
    if (s == "type1") return ReceiverKind::type1;
    if (s == "data_driven") return ReceiverKind::data_driven;
    if (s == "type2") return ReceiverKind::type2;
    throw std::invalid_argument("unknown receiver kind '" + s + "'");
}

struct CarrierGroup {
    Index group_index = 0;
    Index antenna = 0;
    Index first_tone = 0;
    Index K = 0;

    /// Offset of the group's first bit in the antenna-major label vector.
    std::size_t label_offset(Index m) const { return static_cast<std::size_t>((antenna * m + first_tone) * 4); }
    std::size_t label_count() const { return static_cast<std::size_t>(4 * K); }
};

/// Groups are numbered antenna-major: group g covers antenna g / (M/K) and
/// tones (g mod (M/K)) * K .. + K-1.
inline CarrierGroup carrier_group(const LinkConfig& cfg, Index g) {
    if (cfg.K < 1 || cfg.M % cfg.K != 0) throw DimensionError("carrier_group: K must divide M");
    if (g < 0 || g >= cfg.groups_total()) throw DimensionError("carrier_group: group index out of range");
    const Index per_antenna = cfg.M / cfg.K;
    return {g, g / per_antenna, (g % per_antenna) * cfg.K, cfg.K};
}

// ---------------------------------------------------------------------------
// input construction: complex vectors become [Re(v); Im(v)]

template <class S = float>
Vec<S> split_complex(const ComplexVector& v) {
    Vec<S> out(2 * v.size());
    for (Index i = 0; i < v.size(); ++i) {
        out[i] = static_cast<S>(v[i].real());
        out[v.size() + i] = static_cast<S>(v[i].imag());
    }
    return out;
}

template <class S = float>
ComplexVector join_complex(const Vec<S>& v) {
    if (v.size() % 2 != 0) throw DimensionError("join_complex: odd length");
    const Index n = v.size() / 2;
    ComplexVector out(n);
    for (Index i = 0; i < n; ++i) out[i] = cplx(static_cast<double>(v[i]), static_cast<double>(v[n + i]));
    return out;
}

template <class S = float>
Vec<S> build_input_type1(const ComplexVector& d_hat) {
    return split_complex<S>(d_hat);
}

template <class S = float>
Vec<S> build_input_data_driven(const ComplexVector& y_p, const ComplexVector& x_p, const ComplexVector& y_d) {
    ComplexVector v(y_p.size() + x_p.size() + y_d.size());
    v << y_p, x_p, y_d;
    return split_complex<S>(v);
}

template <class S = float>
Vec<S> build_input_type2(const ComplexVector& y_p, const ComplexVector& x_p, const ComplexVector& y_d,
                         const ComplexVector& d_hat) {
    const auto a = build_input_data_driven<S>(y_p, x_p, y_d);
    const auto b = build_input_type1<S>(d_hat);
    Vec<S> out(a.size() + b.size());
    out << a, b;
    return out;
}

inline Index input_length(ReceiverKind kind, const LinkConfig& c) {
    switch (kind) {
        case ReceiverKind::type1: return 2 * c.Nt * c.M;
        case ReceiverKind::data_driven: return 2 * (c.Nr * c.M_p + c.Nt * c.M_p + c.Nr * c.M);
        case ReceiverKind::type2: return 2 * (c.Nr * c.M_p + c.Nt * c.M_p + c.Nr * c.M + c.Nt * c.M);
    }
    return 0;
}

/// Hidden widths follow the published configurations scaled by
/// the kind's width scale (never below 8); the output layer has 4K units.
inline std::vector<Index> layer_widths(ReceiverKind kind, const LinkConfig& c) {
    const std::vector<Index> base = kind == ReceiverKind::type1 ? std::vector<Index>{1024, 2028, 512}
                                                                : std::vector<Index>{4000, 3000, 1024};
    const double scale = kind == ReceiverKind::type1         ? c.width_scale_type1
                         : kind == ReceiverKind::data_driven ? c.width_scale_data_driven
                                                             : c.width_scale_type2;
    std::vector<Index> w;
    for (auto b : base) w.push_back(std::max<Index>(8, static_cast<Index>(std::lround(static_cast<double>(b) * scale))));
    w.push_back(4 * c.K);
    return w;
}

template <class S = float>
Vec<S> build_input(ReceiverKind kind, const Sample& s, const LinkContext& ctx) {
    auto d_hat = [&]() -> ComplexVector {
        if (s.d_hat) return *s.d_hat;
        return ls_zf_front_end(ctx, unstack(s.y_p, ctx.cfg.Nr), unstack(s.y_d, ctx.cfg.Nr)).d_hat;
    };
    switch (kind) {
        case ReceiverKind::type1: return build_input_type1<S>(d_hat());
        case ReceiverKind::data_driven: return build_input_data_driven<S>(s.y_p, s.x_p, s.y_d);
        case ReceiverKind::type2: return build_input_type2<S>(s.y_p, s.x_p, s.y_d, d_hat());
    }
    throw std::logic_error("build_input: bad kind");
}

/// One column per sample.
template <class S = float>
Mat<S> build_inputs(ReceiverKind kind, const std::vector<Sample>& samples, const LinkContext& ctx) {
    Mat<S> x(input_length(kind, ctx.cfg), static_cast<Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto v = build_input<S>(kind, samples[i], ctx);
        if (v.size() != x.rows()) throw DimensionError("build_inputs: sample observation sizes do not match the config");
        x.col(static_cast<Index>(i)) = v;
    }
    return x;
}

template <class S = float>
Mat<S> group_labels(const std::vector<Sample>& samples, const CarrierGroup& g, Index m) {
    Mat<S> y(static_cast<Index>(g.label_count()), static_cast<Index>(samples.size()));
    const auto off = g.label_offset(m);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].labels.size() < off + g.label_count()) throw DimensionError("group_labels: label vector too short");
        for (std::size_t b = 0; b < g.label_count(); ++b)
            y(static_cast<Index>(b), static_cast<Index>(i)) = static_cast<S>(samples[i].labels[off + b]);
    }
    return y;
}

/// Label of j * point(label): the constellation is invariant under a quarter
/// turn, which maps (I, Q) to (-Q, I).
inline int quarter_turn_label(int label) {
    const int b3 = (label >> 3) & 1, b2 = (label >> 2) & 1, b1 = (label >> 1) & 1, b0 = label & 1;
    return ((b1 ^ 1) << 3) | (b0 << 2) | (b3 << 1) | b2;
}

/// Random draws of exact symmetries of the observation model, applied per
/// training sample:
///  - a common phase rotation of all received samples and a relabelling of
///    the receive antennas (channel and noise laws are invariant, so are the
///    ZF output and the payload);
///  - a quarter turn of every data symbol, i.e. y_d and d_hat times j^k, with
///    the payload labels remapped accordingly (the amplifier preserves phase).
/// Type-I inputs only admit the second.
template <class S = float>
BatchTransform<S> symmetry_augmenter(ReceiverKind kind, const LinkConfig& c) {
    const Index nr = c.Nr, mp = c.M_p, m = c.M;
    const Index n = kind == ReceiverKind::type1 ? 0 : nr * mp + c.Nt * mp + nr * m;  // complex length of [y_p; x_p; y_d]
    const Index yd = nr * mp + c.Nt * mp;
    const Index nd = kind == ReceiverKind::data_driven ? 0 : c.Nt * m;  // complex length of d_hat
    std::array<std::array<int, 16>, 4> turn{};
    for (int l = 0; l < 16; ++l) {
        turn[0][static_cast<std::size_t>(l)] = l;
        for (std::size_t k = 1; k < 4; ++k) turn[k][static_cast<std::size_t>(l)] = quarter_turn_label(turn[k - 1][static_cast<std::size_t>(l)]);
    }
    return [=](Mat<S>& x, Mat<S>& y, Rng& rng) {
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        std::uniform_int_distribution<int> quarter(0, 3);
        std::vector<Index> perm(static_cast<std::size_t>(nr));
        Vec<S> src;
        for (Index j = 0; j < x.cols(); ++j) {
            const int k = quarter(rng);
            const double t = n > 0 ? phase(rng) : 0.0;
            if (n > 0) {
                src = x.col(j).head(2 * n);
                std::iota(perm.begin(), perm.end(), Index{0});
                std::shuffle(perm.begin(), perm.end(), rng);
                auto move = [&](Index dst, Index from, Index len, double angle) {
                    const auto cs = static_cast<S>(std::cos(angle)), sn = static_cast<S>(std::sin(angle));
                    for (Index i = 0; i < len; ++i) {
                        const S re = src[from + i], im = src[n + from + i];
                        x(dst + i, j) = cs * re - sn * im;
                        x(n + dst + i, j) = sn * re + cs * im;
                    }
                };
                const double data_angle = t + k * std::numbers::pi / 2.0;
                for (Index q = 0; q < nr; ++q) {
                    const Index p = perm[static_cast<std::size_t>(q)];
                    move(q * mp, p * mp, mp, t);
                    move(yd + q * m, yd + p * m, m, data_angle);
                }
            }
            // d_hat: exact quarter turns
            const Index off = 2 * n;
            for (int r = 0; r < k; ++r)
                for (Index i = 0; i < nd; ++i) {
                    const S re = x(off + i, j);
                    x(off + i, j) = -x(off + nd + i, j);
                    x(off + nd + i, j) = re;
                }
            if (k == 0) continue;
            for (Index sym = 0; sym + 3 < y.rows(); sym += 4) {
                const int l = (y(sym, j) > S(0.5) ? 8 : 0) | (y(sym + 1, j) > S(0.5) ? 4 : 0) | (y(sym + 2, j) > S(0.5) ? 2 : 0) |
                              (y(sym + 3, j) > S(0.5) ? 1 : 0);
                const int r = turn[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
                for (int b = 0; b < 4; ++b) y(sym + b, j) = static_cast<S>((r >> (3 - b)) & 1);
            }
        }
    };
}

// ---------------------------------------------------------------------------
// banks

struct ReceiverBank {
    ReceiverKind kind = ReceiverKind::type1;
    LinkConfig cfg;
    std::map<Index, MlpNetwork<float>> nets;  // group index -> trained network

    std::vector<Index> groups() const {
        std::vector<Index> g;
        for (const auto& [k, _] : nets) g.push_back(k);
        return g;
    }
};

/// Optimiser settings taken from the config.
inline TrainOptions train_options(const LinkConfig& c) {
    TrainOptions opt;
    opt.epochs = c.epochs;
    opt.batch_size = c.batch_size;
    opt.learning_rate = c.learning_rate;
    opt.lr_decay = c.lr_decay;
    opt.patience = c.patience;
    return opt;
}

struct BankTrainReport {
    std::map<Index, TrainResult> per_group;
};

/// Trains one network per requested group on shared inputs. Weight seeds are
/// derived from (seed, kind, group) so groups are independent and
/// reproducible.
inline ReceiverBank train_bank(ReceiverKind kind, const LinkContext& ctx, const std::vector<Sample>& train_set,
                               const std::vector<Sample>& val_set, const std::vector<Index>& groups, TrainOptions opt,
                               std::uint64_t seed, BankTrainReport* report = nullptr) {
    ReceiverBank bank{kind, ctx.cfg, {}};
    const auto x = build_inputs<float>(kind, train_set, ctx);
    const auto xv = build_inputs<float>(kind, val_set, ctx);
    const auto augment = ctx.cfg.augment ? symmetry_augmenter<float>(kind, ctx.cfg) : BatchTransform<float>{};
    for (auto g : groups) {
        const auto grp = carrier_group(ctx.cfg, g);
        const auto y = group_labels<float>(train_set, grp, ctx.cfg.M);
        const auto yv = group_labels<float>(val_set, grp, ctx.cfg.M);
        auto net = MlpNetwork<float>::create(x.rows(), layer_widths(kind, ctx.cfg),
                                             derive_seed(seed, {stream::weights, static_cast<std::uint64_t>(kind),
                                                                static_cast<std::uint64_t>(g)}));
        opt.seed = derive_seed(seed, {stream::shuffle, static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(g)});
        auto res = train(net, x, y, opt, val_set.empty() ? nullptr : &xv, val_set.empty() ? nullptr : &yv, augment);
        if (report) report->per_group[g] = std::move(res);
        bank.nets.emplace(g, std::move(net));
    }
    return bank;
}

/// Detected bits for the requested groups of each sample, concatenated in the
/// order the groups are listed. Rows of the result correspond to samples.
inline std::vector<BitVector> detect_groups(const ReceiverBank& bank, const std::vector<Sample>& samples,
                                            const std::vector<Index>& groups, const LinkContext& ctx) {
    const auto x = build_inputs<float>(bank.kind, samples, ctx);
    std::vector<BitVector> out(samples.size());
    for (auto g : groups) {
        auto it = bank.nets.find(g);
        if (it == bank.nets.end()) throw std::invalid_argument("detect: no trained network for group " + std::to_string(g));
        if (it->second.input_dim() != x.rows())
            throw DimensionError("detect: network for group " + std::to_string(g) + " expects a different input size");
        const auto y = predict(it->second, x);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto bits = decide_bits<float>(y.col(static_cast<Index>(i)));
            out[i].insert(out[i].end(), bits.begin(), bits.end());
        }
    }
    return out;
}

/// Full Nt*M*4-bit stream for one frame; requires a network for every group.
inline BitVector detect(const ReceiverBank& bank, const Sample& s, const LinkContext& ctx) {
    std::vector<Index> all;
    for (Index g = 0; g < ctx.cfg.groups_total(); ++g) all.push_back(g);
    return detect_groups(bank, {s}, all, ctx).front();
}

/// True payload bits of the listed groups, in the same order detect_groups uses.
inline BitVector group_truth(const Sample& s, const std::vector<Index>& groups, const LinkConfig& cfg) {
    BitVector out;
    for (auto g : groups) {
        const auto grp = carrier_group(cfg, g);
        const auto off = static_cast<std::ptrdiff_t>(grp.label_offset(cfg.M));
        out.insert(out.end(), s.labels.begin() + off, s.labels.begin() + off + static_cast<std::ptrdiff_t>(grp.label_count()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bank manifest: a text file next to the checkpoints.
//
//   # mimorx bank manifest v1
//   kind = <type1|data_driven|type2>
//   config = <path of the config echo, relative to the manifest>
//   group <index> <checkpoint path relative to the manifest> <crc32 of checkpoint, 8 hex digits>
//   ...

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string crc32_hex(const std::string& bytes) {
    const auto c = static_cast<std::uint32_t>(::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
    std::ostringstream os;
    os << std::hex << std::setw(8) << std::setfill('0') << c;
    return os.str();
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw ManifestError("cannot open '" + p.string() + "'");
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Writes checkpoints, a config echo and the manifest into `dir`; returns the manifest path.
inline std::filesystem::path save_bank(const ReceiverBank& bank, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto kind = to_string(bank.kind);
    std::ostringstream manifest;
    manifest << "# mimorx bank manifest v1\n";
    manifest << "kind = " << kind << "\n";
    const std::string cfg_name = kind + "_config.txt";
    {
        std::ofstream c(dir / cfg_name);
        c << format_config(bank.cfg);
    }
    manifest << "config = " << cfg_name << "\n";
    for (const auto& [g, net] : bank.nets) {
        const std::string name = kind + "_group" + std::to_string(g) + ".mrxnet";
        const auto blob = serialize_network(net);
        std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
        f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!f) throw ManifestError("failed writing checkpoint '" + (dir / name).string() + "'");
        manifest << "group " << g << " " << name << " " << crc32_hex(blob) << "\n";
    }
    const auto path = dir / (kind + "_manifest.txt");
    std::ofstream m(path);
    m << manifest.str();
    if (!m) throw ManifestError("failed writing manifest '" + path.string() + "'");
    return path;
}

/// Loads a bank, rejecting any checkpoint whose checksum differs from the manifest entry.
inline ReceiverBank load_bank(const std::filesystem::path& manifest_path) {
    const auto dir = manifest_path.parent_path();
    std::istringstream in(read_file(manifest_path));
    ReceiverBank bank;
    bool have_kind = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        if (head == "kind") {
            std::string eq, v;
            ls >> eq >> v;
            bank.kind = parse_receiver_kind(v);
            have_kind = true;
        } else if (head == "config") {
            std::string eq, v;
            ls >> eq >> v;
            bank.cfg = parse_config(read_file(dir / v));
        } else if (head == "group") {
            Index g = -1;
            std::string name, crc;
            ls >> g >> name >> crc;
            if (g < 0 || name.empty() || crc.size() != 8) throw ManifestError("malformed manifest line: " + line);
            const auto blob = read_file(dir / name);
            if (crc32_hex(blob) != crc)
                throw ManifestError("checkpoint '" + name + "' does not match its manifest checksum");
            bank.nets.emplace(g, deserialize_network<float>(blob));
        } else {
            throw ManifestError("unknown manifest entry: " + line);
        }
    }
    if (!have_kind) throw ManifestError("manifest has no receiver kind");
    return bank;
}

}  // namespace mimorx
