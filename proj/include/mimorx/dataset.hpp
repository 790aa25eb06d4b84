#pragma once

// End-to-end frame simulation and the on-disk sample format.
//
// Dataset file layout (all integers and floats little-endian):
//
//   header   "MRXDSET1"                      8 bytes magic
//            u32 version (= 1)
//            u32 n, then n bytes of config text (format_config)
//            u64 record count
//            u32 crc32 of every header byte above
//   record   u64 payload length P
//            P payload bytes
//            u32 crc32 of the payload
//   payload  f64 snr_db, f64 clipping_db, u64 seed, u64 channel_id
//            u8  has_d_hat
//            u32 |y_p|, u32 |x_p|, u32 |y_d|, u32 |d_hat|, u32 |labels|
//            y_p, x_p, y_d, d_hat as (f64 re, f64 im) pairs
//            labels as one byte per bit
//
// Observation vectors are stacked antenna-major: y_p = [y_p^1; ...; y_p^Nr],
// x_p = [x_p^1; ...; x_p^Nt], y_d = [y_d^1; ...; y_d^Nr]. Labels are the
// payload bits of all Nt*M tones, antenna-major, four bits per tone (b3 first).

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "linear_rx.hpp"
#include "modem.hpp"
#include "numerics.hpp"
#include "pa.hpp"
#include "rng.hpp"

namespace mimorx {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SampleMeta {
    double snr_db = 0.0;
    double clipping_db = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t channel_id = 0;

    bool operator==(const SampleMeta&) const = default;
};

struct Sample {
    ComplexVector y_p;
    ComplexVector x_p;
    ComplexVector y_d;
    std::optional<ComplexVector> d_hat;
    BitVector labels;
    SampleMeta meta;
};

inline bool operator==(const Sample& a, const Sample& b) {
    auto same = [](const ComplexVector& x, const ComplexVector& y) {
        return x.size() == y.size() && std::equal(x.data(), x.data() + x.size(), y.data());
    };
    if (a.d_hat.has_value() != b.d_hat.has_value()) return false;
    if (a.d_hat && !same(*a.d_hat, *b.d_hat)) return false;
    return same(a.y_p, b.y_p) && same(a.x_p, b.x_p) && same(a.y_d, b.y_d) && a.labels == b.labels && a.meta == b.meta;
}

/// Everything that stays fixed across frames for one configuration.
struct LinkContext {
    LinkConfig cfg;
    PilotPlan plan;
    ComplexMatrix B;
    PseudoInverse B_pinv;
    RappPaModel pa;

    explicit LinkContext(LinkConfig c) : cfg(std::move(c)) {
        cfg.validate();
        plan = build_pilot_plan(cfg);
        B = build_B(plan, cfg.M, cfg.L);
        B_pinv = pseudo_inverse_ranked(B);
        pa = cfg.linear_pa ? RappPaModel::linear(cfg.rho) : RappPaModel::from_clipping(cfg.clipping_db, cfg.rho, cfg.delta);
    }

    ComplexVector stacked_pilots() const {
        ComplexVector x(cfg.Nt * cfg.M_p);
        for (Index r = 0; r < cfg.Nt; ++r) x.segment(r * cfg.M_p, cfg.M_p) = plan.sequences[static_cast<std::size_t>(r)];
        return x;
    }
};

/// One simulated frame with everything a genie benchmark may need.
struct SimulatedFrame {
    OfdmFrame frame;
    ChannelRealization channel;
    std::vector<ComplexVector> y_pilot_full;  // per receive antenna, all M tones
    std::vector<ComplexVector> y_p;           // per receive antenna, pilot tones only
    std::vector<ComplexVector> y_d;           // per receive antenna, M tones
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t channel_id = 0;
};

namespace detail {

// idft -> CP -> PA -> channel -> AWGN -> strip CP -> dft, for one OFDM symbol.
inline std::vector<ComplexVector> transmit_symbol(const LinkContext& ctx, const std::vector<ComplexVector>& x_freq,
                                                  const ChannelRealization& ch, const NoiseSpec& noise,
                                                  std::uint64_t noise_seed) {
    const auto& cfg = ctx.cfg;
    std::vector<ComplexVector> tx;
    tx.reserve(x_freq.size());
    for (const auto& x : x_freq) tx.push_back(apply_pa(add_cyclic_prefix(idft(x), cfg.L_cp), ctx.pa));
    auto rx = apply_channel_time(tx, ch, cfg.L_cp);
    std::vector<ComplexVector> out;
    out.reserve(rx.size());
    for (Index q = 0; q < static_cast<Index>(rx.size()); ++q) {
        const auto noisy = add_awgn(rx[static_cast<std::size_t>(q)], noise, derive_seed(noise_seed, {static_cast<std::uint64_t>(q)}));
        out.push_back(dft(remove_cyclic_prefix(noisy, cfg.L_cp)));
    }
    return out;
}

}  // namespace detail

/// Simulates one frame at the given SNR. Channel, payload and noise are drawn
/// from streams derived from `seed`, so the frame is a pure function of
/// (config, snr_db, seed).
inline SimulatedFrame simulate_frame(const LinkContext& ctx, double snr_db, std::uint64_t seed) {
    const auto& cfg = ctx.cfg;
    SimulatedFrame sf;
    sf.seed = seed;
    sf.snr_db = snr_db;
    sf.channel_id = derive_seed(seed, {stream::channel});
    sf.channel = sample_channel(cfg, sf.channel_id);
    Rng bit_rng(derive_seed(seed, {stream::bits}));
    sf.frame = build_frame(cfg, ctx.plan, random_bits(static_cast<std::size_t>(cfg.Nt * cfg.M * 4), bit_rng));
    const auto noise = NoiseSpec::from_snr(snr_db, cfg.Nt, cfg.rho);
    sf.y_pilot_full = detail::transmit_symbol(ctx, sf.frame.pilot_symbol, sf.channel, noise, derive_seed(seed, {stream::noise_pilot}));
    sf.y_d = detail::transmit_symbol(ctx, sf.frame.data_symbol, sf.channel, noise, derive_seed(seed, {stream::noise_data}));
    for (const auto& y : sf.y_pilot_full) sf.y_p.push_back(select(y, ctx.plan.tones));
    return sf;
}

inline ComplexVector stack(const std::vector<ComplexVector>& parts) {
    Index n = 0;
    for (const auto& p : parts) n += p.size();
    ComplexVector out(n);
    Index off = 0;
    for (const auto& p : parts) {
        out.segment(off, p.size()) = p;
        off += p.size();
    }
    return out;
}

inline std::vector<ComplexVector> unstack(const ComplexVector& v, Index parts) {
    if (parts < 1 || v.size() % parts != 0) throw DimensionError("unstack: length not divisible by part count");
    const Index n = v.size() / parts;
    std::vector<ComplexVector> out;
    for (Index i = 0; i < parts; ++i) out.push_back(v.segment(i * n, n));
    return out;
}

/// LS (with B) followed by ZF: the model-based front end of the type I/II receivers.
inline EqualizedSymbol ls_zf_front_end(const LinkContext& ctx, const std::vector<ComplexVector>& y_p,
                                       const std::vector<ComplexVector>& y_d) {
    const auto est = ls_estimate(y_p, ctx.B_pinv, ctx.cfg.Nt, ctx.cfg.L);
    return zf_equalize(y_d, est, ctx.cfg.M);
}

inline Sample to_sample(const LinkContext& ctx, const SimulatedFrame& sf, bool with_d_hat) {
    Sample s;
    s.y_p = stack(sf.y_p);
    s.x_p = ctx.stacked_pilots();
    s.y_d = stack(sf.y_d);
    s.labels = sf.frame.all_bits();
    s.meta = {sf.snr_db, ctx.pa.is_linear() ? std::numeric_limits<double>::infinity() : ctx.cfg.clipping_db, sf.seed,
              sf.channel_id};
    if (with_d_hat) s.d_hat = ls_zf_front_end(ctx, sf.y_p, sf.y_d).d_hat;
    return s;
}

inline Sample generate_sample(const LinkContext& ctx, std::uint64_t seed, bool with_d_hat = true) {
    return to_sample(ctx, simulate_frame(ctx, ctx.cfg.snr_db, seed), with_d_hat);
}

inline Sample generate_sample(const LinkConfig& cfg, std::uint64_t seed, bool with_d_hat = true) {
    return generate_sample(LinkContext(cfg), seed, with_d_hat);
}

/// SNR for sample `index`: cfg.snr_db in fixed mode, otherwise a uniform pick
/// from cfg.train_snr_db driven by the sample seed.
inline double sample_snr(const LinkConfig& cfg, std::uint64_t sample_seed) {
    if (cfg.snr_mode == SnrMode::fixed) return cfg.snr_db;
    const auto k = derive_seed(sample_seed, {stream::snr}) % cfg.train_snr_db.size();
    return cfg.train_snr_db[static_cast<std::size_t>(k)];
}

/// Sample i uses seed derive_seed(master, {i}).
inline std::vector<Sample> generate_dataset(const LinkContext& ctx, Index count, std::uint64_t master_seed,
                                            bool with_d_hat = true) {
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
        const auto seed = derive_seed(master_seed, {static_cast<std::uint64_t>(i)});
        out.push_back(to_sample(ctx, simulate_frame(ctx, sample_snr(ctx.cfg, seed), seed), with_d_hat));
    }
    return out;
}

// ---------------------------------------------------------------------------
// persistence

inline constexpr char kDatasetMagic[8] = {'M', 'R', 'X', 'D', 'S', 'E', 'T', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;

namespace io {

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void complex_array(const ComplexVector& v) {
        for (Index i = 0; i < v.size(); ++i) {
            f64(v[i].real());
            f64(v[i].imag());
        }
    }
    const std::string& data() const noexcept { return buf_; }
    void clear() { buf_.clear(); }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const char* p, std::size_t n, std::string what) : p_(p), end_(p + n), what_(std::move(what)) {}
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(*p_++);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(p_, n);
        p_ += n;
        return s;
    }
    ComplexVector complex_array(std::size_t n) {
        need(16 * n);
        ComplexVector v(static_cast<Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double re = f64();
            const double im = f64();
            v[static_cast<Index>(i)] = cplx(re, im);
        }
        return v;
    }
    bool done() const noexcept { return p_ == end_; }

private:
    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end_ - p_) < n) throw DatasetError(what_ + ": truncated");
    }
    const char* p_;
    const char* end_;
    std::string what_;
};

inline std::uint32_t crc32_of(const std::string& s) {
    return static_cast<std::uint32_t>(::crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

}  // namespace io

inline void write_dataset(const std::string& path, const std::vector<Sample>& samples, const LinkConfig& cfg) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot open '" + path + "' for writing");
    io::Writer w;
    w.bytes(kDatasetMagic, sizeof kDatasetMagic);
    w.u32(kDatasetVersion);
    const auto text = format_config(cfg);
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.bytes(text.data(), text.size());
    w.u64(samples.size());
    w.u32(io::crc32_of(w.data()));
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));

    for (const auto& s : samples) {
        w.clear();
        w.f64(s.meta.snr_db);
        w.f64(s.meta.clipping_db);
        w.u64(s.meta.seed);
        w.u64(s.meta.channel_id);
        w.u8(s.d_hat ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(s.y_p.size()));
        w.u32(static_cast<std::uint32_t>(s.x_p.size()));
        w.u32(static_cast<std::uint32_t>(s.y_d.size()));
        w.u32(static_cast<std::uint32_t>(s.d_hat ? s.d_hat->size() : 0));
        w.u32(static_cast<std::uint32_t>(s.labels.size()));
        w.complex_array(s.y_p);
        w.complex_array(s.x_p);
        w.complex_array(s.y_d);
        if (s.d_hat) w.complex_array(*s.d_hat);
        w.bytes(s.labels.data(), s.labels.size());
        io::Writer frame;
        frame.u64(w.data().size());
        out.write(frame.data().data(), static_cast<std::streamsize>(frame.data().size()));
        out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
        frame.clear();
        frame.u32(io::crc32_of(w.data()));
        out.write(frame.data().data(), static_cast<std::streamsize>(frame.data().size()));
    }
    if (!out) throw DatasetError("write to '" + path + "' failed");
}

struct Dataset {
    LinkConfig cfg;
    std::vector<Sample> samples;
};

inline Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open '" + path + "'");
    const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    io::Reader r(blob.data(), blob.size(), "dataset '" + path + "'");
    if (r.bytes(sizeof kDatasetMagic) != std::string(kDatasetMagic, sizeof kDatasetMagic))
        throw DatasetError("'" + path + "' is not a dataset file");
    const auto version = r.u32();
    if (version != kDatasetVersion)
        throw DatasetError("dataset version " + std::to_string(version) + " unsupported (expected " +
                           std::to_string(kDatasetVersion) + ")");
    const auto text = r.bytes(r.u32());
    const auto count = r.u64();
    const std::size_t header_len = sizeof kDatasetMagic + 4 + 4 + text.size() + 8;
    if (r.u32() != io::crc32_of(blob.substr(0, header_len))) throw DatasetError("dataset header checksum mismatch");

    Dataset ds;
    ds.cfg = parse_config(text);
    std::size_t offset = header_len + 4;
    for (std::uint64_t i = 0; i < count; ++i) {
        io::Reader fr(blob.data() + offset, blob.size() - offset, "dataset record " + std::to_string(i));
        const auto len = fr.u64();
        if (blob.size() - offset < 8 + len + 4) throw DatasetError("dataset record " + std::to_string(i) + ": truncated");
        const std::string payload = blob.substr(offset + 8, len);
        io::Reader tail(blob.data() + offset + 8 + len, 4, "dataset record " + std::to_string(i));
        if (tail.u32() != io::crc32_of(payload))
            throw DatasetError("dataset record " + std::to_string(i) + ": checksum mismatch");
        offset += 8 + len + 4;

        io::Reader p(payload.data(), payload.size(), "dataset record " + std::to_string(i));
        Sample s;
        s.meta.snr_db = p.f64();
        s.meta.clipping_db = p.f64();
        s.meta.seed = p.u64();
        s.meta.channel_id = p.u64();
        const bool has_d = p.u8() != 0;
        const auto n_yp = p.u32(), n_xp = p.u32(), n_yd = p.u32(), n_d = p.u32(), n_lab = p.u32();
        s.y_p = p.complex_array(n_yp);
        s.x_p = p.complex_array(n_xp);
        s.y_d = p.complex_array(n_yd);
        if (has_d) s.d_hat = p.complex_array(n_d);
        const auto lab = p.bytes(n_lab);
        s.labels.assign(lab.begin(), lab.end());
        if (!p.done()) throw DatasetError("dataset record " + std::to_string(i) + ": trailing bytes");
        ds.samples.push_back(std::move(s));
    }
    if (offset != blob.size()) throw DatasetError("dataset '" + path + "': trailing data after last record");
    return ds;
}

// ---------------------------------------------------------------------------
// splitting

struct SplitIndices {
    std::vector<std::size_t> train, validation, test;
};

/// Shuffled three-way partition of {0..n-1}. Part sizes are floor(f_i * n);
/// the leftover items go one each to the parts with the largest fractional
/// remainders (earlier part wins ties).
inline SplitIndices split(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f >= 0.0) || f > 1.0) throw std::invalid_argument("split: fractions must lie in [0, 1]");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");

    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = fractions[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(exact));
        rem[i] = exact - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {stream::split}));
    std::shuffle(perm.begin(), perm.end(), rng);
    SplitIndices out;
    auto it = perm.begin();
    out.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
    it += static_cast<std::ptrdiff_t>(sizes[0]);
    out.validation.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
    it += static_cast<std::ptrdiff_t>(sizes[1]);
    out.test.assign(it, perm.end());
    return out;
}

}  // namespace mimorx
