#pragma once

// BER sweeps over SNR for the learned receivers and the classical/genie
// benchmarks, plus CSV persistence and aggregation.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dataset.hpp"
#include "linear_rx.hpp"
#include "mld.hpp"
#include "receivers.hpp"

namespace mimorx {

inline const std::vector<std::string>& all_receiver_names() {
    static const std::vector<std::string> names{"ls_zf_linear", "ls_zf_nonlinear", "mld_upper", "mld_lower",
                                                "type1",        "data_driven",     "type2"};
    return names;
}

inline bool is_learned_receiver(const std::string& name) {
    return name == "type1" || name == "data_driven" || name == "type2";
}

struct SweepSpec {
    std::vector<double> snr_points{5, 10, 15, 20, 25};
    std::vector<std::string> receivers{"ls_zf_linear", "ls_zf_nonlinear"};
    Index min_bits = 100000;
    LinkConfig cfg;
    std::uint64_t seed = 1;
    unsigned workers = 0;  // 0: one per hardware thread

    void validate() const {
        if (min_bits < 10000) throw std::invalid_argument("SweepSpec: min_bits must be at least 1e4");
        for (double s : snr_points)
            if (!std::isfinite(s)) throw std::invalid_argument("SweepSpec: SNR points must be finite");
        for (const auto& r : receivers)
            if (std::find(all_receiver_names().begin(), all_receiver_names().end(), r) == all_receiver_names().end())
                throw std::invalid_argument("SweepSpec: unknown receiver '" + r + "'");
        cfg.validate();
    }
};

struct BerRecord {
    std::string receiver;
    double snr_db = 0.0;
    double clipping_db = 0.0;
    std::int64_t bits_simulated = 0;
    std::int64_t bit_errors = 0;
    double ber = 0.0;
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;

    /// Equality over every field that is a function of the seed (wall time excluded).
    bool same_result(const BerRecord& o) const {
        return receiver == o.receiver && snr_db == o.snr_db && clipping_db == o.clipping_db &&
               bits_simulated == o.bits_simulated && bit_errors == o.bit_errors && ber == o.ber && seed == o.seed;
    }
};

struct WilsonInterval {
    double low = 0.0;
    double high = 0.0;
    double half_width() const { return 0.5 * (high - low); }
    bool overlaps(const WilsonInterval& o) const { return low <= o.high && o.low <= high; }
};

/// Wilson score interval; z = 1.96 gives 95 % coverage.
inline WilsonInterval wilson_interval(std::int64_t errors, std::int64_t trials, double z = 1.96) {
    if (trials <= 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(errors) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

inline constexpr std::int64_t kReliableErrorCount = 100;

inline std::int64_t count_bit_errors(const BitVector& a, const BitVector& b) {
    if (a.size() != b.size()) throw DimensionError("count_bit_errors: length mismatch");
    std::int64_t e = 0;
    for (std::size_t i = 0; i < a.size(); ++i) e += (a[i] != b[i]);
    return e;
}

/// Seed of the (SNR) cell; shared by every receiver so that all receivers at
/// one SNR see the same channels, payloads and noise.
inline std::uint64_t cell_seed(std::uint64_t master, double snr_db) {
    return derive_seed(master, {std::bit_cast<std::uint64_t>(snr_db)});
}

/// Contexts and banks a sweep may need; banks are only required for learned receivers.
struct SweepResources {
    std::map<std::string, ReceiverBank> banks;
};

/// Simulates frames with seeds derive_seed(seed, {frame}) until at least
/// min_bits payload bits have been scored. Pure function of its arguments
/// apart from wall_time_s.
inline BerRecord run_cell(const std::string& receiver, double snr_db, std::uint64_t seed, const LinkConfig& cfg,
                          Index min_bits, const SweepResources& res) {
    const auto t0 = std::chrono::steady_clock::now();
    LinkConfig c = cfg;
    c.linear_pa = receiver == "ls_zf_linear";
    const LinkContext ctx(c);
    BerRecord rec;
    rec.receiver = receiver;
    rec.snr_db = snr_db;
    rec.clipping_db = cfg.clipping_db;
    rec.seed = seed;

    std::uint64_t frame = 0;
    auto next_frame = [&] { return simulate_frame(ctx, snr_db, derive_seed(seed, {frame++})); };

    if (receiver == "ls_zf_linear" || receiver == "ls_zf_nonlinear") {
        while (rec.bits_simulated < min_bits) {
            const auto sf = next_frame();
            const auto eq = ls_zf_front_end(ctx, sf.y_p, sf.y_d);
            const auto bits = zf_baseline_detect(eq, c.Nt, c.rho);
            const auto truth = sf.frame.all_bits();
            rec.bit_errors += count_bit_errors(bits, truth);
            rec.bits_simulated += static_cast<std::int64_t>(truth.size());
        }
    } else if (receiver == "mld_upper" || receiver == "mld_lower") {
        MldConfig m;
        m.k_mld = c.k_mld;
        m.mode = receiver == "mld_upper" ? MldMode::upper : MldMode::lower;
        m.budget = c.mld_budget;
        while (rec.bits_simulated < min_bits) {
            const auto sf = next_frame();
            const auto r = mld_detect_frame(ctx, sf, m);
            rec.bit_errors += count_bit_errors(r.detected, r.truth);
            rec.bits_simulated += static_cast<std::int64_t>(r.truth.size());
        }
    } else if (is_learned_receiver(receiver)) {
        auto it = res.banks.find(receiver);
        if (it == res.banks.end()) throw std::invalid_argument("run_cell: no trained bank for receiver '" + receiver + "'");
        const auto& bank = it->second;
        const auto groups = bank.groups();
        if (groups.empty()) throw std::invalid_argument("run_cell: bank for '" + receiver + "' is empty");
        const bool need_d = bank.kind != ReceiverKind::data_driven;
        constexpr int batch = 64;
        while (rec.bits_simulated < min_bits) {
            std::vector<Sample> samples;
            for (int i = 0; i < batch; ++i) samples.push_back(to_sample(ctx, next_frame(), need_d));
            const auto detected = detect_groups(bank, samples, groups, ctx);
            for (std::size_t i = 0; i < samples.size() && rec.bits_simulated < min_bits; ++i) {
                const auto truth = group_truth(samples[i], groups, c);
                rec.bit_errors += count_bit_errors(detected[i], truth);
                rec.bits_simulated += static_cast<std::int64_t>(truth.size());
            }
        }
    } else {
        throw std::invalid_argument("run_cell: unknown receiver '" + receiver + "'");
    }
    rec.ber = static_cast<double>(rec.bit_errors) / static_cast<double>(rec.bits_simulated);
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

/// Runs every (receiver, SNR) cell not already present in `done`, on a bounded
/// pool of workers. Rows come back in (receiver list order, SNR list order),
/// with previously completed rows kept as they were.
inline std::vector<BerRecord> run_sweep(const SweepSpec& spec, const SweepResources& res,
                                        const std::vector<BerRecord>& done = {},
                                        const std::function<void(const BerRecord&)>& on_record = {}) {
    spec.validate();
    for (const auto& r : spec.receivers)
        if (is_learned_receiver(r) && !res.banks.count(r))
            throw std::invalid_argument("run_sweep: missing trained bank for receiver '" + r + "'");

    struct Cell {
        std::string receiver;
        double snr;
        std::optional<BerRecord> rec;
    };
    std::vector<Cell> cells;
    for (const auto& r : spec.receivers)
        for (double s : spec.snr_points) {
            Cell c{r, s, std::nullopt};
            for (const auto& d : done)
                if (d.receiver == r && d.snr_db == s) c.rec = d;
            cells.push_back(std::move(c));
        }

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    auto work = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= cells.size()) return;
            auto& cell = cells[i];
            if (cell.rec) continue;
            try {
                auto rec = run_cell(cell.receiver, cell.snr, cell_seed(spec.seed, cell.snr), spec.cfg, spec.min_bits, res);
                std::lock_guard lock(mu);
                cell.rec = rec;
                if (on_record) on_record(rec);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    unsigned n = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
    n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(1, cells.size())));
    if (n <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < n; ++k) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    std::vector<BerRecord> out;
    for (auto& c : cells) out.push_back(*c.rec);
    return out;
}

// ---------------------------------------------------------------------------
// CSV

inline const char* kCsvHeader = "receiver,snr_db,clipping_db,bits_simulated,bit_errors,ber,wall_time_s,seed";

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string to_csv_row(const BerRecord& r) {
    std::ostringstream os;
    os << r.receiver << ',' << format_double(r.snr_db) << ',' << format_double(r.clipping_db) << ',' << r.bits_simulated
       << ',' << r.bit_errors << ',' << format_double(r.ber) << ',' << std::fixed << std::setprecision(3) << r.wall_time_s
       << ',' << r.seed;
    return os.str();
}

inline BerRecord parse_csv_row(const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 8) throw std::runtime_error("CSV row has " + std::to_string(f.size()) + " fields, expected 8: " + line);
    BerRecord r;
    r.receiver = f[0];
    r.snr_db = std::stod(f[1]);
    r.clipping_db = std::stod(f[2]);
    r.bits_simulated = std::stoll(f[3]);
    r.bit_errors = std::stoll(f[4]);
    r.ber = std::stod(f[5]);
    r.wall_time_s = std::stod(f[6]);
    r.seed = std::stoull(f[7]);
    return r;
}

inline void write_csv(const std::string& path, const std::vector<BerRecord>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << kCsvHeader << "\n";
    for (const auto& r : rows) f << to_csv_row(r) << "\n";
}

inline std::vector<BerRecord> read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line) || line != kCsvHeader) throw std::runtime_error("'" + path + "' lacks the BER CSV header");
    std::vector<BerRecord> rows;
    while (std::getline(f, line))
        if (!line.empty()) rows.push_back(parse_csv_row(line));
    return rows;
}

/// Long-format table: one row per (receiver, snr, clipping) with pooled counts,
/// Wilson bounds and a reliability flag (at least 100 observed errors).
inline std::string report_table(const std::vector<BerRecord>& rows) {
    std::map<std::tuple<std::string, double, double>, std::pair<std::int64_t, std::int64_t>> pooled;
    for (const auto& r : rows) {
        auto& p = pooled[{r.receiver, r.clipping_db, r.snr_db}];
        p.first += r.bits_simulated;
        p.second += r.bit_errors;
    }
    std::ostringstream os;
    os << "receiver,clipping_db,snr_db,bits,errors,ber,ci95_low,ci95_high,ci95_half_width,reliable\n";
    for (const auto& [key, p] : pooled) {
        const auto& [rx, clip, snr] = key;
        const auto ci = wilson_interval(p.second, p.first);
        os << rx << ',' << format_double(clip) << ',' << format_double(snr) << ',' << p.first << ',' << p.second << ','
           << format_double(static_cast<double>(p.second) / static_cast<double>(p.first)) << ',' << format_double(ci.low)
           << ',' << format_double(ci.high) << ',' << format_double(ci.half_width()) << ','
           << (p.second >= kReliableErrorCount ? "yes" : "no") << "\n";
    }
    return os.str();
}

}  // namespace mimorx
