// mimorx: dataset generation, receiver training, BER sweeps and reports.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "mimorx/mimorx.hpp"

namespace fs = std::filesystem;
using namespace mimorx;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string profile = "desk";
    std::vector<std::string> overrides;  // key=value
    std::uint64_t seed = 0;
    std::string out;
};

void add_common(CLI::App* app, CommonOptions& o, const std::string& out_help) {
    app->add_option("--config", o.config_path, "config file (key = value lines), applied on top of the profile");
    app->add_option("--profile", o.profile, "base profile")->check(CLI::IsMember({"desk", "paper"}));
    app->add_option("--set", o.overrides, "extra key=value overrides, applied last");
    app->add_option("--seed", o.seed, "master seed (overrides the config seed)");
    app->add_option("--out", o.out, out_help);
}

LinkConfig resolve_config(const CommonOptions& o, const CLI::App* app) {
    LinkConfig cfg = o.profile == "paper" ? paper_profile() : desk_profile();
    if (!o.config_path.empty()) cfg = load_config(o.config_path, cfg);
    std::string extra;
    for (const auto& kv : o.overrides) extra += kv + "\n";
    if (!extra.empty()) cfg = parse_config(extra, cfg);
    if (app->count("--seed")) cfg.seed = o.seed;
    cfg.validate();
    return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!detail::trim(item).empty()) out.push_back(detail::trim(item));
    return out;
}

std::vector<Sample> load_or_generate(const LinkContext& ctx, const std::string& path, Index count, std::uint64_t seed) {
    if (!path.empty()) {
        auto ds = read_dataset(path);
        std::cerr << "loaded " << ds.samples.size() << " samples from " << path << "\n";
        return std::move(ds.samples);
    }
    std::cerr << "generating " << count << " training samples\n";
    return generate_dataset(ctx, count, seed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MIMO-OFDM receiver simulator with learned detectors"};
    app.require_subcommand(1);

    // gen-data
    CommonOptions gd;
    Index gd_count = -1;
    auto* gen = app.add_subcommand("gen-data", "generate a labelled dataset file");
    add_common(gen, gd, "dataset file to write");
    gen->add_option("--count", gd_count, "number of samples (default: train_samples from the config)");

    // train
    CommonOptions tr;
    std::string tr_receivers = "type1,data_driven,type2";
    std::string tr_data;
    auto* trn = app.add_subcommand("train", "train receiver banks");
    add_common(trn, tr, "directory for checkpoints and manifests");
    trn->add_option("--receivers", tr_receivers, "comma list of type1,data_driven,type2");
    trn->add_option("--data", tr_data, "dataset file (generated on the fly when omitted)");

    // sweep
    CommonOptions sw;
    std::string sw_receivers = "ls_zf_linear,ls_zf_nonlinear";
    std::vector<double> sw_snr{5, 10, 15, 20, 25};
    Index sw_min_bits = 100000;
    std::string sw_banks;
    unsigned sw_workers = 0;
    bool sw_fresh = false;
    auto* swp = app.add_subcommand("sweep", "BER versus SNR sweep; resumes an existing CSV");
    add_common(swp, sw, "CSV file of BER records");
    swp->add_option("--receivers", sw_receivers,
                    "comma list of ls_zf_linear,ls_zf_nonlinear,mld_upper,mld_lower,type1,data_driven,type2");
    swp->add_option("--snr", sw_snr, "SNR points in dB")->delimiter(',');
    swp->add_option("--min-bits", sw_min_bits, "minimum payload bits per point");
    swp->add_option("--banks", sw_banks, "directory holding trained bank manifests");
    swp->add_option("--workers", sw_workers, "worker threads (0 = hardware concurrency)");
    swp->add_flag("--fresh", sw_fresh, "ignore rows already present in the output CSV");

    // report
    CommonOptions rp;
    std::vector<std::string> rp_inputs;
    auto* rep = app.add_subcommand("report", "aggregate BER CSVs into a long-format table");
    rep->add_option("inputs", rp_inputs, "BER CSV files")->required();
    rep->add_option("--out", rp.out, "table file (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto cfg = resolve_config(gd, gen);
            if (gd.out.empty()) throw std::invalid_argument("gen-data: --out is required");
            const LinkContext ctx(cfg);
            const Index n = gd_count > 0 ? gd_count : cfg.train_samples;
            const auto samples = generate_dataset(ctx, n, cfg.seed);
            write_dataset(gd.out, samples, cfg);
            std::cout << "wrote " << samples.size() << " samples to " << gd.out << "\n";
        } else if (trn->parsed()) {
            const auto cfg = resolve_config(tr, trn);
            const std::string out = tr.out.empty() ? "banks" : tr.out;
            const LinkContext ctx(cfg);
            auto samples = load_or_generate(ctx, tr_data, cfg.train_samples, cfg.seed);
            const auto parts = split(samples.size(), {1.0 - cfg.validation_fraction, cfg.validation_fraction, 0.0},
                                     derive_seed(cfg.seed, {stream::split}));
            std::vector<Sample> train_set, val_set;
            for (auto i : parts.train) train_set.push_back(samples[i]);
            for (auto i : parts.validation) val_set.push_back(samples[i]);
            samples.clear();
            auto opt = train_options(cfg);
            for (const auto& name : split_list(tr_receivers)) {
                const auto kind = parse_receiver_kind(name);
                opt.on_epoch = [&](Index e, double tl, double vl) {
                    std::cerr << name << " epoch " << e + 1 << " train " << tl << " val " << vl << "\n";
                };
                BankTrainReport report;
                const auto bank = train_bank(kind, ctx, train_set, val_set, cfg.train_groups, opt, cfg.seed, &report);
                const auto manifest = save_bank(bank, out);
                std::cout << "saved " << name << " bank (" << bank.nets.size() << " groups) to " << manifest.string() << "\n";
            }
        } else if (swp->parsed()) {
            SweepSpec spec;
            spec.cfg = resolve_config(sw, swp);
            spec.seed = spec.cfg.seed;
            spec.receivers = split_list(sw_receivers);
            spec.snr_points = sw_snr;
            spec.min_bits = sw_min_bits;
            spec.workers = sw_workers;
            const std::string out = sw.out.empty() ? "ber.csv" : sw.out;
            SweepResources res;
            for (const auto& r : spec.receivers) {
                if (!is_learned_receiver(r)) continue;
                if (sw_banks.empty()) throw std::invalid_argument("sweep: --banks is required for learned receivers");
                res.banks[r] = load_bank(fs::path(sw_banks) / (r + "_manifest.txt"));
            }
            std::vector<BerRecord> done;
            if (!sw_fresh && fs::exists(out)) {
                done = read_csv(out);
                std::cerr << "resuming: " << done.size() << " rows already in " << out << "\n";
            }
            std::vector<BerRecord> progress = done;
            std::mutex mu;
            const auto rows = run_sweep(spec, res, done, [&](const BerRecord& r) {
                std::lock_guard lock(mu);
                progress.push_back(r);
                write_csv(out, progress);
                std::cerr << to_csv_row(r) << "\n";
            });
            write_csv(out, rows);
            std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
        } else if (rep->parsed()) {
            std::vector<BerRecord> rows;
            for (const auto& in : rp_inputs) {
                auto r = read_csv(in);
                rows.insert(rows.end(), r.begin(), r.end());
            }
            const auto table = report_table(rows);
            if (rp.out.empty()) {
                std::cout << table;
            } else {
                std::ofstream(rp.out) << table;
                std::cout << "wrote " << rp.out << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
