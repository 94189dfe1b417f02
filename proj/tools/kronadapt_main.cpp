#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kronadapt/adapters.hpp"
#include "kronadapt/io.hpp"
#include "kronadapt/kpsvd.hpp"
#include "kronadapt/rank_select.hpp"
#include "kronadapt/rng.hpp"
#include "kronadapt/train.hpp"

namespace fs = std::filesystem;
using namespace kronadapt;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_args = 2;
constexpr int exit_io = 3;
constexpr int exit_numeric = 4;

void print_error(const char* category, const std::string& message) {
    std::cerr << "kronadapt: error[" << category << "]: " << message << "\n";
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed) {
    if (flag_seed.has_value()) {
        return *flag_seed;
    }
    if (const char* env = std::getenv("KRONADAPT_SEED")) {
        char* end = nullptr;
        const unsigned long long parsed = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') {
            throw argument_error("KRONADAPT_SEED is not an unsigned integer: '" +
                                 std::string(env) + "'");
        }
        return parsed;
    }
    return 42;
}

KronShape parse_shape(const std::string& text, index_t rows, index_t cols) {
    if (text == "auto") {
        if (rows == 0 || cols == 0) {
            throw argument_error("--shape auto requires an input matrix");
        }
        return choose_factor_shape(rows, cols);
    }
    KronShape shape;
    index_t* slots[4] = {&shape.m, &shape.n, &shape.p, &shape.q};
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        std::size_t next = text.find(',', pos);
        const std::string piece =
            text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        char* end = nullptr;
        const unsigned long long value = std::strtoull(piece.c_str(), &end, 10);
        if (piece.empty() || end == piece.c_str() || *end != '\0' || value == 0) {
            throw argument_error("--shape expects 'm,n,p,q' with positive integers or 'auto', got '" +
                                 text + "'");
        }
        *slots[i] = value;
        if (next == std::string::npos) {
            if (i != 3) {
                throw argument_error("--shape expects exactly four comma-separated values");
            }
            pos = text.size();
        } else {
            pos = next + 1;
        }
    }
    if (pos != text.size()) {
        throw argument_error("--shape expects exactly four comma-separated values");
    }
    return shape;
}

// ----------------------------------------------------------------- decompose

struct DecomposeArgs {
    std::string input;
    std::string shape_text = "auto";
    std::optional<index_t> rank;
    double tau = 0.95;
    index_t r_min = 1;
    std::optional<index_t> r_max;
    bool log_gaps = false;
    std::string out;
    bool json = false;
    std::optional<std::uint64_t> seed;
};

int run_decompose(const DecomposeArgs& args) {
    const Matrix weight = io::load_matrix(args.input);
    const KronShape shape = parse_shape(args.shape_text, weight.rows(), weight.cols());

    SokaAdapter adapter = [&] {
        if (args.rank.has_value()) {
            return soka_init_manual(weight, shape, *args.rank);
        }
        RankPolicy policy;
        policy.tau = args.tau;
        policy.r_min = args.r_min;
        policy.r_max = args.r_max;
        policy.log_gaps = args.log_gaps;
        return soka_init(weight, shape, policy);
    }();

    const std::string mode = args.rank.has_value() ? "manual" : "auto";
    const std::optional<double> tau =
        args.rank.has_value() ? std::nullopt : std::optional<double>(args.tau);

    io::CheckpointMeta meta;
    meta.selection_mode = mode;
    meta.tau = tau;
    meta.r_min = args.r_min;
    meta.r_max = args.r_max;
    meta.seed = resolve_seed(args.seed);
    meta.trained = false;

    const double residual = frobenius_norm(adapter.base);
    const CostReport cost = cost_report(adapter);
    const RankDecision decision = adapter.rank_decision;

    const fs::path out_dir(args.out);
    io::save_adapter(AnyAdapter(std::move(adapter)), out_dir, meta);
    io::write_rank_decision_report(decision, mode, tau, out_dir / "rank_decision.csv",
                                   out_dir / "rank_decision.json");

    if (args.json) {
        std::cout << "{\"shape\":{\"m\":" << shape.m << ",\"n\":" << shape.n << ",\"p\":" << shape.p
                  << ",\"q\":" << shape.q << "},\"r_final\":" << decision.r_final
                  << ",\"residual_fro\":" << io::format_g17(residual)
                  << ",\"trainable_params\":" << cost.trainable_params << ",\"checkpoint\":\""
                  << args.out << "\"}\n";
    } else {
        std::cout << "shape=" << shape.m << "," << shape.n << "," << shape.p << "," << shape.q
                  << " r_final=" << decision.r_final << " residual_fro=" << io::format_g17(residual)
                  << " trainable_params=" << cost.trainable_params << "\n";
    }
    return exit_ok;
}

// --------------------------------------------------------------------- bench

struct BenchArgs {
    std::string shape_text;
    index_t rank = 1;
    std::optional<index_t> lora_rank;
    index_t trials = 11;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool json = false;
};

int run_bench(const BenchArgs& args) {
    const KronShape shape = parse_shape(args.shape_text, 0, 0);
    if (args.rank == 0 || args.rank > std::min(shape.left_size(), shape.right_size())) {
        throw argument_error("--rank must lie in [1, min(m*n, p*q)]");
    }
    if (args.trials < 3) {
        throw argument_error("--trials must be at least 3");
    }
    const index_t rows = shape.weight_rows();
    const index_t cols = shape.weight_cols();
    const index_t lora_rank = args.lora_rank.value_or(args.rank);

    const CostReport soka = soka_cost(shape, args.rank);
    const CostReport lora = low_rank_cost(rows, cols, lora_rank);
    const std::vector<io::CostRow> cost_rows = {
        {"soka", soka},
        {"lora", lora},
    };

    // Random terms and probes; no decomposition is involved in cost benching.
    Rng rng(resolve_seed(args.seed));
    std::vector<KronTerm> terms;
    terms.reserve(args.rank);
    for (index_t k = 0; k < args.rank; ++k) {
        Matrix u(shape.m, shape.n);
        Matrix v(shape.p, shape.q);
        for (double& x : u.values()) {
            x = rng.normal();
        }
        for (double& x : v.values()) {
            x = rng.normal();
        }
        terms.push_back(KronTerm{1.0, std::move(u), std::move(v)});
    }
    Matrix x(cols, 1);
    for (double& v : x.values()) {
        v = rng.normal();
    }

    std::uint64_t counted = 0;
    for (const KronTerm& term : terms) {
        (void)kron_matvec(term, x, &counted);
    }
    const bool count_matches = counted == soka.matvec_flops;

    Matrix dense(rows, cols);
    for (double& v : dense.values()) {
        v = rng.normal();
    }

    const auto median_seconds = [&](auto&& body) {
        std::vector<double> times;
        times.reserve(args.trials);
        for (index_t t = 0; t < args.trials; ++t) {
            const auto start = std::chrono::steady_clock::now();
            body();
            const auto stop = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double>(stop - start).count());
        }
        std::sort(times.begin(), times.end());
        return times[times.size() / 2];
    };
    double sink = 0.0;
    const double kron_seconds = median_seconds([&] {
        for (const KronTerm& term : terms) {
            sink += kron_matvec(term, x).values()[0];
        }
    });
    const double dense_seconds = median_seconds([&] { sink += (dense * x).values()[0]; });
    if (!std::isfinite(sink)) {
        throw numerical_error("bench: non-finite probe result", 0);
    }

    if (!args.out.empty()) {
        const fs::path out_dir(args.out);
        fs::create_directories(out_dir);
        io::write_cost_report(cost_rows, out_dir / "cost_report.csv",
                              out_dir / "cost_report.json");
    }

    if (args.json) {
        std::cout << "{\"shape\":{\"m\":" << shape.m << ",\"n\":" << shape.n << ",\"p\":" << shape.p
                  << ",\"q\":" << shape.q << "}"
                  << ",\"soka\":{\"rank\":" << args.rank
                  << ",\"trainable_params\":" << soka.trainable_params
                  << ",\"matvec_flops\":" << soka.matvec_flops << "}"
                  << ",\"lora\":{\"rank\":" << lora_rank
                  << ",\"trainable_params\":" << lora.trainable_params
                  << ",\"matvec_flops\":" << lora.matvec_flops << "}"
                  << ",\"dense_equivalent_flops\":" << soka.dense_equivalent_flops
                  << ",\"counted_matvec_flops\":" << counted
                  << ",\"count_matches_formula\":" << (count_matches ? "true" : "false")
                  << ",\"timing\":{\"trials\":" << args.trials
                  << ",\"kron_matvec_seconds\":" << io::format_g17(kron_seconds)
                  << ",\"dense_matvec_seconds\":" << io::format_g17(dense_seconds) << "}}\n";
    } else {
        std::cout << "weight " << rows << "x" << cols << " via m=" << shape.m << " n=" << shape.n
                  << " p=" << shape.p << " q=" << shape.q << "\n";
        std::cout << "soka  rank=" << args.rank << " params=" << soka.trainable_params
                  << " matvec_madds=" << soka.matvec_flops
                  << " dense_madds=" << soka.dense_equivalent_flops << "\n";
        std::cout << "lora  rank=" << lora_rank << " params=" << lora.trainable_params
                  << " matvec_madds=" << lora.matvec_flops
                  << " dense_madds=" << lora.dense_equivalent_flops << "\n";
        std::cout << "counted kron matvec madds: " << counted
                  << (count_matches ? " (matches formula)" : " (MISMATCH vs formula)") << "\n";
        std::cout << "median wall clock over " << args.trials << " trials: kron "
                  << io::format_g17(kron_seconds) << " s, dense " << io::format_g17(dense_seconds)
                  << " s\n";
    }
    return count_matches ? exit_ok : exit_numeric;
}

// --------------------------------------------------------------------- train

struct TrainArgs {
    std::string battery;
    std::string task_spec;
    std::string methods = "soka,lora,pissa,full";
    index_t steps = 2000;
    double lr = 0.1;
    index_t batch = 0;
    std::string optimizer = "gd";
    double beta = 0.9;
    double tau = 0.95;
    index_t adapter_rank = 0;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool json = false;
    bool save_adapters = true;
};

std::vector<AdapterKind> parse_methods(const std::string& text) {
    std::vector<AdapterKind> kinds;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t next = text.find(',', pos);
        const std::string piece =
            text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        if (piece.empty()) {
            throw argument_error("--method list has an empty entry");
        }
        kinds.push_back(parse_adapter_kind(piece));
        if (next == std::string::npos) {
            break;
        }
        pos = next + 1;
    }
    if (kinds.empty()) {
        throw argument_error("--method list is empty");
    }
    return kinds;
}

struct TaskEntry {
    BatterySpec spec;
};

std::vector<TaskEntry> load_task_entries(const TrainArgs& args, std::uint64_t seed) {
    std::vector<TaskEntry> entries;
    if (!args.battery.empty()) {
        if (args.battery != "default") {
            throw argument_error("unknown battery '" + args.battery + "' (only 'default' exists)");
        }
        for (BatterySpec& spec : default_battery()) {
            entries.push_back(TaskEntry{std::move(spec)});
        }
        return entries;
    }
    nlohmann::json doc;
    try {
        std::ifstream in(args.task_spec);
        if (!in) {
            throw io_error("cannot open task spec '" + args.task_spec + "'");
        }
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error("task spec '" + args.task_spec + "' is not valid JSON: " + e.what());
    }
    try {
        BatterySpec spec;
        spec.dims.rows = doc.at("rows").get<index_t>();
        spec.dims.cols = doc.at("cols").get<index_t>();
        spec.dims.samples = doc.value("samples", index_t{0});
        spec.kp_rank_star = doc.value("kp_rank_star", index_t{1});
        spec.noise_eps = doc.value("noise_eps", 0.0);
        spec.seed = doc.value("seed", seed);
        spec.id = doc.value("id", std::string());
        if (spec.id.empty()) {
            spec.id = std::to_string(spec.dims.rows) + "x" + std::to_string(spec.dims.cols) +
                      "_r" + std::to_string(spec.kp_rank_star) + "_seed" +
                      std::to_string(spec.seed);
        }
        entries.push_back(TaskEntry{std::move(spec)});
    } catch (const nlohmann::json::exception& e) {
        throw argument_error("task spec '" + args.task_spec +
                             "' is missing or mistypes a field: " + e.what());
    }
    return entries;
}

int run_train(const TrainArgs& args) {
    if (args.battery.empty() == args.task_spec.empty()) {
        throw argument_error("exactly one of --battery or --task-spec is required");
    }
    const std::vector<AdapterKind> kinds = parse_methods(args.methods);
    const std::uint64_t seed = resolve_seed(args.seed);

    TrainConfig config;
    config.steps = args.steps;
    config.learning_rate = args.lr;
    config.batch_size = args.batch;
    if (args.optimizer == "gd") {
        config.optimizer = OptimizerKind::gradient_descent;
    } else if (args.optimizer == "momentum") {
        config.optimizer = OptimizerKind::momentum;
    } else {
        throw argument_error("--optimizer must be 'gd' or 'momentum'");
    }
    config.momentum_beta = args.beta;
    config.seed = seed;
    config.adapter_rank = args.adapter_rank;
    config.validate();

    RankPolicy policy;
    policy.tau = args.tau;
    policy.validate();

    const fs::path out_dir(args.out);
    fs::create_directories(out_dir);

    std::vector<io::ComparisonRow> comparison_rows;
    std::vector<std::string> diverged_runs;
    index_t comparison_steps = 0;

    for (const TaskEntry& entry : load_task_entries(args, seed)) {
        const BatterySpec& spec = entry.spec;
        const SyntheticTask task =
            make_task(spec.dims, spec.kp_rank_star, spec.noise_eps, spec.seed);
        const fs::path task_dir = out_dir / spec.id;
        fs::create_directories(task_dir);

        std::vector<TrainLog> logs;
        for (AdapterKind kind : kinds) {
            TrainOutcome outcome = train_with_adapter(task, kind, policy, config);
            const std::string method = to_string(kind);
            if (args.save_adapters) {
                const std::string snapshot_dir = method + "_checkpoint";
                io::CheckpointMeta meta;
                meta.selection_mode = kind == AdapterKind::soka ? "auto" : "none";
                if (kind == AdapterKind::soka) {
                    meta.tau = args.tau;
                }
                meta.seed = seed;
                meta.trained = true;
                io::save_adapter(outcome.adapter, task_dir / snapshot_dir, meta);
                outcome.log.snapshot_ref = spec.id + "/" + snapshot_dir;
            }
            io::write_train_log(outcome.log, task_dir / (method + ".csv"),
                                task_dir / (method + ".json"));
            if (outcome.log.diverged) {
                diverged_runs.push_back(spec.id + "/" + method);
            }
            logs.push_back(std::move(outcome.log));
        }

        const ComparisonReport report = compare_runs(logs);
        comparison_steps = report.steps;
        for (const MethodSummary& summary : report.methods) {
            comparison_rows.push_back(io::ComparisonRow{spec.id, summary});
        }
    }

    io::write_comparison_report(comparison_rows, comparison_steps, out_dir / "comparison.csv",
                                out_dir / "comparison.json");

    if (args.json) {
        std::cout << "{\"runs\":" << comparison_rows.size() << ",\"diverged\":[";
        for (std::size_t i = 0; i < diverged_runs.size(); ++i) {
            std::cout << (i > 0 ? "," : "") << "\"" << diverged_runs[i] << "\"";
        }
        std::cout << "],\"out\":\"" << args.out << "\"}\n";
    } else {
        std::cout << "wrote " << comparison_rows.size() << " training runs to " << args.out << "\n";
        for (const std::string& name : diverged_runs) {
            std::cout << "diverged: " << name << "\n";
        }
    }
    return diverged_runs.empty() ? exit_ok : exit_numeric;
}

// ------------------------------------------------------------------- inspect

struct InspectArgs {
    std::string checkpoint;
    bool spectrum = false;
    bool verify = false;
    bool json = false;
};

int run_inspect(const InspectArgs& args) {
    const io::LoadedCheckpoint loaded = io::load_adapter(args.checkpoint);

    index_t rows = 0;
    index_t cols = 0;
    index_t rank = 0;
    const SokaAdapter* soka = std::get_if<SokaAdapter>(&loaded.adapter);
    std::visit(
        [&](const auto& adapter) {
            const Matrix merged = merge(adapter);
            rows = merged.rows();
            cols = merged.cols();
        },
        loaded.adapter);
    if (soka != nullptr) {
        rank = soka->terms.size();
    } else if (const auto* lora = std::get_if<LoraAdapter>(&loaded.adapter)) {
        rank = lora->A.cols();
    } else if (const auto* pissa = std::get_if<PissaAdapter>(&loaded.adapter)) {
        rank = pissa->A.cols();
    }

    if (args.spectrum && soka == nullptr) {
        throw argument_error("--spectrum is only available for soka checkpoints");
    }

    // Factor norms start at 1 and may drift during training; surface the
    // range so the drift is observable.
    double norm_min = 0.0;
    double norm_max = 0.0;
    if (soka != nullptr && !soka->terms.empty()) {
        norm_min = std::numeric_limits<double>::infinity();
        for (const KronTerm& term : soka->terms) {
            for (double norm : {frobenius_norm(term.U), frobenius_norm(term.V)}) {
                norm_min = std::min(norm_min, norm);
                norm_max = std::max(norm_max, norm);
            }
        }
    }

    io::VerifyReport verdict;
    if (args.verify) {
        verdict = io::verify_checkpoint(loaded);
    }

    if (args.json) {
        std::cout << "{\"kind\":\"" << loaded.kind << "\",\"rows\":" << rows
                  << ",\"cols\":" << cols << ",\"rank\":" << rank << ",\"trained\":"
                  << (loaded.meta.trained ? "true" : "false") << ",\"selection_mode\":\""
                  << loaded.meta.selection_mode << "\""
                  << ",\"merged_fro\":" << io::format_g17(loaded.merged_fro);
        if (soka != nullptr && !soka->terms.empty()) {
            std::cout << ",\"factor_norm_min\":" << io::format_g17(norm_min)
                      << ",\"factor_norm_max\":" << io::format_g17(norm_max);
        }
        if (args.spectrum && soka != nullptr) {
            std::cout << ",\"spectrum\":[";
            const auto& spectrum = soka->rank_decision.spectrum;
            for (std::size_t k = 0; k < spectrum.size(); ++k) {
                std::cout << (k > 0 ? "," : "") << io::format_g17(spectrum[k]);
            }
            std::cout << "],\"energy_curve\":[";
            const auto& energy = soka->rank_decision.energy_curve;
            for (std::size_t k = 0; k < energy.size(); ++k) {
                std::cout << (k > 0 ? "," : "") << io::format_g17(energy[k]);
            }
            std::cout << "]";
        }
        if (args.verify) {
            std::cout << ",\"verify_passed\":" << (verdict.passed ? "true" : "false")
                      << ",\"verify_failures\":[";
            for (std::size_t i = 0; i < verdict.failures.size(); ++i) {
                std::cout << (i > 0 ? "," : "") << "\"" << verdict.failures[i] << "\"";
            }
            std::cout << "]";
        }
        std::cout << "}\n";
    } else {
        std::cout << "kind=" << loaded.kind << " dims=" << rows << "x" << cols << " rank=" << rank
                  << " trained=" << (loaded.meta.trained ? "yes" : "no")
                  << " selection=" << loaded.meta.selection_mode
                  << " merged_fro=" << io::format_g17(loaded.merged_fro);
        if (soka != nullptr && !soka->terms.empty()) {
            std::cout << " factor_norms=[" << io::format_g17(norm_min) << ","
                      << io::format_g17(norm_max) << "]";
        }
        std::cout << "\n";
        if (args.spectrum && soka != nullptr) {
            std::cout << "k,sigma,energy\n";
            const auto& decision = soka->rank_decision;
            for (std::size_t k = 0; k < decision.spectrum.size(); ++k) {
                std::cout << (k + 1) << "," << io::format_g17(decision.spectrum[k]) << ","
                          << io::format_g17(k < decision.energy_curve.size()
                                                ? decision.energy_curve[k]
                                                : 0.0)
                          << "\n";
            }
        }
        if (args.verify) {
            if (verdict.passed) {
                std::cout << "verify: all checks passed\n";
            } else {
                for (const std::string& failure : verdict.failures) {
                    std::cout << "verify: FAILED: " << failure << "\n";
                }
            }
        }
    }
    return (!args.verify || verdict.passed) ? exit_ok : exit_numeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kronecker-sum adapter toolkit: KPSVD decomposition, dynamic rank selection, "
                 "baselines, and a deterministic toy training harness"};
    app.require_subcommand(1);

    DecomposeArgs dec;
    CLI::App* decompose = app.add_subcommand("decompose", "KPSVD-decompose a weight matrix into "
                                                          "an adapter checkpoint");
    decompose->add_option("--input", dec.input, "input matrix (.kamx)")->required();
    decompose->add_option("--shape", dec.shape_text, "factor shape 'm,n,p,q' or 'auto'");
    decompose->add_option("--rank", dec.rank, "manual rank (bypasses dynamic selection)");
    decompose->add_option("--tau", dec.tau, "energy threshold in (0,1)");
    decompose->add_option("--rmin", dec.r_min, "minimum rank");
    decompose->add_option("--rmax", dec.r_max, "maximum rank");
    decompose->add_flag("--log-gaps", dec.log_gaps, "elbow on log-sigma gaps");
    decompose->add_option("--out", dec.out, "checkpoint directory")->required();
    decompose->add_flag("--json", dec.json, "machine-readable stdout");
    decompose->add_option("--seed", dec.seed, "seed recorded in the checkpoint");

    BenchArgs bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "parameter and matvec cost comparison");
    bench_cmd->add_option("--shape", bench.shape_text, "factor shape 'm,n,p,q'")->required();
    bench_cmd->add_option("--rank", bench.rank, "Kronecker rank")->required();
    bench_cmd->add_option("--lora-rank", bench.lora_rank, "low-rank baseline rank (default: --rank)");
    bench_cmd->add_option("--trials", bench.trials, "wall-clock trials (median reported)");
    bench_cmd->add_option("--seed", bench.seed, "seed for random probes");
    bench_cmd->add_option("--out", bench.out, "directory for cost report files");
    bench_cmd->add_flag("--json", bench.json, "machine-readable stdout");

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "run the toy fine-tuning harness");
    train_cmd->add_option("--battery", train_args.battery, "named task battery ('default')");
    train_cmd->add_option("--task-spec", train_args.task_spec, "JSON task description");
    train_cmd->add_option("--method", train_args.methods, "comma list of adapter kinds");
    train_cmd->add_option("--steps", train_args.steps, "training steps");
    train_cmd->add_option("--lr", train_args.lr, "learning rate");
    train_cmd->add_option("--batch", train_args.batch, "batch size (0 = full batch)");
    train_cmd->add_option("--optimizer", train_args.optimizer, "'gd' or 'momentum'");
    train_cmd->add_option("--beta", train_args.beta, "momentum coefficient");
    train_cmd->add_option("--tau", train_args.tau, "rank-selection energy threshold");
    train_cmd->add_option("--adapter-rank", train_args.adapter_rank,
                          "baseline adapter rank (0 = reuse the dynamic choice)");
    train_cmd->add_option("--seed", train_args.seed, "global seed");
    train_cmd->add_option("--out", train_args.out, "output directory")->required();
    train_cmd->add_flag("--json", train_args.json, "machine-readable stdout");
    train_cmd->add_flag("--save-adapters,!--no-save-adapters", train_args.save_adapters,
                        "write adapter snapshots (default on)");

    InspectArgs ins;
    CLI::App* inspect = app.add_subcommand("inspect", "summarize and verify a checkpoint");
    inspect->add_option("--checkpoint", ins.checkpoint, "checkpoint directory")->required();
    inspect->add_flag("--spectrum", ins.spectrum, "dump singular values and the energy curve");
    inspect->add_flag("--verify", ins.verify, "recompute consistency checks");
    inspect->add_flag("--json", ins.json, "machine-readable stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("args", e.what());
        return exit_args;
    }

    try {
        if (decompose->parsed()) {
            return run_decompose(dec);
        }
        if (bench_cmd->parsed()) {
            return run_bench(bench);
        }
        if (train_cmd->parsed()) {
            return run_train(train_args);
        }
        return run_inspect(ins);
    } catch (const numerical_error& e) {
        print_error("numeric", e.what());
        return exit_numeric;
    } catch (const io_error& e) {
        print_error("io", e.what());
        return exit_io;
    } catch (const dimension_error& e) {
        print_error("args", e.what());
        return exit_args;
    } catch (const std::invalid_argument& e) {
        print_error("args", e.what());
        return exit_args;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
}
