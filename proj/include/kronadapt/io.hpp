#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kronadapt/adapters.hpp"
#include "kronadapt/train.hpp"

namespace kronadapt::io {

inline constexpr std::uint16_t matrix_format_version = 1;
inline constexpr std::uint16_t checkpoint_format_version = 1;

/// Binary matrix container: magic "KAMX", u16 version, u64 rows, u64 cols,
/// then rows*cols binary64 values, everything little-endian and row-major.
/// Round trips are bit-exact. Writes go through a temp file and a rename.
void save_matrix(const Matrix& m, const std::filesystem::path& path);
Matrix load_matrix(const std::filesystem::path& path);

struct CheckpointMeta {
    std::string selection_mode = "auto"; // auto | manual | none
    std::optional<double> tau;           // set when selection_mode == auto
    index_t r_min = 1;
    std::optional<index_t> r_max;
    std::uint64_t seed = 0;
    bool trained = false;
};

/// Writes a checkpoint directory: manifest.json plus one .kamx payload per
/// matrix (base, sigma vector and U/V factors, or A/B). Nothing
/// environment-dependent is stored; reload reproduces forward outputs
/// bit-exactly.
void save_adapter(const AnyAdapter& adapter, const std::filesystem::path& dir,
                  const CheckpointMeta& meta);

struct LoadedCheckpoint {
    AnyAdapter adapter;
    CheckpointMeta meta;
    std::string kind;
    double merged_fro = 0.0; // ||merge(adapter)||_F recorded at save time
    std::map<std::string, std::string> checksums; // payload name -> fnv1a64 hex
};

LoadedCheckpoint load_adapter(const std::filesystem::path& dir);

struct VerifyReport {
    bool passed = true;
    std::vector<std::string> failures;
};

/// Recomputes the stored-consistency checks: merged Frobenius norm,
/// merge-forward equivalence on a fixed probe, and for untrained checkpoints
/// the initialization identities (residual norm, sigma-vs-spectrum, unit-norm
/// factors, zero LoRA update).
VerifyReport verify_checkpoint(const LoadedCheckpoint& checkpoint);

/// Doubles in report files use 17 significant digits so binary64 values
/// survive a text round trip.
std::string format_g17(double value);

void write_rank_decision_report(const RankDecision& decision, const std::string& selection_mode,
                                std::optional<double> tau, const std::filesystem::path& csv_path,
                                const std::filesystem::path& json_path);

struct CostRow {
    std::string method;
    CostReport report;
};

void write_cost_report(std::span<const CostRow> rows, const std::filesystem::path& csv_path,
                       const std::filesystem::path& json_path);

void write_train_log(const TrainLog& log, const std::filesystem::path& csv_path,
                     const std::filesystem::path& json_path);

struct ComparisonRow {
    std::string task_id;
    MethodSummary summary;
};

void write_comparison_report(std::span<const ComparisonRow> rows, index_t steps,
                             const std::filesystem::path& csv_path,
                             const std::filesystem::path& json_path);

} // namespace kronadapt::io
