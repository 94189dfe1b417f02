#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kronadapt/adapters.hpp"
#include "kronadapt/io.hpp"
#include "oracles.hpp"

using namespace kronadapt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path() /
                         ("kronadapt_io_" + std::string(tag) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(out);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

const fs::path golden_dir = KRONADAPT_GOLDEN_DIR;

} // namespace

TEST_CASE("matrix files round trip bit-exactly") {
    const fs::path dir = fresh_dir("roundtrip");
    const Matrix m = oracles::random_matrix(7, 3, 1234);
    io::save_matrix(m, dir / "m.kamx");
    CHECK(io::load_matrix(dir / "m.kamx") == m);

    // Two saves of the same matrix produce identical bytes.
    io::save_matrix(m, dir / "m2.kamx");
    CHECK(read_bytes(dir / "m.kamx") == read_bytes(dir / "m2.kamx"));
}

TEST_CASE("matrix file negative cases") {
    const fs::path dir = fresh_dir("negative");
    const Matrix m = oracles::random_matrix(2, 2, 9);
    io::save_matrix(m, dir / "ok.kamx");
    std::string bytes = read_bytes(dir / "ok.kamx");

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    bad_magic[1] = 'X';
    bad_magic[2] = 'X';
    bad_magic[3] = 'X';
    write_bytes(dir / "magic.kamx", bad_magic);
    CHECK_THROWS_AS(io::load_matrix(dir / "magic.kamx"), format_error);

    std::string bad_version = bytes;
    bad_version[4] = 9;
    write_bytes(dir / "version.kamx", bad_version);
    CHECK_THROWS_AS(io::load_matrix(dir / "version.kamx"), version_error);

    write_bytes(dir / "truncated.kamx", bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(io::load_matrix(dir / "truncated.kamx"), corrupt_file_error);

    write_bytes(dir / "trailing.kamx", bytes + std::string(2, '\0'));
    CHECK_THROWS_AS(io::load_matrix(dir / "trailing.kamx"), corrupt_file_error);

    CHECK_THROWS_AS(io::load_matrix(dir / "missing.kamx"), corrupt_file_error);

    // Empty matrices cannot exist: construction already rejects them, so save
    // never sees one.
    CHECK_THROWS_AS(Matrix(0, 0), dimension_error);
}

TEST_CASE("golden matrix file is stable") {
    const Matrix expected(3, 2, {1.5, -2.25, 0.5, 4.0, -1.0, 0.125});
    CHECK(io::load_matrix(golden_dir / "matrix_3x2.kamx") == expected);

    const fs::path dir = fresh_dir("golden");
    io::save_matrix(expected, dir / "m.kamx");
    CHECK(read_bytes(dir / "m.kamx") == read_bytes(golden_dir / "matrix_3x2.kamx"));
}

TEST_CASE("golden rank decision report is stable") {
    const RankDecision decision =
        select_rank(std::vector<double>{10, 9, 1, 0.9}, RankPolicy{});
    const fs::path dir = fresh_dir("golden_report");
    io::write_rank_decision_report(decision, "auto", 0.95, dir / "rank_decision.csv",
                                   dir / "rank_decision.json");
    CHECK(read_bytes(dir / "rank_decision.csv") == read_bytes(golden_dir / "rank_decision.csv"));
    CHECK(read_bytes(dir / "rank_decision.json") == read_bytes(golden_dir / "rank_decision.json"));
}

TEST_CASE("golden checkpoint is stable") {
    const io::LoadedCheckpoint loaded = io::load_adapter(golden_dir / "checkpoint_soka");
    CHECK(loaded.kind == "soka");
    CHECK(io::verify_checkpoint(loaded).passed);
    const auto& soka = std::get<SokaAdapter>(loaded.adapter);
    CHECK(soka.terms.size() == 1);
    CHECK(soka.terms[0].sigma == 2.0);

    const fs::path dir = fresh_dir("golden_ckpt");
    io::save_adapter(loaded.adapter, dir, loaded.meta);
    for (const auto& entry : fs::directory_iterator(golden_dir / "checkpoint_soka")) {
        const fs::path name = entry.path().filename();
        CHECK(read_bytes(dir / name) == read_bytes(golden_dir / "checkpoint_soka" / name));
    }
}

TEST_CASE("soka checkpoint round trips with bit-identical forward outputs") {
    const KronShape shape{3, 2, 2, 3};
    const Matrix w = oracles::random_matrix(6, 6, 77);
    const SokaAdapter adapter = soka_init(w, shape, RankPolicy{});

    const fs::path dir = fresh_dir("soka_ckpt");
    io::CheckpointMeta meta;
    meta.tau = 0.95;
    meta.seed = 7;
    io::save_adapter(AnyAdapter(adapter), dir, meta);

    const io::LoadedCheckpoint loaded = io::load_adapter(dir);
    CHECK(loaded.kind == "soka");
    CHECK_FALSE(loaded.meta.trained);

    const Matrix probe = oracles::random_matrix(6, 4, 78);
    const Matrix before = forward(adapter, probe);
    const Matrix after = forward_any(loaded.adapter, probe);
    CHECK(before == after); // bit-exact

    CHECK(io::verify_checkpoint(loaded).passed);

    // Saving the reloaded adapter reproduces every byte.
    const fs::path dir2 = fresh_dir("soka_ckpt2");
    io::save_adapter(loaded.adapter, dir2, loaded.meta);
    for (const auto& entry : fs::directory_iterator(dir)) {
        const fs::path name = entry.path().filename();
        CHECK(read_bytes(dir / name) == read_bytes(dir2 / name));
    }
}

TEST_CASE("rank-zero checkpoints round trip") {
    const Matrix w = oracles::random_matrix(6, 6, 85);
    const SokaAdapter adapter = soka_init_manual(w, KronShape{3, 2, 2, 3}, 0);
    CHECK(adapter.terms.empty());
    CHECK(max_abs_diff(adapter.base, w) == 0.0);

    const fs::path dir = fresh_dir("rank0");
    io::CheckpointMeta meta;
    meta.selection_mode = "manual";
    io::save_adapter(AnyAdapter(adapter), dir, meta);
    const io::LoadedCheckpoint loaded = io::load_adapter(dir);
    const auto& soka = std::get<SokaAdapter>(loaded.adapter);
    CHECK(soka.terms.empty());
    CHECK(soka.base == w);
    CHECK(io::verify_checkpoint(loaded).passed);
}

TEST_CASE("lora checkpoint keeps the zero update exactly") {
    const Matrix w = oracles::random_matrix(5, 4, 79);
    const LoraAdapter adapter = lora_init(w, 2, 80, 0.25);
    const fs::path dir = fresh_dir("lora_ckpt");
    io::CheckpointMeta meta;
    meta.selection_mode = "none";
    io::save_adapter(AnyAdapter(adapter), dir, meta);
    const io::LoadedCheckpoint loaded = io::load_adapter(dir);
    const auto& lora = std::get<LoraAdapter>(loaded.adapter);
    for (double v : lora.B.values()) {
        CHECK(v == 0.0);
    }
    CHECK(lora.scale == 0.25);
    CHECK(io::verify_checkpoint(loaded).passed);
}

TEST_CASE("checkpoint negative cases") {
    const Matrix w = oracles::random_matrix(6, 6, 81);
    const SokaAdapter adapter = soka_init(w, KronShape{3, 2, 2, 3}, RankPolicy{});
    io::CheckpointMeta meta;

    SUBCASE("manifest dimension tamper is a consistency error") {
        const fs::path dir = fresh_dir("tamper");
        io::save_adapter(AnyAdapter(adapter), dir, meta);
        std::string manifest = read_bytes(dir / "manifest.json");
        const std::string needle = "\"rows\": 6";
        const auto pos = manifest.find(needle);
        REQUIRE(pos != std::string::npos);
        manifest.replace(pos, needle.size(), "\"rows\": 5");
        write_bytes(dir / "manifest.json", manifest);
        CHECK_THROWS_AS(io::load_adapter(dir), consistency_error);
    }

    SUBCASE("missing payload is a corrupt checkpoint") {
        const fs::path dir = fresh_dir("missing_payload");
        io::save_adapter(AnyAdapter(adapter), dir, meta);
        fs::remove(dir / "base.kamx");
        CHECK_THROWS_AS(io::load_adapter(dir), corrupt_file_error);
    }

    SUBCASE("flipped payload byte fails verification") {
        const fs::path dir = fresh_dir("bitflip");
        io::save_adapter(AnyAdapter(adapter), dir, meta);
        std::string payload = read_bytes(dir / "base.kamx");
        payload[30] = static_cast<char>(payload[30] ^ 0x40);
        write_bytes(dir / "base.kamx", payload);
        const io::LoadedCheckpoint loaded = io::load_adapter(dir);
        CHECK_FALSE(io::verify_checkpoint(loaded).passed);
    }
}

TEST_CASE("report writers are deterministic") {
    TrainLog log;
    log.method = "soka";
    log.records = {{0, 0.5, 1.25}, {1, 0.25, 0.75}};
    const fs::path dir = fresh_dir("reports");
    io::write_train_log(log, dir / "a.csv", dir / "a.json");
    io::write_train_log(log, dir / "b.csv", dir / "b.json");
    CHECK(read_bytes(dir / "a.csv") == read_bytes(dir / "b.csv"));
    CHECK(read_bytes(dir / "a.json") == read_bytes(dir / "b.json"));
    CHECK(read_bytes(dir / "a.csv") == "step,loss,grad_norm\n0,0.5,1.25\n1,0.25,0.75\n");

    const std::vector<io::CostRow> rows{{"soka", soka_cost(KronShape{64, 64, 64, 64}, 128)},
                                        {"lora", low_rank_cost(4096, 4096, 128)}};
    io::write_cost_report(rows, dir / "cost.csv", dir / "cost.json");
    const std::string cost_csv = read_bytes(dir / "cost.csv");
    CHECK(cost_csv.find("soka,1048704") != std::string::npos);
    CHECK(cost_csv.find("lora,1048576") != std::string::npos);
}

TEST_CASE("g17 formatting round trips binary64") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, 0.95}) {
        const std::string text = io::format_g17(v);
        CHECK(std::stod(text) == v);
    }
}
