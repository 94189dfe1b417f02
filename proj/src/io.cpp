#include "kronadapt/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "kronadapt/rng.hpp"

namespace kronadapt::io {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char matrix_magic[4] = {'K', 'A', 'M', 'X'};

void store_u16_le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void store_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void store_f64_le(std::string& out, double v) {
    store_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

std::uint16_t load_u16_le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t load_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

double load_f64_le(const unsigned char* p) { return std::bit_cast<double>(load_u64_le(p)); }

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw io_error("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw io_error("short write to '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw corrupt_file_error("cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return std::move(buffer).str();
}

std::string matrix_file_bytes(const Matrix& m) {
    std::string bytes;
    bytes.reserve(22 + 8 * m.size());
    bytes.append(matrix_magic, 4);
    store_u16_le(bytes, matrix_format_version);
    store_u64_le(bytes, m.rows());
    store_u64_le(bytes, m.cols());
    for (double v : m.values()) {
        store_f64_le(bytes, v);
    }
    return bytes;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string hash_hex(std::uint64_t hash) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

} // namespace

void save_matrix(const Matrix& m, const fs::path& path) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw dimension_error("save_matrix: dimensions must be positive");
    }
    write_file_atomic(path, matrix_file_bytes(m));
}

Matrix load_matrix(const fs::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 22) {
        throw corrupt_file_error("matrix file '" + path.string() + "' shorter than header");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, matrix_magic, 4) != 0) {
        throw format_error("matrix file '" + path.string() + "' has wrong magic bytes");
    }
    const std::uint16_t version = load_u16_le(p + 4);
    if (version != matrix_format_version) {
        throw version_error("matrix file '" + path.string() + "' has unsupported version " +
                            std::to_string(version));
    }
    const std::uint64_t rows = load_u64_le(p + 6);
    const std::uint64_t cols = load_u64_le(p + 14);
    if (rows == 0 || cols == 0) {
        throw corrupt_file_error("matrix file '" + path.string() + "' declares empty dimensions");
    }
    if (rows > (bytes.size() / 8) || cols > (bytes.size() / 8)) {
        throw corrupt_file_error("matrix file '" + path.string() + "' declares oversized payload");
    }
    const std::uint64_t count = rows * cols;
    const std::uint64_t expected = 22 + 8 * count;
    if (bytes.size() < expected) {
        throw corrupt_file_error("matrix file '" + path.string() + "' payload truncated");
    }
    if (bytes.size() > expected) {
        throw corrupt_file_error("matrix file '" + path.string() + "' has trailing bytes");
    }
    std::vector<double> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        values[i] = load_f64_le(p + 22 + 8 * i);
        if (!std::isfinite(values[i])) {
            throw corrupt_file_error("matrix file '" + path.string() +
                                     "' carries a non-finite value at index " + std::to_string(i));
        }
    }
    return Matrix(rows, cols, std::move(values));
}

namespace {

std::string payload_name(const char* prefix, index_t k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03zu.kamx", prefix, static_cast<std::size_t>(k));
    return buf;
}

ordered_json decision_to_json(const RankDecision& decision) {
    ordered_json j;
    j["spectrum"] = decision.spectrum;
    j["energy_curve"] = decision.energy_curve;
    j["gaps"] = decision.gaps;
    j["r_energy"] = decision.r_energy;
    j["r_elbow"] = decision.r_elbow;
    j["r_final"] = decision.r_final;
    j["clamped"] = decision.clamped;
    return j;
}

RankDecision decision_from_json(const ordered_json& j) {
    RankDecision decision;
    decision.spectrum = j.at("spectrum").get<std::vector<double>>();
    decision.energy_curve = j.at("energy_curve").get<std::vector<double>>();
    decision.gaps = j.at("gaps").get<std::vector<double>>();
    decision.r_energy = j.at("r_energy").get<index_t>();
    decision.r_elbow = j.at("r_elbow").get<index_t>();
    decision.r_final = j.at("r_final").get<index_t>();
    decision.clamped = j.at("clamped").get<bool>();
    return decision;
}

} // namespace

void save_adapter(const AnyAdapter& adapter, const fs::path& dir, const CheckpointMeta& meta) {
    fs::create_directories(dir);

    ordered_json manifest;
    manifest["container"] = "kronadapt-checkpoint";
    manifest["version"] = checkpoint_format_version;
    manifest["trained"] = meta.trained;
    manifest["seed"] = meta.seed;
    ordered_json selection;
    selection["mode"] = meta.selection_mode;
    if (meta.tau.has_value()) {
        selection["tau"] = *meta.tau;
    } else {
        selection["tau"] = nullptr;
    }
    selection["r_min"] = meta.r_min;
    if (meta.r_max.has_value()) {
        selection["r_max"] = *meta.r_max;
    } else {
        selection["r_max"] = nullptr;
    }
    manifest["selection"] = selection;
    manifest["merged_fro"] = frobenius_norm(merge_any(adapter));

    ordered_json payloads;
    ordered_json checksums;
    const auto save_payload = [&](const std::string& name, const Matrix& m) {
        const std::string bytes = matrix_file_bytes(m);
        write_file_atomic(dir / name, bytes);
        checksums[name] = hash_hex(fnv1a64(bytes));
    };
    if (const auto* soka = std::get_if<SokaAdapter>(&adapter)) {
        manifest["kind"] = "soka";
        manifest["rows"] = soka->base.rows();
        manifest["cols"] = soka->base.cols();
        ordered_json shape;
        shape["m"] = soka->shape.m;
        shape["n"] = soka->shape.n;
        shape["p"] = soka->shape.p;
        shape["q"] = soka->shape.q;
        manifest["shape"] = shape;
        manifest["rank"] = soka->terms.size();
        manifest["decision"] = decision_to_json(soka->rank_decision);
        manifest["residual_fro"] = frobenius_norm(soka->base);

        payloads["base"] = "base.kamx";
        save_payload("base.kamx", soka->base);
        if (!soka->terms.empty()) {
            Matrix sigma(soka->terms.size(), 1);
            std::vector<std::string> u_names;
            std::vector<std::string> v_names;
            for (index_t k = 0; k < soka->terms.size(); ++k) {
                sigma(k, 0) = soka->terms[k].sigma;
                u_names.push_back(payload_name("U", k));
                v_names.push_back(payload_name("V", k));
                save_payload(u_names.back(), soka->terms[k].U);
                save_payload(v_names.back(), soka->terms[k].V);
            }
            save_payload("sigma.kamx", sigma);
            payloads["sigma"] = "sigma.kamx";
            payloads["u"] = u_names;
            payloads["v"] = v_names;
        } else {
            payloads["sigma"] = nullptr;
            payloads["u"] = ordered_json::array();
            payloads["v"] = ordered_json::array();
        }
    } else if (const auto* lora = std::get_if<LoraAdapter>(&adapter)) {
        manifest["kind"] = "lora";
        manifest["rows"] = lora->base.rows();
        manifest["cols"] = lora->base.cols();
        manifest["rank"] = lora->A.cols();
        manifest["scale"] = lora->scale;
        payloads["base"] = "base.kamx";
        payloads["a"] = "A.kamx";
        payloads["b"] = "B.kamx";
        save_payload("base.kamx", lora->base);
        save_payload("A.kamx", lora->A);
        save_payload("B.kamx", lora->B);
    } else if (const auto* pissa = std::get_if<PissaAdapter>(&adapter)) {
        manifest["kind"] = "pissa";
        manifest["rows"] = pissa->base.rows();
        manifest["cols"] = pissa->base.cols();
        manifest["rank"] = pissa->A.cols();
        payloads["base"] = "base.kamx";
        payloads["a"] = "A.kamx";
        payloads["b"] = "B.kamx";
        save_payload("base.kamx", pissa->base);
        save_payload("A.kamx", pissa->A);
        save_payload("B.kamx", pissa->B);
    } else {
        const auto& full = std::get<FullAdapter>(adapter);
        manifest["kind"] = "full";
        manifest["rows"] = full.weight.rows();
        manifest["cols"] = full.weight.cols();
        payloads["weight"] = "weight.kamx";
        save_payload("weight.kamx", full.weight);
    }
    manifest["payloads"] = payloads;
    manifest["checksums"] = checksums;

    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

Matrix load_payload(const fs::path& dir, const ordered_json& payloads, const char* key) {
    if (!payloads.contains(key) || !payloads.at(key).is_string()) {
        throw corrupt_file_error(std::string("checkpoint manifest missing payload '") + key + "'");
    }
    return load_matrix(dir / payloads.at(key).get<std::string>());
}

void require_shape(const Matrix& m, index_t rows, index_t cols, const std::string& name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw consistency_error("checkpoint payload '" + name + "' is " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                " but manifest declares " + std::to_string(rows) + "x" +
                                std::to_string(cols));
    }
}

} // namespace

LoadedCheckpoint load_adapter(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error("checkpoint manifest '" + manifest_path.string() +
                           "' is not valid JSON: " + e.what());
    }

    try {
        if (manifest.at("container").get<std::string>() != "kronadapt-checkpoint") {
            throw format_error("'" + manifest_path.string() + "' is not a checkpoint manifest");
        }
        if (manifest.at("version").get<std::uint16_t>() != checkpoint_format_version) {
            throw version_error("checkpoint version " +
                                std::to_string(manifest.at("version").get<int>()) +
                                " is not supported");
        }

        CheckpointMeta meta;
        const auto& selection = manifest.at("selection");
        meta.selection_mode = selection.at("mode").get<std::string>();
        if (!selection.at("tau").is_null()) {
            meta.tau = selection.at("tau").get<double>();
        }
        meta.r_min = selection.at("r_min").get<index_t>();
        if (!selection.at("r_max").is_null()) {
            meta.r_max = selection.at("r_max").get<index_t>();
        }
        meta.seed = manifest.at("seed").get<std::uint64_t>();
        meta.trained = manifest.at("trained").get<bool>();

        const std::string kind = manifest.at("kind").get<std::string>();
        const index_t rows = manifest.at("rows").get<index_t>();
        const index_t cols = manifest.at("cols").get<index_t>();
        const auto& payloads = manifest.at("payloads");

        LoadedCheckpoint loaded{FullAdapter{Matrix(1, 1)}, std::move(meta), kind,
                                manifest.at("merged_fro").get<double>(), {}};
        for (const auto& [name, value] : manifest.at("checksums").items()) {
            loaded.checksums[name] = value.get<std::string>();
        }

        if (kind == "soka") {
            KronShape shape;
            shape.m = manifest.at("shape").at("m").get<index_t>();
            shape.n = manifest.at("shape").at("n").get<index_t>();
            shape.p = manifest.at("shape").at("p").get<index_t>();
            shape.q = manifest.at("shape").at("q").get<index_t>();
            if (shape.weight_rows() != rows || shape.weight_cols() != cols) {
                throw consistency_error("checkpoint shape does not compose to rows x cols");
            }
            Matrix base = load_payload(dir, payloads, "base");
            require_shape(base, rows, cols, "base");

            const index_t rank = manifest.at("rank").get<index_t>();
            std::vector<KronTerm> terms;
            if (rank > 0) {
                Matrix sigma = load_payload(dir, payloads, "sigma");
                require_shape(sigma, rank, 1, "sigma");
                const auto u_names = payloads.at("u").get<std::vector<std::string>>();
                const auto v_names = payloads.at("v").get<std::vector<std::string>>();
                if (u_names.size() != rank || v_names.size() != rank) {
                    throw consistency_error("checkpoint factor count does not match rank");
                }
                for (index_t k = 0; k < rank; ++k) {
                    Matrix u = load_matrix(dir / u_names[k]);
                    Matrix v = load_matrix(dir / v_names[k]);
                    require_shape(u, shape.m, shape.n, u_names[k]);
                    require_shape(v, shape.p, shape.q, v_names[k]);
                    terms.push_back(KronTerm{sigma(k, 0), std::move(u), std::move(v)});
                }
            }
            SokaAdapter adapter{std::move(base), std::move(terms), shape,
                                decision_from_json(manifest.at("decision"))};
            loaded.adapter = std::move(adapter);
        } else if (kind == "lora" || kind == "pissa") {
            Matrix base = load_payload(dir, payloads, "base");
            Matrix a = load_payload(dir, payloads, "a");
            Matrix b = load_payload(dir, payloads, "b");
            require_shape(base, rows, cols, "base");
            const index_t rank = manifest.at("rank").get<index_t>();
            require_shape(a, rows, rank, "A");
            require_shape(b, cols, rank, "B");
            if (kind == "lora") {
                loaded.adapter = LoraAdapter{std::move(base), std::move(a), std::move(b),
                                             manifest.at("scale").get<double>()};
            } else {
                loaded.adapter = PissaAdapter{std::move(base), std::move(a), std::move(b)};
            }
        } else if (kind == "full") {
            Matrix weight = load_payload(dir, payloads, "weight");
            require_shape(weight, rows, cols, "weight");
            loaded.adapter = FullAdapter{std::move(weight)};
        } else {
            throw format_error("unknown checkpoint kind '" + kind + "'");
        }
        return loaded;
    } catch (const nlohmann::json::exception& e) {
        throw corrupt_file_error("checkpoint manifest '" + manifest_path.string() +
                                 "' is missing or mistypes a field: " + e.what());
    }
}

VerifyReport verify_checkpoint(const LoadedCheckpoint& checkpoint) {
    VerifyReport report;
    const auto fail = [&report](const std::string& message) {
        report.passed = false;
        report.failures.push_back(message);
    };
    const auto rel_close = [](double a, double b, double tol) {
        return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1.0});
    };

    // Payload integrity: re-serializing the loaded matrices must reproduce the
    // checksummed bytes, so any on-disk corruption that survives the
    // structural load is caught here.
    const auto check_payload = [&](const std::string& name, const Matrix& m) {
        const auto it = checkpoint.checksums.find(name);
        if (it == checkpoint.checksums.end()) {
            fail("payload '" + name + "' has no recorded checksum");
            return;
        }
        if (hash_hex(fnv1a64(matrix_file_bytes(m))) != it->second) {
            fail("payload '" + name + "' does not match its recorded checksum");
        }
    };
    if (const auto* soka = std::get_if<SokaAdapter>(&checkpoint.adapter)) {
        check_payload("base.kamx", soka->base);
        if (!soka->terms.empty()) {
            Matrix sigma(soka->terms.size(), 1);
            for (index_t k = 0; k < soka->terms.size(); ++k) {
                sigma(k, 0) = soka->terms[k].sigma;
                check_payload(payload_name("U", k), soka->terms[k].U);
                check_payload(payload_name("V", k), soka->terms[k].V);
            }
            check_payload("sigma.kamx", sigma);
        }
    } else if (const auto* lora = std::get_if<LoraAdapter>(&checkpoint.adapter)) {
        check_payload("base.kamx", lora->base);
        check_payload("A.kamx", lora->A);
        check_payload("B.kamx", lora->B);
    } else if (const auto* pissa = std::get_if<PissaAdapter>(&checkpoint.adapter)) {
        check_payload("base.kamx", pissa->base);
        check_payload("A.kamx", pissa->A);
        check_payload("B.kamx", pissa->B);
    } else if (const auto* full = std::get_if<FullAdapter>(&checkpoint.adapter)) {
        check_payload("weight.kamx", full->weight);
    }

    const Matrix merged = merge_any(checkpoint.adapter);
    if (!rel_close(frobenius_norm(merged), checkpoint.merged_fro, 1e-12)) {
        fail("merged Frobenius norm does not match the stored value");
    }

    // Deterministic probe: merge-forward equivalence must hold for any
    // parameter values, trained or not.
    Rng rng(0xC0FFEE);
    Matrix probe(merged.cols(), 3);
    for (double& v : probe.values()) {
        v = rng.normal();
    }
    const Matrix via_forward = forward_any(checkpoint.adapter, probe);
    const Matrix via_merge = merged * probe;
    const double denom = std::max(frobenius_norm(via_merge), 1e-300);
    if (frobenius_norm(via_forward - via_merge) / denom > 1e-9) {
        fail("forward outputs do not match merged-weight multiplication");
    }

    if (!checkpoint.meta.trained) {
        if (const auto* soka = std::get_if<SokaAdapter>(&checkpoint.adapter)) {
            if (checkpoint.kind == "soka" && checkpoint.meta.selection_mode != "none") {
                for (index_t k = 0; k < soka->terms.size(); ++k) {
                    if (k < soka->rank_decision.spectrum.size() &&
                        !rel_close(soka->terms[k].sigma, soka->rank_decision.spectrum[k], 1e-12)) {
                        fail("sigma[" + std::to_string(k) + "] does not match the stored spectrum");
                    }
                    if (std::abs(frobenius_norm(soka->terms[k].U) - 1.0) > 1e-10 ||
                        std::abs(frobenius_norm(soka->terms[k].V) - 1.0) > 1e-10) {
                        fail("factor " + std::to_string(k) + " is not unit Frobenius norm");
                    }
                }
            }
        } else if (const auto* lora = std::get_if<LoraAdapter>(&checkpoint.adapter)) {
            for (double v : lora->B.values()) {
                if (v != 0.0) {
                    fail("untrained lora checkpoint has nonzero B");
                    break;
                }
            }
        }
    }
    return report;
}

std::string format_g17(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

namespace {

std::string json_double(double value) {
    if (std::isnan(value)) {
        return "\"nan\"";
    }
    if (std::isinf(value)) {
        return value > 0 ? "\"inf\"" : "\"-inf\"";
    }
    return format_g17(value);
}

std::string json_double_array(std::span<const double> values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += json_double(values[i]);
    }
    out += "]";
    return out;
}

} // namespace

void write_rank_decision_report(const RankDecision& decision, const std::string& selection_mode,
                                std::optional<double> tau, const fs::path& csv_path,
                                const fs::path& json_path) {
    const std::string tau_text = tau.has_value() ? format_g17(*tau) : "";
    std::string csv = "k,sigma,energy,gap,r_energy,r_elbow,r_final,clamped,selection_mode,tau\n";
    for (index_t k = 0; k < decision.spectrum.size(); ++k) {
        csv += std::to_string(k + 1);
        csv += ",";
        csv += format_g17(decision.spectrum[k]);
        csv += ",";
        csv += format_g17(k < decision.energy_curve.size() ? decision.energy_curve[k] : 0.0);
        csv += ",";
        if (k < decision.gaps.size()) {
            csv += format_g17(decision.gaps[k]);
        }
        csv += "," + std::to_string(decision.r_energy);
        csv += "," + std::to_string(decision.r_elbow);
        csv += "," + std::to_string(decision.r_final);
        csv += decision.clamped ? ",1" : ",0";
        csv += "," + selection_mode;
        csv += "," + tau_text;
        csv += "\n";
    }
    write_file_atomic(csv_path, csv);

    std::string json = "{\"selection_mode\":\"" + selection_mode + "\"";
    json += ",\"tau\":" + (tau.has_value() ? format_g17(*tau) : std::string("null"));
    json += ",\"r_energy\":" + std::to_string(decision.r_energy);
    json += ",\"r_elbow\":" + std::to_string(decision.r_elbow);
    json += ",\"r_final\":" + std::to_string(decision.r_final);
    json += std::string(",\"clamped\":") + (decision.clamped ? "true" : "false");
    json += ",\"spectrum\":" + json_double_array(decision.spectrum);
    json += ",\"energy_curve\":" + json_double_array(decision.energy_curve);
    json += ",\"gaps\":" + json_double_array(decision.gaps);
    json += "}\n";
    write_file_atomic(json_path, json);
}

void write_cost_report(std::span<const CostRow> rows, const fs::path& csv_path,
                       const fs::path& json_path) {
    std::string csv = "method,trainable_params,matvec_flops,dense_equivalent_flops\n";
    std::string json = "{\"methods\":[";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const CostRow& row = rows[i];
        csv += row.method + "," + std::to_string(row.report.trainable_params) + "," +
               std::to_string(row.report.matvec_flops) + "," +
               std::to_string(row.report.dense_equivalent_flops) + "\n";
        if (i > 0) {
            json += ",";
        }
        json += "{\"method\":\"" + row.method + "\"";
        json += ",\"trainable_params\":" + std::to_string(row.report.trainable_params);
        json += ",\"matvec_flops\":" + std::to_string(row.report.matvec_flops);
        json += ",\"dense_equivalent_flops\":" + std::to_string(row.report.dense_equivalent_flops);
        json += "}";
    }
    json += "]}\n";
    write_file_atomic(csv_path, csv);
    write_file_atomic(json_path, json);
}

void write_train_log(const TrainLog& log, const fs::path& csv_path, const fs::path& json_path) {
    std::string csv = "step,loss,grad_norm\n";
    for (const TrainRecord& rec : log.records) {
        csv += std::to_string(rec.step) + "," + format_g17(rec.loss) + "," +
               format_g17(rec.grad_norm) + "\n";
    }
    write_file_atomic(csv_path, csv);

    std::string json = "{\"method\":\"" + log.method + "\"";
    json += std::string(",\"diverged\":") + (log.diverged ? "true" : "false");
    json += ",\"diverged_at_step\":" +
            (log.diverged ? std::to_string(log.diverged_at_step) : std::string("null"));
    json += ",\"snapshot\":" +
            (log.snapshot_ref.empty() ? std::string("null") : "\"" + log.snapshot_ref + "\"");
    json += ",\"step\":[";
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        if (i > 0) {
            json += ",";
        }
        json += std::to_string(log.records[i].step);
    }
    json += "],\"loss\":[";
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        if (i > 0) {
            json += ",";
        }
        json += json_double(log.records[i].loss);
    }
    json += "],\"grad_norm\":[";
    for (std::size_t i = 0; i < log.records.size(); ++i) {
        if (i > 0) {
            json += ",";
        }
        json += json_double(log.records[i].grad_norm);
    }
    json += "]}\n";
    write_file_atomic(json_path, json);
}

void write_comparison_report(std::span<const ComparisonRow> rows, index_t steps,
                             const fs::path& csv_path, const fs::path& json_path) {
    std::string csv = "task,method,steps,loss_step0,loss_final,loss_q25,loss_q50,loss_q75,"
                      "loss_auc,max_grad_norm,diverged\n";
    std::string json = "{\"steps\":" + std::to_string(steps) + ",\"rows\":[";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const MethodSummary& s = rows[i].summary;
        csv += rows[i].task_id + "," + s.method + "," + std::to_string(s.steps) + "," +
               format_g17(s.loss_step0) + "," + format_g17(s.loss_final) + "," +
               format_g17(s.loss_q25) + "," + format_g17(s.loss_q50) + "," +
               format_g17(s.loss_q75) + "," + format_g17(s.loss_auc) + "," +
               format_g17(s.max_grad_norm) + (s.diverged ? ",1" : ",0") + "\n";
        if (i > 0) {
            json += ",";
        }
        json += "{\"task\":\"" + rows[i].task_id + "\",\"method\":\"" + s.method + "\"";
        json += ",\"steps\":" + std::to_string(s.steps);
        json += ",\"loss_step0\":" + json_double(s.loss_step0);
        json += ",\"loss_final\":" + json_double(s.loss_final);
        json += ",\"loss_q25\":" + json_double(s.loss_q25);
        json += ",\"loss_q50\":" + json_double(s.loss_q50);
        json += ",\"loss_q75\":" + json_double(s.loss_q75);
        json += ",\"loss_auc\":" + json_double(s.loss_auc);
        json += ",\"max_grad_norm\":" + json_double(s.max_grad_norm);
        json += std::string(",\"diverged\":") + (s.diverged ? "true" : "false");
        json += "}";
    }
    json += "]}\n";
    write_file_atomic(csv_path, csv);
    write_file_atomic(json_path, json);
}

} // namespace kronadapt::io
