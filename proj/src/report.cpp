#include "specssm/report.hpp"
#include "specssm/version.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace specssm {

using ordered_json = nlohmann::ordered_json;

static std::string value_to_string(const report_value & v) {
    if (std::holds_alternative<int64_t>(v)) return std::to_string(std::get<int64_t>(v));
    if (std::holds_alternative<uint64_t>(v)) return std::to_string(std::get<uint64_t>(v));
    if (std::holds_alternative<double>(v)) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6g", std::get<double>(v));
        return buf;
    }
    return std::get<std::string>(v);
}

static void value_to_json(ordered_json & j, const std::string & key, const report_value & v) {
    if (std::holds_alternative<int64_t>(v)) {
        j[key] = std::get<int64_t>(v);
    } else if (std::holds_alternative<uint64_t>(v)) {
        j[key] = std::get<uint64_t>(v);
    } else if (std::holds_alternative<double>(v)) {
        j[key] = std::get<double>(v);
    } else {
        j[key] = std::get<std::string>(v);
    }
}

std::string render_report(const std::vector<report_record> & records, report_format format,
                          const std::vector<std::string> & header_hint) {
    std::vector<std::string> columns = header_hint;
    if (columns.empty() && !records.empty()) {
        for (const auto & f : records.front().fields) columns.push_back(f.first);
    }
    for (const auto & r : records) {
        if (r.fields.size() != columns.size()) {
            throw usage_error("render_report: records are not homogeneous");
        }
        for (size_t i = 0; i < columns.size(); ++i) {
            if (r.fields[i].first != columns[i]) {
                throw usage_error("render_report: column mismatch at " + r.fields[i].first);
            }
        }
    }

    if (format == report_format::csv) {
        std::ostringstream os;
        for (size_t i = 0; i < columns.size(); ++i) {
            os << (i ? "," : "") << columns[i];
        }
        os << "\n";
        for (const auto & r : records) {
            for (size_t i = 0; i < r.fields.size(); ++i) {
                os << (i ? "," : "") << value_to_string(r.fields[i].second);
            }
            os << "\n";
        }
        return os.str();
    }

    ordered_json arr = ordered_json::array();
    for (const auto & r : records) {
        ordered_json row;
        for (const auto & f : r.fields) value_to_json(row, f.first, f.second);
        arr.push_back(std::move(row));
    }
    return arr.dump(2) + "\n";
}

void write_text_file(const std::string & path, const std::string & text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path + " for writing");
    os << text;
    if (!os) throw io_error("write failed for " + path);
}

void emit_report(const std::vector<report_record> & records, report_format format,
                 const std::string & path, const std::vector<std::string> & header_hint) {
    write_text_file(path, render_report(records, format, header_hint));
}

uint64_t fnv1a64_bytes(const std::string & bytes) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

void write_manifest(const std::string & out_dir, const std::string & command,
                    const std::string & config_text, uint64_t seed,
                    const std::vector<std::string> & artifacts) {
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64_bytes(config_text)));
    ordered_json j;
    j["version"]     = SPECSSM_VERSION;
    j["command"]     = command;
    j["config_hash"] = std::string("fnv1a64:") + hash_hex;
    j["seed"]        = seed;
    j["artifacts"]   = artifacts;
    write_text_file((std::filesystem::path(out_dir) / "manifest.json").string(),
                    j.dump(2) + "\n");
}

} // namespace specssm
