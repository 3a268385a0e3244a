#pragma once

#include "specssm/tensor.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace specssm {

using report_value = std::variant<int64_t, uint64_t, double, std::string>;

// One homogeneous record table; columns come from the first record and stay
// in that order.
struct report_record {
    std::vector<std::pair<std::string, report_value>> fields;

    void add(const std::string & key, report_value v) { fields.emplace_back(key, std::move(v)); }
};

enum class report_format { csv, json };

std::string render_report(const std::vector<report_record> & records, report_format format,
                          const std::vector<std::string> & header_hint = {});

void emit_report(const std::vector<report_record> & records, report_format format,
                 const std::string & path, const std::vector<std::string> & header_hint = {});

void write_text_file(const std::string & path, const std::string & text);

uint64_t fnv1a64_bytes(const std::string & bytes);

// Every CLI run drops one of these next to its outputs.
void write_manifest(const std::string & out_dir, const std::string & command,
                    const std::string & config_text, uint64_t seed,
                    const std::vector<std::string> & artifacts);

} // namespace specssm
