#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "eoslab/vec.hpp"

namespace eoslab {

using CsvValue = std::variant<double, long long, std::string>;
using CsvRow = std::vector<CsvValue>;

// Registered output schemas. Header rows match these exactly.
inline const std::map<std::string, std::vector<std::string>>& csv_schemas() {
    static const std::map<std::string, std::vector<std::string>> schemas = {
        {"reduced-trajectory", {"run_id", "t", "x_hat", "x_hat_sq", "y_hat"}},
        {"ref-trajectory",
         {"t", "norm_theta", "S", "align", "L", "alpha", "beta", "delta", "epsilon", "kappa"}},
        {"coupling", {"t", "norm_v", "norm_vhat", "deviation", "loss_residual", "sharp_residual"}},
        {"scan-summary", {"key", "value", "stderr"}},
        {"scan-point", {"x", "y", "stderr"}},
        {"series", {"t", "value"}},
        {"decorrelation", {"t", "lhs", "rhs", "abs_residual"}},
    };
    return schemas;
}

// 64-bit FNV-1a over raw bytes.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

namespace detail {
inline std::string format_value(const CsvValue& v) {
    if (std::holds_alternative<double>(v)) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(v));
        return buf;
    }
    if (std::holds_alternative<long long>(v)) return std::to_string(std::get<long long>(v));
    const std::string& s = std::get<std::string>(v);
    if (s.find(',') != std::string::npos || s.find('\n') != std::string::npos)
        throw Error("csv: string values may not contain ',' or newlines: " + s);
    return s;
}
} // namespace detail

// Render rows under a registered schema. Decimal values carry 17 significant
// digits (round-trip exact); line endings are LF.
inline std::string render_csv(const std::vector<CsvRow>& rows, const std::string& schema_id) {
    auto it = csv_schemas().find(schema_id);
    if (it == csv_schemas().end()) throw Error("csv: unknown schema '" + schema_id + "'");
    const auto& cols = it->second;
    std::string out;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out += ',';
        out += cols[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != cols.size())
            throw Error("csv: schema '" + schema_id + "' expects " + std::to_string(cols.size()) +
                        " columns, row has " + std::to_string(row.size()));
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += detail::format_value(row[i]);
        }
        out += '\n';
    }
    return out;
}

// Write and return the FNV-1a checksum of the bytes written.
inline std::uint64_t emit_csv(const std::vector<CsvRow>& rows, const std::string& schema_id,
                              const std::string& path) {
    std::string body = render_csv(rows, schema_id);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("csv: cannot open '" + path + "' for writing");
    f.write(body.data(), std::streamsize(body.size()));
    if (!f) throw Error("csv: write failed for '" + path + "'");
    return fnv1a64(body);
}

struct CsvFile {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvFile read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("csv: cannot open '" + path + "' for reading");
    CsvFile out;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.empty() || line.back() == ',') fields.push_back("");
        if (first) {
            out.header = fields;
            first = false;
        } else {
            out.rows.push_back(fields);
        }
    }
    return out;
}

} // namespace eoslab
