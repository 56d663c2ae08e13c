#include "bcd/report.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace bcd {

void ReportTable::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size())
        throw std::logic_error("ReportTable: row width does not match columns");
    rows.push_back(std::move(row));
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

void write_csv(const ReportTable& table, std::ostream& out) {
    out << "# kind=" << table.kind << "\n";
    for (const auto& [key, value] : table.metadata)
        out << "# " << key << "=" << value << "\n";
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        out << (i ? "," : "") << table.columns[i];
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

void write_json(const ReportTable& table, std::ostream& out) {
    nlohmann::json j;
    j["kind"] = table.kind;
    j["metadata"] = table.metadata;
    j["columns"] = table.columns;
    j["rows"] = table.rows;
    out << j.dump(2) << "\n";
}

}  // namespace bcd
