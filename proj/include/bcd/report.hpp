#ifndef BCD_REPORT_HPP
#define BCD_REPORT_HPP

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace bcd {

// A typed table plus the metadata needed to reproduce it.
struct ReportTable {
    std::string kind;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::map<std::string, std::string> metadata;  // config echo, seed, version...

    void add_row(std::vector<std::string> row);
};

// Numbers are fixed at 6 significant digits; NaN renders as "nan".
std::string format_number(double value);

void write_csv(const ReportTable& table, std::ostream& out);
void write_json(const ReportTable& table, std::ostream& out);

}  // namespace bcd

#endif  // BCD_REPORT_HPP
