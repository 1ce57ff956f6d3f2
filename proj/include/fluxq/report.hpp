#pragma once

// Plain-text reports: `[section]` headers followed by `key = value unit`
// lines, or the same content as aligned human-readable tables.

#include <deque>
#include <ostream>
#include <string>
#include <vector>

namespace fluxq {

enum class ReportFormat { KeyValue, Table };

std::string format_number(double value);

struct ReportEntry {
    std::string key;
    std::string value;
    std::string unit;  // empty for non-numeric values
};

struct ReportSection {
    std::string name;
    std::vector<ReportEntry> entries;

    void add(std::string key, double value, std::string unit);
    void add_text(std::string key, std::string value);
};

struct ReportTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::string> units;
    std::vector<std::vector<std::string>> rows;

    void add_column(std::string name, std::string unit);
    void add_row(const std::vector<double>& values);
    void add_row(std::vector<std::string> values);
};

class Report {
public:
    ReportSection& section(const std::string& name);
    ReportTable& table(const std::string& name);

    // Key-value: tables become `columns = ...` plus one `row = ...` per row,
    // comma-delimited.
    void render(std::ostream& out, ReportFormat format) const;

private:
    struct Block {
        bool is_table = false;
        std::size_t index = 0;
    };
    std::vector<Block> order_;
    std::deque<ReportSection> sections_;  // deque: references stay valid
    std::deque<ReportTable> tables_;
};

}  // namespace fluxq
