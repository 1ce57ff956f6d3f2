#include "fluxq/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fluxq {

std::string format_number(double value) {
    if (value == 0.0) return "0";  // folds -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

void ReportSection::add(std::string key, double value, std::string unit) {
    entries.push_back({std::move(key), format_number(value), std::move(unit)});
}

void ReportSection::add_text(std::string key, std::string value) {
    entries.push_back({std::move(key), std::move(value), ""});
}

void ReportTable::add_column(std::string name, std::string unit) {
    columns.push_back(std::move(name));
    units.push_back(std::move(unit));
}

void ReportTable::add_row(const std::vector<double>& values) {
    std::vector<std::string> row;
    for (double v : values) row.push_back(format_number(v));
    rows.push_back(std::move(row));
}

void ReportTable::add_row(std::vector<std::string> values) { rows.push_back(std::move(values)); }

ReportSection& Report::section(const std::string& name) {
    for (std::size_t i = 0; i < sections_.size(); ++i) {
        if (sections_[i].name == name) return sections_[i];
    }
    sections_.push_back({name, {}});
    order_.push_back({false, sections_.size() - 1});
    return sections_.back();
}

ReportTable& Report::table(const std::string& name) {
    for (std::size_t i = 0; i < tables_.size(); ++i) {
        if (tables_[i].name == name) return tables_[i];
    }
    tables_.push_back({name, {}, {}, {}});
    order_.push_back({true, tables_.size() - 1});
    return tables_.back();
}

namespace {

void render_section_kv(std::ostream& out, const ReportSection& s) {
    out << "[" << s.name << "]\n";
    for (const auto& e : s.entries) {
        out << e.key << " = " << e.value;
        if (!e.unit.empty()) out << " " << e.unit;
        out << "\n";
    }
}

void render_table_kv(std::ostream& out, const ReportTable& t) {
    out << "[" << t.name << "]\n";
    out << "columns = ";
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        out << (c ? "," : "") << t.columns[c];
        if (!t.units[c].empty()) out << ":" << t.units[c];
    }
    out << "\n";
    for (const auto& row : t.rows) {
        out << "row = ";
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
        out << "\n";
    }
}

void render_section_table(std::ostream& out, const ReportSection& s) {
    out << s.name << "\n";
    std::size_t kw = 0, vw = 0;
    for (const auto& e : s.entries) {
        kw = std::max(kw, e.key.size());
        vw = std::max(vw, e.value.size());
    }
    for (const auto& e : s.entries) {
        out << "  " << e.key << std::string(kw - e.key.size() + 2, ' ') << std::string(vw - e.value.size(), ' ')
            << e.value;
        if (!e.unit.empty()) out << " " << e.unit;
        out << "\n";
    }
}

void render_table_table(std::ostream& out, const ReportTable& t) {
    out << t.name << "\n";
    std::vector<std::string> head;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        head.push_back(t.units[c].empty() ? t.columns[c] : t.columns[c] + " [" + t.units[c] + "]");
    }
    std::vector<std::size_t> width(head.size());
    for (std::size_t c = 0; c < head.size(); ++c) {
        width[c] = head[c].size();
        for (const auto& row : t.rows) {
            if (c < row.size()) width[c] = std::max(width[c], row[c].size());
        }
    }
    auto line = [&](const std::vector<std::string>& cells) {
        out << " ";
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string& cell = c < cells.size() ? cells[c] : std::string();
            out << " " << std::string(width[c] - cell.size(), ' ') << cell;
        }
        out << "\n";
    };
    line(head);
    for (const auto& row : t.rows) line(row);
}

}  // namespace

void Report::render(std::ostream& out, ReportFormat format) const {
    for (std::size_t b = 0; b < order_.size(); ++b) {
        if (b) out << "\n";
        const Block& block = order_[b];
        if (format == ReportFormat::KeyValue) {
            if (block.is_table) {
                render_table_kv(out, tables_[block.index]);
            } else {
                render_section_kv(out, sections_[block.index]);
            }
        } else if (block.is_table) {
            render_table_table(out, tables_[block.index]);
        } else {
            render_section_table(out, sections_[block.index]);
        }
    }
}

}  // namespace fluxq
