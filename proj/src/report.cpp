#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>

#include "tap/error.hpp"
#include "tap/evaluator.hpp"
#include "tap/io_util.hpp"

namespace tap {

namespace {

struct ReportMatrix {
    std::vector<std::string> methods;
    std::vector<std::string> datasets;
    // cells[m][d]
    std::vector<std::vector<std::optional<double>>> cells;
    std::vector<double> means;
    // best[m][d]; column datasets.size() is the Mean column.
    std::vector<std::vector<bool>> best;
};

std::size_t index_of(std::vector<std::string>& list, const std::string& value) {
    auto it = std::find(list.begin(), list.end(), value);
    if (it != list.end()) return static_cast<std::size_t>(it - list.begin());
    list.push_back(value);
    return list.size() - 1;
}

ReportMatrix build_matrix(const EvalReport& report) {
    if (report.rows.empty()) throw Error(ErrorKind::EmptyReport, "report has no rows");
    ReportMatrix m;
    for (const auto& row : report.rows) {
        if (row.sample_count == 0) throw Error(ErrorKind::EmptyReport, "row '" + row.method + "' has no samples");
        index_of(m.methods, row.method);
        index_of(m.datasets, row.dataset);
    }
    m.cells.assign(m.methods.size(), std::vector<std::optional<double>>(m.datasets.size()));
    for (const auto& row : report.rows) {
        const auto mi = index_of(m.methods, row.method);
        const auto di = index_of(m.datasets, row.dataset);
        m.cells[mi][di] = row.accuracy;
    }
    for (const auto& cells : m.cells) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& c : cells) {
            if (c) {
                sum += *c;
                ++n;
            }
        }
        m.means.push_back(sum / static_cast<double>(n));
    }
    const std::size_t cols = m.datasets.size() + 1;
    m.best.assign(m.methods.size(), std::vector<bool>(cols, false));
    for (std::size_t col = 0; col < cols; ++col) {
        std::optional<double> top;
        for (std::size_t mi = 0; mi < m.methods.size(); ++mi) {
            const std::optional<double> v = col < m.datasets.size() ? m.cells[mi][col] : m.means[mi];
            if (v && (!top || *v > *top)) top = v;
        }
        for (std::size_t mi = 0; mi < m.methods.size(); ++mi) {
            const std::optional<double> v = col < m.datasets.size() ? m.cells[mi][col] : m.means[mi];
            m.best[mi][col] = v && top && *v == *top;
        }
    }
    return m;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string render_table(const ReportMatrix& m) {
    std::vector<std::string> header{"method"};
    for (const auto& d : m.datasets) header.push_back(d);
    header.push_back("Mean");

    std::vector<std::vector<std::string>> body;
    for (std::size_t mi = 0; mi < m.methods.size(); ++mi) {
        std::vector<std::string> line{m.methods[mi]};
        for (std::size_t col = 0; col <= m.datasets.size(); ++col) {
            const std::optional<double> v = col < m.datasets.size() ? m.cells[mi][col] : m.means[mi];
            line.push_back(v ? fixed2(*v) + (m.best[mi][col] ? "*" : " ") : "-");
        }
        body.push_back(std::move(line));
    }

    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        widths[c] = header[c].size();
        for (const auto& line : body) widths[c] = std::max(widths[c], line[c].size());
    }
    auto emit = [&](const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c > 0) out += " | ";
            const std::size_t pad = widths[c] - cells[c].size();
            // Method names left-aligned, numbers right-aligned.
            out += c == 0 ? cells[c] + std::string(pad, ' ') : std::string(pad, ' ') + cells[c];
        }
        return out + "\n";
    };
    std::string out = emit(header);
    std::string rule;
    for (std::size_t c = 0; c < widths.size(); ++c) {
        if (c > 0) rule += "-+-";
        rule += std::string(widths[c], '-');
    }
    out += rule + "\n";
    for (const auto& line : body) out += emit(line);
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string render_csv(const ReportMatrix& m) {
    std::string out = "method";
    for (const auto& d : m.datasets) out += "," + csv_field(d);
    out += ",Mean,best\n";
    for (std::size_t mi = 0; mi < m.methods.size(); ++mi) {
        out += csv_field(m.methods[mi]);
        for (const auto& cell : m.cells[mi]) out += "," + (cell ? format_double(*cell) : std::string());
        out += "," + format_double(m.means[mi]);
        std::string best;
        for (std::size_t col = 0; col <= m.datasets.size(); ++col) {
            if (!m.best[mi][col]) continue;
            if (!best.empty()) best += ";";
            best += col < m.datasets.size() ? m.datasets[col] : "Mean";
        }
        out += "," + csv_field(best) + "\n";
    }
    return out;
}

std::string render_json(const EvalReport& report, const ReportMatrix& m) {
    nlohmann::ordered_json doc;
    doc["datasets"] = m.datasets;
    nlohmann::ordered_json matrix = nlohmann::ordered_json::array();
    for (std::size_t mi = 0; mi < m.methods.size(); ++mi) {
        nlohmann::ordered_json entry;
        entry["method"] = m.methods[mi];
        nlohmann::ordered_json acc = nlohmann::ordered_json::object();
        for (std::size_t di = 0; di < m.datasets.size(); ++di) {
            acc[m.datasets[di]] = m.cells[mi][di] ? nlohmann::ordered_json(*m.cells[mi][di]) : nlohmann::ordered_json();
        }
        entry["accuracy"] = acc;
        entry["mean"] = m.means[mi];
        nlohmann::ordered_json best = nlohmann::ordered_json::array();
        for (std::size_t col = 0; col <= m.datasets.size(); ++col) {
            if (m.best[mi][col]) best.push_back(col < m.datasets.size() ? m.datasets[col] : "Mean");
        }
        entry["best"] = best;
        matrix.push_back(entry);
    }
    doc["matrix"] = matrix;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) rows.push_back(to_json(row));
    doc["rows"] = rows;
    doc["config"] = report.config;
    return doc.dump(2) + "\n";
}

}  // namespace

ReportFormat report_format_from_string(const std::string& text) {
    if (text == "table") return ReportFormat::Table;
    if (text == "json") return ReportFormat::Json;
    if (text == "csv") return ReportFormat::Csv;
    throw Error(ErrorKind::InvalidConfig, "unknown report format '" + text + "'");
}

std::string render_report(const EvalReport& report, ReportFormat format) {
    const auto matrix = build_matrix(report);
    switch (format) {
        case ReportFormat::Table: return render_table(matrix);
        case ReportFormat::Csv: return render_csv(matrix);
        case ReportFormat::Json: return render_json(report, matrix);
    }
    return {};
}

nlohmann::ordered_json to_json(const EvalRow& row) {
    nlohmann::ordered_json doc;
    doc["method"] = row.method;
    doc["dataset"] = row.dataset;
    doc["accuracy"] = row.accuracy;
    doc["correct"] = row.correct;
    doc["sample_count"] = row.sample_count;
    nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
    for (const auto& c : row.per_class) {
        nlohmann::ordered_json e;
        e["class_id"] = c.class_id;
        e["class_name"] = c.class_name;
        e["correct"] = c.correct;
        e["total"] = c.total;
        per_class.push_back(e);
    }
    doc["per_class"] = per_class;
    return doc;
}

EvalRow eval_row_from_json(const nlohmann::json& doc) {
    try {
        EvalRow row;
        row.method = doc.at("method").get<std::string>();
        row.dataset = doc.at("dataset").get<std::string>();
        row.accuracy = doc.at("accuracy").get<double>();
        row.correct = doc.value("correct", std::size_t{0});
        row.sample_count = doc.at("sample_count").get<std::size_t>();
        if (doc.contains("per_class")) {
            for (const auto& e : doc["per_class"]) {
                row.per_class.push_back(ClassAccuracy{e.at("class_id").get<int>(), e.value("class_name", std::string()),
                                                      e.at("correct").get<std::size_t>(),
                                                      e.at("total").get<std::size_t>()});
            }
        }
        if (row.accuracy < 0.0 || row.accuracy > 100.0) {
            throw Error(ErrorKind::FormatError, "accuracy outside [0, 100]");
        }
        return row;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, std::string("report row: ") + e.what());
    }
}

EvalReport report_from_json(const nlohmann::json& doc) {
    EvalReport report;
    if (!doc.contains("rows") || !doc["rows"].is_array()) throw Error(ErrorKind::FormatError, "report has no rows array");
    for (const auto& r : doc["rows"]) report.rows.push_back(eval_row_from_json(r));
    if (doc.contains("config")) report.config = nlohmann::ordered_json(doc["config"]);
    return report;
}

}  // namespace tap
