#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "asac/sensing.hpp"
#include "asac/training.hpp"

namespace asac {

/// Shortest text form that re-parses to the identical double (17 significant
/// digits is always enough).
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

inline double parse_double(const std::string& s, std::size_t line_no, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw Error("csv line " + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
    }
}

}  // namespace detail

/// Reads the episode schema `episode_id,t,y,x1..xd`. Blank feature cells mark
/// values missing from the source data. Steps must be consecutive integers
/// from 1 within each episode; episodes keep their first-appearance order.
inline std::vector<Episode> ingest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw Error("csv: '" + path + "' is empty");
    auto header = detail::split_csv_line(line);
    if (header.size() < 4 || header[0] != "episode_id" || header[1] != "t" || header[2] != "y")
        throw Error("csv: header must be episode_id,t,y,x1,...,xd");
    std::size_t d = header.size() - 3;
    for (std::size_t i = 0; i < d; ++i)
        if (header[3 + i] != "x" + std::to_string(i + 1))
            throw Error("csv: feature column " + std::to_string(i + 4) + " must be named x" +
                        std::to_string(i + 1));

    std::vector<std::string> order;
    std::map<std::string, Episode> by_id;
    std::map<std::string, std::size_t> last_t;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw Error("csv line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));

        const std::string& id = cells[0];
        double t_val = detail::parse_double(cells[1], line_no, "t");
        auto t = static_cast<std::size_t>(t_val);
        if (static_cast<double>(t) != t_val || t < 1)
            throw Error("csv line " + std::to_string(line_no) + ": t must be a positive integer");

        if (by_id.find(id) == by_id.end()) {
            order.push_back(id);
            by_id[id] = Episode{};
            last_t[id] = 0;
        }
        if (t != last_t[id] + 1)
            throw Error("csv: episode '" + id + "' has non-consecutive t (expected " +
                        std::to_string(last_t[id] + 1) + ", got " + std::to_string(t) + " on line " +
                        std::to_string(line_no) + ")");
        last_t[id] = t;

        if (cells[2].empty())
            throw Error("csv line " + std::to_string(line_no) + ": label column must not be blank");
        Episode& e = by_id[id];
        e.labels.push_back(detail::parse_double(cells[2], line_no, "label"));
        std::vector<double> row(d, 0.0);
        std::vector<std::uint8_t> avail(d, 1);
        for (std::size_t i = 0; i < d; ++i) {
            if (cells[3 + i].empty()) {
                avail[i] = 0;
            } else {
                row[i] = detail::parse_double(cells[3 + i], line_no, "feature");
            }
        }
        e.features.push_back(std::move(row));
        e.availability.push_back(std::move(avail));
    }

    std::vector<Episode> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        by_id[id].validate();
        out.push_back(std::move(by_id[id]));
    }
    if (out.empty()) throw Error("csv: '" + path + "' contains no episodes");
    return out;
}

/// Writes episodes back in the ingest schema; unavailable cells become blanks.
inline void export_csv(const std::string& path, std::span<const Episode> episodes) {
    std::ofstream out(path);
    if (!out) throw Error("csv: cannot write '" + path + "'");
    std::size_t d = episodes.empty() ? 0 : episodes.front().dim();
    out << "episode_id,t,y";
    for (std::size_t i = 1; i <= d; ++i) out << ",x" << i;
    out << '\n';
    for (std::size_t n = 0; n < episodes.size(); ++n) {
        const Episode& e = episodes[n];
        for (std::size_t t = 0; t < e.length(); ++t) {
            out << n << ',' << (t + 1) << ',' << fmt_double(e.labels[t]);
            for (std::size_t i = 0; i < d; ++i) {
                out << ',';
                if (e.availability[t][i]) out << fmt_double(e.features[t][i]);
            }
            out << '\n';
        }
    }
}

inline void write_history_csv(const std::string& path, const TrainingHistory& history) {
    std::ofstream out(path);
    if (!out) throw Error("csv: cannot write '" + path + "'");
    out << "iteration,predictor_loss,selector_objective,measurement_rate\n";
    for (const auto& row : history.rows)
        out << row.iteration << ',' << fmt_double(row.predictor_loss) << ','
            << fmt_double(row.selector_objective) << ',' << fmt_double(row.measurement_rate) << '\n';
}

}  // namespace asac
