#pragma once

#include "mrp/errors.hpp"
#include "mrp/rational.hpp"

#include "json.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace mrp {

/// Unweighted mean, exact. Round only when formatting.
inline Rational arithmetic_macro(const std::vector<Rational>& accuracies) {
    if (accuracies.empty()) {
        throw EmptyList("arithmetic macro needs at least one accuracy");
    }
    Rational sum = 0;
    for (const Rational& a : accuracies) {
        sum += a;
    }
    return sum / static_cast<int>(accuracies.size());
}

/// n / sum(1/a_i), exact; undefined (nullopt) when any accuracy is zero.
inline std::optional<Rational> harmonic_macro(const std::vector<Rational>& accuracies) {
    if (accuracies.empty()) {
        throw EmptyList("harmonic macro needs at least one accuracy");
    }
    Rational reciprocal_sum = 0;
    for (const Rational& a : accuracies) {
        if (a == 0) {
            return std::nullopt;
        }
        reciprocal_sum += 1 / a;
    }
    return Rational(static_cast<int>(accuracies.size())) / reciprocal_sum;
}

/// One row of a results table: a policy or method label with its per-task
/// accuracies and both macro means. `reference_macro` optionally carries a
/// previously reported mean (3-decimal string); when it disagrees with the
/// recomputed arithmetic mean the emitted report flags the divergence
/// instead of reproducing the unexplained number.
struct MetricReport {
    std::string label;
    std::vector<std::string> columns;
    std::vector<Rational> accuracies;
    Rational macro_arithmetic;
    std::optional<Rational> macro_harmonic;
    std::optional<std::string> reference_macro;

    bool diverges_from_reference() const {
        return reference_macro.has_value() && *reference_macro != format_fixed(macro_arithmetic);
    }
};

inline MetricReport make_metric_report(std::string label, std::vector<std::string> columns,
                                       std::vector<Rational> accuracies,
                                       std::optional<std::string> reference_macro = std::nullopt) {
    if (columns.size() != accuracies.size()) {
        throw ColumnMismatch("got " + std::to_string(columns.size()) + " columns but " +
                             std::to_string(accuracies.size()) + " accuracies");
    }
    MetricReport report;
    report.label = std::move(label);
    report.columns = std::move(columns);
    report.macro_arithmetic = arithmetic_macro(accuracies);
    report.macro_harmonic = harmonic_macro(accuracies);
    report.accuracies = std::move(accuracies);
    report.reference_macro = std::move(reference_macro);
    if (report.macro_harmonic.has_value() && *report.macro_harmonic > report.macro_arithmetic) {
        throw Error("harmonic mean exceeded arithmetic mean; aggregation is broken");
    }
    return report;
}

enum class ReportFormat { markdown, csv, json };

namespace detail {

/// Per column: the best value and the largest value strictly below it.
struct ColumnRanks {
    std::optional<Rational> best;
    std::optional<Rational> second;

    void add(const Rational& v) {
        if (!best || v > *best) {
            if (best && *best != v) {
                second = best;
            }
            best = v;
        } else if (v != *best && (!second || v > *second)) {
            second = v;
        }
    }
};

inline std::string style_cell(const Rational& value, const ColumnRanks& ranks) {
    const std::string text = format_fixed(value);
    if (ranks.best && value == *ranks.best) {
        return "**" + text + "**";
    }
    if (ranks.second && value == *ranks.second) {
        return "<u>" + text + "</u>";
    }
    return text;
}

} // namespace detail

/// Renders reports sharing one task column set. Markdown bolds the best
/// value per column and underlines the second best (ties mark every holder);
/// csv and json carry the same cells unstyled. All values print with three
/// decimals.
inline std::string emit_report(const std::vector<MetricReport>& reports, ReportFormat format) {
    if (reports.empty()) {
        throw EmptyList("no reports to emit");
    }
    const std::vector<std::string>& columns = reports.front().columns;
    for (const MetricReport& r : reports) {
        if (r.columns != columns) {
            throw ColumnMismatch("report '" + r.label + "' has a different task column set");
        }
        if (r.macro_harmonic.has_value() && *r.macro_harmonic > r.macro_arithmetic) {
            throw Error("harmonic mean exceeded arithmetic mean; aggregation is broken");
        }
    }
    const bool any_reference = std::any_of(reports.begin(), reports.end(), [](const auto& r) {
        return r.reference_macro.has_value();
    });

    if (format == ReportFormat::json) {
        nlohmann::json rows = nlohmann::json::array();
        for (const MetricReport& r : reports) {
            nlohmann::json row;
            row["label"] = r.label;
            nlohmann::json cells;
            for (std::size_t i = 0; i < columns.size(); ++i) {
                cells[columns[i]] = format_fixed(r.accuracies[i]);
            }
            row["accuracies"] = cells;
            row["macro_arithmetic"] = format_fixed(r.macro_arithmetic);
            row["macro_harmonic"] =
                r.macro_harmonic ? nlohmann::json(format_fixed(*r.macro_harmonic))
                                 : nlohmann::json("undefined");
            if (r.reference_macro) {
                row["reference_macro"] = *r.reference_macro;
                row["macro_divergence"] = r.diverges_from_reference();
            }
            rows.push_back(row);
        }
        return nlohmann::json{{"schema", "mrp.report/1"}, {"rows", rows}}.dump(2) + "\n";
    }

    if (format == ReportFormat::csv) {
        std::string out = "label";
        for (const std::string& c : columns) {
            out += "," + c;
        }
        out += ",macro_arithmetic,macro_harmonic";
        if (any_reference) {
            out += ",reference_macro,macro_divergence";
        }
        out += "\n";
        for (const MetricReport& r : reports) {
            out += r.label;
            for (const Rational& a : r.accuracies) {
                out += "," + format_fixed(a);
            }
            out += "," + format_fixed(r.macro_arithmetic);
            out += "," + (r.macro_harmonic ? format_fixed(*r.macro_harmonic) : "undefined");
            if (any_reference) {
                out += "," + r.reference_macro.value_or("");
                out += r.diverges_from_reference() ? ",true" : ",false";
            }
            out += "\n";
        }
        return out;
    }

    // markdown
    std::vector<detail::ColumnRanks> ranks(columns.size());
    detail::ColumnRanks arith_ranks;
    detail::ColumnRanks harm_ranks;
    for (const MetricReport& r : reports) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            ranks[i].add(r.accuracies[i]);
        }
        arith_ranks.add(r.macro_arithmetic);
        if (r.macro_harmonic) {
            harm_ranks.add(*r.macro_harmonic);
        }
    }

    std::string out = "| Method |";
    for (const std::string& c : columns) {
        out += " " + c + " |";
    }
    out += " Arith. Mean | Harm. Mean |";
    out += "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out += "---|";
    }
    out += "---|---|\n";

    std::vector<std::string> footnotes;
    for (const MetricReport& r : reports) {
        out += "| " + r.label + " |";
        for (std::size_t i = 0; i < columns.size(); ++i) {
            out += " " + detail::style_cell(r.accuracies[i], ranks[i]) + " |";
        }
        std::string arith = detail::style_cell(r.macro_arithmetic, arith_ranks);
        if (r.diverges_from_reference()) {
            arith += " \xE2\x80\xA0"; // dagger
            footnotes.push_back("\xE2\x80\xA0 " + r.label + ": recomputed mean " +
                                format_fixed(r.macro_arithmetic) +
                                " differs from previously reported " + *r.reference_macro);
        }
        out += " " + arith + " |";
        out += " " +
               (r.macro_harmonic ? detail::style_cell(*r.macro_harmonic, harm_ranks)
                                 : std::string("undef")) +
               " |\n";
    }
    for (const std::string& note : footnotes) {
        out += "\n" + note;
    }
    if (!footnotes.empty()) {
        out += "\n";
    }
    return out;
}

} // namespace mrp
