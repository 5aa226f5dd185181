#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lpcure/errors.hpp"

namespace lpcure {

enum class Status : int { Censored = 0, Event = 1, Cured = 2 };

struct Subject {
    double time = 0.0;  // follow-up time; +infinity iff status == Cured
    Status status = Status::Censored;
    double covariate = 0.0;
};

// Right-censored-with-cure sample.  Immutable after construction; thresholding
// returns a new Dataset.
class Dataset {
  public:
    Dataset() = default;
    explicit Dataset(std::vector<Subject> subjects,
                     std::optional<double> cure_threshold = std::nullopt)
        : subjects_(std::move(subjects)), cure_threshold_(cure_threshold) {
        if (subjects_.empty()) throw Error("dataset must contain at least one subject");
        x_min_ = std::numeric_limits<double>::infinity();
        x_max_ = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < subjects_.size(); ++i) {
            const Subject& s = subjects_[i];
            const bool inf_time = std::isinf(s.time);
            if (s.status == Status::Cured && !inf_time)
                throw Error("subject " + std::to_string(i) + ": cured subject with finite time");
            if (s.status != Status::Cured && inf_time)
                throw Error("subject " + std::to_string(i) + ": infinite time requires cured status");
            if (!inf_time && !(s.time >= 0.0))
                throw Error("subject " + std::to_string(i) + ": negative or non-finite time");
            if (!std::isfinite(s.covariate))
                throw Error("subject " + std::to_string(i) + ": non-finite covariate");
            x_min_ = std::min(x_min_, s.covariate);
            x_max_ = std::max(x_max_, s.covariate);
        }
    }

    const std::vector<Subject>& subjects() const { return subjects_; }
    std::size_t size() const { return subjects_.size(); }
    const Subject& operator[](std::size_t i) const { return subjects_[i]; }

    std::optional<double> cure_threshold() const { return cure_threshold_; }
    double covariate_min() const { return x_min_; }
    double covariate_max() const { return x_max_; }

    std::size_t count(Status st) const {
        std::size_t k = 0;
        for (const Subject& s : subjects_)
            if (s.status == st) ++k;
        return k;
    }
    std::size_t n_events() const { return count(Status::Event); }
    std::size_t n_cured() const { return count(Status::Cured); }

  private:
    std::vector<Subject> subjects_;
    std::optional<double> cure_threshold_;
    double x_min_ = 0.0, x_max_ = 0.0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_time_field(const std::string& field, std::size_t line) {
    if (field == "inf") return std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(field, &pos);
    } catch (const std::exception&) {
        throw CsvError(line, "cannot parse time value '" + field + "'");
    }
    if (pos != field.size()) throw CsvError(line, "trailing characters in time value '" + field + "'");
    if (std::isinf(v)) throw CsvError(line, "infinite time must be written as 'inf'");
    if (!(v >= 0.0) || std::isnan(v)) throw CsvError(line, "time must be nonnegative");
    return v;
}

inline double parse_double_field(const std::string& field, const char* name, std::size_t line) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(field, &pos);
    } catch (const std::exception&) {
        throw CsvError(line, std::string("cannot parse ") + name + " value '" + field + "'");
    }
    if (pos != field.size())
        throw CsvError(line, std::string("trailing characters in ") + name + " value '" + field + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Full-precision decimal that round-trips a double.
inline std::string format_double(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// Schema: header `time,status,x`, status 0=censored 1=event 2=cured, time a
// nonnegative decimal or the literal `inf` (required exactly when status=2).
inline Dataset load_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw CsvError(1, "empty file");
    {
        auto cols = detail::split_csv_line(line);
        if (cols != std::vector<std::string>{"time", "status", "x"})
            throw CsvError(1, "expected header 'time,status,x'");
    }
    std::vector<Subject> subjects;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto cols = detail::split_csv_line(line);
        if (cols.size() != 3) throw CsvError(lineno, "expected 3 fields, got " + std::to_string(cols.size()));
        double t = detail::parse_time_field(cols[0], lineno);
        double st_raw = detail::parse_double_field(cols[1], "status", lineno);
        if (st_raw != 0.0 && st_raw != 1.0 && st_raw != 2.0)
            throw CsvError(lineno, "status must be 0, 1 or 2");
        auto status = static_cast<Status>(static_cast<int>(st_raw));
        if (status == Status::Cured && !std::isinf(t))
            throw CsvError(lineno, "cured subject (status 2) requires time 'inf'");
        if (status != Status::Cured && std::isinf(t))
            throw CsvError(lineno, "time 'inf' requires cured status (status 2)");
        double x = detail::parse_double_field(cols[2], "covariate", lineno);
        if (!std::isfinite(x)) throw CsvError(lineno, "covariate must be finite");
        subjects.push_back({t, status, x});
    }
    if (subjects.empty()) throw CsvError(lineno, "no data rows");
    return Dataset(std::move(subjects));
}

inline Dataset load_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open input file '" + path + "'");
    return load_csv(in);
}

inline void write_csv(const Dataset& ds, std::ostream& out) {
    out << "time,status,x\n";
    for (const Subject& s : ds.subjects())
        out << detail::format_double(s.time) << ',' << static_cast<int>(s.status) << ','
            << detail::format_double(s.covariate) << '\n';
}

// Reclassifies every subject with time strictly greater than `zeta` as cured
// (its time becomes +infinity; the original event/censor label is discarded).
// Subjects observed as events beyond `zeta` are rejected: under the cure
// convention the threshold must not precede any failure.
inline Dataset apply_cure_threshold(const Dataset& ds, double zeta) {
    if (!(zeta > 0.0)) throw Error("cure threshold must be positive");
    std::vector<Subject> out;
    out.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Subject s = ds[i];
        if (s.status == Status::Event && s.time > zeta)
            throw Error("subject " + std::to_string(i) + ": event at time " +
                        detail::format_double(s.time) + " exceeds cure threshold " +
                        detail::format_double(zeta));
        if (s.status == Status::Censored && s.time > zeta) {
            s.status = Status::Cured;
            s.time = std::numeric_limits<double>::infinity();
        }
        out.push_back(s);
    }
    return Dataset(std::move(out), zeta);
}

// p_bar, the fraction of subjects classified as cured.
inline double observed_cure_fraction(const Dataset& ds) {
    return static_cast<double>(ds.n_cured()) / static_cast<double>(ds.size());
}

}  // namespace lpcure
