#pragma once

// Deterministic text and binary output: CSV tables, frozen fields, path dumps.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "mkfk/field.hpp"
#include "mkfk/trajectory.hpp"

namespace mkfk {

/// Shortest round-trip representation; identical bytes for identical doubles.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    return v;
}

/// FNV-1a 64-bit hash, hex encoded.
inline std::string fnv1a64_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    for (int i = 15; i >= 0; --i) {
        buf[i] = "0123456789abcdef"[h & 0xF];
        h >>= 4;
    }
    return std::string(buf, 16);
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    template <class... Ts>
    void row(const Ts&... vals) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(vals), first = false), ...);
        out_ << '\n';
    }

private:
    template <class T>
    static std::string cell(const T& v) {
        if constexpr (std::is_floating_point_v<T>)
            return format_double(static_cast<double>(v));
        else if constexpr (std::is_integral_v<T>)
            return std::to_string(v);
        else
            return std::string(v);
    }

    std::ofstream out_;
};

/// Per-step summary: step,time,mean_x,var_x,mean_V.
inline void write_summary_csv(const std::filesystem::path& path, const TrajectoryRecord& rec) {
    CsvWriter w(path, {"step", "time", "mean_x", "var_x", "mean_V"});
    for (const auto& s : rec.summary) w.row(s.step, s.time, s.mean_x, s.var_x, s.mean_V);
}

/// Field snapshots on the diagnostics grid: step,time,y,u,grad_u.
inline void write_snapshots_csv(const std::filesystem::path& path, const TrajectoryRecord& rec) {
    CsvWriter w(path, {"step", "time", "y", "u", "grad_u"});
    for (const auto& snap : rec.snapshots)
        for (std::size_t j = 0; j < rec.diag_y.size(); ++j)
            w.row(snap.step, rec.grid.time(snap.step), rec.diag_y[j], snap.u[j], snap.grad[j]);
}

/// Frozen field in columnar form: step,center,weight (slice order).
inline void write_field_csv(const std::filesystem::path& path, const FKField& f) {
    CsvWriter w(path, {"step", "center", "weight"});
    for (std::size_t k = 0; k < f.n_slices(); ++k) {
        const auto& s = f.slice(k);
        for (std::size_t j = 0; j < s.size(); ++j) w.row(k, s.centers()[j], s.weights()[j]);
    }
}

inline FKField read_field_csv(const std::filesystem::path& path, const KernelSpec& kernel, const TimeGrid& grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "step,center,weight") throw std::runtime_error(path.string() + ": unexpected field CSV header");
    std::vector<std::vector<double>> xs(grid.n_points()), ws(grid.n_points());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
        try {
            const auto k = static_cast<std::size_t>(parse_double(std::string_view(line).substr(0, c1)));
            if (k >= grid.n_points()) throw std::invalid_argument("step beyond grid");
            xs[k].push_back(parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1)));
            ws[k].push_back(parse_double(std::string_view(line).substr(c2 + 1)));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    FKField f(kernel, grid);
    for (std::size_t k = 0; k < grid.n_points(); ++k) f.set_slice(k, FieldSlice::from_sorted(std::move(xs[k]), std::move(ws[k])));
    return f;
}

/// Binary path dump: one JSON header line, then little-endian float64 blocks
/// x, A, G, V, each step-major with shape [n_points, n_particles].
inline void write_path_dump(const std::filesystem::path& path, const TrajectoryRecord& rec, const std::string& config_hash) {
    if (!rec.has_paths) throw std::invalid_argument("write_path_dump: record has no paths");
    nlohmann::ordered_json header;
    header["format"] = "mkfk-paths-v1";
    header["dtype"] = "float64-le";
    header["layout"] = "step-major";
    header["shape"] = {rec.grid.n_points(), rec.n_particles};
    header["fields"] = {"x", "A", "G", "V"};
    header["seed"] = rec.seed;
    header["config_hash"] = config_hash;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << header.dump() << '\n';
    static_assert(std::endian::native == std::endian::little, "path dump assumes a little-endian host");
    for (const auto* v : {&rec.paths.x, &rec.paths.A, &rec.paths.G, &rec.paths.V})
        out.write(reinterpret_cast<const char*>(v->data()), static_cast<std::streamsize>(v->size() * sizeof(double)));
}

struct PathDump {
    nlohmann::json header;
    PathStore paths;
};

inline PathDump read_path_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    PathDump d;
    d.header = nlohmann::json::parse(line);
    const std::size_t np = d.header["shape"][0], n = d.header["shape"][1];
    d.paths.n_particles = n;
    for (auto* v : {&d.paths.x, &d.paths.A, &d.paths.G, &d.paths.V}) {
        v->resize(np * n);
        in.read(reinterpret_cast<char*>(v->data()), static_cast<std::streamsize>(v->size() * sizeof(double)));
        if (!in) throw std::runtime_error(path.string() + ": truncated path dump");
    }
    return d;
}

} // namespace mkfk
