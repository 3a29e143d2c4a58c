#pragma once

#include "gemhp/marks.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gemhp {

struct EventRecord {
    double t{0.0};
    int k{0};
    Mark x;
};

/// Events on (0, horizon], strictly increasing in time.
struct EventStream {
    std::vector<EventRecord> records;
    double horizon{0.0};
    int d{1};
    Mark x0;
    /// Provenance carried through the file header when present.
    std::optional<std::uint64_t> seed;
    std::string config_hash;

    [[nodiscard]] std::size_t size() const noexcept { return records.size(); }
    [[nodiscard]] std::size_t count(int component) const noexcept;

    /// Throws InvalidInput on unordered or shared times, times outside
    /// (0, horizon], labels outside [0, d), or marks outside `space`.
    void validate(const MarkSpace& space) const;
};

/// Line-delimited JSON. First line is the header
/// {"T": horizon, "d": components, "x0": mark[, "seed": n, "config_hash": s]},
/// then one {"t": time, "k": label, "x": mark} per event. Integer marks are
/// written as integers, continuous marks as arrays. Reals use 17 significant
/// digits, so reading back reproduces every double exactly.
void write_stream(std::ostream& os, const EventStream& stream, const MarkSpace& space);
void write_stream_file(const std::string& path, const EventStream& stream, const MarkSpace& space);
[[nodiscard]] EventStream read_stream(std::istream& is);
[[nodiscard]] EventStream read_stream_file(const std::string& path);

} // namespace gemhp
