#include "gemhp/stream.hpp"

#include "gemhp/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace gemhp {

using nlohmann::json;

std::size_t EventStream::count(int component) const noexcept {
    std::size_t n = 0;
    for (const auto& r : records) n += (r.k == component);
    return n;
}

void EventStream::validate(const MarkSpace& space) const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw Error(ErrorKind::InvalidInput, "stream horizon must be finite and > 0");
    }
    if (d < 1) throw Error(ErrorKind::InvalidInput, "stream needs d >= 1");
    space.validate(x0);
    double prev = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!(r.t > prev) || !(r.t <= horizon)) {
            throw Error(ErrorKind::InvalidInput, "event " + std::to_string(i) +
                                                     ": times must be strictly increasing within (0, T]");
        }
        if (r.k < 0 || r.k >= d) {
            throw Error(ErrorKind::InvalidInput, "event " + std::to_string(i) + ": label out of range");
        }
        space.validate(r.x);
        prev = r.t;
    }
}

namespace {

void append_real(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

void append_mark(std::string& out, const Mark& x, bool integer) {
    if (integer && x.size() == 1) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(x.front()));
        out += buf;
        return;
    }
    out += '[';
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) out += ", ";
        append_real(out, x[i]);
    }
    out += ']';
}

Mark parse_mark(const json& j) {
    if (j.is_number()) return Mark{j.get<double>()};
    if (j.is_array()) {
        Mark x;
        for (const auto& v : j) {
            if (!v.is_number()) throw Error(ErrorKind::InvalidInput, "mark arrays must hold numbers");
            x.push_back(v.get<double>());
        }
        return x;
    }
    throw Error(ErrorKind::InvalidInput, "mark must be a number or an array");
}

} // namespace

void write_stream(std::ostream& os, const EventStream& stream, const MarkSpace& space) {
    const bool integer = space.is_discrete();
    std::string line = "{\"T\": ";
    append_real(line, stream.horizon);
    line += ", \"d\": " + std::to_string(stream.d) + ", \"x0\": ";
    append_mark(line, stream.x0, integer);
    if (stream.seed) line += ", \"seed\": " + std::to_string(*stream.seed);
    if (!stream.config_hash.empty()) line += ", \"config_hash\": " + json(stream.config_hash).dump();
    line += "}\n";
    os << line;
    for (const auto& r : stream.records) {
        line = "{\"t\": ";
        append_real(line, r.t);
        line += ", \"k\": " + std::to_string(r.k) + ", \"x\": ";
        append_mark(line, r.x, integer);
        line += "}\n";
        os << line;
    }
}

void write_stream_file(const std::string& path, const EventStream& stream, const MarkSpace& space) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::InvalidInput, "cannot open '" + path + "' for writing");
    write_stream(os, stream, space);
    if (!os) throw Error(ErrorKind::InvalidInput, "failed writing '" + path + "'");
}

EventStream read_stream(std::istream& is) {
    EventStream s;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::InvalidInput, "stream line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object()) throw Error(ErrorKind::InvalidInput, "stream line " + std::to_string(lineno) + " is not an object");
        try {
            if (!have_header) {
                for (const auto& [key, value] : j.items()) {
                    if (key != "T" && key != "d" && key != "x0" && key != "seed" && key != "config_hash") {
                        throw Error(ErrorKind::InvalidInput, "unknown stream header field '" + key + "'");
                    }
                }
                s.horizon = j.at("T").get<double>();
                s.d = j.at("d").get<int>();
                s.x0 = parse_mark(j.at("x0"));
                if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
                if (j.contains("config_hash")) s.config_hash = j.at("config_hash").get<std::string>();
                have_header = true;
                continue;
            }
            if (j.size() != 3) throw Error(ErrorKind::InvalidInput, "event records need exactly t, k, x");
            EventRecord r;
            r.t = j.at("t").get<double>();
            r.k = j.at("k").get<int>();
            r.x = parse_mark(j.at("x"));
            s.records.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::InvalidInput, "stream line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw Error(ErrorKind::InvalidInput, "stream has no header line");
    return s;
}

EventStream read_stream_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::InvalidInput, "cannot open stream file '" + path + "'");
    return read_stream(is);
}

} // namespace gemhp
