#pragma once

#include "gemhp/model.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace gemhp {

inline constexpr std::string_view kModelSchema = "gemhp/model-v1";

/// Parses a model document (schema "gemhp/model-v1"). Unknown fields are
/// errors. Coefficients are numbers or parameter names. Throws InvalidInput.
///
///   {
///     "schema": "gemhp/model-v1",
///     "components": 1,
///     "parameters": [{"name": "nu", "lower": 0.05, "upper": 5, "value": 1}, ...],
///     "marks": {"space": {"kind": "continuous", "dim": 1},
///               "kernels": [{"family": "gaussian-ar1", "mean": 0, "coef": 0.5, "sd": 1}]},
///     "baselines": [{"form": "constant", "coef": ["nu"]}],
///     "kernels": [{"target": 0, "source": 0,
///                  "terms": [{"poly": ["a"], "r": "b", "c": 0, "d": 0, "xi": 0}],
///                  "boost": {"form": "constant", "coef": [1]}}],
///     "link": {"type": "linear"},
///     "floors": {"r_min": 1e-3, "phi_min": 1e-8, "g_min": 1e-8},
///     "probe": [[0.0], [1.0]],
///     "x0": [0.0]
///   }
///
/// Without "marks" the process is unmarked (one categorical level). A single
/// mark-kernel object applies to every component.
[[nodiscard]] ModelSpec parse_model(std::string_view json_text);
[[nodiscard]] ModelSpec load_model(const std::string& path);

[[nodiscard]] std::string read_text_file(const std::string& path);

/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;
[[nodiscard]] std::string hex64(std::uint64_t v);

} // namespace gemhp
