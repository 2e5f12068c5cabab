#pragma once

// JSON documents: scenarios, solver outputs, and bare states. Every written
// document carries "format_version": 1; readers accept it when present and
// reject any other value. Unknown fields are rejected.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "marketeq/matrix.hpp"
#include "marketeq/model.hpp"
#include "marketeq/solvers.hpp"

namespace marketeq {

inline constexpr int kFormatVersion = 1;

// Throws Error(kIo) on malformed JSON and kInvalidScenario on schema
// violations (unknown or missing fields, wrong types, bad shapes).
Scenario ParseScenario(const std::string& text);
Scenario LoadScenario(const std::filesystem::path& path);

std::string FormatScenario(const Scenario& scenario);
void SaveScenario(const std::filesystem::path& path, const Scenario& scenario);

// Solution document: final state, clearing prices, gap and counters.
std::string FormatSolution(const ConvergenceTrace& trace);

// Accepts a solution document (reads "state"), a {"format_version", "state"}
// document, or a bare array of rows. Throws kIo on anything else.
MarketState ParseState(const std::string& text);
MarketState LoadState(const std::filesystem::path& path);
std::string FormatState(const MarketState& x);

std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace marketeq
