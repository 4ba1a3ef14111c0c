#pragma once

// Serialization of value fields and strategies: long-format CSV and a binary dump
// (one JSON header line, then little-endian float64 values in (s, x, regime) order).

#include <iosfwd>
#include <string>

#include "rsctl/grid.hpp"

namespace rsctl {

/// Shortest round-trip decimal representation (locale independent).
std::string format_number(double v);

void write_field_csv(std::ostream& out, const ValueField& field);
void write_strategy_csv(std::ostream& out, const FeedbackStrategy& strategy);
void write_field_binary(std::ostream& out, const ValueField& field);
ValueField read_field_binary(std::istream& in);

}  // namespace rsctl
