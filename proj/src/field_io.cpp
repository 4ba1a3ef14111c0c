#include "rsctl/field_io.hpp"

#include "json.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>

#include "rsctl/errors.hpp"

namespace rsctl {

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_field_csv(std::ostream& out, const ValueField& field) {
  out << "s,x,i,value\n";
  const TimeGrid& t = field.times();
  const SpatialGrid& g = field.grid();
  for (int k = 0; k < t.size(); ++k)
    for (int x = 0; x < g.n_x; ++x)
      for (int i = 0; i < field.regimes(); ++i)
        out << format_number(t[k]) << ',' << format_number(g.x(x)) << ',' << (i + 1) << ','
            << format_number(field(k, x, i)) << '\n';
}

void write_strategy_csv(std::ostream& out, const FeedbackStrategy& strategy) {
  const int d = strategy.dimension();
  out << "s,x,i";
  for (int c = 0; c < d; ++c) out << ",u" << c;
  out << '\n';
  const TimeGrid& t = strategy.times();
  const SpatialGrid& g = strategy.grid();
  for (int k = 0; k < t.size(); ++k)
    for (int x = 0; x < g.n_x; ++x)
      for (int i = 0; i < strategy.regimes(); ++i) {
        out << format_number(t[k]) << ',' << format_number(g.x(x)) << ',' << (i + 1);
        for (int c = 0; c < d; ++c) out << ',' << format_number(strategy.level(k)(x, i * d + c));
        out << '\n';
      }
}

namespace {

void put_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char bytes[8];
  std::memcpy(bytes, &bits, 8);
  out.write(bytes, 8);
}

double get_le(std::istream& in) {
  char bytes[8];
  if (!in.read(bytes, 8)) throw ConfigError("binary field dump truncated");
  std::uint64_t bits;
  std::memcpy(&bits, bytes, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

void write_field_binary(std::ostream& out, const ValueField& field) {
  nlohmann::ordered_json header;
  header["format"] = "rsctl-field";
  header["dtype"] = "float64-le";
  header["layout"] = "s,x,i";
  header["n_t"] = field.times().size();
  header["n_x"] = field.grid().n_x;
  header["regimes"] = field.regimes();
  header["x_min"] = field.grid().x_min;
  header["x_max"] = field.grid().x_max;
  header["times"] = field.times().nodes;
  out << header.dump() << '\n';
  for (int k = 0; k < field.times().size(); ++k)
    for (int x = 0; x < field.grid().n_x; ++x)
      for (int i = 0; i < field.regimes(); ++i) put_le(out, field(k, x, i));
}

ValueField read_field_binary(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("binary field dump has no header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("binary field header is not JSON: ") + e.what());
  }
  if (header.value("format", "") != "rsctl-field") throw ConfigError("not an rsctl field dump");
  TimeGrid times(header.at("times").get<std::vector<double>>());
  SpatialGrid grid(header.at("x_min").get<double>(), header.at("x_max").get<double>(), header.at("n_x").get<int>());
  const int m = header.at("regimes").get<int>();
  ValueField field(times, grid, m);
  for (int k = 0; k < times.size(); ++k)
    for (int x = 0; x < grid.n_x; ++x)
      for (int i = 0; i < m; ++i) field.level(k)(x, i) = get_le(in);
  return field;
}

}  // namespace rsctl
