#include <sstream>

#include <gtest/gtest.h>

#include "ktraffic/io.hpp"

namespace ktraffic {
namespace {

TEST(FormatNumber, FifteenSignificantDigits) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333333");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(10000.0), "10000");
  EXPECT_EQ(format_number(1e-20), "1e-20");
}

TEST(RoundSignificant, ShortestJsonHasAtMostFifteenDigits) {
  const nlohmann::json j = round_significant(2.0 / 3.0);
  EXPECT_EQ(j.dump(), "0.666666666666667");
}

TEST(EquilibriumJson, FieldNames) {
  const auto j = equilibrium_to_json(equilibrium_recursive(3, 0.75));
  for (const char* key : {"n", "rho", "f_inf", "q", "u", "phase", "stable", "branch_data"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["n"], 3);
  EXPECT_EQ(j["phase"], "Congested");
  EXPECT_EQ(j["stable"], true);
  EXPECT_EQ(j["f_inf"].size(), 3u);
  EXPECT_EQ(j["branch_data"][1]["j"], 2);
  EXPECT_DOUBLE_EQ(j["branch_data"][1]["discriminant"].get<double>(), 0.34375);
}

TEST(DiagramCsv, HeaderAndRows) {
  const auto d = sweep(2, {0.0, 0.5, 1.0}, SweepMethod::Recursive);
  std::ostringstream out;
  write_diagram_csv(out, d);
  EXPECT_EQ(out.str(), "rho,q,u,phase\n0,0,1,Free\n0.5,0.5,1,Free\n1,0,0,Congested\n");
}

TEST(DiagramJson, Fields) {
  const auto j = diagram_to_json(sweep(2, default_grid(11), SweepMethod::Recursive));
  EXPECT_EQ(j["n"], 2);
  EXPECT_EQ(j["method"], "recursive");
  EXPECT_EQ(j["sigma"], 0.5);
  EXPECT_EQ(j["q_max"], 0.5);
  EXPECT_EQ(j["points"].size(), 11u);
  EXPECT_TRUE(j["points"][0].contains("phase"));
}

TEST(DiagramSvg, TwoPanelsWithPolylines) {
  std::ostringstream out;
  write_diagram_svg(out, rescale_dimensional(sweep(6, default_grid(21), SweepMethod::Recursive), ModelParams{}),
                    ModelParams{});
  const std::string svg = out.str();
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t count = 0;
  for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++count;
  EXPECT_EQ(count, 2u);
  EXPECT_NE(svg.find("vehicles/km"), std::string::npos);
  EXPECT_NE(svg.find("km/h"), std::string::npos);
}

TEST(OpenOutput, UnwritablePathNamesThePath) {
  try {
    open_output("/nonexistent-dir/out.csv");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/out.csv"), std::string::npos);
  }
}

}  // namespace
}  // namespace ktraffic
