#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gnat/cli_report.hpp"

using namespace gnat;

namespace {

const char* kMinimal = R"({"base_manifold": "flat2", "profile": "sasaki"})";

RunConfig with_fields(const std::string& profile, const std::string& manifold = "\"flat2\"") {
  return parse_config(R"({"base_manifold": )" + manifold + R"(, "profile": )" + profile + R"(,
    "fields": {
      "rot": {"lift": "complete_lift", "X": ["-x2", "x1"]},
      "hom": {"lift": "complete_lift", "X": ["x1", "x2"]},
      "xv": {"lift": "vertical_lift", "X": ["0.7", "-0.4"]},
      "ip": {"lift": "iota_P", "P": [["0", "1"], ["-1", "0"]]},
      "mix": {"lift": "custom", "components": ["u1", "0", "-x1", "0"]}
    },
    "samples": 6, "seed": 4})");
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("halton points") {
  const auto p = halton_points(3, 64, 9);
  REQUIRE(p.size() == 64);
  for (const auto& v : p)
    for (double c : v) {
      CHECK(c >= 0.0);
      CHECK(c < 1.0);
    }
  // the rotation is a common shift, so differences match the unshifted sequence modulo 1
  const auto q = halton_points(3, 4, 9);
  auto frac = [](double v) { return v - std::floor(v); };
  CHECK(frac(q[1][0] - q[0][0]) == doctest::Approx(0.75));   // 1/4 - 1/2
  CHECK(frac(q[1][1] - q[0][1]) == doctest::Approx(1.0 / 3.0));  // 2/3 - 1/3
  CHECK(frac(q[1][2] - q[0][2]) == doctest::Approx(0.2));    // 2/5 - 1/5
  CHECK(halton_points(2, 5, 1) == halton_points(2, 5, 1));
  CHECK(halton_points(2, 5, 1) != halton_points(2, 5, 2));
  CHECK_THROWS_AS(halton_points(0, 3, 1), std::invalid_argument);

  const auto s2 = round_sphere(2);
  for (const auto& b : sample_bundle(s2, 30, 3, 0.5)) {
    CHECK(s2.contains(b.x));
    for (double u : b.u) CHECK(std::abs(u) <= 0.5);
  }
}

TEST_CASE("serial and parallel sweeps agree") {
  auto f = [](int i) { return std::sin(0.1 * i); };
  CHECK(sweep<double>(100, f, Exec::serial) == sweep<double>(100, f, Exec::parallel));
}

TEST_CASE("config validation") {
  auto cfg = parse_config(kMinimal);
  CHECK(cfg.chart->name() == "flat2");
  CHECK(cfg.profile.name() == "sasaki");
  CHECK(cfg.samples == 20);
  CHECK(cfg.commands.empty());

  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaky"})").find("profile") == 0);
  CHECK(error_of(R"({"base_manifold": "flat9", "profile": "sasaki"})").find("base_manifold") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki", "sample": 3})").find("sample") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2"})").find("profile: missing") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": {"a1": "1", "a4": "0"}})").find("profile.a4") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": {"a1": "1+", "a3": "1"}})").find("profile.a1") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki", "samples": 0})").find("samples") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki", "seed": -1})").find("seed") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki", "tolerance": 0})").find("tolerance") == 0);

  // non-symmetric metric: g_12 and g_21 print differently
  const std::string asym = error_of(R"({"base_manifold": {"coords": ["a", "b"], "box": [[0, 1], [0, 1]],
      "metric": [["1", "a"], ["b", "1"]]}, "profile": "sasaki"})");
  CHECK(asym.find("base_manifold.metric") == 0);
  CHECK(asym.find("not symmetric") != std::string::npos);
  // symmetric up to canonical printing is accepted
  CHECK(error_of(R"({"base_manifold": {"coords": ["a", "b"], "box": [[0, 1], [0, 1]],
      "metric": [["2", "a*b"], ["a*b", "2"]]}, "profile": "sasaki"})").empty());

  const std::string parse = error_of("{\"base_manifold\": \"flat2\",\n \"profile\": }");
  CHECK(parse.find("line 2") != std::string::npos);

  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki",
      "fields": {"z": {"lift": "vertical_lift", "X": ["1"]}}})").find("fields.z.X") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki",
      "fields": {"z": {"lift": "spin", "X": ["1", "0"]}}})").find("fields.z.lift") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki",
      "fields": {"z": {"lift": "vertical_lift", "X": ["1", "0"], "P": []}}})").find("fields.z.P") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki", "commands": ["taylor q"]})").find("commands[0]") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki", "commands": ["classify rot"]})").find("commands[0]") == 0);
  CHECK(error_of(R"({"base_manifold": "flat2", "profile": "sasaki", "commands": ["plot"]})").find("commands[0]") == 0);

  CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), ConfigError);
  CHECK_THROWS_AS(run_command(cfg, "taylor rot"), ConfigError);
  apply_overrides(cfg, 3, 11u, 1e-5);
  CHECK(cfg.samples == 3);
  CHECK(cfg.source["seed"] == 11);
  CHECK_THROWS_AS(apply_overrides(cfg, 0, std::nullopt, std::nullopt), ConfigError);
}

TEST_CASE("commands") {
  auto sasaki = with_fields("\"sasaki\"");
  auto cg = with_fields("\"cheeger_gromoll\"");

  SUBCASE("classify on Sasaki is case 4") {
    auto r = run_command(sasaki, "classify");
    CHECK(r.ok);
    CHECK(r.data["case"] == 4);
    CHECK(r.data["discriminants"]["a"] == 1.0);
  }
  SUBCASE("classify rejects a = 0") {
    auto bad = parse_config(R"({"base_manifold": "flat2", "profile": {"a1": "1", "a2": "1"}})");
    auto r = run_command(bad, "classify");
    CHECK_FALSE(r.ok);
    CHECK(r.error.find("t = 0") != std::string::npos);
  }
  SUBCASE("verify-killing") {
    auto r = run_command(cg, "verify-killing rot");
    CHECK(r.ok);
    CHECK(r.data["verdict"] == "killing");
    CHECK(r.data["max_residual"].get<double>() <= 1e-9);
    CHECK(r.rows.size() == 6);
    r = run_command(cg, "verify-killing hom");
    CHECK_FALSE(r.ok);
    CHECK(r.data["verdict"] == "not_killing");
    CHECK(r.data["agrees"] == true);
    r = run_command(sasaki, "verify-killing xv");
    CHECK(r.ok);
    r = run_command(cg, "verify-killing xv");
    CHECK_FALSE(r.ok);
    CHECK(r.data["predicted"] == "not_killing");
  }
  SUBCASE("lie-derivative of X^v under Cheeger-Gromoll") {
    auto r = run_command(cg, "lie-derivative xv");
    CHECK(r.ok);
    REQUIRE(r.rows.size() == 6 * 3 * 4);
    // vv block against the closed form for vertical lifts at the first row point
    const auto& row = r.rows[8];
    CHECK(row.block == "vv");
    BundlePoint p{row.x, row.u};
    auto cf = closed_form_lift_LG_at(cg.profile, *cg.chart, p.x, p.u, cg.fields.at("xv"), ClosedForm::vertical_lift);
    CHECK(row.value == doctest::Approx(cf.blocks.vv(row.k, row.l)).epsilon(1e-9));
    CHECK(r.data["max_abs"]["vv"].get<double>() > 0.05);
    CHECK(r.data["adapted_route_deviation"].get<double>() <= 1e-7);
    auto s = run_command(sasaki, "lie-derivative xv");
    CHECK(s.data["max_abs"]["vv"].get<double>() == 0.0);
  }
  SUBCASE("taylor on the rotation mixing x1 and u1") {
    auto r = run_command(sasaki, "taylor mix");
    CHECK(r.ok);
    CHECK(r.data["case"] == 4);
    CHECK(r.data["counts"]["fail"] == 0);
    CHECK(r.data["counts"]["pass"].get<int>() > 30);
    CHECK(r.data["coefficients_at_first_point"]["K"][0] == 1.0);
    auto h = run_command(sasaki, "taylor hom");
    CHECK_FALSE(h.ok);
  }
  SUBCASE("check-metric") {
    auto r = run_command(cg, "check-metric");
    CHECK(r.ok);
    CHECK(r.data["nondegenerate"] == true);
    CHECK(r.data["self_test"]["pass"] == true);
    auto deg = parse_config(R"({"base_manifold": "flat2", "profile": {"a1": "1-4*t", "a3": "1"}})");
    auto d = run_command(deg, "check-metric");
    CHECK_FALSE(d.ok);
    CHECK(d.data["nondegenerate"] == false);
  }
}

TEST_CASE("report emission") {
  auto cfg = with_fields("\"cheeger_gromoll\"");
  SUBCASE("empty command list") {
    auto rep = run_report(cfg, {});
    CHECK(rep.ok());
    auto j = Json::parse(report_json(rep));
    CHECK(j["results"].empty());
    CHECK(j["ok"] == true);
    CHECK(report_csv(rep, 2) == "x1,x2,u1,u2,block,k,l,value\n");
  }
  SUBCASE("byte-stable across runs and execution policies") {
    const std::vector<std::string> cmds = {"classify", "lie-derivative xv", "verify-killing rot", "taylor mix"};
    auto a = run_report(cfg, cmds, Exec::parallel);
    auto b = run_report(cfg, cmds, Exec::serial);
    CHECK(report_json(a) == report_json(b));
    CHECK(report_csv(a, 2) == report_csv(b, 2));
    CHECK(report_json(a, true).find("wall_seconds") != std::string::npos);
    CHECK(report_json(a).find("wall_seconds") == std::string::npos);
    auto other = cfg;
    apply_overrides(other, std::nullopt, 5u, std::nullopt);
    CHECK(run_report(other, {"classify"}).config_digest != a.config_digest);
  }
  SUBCASE("csv rows") {
    auto rep = run_report(cfg, {"lie-derivative xv"});
    const auto csv = report_csv(rep, 2);
    CHECK(csv.rfind("x1,x2,u1,u2,block,k,l,value\n", 0) == 0);
    const auto second = csv.substr(csv.find('\n') + 1);
    CHECK(second.find(",hh,0,0,") != std::string::npos);
  }
}

TEST_CASE("fnv1a") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
