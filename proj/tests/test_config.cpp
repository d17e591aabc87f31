#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamlab/config.hpp"
#include "beamlab/csv.hpp"
#include "beamlab/errors.hpp"
#include "beamlab/scenarios.hpp"
#include "doctest.h"

using namespace beamlab;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// CSV body: everything after the '#' header block.
std::string body(const std::string& path) {
    std::istringstream in(slurp(path));
    std::string out;
    for (std::string line; std::getline(in, line);)
        if (line.empty() || line[0] != '#') out += line + "\n";
    return out;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("beamlab_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("defaults and echo round trip") {
    const RunConfig d = default_config();
    CHECK(d.text("manifold", "kind") == "disk");
    CHECK(d.integer("beam", "order") == 7);
    CHECK(d.numbers("beam", "taus") == std::vector<double>{50, 100, 200, 400});
    CHECK(d.vectors("cylinder", "dn_h").size() == 5);
    CHECK(d.vectors("cylinder", "dn_h")[4] == std::vector<double>{0.3, -0.7});
    CHECK(d.exprs("beam", "psi").size() == 4);
    CHECK(d.items("beam", "psi")[3] == "exp(x2)");
    CHECK(cylinder_alpha(d) == doctest::Approx(0.1));
    CHECK(d.is_default("manifold", "radius"));
    for (const auto& k : config_schema()) CHECK_MESSAGE(!k.doc.empty(), k.section << "." << k.key);

    const std::string echo = d.echo();
    CHECK(parse_config(echo).echo() == echo);
    CHECK(parse_config("").echo() == echo);

    const RunConfig m = parse_config("[manifold]\nkind = disk\nradius = 2\n; comment\n# comment\n");
    CHECK(m.number("manifold", "radius") == 2);
    CHECK(!m.is_default("manifold", "radius"));
    CHECK(parse_config(m.echo()).echo() == m.echo());
    CHECK(m.echo().find("radius = 2\n") != std::string::npos);
}

TEST_CASE("misspelled enum names the key and the alternatives") {
    const std::string e = error_of("[manifold]\nkind = dsik\n");
    CHECK(e.find("kind") != std::string::npos);
    CHECK(e.find("dsik") != std::string::npos);
    for (const char* alt : {"disk", "sphere_cap", "conformal_disk"}) CHECK(e.find(alt) != std::string::npos);
}

TEST_CASE("constraint violations cite the inequality") {
    const std::string e = error_of("[cylinder]\nalpha = 0.5\n");
    CHECK(e.find("m_s * alpha + mu_w + 1/2 < 0") != std::string::npos);
    CHECK(error_of("[cylinder]\nalpha = 0.2\nm_s = 1\n").empty());
    CHECK(error_of("[beam]\norder = 5\n").find("2K + 3") != std::string::npos);
    CHECK(error_of("[xray]\nreg = 0\n").find("reg") != std::string::npos);
}

TEST_CASE("all errors are reported together") {
    try {
        parse_config("[manifold]\nradus = 1\nkind = dsik\n[geodesic]\nh_ode = abc\n[nowhere]\nx = 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.items().size() == 4);
        CHECK(error_of("[manifold]\nkind = dsik\n[cylinder]\nalpha = 0.5\n").find("mu_w + 1/2") != std::string::npos);
        const std::string w = e.what();
        CHECK(w.find("radus") != std::string::npos);
        CHECK(w.find("radius") != std::string::npos);  // valid keys listed
        CHECK(w.find("h_ode") != std::string::npos);
        CHECK(w.find("nowhere") != std::string::npos);
    }
    CHECK(!error_of("[beam]\ntaus = 50, x\n").empty());
    CHECK(!error_of("[beam]\npsi = 1; x1 +\n").empty());
    CHECK(!error_of("[beam]\norder = 7.5\n").empty());
    CHECK(!error_of("orphan = 1\n").empty());
    CHECK(!error_of("[beam\n").empty());
    CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), ConfigError);
}

TEST_CASE("set validates") {
    RunConfig c = default_config();
    c.set("manifold", "kind", "sphere_cap");
    CHECK(c.text("manifold", "kind") == "sphere_cap");
    CHECK_THROWS_AS(c.set("manifold", "kind", "torus"), ConfigError);
    CHECK_THROWS_AS(c.set("manifold", "color", "red"), ConfigError);
    CHECK_THROWS_AS(c.set("cylinder", "alpha", "1"), ConfigError);
    CHECK_THROWS_AS(c.number("manifold", "kind"), ConfigError);
}

TEST_CASE("number formatting and slopes") {
    CHECK(format_number(-0.0, 12) == "0");
    CHECK(format_number(0.1, 12) == "0.1");
    CHECK(format_number(std::nan(""), 12) == "nan");
    CHECK(loglog_slope({1, 2, 4, 8}, {3, 3 / 4.0, 3 / 16.0, 3 / 64.0}) == doctest::Approx(-2).epsilon(1e-12));
}

TEST_CASE("CSV header carries the config echo") {
    const fs::path dir = scratch("csv");
    fs::create_directories(dir);
    const RunConfig c = parse_config("[output]\nprecision = 5\n");
    const std::string path = (dir / "a.csv").string();
    {
        CsvWriter w(path, "demo", c, {{"x", "abscissa"}, {"label", "name"}});
        w.row({1.0 / 3, std::string("one")});
        w.row({long(2), std::string("two")});
        CHECK_THROWS_AS(w.row({1.0}), PreconditionError);
    }
    const std::string text = slurp(path);
    CHECK(text.find("# beamlab demo\n") != std::string::npos);
    CHECK(text.find("#   precision = 5\n") != std::string::npos);
    CHECK(text.find("#   x: abscissa\n") != std::string::npos);
    CHECK(text.find("generated") == std::string::npos);
    CHECK(body(path) == "x,label\n0.33333,one\n2,two\n");
    fs::remove_all(dir);
}

TEST_CASE("scenarios: names, usage errors and deterministic output") {
    CHECK(scenario_names().size() == 9);
    CHECK(command_names().size() == 14);
    const RunConfig c = default_config();
    try {
        run_scenario("nonsense", c, scratch("none").string());
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        for (const auto& n : scenario_names()) CHECK(std::string(e.what()).find(n) != std::string::npos);
    }
    CHECK_THROWS_AS(run_command("cyl", "bogus", c, scratch("none").string()), UsageError);

    const fs::path a = scratch("det_a"), b = scratch("det_b");
    const ScenarioResult ra = run_scenario("cyl-continue", c, a.string());
    const ScenarioResult rb = run_scenario("cyl-continue", c, b.string());
    CHECK(ra.pass);
    CHECK(ra.failures.empty());
    REQUIRE(ra.files.size() == 2);
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
        CHECK(slurp(ra.files[i]) == slurp(rb.files[i]));
        CHECK(!body(ra.files[i]).empty());
    }
    const std::string rec = write_result_record(ra, a.string());
    CHECK(slurp(rec).find("\"pass\": true") != std::string::npos);

    // A threshold that cannot be met fails with a record, not an exception.
    RunConfig strict = c;
    strict.set("cylinder", "cont_tol", "1e-30");
    const ScenarioResult rs = run_scenario("cyl-continue", strict, a.string());
    CHECK(!rs.pass);
    CHECK(rs.failures.size() == 2);

    const ScenarioResult re = run_command("cyl", "eigen", c, a.string());
    CHECK(re.metrics.at("lambda_1") == doctest::Approx(1.0).epsilon(1e-3));
    fs::remove_all(a);
    fs::remove_all(b);
}
