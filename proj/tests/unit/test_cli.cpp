#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdlab/commands.hpp"
#include "cdlab/config.hpp"
#include "cdlab/error.hpp"
#include "doctest.h"

using namespace cdlab;
namespace fs = std::filesystem;

namespace {

std::size_t error_line(std::string_view text) {
  try {
    Config::parse(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CDLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cdlab-test-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const Config c = Config::parse(
      "seed = 7  # trailing comment\n"
      "\n"
      "[space]\n"
      "nx = 64\n"
      "K=16.5\n"
      "[mgh]\n"
      "eps = 0.5, 0.25,0.125\n"
      "[profile]\n"
      "singular = true\n"
      "expression = k*(1 + x)\n");
  CHECK(c.get_int("seed", 0) == 7);
  CHECK(c.get_int("space.nx", 0) == 64);
  CHECK(c.get_double("space.K", 0) == 16.5);
  CHECK(c.get_list("mgh.eps", {}) == std::vector<double>{0.5, 0.25, 0.125});
  CHECK(c.get_bool("profile.singular", false));
  CHECK(c.get_string("profile.expression", "") == "k*(1 + x)");
  CHECK(c.get_double("space.nu", 3.5) == 3.5);
  CHECK_FALSE(c.has("nx"));
  CHECK(c.entries().size() == 6);
}

TEST_CASE("config errors carry line numbers") {
  CHECK(error_line("a = 1\n[space\nnx = 3\n") == 2);
  CHECK(error_line("a = 1\nb = 2\njust words\n") == 3);
  CHECK(error_line("[s]\nx = 1\nx = 2\n") == 3);
  CHECK(error_line("key =   \n") == 1);
  CHECK(error_line("[bad name]\n") == 1);
  CHECK(error_line("# comment\n\nbad key = 1\n") == 3);

  const Config c = Config::parse("[space]\nnx = sixty\nK = 1e999x\n");
  try {
    c.get_int("space.nx", 0);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).rfind("line 2:", 0) == 0);
  }
  CHECK_THROWS_AS(c.get_double("space.K", 0), ConfigError);
  CHECK_THROWS_AS(Config::load("/nonexistent/cdlab.cfg"), Error);
}

TEST_CASE("overrides and unknown keys") {
  Config c = Config::parse("[space]\nnx = 16\n");
  c.set("space.nx", "32");
  CHECK(c.get_int("space.nx", 0) == 32);
  c.set("space.nu", "many");
  CHECK_THROWS_AS(c.get_int("space.nu", 0), PreconditionError);

  const Config bad = Config::parse("[space]\nnx = 16\n[cd]\nnprim = 3\n");
  try {
    bad.require_known(known_options());
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(run_command("verify-cd", "", bad), ConfigError);
}

TEST_CASE("command dispatch") {
  const Config c;
  CHECK_THROWS_AS(run_command("frobnicate", "", c), PreconditionError);
  CHECK_THROWS_AS(run_command("counterexample", "sideways", c), PreconditionError);
  CHECK_THROWS_AS(run_command("mgh", "strict", c), PreconditionError);
}

TEST_CASE("reports are deterministic and follow the schema") {
  Config c;
  c.set("space.nx", "32");
  c.set("space.nu", "8");
  c.set("seed", "11");
  const RunReport a = run_command("verify-cd", "", c);
  const RunReport b = run_command("verify-cd", "", c);
  CHECK(report_text(a) == report_text(b));
  CHECK(a.report["schema"] == kReportSchema);
  CHECK(a.report["command"] == "verify-cd");
  CHECK(a.report["verdict"] == "pass");
  CHECK(a.exit_code == kExitPass);
  CHECK(a.report["checks"].size() == 5);
  for (const auto& ch : a.report["checks"]) {
    CHECK(ch.contains("id"));
    CHECK(ch.contains("passed"));
    CHECK(ch.contains("metrics"));
  }
  CHECK(a.files.size() == 3);

  c.set("output.dir", "/somewhere/else");
  CHECK(report_text(run_command("verify-cd", "", c)) == report_text(a));
}

TEST_CASE("a rejected profile is a verified failure") {
  Config c;
  c.set("profile.expression", "4*k");
  const RunReport r = run_command("validate-profile", "", c);
  CHECK(r.exit_code == kExitFailure);
  CHECK(r.report["verdict"] == "fail");
}

TEST_CASE("command-line driver") {
  const fs::path out = scratch("pass");
  CHECK(run_cli("validate-profile --out " + out.string()) == kExitPass);
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "run_meta.json"));
  CHECK(fs::exists(out / "profile.csv"));
  CHECK(slurp(out / "report.json").find("\"schema\": \"cdlab.report/1\"") != std::string::npos);

  const fs::path cfg = scratch("cfg");
  fs::create_directories(cfg);
  std::ofstream(cfg / "bad.cfg") << "[profile]\nexpression = 4*k\n";
  CHECK(run_cli("validate-profile --config " + (cfg / "bad.cfg").string() + " --out " + (cfg / "o").string()) ==
        kExitFailure);

  std::ofstream(cfg / "broken.cfg") << "[profile\n";
  CHECK(run_cli("validate-profile --config " + (cfg / "broken.cfg").string()) == kExitError);
  CHECK(run_cli("no-such-command") == kExitError);
  CHECK(run_cli("counterexample sideways") == kExitError);
  CHECK(run_cli("--help") == 0);

  const fs::path nm = scratch("nomap");
  CHECK(run_cli("counterexample no-map --out " + nm.string()) == kExitPass);
  CHECK(slurp(nm / "report.json").find("\"variant\": \"no-map\"") != std::string::npos);
}
