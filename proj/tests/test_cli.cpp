#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "panelmix/asymdist.hpp"

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(PANELMIX_CLI) + " " + args + " > cli_stdout.txt 2> cli_stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

nlohmann::json load(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

struct Data {
  Data() {
    REQUIRE(run("simulate --seed 1 --alpha 0.5 0.5 --mu -2 2 --sigma 1 1 --n 200 --T 3 -o cli_two.csv") == 0);
    REQUIRE(run("simulate --seed 2 --alpha 1 --mu 0 --sigma 1 --n 200 --T 3 -o cli_one.csv") == 0);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Data, "test command reports a strong rejection with stars") {
  REQUIRE(run("test -i cli_two.csv --m0 1 --draws 500 --seed 3 -o cli_test.json") == 0);
  const nlohmann::json j = load("cli_test.json");
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("p_value").get<double>() < 0.01);
  CHECK(j.at("stars") == "***");
  CHECK(j.at("p_source") == "asymptotic");
}

TEST_CASE_FIXTURE(Data, "repeated runs are byte-identical") {
  REQUIRE(run("test -i cli_two.csv --m0 1 --draws 300 --seed 9 -o cli_a.json") == 0);
  REQUIRE(run("test -i cli_two.csv --m0 1 --draws 300 --seed 9 -o cli_b.json") == 0);
  CHECK(slurp("cli_a.json") == slurp("cli_b.json"));
  REQUIRE(run("simulate --seed 1 --alpha 0.5 0.5 --mu -2 2 --sigma 1 1 --n 200 --T 3 -o cli_two_again.csv") == 0);
  CHECK(slurp("cli_two.csv") == slurp("cli_two_again.csv"));
}

TEST_CASE_FIXTURE(Data, "select picks one component on homogeneous data") {
  REQUIRE(run("select -i cli_one.csv --mbar 3 --method em --draws 500 --seed 4 -o cli_sel.json") == 0);
  const nlohmann::json j = load("cli_sel.json");
  CHECK(j.at("results").at(0).at("M_hat") == 1);
  REQUIRE(run("select -i cli_two.csv --mbar 3 --method bic --seed 4 -o cli_bic.json") == 0);
  CHECK(load("cli_bic.json").at("results").at(0).at("M_hat") == 2);
}

TEST_CASE_FIXTURE(Data, "fit and critical values") {
  REQUIRE(run("fit -i cli_two.csv -m 2 --seed 5 -o cli_fit.json") == 0);
  const std::string fit = slurp("cli_fit.json");
  CHECK(fit.find("\"M\": 2") != std::string::npos);

  REQUIRE(run("crit -i cli_one.csv --m0 1 --draws 200 --seed 6 --samples-out cli_samples.csv -o cli_crit.json") == 0);
  std::ifstream is("cli_samples.csv");
  const panelmix::NullDistribution d = panelmix::read_samples_csv(is);
  CHECK(d.samples.size() == 200u);

  REQUIRE(run("crit --an-table -o cli_an.json") == 0);
  const nlohmann::json an = load("cli_an.json");
  CHECK(an.at("covariate_constants").at(1) == 0.0025);
  CHECK(an.at("formula").at(0).at("inv_n") == 28.143);
}

TEST_CASE_FIXTURE(Data, "bad input exits with code 2") {
  CHECK(run("test -i cli_missing_file.csv --m0 1") == 2);
  CHECK(slurp("cli_stderr.txt").find("cli_missing_file.csv") != std::string::npos);
  CHECK(run("test -i cli_two.csv --no-such-flag") == 2);
  CHECK(run("test -i cli_two.csv --y income") == 2);
  std::ofstream("cli_unbalanced.csv") << "unit,period,y\na,1,1\na,2,2\nb,1,3\n";
  CHECK(run("fit -i cli_unbalanced.csv -m 1") == 2);
  CHECK(slurp("cli_stderr.txt").find("unbalanced") != std::string::npos);
  CHECK(run("simulate --alpha 0.7 0.7 --mu 0 1 --sigma 1 1 --n 10 --T 2") == 2);
}
